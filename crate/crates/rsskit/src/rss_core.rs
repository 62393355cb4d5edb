//! Core RSS machinery for a shared lane geometry: safe distances, danger
//! detection, and proper-response acceleration constraints.
//!
//! Conventions used throughout (matching [`crate::geometry`]):
//!
//! * longitudinal positions grow along the driving direction of the lane;
//!   positive longitudinal velocity means driving with the lane direction;
//! * lateral positions are in meters and grow to the *right* of the lane
//!   direction, so the "left" car of a pair is the one with the smaller
//!   lateral position;
//! * all speeds are m/s, accelerations m/s^2, distances between cars are
//!   *gaps* between the nearest points of their bounding boxes.

use crate::kinematics::Motion1D;
use crate::math::Interval;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when auditing whether an applied acceleration lies inside
/// a constraint interval.
pub const ACCEL_TOL: f64 = 1e-9;

/// Lateral speeds below this magnitude count as "no lateral motion" when a
/// response requires braking to zero lateral velocity.
pub const LAT_VEL_REST_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RssError {
    #[error("speeds must be non-negative for the same-direction distance (got v_rear={v_rear}, v_front={v_front})")]
    NegativeSpeedSameDir { v_rear: f64, v_front: f64 },
    #[error("opposite-direction distance needs v1 >= 0 and v2 <= 0 (got v1={v1}, v2={v2})")]
    SignViolation { v1: f64, v2: f64 },
    #[error("braking rate must be positive (got {0})")]
    NonPositiveBrake(f64),
    #[error("the pair is not in a dangerous situation")]
    NotDangerous,
    #[error("invalid parameter set: {0}")]
    InvalidParameters(String),
}

/// The behavioral parameters of the RSS model.
///
/// All fields are strictly positive except `rho` and `mu` which only need to
/// be non-negative in principle; validation enforces the documented
/// relationships (`a_min_brake <= a_max_brake`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RssParameters {
    /// Response time in seconds.
    pub rho: f64,
    /// Maximal longitudinal acceleration during the response time.
    pub a_max_accel: f64,
    /// Minimal longitudinal braking demanded by a proper response.
    pub a_min_brake: f64,
    /// Maximal longitudinal braking any car is assumed to apply.
    pub a_max_brake: f64,
    /// Minimal braking demanded from the correct-direction car in an
    /// oncoming conflict (gentler than `a_min_brake`).
    pub a_min_brake_correct: f64,
    /// Maximal lateral acceleration during the response time.
    pub a_lat_max_accel: f64,
    /// Minimal lateral braking demanded by a proper response.
    pub a_lat_min_brake: f64,
    /// Lateral safety margin in meters that must remain between cars after
    /// the worst-case lateral maneuvers.
    pub mu: f64,
}

impl Default for RssParameters {
    fn default() -> Self {
        RssParameters {
            rho: 0.5,
            a_max_accel: 3.5,
            a_min_brake: 4.0,
            a_max_brake: 8.0,
            a_min_brake_correct: 3.0,
            a_lat_max_accel: 1.0,
            a_lat_min_brake: 1.5,
            mu: 0.1,
        }
    }
}

impl RssParameters {
    /// Validates the relationships between the fields.
    pub fn validated(self) -> Result<Self, RssError> {
        let p = self;
        let all_finite = [
            p.rho,
            p.a_max_accel,
            p.a_min_brake,
            p.a_max_brake,
            p.a_min_brake_correct,
            p.a_lat_max_accel,
            p.a_lat_min_brake,
            p.mu,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(RssError::InvalidParameters("all parameters must be finite".into()));
        }
        if p.rho < 0.0 {
            return Err(RssError::InvalidParameters("rho must be non-negative".into()));
        }
        if p.a_max_accel <= 0.0
            || p.a_min_brake <= 0.0
            || p.a_max_brake <= 0.0
            || p.a_min_brake_correct <= 0.0
            || p.a_lat_max_accel <= 0.0
            || p.a_lat_min_brake <= 0.0
        {
            return Err(RssError::InvalidParameters("acceleration bounds must be positive".into()));
        }
        if p.a_min_brake > p.a_max_brake {
            return Err(RssError::InvalidParameters(
                "a_min_brake must not exceed a_max_brake".into(),
            ));
        }
        if p.a_min_brake_correct > p.a_min_brake {
            return Err(RssError::InvalidParameters(
                "a_min_brake_correct must not exceed a_min_brake".into(),
            ));
        }
        if p.mu < 0.0 {
            return Err(RssError::InvalidParameters("mu must be non-negative".into()));
        }
        Ok(p)
    }

    /// The full longitudinal acceleration range a forward-driving car is
    /// assumed to stay inside; exceeding it is itself a violation.
    pub fn lon_universe(&self) -> Interval {
        Interval::new(-self.a_max_brake, self.a_max_accel)
    }

    /// Direction-aware version of [`Self::lon_universe`]: for a car moving
    /// against the lane direction the envelope mirrors (braking a backward
    /// motion is a positive acceleration).
    pub fn lon_universe_for(&self, lon_vel: f64) -> Interval {
        if lon_vel >= 0.0 {
            self.lon_universe()
        } else {
            Interval::new(-self.a_max_accel, self.a_max_brake)
        }
    }

    /// The analogous lateral envelope. Lateral braking may exceed the
    /// response-time lateral acceleration bound, so the envelope spans the
    /// larger of the two magnitudes.
    pub fn lat_universe(&self) -> Interval {
        let m = self.a_lat_max_accel.max(self.a_lat_min_brake);
        Interval::new(-m, m)
    }
}

/// Stopping distance of a car braking at a constant rate.
pub fn stopping_distance(v: f64, brake: f64) -> Result<f64, RssError> {
    if brake <= 0.0 {
        return Err(RssError::NonPositiveBrake(brake));
    }
    debug_assert!(v >= 0.0, "stopping distance expects a forward speed");
    Ok(v * v / (2.0 * brake))
}

/// Safe longitudinal distance between a rear car at `v_rear` and a front car
/// at `v_front`, both driving in the lane direction.
///
/// The rear car is assumed to accelerate at `a_max_accel` for the response
/// time and then brake at `a_min_brake`; the front car brakes at
/// `a_max_brake`. The result is the minimal initial gap that avoids contact
/// under those maneuvers (clamped at zero).
pub fn safe_lon_distance_same_dir(v_rear: f64, v_front: f64, p: &RssParameters) -> Result<f64, RssError> {
    if v_rear < 0.0 || v_front < 0.0 {
        return Err(RssError::NegativeSpeedSameDir { v_rear, v_front });
    }
    let v_resp = v_rear + p.rho * p.a_max_accel;
    let d = v_rear * p.rho + 0.5 * p.a_max_accel * p.rho * p.rho
        + v_resp * v_resp / (2.0 * p.a_min_brake)
        - v_front * v_front / (2.0 * p.a_max_brake);
    Ok(d.max(0.0))
}

/// Safe longitudinal distance for cars driving toward each other: `v1 >= 0`
/// is the correct-direction car, `v2 <= 0` the car driving against the lane.
///
/// Both cars are assumed to keep accelerating (in absolute value) for the
/// response time; afterwards the correct-direction car brakes at
/// `a_min_brake_correct` and the other at `a_min_brake`.
pub fn safe_lon_distance_opposite(v1: f64, v2: f64, p: &RssParameters) -> Result<f64, RssError> {
    if v1 < 0.0 || v2 > 0.0 {
        return Err(RssError::SignViolation { v1, v2 });
    }
    let v1_resp = v1 + p.rho * p.a_max_accel;
    let v2_abs = -v2;
    let v2_resp = v2_abs + p.rho * p.a_max_accel;
    let d = (v1 + v1_resp) / 2.0 * p.rho
        + v1_resp * v1_resp / (2.0 * p.a_min_brake_correct)
        + (v2_abs + v2_resp) / 2.0 * p.rho
        + v2_resp * v2_resp / (2.0 * p.a_min_brake);
    Ok(d.max(0.0))
}

/// Safe lateral distance between a left car `c1` and a right car `c2` whose
/// lateral velocities are `v1` and `v2` (positive = moving right).
///
/// Worst case: both steer toward each other at `a_lat_max_accel` for the
/// response time, then brake laterally at `a_lat_min_brake` to zero lateral
/// velocity. The final gap must still be at least `mu`.
///
/// The braking-phase displacement uses the *signed* square `v·|v|`, which
/// agrees with the usual formula whenever the post-response velocities still
/// point toward each other and extends it continuously when they do not
/// (strongly diverging cars).
pub fn safe_lat_distance(v1: f64, v2: f64, p: &RssParameters) -> Result<f64, RssError> {
    let b = 2.0 * p.a_lat_min_brake;
    let v1_resp = v1 + p.rho * p.a_lat_max_accel;
    let v2_resp = v2 - p.rho * p.a_lat_max_accel;
    // Rightward displacement of c1 and of c2 under their worst-case moves.
    let d1 = (v1 + v1_resp) / 2.0 * p.rho + v1_resp * v1_resp.abs() / b;
    let d2 = (v2 + v2_resp) / 2.0 * p.rho + v2_resp * v2_resp.abs() / b;
    Ok(p.mu + (d1 - d2).max(0.0))
}

/// Result of the robust lateral-velocity measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuLateralVelocity {
    /// The measured velocity (m/s); zero for oscillations inside the band.
    pub value: f64,
    /// Set when the track ended before the drift resolved either way, in
    /// which case `value` is zero.
    pub truncated: bool,
}

/// Robust lateral velocity at time `t` from a lateral-position track.
///
/// The velocity is zero unless the position leaves the band of width `mu`
/// centered at the position at `t` without first revisiting that position;
/// if it exits at `t_out` the velocity is the secant slope
/// `(l_out - l) / (t_out - t)`.
///
/// `track` is a sequence of `(timestamp, lateral position)` samples in
/// ascending time order; exits and revisits between samples are located by
/// linear interpolation.
pub fn mu_lateral_velocity(track: &[(f64, f64)], t: f64, mu: f64) -> MuLateralVelocity {
    let zero = MuLateralVelocity { value: 0.0, truncated: false };
    let Some(start) = track.iter().position(|&(ts, _)| ts >= t) else {
        return MuLateralVelocity { value: 0.0, truncated: true };
    };
    let (t0, l0) = track[start];
    let half = mu / 2.0;
    let mut prev = (t0, l0);
    for &(ts, ls) in &track[start + 1..] {
        // Did the position cross back through l0 on this segment (strictly
        // after the start)?
        let crossed_back = (prev.1 - l0) * (ls - l0) < 0.0 || (ls == l0 && prev.1 != l0);
        // Did it exit the band on this segment?
        let exit = if (ls - l0).abs() >= half && half > 0.0 {
            let target = if ls > l0 { l0 + half } else { l0 - half };
            let denom = ls - prev.1;
            let frac = if denom.abs() < 1e-15 { 1.0 } else { (target - prev.1) / denom };
            Some((prev.0 + frac * (ts - prev.0), target))
        } else {
            None
        };
        match (crossed_back, exit) {
            (true, None) => return zero,
            (false, Some((t_out, l_out))) => {
                if t_out <= t0 {
                    return zero;
                }
                return MuLateralVelocity { value: (l_out - l0) / (t_out - t0), truncated: false };
            }
            (true, Some((t_out, l_out))) => {
                // Same segment contains both a revisit and an exit: order them.
                let denom = ls - prev.1;
                let t_back = prev.0 + ((l0 - prev.1) / denom) * (ts - prev.0);
                if t_back <= t_out {
                    return zero;
                }
                return MuLateralVelocity { value: (l_out - l0) / (t_out - t0), truncated: false };
            }
            (false, None) => {}
        }
        prev = (ts, ls);
    }
    // Track exhausted inside the band. If it never moved we can report a firm
    // zero; otherwise the measurement is truncated.
    let moved = track[start..].iter().any(|&(_, l)| (l - l0).abs() > 1e-12);
    MuLateralVelocity { value: 0.0, truncated: moved }
}

/// Kinematic state of one agent in the shared lane frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Longitudinal position of the box center (m along the lane).
    pub lon_pos: f64,
    /// Longitudinal velocity (m/s, positive = with the lane direction).
    pub lon_vel: f64,
    /// Longitudinal acceleration currently applied (m/s^2).
    pub lon_acc: f64,
    /// Lateral position of the box center (m, positive = right of center).
    pub lat_pos: f64,
    /// Lateral velocity (m/s, positive = moving right).
    pub lat_vel: f64,
    /// Lateral acceleration currently applied (m/s^2).
    pub lat_acc: f64,
    /// Half the car length (m).
    pub half_length: f64,
    /// Half the car width (m).
    pub half_width: f64,
}

impl AgentState {
    /// Longitudinal interval occupied by the bounding box.
    pub fn lon_extent(&self) -> (f64, f64) {
        (self.lon_pos - self.half_length, self.lon_pos + self.half_length)
    }

    /// Lateral interval occupied by the bounding box.
    pub fn lat_extent(&self) -> (f64, f64) {
        (self.lat_pos - self.half_width, self.lat_pos + self.half_width)
    }
}

/// Longitudinal gap between the boxes (0 when they overlap longitudinally).
pub fn lon_gap(a: &AgentState, b: &AgentState) -> f64 {
    let (a_lo, a_hi) = a.lon_extent();
    let (b_lo, b_hi) = b.lon_extent();
    (b_lo - a_hi).max(a_lo - b_hi).max(0.0)
}

/// Lateral gap between the boxes (0 when they overlap laterally).
pub fn lat_gap(a: &AgentState, b: &AgentState) -> f64 {
    let (a_lo, a_hi) = a.lat_extent();
    let (b_lo, b_hi) = b.lat_extent();
    (b_lo - a_hi).max(a_lo - b_hi).max(0.0)
}

/// How the longitudinal conflict looked when it became dangerous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LonMode {
    /// Both cars driving in the same direction; carries which pair member is
    /// the rear car (with respect to the driving direction).
    SameDir { first_is_rear: bool },
    /// Cars driving toward each other; carries which member drives against
    /// the lane direction.
    OppositeDir { first_is_wrong_way: bool },
    /// Moving apart; no longitudinal danger can arise while this holds.
    Diverging,
}

/// The axis whose threshold fired last, fixing which proper response applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdMode {
    SameDir,
    OppositeDir,
    SideBySide,
}

/// Per-pair danger bookkeeping, updated once per simulation step.
///
/// Threshold times latch when an axis turns dangerous and clear when it turns
/// safe again. The pair is in a dangerous *situation* only while both axes
/// are dangerous simultaneously; the danger threshold time is then the later
/// of the two latched times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct DangerTracker {
    pub lon_dangerous: bool,
    pub lat_dangerous: bool,
    /// When the longitudinal axis last turned dangerous.
    pub t_b_long: Option<f64>,
    /// When the lateral axis last turned dangerous.
    pub t_b_lat: Option<f64>,
    /// Longitudinal configuration latched at `t_b_long`.
    pub lon_mode: Option<LonMode>,
    /// Whether the first pair member was the left car, latched at `t_b_lat`.
    pub first_is_left: Option<bool>,
    /// Which response applies, latched when the situation turns dangerous.
    pub mode_at_threshold: Option<ThresholdMode>,
}

impl DangerTracker {
    /// Danger threshold time: defined only while the situation is dangerous.
    pub fn t_b(&self) -> Option<f64> {
        if self.lon_dangerous && self.lat_dangerous {
            match (self.t_b_long, self.t_b_lat) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            }
        } else {
            None
        }
    }

    pub fn is_dangerous(&self) -> bool {
        self.t_b().is_some()
    }

    /// True when both axes turned dangerous at the same instant, in which
    /// case both longitudinal and lateral constraints apply.
    pub fn simultaneous_threshold(&self) -> bool {
        matches!((self.t_b_long, self.t_b_lat), (Some(a), Some(b)) if a == b)
    }
}

/// Classifies the longitudinal configuration of a pair.
///
/// Velocity signs decide the case: same signs (treating 0 as forward) use the
/// same-direction rule with the rear car defined along the driving direction;
/// opposite signs are an oncoming conflict when the cars approach each other
/// and a diverging (safe) configuration when they separate.
pub fn classify_lon(a: &AgentState, b: &AgentState) -> LonMode {
    let a_fwd = a.lon_vel >= 0.0;
    let b_fwd = b.lon_vel >= 0.0;
    if a_fwd == b_fwd {
        let first_is_rear = if a_fwd { a.lon_pos <= b.lon_pos } else { a.lon_pos >= b.lon_pos };
        LonMode::SameDir { first_is_rear }
    } else {
        // One drives forward, the other backward. They approach iff the
        // forward car is behind the backward car.
        let (fwd_pos, bwd_pos, first_is_wrong_way) = if a_fwd {
            (a.lon_pos, b.lon_pos, false)
        } else {
            (b.lon_pos, a.lon_pos, true)
        };
        if fwd_pos <= bwd_pos {
            LonMode::OppositeDir { first_is_wrong_way }
        } else {
            LonMode::Diverging
        }
    }
}

/// Instantaneous longitudinal safety verdict for a pair.
pub fn lon_dangerous_now(a: &AgentState, b: &AgentState, p: &RssParameters) -> (bool, LonMode) {
    let mode = classify_lon(a, b);
    let gap = lon_gap(a, b);
    let dangerous = match mode {
        LonMode::SameDir { first_is_rear } => {
            let (rear, front) = if first_is_rear { (a, b) } else { (b, a) };
            let d_min = safe_lon_distance_same_dir(rear.lon_vel.abs(), front.lon_vel.abs(), p)
                .expect("speeds are absolute values");
            gap < d_min
        }
        LonMode::OppositeDir { first_is_wrong_way } => {
            let (correct, wrong) = if first_is_wrong_way { (b, a) } else { (a, b) };
            let d_min = safe_lon_distance_opposite(correct.lon_vel, wrong.lon_vel, p)
                .expect("signs checked by classification");
            gap < d_min
        }
        LonMode::Diverging => false,
    };
    (dangerous, mode)
}

/// Instantaneous lateral safety verdict; also reports whether the first pair
/// member is the left car.
pub fn lat_dangerous_now(a: &AgentState, b: &AgentState, p: &RssParameters) -> (bool, bool) {
    let first_is_left = a.lat_pos <= b.lat_pos;
    let (left, right) = if first_is_left { (a, b) } else { (b, a) };
    let d_min = safe_lat_distance(left.lat_vel, right.lat_vel, p).expect("lateral distance is total");
    let gap = lat_gap(a, b);
    (gap < d_min, first_is_left)
}

/// Advances the danger bookkeeping of a pair to time `t`.
pub fn update_danger(
    prev: &DangerTracker,
    pair: (&AgentState, &AgentState),
    t: f64,
    p: &RssParameters,
) -> DangerTracker {
    let (a, b) = pair;
    let (lon_danger, lon_mode) = lon_dangerous_now(a, b, p);
    let (lat_danger, first_is_left) = lat_dangerous_now(a, b, p);

    let mut next = *prev;
    if lon_danger && !prev.lon_dangerous {
        next.t_b_long = Some(t);
        next.lon_mode = Some(lon_mode);
    } else if !lon_danger {
        next.t_b_long = None;
        next.lon_mode = None;
    }
    next.lon_dangerous = lon_danger;

    if lat_danger && !prev.lat_dangerous {
        next.t_b_lat = Some(t);
        next.first_is_left = Some(first_is_left);
    } else if !lat_danger {
        next.t_b_lat = None;
        next.first_is_left = None;
    }
    next.lat_dangerous = lat_danger;

    let was_dangerous = prev.is_dangerous();
    if next.is_dangerous() && !was_dangerous {
        let (tl, tlat) = (next.t_b_long.unwrap(), next.t_b_lat.unwrap());
        next.mode_at_threshold = Some(if tlat > tl {
            ThresholdMode::SideBySide
        } else {
            match next.lon_mode {
                Some(LonMode::OppositeDir { .. }) => ThresholdMode::OppositeDir,
                _ => ThresholdMode::SameDir,
            }
        });
    } else if !next.is_dangerous() {
        next.mode_at_threshold = None;
    }
    next
}

/// Which way an agent's lateral velocity is locked after it has braked to
/// zero lateral motion during a lateral proper response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LatDirectionLock {
    /// Only non-positive (leftward or zero) lateral velocity allowed.
    NonPositiveMuVel,
    /// Only non-negative (rightward or zero) lateral velocity allowed.
    NonNegativeMuVel,
}

/// Acceleration constraints imposed by a proper response on one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseConstraint {
    pub lon_acc_range: Interval,
    pub lat_acc_range: Interval,
    pub lat_direction_lock: Option<LatDirectionLock>,
    /// Set by aggregation when constraints cannot be satisfied jointly
    /// (empty interval intersection or contradictory direction locks).
    pub infeasible: bool,
}

impl ResponseConstraint {
    /// No obligation beyond the physical assumptions of the model.
    pub fn unconstrained(p: &RssParameters) -> Self {
        ResponseConstraint {
            lon_acc_range: p.lon_universe(),
            lat_acc_range: p.lat_universe(),
            lat_direction_lock: None,
            infeasible: false,
        }
    }

    /// Like [`Self::unconstrained`], with the longitudinal envelope oriented
    /// by the agent's driving direction.
    pub fn unconstrained_for(state: &AgentState, p: &RssParameters) -> Self {
        ResponseConstraint {
            lon_acc_range: p.lon_universe_for(state.lon_vel),
            ..ResponseConstraint::unconstrained(p)
        }
    }

    /// Checks an applied acceleration pair against the constraint.
    pub fn permits(&self, lon_acc: f64, lat_acc: f64) -> bool {
        !self.infeasible
            && self.lon_acc_range.contains(lon_acc, ACCEL_TOL)
            && self.lat_acc_range.contains(lat_acc, ACCEL_TOL)
    }
}

/// Intersects a set of constraints componentwise.
///
/// Emptiness and conflicting direction locks are *flagged* on the result
/// rather than reported as errors, so callers can surface infeasibility.
pub fn aggregate_constraints(constraints: &[ResponseConstraint]) -> Option<ResponseConstraint> {
    let mut iter = constraints.iter();
    let first = *iter.next()?;
    let mut acc = first;
    for c in iter {
        acc.lon_acc_range = acc.lon_acc_range.intersect(&c.lon_acc_range);
        acc.lat_acc_range = acc.lat_acc_range.intersect(&c.lat_acc_range);
        acc.lat_direction_lock = match (acc.lat_direction_lock, c.lat_direction_lock) {
            (None, l) => l,
            (l, None) => l,
            (Some(x), Some(y)) if x == y => Some(x),
            (Some(x), Some(_)) => {
                acc.infeasible = true;
                Some(x)
            }
        };
        acc.infeasible |= c.infeasible;
    }
    if acc.lon_acc_range.is_empty() || acc.lat_acc_range.is_empty() {
        acc.infeasible = true;
    }
    Some(acc)
}

/// Longitudinal constraint of the braking party, honoring the standstill
/// rule: once stopped while still dangerous, the car must not start driving.
pub(crate) fn braking_lon_constraint(current_vel: f64, min_brake: f64, p: &RssParameters) -> Interval {
    if current_vel > 0.0 {
        Interval::new(-p.a_max_brake, -min_brake)
    } else {
        // Stopped (or, defensively, somehow reversing): hold still.
        Interval::new(-p.a_max_brake, 0.0)
    }
}

/// Lateral constraint for an agent that must brake its lateral motion to zero
/// and afterwards only move away from the other car.
///
/// `lock` is the post-rest direction allowance (left car: non-positive).
fn lateral_braking_constraint(lat_vel: f64, lock: LatDirectionLock, p: &RssParameters) -> (Interval, Option<LatDirectionLock>) {
    let cap = p.lat_universe().hi;
    if lat_vel > LAT_VEL_REST_TOL {
        // Moving right: brake leftward.
        (Interval::new(-cap, -p.a_lat_min_brake), Some(lock))
    } else if lat_vel < -LAT_VEL_REST_TOL {
        // Moving left: brake rightward.
        (Interval::new(p.a_lat_min_brake, cap), Some(lock))
    } else {
        // At lateral rest: only accelerations consistent with the lock.
        let range = match lock {
            LatDirectionLock::NonPositiveMuVel => Interval::new(-cap, 0.0),
            LatDirectionLock::NonNegativeMuVel => Interval::new(0.0, cap),
        };
        (range, Some(lock))
    }
}

/// The basic proper response of both pair members at time `t`.
///
/// Requires the tracker to be in a dangerous situation. The response follows
/// from which axis fixed the danger threshold:
///
/// * threshold fixed longitudinally (cars were already laterally close):
///   same-direction case constrains the rear car to brake after the response
///   time; oncoming case constrains both;
/// * threshold fixed laterally (cut-in): both cars must brake laterally to
///   zero lateral velocity and then keep off each other;
/// * simultaneous thresholds apply both sets.
pub fn basic_proper_response(
    tracker: &DangerTracker,
    pair: (&AgentState, &AgentState),
    t: f64,
    p: &RssParameters,
) -> Result<(ResponseConstraint, ResponseConstraint), RssError> {
    let t_b = tracker.t_b().ok_or(RssError::NotDangerous)?;
    if t < t_b {
        return Err(RssError::NotDangerous);
    }
    let in_response_window = t - t_b < p.rho;
    let mut first = ResponseConstraint::unconstrained_for(pair.0, p);
    let mut second = ResponseConstraint::unconstrained_for(pair.1, p);

    let lon_applies = tracker.t_b_long == Some(t_b) || tracker.simultaneous_threshold();
    let lat_applies = tracker.t_b_lat == Some(t_b) || tracker.simultaneous_threshold();

    if lon_applies {
        match tracker.lon_mode.ok_or(RssError::NotDangerous)? {
            LonMode::SameDir { first_is_rear } => {
                // Orientation sign: when both drive backward the roles mirror.
                let rear_state = if first_is_rear { pair.0 } else { pair.1 };
                let forward = rear_state.lon_vel >= 0.0;
                let rear_constraint = if in_response_window {
                    // Accelerating beyond a_max_accel is already outside the
                    // universe; nothing extra to demand yet.
                    p.lon_universe_for(rear_state.lon_vel)
                } else if forward {
                    braking_lon_constraint(rear_state.lon_vel, p.a_min_brake, p)
                } else {
                    // Mirrored for backward-driving pairs.
                    let v = -rear_state.lon_vel;
                    let c = braking_lon_constraint(v, p.a_min_brake, p);
                    Interval::new(-c.hi, -c.lo)
                };
                // The front car must simply not exceed a_max_brake, which the
                // universe already encodes.
                if first_is_rear {
                    first.lon_acc_range = rear_constraint;
                } else {
                    second.lon_acc_range = rear_constraint;
                }
            }
            LonMode::OppositeDir { first_is_wrong_way } => {
                let (correct_state, wrong_state) =
                    if first_is_wrong_way { (pair.1, pair.0) } else { (pair.0, pair.1) };
                let correct_range = if in_response_window {
                    p.lon_universe()
                } else {
                    braking_lon_constraint(correct_state.lon_vel, p.a_min_brake_correct, p)
                };
                let wrong_range = if in_response_window {
                    // May keep accelerating backward only up to a_max_accel;
                    // braking the backward motion can reach a_max_brake.
                    Interval::new(-p.a_max_accel, p.a_max_brake)
                } else if wrong_state.lon_vel < 0.0 {
                    // Brake the backward motion at a_min_brake at least.
                    Interval::new(p.a_min_brake, p.a_max_brake)
                } else {
                    // At rest (or recovered): any non-negative acceleration.
                    Interval::new(0.0, p.a_max_accel)
                };
                if first_is_wrong_way {
                    first.lon_acc_range = wrong_range;
                    second.lon_acc_range = correct_range;
                } else {
                    first.lon_acc_range = correct_range;
                    second.lon_acc_range = wrong_range;
                }
            }
            LonMode::Diverging => {
                // A diverging pair cannot have latched a longitudinal
                // threshold; treat defensively as no extra constraint.
            }
        }
    }

    if lat_applies {
        let first_is_left = tracker.first_is_left.ok_or(RssError::NotDangerous)?;
        if in_response_window {
            let window = Interval::new(-p.a_lat_max_accel, p.a_lat_max_accel);
            first.lat_acc_range = first.lat_acc_range.intersect(&window);
            second.lat_acc_range = second.lat_acc_range.intersect(&window);
        } else {
            let (left, right) = if first_is_left { (pair.0, pair.1) } else { (pair.1, pair.0) };
            let (left_range, left_lock) =
                lateral_braking_constraint(left.lat_vel, LatDirectionLock::NonPositiveMuVel, p);
            let (right_range, right_lock) =
                lateral_braking_constraint(right.lat_vel, LatDirectionLock::NonNegativeMuVel, p);
            if first_is_left {
                first.lat_acc_range = left_range;
                first.lat_direction_lock = left_lock;
                second.lat_acc_range = right_range;
                second.lat_direction_lock = right_lock;
            } else {
                first.lat_acc_range = right_range;
                first.lat_direction_lock = right_lock;
                second.lat_acc_range = left_range;
                second.lat_direction_lock = left_lock;
            }
        }
    }

    Ok((first, second))
}

/// The per-axis naive prediction used when anticipating other agents: hold
/// the current acceleration, but never let the velocity cross zero — the
/// acceleration drops to zero at the crossing instant.
pub fn naive_prediction(s: &AgentState, dt: f64) -> AgentState {
    fn axis(p0: f64, v0: f64, a0: f64, dt: f64) -> (f64, f64, f64) {
        if a0 != 0.0 && v0 != 0.0 && (v0 > 0.0) != (a0 > 0.0) {
            let tau = -v0 / a0;
            if dt >= tau {
                let p = p0 + v0 * tau + 0.5 * a0 * tau * tau;
                return (p, 0.0, 0.0);
            }
        }
        (p0 + v0 * dt + 0.5 * a0 * dt * dt, v0 + a0 * dt, a0)
    }
    let (lon_pos, lon_vel, lon_acc) = axis(s.lon_pos, s.lon_vel, s.lon_acc, dt);
    let (lat_pos, lat_vel, lat_acc) = axis(s.lat_pos, s.lat_vel, s.lat_acc, dt);
    AgentState { lon_pos, lon_vel, lon_acc, lat_pos, lat_vel, lat_acc, ..*s }
}

/// A candidate evasive maneuver: piecewise lateral plan plus a constant
/// longitudinal acceleration (clamped at standstill).
#[derive(Debug, Clone, PartialEq)]
pub struct Maneuver {
    /// Longitudinal acceleration command (applied until standstill).
    pub lon_acc: f64,
    /// Relative lateral displacement target (m, signed).
    pub lat_offset: f64,
    /// Peak lateral acceleration used by the lateral plan.
    pub lat_peak_acc: f64,
    /// First-step acceleration commands, for constraint intersection.
    pub initial_lon_acc: f64,
    pub initial_lat_acc: f64,
}

/// Search resolution of the evasive-maneuver family.
const EVASION_LAT_OFFSETS: [f64; 5] = [0.0, -1.75, 1.75, -3.5, 3.5];
const EVASION_LAT_AGGRESSIVENESS: [f64; 3] = [1.0, 0.75, 0.5];
const EVASION_CHECK_DT: f64 = 0.01;

/// Searches a discretized family of maneuvers for a legal evasive maneuver
/// for `ego` against the agents it is currently in danger with.
///
/// A maneuver qualifies when, simulated against the naive predictions of all
/// currently-dangerous agents over `[0, horizon]`:
///
/// * no bounding boxes ever overlap,
/// * the final state is non-dangerous against each of them,
/// * its accelerations stay inside the physical envelope and its *initial*
///   acceleration satisfies the (post-response-window) basic proper response
///   against every other agent.
///
/// Returns `None` when the family is exhausted without a qualifying entry.
pub fn find_evasive_maneuver(
    ego: &AgentState,
    others: &[AgentState],
    horizon: f64,
    p: &RssParameters,
) -> Option<Maneuver> {
    let dangerous: Vec<&AgentState> = others
        .iter()
        .filter(|o| {
            let (lon_d, _) = lon_dangerous_now(ego, o, p);
            let (lat_d, _) = lat_dangerous_now(ego, o, p);
            lon_d && lat_d
        })
        .collect();
    if dangerous.is_empty() {
        return None;
    }

    let lon_candidates = [
        0.0,
        -p.a_min_brake,
        -p.a_max_brake,
        -0.5 * (p.a_min_brake + p.a_max_brake),
        -0.5 * p.a_min_brake,
        0.5 * p.a_max_accel,
        p.a_max_accel,
    ];

    for &lat_offset in &EVASION_LAT_OFFSETS {
        for &frac in &EVASION_LAT_AGGRESSIVENESS {
            let peak = frac * p.a_lat_max_accel;
            let lat_plan = crate::kinematics::plan_to_rest(ego.lat_vel, lat_offset, peak);
            let lat_motion = Motion1D::new(ego.lat_vel, &lat_plan);
            for &lon_acc in &lon_candidates {
                let lon_motion = Motion1D::new(
                    ego.lon_vel,
                    &[crate::kinematics::PhaseSpec {
                        accel: lon_acc,
                        duration: f64::INFINITY,
                        stop_at_zero: true,
                    }],
                );
                let m = Maneuver {
                    lon_acc,
                    lat_offset,
                    lat_peak_acc: peak,
                    initial_lon_acc: lon_motion.acceleration(0.0),
                    initial_lat_acc: lat_motion.acceleration(0.0),
                };
                if maneuver_is_legal(&m, ego, others, &dangerous, &lon_motion, &lat_motion, horizon, p) {
                    return Some(m);
                }
            }
        }
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn maneuver_is_legal(
    m: &Maneuver,
    ego: &AgentState,
    others: &[AgentState],
    dangerous: &[&AgentState],
    lon_motion: &Motion1D,
    lat_motion: &Motion1D,
    horizon: f64,
    p: &RssParameters,
) -> bool {
    // Physical envelope over the whole plan.
    if !p.lon_universe().contains(m.lon_acc, ACCEL_TOL) || m.lat_peak_acc > p.a_lat_max_accel + ACCEL_TOL {
        return false;
    }
    // Initial command must satisfy the basic proper response against every
    // other agent. Without threshold history we apply the strict
    // (post-response-window) form against the currently dangerous ones.
    for o in others {
        let tracker = instantaneous_tracker(ego, o, p);
        if tracker.is_dangerous() {
            let (c, _) = basic_proper_response(&tracker, (ego, o), p.rho, p)
                .expect("tracker is dangerous by construction");
            if !c.permits(m.initial_lon_acc, m.initial_lat_acc) {
                return false;
            }
        }
    }
    // Roll the maneuver against naive predictions of the dangerous agents.
    let steps = (horizon / EVASION_CHECK_DT).ceil() as usize;
    let mut ego_final = *ego;
    for k in 0..=steps {
        let t = (k as f64) * EVASION_CHECK_DT;
        let ego_t = AgentState {
            lon_pos: ego.lon_pos + lon_motion.position(t),
            lon_vel: lon_motion.velocity(t),
            lon_acc: lon_motion.acceleration(t),
            lat_pos: ego.lat_pos + lat_motion.position(t),
            lat_vel: lat_motion.velocity(t),
            lat_acc: lat_motion.acceleration(t),
            ..*ego
        };
        for o in dangerous {
            let o_t = naive_prediction(o, t);
            if lon_gap(&ego_t, &o_t) <= 0.0 && lat_gap(&ego_t, &o_t) <= 0.0 {
                return false;
            }
        }
        ego_final = ego_t;
    }
    // Must end non-dangerous against each conflicting agent.
    for o in dangerous {
        let o_t = naive_prediction(o, horizon);
        let (lon_d, _) = lon_dangerous_now(&ego_final, &o_t, p);
        let (lat_d, _) = lat_dangerous_now(&ego_final, &o_t, p);
        if lon_d && lat_d {
            return false;
        }
    }
    true
}

/// A tracker describing the pair as if the danger threshold were "now": used
/// when no step-by-step history is available.
pub fn instantaneous_tracker(a: &AgentState, b: &AgentState, p: &RssParameters) -> DangerTracker {
    update_danger(&DangerTracker::default(), (a, b), 0.0, p)
}

/// Proper response with the evasive-maneuver extension.
///
/// While the other agent complies, this is the basic proper response of
/// `pair.0`. Once the other agent has been observed violating its own
/// response, the ego may instead follow a legal evasive maneuver; the
/// returned constraint then pins the acceleration to the maneuver's command
/// (still inside the basic constraints, by legality).
pub fn proper_response_with_evasion(
    tracker: &DangerTracker,
    pair: (&AgentState, &AgentState),
    other_complied: bool,
    t: f64,
    horizon: f64,
    p: &RssParameters,
) -> Result<ResponseConstraint, RssError> {
    let (basic, _) = basic_proper_response(tracker, pair, t, p)?;
    if other_complied {
        return Ok(basic);
    }
    match find_evasive_maneuver(pair.0, std::slice::from_ref(pair.1), horizon, p) {
        Some(m) => {
            let mut c = basic;
            c.lon_acc_range = basic.lon_acc_range.intersect(&Interval::point(m.initial_lon_acc));
            c.lat_acc_range = basic.lat_acc_range.intersect(&Interval::point(m.initial_lat_acc));
            if c.lon_acc_range.is_empty() || c.lat_acc_range.is_empty() {
                // Legality should prevent this; fall back to the basic form.
                Ok(basic)
            } else {
                Ok(c)
            }
        }
        None => Ok(basic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p_default() -> RssParameters {
        RssParameters::default()
    }

    #[test]
    fn parameter_validation() {
        assert!(RssParameters::default().validated().is_ok());
        let bad = RssParameters { a_min_brake: 9.0, ..RssParameters::default() };
        assert!(bad.validated().is_err());
        let bad = RssParameters { rho: -0.1, ..RssParameters::default() };
        assert!(bad.validated().is_err());
    }

    #[test]
    fn stopping_distance_values() {
        assert_eq!(stopping_distance(30.0, 10.0).unwrap(), 45.0);
        assert_eq!(stopping_distance(0.0, 4.0).unwrap(), 0.0);
        assert_eq!(stopping_distance(10.0, 0.0), Err(RssError::NonPositiveBrake(0.0)));
    }

    #[test]
    fn same_dir_worked_example() {
        let p = RssParameters {
            rho: 1.0,
            a_max_accel: 2.0,
            a_min_brake: 4.0,
            a_max_brake: 8.0,
            ..RssParameters::default()
        };
        let d = safe_lon_distance_same_dir(20.0, 10.0, &p).unwrap();
        assert!((d - 75.25).abs() < 1e-12);
    }

    #[test]
    fn same_dir_clamps_and_rejects() {
        let p = p_default();
        // A much faster front car makes the bracket negative.
        assert_eq!(safe_lon_distance_same_dir(0.0, 40.0, &p).unwrap(), 0.0);
        assert!(matches!(
            safe_lon_distance_same_dir(-1.0, 5.0, &p),
            Err(RssError::NegativeSpeedSameDir { .. })
        ));
    }

    #[test]
    fn opposite_dir_degenerate_cases() {
        let p = RssParameters { rho: 0.0, ..p_default() };
        assert_eq!(safe_lon_distance_opposite(0.0, 0.0, &p).unwrap(), 0.0);
        // Only the wrong-way car moves: it must be able to brake off.
        let d = safe_lon_distance_opposite(0.0, -8.0, &p).unwrap();
        assert!((d - 8.0 * 8.0 / (2.0 * p.a_min_brake)).abs() < 1e-12);
        assert!(matches!(safe_lon_distance_opposite(-1.0, -1.0, &p), Err(RssError::SignViolation { .. })));
    }

    #[test]
    fn lateral_distance_examples() {
        let p = RssParameters {
            rho: 0.3,
            a_lat_max_accel: 1.0,
            a_lat_min_brake: 2.0,
            mu: 0.1,
            ..RssParameters::default()
        };
        // Mirrored approach at 0.5 m/s each.
        let d = safe_lat_distance(0.5, -0.5, &p).unwrap();
        let v_resp: f64 = 0.8;
        let one_side = (0.5 + v_resp) / 2.0 * 0.3 + v_resp * v_resp / 4.0;
        assert!((d - (0.1 + 2.0 * one_side)).abs() < 1e-12);
        // Both at lateral rest, zero response time: only mu remains.
        let p0 = RssParameters { rho: 0.0, ..p };
        assert!((safe_lat_distance(0.0, 0.0, &p0).unwrap() - 0.1).abs() < 1e-12);
        // Strongly diverging cars: clamped to mu.
        assert!((safe_lat_distance(-3.0, 3.0, &p).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mu_lateral_velocity_cases() {
        let mu = 0.2;
        // Constant position: zero, not truncated.
        let track: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.1, 1.0)).collect();
        let r = mu_lateral_velocity(&track, 0.0, mu);
        assert_eq!(r, MuLateralVelocity { value: 0.0, truncated: false });

        // Steady drift at 0.5 m/s: exits the band at t = 0.2, slope 0.5.
        let track: Vec<(f64, f64)> = (0..50).map(|i| (i as f64 * 0.01, 0.5 * i as f64 * 0.01)).collect();
        let r = mu_lateral_velocity(&track, 0.0, mu);
        assert!(!r.truncated);
        assert!((r.value - 0.5).abs() < 1e-9);

        // Oscillation inside the band: zero.
        let track: Vec<(f64, f64)> =
            (0..200).map(|i| (i as f64 * 0.01, 0.05 * (i as f64 * 0.2).sin())).collect();
        let r = mu_lateral_velocity(&track, 0.0, mu);
        assert_eq!(r.value, 0.0);

        // Truncated: drifts but the track ends inside the band.
        let track: Vec<(f64, f64)> = (0..5).map(|i| (i as f64 * 0.01, 0.5 * i as f64 * 0.01)).collect();
        let r = mu_lateral_velocity(&track, 0.0, mu);
        assert!(r.truncated);
        assert_eq!(r.value, 0.0);
    }

    fn state(lon_pos: f64, lon_vel: f64, lat_pos: f64, lat_vel: f64) -> AgentState {
        AgentState {
            lon_pos,
            lon_vel,
            lon_acc: 0.0,
            lat_pos,
            lat_vel,
            lat_acc: 0.0,
            half_length: 2.0,
            half_width: 1.0,
        }
    }

    #[test]
    fn classify_lon_cases() {
        let a = state(0.0, 10.0, 0.0, 0.0);
        let b = state(50.0, 10.0, 0.0, 0.0);
        assert_eq!(classify_lon(&a, &b), LonMode::SameDir { first_is_rear: true });
        let c = state(50.0, -10.0, 0.0, 0.0);
        assert_eq!(classify_lon(&a, &c), LonMode::OppositeDir { first_is_wrong_way: false });
        // Wrong-way car is behind the forward car: they separate.
        let d = state(-50.0, -10.0, 0.0, 0.0);
        assert_eq!(classify_lon(&a, &d), LonMode::Diverging);
    }

    #[test]
    fn update_danger_latches_thresholds() {
        let p = p_default();
        // Same lane (laterally overlapping), rear approaching fast.
        let rear = state(0.0, 20.0, 0.0, 0.0);
        let front = state(120.0, 10.0, 0.0, 0.0);
        let t0 = update_danger(&DangerTracker::default(), (&rear, &front), 0.0, &p);
        assert!(t0.lat_dangerous);
        assert!(!t0.lon_dangerous, "120 m gap is longitudinally safe at these speeds");
        assert!(t0.t_b().is_none());

        let near = state(60.0, 10.0, 0.0, 0.0);
        let t1 = update_danger(&t0, (&rear, &near), 1.0, &p);
        assert!(t1.lon_dangerous && t1.lat_dangerous);
        assert_eq!(t1.t_b(), Some(1.0));
        assert_eq!(t1.mode_at_threshold, Some(ThresholdMode::SameDir));

        // Becoming longitudinally safe clears the threshold.
        let t2 = update_danger(&t1, (&rear, &front), 2.0, &p);
        assert!(!t2.lon_dangerous);
        assert!(t2.t_b().is_none());
        assert_eq!(t2.mode_at_threshold, None);
    }

    #[test]
    fn basic_response_same_dir_rear_brakes_after_window() {
        let p = p_default();
        let rear = state(0.0, 20.0, 0.0, 0.0);
        let front = state(30.0, 10.0, 0.0, 0.0);
        let tracker = update_danger(&DangerTracker::default(), (&rear, &front), 0.0, &p);
        assert_eq!(tracker.t_b(), Some(0.0));

        // Inside the response window the rear car keeps the universe range.
        let (c_rear, c_front) = basic_proper_response(&tracker, (&rear, &front), 0.2, &p).unwrap();
        assert_eq!(c_rear.lon_acc_range, p.lon_universe());
        assert_eq!(c_front.lon_acc_range, p.lon_universe());

        // After the window it must brake at least a_min_brake.
        let (c_rear, c_front) = basic_proper_response(&tracker, (&rear, &front), 0.6, &p).unwrap();
        assert_eq!(c_rear.lon_acc_range, Interval::new(-8.0, -4.0));
        assert_eq!(c_front.lon_acc_range, p.lon_universe());

        // Once the rear car has stopped while still dangerous it holds still.
        let stopped = state(20.0, 0.0, 0.0, 0.0);
        let front_near = state(24.5, 0.0, 0.0, 0.0);
        let tr2 = update_danger(&DangerTracker::default(), (&stopped, &front_near), 0.0, &p);
        assert!(tr2.is_dangerous());
        let (c_stop, _) = basic_proper_response(&tr2, (&stopped, &front_near), 1.0, &p).unwrap();
        assert_eq!(c_stop.lon_acc_range, Interval::new(-8.0, 0.0));
    }

    #[test]
    fn basic_response_oncoming() {
        let p = p_default();
        let correct = state(0.0, 15.0, 0.0, 0.0);
        let wrong = state(60.0, -10.0, 0.0, 0.0);
        let tracker = update_danger(&DangerTracker::default(), (&correct, &wrong), 0.0, &p);
        assert!(tracker.is_dangerous());
        assert_eq!(tracker.mode_at_threshold, Some(ThresholdMode::OppositeDir));
        let (c1, c2) = basic_proper_response(&tracker, (&correct, &wrong), 1.0, &p).unwrap();
        assert_eq!(c1.lon_acc_range, Interval::new(-8.0, -3.0));
        assert_eq!(c2.lon_acc_range, Interval::new(4.0, 8.0));
        // After the wrong-way car stops, it may only drive forward.
        let wrong_stopped = state(30.0, 0.0, 0.0, 0.0);
        let (_, c2) = basic_proper_response(&tracker, (&correct, &wrong_stopped), 1.0, &p).unwrap();
        assert_eq!(c2.lon_acc_range, Interval::new(0.0, p.a_max_accel));
    }

    #[test]
    fn basic_response_lateral_cut_in() {
        let p = p_default();
        // Side by side, converging laterally; longitudinally overlapping.
        let left = state(0.0, 20.0, 0.0, 0.5);
        let right = state(1.0, 20.0, 2.5, -0.5);
        let tracker = update_danger(&DangerTracker::default(), (&left, &right), 0.0, &p);
        assert!(tracker.is_dangerous());
        let (c_l, c_r) = basic_proper_response(&tracker, (&left, &right), 1.0, &p).unwrap();
        // Left car moving right: must brake leftward.
        assert_eq!(c_l.lat_acc_range, Interval::new(-p.lat_universe().hi, -1.5));
        assert_eq!(c_l.lat_direction_lock, Some(LatDirectionLock::NonPositiveMuVel));
        assert_eq!(c_r.lat_acc_range, Interval::new(1.5, p.lat_universe().hi));
        assert_eq!(c_r.lat_direction_lock, Some(LatDirectionLock::NonNegativeMuVel));

        // After both reach lateral rest, locks pin the allowed directions.
        let left0 = state(0.0, 20.0, 0.0, 0.0);
        let right0 = state(1.0, 20.0, 2.5, 0.0);
        let (c_l, c_r) = basic_proper_response(&tracker, (&left0, &right0), 1.0, &p).unwrap();
        assert_eq!(c_l.lat_acc_range, Interval::new(-p.lat_universe().hi, 0.0));
        assert_eq!(c_r.lat_acc_range, Interval::new(0.0, p.lat_universe().hi));
    }

    #[test]
    fn not_dangerous_is_an_error() {
        let p = p_default();
        let a = state(0.0, 10.0, 0.0, 0.0);
        let b = state(500.0, 10.0, 0.0, 0.0);
        let tracker = update_danger(&DangerTracker::default(), (&a, &b), 0.0, &p);
        assert_eq!(basic_proper_response(&tracker, (&a, &b), 1.0, &p), Err(RssError::NotDangerous));
    }

    #[test]
    fn aggregation_intersects_and_flags() {
        let p = p_default();
        let mut a = ResponseConstraint::unconstrained(&p);
        a.lon_acc_range = Interval::new(-8.0, -4.0);
        let mut b = ResponseConstraint::unconstrained(&p);
        b.lon_acc_range = Interval::new(-6.0, 3.5);
        let agg = aggregate_constraints(&[a, b]).unwrap();
        assert_eq!(agg.lon_acc_range, Interval::new(-6.0, -4.0));
        assert!(!agg.infeasible);

        let mut c = ResponseConstraint::unconstrained(&p);
        c.lon_acc_range = Interval::new(0.0, 3.5);
        let agg = aggregate_constraints(&[a, c]).unwrap();
        assert!(agg.infeasible, "disjoint intervals must be flagged, not dropped");

        let mut l = ResponseConstraint::unconstrained(&p);
        l.lat_direction_lock = Some(LatDirectionLock::NonPositiveMuVel);
        let mut r = ResponseConstraint::unconstrained(&p);
        r.lat_direction_lock = Some(LatDirectionLock::NonNegativeMuVel);
        let agg = aggregate_constraints(&[l, r]).unwrap();
        assert!(agg.infeasible, "conflicting locks must be flagged");

        assert!(aggregate_constraints(&[]).is_none());
    }

    #[test]
    fn naive_prediction_never_crosses_zero() {
        let s = AgentState {
            lon_pos: 0.0,
            lon_vel: 10.0,
            lon_acc: -5.0,
            lat_pos: 0.0,
            lat_vel: -1.0,
            lat_acc: 2.0,
            half_length: 2.0,
            half_width: 1.0,
        };
        let out = naive_prediction(&s, 3.0);
        // Longitudinal: stops at tau = 2 after 10 m.
        assert!((out.lon_pos - 10.0).abs() < 1e-12);
        assert_eq!(out.lon_vel, 0.0);
        assert_eq!(out.lon_acc, 0.0);
        // Lateral: stops at tau = 0.5 after -0.25 m.
        assert!((out.lat_pos + 0.25).abs() < 1e-12);
        assert_eq!(out.lat_vel, 0.0);
    }

    #[test]
    fn evasive_maneuver_found_when_free_lane_exists() {
        let p = p_default();
        // Ego dangerously close behind a hard-braking lead, left lane empty.
        let ego = state(0.0, 15.0, 0.0, 0.0);
        let lead = AgentState { lon_acc: -8.0, ..state(25.0, 10.0, 0.0, 0.0) };
        let m = find_evasive_maneuver(&ego, &[lead], 4.0, &p);
        assert!(m.is_some(), "expected an evasive maneuver (brake or swerve)");
    }

    #[test]
    fn evasive_maneuver_none_when_boxed_in() {
        let p = p_default();
        // Ego surrounded: braking lead ahead, crowding cars on both sides.
        let ego = state(0.0, 15.0, 0.0, 0.0);
        let lead = AgentState { lon_acc: -8.0, ..state(12.0, 2.0, 0.0, 0.0) };
        let left = state(0.0, 15.0, -2.2, 0.6);
        let right = state(0.0, 15.0, 2.2, -0.6);
        let tail = AgentState { lon_acc: 3.5, ..state(-10.0, 22.0, 0.0, 0.0) };
        let m = find_evasive_maneuver(&ego, &[lead, left, right, tail], 4.0, &p);
        assert!(m.is_none(), "boxed-in ego must exhaust the family");
    }

    #[test]
    fn response_with_evasion_pins_to_maneuver() {
        let p = p_default();
        let ego = state(0.0, 15.0, 0.0, 0.0);
        let lead = AgentState { lon_acc: -8.0, ..state(25.0, 10.0, 0.0, 0.0) };
        let tracker = update_danger(&DangerTracker::default(), (&ego, &lead), 0.0, &p);
        assert!(tracker.is_dangerous());
        let basic = basic_proper_response(&tracker, (&ego, &lead), 1.0, &p).unwrap().0;
        let with = proper_response_with_evasion(&tracker, (&ego, &lead), false, 1.0, 4.0, &p).unwrap();
        // The evasive constraint must still sit inside the basic one.
        assert!(with.lon_acc_range.lo >= basic.lon_acc_range.lo - ACCEL_TOL);
        assert!(with.lon_acc_range.hi <= basic.lon_acc_range.hi + ACCEL_TOL);
    }
}
