//! Trajectory-set safety for unstructured roads (parking lots, plazas) and
//! pedestrians.
//!
//! Without route geometry there is no longitudinal/lateral decomposition.
//! Instead, each agent is assigned *families* of trajectories it might
//! follow — a braking family `C_b` (anything during the response time, then
//! braking to a stop) and a forward family `C_f` (anything during the
//! response time, then normal driving) — and safety is defined by emptiness
//! of collisions over family products.
//!
//! The pairwise trajectory-collision test is deliberately order-sensitive:
//! the first trajectory is the one tested for stopping first, and a pair
//! may be considered non-colliding in one order but colliding in the other.
//! Family geometry follows circular arcs whose initial heading and inverse
//! radius are only known up to bounded drift over the response time; the
//! sampled families are a discretization of that superset.

use crate::kinematics::{Motion1D, PhaseSpec};
use crate::math::{point_segment_dist2, Aabb, Interval, Vec2};
use crate::rss_core::{braking_lon_constraint, ResponseConstraint, RssParameters};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::multi_route::Which;

#[derive(Debug, Error, PartialEq)]
pub enum UnstructuredError {
    #[error("trajectories are not sampled on a common time grid")]
    GridMismatch,
    #[error("situation is not dangerous")]
    NotDangerous,
}

/// Speeds below this are treated as standing still.
pub const SPEED_REST_TOL: f64 = 1e-6;

/// Grid resolution used when discretizing a trajectory family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyGrid {
    pub headings: usize,
    pub inv_radii: usize,
    pub profiles: usize,
}

impl Default for FamilyGrid {
    fn default() -> Self {
        FamilyGrid { headings: 9, inv_radii: 9, profiles: 5 }
    }
}

/// Parameters of the unstructured-road model. Longitudinal dynamics and the
/// response time are shared with the structured model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnstructuredParams {
    pub lon: RssParameters,
    /// Required clearance between trajectory points (m).
    pub epsilon: f64,
    /// Escape half-angle: a trajectory heading within `theta` of directly
    /// away from the stopped car is considered to be departing (rad).
    pub theta: f64,
    /// Maximal heading rate (rad/s); bounds initial-heading uncertainty.
    pub h_prime_max: f64,
    /// Maximal rate of change of the inverse turn radius (1/(m*s)).
    pub inv_radius_rate_max: f64,
    /// Horizon to which non-stopping trajectories are truncated (s).
    pub horizon: f64,
    /// Trajectory sampling step (s).
    pub step: f64,
    pub grid: FamilyGrid,
}

impl Default for UnstructuredParams {
    fn default() -> Self {
        UnstructuredParams {
            lon: RssParameters::default(),
            epsilon: 0.5,
            theta: std::f64::consts::FRAC_PI_6,
            h_prime_max: 0.5,
            inv_radius_rate_max: 0.05,
            horizon: 15.0,
            step: 0.05,
            grid: FamilyGrid::default(),
        }
    }
}

/// Pose and motion of an agent on an unstructured road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstructuredPose {
    pub position: Vec2,
    /// Heading angle (rad, world frame).
    pub heading: f64,
    /// Speed along the heading (m/s, non-negative).
    pub speed: f64,
    /// Heading rate (rad/s).
    pub yaw_rate: f64,
}

/// A sampled planar trajectory on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory2D {
    step: f64,
    samples: Vec<Vec2>,
    /// First time the speed reaches zero; infinite if it never does within
    /// the sampled horizon.
    stop_time: f64,
    max_speed: f64,
}

impl Trajectory2D {
    pub fn new(step: f64, samples: Vec<Vec2>, stop_time: f64) -> Self {
        assert!(step > 0.0 && !samples.is_empty());
        let max_speed = samples
            .windows(2)
            .map(|w| w[0].dist(w[1]) / step)
            .fold(0.0f64, f64::max);
        Trajectory2D { step, samples, stop_time, max_speed }
    }

    /// Samples a circular-arc trajectory: `motion` gives arc length over
    /// time, the arc starts at `start` with `heading` and constant inverse
    /// radius `inv_radius` (positive turns left).
    pub fn from_arc(
        start: Vec2,
        heading: f64,
        inv_radius: f64,
        motion: &Motion1D,
        horizon: f64,
        step: f64,
    ) -> Self {
        let n_full = (horizon / step).round() as usize;
        let stop_time = match motion.rest_time() {
            Some(ts) if ts <= horizon => ts,
            _ => f64::INFINITY,
        };
        // Readers clamp indices past the final sample, and the pose is
        // constant once the motion rests, so sampling may stop there.
        let n = if stop_time.is_finite() {
            (((stop_time / step).ceil() as usize).max(1)).min(n_full)
        } else {
            n_full
        };
        let mut samples = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = (k as f64 * step).min(horizon);
            let s = motion.position(t.min(motion.end_time()));
            samples.push(arc_point(start, heading, inv_radius, s));
        }
        Trajectory2D::new(step, samples, stop_time)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn stop_time(&self) -> f64 {
        self.stop_time
    }

    pub fn horizon(&self) -> f64 {
        self.step * (self.samples.len() - 1) as f64
    }

    /// Position at sample index `k`; indices beyond the end hold the final
    /// sample (a stopped trajectory stays put).
    pub fn position_at(&self, k: usize) -> Vec2 {
        self.samples[k.min(self.samples.len() - 1)]
    }

    /// Central-difference velocity at sample index `k`.
    pub fn velocity_at(&self, k: usize) -> Vec2 {
        let n = self.samples.len();
        if n < 2 {
            return Vec2::ZERO;
        }
        let hi = (k + 1).min(n - 1);
        let lo = k.saturating_sub(1).min(n - 1);
        (self.samples[hi] - self.samples[lo]) / ((hi - lo).max(1) as f64 * self.step)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::of_points(self.samples.iter().copied())
    }
}

/// Point on a constant-curvature arc at arc length `s`.
fn arc_point(start: Vec2, heading: f64, inv_radius: f64, s: f64) -> Vec2 {
    if inv_radius.abs() < 1e-12 {
        start + Vec2::from_angle(heading) * s
    } else {
        let k = inv_radius;
        let h1 = heading + k * s;
        start + Vec2::new((h1.sin() - heading.sin()) / k, (heading.cos() - h1.cos()) / k)
    }
}

/// Checks that the two trajectories stay more than `eps` apart at every time
/// up to `t_limit` (inclusive), interpolating linearly between samples.
fn separated_until(t1: &Trajectory2D, t2: &Trajectory2D, t_limit: f64, eps: f64) -> bool {
    let step = t1.step;
    let k_max = (t_limit / step).ceil() as usize;
    let v_rel = t1.max_speed + t2.max_speed;
    let eps2 = eps * eps;
    let mut k = 0usize;
    while k < k_max {
        let a = t2.position_at(k) - t1.position_at(k);
        let b = t2.position_at(k + 1) - t1.position_at(k + 1);
        // Exact minimum of the piecewise-linear relative motion over the step.
        if point_segment_dist2(Vec2::ZERO, a, b) <= eps2 {
            return false;
        }
        // Lipschitz skip: the relative position moves at most v_rel*step per
        // interval, so comfortably-separated stretches can be jumped over.
        let d = a.norm() - eps;
        let skip = if v_rel > 1e-9 { ((d / (v_rel * step)) as usize).max(1) } else { k_max - k };
        k += skip;
    }
    t2.position_at(k_max).dist(t1.position_at(k_max)) > eps
}

/// Order-sensitive trajectory collision test.
///
/// The trajectories do **not** collide when either
///
/// 1. they stay more than `epsilon` apart until both have stopped (or until
///    the horizon, for trajectories that never stop), or
/// 2. they stay more than `epsilon` apart until `t1`'s stop time, and at
///    that moment `t2`'s velocity points within `theta` of directly away
///    from `t1`'s final position (it is escaping, not returning).
///
/// Condition 2 is what makes the test order-sensitive: it is only available
/// when the *first* trajectory stops within the horizon.
pub fn trajectories_collide(
    t1: &Trajectory2D,
    t2: &Trajectory2D,
    u: &UnstructuredParams,
) -> Result<bool, UnstructuredError> {
    if (t1.step - t2.step).abs() > 1e-12 {
        return Err(UnstructuredError::GridMismatch);
    }
    let horizon = t1.horizon().max(t2.horizon());
    let limit1 = t1.stop_time.max(t2.stop_time).min(horizon);
    if separated_until(t1, t2, limit1, u.epsilon) {
        return Ok(false);
    }
    if t1.stop_time.is_finite() && t1.stop_time <= horizon {
        let sep = separated_until(t1, t2, t1.stop_time, u.epsilon);
        if sep {
            let k = (t1.stop_time / t1.step).round() as usize;
            let away = t2.position_at(k) - t1.position_at(k);
            let v2 = t2.velocity_at(k);
            if v2.norm() > 1e-9 && away.norm() > 1e-9 && v2.angle_between(away) <= u.theta {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// Anything during the response time, then braking to a stop.
    Braking,
    /// Anything during the response time, then any normal driving.
    Forward,
}

/// A family of constant-curvature trajectories with bounded initial-heading
/// and inverse-radius uncertainty and a range of speed profiles. The family
/// is a superset of the physically reachable motions; emptiness checks are
/// discretized on the stored grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFamily {
    pub kind: FamilyKind,
    pub start: Vec2,
    pub speed: f64,
    /// Response time during which the acceleration is unconstrained.
    pub rho: f64,
    pub heading_range: Interval,
    pub inv_radius_range: Interval,
    /// Acceleration range during the response window.
    pub response_accel_range: Interval,
    /// Acceleration range after the response window (negative = braking).
    pub post_accel_range: Interval,
    pub horizon: f64,
    pub step: f64,
    pub grid: FamilyGrid,
}

fn linspace(iv: Interval, n: usize) -> Vec<f64> {
    if n <= 1 || iv.width() < 1e-15 {
        return vec![(iv.lo + iv.hi) / 2.0];
    }
    (0..n).map(|k| iv.lo + iv.width() * k as f64 / (n - 1) as f64).collect()
}

fn car_family(c: &UnstructuredPose, kind: FamilyKind, u: &UnstructuredParams) -> TrajectoryFamily {
    let p = &u.lon;
    if kind == FamilyKind::Braking && c.speed <= SPEED_REST_TOL {
        // A properly braking stopped car holds still: the family is a point.
        return TrajectoryFamily {
            kind,
            start: c.position,
            speed: 0.0,
            rho: p.rho,
            heading_range: Interval::point(c.heading),
            inv_radius_range: Interval::point(0.0),
            response_accel_range: Interval::point(0.0),
            post_accel_range: Interval::point(0.0),
            horizon: u.horizon,
            step: u.step,
            grid: FamilyGrid { headings: 1, inv_radii: 1, profiles: 1 },
        };
    }
    let inv_radius = if c.speed > SPEED_REST_TOL { c.yaw_rate / c.speed } else { 0.0 };
    let dh = p.rho * u.h_prime_max;
    let dk = p.rho * u.inv_radius_rate_max;
    TrajectoryFamily {
        kind,
        start: c.position,
        speed: c.speed,
        rho: p.rho,
        heading_range: Interval::new(c.heading - dh, c.heading + dh),
        inv_radius_range: Interval::new(inv_radius - dk, inv_radius + dk),
        response_accel_range: Interval::new(-p.a_max_brake, p.a_max_accel),
        post_accel_range: match kind {
            FamilyKind::Braking => Interval::new(-p.a_max_brake, -p.a_min_brake),
            FamilyKind::Forward => Interval::new(-p.a_max_brake, p.a_max_accel),
        },
        horizon: u.horizon,
        step: u.step,
        grid: u.grid,
    }
}

/// The braking family `C_b` of a car.
pub fn braking_family(c: &UnstructuredPose, u: &UnstructuredParams) -> TrajectoryFamily {
    car_family(c, FamilyKind::Braking, u)
}

/// The forward (normal driving) family `C_f` of a car.
pub fn forward_family(c: &UnstructuredPose, u: &UnstructuredParams) -> TrajectoryFamily {
    car_family(c, FamilyKind::Forward, u)
}

impl TrajectoryFamily {
    /// The speed profile for grid fraction `frac` in [0, 1]: response-window
    /// acceleration swept from weakest to strongest together with the
    /// post-window rate, so `frac = 1` is the farthest-reaching profile.
    fn profile_motion(&self, frac: f64) -> Motion1D {
        let resp = self.response_accel_range.lo
            + self.response_accel_range.width() * frac;
        match self.kind {
            FamilyKind::Braking => {
                let brake = -(self.post_accel_range.lo + self.post_accel_range.width() * frac);
                Motion1D::response_then_brake(self.speed, resp, self.rho, brake.max(1e-9), true)
            }
            FamilyKind::Forward => {
                let post = self.post_accel_range.lo + self.post_accel_range.width() * frac;
                Motion1D::new(
                    self.speed,
                    &[
                        PhaseSpec { accel: resp, duration: self.rho, stop_at_zero: true },
                        PhaseSpec { accel: post, duration: self.horizon, stop_at_zero: true },
                    ],
                )
            }
        }
    }

    /// Maximal arc length any member of the family can cover.
    pub fn reach(&self) -> f64 {
        self.profile_motion(1.0).displacement_extremes(self.horizon).1
    }

    /// Discretizes the family into concrete trajectories.
    pub fn sample(&self) -> Vec<Trajectory2D> {
        let headings = linspace(self.heading_range, self.grid.headings);
        let radii = linspace(self.inv_radius_range, self.grid.inv_radii);
        let n_prof = self.grid.profiles.max(1);
        let mut out = Vec::with_capacity(headings.len() * radii.len() * n_prof);
        for pk in 0..n_prof {
            let frac = if n_prof == 1 { 1.0 } else { pk as f64 / (n_prof - 1) as f64 };
            let motion = self.profile_motion(frac);
            for &h in &headings {
                for &k in &radii {
                    out.push(Trajectory2D::from_arc(
                        self.start, h, k, &motion, self.horizon, self.step,
                    ));
                }
            }
        }
        out
    }
}

/// True iff **any** sampled trajectory pair collides; the first family
/// provides the first (order-sensitive) argument.
pub fn families_collide(f1: &TrajectoryFamily, f2: &TrajectoryFamily, u: &UnstructuredParams) -> bool {
    sampled_collide(&f1.sample(), &f2.sample(), u)
}

fn sampled_collide(s1: &[Trajectory2D], s2: &[Trajectory2D], u: &UnstructuredParams) -> bool {
    let boxes1: Vec<Aabb> = s1.iter().map(|t| t.aabb()).collect();
    let boxes2: Vec<Aabb> = s2.iter().map(|t| t.aabb()).collect();
    let hull1 = boxes1.iter().fold(Aabb::empty(), |h, b| h.merge(b));
    let hull2 = boxes2.iter().fold(Aabb::empty(), |h, b| h.merge(b));
    if hull1.distance(&hull2) > u.epsilon {
        return false;
    }
    // Scan far-reaching members first: when the families do interact, a
    // witness pair is usually found among them, ending the scan early.
    for (t1, b1) in s1.iter().zip(&boxes1).rev() {
        if b1.distance(&hull2) > u.epsilon {
            continue;
        }
        for (t2, b2) in s2.iter().zip(&boxes2).rev() {
            if b1.distance(b2) > u.epsilon {
                continue;
            }
            if trajectories_collide(t1, t2, u).unwrap_or(true) {
                return true;
            }
        }
    }
    false
}

/// Safety verdict for a pair of cars on an unstructured road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case")]
pub enum UnstructuredSafety {
    /// `braking`'s braking family avoids the other agent's forward family
    /// (while the other direction does not hold): if `braking` brakes, the
    /// other may keep driving normally.
    Case1 { braking: Which },
    /// The two braking families avoid each other: if both brake, no
    /// collision occurs.
    Case2,
    Unsafe,
}

/// Evaluates unstructured safety. Case 1 is checked before case 2; if both
/// braking-versus-forward products are already empty, case 2 holds by
/// inclusion of the braking family in the forward family.
pub fn unstructured_safe(
    c0: &UnstructuredPose,
    c1: &UnstructuredPose,
    u: &UnstructuredParams,
) -> UnstructuredSafety {
    let b0 = braking_family(c0, u);
    let b1 = braking_family(c1, u);
    // Cheap reach bound: beyond the braking families' combined reach the
    // pair is safe by case 2 (case 1 cannot apply: its asymmetric clause is
    // only meaningful within interaction range, where we fully evaluate).
    if c0.position.dist(c1.position) > b0.reach() + b1.reach() + u.epsilon {
        return UnstructuredSafety::Case2;
    }
    let f0 = forward_family(c0, u);
    let f1 = forward_family(c1, u);
    let s_b0 = b0.sample();
    let s_b1 = b1.sample();
    let e01 = sampled_collide(&s_b0, &f1.sample(), u);
    let e10 = sampled_collide(&s_b1, &f0.sample(), u);
    match (e01, e10) {
        (false, true) => UnstructuredSafety::Case1 { braking: Which::First },
        (true, false) => UnstructuredSafety::Case1 { braking: Which::Second },
        _ => {
            if !sampled_collide(&s_b0, &s_b1, u) {
                UnstructuredSafety::Case2
            } else {
                UnstructuredSafety::Unsafe
            }
        }
    }
}

/// Danger bookkeeping for one unstructured pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnstructuredTracker {
    dangerous: bool,
    t_b: Option<f64>,
    case: Option<UnstructuredSafety>,
    prev: Option<UnstructuredSafety>,
}

impl UnstructuredTracker {
    pub fn is_dangerous(&self) -> bool {
        self.dangerous
    }

    pub fn t_b(&self) -> Option<f64> {
        self.t_b
    }

    pub fn case_at_threshold(&self) -> Option<UnstructuredSafety> {
        self.case
    }

    pub fn update(&mut self, t: f64, verdict: UnstructuredSafety) {
        let dangerous_now = verdict == UnstructuredSafety::Unsafe;
        if dangerous_now && !self.dangerous {
            self.t_b = Some(t);
            self.case = Some(match self.prev {
                Some(prev) if prev != UnstructuredSafety::Unsafe => prev,
                // Born dangerous (or no record): default to mutual braking.
                _ => UnstructuredSafety::Case2,
            });
        } else if !dangerous_now {
            self.t_b = None;
            self.case = None;
        }
        self.dangerous = dangerous_now;
        self.prev = Some(verdict);
    }
}

/// Headings within `half_angle` of `away` (pointing from the other agent to
/// the ego) are considered to be departing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepartureCone {
    pub away: Vec2,
    pub half_angle: f64,
}

impl DepartureCone {
    pub fn permits_heading(&self, heading: f64) -> bool {
        Vec2::from_angle(heading).angle_between(self.away) <= self.half_angle + 1e-12
    }
}

/// The proper-response constraint of one unstructured agent: which
/// trajectory family it must stay within, and — once the conflict partner
/// has stopped — the cone of departure headings in which forward motion is
/// additionally allowed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnstructuredConstraint {
    pub family: FamilyKind,
    pub departure: Option<DepartureCone>,
}

/// The proper response of `ego` given the case latched at the danger
/// threshold:
///
/// * both agents stopped: the ego may move again only with a departure
///   heading within `theta` of directly away from the other;
/// * case 1 with the ego as the forward-allowed agent: normal driving (the
///   forward family) until the other has stopped, then the departure rule;
/// * otherwise: the braking family.
pub fn unstructured_proper_response(
    tracker: &UnstructuredTracker,
    ego: Which,
    ego_pose: &UnstructuredPose,
    other_pose: &UnstructuredPose,
    u: &UnstructuredParams,
) -> Result<UnstructuredConstraint, UnstructuredError> {
    if !tracker.dangerous {
        return Err(UnstructuredError::NotDangerous);
    }
    let case = tracker.case.ok_or(UnstructuredError::NotDangerous)?;
    let away = ego_pose.position - other_pose.position;
    let cone = away
        .try_normalize()
        .map(|dir| DepartureCone { away: dir, half_angle: u.theta });
    let ego_stopped = ego_pose.speed <= SPEED_REST_TOL;
    let other_stopped = other_pose.speed <= SPEED_REST_TOL;
    if ego_stopped && other_stopped {
        return Ok(UnstructuredConstraint { family: FamilyKind::Braking, departure: cone });
    }
    if let UnstructuredSafety::Case1 { braking } = case {
        if braking == ego.other() {
            // Ego is the forward-allowed agent.
            return Ok(if other_stopped {
                UnstructuredConstraint { family: FamilyKind::Braking, departure: cone }
            } else {
                UnstructuredConstraint { family: FamilyKind::Forward, departure: None }
            });
        }
    }
    Ok(UnstructuredConstraint { family: FamilyKind::Braking, departure: None })
}

/// Pedestrian motion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PedestrianParams {
    pub rho: f64,
    /// Maximal acceleration during the response time (m/s^2).
    pub accel: f64,
    /// Braking rate after the response time (m/s^2).
    pub brake: f64,
    /// Maximal heading rate while moving (rad/s).
    pub heading_rate_max: f64,
}

impl Default for PedestrianParams {
    fn default() -> Self {
        PedestrianParams { rho: 0.5, accel: 2.0, brake: 2.0, heading_rate_max: 1.0 }
    }
}

/// Number of rays used for a standing pedestrian's all-directions family.
const STANDING_PED_RAYS: usize = 24;

/// The trajectory family of a pedestrian.
///
/// A moving pedestrian may adjust heading at a bounded rate during the
/// response time and then continues on a straight line while braking — an
/// isosceles-triangle-shaped sweep. A standing pedestrian may set off along
/// any ray; with the default half-second response and 2 m/s^2 rates the
/// reachable set is a disc of radius exactly 0.5 m.
pub fn pedestrian_family(
    ped: &UnstructuredPose,
    pp: &PedestrianParams,
    u: &UnstructuredParams,
) -> TrajectoryFamily {
    let standing = ped.speed <= SPEED_REST_TOL;
    let (heading_range, n_headings) = if standing {
        (
            Interval::new(ped.heading - std::f64::consts::PI, ped.heading + std::f64::consts::PI),
            STANDING_PED_RAYS,
        )
    } else {
        let dh = pp.rho * pp.heading_rate_max;
        (Interval::new(ped.heading - dh, ped.heading + dh), u.grid.headings)
    };
    TrajectoryFamily {
        kind: FamilyKind::Braking,
        start: ped.position,
        speed: ped.speed,
        rho: pp.rho,
        heading_range,
        inv_radius_range: Interval::point(0.0),
        response_accel_range: Interval::new(-pp.brake, pp.accel),
        post_accel_range: Interval::point(-pp.brake),
        horizon: u.horizon,
        step: u.step,
        grid: FamilyGrid { headings: n_headings, inv_radii: 1, profiles: u.grid.profiles },
    }
}

/// Maximal distance a pedestrian can get from a standing start: accelerate
/// for the response time, then brake to a stop.
pub fn pedestrian_reach(speed: f64, pp: &PedestrianParams) -> f64 {
    Motion1D::response_then_brake(speed, pp.accel, pp.rho, pp.brake, true).final_displacement()
}

/// Who holds right of way between a vehicle and a pedestrian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightOfWay {
    Vehicle,
    Pedestrian,
    /// Unresolved: defer to the pedestrian.
    Dynamic,
}

/// Vehicle-versus-pedestrian safety and the car's resulting constraint.
///
/// On pedestrian-priority roads (and under `Dynamic`) the car's braking
/// envelope must stay clear of the pedestrian family. On vehicle-priority
/// roads the pedestrian is assumed to stay off the road; but right of way is
/// given, not taken — once the pedestrian is exposed on the road
/// (`ped_exposed`), the same avoidance duty applies, and a car that can no
/// longer keep clear must brake.
pub fn vehicle_pedestrian_safe(
    car: &UnstructuredPose,
    ped: &UnstructuredPose,
    pp: &PedestrianParams,
    row: RightOfWay,
    ped_exposed: bool,
    u: &UnstructuredParams,
) -> (bool, ResponseConstraint) {
    let p = &u.lon;
    let must_avoid = match row {
        RightOfWay::Pedestrian | RightOfWay::Dynamic => true,
        RightOfWay::Vehicle => ped_exposed,
    };
    if !must_avoid {
        return (true, ResponseConstraint::unconstrained(p));
    }
    let car_braking = braking_family(car, u);
    let ped_family = pedestrian_family(ped, pp, u);
    // Cheap reach bound before sampling.
    let far = car.position.dist(ped.position)
        > car_braking.reach() + pedestrian_reach(ped.speed, pp) + u.epsilon;
    let safe = far || !families_collide(&car_braking, &ped_family, u);
    if safe {
        (true, ResponseConstraint::unconstrained(p))
    } else {
        let mut c = ResponseConstraint::unconstrained(p);
        c.lon_acc_range = braking_lon_constraint(car.speed, p.a_min_brake, p);
        (false, c)
    }
}
