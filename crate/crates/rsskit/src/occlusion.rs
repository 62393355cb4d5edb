//! Visibility, exposure times, and worst-case reasoning about what might be
//! hidden behind occluders.
//!
//! A blocked line of sight delays when a conflict partner can first be
//! perceived (its *exposure time*), and blame for a late-detected danger is
//! only assigned from exposure onward. Conversely, an ego must hypothesize
//! occluded traffic at any hidden position — except where such a hypothesis
//! would be *unreasonable*, either because it implies speeds outside the
//! posted limits or because the hypothesized state could not have been
//! reached by agents that always followed their proper-response duties.

use crate::math::{ConvexPolygon, Interval, Vec2};
use crate::multi_route::{constraints_over_route_hypotheses, Route};
use crate::rss_core::{
    aggregate_constraints, safe_lon_distance_same_dir, AgentState, ResponseConstraint,
    RssParameters,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OcclusionError {
    #[error("target is never visible within the trace")]
    NeverVisible,
    #[error("agent {0} is missing from a trace frame")]
    AgentMissing(usize),
}

/// Static occluding geometry plus the ids of agents whose bodies also occlude
/// (e.g. a bus). Agent bodies are resolved per frame.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OccluderSet {
    pub polygons: Vec<ConvexPolygon>,
    #[serde(default)]
    pub dynamic: Vec<usize>,
}

impl OccluderSet {
    pub fn from_polygons(polygons: Vec<ConvexPolygon>) -> Self {
        OccluderSet { polygons, dynamic: Vec::new() }
    }
}

/// Sight-line tolerance: a segment must cut more than this length out of an
/// occluder's interior to count as blocked, so grazing along a wall face
/// still counts as seeing.
const SIGHT_TOL: f64 = 1e-9;

fn segment_blocked_by(ego: Vec2, target: Vec2, polygons: &[ConvexPolygon]) -> bool {
    polygons.iter().any(|poly| poly.segment_interior_overlap(ego, target) > SIGHT_TOL)
}

/// Whether `target` can be seen from `ego` past the static occluders.
pub fn is_visible(ego: Vec2, target: Vec2, occ: &OccluderSet) -> bool {
    !segment_blocked_by(ego, target, &occ.polygons)
}

/// One agent in one recorded frame: a reference (eye) point and the body
/// outline whose corners must be spotted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub id: usize,
    pub reference: Vec2,
    pub body: ConvexPolygon,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneFrame {
    pub t: f64,
    pub agents: Vec<AgentSnapshot>,
}

impl SceneFrame {
    fn agent(&self, id: usize) -> Result<&AgentSnapshot, OcclusionError> {
        self.agents.iter().find(|a| a.id == id).ok_or(OcclusionError::AgentMissing(id))
    }
}

/// Whether any corner of `target`'s body is visible from `ego`'s reference
/// point in this frame, counting both static occluders and the bodies of
/// dynamic-occluder agents.
pub fn visible_in_frame(
    frame: &SceneFrame,
    ego_id: usize,
    target_id: usize,
    occ: &OccluderSet,
) -> Result<bool, OcclusionError> {
    let ego = frame.agent(ego_id)?.reference;
    let target = frame.agent(target_id)?;
    let dynamic: Vec<&ConvexPolygon> = frame
        .agents
        .iter()
        .filter(|a| a.id != ego_id && a.id != target_id && occ.dynamic.contains(&a.id))
        .map(|a| &a.body)
        .collect();
    Ok(target.body.vertices.iter().any(|&corner| {
        !segment_blocked_by(ego, corner, &occ.polygons)
            && !dynamic.iter().any(|poly| poly.segment_interior_overlap(ego, corner) > SIGHT_TOL)
    }))
}

/// First time at which any corner of the target is visible from the ego.
pub fn exposure_time(
    frames: &[SceneFrame],
    ego_id: usize,
    target_id: usize,
    occ: &OccluderSet,
) -> Result<f64, OcclusionError> {
    for frame in frames {
        if visible_in_frame(frame, ego_id, target_id, occ)? {
            return Ok(frame.t);
        }
    }
    Err(OcclusionError::NeverVisible)
}

/// Speed-limit intervals attached to a position (route) under the current
/// priority and scene conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLimits {
    pub lon_low: f64,
    pub lon_high: f64,
    pub lat_low: f64,
    pub lat_high: f64,
}

impl SpeedLimits {
    pub fn validated(self) -> Result<Self, String> {
        if self.lon_low > self.lon_high || self.lat_low > self.lat_high {
            return Err("speed limit lower bounds must not exceed upper bounds".into());
        }
        Ok(self)
    }

    /// Default limits assumed for occluded traffic: forward speeds up to
    /// `lon_high` (non-priority roads get 30% of the priority road's limit)
    /// and near-zero lateral drift.
    pub fn occluded_default(priority: bool, priority_lon_high: f64) -> Self {
        let lon_high = if priority { priority_lon_high } else { 0.3 * priority_lon_high };
        SpeedLimits { lon_low: 0.0, lon_high, lat_low: -0.3, lat_high: 0.3 }
    }

    pub fn permits(&self, lon_avg: f64, lat_avg: f64) -> bool {
        lon_avg >= self.lon_low
            && lon_avg <= self.lon_high
            && lat_avg >= self.lat_low
            && lat_avg <= self.lat_high
    }
}

/// Average axis speeds of one agent over a time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAverages {
    pub lon: f64,
    pub lat: f64,
}

/// Average (displacement over time) speeds from `t_b` to `t`, interpolating
/// linearly inside the track of `(time, lon position, lat position)` samples.
pub fn average_speeds(track: &[(f64, f64, f64)], t_b: f64, t: f64) -> Option<AxisAverages> {
    if t <= t_b {
        return None;
    }
    let sample_at = |tq: f64| -> Option<(f64, f64)> {
        let first = track.first()?;
        let last = track.last()?;
        if tq < first.0 - 1e-9 || tq > last.0 + 1e-9 {
            return None;
        }
        let mut prev = *first;
        for &s in track {
            if s.0 >= tq {
                let dt = s.0 - prev.0;
                if dt <= 0.0 {
                    return Some((s.1, s.2));
                }
                let f = ((tq - prev.0) / dt).clamp(0.0, 1.0);
                return Some((prev.1 + f * (s.1 - prev.1), prev.2 + f * (s.2 - prev.2)));
            }
            prev = s;
        }
        Some((last.1, last.2))
    };
    let (lon_b, lat_b) = sample_at(t_b)?;
    let (lon_t, lat_t) = sample_at(t)?;
    Some(AxisAverages { lon: (lon_t - lon_b) / (t - t_b), lat: (lat_t - lat_b) / (t - t_b) })
}

/// Whether either agent's average speeds since the danger threshold fall
/// outside its limits — making the (previously occluded) situation
/// unreasonable and exempting the other agent from blame.
pub fn unreasonable_speed(
    avg1: AxisAverages,
    lim1: &SpeedLimits,
    avg2: AxisAverages,
    lim2: &SpeedLimits,
) -> bool {
    !lim1.permits(avg1.lon, avg1.lat) || !lim2.permits(avg2.lon, avg2.lat)
}

/// Discretization of the backward feasibility search behind
/// [`unreasonable_improper`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImproperSearchParams {
    /// Backward step (s).
    pub dt: f64,
    /// How far back histories are explored (s).
    pub horizon: f64,
    /// Acceleration levels per axis and agent.
    pub accel_levels: usize,
    /// Frontier size beyond which the search is declared inconclusive.
    pub frontier_cap: usize,
    /// Physical speed cap for hypothesized past states (m/s).
    pub v_cap: f64,
}

impl Default for ImproperSearchParams {
    fn default() -> Self {
        ImproperSearchParams {
            dt: 0.1,
            horizon: 4.0,
            accel_levels: 5,
            frontier_cap: 30_000,
            v_cap: 70.0,
        }
    }
}

/// Longitudinal two-car state explored by the backward search, rear/front by
/// position.
#[derive(Debug, Clone, Copy)]
struct LonPairState {
    /// Bumper-to-bumper gap (m).
    gap: f64,
    v_rear: f64,
    v_front: f64,
}

/// How far inside the danger zone the pair sits: safe distance minus gap,
/// positive when dangerous.
fn danger_margin(s: &LonPairState, p: &RssParameters) -> f64 {
    let d = safe_lon_distance_same_dir(s.v_rear, s.v_front, p).expect("non-negative speeds");
    d - s.gap
}

fn lon_dangerous(s: &LonPairState, p: &RssParameters) -> bool {
    danger_margin(s, p) > 0.0
}

/// Upper bound on how much the danger margin can shrink over `steps`
/// backward steps, maximized over every grid acceleration choice. The safe
/// distance falls at most with the rear slowing (derivative bounded at the
/// largest reachable rear speed) and the front speeding up, while the gap
/// grows at most by the rear's displacement. If the current margin exceeds
/// this bound, no branch can reach a non-dangerous state in time.
fn max_margin_drop(
    s: &LonPairState,
    steps: u32,
    p: &RssParameters,
    sp: &ImproperSearchParams,
) -> f64 {
    let k = steps as f64;
    let v_rear_max = s.v_rear + p.a_max_brake * sp.dt * k;
    let v_front_max = s.v_front + p.a_max_brake * sp.dt * k;
    let safe_dist_drop = p.a_max_accel
        * sp.dt
        * (p.rho + (v_rear_max + p.rho * p.a_max_accel) / p.a_min_brake)
        + sp.dt * v_front_max;
    let gap_rise =
        v_rear_max * sp.dt + 0.5 * p.a_max_accel.max(p.a_max_brake) * sp.dt * sp.dt;
    k * (safe_dist_drop + gap_rise)
}

/// The quantity `gap - v_rear^2/(2 a_min_brake) + v_front^2/(2 a_max_brake)`
/// is non-negative once a proper response has been in force for a full
/// response time, and non-decreasing while both cars keep responding. A
/// dangerous state violating it must therefore have crossed the danger
/// threshold within the last response time.
fn response_invariant(s: &LonPairState, p: &RssParameters) -> f64 {
    s.gap - s.v_rear * s.v_rear / (2.0 * p.a_min_brake)
        + s.v_front * s.v_front / (2.0 * p.a_max_brake)
}

fn accel_grid(p: &RssParameters, levels: usize) -> Vec<f64> {
    let lo = -p.a_max_brake;
    let hi = p.a_max_accel;
    if levels <= 1 {
        return vec![0.0];
    }
    (0..levels).map(|k| lo + (hi - lo) * k as f64 / (levels - 1) as f64).collect()
}

/// Whether the observed pair state could **not** have been reached by agents
/// that always adhered to their proper-response duties.
///
/// Quantifying over all infinite histories is not computable; per the
/// documented approximation this runs a bounded backward search over
/// discretized acceleration choices. Each backward step enforces conditions
/// that are *necessary* for any compliant history — physical acceleration
/// bounds, no body overlap, forward motion, and the response obligations
/// implied by persistent danger (a dangerous stretch longer than the
/// response time requires the rear car to brake and the response invariant
/// to hold, so a violation demands a non-dangerous state within the last
/// response time). `true` is only returned when every backward branch dies;
/// an inconclusive search (cap or horizon reached) returns `false`, keeping
/// the ego cautious.
///
/// The search covers the same-lane longitudinal conflict class (laterally
/// overlapping pair, negligible lateral motion). Anything else returns
/// `false`.
pub fn unreasonable_improper(
    c1: &AgentState,
    c2: &AgentState,
    p: &RssParameters,
    sp: &ImproperSearchParams,
) -> bool {
    // Class gate: same-lane, forward-moving, laterally quiet.
    let lat_gap = crate::rss_core::lat_gap(c1, c2);
    if c1.lat_vel.abs() > 1e-6
        || c2.lat_vel.abs() > 1e-6
        || c1.lon_vel < 0.0
        || c2.lon_vel < 0.0
        || lat_gap >= p.mu
    {
        return false;
    }
    let (rear, front) = if c1.lon_pos <= c2.lon_pos { (c1, c2) } else { (c2, c1) };
    let gap = (front.lon_pos - front.half_length) - (rear.lon_pos + rear.half_length);
    if gap <= 0.0 {
        return false; // already overlapping: not a question of reachability
    }
    let root = LonPairState { gap, v_rear: rear.lon_vel, v_front: front.lon_vel };
    if !lon_dangerous(&root, p) {
        return false; // a safe state is trivially reachable (steady cruise)
    }

    let window_steps = (p.rho / sp.dt).ceil() as u32 + 1;
    let grid = accel_grid(p, sp.accel_levels);
    let steps = (sp.horizon / sp.dt).ceil() as usize;

    // debt > 0 means: a non-dangerous state must appear within `debt` more
    // backward steps for the branch to remain viable.
    let root_debt = if response_invariant(&root, p) < -1e-9 { window_steps } else { 0 };
    if root_debt > 0 && danger_margin(&root, p) > max_margin_drop(&root, root_debt, p, sp) {
        return true; // no history can surface from the danger zone in time
    }
    let mut frontier: Vec<(LonPairState, u32)> = vec![(root, root_debt)];
    let mut seen = std::collections::HashSet::new();

    for _ in 0..steps {
        let mut next: Vec<(LonPairState, u32)> = Vec::new();
        for &(s, debt) in &frontier {
            for &a_r in &grid {
                let v_rear_prev = s.v_rear - a_r * sp.dt;
                if v_rear_prev < 0.0 || v_rear_prev > sp.v_cap {
                    continue;
                }
                for &a_f in &grid {
                    let v_front_prev = s.v_front - a_f * sp.dt;
                    if v_front_prev < 0.0 || v_front_prev > sp.v_cap {
                        continue;
                    }
                    let disp_rear = v_rear_prev * sp.dt + 0.5 * a_r * sp.dt * sp.dt;
                    let disp_front = v_front_prev * sp.dt + 0.5 * a_f * sp.dt * sp.dt;
                    let prev = LonPairState {
                        gap: s.gap - (disp_front - disp_rear),
                        v_rear: v_rear_prev,
                        v_front: v_front_prev,
                    };
                    if prev.gap <= 0.0 {
                        continue; // histories must be collision-free
                    }
                    let margin = danger_margin(&prev, p);
                    if margin <= 0.0 {
                        // Anchor found: the dangerous tail attaches to a safe
                        // state, which is reachable by ordinary driving.
                        return false;
                    }
                    // The pair is dangerous at the predecessor; collect the
                    // obligations that demand a recent threshold.
                    let braking_ok = if v_rear_prev > 0.0 {
                        a_r <= -p.a_min_brake + 1e-9
                    } else {
                        a_r <= 1e-9
                    };
                    let trigger =
                        !braking_ok || response_invariant(&prev, p) < -1e-9;
                    let new_debt = if debt == 1 {
                        continue; // the required non-dangerous state never came
                    } else if debt > 1 {
                        let carried = debt - 1;
                        if trigger { carried.min(window_steps) } else { carried }
                    } else if trigger {
                        window_steps
                    } else {
                        0
                    };
                    if new_debt > 0 && margin > max_margin_drop(&prev, new_debt, p, sp) {
                        continue; // debt provably cannot be repaid in time
                    }
                    let key = (
                        prev.gap.to_bits(),
                        prev.v_rear.to_bits(),
                        prev.v_front.to_bits(),
                        new_debt,
                    );
                    if seen.insert(key) {
                        next.push((prev, new_debt));
                        if next.len() > sp.frontier_cap {
                            return false; // inconclusive at this resolution
                        }
                    }
                }
            }
        }
        if next.is_empty() {
            return true; // every candidate history violates a necessary condition
        }
        frontier = next;
    }
    false // horizon exhausted with live branches: treat as reachable
}

/// Vehicle dimensions assumed for hypothesized occluded traffic.
pub const HYPOTHESIS_HALF_LENGTH: f64 = 2.0;
pub const HYPOTHESIS_HALF_WIDTH: f64 = 0.9;

/// Grid step along routes when sampling occluded space (m).
pub const OCCLUSION_GRID_STEP: f64 = 1.0;

/// A worst-case agent hypothesized at an occluded position on a route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccludedHypothesis {
    pub route_index: usize,
    pub state: AgentState,
}

/// Hypothesizes worst-case traffic in the occluded parts of every route.
///
/// Route centerlines are sampled on a fixed grid; every cell whose center is
/// hidden from the ego's eye point emits hypothetical agents at both speed
/// extremes allowed there, heading along the route. Hypotheses that could
/// only exist by having violated proper-response duties (checked against the
/// ego on its own route) are discarded as unreasonable; speeds beyond the
/// limits never arise because the extremes are taken from the limits
/// themselves.
pub fn occluded_hypotheses(
    ego: &AgentState,
    ego_route: usize,
    ego_eye: Vec2,
    routes: &[Route],
    occ: &OccluderSet,
    limits: &[SpeedLimits],
    p: &RssParameters,
    sp: &ImproperSearchParams,
) -> Vec<OccludedHypothesis> {
    let mut out = Vec::new();
    for (ri, route) in routes.iter().enumerate() {
        let lim = &limits[ri];
        let len = route.geometry.length();
        let mut lon = OCCLUSION_GRID_STEP / 2.0;
        while lon < len {
            let center = route.geometry.centerline_at(lon);
            if !is_visible(ego_eye, center, occ) {
                let mut speeds = vec![lim.lon_high.max(0.0)];
                if (lim.lon_low.max(0.0) - speeds[0]).abs() > 1e-12 {
                    speeds.push(lim.lon_low.max(0.0));
                }
                for v in speeds {
                    let state = AgentState {
                        lon_pos: lon,
                        lon_vel: v,
                        lon_acc: 0.0,
                        lat_pos: 0.0,
                        lat_vel: 0.0,
                        lat_acc: 0.0,
                        half_length: HYPOTHESIS_HALF_LENGTH,
                        half_width: HYPOTHESIS_HALF_WIDTH,
                    };
                    let unreasonable =
                        ri == ego_route && unreasonable_improper(&state, ego, p, sp);
                    if !unreasonable {
                        out.push(OccludedHypothesis { route_index: ri, state });
                    }
                }
            }
            lon += OCCLUSION_GRID_STEP;
        }
    }
    out
}

/// Tightens the constraint so the agent's own speeds drift back inside the
/// limits: exceeding a bound forbids accelerating further past it.
pub fn own_speed_limit_constraint(
    ego: &AgentState,
    lim: &SpeedLimits,
    p: &RssParameters,
) -> ResponseConstraint {
    let mut c = ResponseConstraint::unconstrained_for(ego, p);
    if ego.lon_vel > lim.lon_high {
        c.lon_acc_range = c.lon_acc_range.intersect(&Interval::new(-p.a_max_brake, 0.0));
    } else if ego.lon_vel < lim.lon_low {
        c.lon_acc_range = c.lon_acc_range.intersect(&Interval::new(0.0, p.a_max_accel));
    }
    let lat_cap = p.a_lat_max_accel.max(p.a_lat_min_brake);
    if ego.lat_vel > lim.lat_high {
        c.lat_acc_range = c.lat_acc_range.intersect(&Interval::new(-lat_cap, 0.0));
    } else if ego.lat_vel < lim.lat_low {
        c.lat_acc_range = c.lat_acc_range.intersect(&Interval::new(0.0, lat_cap));
    }
    c
}

/// The ego's aggregated proper-response constraint against both observed
/// agents and every surviving occluded-traffic hypothesis. While the ego is
/// itself unexposed to potential cross traffic it must also keep its own
/// speeds within the limits — it must not *cause* an unreasonable situation.
#[allow(clippy::too_many_arguments)]
pub fn occlusion_aware_constraints(
    ego: &AgentState,
    ego_route: usize,
    ego_eye: Vec2,
    ego_exposed: bool,
    observed: &[(usize, AgentState)],
    routes: &[Route],
    occ: &OccluderSet,
    limits: &[SpeedLimits],
    p: &RssParameters,
    sp: &ImproperSearchParams,
) -> ResponseConstraint {
    let mut parts = vec![ResponseConstraint::unconstrained_for(ego, p)];
    for (ri, state) in observed {
        parts.push(constraints_over_route_hypotheses(
            ego,
            &routes[ego_route],
            state,
            std::slice::from_ref(&routes[*ri]),
            p,
        ));
    }
    for hyp in occluded_hypotheses(ego, ego_route, ego_eye, routes, occ, limits, p, sp) {
        parts.push(constraints_over_route_hypotheses(
            ego,
            &routes[ego_route],
            &hyp.state,
            std::slice::from_ref(&routes[hyp.route_index]),
            p,
        ));
    }
    if !ego_exposed {
        parts.push(own_speed_limit_constraint(ego, &limits[ego_route], p));
    }
    aggregate_constraints(&parts).expect("at least one constraint part")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_lane, CurvePiece};

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> ConvexPolygon {
        ConvexPolygon::new(vec![
            Vec2::new(x0, y0),
            Vec2::new(x1, y0),
            Vec2::new(x1, y1),
            Vec2::new(x0, y1),
        ])
    }

    fn box_at(cx: f64, cy: f64, hl: f64, hw: f64) -> ConvexPolygon {
        square(cx - hl, cy - hw, cx + hl, cy + hw)
    }

    #[test]
    fn visibility_basics() {
        let empty = OccluderSet::default();
        assert!(is_visible(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), &empty));
        let wall = OccluderSet::from_polygons(vec![square(4.0, -5.0, 5.0, 5.0)]);
        assert!(!is_visible(Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0), &wall));
        // Grazing exactly along a face still counts as seeing.
        assert!(is_visible(Vec2::new(0.0, 5.0), Vec2::new(10.0, 5.0), &wall));
        // Looking away from the wall.
        assert!(is_visible(Vec2::new(0.0, 0.0), Vec2::new(-10.0, 0.0), &wall));
    }

    #[test]
    fn exposure_at_corner_clearing() {
        // Ego parked at the origin, a building at x in [5, 6], y in [1, 10].
        // The target box slides down along x = 10; its lowest corner clears
        // the building shadow once the sight line passes below y = 1 at
        // x = 6, i.e. corner_y < corner_x / 6.
        let occ = OccluderSet::from_polygons(vec![square(5.0, 1.0, 6.0, 10.0)]);
        let frames: Vec<SceneFrame> = (0..10)
            .map(|k| SceneFrame {
                t: k as f64 / 10.0,
                agents: vec![
                    AgentSnapshot {
                        id: 0,
                        reference: Vec2::new(0.0, 0.0),
                        body: box_at(0.0, 0.0, 1.0, 0.5),
                    },
                    AgentSnapshot {
                        id: 1,
                        reference: Vec2::new(10.0, 8.0 - k as f64),
                        body: box_at(10.0, 8.0 - k as f64, 0.5, 0.5),
                    },
                ],
            })
            .collect();
        // Corner (9.5, y - 0.5) needs y < 9.5/6 + 0.5 = 2.083: first k = 6.
        assert_eq!(exposure_time(&frames, 0, 1, &occ), Ok(0.6));
        // Always-visible target: the first frame.
        assert_eq!(exposure_time(&frames, 1, 0, &OccluderSet::default()), Ok(0.0));
        // Fully enclosed target never shows up.
        let cage = OccluderSet::from_polygons(vec![
            square(8.0, -12.0, 9.0, 12.0),
            square(11.5, -12.0, 12.5, 12.0),
            square(8.0, 11.0, 12.5, 12.0),
            square(8.0, -12.0, 12.5, -11.0),
        ]);
        assert_eq!(exposure_time(&frames, 0, 1, &cage), Err(OcclusionError::NeverVisible));
        // Dynamic occluder: agent 2's bus body hides the target.
        let mut with_bus = frames[0].clone();
        with_bus.agents.push(AgentSnapshot {
            id: 2,
            reference: Vec2::new(5.0, 4.0),
            body: box_at(5.0, 4.0, 1.0, 6.0),
        });
        let occ_bus = OccluderSet { polygons: vec![], dynamic: vec![2] };
        assert_eq!(visible_in_frame(&with_bus, 0, 1, &occ_bus), Ok(false));
        assert_eq!(
            visible_in_frame(&with_bus, 0, 3, &occ_bus),
            Err(OcclusionError::AgentMissing(3))
        );
    }

    #[test]
    fn speed_averages_and_limits() {
        let track: Vec<(f64, f64, f64)> =
            (0..=20).map(|k| (k as f64 * 0.1, 12.0 * k as f64 * 0.1, 0.0)).collect();
        let avg = average_speeds(&track, 0.5, 1.5).unwrap();
        assert!((avg.lon - 12.0).abs() < 1e-9);
        assert!(avg.lat.abs() < 1e-12);
        let lim = SpeedLimits { lon_low: 0.0, lon_high: 15.0, lat_low: -0.3, lat_high: 0.3 };
        let quiet = AxisAverages { lon: 12.0, lat: 0.0 };
        assert!(!unreasonable_speed(quiet, &lim, quiet, &lim));
        // A hidden car at three times the limit exempts the other agent.
        let speeder = AxisAverages { lon: 45.0, lat: 0.0 };
        assert!(unreasonable_speed(quiet, &lim, speeder, &lim));
        // Cut-in behind a bus: lateral average far beyond the occluded bound.
        let cutter = AxisAverages { lon: 8.0, lat: 1.2 };
        assert!(unreasonable_speed(cutter, &lim, quiet, &lim));
        assert!(average_speeds(&track, 1.0, 1.0).is_none());
        assert!(average_speeds(&track, -1.0, 0.5).is_none());
    }

    fn lane_car(lon: f64, v: f64) -> AgentState {
        AgentState {
            lon_pos: lon,
            lon_vel: v,
            lon_acc: 0.0,
            lat_pos: 0.0,
            lat_vel: 0.0,
            lat_acc: 0.0,
            half_length: 2.0,
            half_width: 0.9,
        }
    }

    #[test]
    fn improper_reachability() {
        let p = RssParameters::default();
        let sp = ImproperSearchParams::default();
        // A mutually safe pair is trivially reachable.
        assert!(!unreasonable_improper(&lane_car(0.0, 10.0), &lane_car(100.0, 10.0), &p, &sp));
        // A stopped pair separated by more than the standstill safe distance.
        assert!(!unreasonable_improper(&lane_car(0.0, 0.0), &lane_car(10.0, 0.0), &p, &sp));
        // A car at speed directly behind a stopped car at a 2 m gap: its own
        // remaining stopping distance already exceeds the gap, so no
        // compliant history ends here.
        assert!(unreasonable_improper(&lane_car(0.0, 10.0), &lane_car(6.0, 0.0), &p, &sp));
        // Order of arguments must not matter (rear/front by position).
        assert!(unreasonable_improper(&lane_car(6.0, 0.0), &lane_car(0.0, 10.0), &p, &sp));
        // Outside the same-lane class: conservative false.
        let mut offset = lane_car(0.0, 10.0);
        offset.lat_pos = 5.0;
        assert!(!unreasonable_improper(&offset, &lane_car(6.0, 0.0), &p, &sp));
    }

    fn straight_route(from: Vec2, to: Vec2, width: f64, priority: bool) -> Route {
        let lane = build_lane(
            vec![CurvePiece::Line { start: from, end: to }],
            vec![(0.0, width), (from.dist(to), width)],
        )
        .unwrap();
        Route::new(lane, priority, None)
    }

    #[test]
    fn hypotheses_behind_building() {
        let p = RssParameters::default();
        let sp = ImproperSearchParams::default();
        // Ego route along x; a main road crosses at x = 100 hidden behind a
        // building southeast of the ego.
        let ego_route = straight_route(Vec2::new(0.0, 0.0), Vec2::new(120.0, 0.0), 4.0, false);
        let main_road =
            straight_route(Vec2::new(100.0, -60.0), Vec2::new(100.0, 60.0), 4.0, true);
        let routes = vec![ego_route, main_road];
        let limits =
            vec![SpeedLimits::occluded_default(false, 15.0), SpeedLimits::occluded_default(true, 15.0)];
        let ego = lane_car(40.0, 8.0);
        let ego_eye = Vec2::new(40.0, 0.0);
        let building = OccluderSet::from_polygons(vec![square(60.0, -40.0, 90.0, -5.0)]);

        let none = occluded_hypotheses(&ego, 0, ego_eye, &routes, &OccluderSet::default(), &limits, &p, &sp);
        assert!(none.is_empty(), "everything visible: no hypotheses");

        let hyps = occluded_hypotheses(&ego, 0, ego_eye, &routes, &building, &limits, &p, &sp);
        assert!(!hyps.is_empty());
        // All hypotheses sit on the hidden southern stretch of the main road.
        assert!(hyps.iter().all(|h| h.route_index == 1));
        assert!(hyps.iter().all(|h| h.state.lon_pos < 60.0));
        assert!(hyps.iter().all(|h| h.state.lon_vel <= 15.0 + 1e-9));

        // The aggregated constraint across the hidden main road is tighter
        // than (or equal to) the open-road constraint, never looser.
        let open = occlusion_aware_constraints(
            &ego, 0, ego_eye, true, &[], &routes, &OccluderSet::default(), &limits, &p, &sp,
        );
        let hidden = occlusion_aware_constraints(
            &ego, 0, ego_eye, true, &[], &routes, &building, &limits, &p, &sp,
        );
        assert_eq!(open, ResponseConstraint::unconstrained_for(&lane_car(40.0, 8.0), &p));
        assert!(open.lon_acc_range.lo <= hidden.lon_acc_range.lo + 1e-12);
        assert!(hidden.lon_acc_range.hi <= open.lon_acc_range.hi + 1e-12);
        assert!(!hidden.infeasible);
    }

    #[test]
    fn own_limits_while_unexposed() {
        let p = RssParameters::default();
        let sp = ImproperSearchParams::default();
        let route = straight_route(Vec2::new(0.0, 0.0), Vec2::new(100.0, 0.0), 4.0, true);
        let routes = vec![route];
        let limits = vec![SpeedLimits { lon_low: 0.0, lon_high: 10.0, lat_low: -0.3, lat_high: 0.3 }];
        let mut ego = lane_car(20.0, 14.0);
        ego.lat_vel = 0.5;
        let eye = Vec2::new(20.0, 0.0);
        let c = occlusion_aware_constraints(
            &ego, 0, eye, false, &[], &routes, &OccluderSet::default(), &limits, &p, &sp,
        );
        // Above the longitudinal limit and drifting laterally: both axes
        // must not push further out.
        assert!(c.lon_acc_range.hi <= 0.0);
        assert!(c.lat_acc_range.hi <= 0.0);
        let exposed = occlusion_aware_constraints(
            &ego, 0, eye, true, &[], &routes, &OccluderSet::default(), &limits, &p, &sp,
        );
        assert_eq!(exposed, ResponseConstraint::unconstrained_for(&ego, &p));
    }
}
