//! Safety for two vehicles on routes with *different geometries*: junctions,
//! merges, roundabouts, and traffic lights.
//!
//! Each car is described in the lane frame of its own route. Because the two
//! frames need not share axes, the single-road notions of "lateral distance"
//! and "in front of" are generalized:
//!
//! * **Lateral safety** considers the planar strips each car can sweep on
//!   its own route under worst-case lateral maneuvers, and requires the
//!   strips to stay at least `mu` apart.
//! * **Longitudinal ordering** uses a shared route when one exists, and
//!   otherwise compares distances to the conflict region.
//! * **Longitudinal safety** holds if one car provably stays outside the
//!   other's route (case 1), or the ordering plus a safe gap lets the rear
//!   car brake behind the front one (case 2), or the possible arrival
//!   windows at every conflict point are disjoint (case 3).
//!
//! Route footprints and conflict regions are sampled into quads at a fixed
//! longitudinal resolution; the continuum quantifier over conflict points is
//! discretized at the same resolution.

use crate::geometry::LaneGeometry;
use crate::kinematics::Motion1D;
use crate::math::{segment_segment_dist, Aabb, ConvexPolygon, Interval, Vec2};
use crate::rss_core::{
    braking_lon_constraint, safe_lon_distance_same_dir, AgentState, ResponseConstraint,
    RssParameters, LAT_VEL_REST_TOL,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longitudinal sampling step for route footprints and conflict points (m).
pub const DEFAULT_ROUTE_SAMPLE_STEP: f64 = 0.5;

/// Footprint pairs closer than this are retained for the per-call lateral
/// strip check; `mu` must not exceed it for the cached check to be exact.
pub const NEAR_PAIR_MARGIN: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum MultiRouteError {
    #[error("agent is not within the given route's footprint")]
    OffRoute,
    #[error("two conflicting routes both show a green light")]
    ConflictingGreens,
    #[error("situation is not dangerous")]
    NotDangerous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightState {
    Green,
    Red,
}

/// Identifies one member of an ordered pair of agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    First,
    Second,
}

impl Which {
    pub fn other(self) -> Which {
        match self {
            Which::First => Which::Second,
            Which::Second => Which::First,
        }
    }
}

/// A drivable route: lane geometry plus right-of-way information and a
/// sampled planar footprint.
#[derive(Debug, Clone)]
pub struct Route {
    pub geometry: LaneGeometry,
    /// Has right of way over conflicting routes.
    pub priority: bool,
    pub light: Option<LightState>,
    step: f64,
    quads: Vec<ConvexPolygon>,
    quad_aabbs: Vec<Aabb>,
    /// Longitudinal start of each footprint quad.
    quad_lons: Vec<f64>,
}

impl Route {
    pub fn new(geometry: LaneGeometry, priority: bool, light: Option<LightState>) -> Self {
        Self::with_step(geometry, priority, light, DEFAULT_ROUTE_SAMPLE_STEP)
    }

    pub fn with_step(
        geometry: LaneGeometry,
        priority: bool,
        light: Option<LightState>,
        step: f64,
    ) -> Self {
        let len = geometry.length();
        let n = ((len / step).ceil() as usize).max(1);
        let mut quads = Vec::with_capacity(n);
        let mut quad_aabbs = Vec::with_capacity(n);
        let mut quad_lons = Vec::with_capacity(n);
        for i in 0..n {
            let l0 = (i as f64 * step).min(len);
            let l1 = ((i + 1) as f64 * step).min(len);
            let quad = ConvexPolygon::new(vec![
                geometry.from_lane_frame(l0, -0.5).unwrap(),
                geometry.from_lane_frame(l0, 0.5).unwrap(),
                geometry.from_lane_frame(l1, 0.5).unwrap(),
                geometry.from_lane_frame(l1, -0.5).unwrap(),
            ]);
            quad_aabbs.push(quad.aabb());
            quads.push(quad);
            quad_lons.push(l0);
        }
        Route { geometry, priority, light, step, quads, quad_aabbs, quad_lons }
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Sampled planar footprint of the route.
    pub fn footprint(&self) -> &[ConvexPolygon] {
        &self.quads
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        self.geometry.to_lane_frame(p).is_ok()
    }

    /// World position of an agent given in this route's frame.
    pub fn world_position(&self, c: &AgentState) -> Result<Vec2, MultiRouteError> {
        let alpha = c.lat_pos / self.geometry.width_at(c.lon_pos);
        self.geometry
            .from_lane_frame(c.lon_pos, alpha)
            .map_err(|_| MultiRouteError::OffRoute)
    }
}

/// Precomputed spatial relations between two routes' footprints.
///
/// `conflict_pairs` holds `(lon1, lon2)` quad midpoints wherever the two
/// footprints overlap; `conflict_lon1/2` are the hulls of the overlap in
/// each frame. `near_pairs` additionally keeps quad index pairs closer than
/// [`NEAR_PAIR_MARGIN`], which is what the lateral strip check iterates.
#[derive(Debug, Clone)]
pub struct RoutePairCache {
    pub conflict_pairs: Vec<(f64, f64)>,
    pub conflict_lon1: Option<Interval>,
    pub conflict_lon2: Option<Interval>,
    near_pairs: Vec<(usize, usize)>,
}

impl RoutePairCache {
    pub fn new(r1: &Route, r2: &Route) -> Self {
        let mut conflict_pairs = Vec::new();
        let mut near_pairs = Vec::new();
        let mut hull1: Option<Interval> = None;
        let mut hull2: Option<Interval> = None;
        for (i, (qa, ba)) in r1.quads.iter().zip(&r1.quad_aabbs).enumerate() {
            for (j, (qb, bb)) in r2.quads.iter().zip(&r2.quad_aabbs).enumerate() {
                if ba.distance(bb) > NEAR_PAIR_MARGIN {
                    continue;
                }
                let overlap = qa.overlaps(qb);
                if overlap || qa.distance(qb) <= NEAR_PAIR_MARGIN {
                    near_pairs.push((i, j));
                }
                if overlap {
                    let l1 = Interval::new(r1.quad_lons[i], (r1.quad_lons[i] + r1.step).min(r1.geometry.length()));
                    let l2 = Interval::new(r2.quad_lons[j], (r2.quad_lons[j] + r2.step).min(r2.geometry.length()));
                    conflict_pairs.push(((l1.lo + l1.hi) / 2.0, (l2.lo + l2.hi) / 2.0));
                    hull1 = Some(hull1.map_or(l1, |h| Interval::new(h.lo.min(l1.lo), h.hi.max(l1.hi))));
                    hull2 = Some(hull2.map_or(l2, |h| Interval::new(h.lo.min(l2.lo), h.hi.max(l2.hi))));
                }
            }
        }
        RoutePairCache { conflict_pairs, conflict_lon1: hull1, conflict_lon2: hull2, near_pairs }
    }

    pub fn has_conflict(&self) -> bool {
        !self.conflict_pairs.is_empty()
    }
}

/// Reachable band of lateral (center) positions on the agent's own route
/// after a worst-case lateral maneuver: accelerate at `±a_lat_max_accel`
/// for the response time, then brake at `a_lat_min_brake` to zero lateral
/// velocity. The band covers the whole swept motion, including the start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LateralEnvelope {
    pub x_min: f64,
    pub x_max: f64,
}

pub fn lateral_envelope(
    c: &AgentState,
    r: &Route,
    p: &RssParameters,
) -> Result<LateralEnvelope, MultiRouteError> {
    r.world_position(c)?;
    Ok(lateral_envelope_unchecked(c, p))
}

fn lateral_envelope_unchecked(c: &AgentState, p: &RssParameters) -> LateralEnvelope {
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for dir in [1.0, -1.0] {
        let m = Motion1D::response_then_brake(
            c.lat_vel,
            dir * p.a_lat_max_accel,
            p.rho,
            p.a_lat_min_brake,
            false,
        );
        let horizon = m.rest_time().unwrap_or(m.end_time());
        let (mn, mx) = m.displacement_extremes(horizon);
        lo = lo.min(mn);
        hi = hi.max(mx);
    }
    LateralEnvelope { x_min: c.lat_pos + lo, x_max: c.lat_pos + hi }
}

/// One sampled cell of a route restricted to a lateral band. Bands clamped
/// to the route boundary may collapse to a segment.
enum StripCell {
    Poly(ConvexPolygon),
    Seg(Vec2, Vec2),
}

fn strip_cell(geometry: &LaneGeometry, l0: f64, l1: f64, band: Interval) -> StripCell {
    let alpha_at = |lon: f64, x: f64| (x / geometry.width_at(lon)).clamp(-0.5, 0.5);
    let c = |lon: f64, x: f64| geometry.from_lane_frame(lon, alpha_at(lon, x)).unwrap();
    if band.width() < 1e-9 {
        StripCell::Seg(c(l0, band.lo), c(l1, band.lo))
    } else {
        StripCell::Poly(ConvexPolygon::new(vec![
            c(l0, band.lo),
            c(l0, band.hi),
            c(l1, band.hi),
            c(l1, band.lo),
        ]))
    }
}

fn cell_distance(a: &StripCell, b: &StripCell) -> f64 {
    match (a, b) {
        (StripCell::Poly(pa), StripCell::Poly(pb)) => pa.distance(pb),
        (StripCell::Poly(pa), StripCell::Seg(s0, s1)) | (StripCell::Seg(s0, s1), StripCell::Poly(pa)) => {
            if pa.contains(*s0) || pa.contains(*s1) {
                return 0.0;
            }
            let vs = &pa.vertices;
            let mut d = f64::INFINITY;
            for k in 0..vs.len() {
                let e0 = vs[k];
                let e1 = vs[(k + 1) % vs.len()];
                d = d.min(segment_segment_dist(e0, e1, *s0, *s1));
            }
            d
        }
        (StripCell::Seg(a0, a1), StripCell::Seg(b0, b1)) => segment_segment_dist(*a0, *a1, *b0, *b1),
    }
}

/// Lateral safety for two routes of different geometry: the restrictions of
/// the routes to the cars' lateral envelopes (inflated by the cars' half
/// widths) must stay at least `mu` apart everywhere.
pub fn lateral_safe_multi(
    c1: &AgentState,
    r1: &Route,
    c2: &AgentState,
    r2: &Route,
    p: &RssParameters,
) -> bool {
    let cache = RoutePairCache::new(r1, r2);
    lateral_safe_multi_cached(c1, r1, c2, r2, p, &cache)
}

pub fn lateral_safe_multi_cached(
    c1: &AgentState,
    r1: &Route,
    c2: &AgentState,
    r2: &Route,
    p: &RssParameters,
    cache: &RoutePairCache,
) -> bool {
    debug_assert!(p.mu <= NEAR_PAIR_MARGIN, "cache margin assumes mu <= 1 m");
    let e1 = lateral_envelope_unchecked(c1, p);
    let e2 = lateral_envelope_unchecked(c2, p);
    let band1 = Interval::new(e1.x_min - c1.half_width, e1.x_max + c1.half_width);
    let band2 = Interval::new(e2.x_min - c2.half_width, e2.x_max + c2.half_width);
    for &(i, j) in &cache.near_pairs {
        let l1 = (r1.quad_lons[i], (r1.quad_lons[i] + r1.step).min(r1.geometry.length()));
        let l2 = (r2.quad_lons[j], (r2.quad_lons[j] + r2.step).min(r2.geometry.length()));
        let a = strip_cell(&r1.geometry, l1.0, l1.1, band1);
        let b = strip_cell(&r2.geometry, l2.0, l2.1, band2);
        if cell_distance(&a, &b) < p.mu {
            return false;
        }
    }
    true
}

/// Longitudinal ordering verdict for a pair on different routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LonOrdering {
    FirstFront,
    SecondFront,
    Neither,
}

/// Decides which car is longitudinally in front.
///
/// Rule 1: if at least one route contains both cars, order by that route's
/// longitudinal coordinate (all such routes must agree). Rule 2: if each car
/// is outside the *other's* route, the car with the smaller longitudinal
/// distance to the conflict region is in front; ties yield `Neither`.
pub fn longitudinally_in_front(c1: &AgentState, r1: &Route, c2: &AgentState, r2: &Route) -> LonOrdering {
    let cache = RoutePairCache::new(r1, r2);
    longitudinally_in_front_cached(c1, r1, c2, r2, &cache)
}

pub fn longitudinally_in_front_cached(
    c1: &AgentState,
    r1: &Route,
    c2: &AgentState,
    r2: &Route,
    cache: &RoutePairCache,
) -> LonOrdering {
    let (Ok(w1), Ok(w2)) = (r1.world_position(c1), r2.world_position(c2)) else {
        return LonOrdering::Neither;
    };
    // Rule 1: shared-route ordering.
    let mut orders: Vec<f64> = Vec::new();
    if let Ok((lon2_in_r1, _)) = r1.geometry.to_lane_frame(w2) {
        orders.push(c1.lon_pos - lon2_in_r1);
    }
    if let Ok((lon1_in_r2, _)) = r2.geometry.to_lane_frame(w1) {
        orders.push(lon1_in_r2 - c2.lon_pos);
    }
    if !orders.is_empty() {
        let tol = 1e-9;
        if orders.iter().all(|&d| d > tol) {
            return LonOrdering::FirstFront;
        }
        if orders.iter().all(|&d| d < -tol) {
            return LonOrdering::SecondFront;
        }
        return LonOrdering::Neither;
    }
    // Rule 2: both outside the other's route, compare distances to the
    // conflict region.
    let (Some(h1), Some(h2)) = (cache.conflict_lon1, cache.conflict_lon2) else {
        return LonOrdering::Neither;
    };
    let d1 = h1.lo - (c1.lon_pos + c1.half_length);
    let d2 = h2.lo - (c2.lon_pos + c2.half_length);
    let tol = 1e-9;
    if d1 < d2 - tol {
        LonOrdering::FirstFront
    } else if d2 < d1 - tol {
        LonOrdering::SecondFront
    } else {
        LonOrdering::Neither
    }
}

/// All times at which a car can arrive at a conflict point, assuming it
/// applies some acceleration in `[-a_max_brake, a_max_accel]` for the
/// response time and then brakes at a rate in `[a_min_brake, a_max_brake]`
/// until it stops.
///
/// `t_max` is `f64::INFINITY` when the hardest profile stops short of the
/// point (the car could creep in arbitrarily late).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrivalWindow {
    pub t_min: f64,
    pub t_max: f64,
}

impl ArrivalWindow {
    pub fn disjoint(&self, o: &ArrivalWindow) -> bool {
        self.t_max < o.t_min || o.t_max < self.t_min
    }
}

/// Arrival window of `c` at the conflict point `point_lon` (own-route frame),
/// widened by half a sampling step on each side and by the car's own body
/// extent. `None` means the car cannot occupy the point at all: it is either
/// already fully past it, or the point is beyond the car's maximal reach.
pub fn arrival_window(
    c: &AgentState,
    point_lon: f64,
    half_smear: f64,
    p: &RssParameters,
) -> Option<ArrivalWindow> {
    let d_enter = (point_lon - half_smear) - (c.lon_pos + c.half_length);
    let d_exit = (point_lon + half_smear) - (c.lon_pos - c.half_length);
    if d_exit <= 0.0 {
        return None; // already fully past the point
    }
    let t_min = if d_enter <= 0.0 {
        0.0
    } else {
        let farthest = Motion1D::response_then_brake(c.lon_vel, p.a_max_accel, p.rho, p.a_min_brake, true);
        farthest.earliest_time_at(d_enter)?
    };
    let slowest = Motion1D::response_then_brake(c.lon_vel, -p.a_max_brake, p.rho, p.a_max_brake, true);
    let t_max = slowest.earliest_time_at(d_exit).unwrap_or(f64::INFINITY);
    Some(ArrivalWindow { t_min, t_max })
}

/// Longitudinal safety verdict for a pair on different routes. The safe
/// cases are evaluated in order; the first that holds is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case")]
pub enum LonSafety {
    /// One car (the `yielder`) provably stays outside the other's route even
    /// if it accelerates through the response time before braking. `None`
    /// when the routes have no conflict at all.
    Case1 { yielder: Option<Which> },
    /// One car is in front and the gap is longitudinally safe.
    Case2 { front: Which },
    /// The cars' possible arrival windows are disjoint at every conflict
    /// point.
    Case3,
    Unsafe,
}

/// Maximal forward travel of a car that accelerates at `a_max_accel` for the
/// response time and then brakes at `a_min_brake` until rest.
fn max_reach(v: f64, p: &RssParameters) -> f64 {
    Motion1D::response_then_brake(v, p.a_max_accel, p.rho, p.a_min_brake, true).final_displacement()
}

/// Whether the car, on its own route, provably never overlaps the conflict
/// hull `hull` (own-frame interval) under the response-then-brake envelope.
fn stays_outside(c: &AgentState, hull: Interval, margin: f64, p: &RssParameters) -> bool {
    let front = c.lon_pos + c.half_length;
    let rear = c.lon_pos - c.half_length;
    if rear > hull.hi + margin && c.lon_vel >= 0.0 {
        return true; // already fully past; forward motion keeps it out
    }
    front + max_reach(c.lon_vel.max(0.0), p) < hull.lo - margin
}

pub fn longitudinal_safe_multi(
    c1: &AgentState,
    r1: &Route,
    c2: &AgentState,
    r2: &Route,
    p: &RssParameters,
) -> LonSafety {
    let cache = RoutePairCache::new(r1, r2);
    longitudinal_safe_multi_cached(c1, r1, c2, r2, p, &cache)
}

pub fn longitudinal_safe_multi_cached(
    c1: &AgentState,
    r1: &Route,
    c2: &AgentState,
    r2: &Route,
    p: &RssParameters,
    cache: &RoutePairCache,
) -> LonSafety {
    // Case 1: someone stays outside the conflict entirely.
    let (Some(h1), Some(h2)) = (cache.conflict_lon1, cache.conflict_lon2) else {
        return LonSafety::Case1 { yielder: None };
    };
    let m1 = r1.step / 2.0;
    let m2 = r2.step / 2.0;
    let first_out = stays_outside(c1, h1, m1, p);
    let second_out = stays_outside(c2, h2, m2, p);
    if first_out || second_out {
        let yielder = match (first_out, second_out) {
            (true, false) => Which::First,
            (false, true) => Which::Second,
            _ => {
                // Both could stay out; prefer the car without right of way,
                // then the one with more margin to the region.
                if r1.priority != r2.priority {
                    if r1.priority { Which::Second } else { Which::First }
                } else {
                    let d1 = h1.lo - (c1.lon_pos + c1.half_length);
                    let d2 = h2.lo - (c2.lon_pos + c2.half_length);
                    if d1 >= d2 { Which::First } else { Which::Second }
                }
            }
        };
        return LonSafety::Case1 { yielder: Some(yielder) };
    }
    // Case 2: ordered, with a longitudinally safe gap.
    let ordering = longitudinally_in_front_cached(c1, r1, c2, r2, cache);
    if let Some(front) = match ordering {
        LonOrdering::FirstFront => Some(Which::First),
        LonOrdering::SecondFront => Some(Which::Second),
        LonOrdering::Neither => None,
    } {
        let ((cf, hf), (cr, hr)) = match front {
            Which::First => ((c1, h1), (c2, h2)),
            Which::Second => ((c2, h2), (c1, h1)),
        };
        let d_rear = hr.lo - (cr.lon_pos + cr.half_length);
        let d_front = hf.lo - (cf.lon_pos - cf.half_length);
        let gap = d_rear - d_front;
        let d_min = safe_lon_distance_same_dir(cr.lon_vel.max(0.0), cf.lon_vel.max(0.0), p)
            .expect("non-negative speeds");
        if gap >= d_min {
            return LonSafety::Case2 { front };
        }
    }
    // Case 3: disjoint arrival windows at every sampled conflict point.
    let all_disjoint = cache.conflict_pairs.iter().all(|&(lon1, lon2)| {
        match (arrival_window(c1, lon1, m1, p), arrival_window(c2, lon2, m2, p)) {
            (Some(w1), Some(w2)) => w1.disjoint(&w2),
            _ => true, // a car that cannot occupy the point poses no conflict there
        }
    });
    if all_disjoint {
        return LonSafety::Case3;
    }
    LonSafety::Unsafe
}

/// What protected the pair just before the danger threshold; determines the
/// proper response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCase {
    /// Lateral safety held just before the threshold.
    pub lat_held: bool,
    /// The longitudinal safe case that held just before the threshold, if
    /// longitudinal safety held at all.
    pub lon_case: Option<LonSafety>,
}

/// Danger bookkeeping for one pair on different routes.
#[derive(Debug, Clone, Copy, Default)]
pub struct MultiTracker {
    dangerous: bool,
    t_b: Option<f64>,
    case: Option<ThresholdCase>,
    prev: Option<(bool, LonSafety)>,
}

impl MultiTracker {
    pub fn is_dangerous(&self) -> bool {
        self.dangerous
    }

    pub fn t_b(&self) -> Option<f64> {
        self.t_b
    }

    pub fn case_at_threshold(&self) -> Option<ThresholdCase> {
        self.case
    }

    /// Feeds one evaluation of the pair at time `t`.
    pub fn update(&mut self, t: f64, lat_safe: bool, lon: LonSafety) {
        let dangerous_now = !lat_safe && lon == LonSafety::Unsafe;
        if dangerous_now && !self.dangerous {
            self.t_b = Some(t);
            self.case = Some(match self.prev {
                Some((prev_lat, prev_lon)) => ThresholdCase {
                    lat_held: prev_lat,
                    lon_case: (prev_lon != LonSafety::Unsafe).then_some(prev_lon),
                },
                // Born dangerous: no record of what held before; demand the
                // most defensive response.
                None => ThresholdCase { lat_held: true, lon_case: Some(LonSafety::Case3) },
            });
        } else if !dangerous_now {
            self.t_b = None;
            self.case = None;
        }
        self.dangerous = dangerous_now;
        self.prev = Some((lat_safe, lon));
    }
}

/// Lateral braking toward zero lateral velocity in the agent's own route
/// frame; once at rest the agent holds zero lateral acceleration. There is
/// no cross-frame "away" direction, so no direction lock applies.
fn own_frame_lateral_braking(lat_vel: f64, p: &RssParameters) -> Interval {
    let cap = p.lat_universe().hi;
    if lat_vel > LAT_VEL_REST_TOL {
        Interval::new(-cap, -p.a_lat_min_brake)
    } else if lat_vel < -LAT_VEL_REST_TOL {
        Interval::new(p.a_lat_min_brake, cap)
    } else {
        Interval::point(0.0)
    }
}

/// The proper response of both pair members at time `t`, as determined by
/// the safe case that collapsed at the danger threshold:
///
/// * case 1: the recorded yielder brakes longitudinally after the response
///   time; the other drives normally;
/// * case 2: the rear car brakes, exactly as in the single-road
///   same-direction response;
/// * case 3: both cars brake both longitudinally and laterally;
/// * lateral threshold: both cars brake laterally w.r.t. their own routes.
pub fn proper_response_multi(
    tracker: &MultiTracker,
    c1: &AgentState,
    c2: &AgentState,
    t: f64,
    p: &RssParameters,
) -> Result<(ResponseConstraint, ResponseConstraint), MultiRouteError> {
    let t_b = tracker.t_b.ok_or(MultiRouteError::NotDangerous)?;
    if t < t_b {
        return Err(MultiRouteError::NotDangerous);
    }
    let case = tracker.case.ok_or(MultiRouteError::NotDangerous)?;
    let mut first = ResponseConstraint::unconstrained_for(c1, p);
    let mut second = ResponseConstraint::unconstrained_for(c2, p);
    if t - t_b < p.rho {
        return Ok((first, second));
    }
    let lat_brakes = case.lat_held || case.lon_case == Some(LonSafety::Case3);
    if lat_brakes {
        first.lat_acc_range = own_frame_lateral_braking(c1.lat_vel, p);
        second.lat_acc_range = own_frame_lateral_braking(c2.lat_vel, p);
    }
    match case.lon_case {
        Some(LonSafety::Case1 { yielder: Some(who) }) => {
            let (c, slot) = match who {
                Which::First => (c1, &mut first),
                Which::Second => (c2, &mut second),
            };
            slot.lon_acc_range = braking_lon_constraint(c.lon_vel, p.a_min_brake, p);
        }
        Some(LonSafety::Case2 { front }) => {
            let (c, slot) = match front.other() {
                Which::First => (c1, &mut first),
                Which::Second => (c2, &mut second),
            };
            slot.lon_acc_range = braking_lon_constraint(c.lon_vel, p.a_min_brake, p);
        }
        Some(LonSafety::Case3) => {
            first.lon_acc_range = braking_lon_constraint(c1.lon_vel, p.a_min_brake, p);
            second.lon_acc_range = braking_lon_constraint(c2.lon_vel, p.a_min_brake, p);
        }
        // Lateral-only threshold, or disjoint routes: no longitudinal duty.
        Some(LonSafety::Case1 { yielder: None }) | Some(LonSafety::Unsafe) | None => {}
    }
    Ok((first, second))
}

/// Applies traffic-light right of way: routes showing green gain priority,
/// routes showing red lose it, unlit routes keep their configured priority.
/// Two *conflicting* green routes are rejected.
pub fn apply_traffic_lights(routes: &[Route]) -> Result<Vec<Route>, MultiRouteError> {
    if routes.iter().all(|r| r.light.is_none()) {
        return Ok(routes.to_vec());
    }
    let mut out = routes.to_vec();
    for r in &mut out {
        match r.light {
            Some(LightState::Green) => r.priority = true,
            Some(LightState::Red) => r.priority = false,
            None => {}
        }
    }
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            if out[i].light == Some(LightState::Green)
                && out[j].light == Some(LightState::Green)
                && out[i].geometry != out[j].geometry
                && RoutePairCache::new(&out[i], &out[j]).has_conflict()
            {
                return Err(MultiRouteError::ConflictingGreens);
            }
        }
    }
    Ok(out)
}

/// Ego-side constraint against another agent whose route is uncertain: the
/// ego must comply with the response obtained under *every* hypothesis, so
/// the constraints are intersected.
///
/// This is a stateless, instantaneous query: when a hypothesis is dangerous
/// right now, the post-response-window constraint is used (conservative),
/// with the role inferred from the current ordering.
pub fn constraints_over_route_hypotheses(
    ego: &AgentState,
    ego_route: &Route,
    other: &AgentState,
    hypotheses: &[Route],
    p: &RssParameters,
) -> ResponseConstraint {
    let mut parts = Vec::with_capacity(hypotheses.len().max(1));
    for hyp in hypotheses {
        let cache = RoutePairCache::new(ego_route, hyp);
        let lat_safe = lateral_safe_multi_cached(ego, ego_route, other, hyp, p, &cache);
        let lon = longitudinal_safe_multi_cached(ego, ego_route, other, hyp, p, &cache);
        if lat_safe || lon != LonSafety::Unsafe {
            parts.push(ResponseConstraint::unconstrained_for(ego, p));
            continue;
        }
        let mut c = ResponseConstraint::unconstrained_for(ego, p);
        match longitudinally_in_front_cached(ego, ego_route, other, hyp, &cache) {
            LonOrdering::FirstFront => {} // ego in front: no duty from this pair
            LonOrdering::SecondFront => {
                c.lon_acc_range = braking_lon_constraint(ego.lon_vel, p.a_min_brake, p);
            }
            LonOrdering::Neither => {
                c.lon_acc_range = braking_lon_constraint(ego.lon_vel, p.a_min_brake, p);
                c.lat_acc_range = own_frame_lateral_braking(ego.lat_vel, p);
            }
        }
        parts.push(c);
    }
    crate::rss_core::aggregate_constraints(&parts)
        .unwrap_or_else(|| ResponseConstraint::unconstrained_for(ego, p))
}
