//! Deterministic multi-agent simulator.
//!
//! A [`Scenario`] describes a map (a straight multi-lane road, a set of
//! possibly-crossing routes, or open ground), a handful of agents with
//! behaviors, and timing. [`run`] steps the world on a fixed physics
//! timestep with a slower decision period, evaluates every pair of agents
//! with the matching danger machinery, constrains each agent by its
//! aggregated proper response (adjusted for what it can actually see), and
//! records a complete [`Trace`]: per-step states, applied accelerations,
//! constraint envelopes, pair danger status, and a separate event stream
//! (danger onsets, exposures, collisions, constraint violations).
//!
//! On top of the runner sit three consumers:
//!
//! * [`detect_collisions`] — recomputes body overlap from the recorded
//!   states alone, as an independent check on the runner's own events;
//! * [`assign_responsibility`] — replays the danger window of every
//!   collision and names the agents whose applied accelerations broke
//!   their recorded constraints, with occlusion exemptions (no duty toward
//!   what could not be seen), hidden-speed checks (agents that moved
//!   unreasonably fast while unobservable are named even if they complied
//!   once exposed), and evasive leniency (after the counterpart's first
//!   breach, an agent is held only to the physical envelope);
//! * [`utopia_fuzz`] — generates random all-compliant scenarios per family
//!   and asserts that no collision ever happens, shrinking any failure to
//!   a minimal reproduction.
//!
//! Determinism: `run` uses no randomness; identical scenarios produce
//! byte-identical traces (see [`Trace::digest`]). The fuzzer derives one
//! independent RNG stream per scenario index, so results are independent
//! of thread scheduling.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{build_lane, CurvePiece};
use crate::math::{ConvexPolygon, Interval, Vec2};
use crate::multi_route::{
    apply_traffic_lights, lateral_safe_multi_cached, longitudinal_safe_multi_cached,
    proper_response_multi, LightState, MultiTracker, Route, RoutePairCache, Which,
};
use crate::occlusion::{
    average_speeds, is_visible, own_speed_limit_constraint, visible_in_frame, AgentSnapshot,
    OccluderSet, SceneFrame, SpeedLimits,
};
use crate::rss_core::{
    aggregate_constraints, basic_proper_response, braking_lon_constraint, instantaneous_tracker,
    safe_lon_distance_same_dir, update_danger, AgentState, DangerTracker, ResponseConstraint,
    RssParameters,
};
use crate::unstructured::{
    unstructured_proper_response, unstructured_safe, vehicle_pedestrian_safe, FamilyKind,
    PedestrianParams, RightOfWay, UnstructuredParams, UnstructuredPose, UnstructuredSafety,
    UnstructuredTracker,
};

/// Smallest supported physics step (s).
const MIN_TIMESTEP: f64 = 1e-3;
/// Largest supported physics step (s).
const MAX_TIMESTEP: f64 = 0.1;
/// Bodies closer than this count as touching (m).
const TOUCH_TOL: f64 = 1e-9;
/// Tolerance used when re-checking recorded accelerations (m/s^2).
const REPLAY_TOL: f64 = 1e-6;
/// Grid step when sampling occluded road cells for worst-case hypotheses (m).
const HYPOTHESIS_GRID_STEP: f64 = 1.0;
/// How far ahead of an agent occluded cells are hypothesized (m).
const HYPOTHESIS_LOOKAHEAD: f64 = 180.0;
/// How far behind an agent occluded cells are hypothesized (m).
const HYPOTHESIS_LOOKBACK: f64 = 12.0;
/// Body half-dimensions assumed for hypothesized occluded traffic (m).
const HYPOTHESIS_HALF: (f64, f64) = (2.0, 0.9);
/// Default body half-dimensions (m).
const VEHICLE_HALF: (f64, f64) = (2.0, 0.9);
const PEDESTRIAN_HALF: (f64, f64) = (0.3, 0.3);
/// Default forward speed limit assumed for unobservable traffic (m/s).
const DEFAULT_HIDDEN_LON_HIGH: f64 = 15.0;
/// Deceleration demand above which a planned stop point engages (m/s^2).
const STOP_POINT_ENGAGE: f64 = 1.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("could not read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::InvalidScenario(msg.into())
}

// ---------------------------------------------------------------------------
// Scenario schema
// ---------------------------------------------------------------------------

fn default_duration() -> f64 {
    60.0
}
fn default_timestep() -> f64 {
    0.01
}
fn default_policy_period() -> f64 {
    0.1
}
fn default_lane_width() -> f64 {
    3.5
}
fn default_route_width() -> f64 {
    3.5
}
fn default_true() -> bool {
    true
}
fn default_row() -> RightOfWay {
    RightOfWay::Dynamic
}

/// A complete, serializable description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub map: MapSpec,
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub params: RssParameters,
    #[serde(default)]
    pub unstructured: UnstructuredParams,
    #[serde(default)]
    pub pedestrian: PedestrianParams,
    /// Right-of-way regime between vehicles and pedestrians on open ground.
    #[serde(default = "default_row")]
    pub right_of_way: RightOfWay,
    /// Speed limits assumed for unobservable traffic; defaults to the
    /// standard occluded-road limits with a 15 m/s forward bound.
    #[serde(default)]
    pub hidden_limits: Option<SpeedLimits>,
    /// Whether constraint-following agents hypothesize worst-case traffic in
    /// occluded road cells. Turning this off models plain see-and-react
    /// sensing: duties still start only at exposure, but nothing is assumed
    /// about what remains hidden.
    #[serde(default = "default_true")]
    pub occlusion_caution: bool,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_timestep")]
    pub timestep: f64,
    #[serde(default = "default_policy_period")]
    pub policy_period: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    /// A straight road with `lanes` parallel lanes. Lateral zero is the road
    /// center; lane centers sit at `(i - (lanes-1)/2) * lane_width`.
    Straight {
        lanes: usize,
        #[serde(default = "default_lane_width")]
        lane_width: f64,
        length: f64,
        #[serde(default)]
        occluders: Vec<ConvexPolygon>,
    },
    /// A set of explicit routes that may cross, merge, or run independently.
    Junction { routes: Vec<RouteSpec> },
    /// Unstructured ground: agents carry world poses, no lane frame exists.
    Open {
        #[serde(default)]
        occluders: Vec<ConvexPolygon>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub pieces: Vec<CurvePiece>,
    #[serde(default = "default_route_width")]
    pub width: f64,
    #[serde(default)]
    pub priority: bool,
    #[serde(default)]
    pub light: Option<LightState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Vehicle,
    Pedestrian,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: usize,
    #[serde(default)]
    pub kind: AgentKind,
    /// Route index on route maps; ignored on open ground.
    #[serde(default)]
    pub route: usize,
    pub init: InitState,
    pub behavior: BehaviorSpec,
    #[serde(default)]
    pub half_length: Option<f64>,
    #[serde(default)]
    pub half_width: Option<f64>,
    /// Whether this agent's body blocks sight lines (e.g. a bus or truck).
    #[serde(default)]
    pub occludes: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitState {
    Lane {
        lon: f64,
        lat: f64,
        #[serde(default)]
        lon_vel: f64,
        #[serde(default)]
        lat_vel: f64,
    },
    Pose {
        x: f64,
        y: f64,
        #[serde(default)]
        heading: f64,
        #[serde(default)]
        speed: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorSpec {
    /// Tracks a desired speed and lateral target, always clamped into the
    /// agent's aggregated constraint.
    Compliant {
        desired_speed: f64,
        #[serde(default)]
        lat_target: Option<f64>,
        #[serde(default)]
        lane_change: Option<LaneChange>,
        /// Longitudinal position (front edge) to stop at, e.g. a stop line.
        #[serde(default)]
        stop_at: Option<f64>,
        /// Coast rather than speed up while visibly inside a dangerous pair
        /// (even during the response window, where speeding up is formally
        /// permitted). The safe-distance envelopes already budget for
        /// worst-case response-time acceleration, so a defensive controller
        /// converts that budget into real margin. Default on.
        #[serde(default = "default_true")]
        defensive: bool,
    },
    /// Applies the listed accelerations verbatim, ignoring all constraints.
    Scripted { segments: Vec<ScriptSegment> },
    /// A compliant controller with one deliberate defect.
    Violator { profile: ViolatorProfile },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneChange {
    /// Time at which the lateral target switches (s).
    pub at: f64,
    pub lat_target: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    /// Segment end time (s); segments apply in order, last one wins ties.
    pub until: f64,
    #[serde(default)]
    pub lon_acc: f64,
    #[serde(default)]
    pub lat_acc: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case", deny_unknown_fields)]
pub enum ViolatorProfile {
    /// Drives compliantly, then brakes harder than the model's worst case.
    Overbrake { at: f64, brake: f64 },
    /// Ignores every constraint for `extra` seconds beyond the allowed
    /// response time after first becoming endangered.
    DelayedResponse { extra: f64, desired_speed: f64 },
    /// Holds a fixed lateral acceleration beyond the physical envelope.
    LateralDrift { lat_acc: f64, desired_speed: f64 },
    /// Complies with everything it can see but ignores both the worst-case
    /// hypotheses for occluded space and the hidden-traffic speed limits.
    OccludedSpeeding { desired_speed: f64 },
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Structural validation beyond what the schema can express.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(invalid("duration must be positive"));
        }
        if !(MIN_TIMESTEP..=MAX_TIMESTEP).contains(&self.timestep) {
            return Err(invalid(format!(
                "timestep {} outside supported range [{MIN_TIMESTEP}, {MAX_TIMESTEP}]",
                self.timestep
            )));
        }
        if self.policy_period + 1e-12 < self.timestep {
            return Err(invalid("policy_period must be at least one timestep"));
        }
        self.params
            .validated()
            .map_err(|e| invalid(format!("params: {e}")))?;
        if let Some(lim) = self.hidden_limits {
            lim.validated().map_err(|e| invalid(format!("hidden_limits: {e}")))?;
        }
        let u = &self.unstructured;
        if !(u.epsilon > 0.0 && u.step > 0.0 && u.horizon > u.step) {
            return Err(invalid("unstructured: epsilon, step, horizon must be positive"));
        }
        let n_routes = match &self.map {
            MapSpec::Straight { lanes, lane_width, length, .. } => {
                if *lanes == 0 || *lanes > 8 {
                    return Err(invalid("straight map needs 1..=8 lanes"));
                }
                if !(*lane_width > 1.0) || !(*length > 0.0) {
                    return Err(invalid("straight map needs positive lane width and length"));
                }
                1
            }
            MapSpec::Junction { routes } => {
                if routes.is_empty() {
                    return Err(invalid("junction map needs at least one route"));
                }
                for (i, r) in routes.iter().enumerate() {
                    if r.pieces.is_empty() {
                        return Err(invalid(format!("route {i} has no pieces")));
                    }
                    if !(r.width > 1.0) {
                        return Err(invalid(format!("route {i} needs width > 1 m")));
                    }
                }
                routes.len()
            }
            MapSpec::Open { .. } => 0,
        };
        let open = matches!(self.map, MapSpec::Open { .. });
        if open {
            // Trajectory families compare center points with `epsilon`
            // clearance; bodies must fit inside that clearance or the
            // no-collision argument does not transfer to the boxes.
            let max_diag = self
                .agents
                .iter()
                .map(|a| {
                    let (hl, hw) = half_dims(a);
                    (hl * hl + hw * hw).sqrt()
                })
                .fold(0.0, f64::max);
            if u.epsilon < 2.0 * max_diag {
                return Err(invalid(format!(
                    "open map: unstructured.epsilon ({}) must cover the largest body pair (>= {:.2})",
                    u.epsilon,
                    2.0 * max_diag
                )));
            }
        }
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id) {
                return Err(invalid(format!("duplicate agent id {}", a.id)));
            }
            match (&a.init, open) {
                (InitState::Lane { .. }, true) => {
                    return Err(invalid(format!("agent {}: lane init on an open map", a.id)))
                }
                (InitState::Pose { .. }, false) => {
                    return Err(invalid(format!("agent {}: pose init on a route map", a.id)))
                }
                _ => {}
            }
            if a.kind == AgentKind::Pedestrian {
                if !open {
                    return Err(invalid(format!("agent {}: pedestrians need an open map", a.id)));
                }
                if !matches!(a.behavior, BehaviorSpec::Compliant { .. }) {
                    return Err(invalid(format!("agent {}: pedestrians must be compliant", a.id)));
                }
            }
            if !open {
                if a.route >= n_routes {
                    return Err(invalid(format!(
                        "agent {}: route {} out of range ({n_routes} routes)",
                        a.id, a.route
                    )));
                }
            } else if !matches!(a.behavior, BehaviorSpec::Compliant { .. }) {
                return Err(invalid(format!(
                    "agent {}: only compliant behavior is supported on open maps",
                    a.id
                )));
            }
            for v in [a.half_length, a.half_width].into_iter().flatten() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(invalid(format!("agent {}: bad body dimension {v}", a.id)));
                }
            }
            if let BehaviorSpec::Scripted { segments } = &a.behavior {
                let mut last = 0.0;
                for s in segments {
                    if s.until < last {
                        return Err(invalid(format!("agent {}: script times must increase", a.id)));
                    }
                    last = s.until;
                }
            }
        }
        if self.agents.is_empty() {
            return Err(invalid("scenario needs at least one agent"));
        }
        if matches!(&self.map, MapSpec::Junction { routes } if routes.len() > 1) {
            let has_occ = self.agents.iter().any(|a| a.occludes);
            if has_occ {
                return Err(invalid("occluding agents are only supported on straight or open maps"));
            }
        }
        Ok(())
    }

    fn hidden_limits_or_default(&self) -> SpeedLimits {
        self.hidden_limits
            .unwrap_or_else(|| SpeedLimits::occluded_default(true, DEFAULT_HIDDEN_LON_HIGH))
    }

    fn has_occlusion(&self) -> bool {
        let statics = match &self.map {
            MapSpec::Straight { occluders, .. } | MapSpec::Open { occluders } => !occluders.is_empty(),
            MapSpec::Junction { .. } => false,
        };
        statics || self.agents.iter().any(|a| a.occludes)
    }
}

fn half_dims(spec: &AgentSpec) -> (f64, f64) {
    let d = match spec.kind {
        AgentKind::Vehicle => VEHICLE_HALF,
        AgentKind::Pedestrian => PEDESTRIAN_HALF,
    };
    (spec.half_length.unwrap_or(d.0), spec.half_width.unwrap_or(d.1))
}

// ---------------------------------------------------------------------------
// Trace
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A pair crossed its danger threshold (a, b = the pair).
    DangerOnset,
    /// Agent `a` gained line of sight to agent `b`.
    Exposure,
    /// Bodies of `a` and `b` touched; latched once per pair.
    Collision,
    /// Agent `a`'s applied acceleration left its constraint envelope.
    Violation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub a: usize,
    #[serde(default)]
    pub b: Option<usize>,
}

/// One agent in one recorded step. Lane-frame fields are zero for agents on
/// open ground (whose motion lives in `x`, `y`, `heading`, with `lon_vel`
/// holding the scalar speed).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: usize,
    pub route: Option<usize>,
    pub lon: f64,
    pub lat: f64,
    pub lon_vel: f64,
    pub lat_vel: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub applied_lon: f64,
    pub applied_lat: f64,
    pub lon_lo: f64,
    pub lon_hi: f64,
    pub lat_lo: f64,
    pub lat_hi: f64,
    pub infeasible: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: usize,
    pub b: usize,
    pub dangerous: bool,
    pub t_b: Option<f64>,
    pub a_sees_b: bool,
    pub b_sees_a: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    pub pairs: Vec<PairRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub scenario: String,
    pub seed: u64,
    pub timestep: f64,
    pub steps: Vec<TraceStep>,
    pub events: Vec<Event>,
}

impl Trace {
    pub fn collisions(&self) -> Vec<Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Collision).copied().collect()
    }

    /// SHA-256 over the numeric content of the trace; byte-identical for
    /// byte-identical runs.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let f = |h: &mut Sha256, x: f64| h.update(x.to_bits().to_le_bytes());
        let u = |h: &mut Sha256, x: u64| h.update(x.to_le_bytes());
        u(&mut h, self.seed);
        f(&mut h, self.timestep);
        for step in &self.steps {
            f(&mut h, step.t);
            for a in &step.agents {
                u(&mut h, a.id as u64);
                u(&mut h, a.route.map_or(u64::MAX, |r| r as u64));
                for v in [
                    a.lon, a.lat, a.lon_vel, a.lat_vel, a.x, a.y, a.heading, a.applied_lon,
                    a.applied_lat, a.lon_lo, a.lon_hi, a.lat_lo, a.lat_hi,
                ] {
                    f(&mut h, v);
                }
                h.update([a.infeasible as u8]);
            }
            for p in &step.pairs {
                u(&mut h, p.a as u64);
                u(&mut h, p.b as u64);
                h.update([p.dangerous as u8, p.a_sees_b as u8, p.b_sees_a as u8]);
                match p.t_b {
                    Some(t) => {
                        h.update([1u8]);
                        f(&mut h, t);
                    }
                    None => h.update([0u8]),
                }
            }
        }
        for e in &self.events {
            f(&mut h, e.t);
            h.update([match e.kind {
                EventKind::DangerOnset => 0u8,
                EventKind::Exposure => 1,
                EventKind::Collision => 2,
                EventKind::Violation => 3,
            }]);
            u(&mut h, e.a as u64);
            u(&mut h, e.b.map_or(u64::MAX, |b| b as u64));
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// One JSON object per line, one line per step.
    pub fn steps_jsonl(&self) -> String {
        let mut s = String::new();
        for step in &self.steps {
            s.push_str(&serde_json::to_string(step).expect("step serializes"));
            s.push('\n');
        }
        s
    }

    pub fn events_json(&self) -> String {
        serde_json::to_string_pretty(&self.events).expect("events serialize")
    }
}

// ---------------------------------------------------------------------------
// World construction
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Body {
    OnRoute { route: usize, state: AgentState },
    Free { pose: UnstructuredPose, half_length: f64, half_width: f64 },
}

#[derive(Debug, Clone)]
enum BehaviorRt {
    Compliant {
        desired: f64,
        lat_target: f64,
        change: Option<LaneChange>,
        stop_at: Option<f64>,
        defensive: bool,
    },
    Scripted { segments: Vec<ScriptSegment> },
    Overbrake { desired: f64, lat_target: f64, at: f64, brake: f64 },
    Delayed { desired: f64, lat_target: f64, extra: f64 },
    Drift { desired: f64, lat_acc: f64 },
    Speeding { desired: f64, lat_target: f64 },
    Cruise { desired: f64 },
    Walk { desired: f64 },
}

impl BehaviorRt {
    /// Whether the agent honors occlusion caution and hidden-speed limits.
    fn full_knowledge_discipline(&self) -> bool {
        matches!(
            self,
            BehaviorRt::Compliant { .. } | BehaviorRt::Overbrake { .. } | BehaviorRt::Delayed { .. }
        )
    }
}

struct AgentRt {
    id: usize,
    kind: AgentKind,
    body: Body,
    beh: BehaviorRt,
    occludes: bool,
}

enum PairKind {
    Same { tracker: DangerTracker },
    Cross { tracker: MultiTracker, cache: Box<RoutePairCache> },
    OpenVv {
        tracker: UnstructuredTracker,
        /// Verdict memo for the previous poses: families depend only on the
        /// two poses, so while neither agent moves (standoffs dominate long
        /// runs) the sweep result can be reused bit-for-bit.
        memo: Option<(UnstructuredPose, UnstructuredPose, UnstructuredSafety)>,
    },
    VehPed { car: usize, ped: usize, t_b: Option<f64> },
}

struct PairRt {
    i: usize,
    j: usize,
    kind: PairKind,
    collided: bool,
    was_dangerous: bool,
}

impl PairRt {
    fn dangerous(&self) -> bool {
        match &self.kind {
            PairKind::Same { tracker } => tracker.is_dangerous(),
            PairKind::Cross { tracker, .. } => tracker.is_dangerous(),
            PairKind::OpenVv { tracker, .. } => tracker.is_dangerous(),
            PairKind::VehPed { t_b, .. } => t_b.is_some(),
        }
    }

    fn t_b(&self) -> Option<f64> {
        match &self.kind {
            PairKind::Same { tracker } => tracker.t_b(),
            PairKind::Cross { tracker, .. } => tracker.t_b(),
            PairKind::OpenVv { tracker, .. } => tracker.t_b(),
            PairKind::VehPed { t_b, .. } => *t_b,
        }
    }

    fn other(&self, k: usize) -> usize {
        if self.i == k {
            self.j
        } else {
            self.i
        }
    }
}

struct World {
    routes: Vec<Route>,
    statics: Vec<ConvexPolygon>,
    occ: OccluderSet,
    limits: Vec<SpeedLimits>,
    row: RightOfWay,
    has_occlusion: bool,
    caution: bool,
}

fn route_sample_step(length: f64) -> f64 {
    (length / 1200.0).clamp(0.5, 2.0)
}

fn build_world(sc: &Scenario) -> Result<World, SimError> {
    let (routes, statics) = match &sc.map {
        MapSpec::Straight { lanes, lane_width, length, occluders } => {
            let width = *lanes as f64 * lane_width;
            let geometry = build_lane(
                vec![CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(*length, 0.0) }],
                vec![(0.0, width)],
            )
            .map_err(|e| invalid(e.to_string()))?;
            let route = Route::with_step(geometry, true, None, route_sample_step(*length));
            (vec![route], occluders.clone())
        }
        MapSpec::Junction { routes } => {
            let mut built = Vec::with_capacity(routes.len());
            for r in routes {
                let geometry = build_lane(r.pieces.clone(), vec![(0.0, r.width)])
                    .map_err(|e| invalid(e.to_string()))?;
                let step = route_sample_step(geometry.length());
                built.push(Route::with_step(geometry, r.priority, r.light, step));
            }
            let built = apply_traffic_lights(&built).map_err(|e| invalid(e.to_string()))?;
            (built, Vec::new())
        }
        MapSpec::Open { occluders } => (Vec::new(), occluders.clone()),
    };
    let dynamic: Vec<usize> = sc.agents.iter().filter(|a| a.occludes).map(|a| a.id).collect();
    let has_occlusion = !statics.is_empty() || !dynamic.is_empty();
    let occ = OccluderSet { polygons: statics.clone(), dynamic };
    let lim = sc.hidden_limits_or_default();
    let limits = vec![lim; routes.len().max(1)];
    Ok(World {
        routes,
        statics,
        occ,
        limits,
        row: sc.right_of_way,
        has_occlusion,
        caution: sc.occlusion_caution,
    })
}

fn build_agents(sc: &Scenario, world: &World) -> Result<Vec<AgentRt>, SimError> {
    let mut agents = Vec::with_capacity(sc.agents.len());
    for spec in &sc.agents {
        let (hl, hw) = half_dims(spec);
        let body = match spec.init {
            InitState::Lane { lon, lat, lon_vel, lat_vel } => {
                let route = &world.routes[spec.route];
                let half_road = 0.5 * route.geometry.width_at(lon);
                if lat.abs() > half_road {
                    return Err(invalid(format!(
                        "agent {}: lateral position {lat} outside road half-width {half_road}",
                        spec.id
                    )));
                }
                Body::OnRoute {
                    route: spec.route,
                    state: AgentState {
                        lon_pos: lon,
                        lon_vel,
                        lon_acc: 0.0,
                        lat_pos: lat,
                        lat_vel,
                        lat_acc: 0.0,
                        half_length: hl,
                        half_width: hw,
                    },
                }
            }
            InitState::Pose { x, y, heading, speed } => {
                if speed < 0.0 {
                    return Err(invalid(format!("agent {}: negative speed", spec.id)));
                }
                Body::Free {
                    pose: UnstructuredPose {
                        position: Vec2::new(x, y),
                        heading,
                        speed,
                        yaw_rate: 0.0,
                    },
                    half_length: hl,
                    half_width: hw,
                }
            }
        };
        let init_lat = match spec.init {
            InitState::Lane { lat, .. } => lat,
            InitState::Pose { .. } => 0.0,
        };
        let beh = match (&spec.behavior, &body, spec.kind) {
            (BehaviorSpec::Compliant { desired_speed, .. }, Body::Free { .. }, AgentKind::Pedestrian) => {
                BehaviorRt::Walk { desired: *desired_speed }
            }
            (BehaviorSpec::Compliant { desired_speed, .. }, Body::Free { .. }, AgentKind::Vehicle) => {
                BehaviorRt::Cruise { desired: *desired_speed }
            }
            (
                BehaviorSpec::Compliant { desired_speed, lat_target, lane_change, stop_at, defensive },
                Body::OnRoute { .. },
                _,
            ) => BehaviorRt::Compliant {
                desired: *desired_speed,
                lat_target: lat_target.unwrap_or(init_lat),
                change: *lane_change,
                stop_at: *stop_at,
                defensive: *defensive,
            },
            (BehaviorSpec::Scripted { segments }, Body::OnRoute { .. }, _) => {
                BehaviorRt::Scripted { segments: segments.clone() }
            }
            (BehaviorSpec::Violator { profile }, Body::OnRoute { .. }, _) => match *profile {
                ViolatorProfile::Overbrake { at, brake } => BehaviorRt::Overbrake {
                    desired: match spec.init {
                        InitState::Lane { lon_vel, .. } => lon_vel,
                        _ => 0.0,
                    },
                    lat_target: init_lat,
                    at,
                    brake,
                },
                ViolatorProfile::DelayedResponse { extra, desired_speed } => {
                    BehaviorRt::Delayed { desired: desired_speed, lat_target: init_lat, extra }
                }
                ViolatorProfile::LateralDrift { lat_acc, desired_speed } => {
                    BehaviorRt::Drift { desired: desired_speed, lat_acc }
                }
                ViolatorProfile::OccludedSpeeding { desired_speed } => {
                    BehaviorRt::Speeding { desired: desired_speed, lat_target: init_lat }
                }
            },
            _ => return Err(invalid(format!("agent {}: unsupported behavior for this map", spec.id))),
        };
        agents.push(AgentRt { id: spec.id, kind: spec.kind, body, beh, occludes: spec.occludes });
    }
    Ok(agents)
}

fn build_pairs(world: &World, agents: &[AgentRt]) -> Vec<PairRt> {
    let mut pairs = Vec::new();
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let kind = match (&agents[i].body, &agents[j].body) {
                (Body::OnRoute { route: ri, .. }, Body::OnRoute { route: rj, .. }) => {
                    if ri == rj {
                        PairKind::Same { tracker: DangerTracker::default() }
                    } else {
                        let cache =
                            Box::new(RoutePairCache::new(&world.routes[*ri], &world.routes[*rj]));
                        PairKind::Cross { tracker: MultiTracker::default(), cache }
                    }
                }
                (Body::Free { .. }, Body::Free { .. }) => {
                    match (agents[i].kind, agents[j].kind) {
                        (AgentKind::Vehicle, AgentKind::Vehicle) => {
                            PairKind::OpenVv {
                                tracker: UnstructuredTracker::default(),
                                memo: None,
                            }
                        }
                        (AgentKind::Vehicle, AgentKind::Pedestrian) => {
                            PairKind::VehPed { car: i, ped: j, t_b: None }
                        }
                        (AgentKind::Pedestrian, AgentKind::Vehicle) => {
                            PairKind::VehPed { car: j, ped: i, t_b: None }
                        }
                        // Pedestrian pairs carry no vehicle duty; they are
                        // still covered by collision detection.
                        (AgentKind::Pedestrian, AgentKind::Pedestrian) => continue,
                    }
                }
                _ => unreachable!("maps are homogeneous"),
            };
            pairs.push(PairRt { i, j, kind, collided: false, was_dangerous: false });
        }
    }
    pairs
}

// ---------------------------------------------------------------------------
// World geometry helpers
// ---------------------------------------------------------------------------

fn world_pose(world: &World, body: &Body) -> (Vec2, f64) {
    match body {
        Body::OnRoute { route, state } => {
            let g = &world.routes[*route].geometry;
            let tangent = g.tangent_at(state.lon_pos.clamp(0.0, g.length()));
            let center = g.centerline_at(state.lon_pos) + tangent.perp_right() * state.lat_pos;
            (center, tangent.angle())
        }
        Body::Free { pose, .. } => (pose.position, pose.heading),
    }
}

fn body_halves(agent: &AgentRt) -> (f64, f64) {
    match &agent.body {
        Body::OnRoute { state, .. } => (state.half_length, state.half_width),
        Body::Free { half_length, half_width, .. } => (*half_length, *half_width),
    }
}

fn body_polygon(world: &World, agent: &AgentRt) -> ConvexPolygon {
    let (center, heading) = world_pose(world, &agent.body);
    let (hl, hw) = body_halves(agent);
    ConvexPolygon::oriented_box(center, Vec2::from_angle(heading), hl, hw)
}

fn bodies_touch(a: &ConvexPolygon, b: &ConvexPolygon) -> bool {
    a.distance(b) <= TOUCH_TOL
}

fn scene_frame(t: f64, world: &World, agents: &[AgentRt]) -> SceneFrame {
    SceneFrame {
        t,
        agents: agents
            .iter()
            .map(|a| AgentSnapshot {
                id: a.id,
                reference: world_pose(world, &a.body).0,
                body: body_polygon(world, a),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Runs the scenario to completion. Uses no randomness: the result is a pure
/// function of the scenario.
pub fn run(sc: &Scenario) -> Result<Trace, SimError> {
    sc.validate()?;
    let world = build_world(sc)?;
    let mut agents = build_agents(sc, &world)?;
    let mut pairs = build_pairs(&world, &agents);
    let p = &sc.params;
    let u = &sc.unstructured;
    let pp = &sc.pedestrian;
    let n = agents.len();
    let dt = sc.timestep;
    let n_steps = (sc.duration / dt).round().max(1.0) as usize;

    let mut events: Vec<Event> = Vec::new();
    let mut steps: Vec<TraceStep> = Vec::with_capacity(n_steps + 1);
    // exposure[k][o] = time k first gained (and has since kept) sight of o.
    let mut exposure: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n];
    let mut caution_states: Vec<Vec<AgentState>> = vec![Vec::new(); n];
    let mut first_danger: Vec<Option<f64>> = vec![None; n];
    let mut was_violating = vec![false; n];
    let mut next_policy = 0.0;

    for k in 0..=n_steps {
        let t = k as f64 * dt;

        if t + 1e-9 >= next_policy {
            policy_refresh(
                t,
                &world,
                &agents,
                &mut pairs,
                &mut exposure,
                &mut caution_states,
                &mut events,
                p,
                u,
                pp,
            );
            next_policy += sc.policy_period;
        }

        // Same-frame trackers are cheap enough to run at the physics rate.
        for pr in pairs.iter_mut() {
            if let PairKind::Same { tracker } = &mut pr.kind {
                let (si, sj) = same_pair_states(&agents, pr.i, pr.j);
                *tracker = update_danger(tracker, (&si, &sj), t, p);
            }
        }
        for pr in pairs.iter_mut() {
            let d = pr.dangerous();
            if d && !pr.was_dangerous {
                events.push(Event {
                    t,
                    kind: EventKind::DangerOnset,
                    a: agents[pr.i].id,
                    b: Some(agents[pr.j].id),
                });
            }
            pr.was_dangerous = d;
            if d {
                let tb = pr.t_b().unwrap_or(t);
                for m in [pr.i, pr.j] {
                    if first_danger[m].is_none() {
                        first_danger[m] = Some(tb);
                    }
                }
            }
        }

        let constraints: Vec<ResponseConstraint> = (0..n)
            .map(|a| agent_constraint(a, t, &world, &agents, &pairs, &exposure, &caution_states[a], p, u, pp))
            .collect();
        // An agent is "visibly endangered" when some latched-dangerous pair
        // of its is exposed to it; defensive controllers stop chasing their
        // target speed for as long as that holds.
        let visible_danger: Vec<bool> = (0..n)
            .map(|a| {
                pairs.iter().any(|pr| {
                    (pr.i == a || pr.j == a) && pr.dangerous() && exposure[a][pr.other(a)].is_some()
                })
            })
            .collect();
        let applied: Vec<(f64, f64)> = (0..n)
            .map(|a| behavior_accel(&agents[a], &constraints[a], t, first_danger[a], visible_danger[a], p, pp))
            .collect();
        for a in 0..n {
            let bad = !constraints[a].permits(applied[a].0, applied[a].1);
            if bad && !was_violating[a] {
                events.push(Event { t, kind: EventKind::Violation, a: agents[a].id, b: None });
            }
            was_violating[a] = bad;
        }

        steps.push(record_step(t, &world, &agents, &pairs, &exposure, &constraints, &applied));

        let polys: Vec<ConvexPolygon> = agents.iter().map(|a| body_polygon(&world, a)).collect();
        for pr in pairs.iter_mut() {
            if !pr.collided && bodies_touch(&polys[pr.i], &polys[pr.j]) {
                pr.collided = true;
                events.push(Event {
                    t,
                    kind: EventKind::Collision,
                    a: agents[pr.i].id,
                    b: Some(agents[pr.j].id),
                });
            }
        }
        // Pedestrian pairs have no PairRt; check them directly.
        for i in 0..n {
            for j in (i + 1)..n {
                if agents[i].kind == AgentKind::Pedestrian
                    && agents[j].kind == AgentKind::Pedestrian
                    && bodies_touch(&polys[i], &polys[j])
                    && !events.iter().any(|e| {
                        e.kind == EventKind::Collision
                            && e.a == agents[i].id
                            && e.b == Some(agents[j].id)
                    })
                {
                    events.push(Event {
                        t,
                        kind: EventKind::Collision,
                        a: agents[i].id,
                        b: Some(agents[j].id),
                    });
                }
            }
        }

        if k == n_steps {
            break;
        }
        for (a, acc) in applied.iter().enumerate() {
            integrate(&mut agents[a].body, *acc, dt);
        }
    }

    Ok(Trace { scenario: sc.name.clone(), seed: sc.seed, timestep: dt, steps, events })
}

fn same_pair_states(agents: &[AgentRt], i: usize, j: usize) -> (AgentState, AgentState) {
    let s = |k: usize| match &agents[k].body {
        Body::OnRoute { state, .. } => *state,
        Body::Free { .. } => unreachable!("same-frame pairs are route-bound"),
    };
    (s(i), s(j))
}

#[allow(clippy::too_many_arguments)]
fn policy_refresh(
    t: f64,
    world: &World,
    agents: &[AgentRt],
    pairs: &mut [PairRt],
    exposure: &mut [Vec<Option<f64>>],
    caution_states: &mut [Vec<AgentState>],
    events: &mut Vec<Event>,
    p: &RssParameters,
    u: &UnstructuredParams,
    pp: &PedestrianParams,
) {
    let n = agents.len();
    let frame = if world.has_occlusion { Some(scene_frame(t, world, agents)) } else { None };
    for k in 0..n {
        for o in 0..n {
            if o == k {
                continue;
            }
            let vis = match &frame {
                Some(f) => visible_in_frame(f, agents[k].id, agents[o].id, &world.occ)
                    .unwrap_or(true),
                None => true,
            };
            match (exposure[k][o].is_some(), vis) {
                (false, true) => {
                    exposure[k][o] = Some(t);
                    if world.has_occlusion && t > 0.0 {
                        events.push(Event {
                            t,
                            kind: EventKind::Exposure,
                            a: agents[k].id,
                            b: Some(agents[o].id),
                        });
                    }
                }
                (true, false) => exposure[k][o] = None,
                _ => {}
            }
        }
    }

    for pr in pairs.iter_mut() {
        match &mut pr.kind {
            PairKind::Cross { tracker, cache } => {
                let (si, ri) = on_route(&agents[pr.i]);
                let (sj, rj) = on_route(&agents[pr.j]);
                let lat_safe = lateral_safe_multi_cached(
                    si,
                    &world.routes[ri],
                    sj,
                    &world.routes[rj],
                    p,
                    cache,
                );
                let lon = longitudinal_safe_multi_cached(
                    si,
                    &world.routes[ri],
                    sj,
                    &world.routes[rj],
                    p,
                    cache,
                );
                tracker.update(t, lat_safe, lon);
            }
            PairKind::OpenVv { tracker, memo } => {
                let pi = free_pose(&agents[pr.i]);
                let pj = free_pose(&agents[pr.j]);
                let verdict = match memo {
                    Some((a, b, v)) if a == pi && b == pj => *v,
                    _ => {
                        let v = unstructured_safe(pi, pj, u);
                        *memo = Some((*pi, *pj, v));
                        v
                    }
                };
                tracker.update(t, verdict);
            }
            PairKind::VehPed { car, ped, t_b } => {
                let car_pose = free_pose(&agents[*car]);
                let ped_pose = free_pose(&agents[*ped]);
                let exposed = exposure[*car][*ped].is_some();
                let (safe, _) = vehicle_pedestrian_safe(car_pose, ped_pose, pp, world.row, exposed, u);
                if safe {
                    *t_b = None;
                } else if t_b.is_none() {
                    *t_b = Some(t);
                }
            }
            PairKind::Same { .. } => {}
        }
    }

    // Worst-case hypotheses for occluded road cells (single-frame maps).
    for k in 0..n {
        caution_states[k].clear();
        if !(world.has_occlusion
            && world.caution
            && world.routes.len() == 1
            && agents[k].beh.full_knowledge_discipline())
        {
            continue;
        }
        let Body::OnRoute { state, .. } = &agents[k].body else { continue };
        let mut polygons = world.statics.clone();
        for (idx, other) in agents.iter().enumerate() {
            if idx != k && other.occludes {
                polygons.push(body_polygon(world, other));
            }
        }
        let occ_now = OccluderSet { polygons, dynamic: Vec::new() };
        let eye = world_pose(world, &agents[k].body).0;
        let g = &world.routes[0].geometry;
        let lim = &world.limits[0];
        let mut speeds = vec![lim.lon_high.max(0.0)];
        let low = lim.lon_low.max(0.0);
        if (low - speeds[0]).abs() > 1e-12 {
            speeds.push(low);
        }
        let start = (state.lon_pos - HYPOTHESIS_LOOKBACK).max(0.0);
        let stop = (state.lon_pos + HYPOTHESIS_LOOKAHEAD).min(g.length());
        let mut cell = (start / HYPOTHESIS_GRID_STEP).floor() * HYPOTHESIS_GRID_STEP
            + 0.5 * HYPOTHESIS_GRID_STEP;
        while cell < stop {
            if !is_visible(eye, g.centerline_at(cell), &occ_now) {
                for &v in &speeds {
                    let hyp = AgentState {
                        lon_pos: cell,
                        lon_vel: v,
                        lon_acc: 0.0,
                        lat_pos: 0.0,
                        lat_vel: 0.0,
                        lat_acc: 0.0,
                        half_length: HYPOTHESIS_HALF.0,
                        half_width: HYPOTHESIS_HALF.1,
                    };
                    if instantaneous_tracker(state, &hyp, p).is_dangerous() {
                        caution_states[k].push(hyp);
                    }
                }
            }
            cell += HYPOTHESIS_GRID_STEP;
        }
    }
}

fn on_route(agent: &AgentRt) -> (&AgentState, usize) {
    match &agent.body {
        Body::OnRoute { route, state } => (state, *route),
        Body::Free { .. } => unreachable!("route pair over a free agent"),
    }
}

fn free_pose(agent: &AgentRt) -> &UnstructuredPose {
    match &agent.body {
        Body::Free { pose, .. } => pose,
        Body::OnRoute { .. } => unreachable!("open pair over a route agent"),
    }
}

/// The aggregated proper-response constraint of agent `k` at time `t`,
/// restricted to what the agent can actually see: duties toward invisible
/// counterparts are dropped, and the response window of a duty starts at the
/// later of the danger threshold and the agent's own exposure to the
/// counterpart.
#[allow(clippy::too_many_arguments)]
fn agent_constraint(
    k: usize,
    t: f64,
    world: &World,
    agents: &[AgentRt],
    pairs: &[PairRt],
    exposure: &[Vec<Option<f64>>],
    caution: &[AgentState],
    p: &RssParameters,
    u: &UnstructuredParams,
    pp: &PedestrianParams,
) -> ResponseConstraint {
    match &agents[k].body {
        Body::OnRoute { route, state } => {
            let mut parts = vec![ResponseConstraint::unconstrained_for(state, p)];
            for pr in pairs.iter().filter(|pr| (pr.i == k || pr.j == k) && pr.dangerous()) {
                let o = pr.other(k);
                let Some(e) = exposure[k][o] else { continue };
                match &pr.kind {
                    PairKind::Same { tracker } => {
                        let t_b = tracker.t_b().unwrap_or(t);
                        let t_adj = t - (e - t_b).max(0.0);
                        let (si, sj) = same_pair_states(agents, pr.i, pr.j);
                        if let Ok((a, b)) = basic_proper_response(tracker, (&si, &sj), t_adj, p) {
                            parts.push(if pr.i == k { a } else { b });
                        }
                    }
                    PairKind::Cross { tracker, .. } => {
                        let t_b = tracker.t_b().unwrap_or(t);
                        let t_adj = t - (e - t_b).max(0.0);
                        let (si, _) = on_route(&agents[pr.i]);
                        let (sj, _) = on_route(&agents[pr.j]);
                        if let Ok((a, b)) = proper_response_multi(tracker, si, sj, t_adj, p) {
                            parts.push(if pr.i == k { a } else { b });
                        }
                    }
                    _ => {}
                }
            }
            for hyp in caution {
                let tracker = instantaneous_tracker(state, hyp, p);
                if tracker.is_dangerous() {
                    // The hypothesized danger predates exposure, so the duty
                    // applies with the response window already elapsed.
                    if let Ok((mine, _)) = basic_proper_response(&tracker, (state, hyp), p.rho, p) {
                        parts.push(mine);
                    }
                }
            }
            if world.has_occlusion && world.caution && agents[k].beh.full_knowledge_discipline() {
                parts.push(own_speed_limit_constraint(state, &world.limits[*route], p));
            }
            aggregate_constraints(&parts).expect("non-empty constraint parts")
        }
        Body::Free { pose, .. } if agents[k].kind == AgentKind::Vehicle => {
            let mut lon = p.lon_universe_for(pose.speed);
            for pr in pairs.iter().filter(|pr| (pr.i == k || pr.j == k) && pr.dangerous()) {
                let o = pr.other(k);
                let Some(e) = exposure[k][o] else { continue };
                match &pr.kind {
                    PairKind::OpenVv { tracker, .. } => {
                        let start = tracker.t_b().unwrap_or(t).max(e);
                        if t >= start + p.rho {
                            let which = if pr.i == k { Which::First } else { Which::Second };
                            if let Ok(c) = unstructured_proper_response(
                                tracker,
                                which,
                                pose,
                                free_pose(&agents[o]),
                                u,
                            ) {
                                if c.family == FamilyKind::Braking {
                                    lon = lon
                                        .intersect(&braking_lon_constraint(pose.speed, p.a_min_brake, p));
                                }
                            }
                        }
                    }
                    PairKind::VehPed { car, t_b: Some(tb), .. } if *car == k => {
                        if t >= tb.max(e) + p.rho {
                            lon =
                                lon.intersect(&braking_lon_constraint(pose.speed, p.a_min_brake, p));
                        }
                    }
                    _ => {}
                }
            }
            ResponseConstraint {
                lon_acc_range: lon,
                lat_acc_range: p.lat_universe(),
                lat_direction_lock: None,
                infeasible: lon.is_empty(),
            }
        }
        Body::Free { pose, .. } => {
            // Pedestrian: bounded acceleration, braking duty when endangered
            // (unless pedestrians hold right of way outright).
            let mut lon = Interval::new(-pp.brake, pp.accel);
            if world.row != RightOfWay::Pedestrian {
                for pr in pairs.iter().filter(|pr| (pr.i == k || pr.j == k) && pr.dangerous()) {
                    let o = pr.other(k);
                    let Some(e) = exposure[k][o] else { continue };
                    if let PairKind::VehPed { ped, t_b: Some(tb), .. } = &pr.kind {
                        if *ped == k && t >= tb.max(e) + pp.rho {
                            lon = if pose.speed > 1e-6 {
                                Interval::new(-pp.brake, -pp.brake)
                            } else {
                                Interval::new(-pp.brake, 0.0)
                            };
                        }
                    }
                }
            }
            ResponseConstraint {
                lon_acc_range: lon,
                lat_acc_range: Interval::new(0.0, 0.0),
                lat_direction_lock: None,
                infeasible: lon.is_empty(),
            }
        }
    }
}

fn lon_nominal(desired: f64, state: &AgentState, stop_at: Option<f64>, p: &RssParameters) -> f64 {
    let mut a = (desired - state.lon_vel).clamp(-p.a_min_brake, p.a_max_accel);
    if let Some(line) = stop_at {
        let v = state.lon_vel;
        let d = line - (state.lon_pos + state.half_length);
        if v > 0.0 {
            if d <= 0.05 {
                a = a.min(-p.a_min_brake);
            } else {
                let need = v * v / (2.0 * d);
                if need >= STOP_POINT_ENGAGE {
                    a = a.min(-need.min(p.a_max_brake));
                }
            }
        } else if d <= 0.05 {
            a = a.min(0.0);
        }
    }
    a
}

fn lat_nominal(target: f64, state: &AgentState, p: &RssParameters) -> f64 {
    ((target - state.lat_pos) - 1.8 * state.lat_vel).clamp(-p.a_lat_max_accel, p.a_lat_max_accel)
}

/// Coast instead of speeding up: clamps acceleration so the speed magnitude
/// cannot grow. The danger envelopes already budget for worst-case
/// acceleration throughout the response time, so a controller that declines
/// to spend that budget turns it into real separation margin — which in turn
/// absorbs the latch/response quantization of a discrete-time loop.
fn defensive_cap(a: f64, vel: f64) -> f64 {
    if vel > 0.0 {
        a.min(0.0)
    } else if vel < 0.0 {
        a.max(0.0)
    } else {
        0.0
    }
}

fn behavior_accel(
    agent: &AgentRt,
    c: &ResponseConstraint,
    t: f64,
    first_danger: Option<f64>,
    visible_danger: bool,
    p: &RssParameters,
    pp: &PedestrianParams,
) -> (f64, f64) {
    match (&agent.beh, &agent.body) {
        (
            BehaviorRt::Compliant { desired, lat_target, change, stop_at, defensive },
            Body::OnRoute { state, .. },
        ) => {
            let target = match change {
                Some(lc) if t >= lc.at => lc.lat_target,
                _ => *lat_target,
            };
            let mut nl = lon_nominal(*desired, state, *stop_at, p);
            if *defensive && visible_danger {
                nl = defensive_cap(nl, state.lon_vel);
            }
            let nt = lat_nominal(target, state, p);
            (c.lon_acc_range.clamp(nl), c.lat_acc_range.clamp(nt))
        }
        (BehaviorRt::Scripted { segments }, _) => segments
            .iter()
            .find(|s| t < s.until - 1e-12)
            .map(|s| (s.lon_acc, s.lat_acc))
            .unwrap_or((0.0, 0.0)),
        (BehaviorRt::Overbrake { desired, lat_target, at, brake }, Body::OnRoute { state, .. }) => {
            let nt = lat_nominal(*lat_target, state, p);
            if t < *at {
                (c.lon_acc_range.clamp(lon_nominal(*desired, state, None, p)), c.lat_acc_range.clamp(nt))
            } else {
                (-brake, c.lat_acc_range.clamp(nt))
            }
        }
        (BehaviorRt::Delayed { desired, lat_target, extra }, Body::OnRoute { state, .. }) => {
            let nl = lon_nominal(*desired, state, None, p);
            let nt = lat_nominal(*lat_target, state, p);
            let awake = first_danger.is_some_and(|fd| t >= fd + p.rho + extra);
            if awake {
                (c.lon_acc_range.clamp(nl), c.lat_acc_range.clamp(nt))
            } else {
                (nl, nt)
            }
        }
        (BehaviorRt::Drift { desired, lat_acc }, Body::OnRoute { state, .. }) => {
            (c.lon_acc_range.clamp(lon_nominal(*desired, state, None, p)), *lat_acc)
        }
        (BehaviorRt::Speeding { desired, lat_target }, Body::OnRoute { state, .. }) => {
            let mut nl = lon_nominal(*desired, state, None, p);
            if visible_danger {
                nl = defensive_cap(nl, state.lon_vel);
            }
            let nt = lat_nominal(*lat_target, state, p);
            (c.lon_acc_range.clamp(nl), c.lat_acc_range.clamp(nt))
        }
        (BehaviorRt::Cruise { desired }, Body::Free { pose, .. }) => {
            let mut a = (desired - pose.speed).clamp(-p.a_min_brake, p.a_max_accel);
            if visible_danger {
                a = defensive_cap(a, pose.speed);
            }
            (c.lon_acc_range.clamp(a), 0.0)
        }
        (BehaviorRt::Walk { desired }, Body::Free { pose, .. }) => {
            let mut a = (desired - pose.speed).clamp(-pp.brake, pp.accel);
            if visible_danger {
                a = defensive_cap(a, pose.speed);
            }
            (c.lon_acc_range.clamp(a), 0.0)
        }
        _ => (0.0, 0.0),
    }
}

/// Advances one axis with a stop at zero crossings: braking ends at
/// standstill rather than reversing, and an agent at rest only sets off
/// under positive (forward) acceleration.
fn advance_no_reverse(pos: f64, vel: f64, acc: f64, dt: f64) -> (f64, f64) {
    if vel == 0.0 && acc <= 0.0 {
        return (pos, 0.0);
    }
    let v2 = vel + acc * dt;
    if vel > 0.0 && v2 < 0.0 {
        let t_stop = -vel / acc;
        (pos + vel * t_stop + 0.5 * acc * t_stop * t_stop, 0.0)
    } else if vel < 0.0 && v2 > 0.0 {
        let t_stop = -vel / acc;
        (pos + vel * t_stop + 0.5 * acc * t_stop * t_stop, 0.0)
    } else {
        (pos + vel * dt + 0.5 * acc * dt * dt, v2)
    }
}

fn integrate(body: &mut Body, acc: (f64, f64), dt: f64) {
    match body {
        Body::OnRoute { state, .. } => {
            let (np, nv) = advance_no_reverse(state.lon_pos, state.lon_vel, acc.0, dt);
            state.lon_pos = np;
            state.lon_vel = nv;
            state.lon_acc = acc.0;
            state.lat_pos += state.lat_vel * dt + 0.5 * acc.1 * dt * dt;
            state.lat_vel += acc.1 * dt;
            state.lat_acc = acc.1;
        }
        Body::Free { pose, .. } => {
            let dir = Vec2::from_angle(pose.heading);
            let (dist, nv) = advance_no_reverse(0.0, pose.speed, acc.0, dt);
            pose.position = pose.position + dir * dist;
            pose.speed = nv;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn record_step(
    t: f64,
    world: &World,
    agents: &[AgentRt],
    pairs: &[PairRt],
    exposure: &[Vec<Option<f64>>],
    constraints: &[ResponseConstraint],
    applied: &[(f64, f64)],
) -> TraceStep {
    let agent_records = agents
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let (center, heading) = world_pose(world, &a.body);
            let (route, lon, lat, lon_vel, lat_vel) = match &a.body {
                Body::OnRoute { route, state } => {
                    (Some(*route), state.lon_pos, state.lat_pos, state.lon_vel, state.lat_vel)
                }
                Body::Free { pose, .. } => (None, 0.0, 0.0, pose.speed, 0.0),
            };
            let c = &constraints[k];
            AgentRecord {
                id: a.id,
                route,
                lon,
                lat,
                lon_vel,
                lat_vel,
                x: center.x,
                y: center.y,
                heading,
                applied_lon: applied[k].0,
                applied_lat: applied[k].1,
                lon_lo: c.lon_acc_range.lo,
                lon_hi: c.lon_acc_range.hi,
                lat_lo: c.lat_acc_range.lo,
                lat_hi: c.lat_acc_range.hi,
                infeasible: c.infeasible,
            }
        })
        .collect();
    let pair_records = pairs
        .iter()
        .map(|pr| PairRecord {
            a: agents[pr.i].id,
            b: agents[pr.j].id,
            dangerous: pr.dangerous(),
            t_b: pr.t_b(),
            a_sees_b: exposure[pr.i][pr.j].is_some(),
            b_sees_a: exposure[pr.j][pr.i].is_some(),
        })
        .collect();
    TraceStep { t, agents: agent_records, pairs: pair_records }
}

// ---------------------------------------------------------------------------
// Standalone collision detection over a recorded trace
// ---------------------------------------------------------------------------

/// Recomputes body contact from the recorded world poses alone. Returns one
/// collision event per pair (the first contact), ordered by time.
pub fn detect_collisions(sc: &Scenario, trace: &Trace) -> Vec<Event> {
    let halves: std::collections::BTreeMap<usize, (f64, f64)> =
        sc.agents.iter().map(|a| (a.id, half_dims(a))).collect();
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut out = Vec::new();
    for step in &trace.steps {
        for i in 0..step.agents.len() {
            for j in (i + 1)..step.agents.len() {
                let (a, b) = (&step.agents[i], &step.agents[j]);
                let key = (a.id.min(b.id), a.id.max(b.id));
                if seen.contains(&key) {
                    continue;
                }
                let (hla, hwa) = halves.get(&a.id).copied().unwrap_or(VEHICLE_HALF);
                let (hlb, hwb) = halves.get(&b.id).copied().unwrap_or(VEHICLE_HALF);
                let ca = Vec2::new(a.x, a.y);
                let cb = Vec2::new(b.x, b.y);
                let reach = (hla * hla + hwa * hwa).sqrt() + (hlb * hlb + hwb * hwb).sqrt();
                if ca.dist(cb) > reach + 1.0 {
                    continue;
                }
                let pa = ConvexPolygon::oriented_box(ca, Vec2::from_angle(a.heading), hla, hwa);
                let pb = ConvexPolygon::oriented_box(cb, Vec2::from_angle(b.heading), hlb, hwb);
                if bodies_touch(&pa, &pb) {
                    seen.insert(key);
                    out.push(Event { t: step.t, kind: EventKind::Collision, a: a.id, b: Some(b.id) });
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Responsibility assignment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentVerdict {
    pub id: usize,
    /// The agent honored every recorded constraint over the danger window
    /// (and kept reasonable speeds while hidden).
    pub compliant: bool,
    /// Moved outside the assumed speed limits while unobservable.
    pub hidden_speeding: bool,
    /// Never had line of sight to the counterpart before the collision.
    pub never_exposed: bool,
    pub first_breach: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Incident {
    pub a: usize,
    pub b: usize,
    pub t_collision: f64,
    pub t_danger: Option<f64>,
    pub verdicts: Vec<AgentVerdict>,
    /// Agents outside the colliding pair that violated their own constraints
    /// before the collision (e.g. a car that improperly created the
    /// situation and then left the scene).
    pub contributing: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponsibilityReport {
    pub incidents: Vec<Incident>,
}

impl ResponsibilityReport {
    /// Every collision names at least one non-compliant pair member or a
    /// contributing third party.
    pub fn all_attributed(&self) -> bool {
        self.incidents
            .iter()
            .all(|i| i.verdicts.iter().any(|v| !v.compliant) || !i.contributing.is_empty())
    }

    /// Ids named as responsible or contributing across all incidents.
    pub fn named(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for i in &self.incidents {
            for v in &i.verdicts {
                if !v.compliant {
                    out.insert(v.id);
                }
            }
            out.extend(i.contributing.iter().copied());
        }
        out
    }
}

struct PairView {
    t_b: Option<f64>,
    m_sees_o: bool,
    o_sees_m: bool,
}

fn pair_view(step: &TraceStep, m: usize, o: usize) -> Option<PairView> {
    step.pairs.iter().find_map(|p| {
        if p.a == m && p.b == o {
            Some(PairView { t_b: p.t_b, m_sees_o: p.a_sees_b, o_sees_m: p.b_sees_a })
        } else if p.a == o && p.b == m {
            Some(PairView { t_b: p.t_b, m_sees_o: p.b_sees_a, o_sees_m: p.a_sees_b })
        } else {
            None
        }
    })
}

fn agent_record(step: &TraceStep, id: usize) -> Option<&AgentRecord> {
    step.agents.iter().find(|a| a.id == id)
}

/// The last maximal interval before `t_end` during which `o` could not see
/// `m`, as `(start, end)` times; `None` when `m` was visible throughout.
fn last_hidden_window(steps: &[TraceStep], m: usize, o: usize, t_end: f64) -> Option<(f64, f64)> {
    let mut window: Option<(f64, f64)> = None;
    let mut open: Option<f64> = None;
    for step in steps.iter().take_while(|s| s.t <= t_end + 1e-9) {
        let Some(v) = pair_view(step, m, o) else { continue };
        if !v.o_sees_m {
            if open.is_none() {
                open = Some(step.t);
            }
            window = Some((open.unwrap(), step.t));
        } else {
            open = None;
        }
    }
    window.filter(|(a, b)| b > a)
}

/// Replays every collision in the trace and assigns responsibility.
///
/// For each colliding pair the danger window `[t_b, t_collision]` is
/// re-examined: a member is non-compliant if any recorded applied
/// acceleration leaves its recorded constraint envelope, except that after
/// the counterpart's own first breach the member is held only to the
/// physical envelope (it may do anything physically plausible to evade).
/// On occluded maps, members that moved outside the assumed hidden-traffic
/// speed limits while unobservable are non-compliant regardless.
pub fn assign_responsibility(sc: &Scenario, trace: &Trace) -> ResponsibilityReport {
    let p = &sc.params;
    let occluded = sc.has_occlusion();
    let limits = sc.hidden_limits_or_default();
    let mut first_violation: std::collections::BTreeMap<usize, f64> = Default::default();
    for e in &trace.events {
        if e.kind == EventKind::Violation {
            first_violation.entry(e.a).or_insert(e.t);
        }
    }
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut incidents = Vec::new();
    for ev in trace.events.iter().filter(|e| e.kind == EventKind::Collision) {
        let (a, b) = (ev.a, ev.b.expect("collision events carry both ids"));
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            continue;
        }
        let t_c = ev.t;
        let collision_step = trace
            .steps
            .iter()
            .find(|s| (s.t - t_c).abs() < 1e-9)
            .or_else(|| trace.steps.last());
        let t_danger = collision_step.and_then(|s| pair_view(s, a, b)).and_then(|v| v.t_b);

        // Hidden-speed breaches first: they feed the leniency times.
        let mut hidden_breach: std::collections::BTreeMap<usize, f64> = Default::default();
        if occluded {
            for (m, o) in [(a, b), (b, a)] {
                if let Some((h0, h1)) = last_hidden_window(&trace.steps, m, o, t_c) {
                    let track: Vec<(f64, f64, f64)> = trace
                        .steps
                        .iter()
                        .take_while(|s| s.t <= t_c + 1e-9)
                        .filter_map(|s| agent_record(s, m).map(|r| (s.t, r.lon, r.lat)))
                        .collect();
                    if let Some(avg) = average_speeds(&track, h0, h1) {
                        if !limits.permits(avg.lon, avg.lat) {
                            hidden_breach.insert(m, h1);
                        }
                    }
                }
            }
        }

        let leniency_start = |other: usize| -> Option<f64> {
            let ev_t = first_violation.get(&other).copied();
            let hid_t = hidden_breach.get(&other).copied();
            match (ev_t, hid_t) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (x, y) => x.or(y),
            }
        };

        let mut verdicts = Vec::new();
        for (m, o) in [(a, b), (b, a)] {
            let window_start = t_danger.unwrap_or(0.0);
            let lenient_from = leniency_start(o);
            let mut compliant = true;
            let mut first_breach = None;
            let mut ever_saw = false;
            for step in trace
                .steps
                .iter()
                .skip_while(|s| s.t < window_start - 1e-9)
                .take_while(|s| s.t <= t_c + 1e-9)
            {
                if let Some(v) = pair_view(step, m, o) {
                    ever_saw |= v.m_sees_o;
                }
                let Some(rec) = agent_record(step, m) else { continue };
                if rec.infeasible {
                    continue;
                }
                let lenient = lenient_from.is_some_and(|lt| lt < step.t);
                let ok = if lenient {
                    p.lon_universe_for(rec.lon_vel).contains(rec.applied_lon, REPLAY_TOL)
                        && p.lat_universe().contains(rec.applied_lat, REPLAY_TOL)
                } else {
                    Interval::new(rec.lon_lo, rec.lon_hi).contains(rec.applied_lon, REPLAY_TOL)
                        && Interval::new(rec.lat_lo, rec.lat_hi).contains(rec.applied_lat, REPLAY_TOL)
                };
                if !ok {
                    compliant = false;
                    first_breach = Some(step.t);
                    break;
                }
            }
            let hidden_speeding = hidden_breach.contains_key(&m);
            if hidden_speeding {
                compliant = false;
                if first_breach.is_none() {
                    first_breach = hidden_breach.get(&m).copied();
                }
            }
            verdicts.push(AgentVerdict {
                id: m,
                compliant,
                hidden_speeding,
                never_exposed: !ever_saw,
                first_breach,
            });
        }

        let contributing: Vec<usize> = first_violation
            .iter()
            .filter(|(id, t)| **id != a && **id != b && **t <= t_c + 1e-9)
            .map(|(id, _)| *id)
            .collect();
        incidents.push(Incident { a, b, t_collision: t_c, t_danger, verdicts, contributing });
    }
    ResponsibilityReport { incidents }
}

// ---------------------------------------------------------------------------
// Scenario generation and the no-collision fuzzer
// ---------------------------------------------------------------------------

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioFamily {
    /// Straight multi-lane road, same-direction traffic, some lane changes.
    Highway,
    /// Two crossing routes with one priority holder.
    Junction,
    /// Open ground with free headings and an occasional pedestrian.
    Unstructured,
    /// Two lanes with a parked occluding bus and slow traffic behind it.
    OccludedMerge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: ScenarioFamily,
    pub max_agents: usize,
    pub max_lanes: usize,
    pub max_speed: f64,
    pub duration: f64,
    pub timestep: f64,
}

impl GeneratorConfig {
    pub fn for_family(family: ScenarioFamily) -> Self {
        let (max_agents, max_lanes, max_speed) = match family {
            ScenarioFamily::Highway => (6, 4, 30.0),
            ScenarioFamily::Junction => (4, 1, 15.0),
            ScenarioFamily::Unstructured => (4, 1, 8.0),
            ScenarioFamily::OccludedMerge => (5, 2, 13.0),
        };
        GeneratorConfig { family, max_agents, max_lanes, max_speed, duration: 60.0, timestep: 0.01 }
    }

    fn clamped(&self) -> Self {
        GeneratorConfig {
            family: self.family,
            max_agents: self.max_agents.clamp(2, 6),
            max_lanes: self.max_lanes.clamp(1, 4),
            max_speed: self.max_speed.min(35.0),
            duration: self.duration,
            timestep: self.timestep,
        }
    }
}

fn gen_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn lane_center(lane: usize, lanes: usize, width: f64) -> f64 {
    (lane as f64 - (lanes as f64 - 1.0) / 2.0) * width
}

/// Deterministically generates the `index`-th scenario of a family.
pub fn generate_scenario(cfg: &GeneratorConfig, seed: u64, index: u64) -> Scenario {
    let cfg = cfg.clamped();
    let mut rng = gen_rng(seed, index);
    let p = RssParameters::default();
    let mut sc = match cfg.family {
        ScenarioFamily::Highway => gen_highway(&cfg, &mut rng, &p),
        ScenarioFamily::Junction => gen_junction(&cfg, &mut rng, &p),
        ScenarioFamily::Unstructured => gen_unstructured(&cfg, &mut rng, &p),
        ScenarioFamily::OccludedMerge => gen_occluded_merge(&cfg, &mut rng, &p),
    };
    sc.name = format!("{:?}-{index}", cfg.family).to_lowercase();
    sc.duration = cfg.duration;
    sc.timestep = cfg.timestep;
    sc.seed = seed ^ index;
    sc
}

fn compliant(desired: f64) -> BehaviorSpec {
    BehaviorSpec::Compliant {
        desired_speed: desired,
        lat_target: None,
        lane_change: None,
        stop_at: None,
        defensive: true,
    }
}

fn gen_highway(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, p: &RssParameters) -> Scenario {
    let lanes = rng.gen_range(1..=cfg.max_lanes);
    let n = rng.gen_range(2..=cfg.max_agents);
    let vmax = cfg.max_speed.max(5.0);
    let lane_width = 3.5;
    let length = 700.0 + vmax * cfg.duration;
    let mut cursors: Vec<Option<(f64, f64)>> = vec![None; lanes];
    let mut agents = Vec::new();
    for id in 0..n {
        let lane = rng.gen_range(0..lanes);
        let v = rng.gen_range(0.25..0.95) * vmax;
        let lon = match cursors[lane] {
            None => rng.gen_range(350.0..600.0),
            Some((front_lon, front_v)) => {
                let d = safe_lon_distance_same_dir(v, front_v, p).unwrap_or(150.0);
                front_lon - (d * rng.gen_range(1.15..1.7) + 2.0 * VEHICLE_HALF.0 + 1.0)
            }
        };
        cursors[lane] = Some((lon, v));
        let desired = (v + rng.gen_range(-1.0..2.0)).clamp(0.0, vmax);
        let lane_change = if lanes > 1 && rng.gen_bool(0.25) {
            let target = if lane == 0 {
                1
            } else if lane == lanes - 1 {
                lane - 1
            } else if rng.gen_bool(0.5) {
                lane + 1
            } else {
                lane - 1
            };
            Some(LaneChange {
                at: rng.gen_range(3.0..15.0),
                lat_target: lane_center(target, lanes, lane_width),
            })
        } else {
            None
        };
        agents.push(AgentSpec {
            id,
            kind: AgentKind::Vehicle,
            route: 0,
            init: InitState::Lane {
                lon,
                lat: lane_center(lane, lanes, lane_width),
                lon_vel: v,
                lat_vel: 0.0,
            },
            behavior: BehaviorSpec::Compliant {
                desired_speed: desired,
                lat_target: None,
                lane_change,
                stop_at: None,
                defensive: true,
            },
            half_length: None,
            half_width: None,
            occludes: false,
        });
    }
    Scenario {
        name: String::new(),
        map: MapSpec::Straight { lanes, lane_width, length, occluders: vec![] },
        agents,
        params: *p,
        unstructured: UnstructuredParams::default(),
        pedestrian: PedestrianParams::default(),
        right_of_way: RightOfWay::Dynamic,
        hidden_limits: None,
        occlusion_caution: true,
        duration: 60.0,
        timestep: 0.01,
        policy_period: 0.1,
        seed: 0,
    }
}

fn gen_junction(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, p: &RssParameters) -> Scenario {
    let vmax = cfg.max_speed.clamp(5.0, 15.0);
    let theta = rng.gen_range(1.05..2.09); // 60..120 degrees
    let len = 1200.0;
    let c1 = rng.gen_range(450.0..650.0);
    let c2 = rng.gen_range(450.0..650.0);
    let dir = Vec2::from_angle(theta);
    let start2 = Vec2::new(c1, 0.0) - dir * c2;
    let first_priority = rng.gen_bool(0.5);
    let routes = vec![
        RouteSpec {
            pieces: vec![CurvePiece::Line { start: Vec2::ZERO, end: Vec2::new(len, 0.0) }],
            width: 3.5,
            priority: first_priority,
            light: None,
        },
        RouteSpec {
            pieces: vec![CurvePiece::Line { start: start2, end: start2 + dir * len }],
            width: 3.5,
            priority: !first_priority,
            light: None,
        },
    ];
    let n = rng.gen_range(2..=cfg.max_agents.min(4));
    let mut cursors: Vec<Option<(f64, f64)>> = vec![None, None];
    let mut agents = Vec::new();
    for id in 0..n {
        let route = rng.gen_range(0..2usize);
        let cross = if route == 0 { c1 } else { c2 };
        let v = rng.gen_range(5.0..vmax);
        let lon = match cursors[route] {
            // Far enough back that either agent can stop before the
            // conflict zone: the pair starts safely regardless of priority.
            None => cross - rng.gen_range(75.0..130.0),
            Some((front_lon, front_v)) => {
                let d = safe_lon_distance_same_dir(v, front_v, p).unwrap_or(80.0);
                front_lon - (d * rng.gen_range(1.15..1.6) + 2.0 * VEHICLE_HALF.0 + 1.0)
            }
        };
        cursors[route] = Some((lon, v));
        agents.push(AgentSpec {
            id,
            kind: AgentKind::Vehicle,
            route,
            init: InitState::Lane { lon, lat: 0.0, lon_vel: v, lat_vel: 0.0 },
            behavior: compliant(v),
            half_length: None,
            half_width: None,
            occludes: false,
        });
    }
    Scenario {
        name: String::new(),
        map: MapSpec::Junction { routes },
        agents,
        params: *p,
        unstructured: UnstructuredParams::default(),
        pedestrian: PedestrianParams::default(),
        right_of_way: RightOfWay::Dynamic,
        hidden_limits: None,
        occlusion_caution: true,
        duration: 60.0,
        timestep: 0.01,
        policy_period: 0.1,
        seed: 0,
    }
}

fn open_reach(v: f64, p: &RssParameters) -> f64 {
    let v_peak = v + p.rho * p.a_max_accel;
    v * p.rho + 0.5 * p.a_max_accel * p.rho * p.rho + v_peak * v_peak / (2.0 * p.a_min_brake)
}

fn gen_unstructured(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, p: &RssParameters) -> Scenario {
    let vmax = cfg.max_speed.clamp(1.0, 8.0);
    let epsilon = 5.0;
    let n = rng.gen_range(2..=cfg.max_agents.min(4));
    let mut placed: Vec<(Vec2, f64)> = Vec::new();
    let mut agents = Vec::new();
    for id in 0..n {
        let mut pose = None;
        for _ in 0..400 {
            let cand = Vec2::new(rng.gen_range(10.0..140.0), rng.gen_range(10.0..140.0));
            let v = rng.gen_range(0.0..vmax);
            let ok = placed
                .iter()
                .all(|(q, w)| cand.dist(*q) >= open_reach(v, p) + open_reach(*w, p) + epsilon + 2.0);
            if ok {
                pose = Some((cand, v));
                break;
            }
        }
        // Deterministic fallback: a diagonal line with generous spacing.
        let (pos, v) = pose.unwrap_or((Vec2::new(10.0 + 55.0 * id as f64, 10.0 + 55.0 * id as f64), 0.0));
        placed.push((pos, v));
        agents.push(AgentSpec {
            id,
            kind: AgentKind::Vehicle,
            route: 0,
            init: InitState::Pose { x: pos.x, y: pos.y, heading: rng.gen_range(-3.14..3.14), speed: v },
            behavior: compliant(v),
            half_length: None,
            half_width: None,
            occludes: false,
        });
    }
    if agents.len() < cfg.max_agents && rng.gen_bool(0.3) {
        let mut spot = None;
        for _ in 0..200 {
            let cand = Vec2::new(rng.gen_range(10.0..140.0), rng.gen_range(10.0..140.0));
            if placed.iter().all(|(q, _)| cand.dist(*q) >= 40.0) {
                spot = Some(cand);
                break;
            }
        }
        if let Some(pos) = spot {
            let speed = if rng.gen_bool(0.5) { 0.0 } else { 1.2 };
            agents.push(AgentSpec {
                id: agents.len(),
                kind: AgentKind::Pedestrian,
                route: 0,
                init: InitState::Pose {
                    x: pos.x,
                    y: pos.y,
                    heading: rng.gen_range(-3.14..3.14),
                    speed,
                },
                behavior: compliant(speed),
                half_length: None,
                half_width: None,
                occludes: false,
            });
        }
    }
    let u = UnstructuredParams { epsilon, ..UnstructuredParams::default() };
    Scenario {
        name: String::new(),
        map: MapSpec::Open { occluders: vec![] },
        agents,
        params: *p,
        unstructured: u,
        pedestrian: PedestrianParams::default(),
        right_of_way: RightOfWay::Dynamic,
        hidden_limits: None,
        occlusion_caution: true,
        duration: 60.0,
        timestep: 0.01,
        policy_period: 0.1,
        seed: 0,
    }
}

fn gen_occluded_merge(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, p: &RssParameters) -> Scenario {
    let lanes = 2usize;
    let lane_width = 3.5;
    let vmax = cfg.max_speed.clamp(5.0, 13.0);
    let length = 300.0 + vmax * cfg.duration;
    let lane0 = lane_center(0, lanes, lane_width);
    let lane1 = lane_center(1, lanes, lane_width);
    let mut agents = Vec::new();
    let bus_lon = rng.gen_range(130.0..190.0);
    agents.push(AgentSpec {
        id: 0,
        kind: AgentKind::Vehicle,
        route: 0,
        init: InitState::Lane { lon: bus_lon, lat: lane0, lon_vel: 0.0, lat_vel: 0.0 },
        behavior: compliant(0.0),
        half_length: Some(6.0),
        half_width: Some(1.2),
        occludes: true,
    });
    let mut next_id = 1;
    // Slow or parked traffic hidden beyond the bus, possibly merging left.
    let mut hidden_front = bus_lon + 6.0 + rng.gen_range(16.0..60.0);
    let hidden_count = 1 + usize::from(cfg.max_agents >= 5 && rng.gen_bool(0.5));
    for h in 0..hidden_count {
        let v = if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(1.0..4.0) };
        let lane_change = (h == 0 && rng.gen_bool(0.5)).then(|| LaneChange {
            at: rng.gen_range(4.0..12.0),
            lat_target: lane1,
        });
        agents.push(AgentSpec {
            id: next_id,
            kind: AgentKind::Vehicle,
            route: 0,
            init: InitState::Lane { lon: hidden_front, lat: lane0, lon_vel: v, lat_vel: 0.0 },
            behavior: BehaviorSpec::Compliant {
                desired_speed: v,
                lat_target: None,
                lane_change,
                stop_at: None,
                defensive: true,
            },
            half_length: None,
            half_width: None,
            occludes: false,
        });
        next_id += 1;
        hidden_front += rng.gen_range(25.0..60.0);
    }
    // Through traffic in the free lane.
    let mut lon = rng.gen_range(0.0..50.0);
    let stream = 1 + usize::from(rng.gen_bool(0.5));
    let mut front: Option<(f64, f64)> = None;
    for _ in 0..stream {
        if agents.len() >= cfg.max_agents {
            break;
        }
        let v = rng.gen_range(0.6..1.0) * vmax;
        if let Some((f_lon, f_v)) = front {
            let d = safe_lon_distance_same_dir(v, f_v, p).unwrap_or(80.0);
            lon = f_lon - (d * rng.gen_range(1.2..1.6) + 5.0);
        }
        front = Some((lon, v));
        agents.push(AgentSpec {
            id: next_id,
            kind: AgentKind::Vehicle,
            route: 0,
            init: InitState::Lane { lon, lat: lane1, lon_vel: v, lat_vel: 0.0 },
            behavior: compliant(v),
            half_length: None,
            half_width: None,
            occludes: false,
        });
        next_id += 1;
    }
    Scenario {
        name: String::new(),
        map: MapSpec::Straight { lanes, lane_width, length, occluders: vec![] },
        agents,
        params: *p,
        unstructured: UnstructuredParams::default(),
        pedestrian: PedestrianParams::default(),
        right_of_way: RightOfWay::Dynamic,
        hidden_limits: None,
        occlusion_caution: true,
        duration: 60.0,
        timestep: 0.01,
        policy_period: 0.1,
        seed: 0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtopiaFailure {
    pub index: u64,
    /// The failing scenario, shrunk to the fewest agents that still collide.
    pub scenario: Scenario,
    pub collisions: Vec<Event>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtopiaReport {
    pub runs: usize,
    pub collision_free: usize,
    pub failures: Vec<UtopiaFailure>,
}

impl UtopiaReport {
    pub fn clean(&self) -> bool {
        self.failures.is_empty() && self.collision_free == self.runs
    }
}

/// Drops agents not involved in the first collision while the collision
/// persists, yielding a smaller reproduction.
fn minimize_failure(sc: &Scenario) -> Scenario {
    let mut current = sc.clone();
    loop {
        let Ok(trace) = run(&current) else { return current };
        let collisions = trace.collisions();
        let Some(first) = collisions.first() else { return current };
        let keep: BTreeSet<usize> = [first.a, first.b.unwrap_or(first.a)].into_iter().collect();
        let mut shrunk = false;
        for candidate in current.agents.iter().map(|a| a.id).collect::<Vec<_>>() {
            if keep.contains(&candidate) || current.agents.len() <= 2 {
                continue;
            }
            let mut trial = current.clone();
            trial.agents.retain(|a| a.id != candidate);
            if let Ok(tr) = run(&trial) {
                if !tr.collisions().is_empty() {
                    current = trial;
                    shrunk = true;
                    break;
                }
            }
        }
        if !shrunk {
            return current;
        }
    }
}

/// Runs `n` generated all-compliant scenarios and reports any collision.
/// Scenario `i` depends only on `(seed, i)`, so the report is independent of
/// the number of worker threads.
pub fn utopia_fuzz(n: usize, cfg: &GeneratorConfig, seed: u64) -> Result<UtopiaReport, SimError> {
    use rayon::prelude::*;
    let outcomes: Result<Vec<Option<UtopiaFailure>>, SimError> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let sc = generate_scenario(cfg, seed, i);
            let trace = run(&sc)?;
            let collisions = trace.collisions();
            if collisions.is_empty() {
                Ok(None)
            } else {
                Ok(Some(UtopiaFailure { index: i, scenario: minimize_failure(&sc), collisions }))
            }
        })
        .collect();
    let outcomes = outcomes?;
    let failures: Vec<UtopiaFailure> = outcomes.into_iter().flatten().collect();
    let runs = n;
    Ok(UtopiaReport { runs, collision_free: runs - failures.len(), failures })
}

// ---------------------------------------------------------------------------
// Preset scenarios
// ---------------------------------------------------------------------------

/// Hand-built scenarios exercising the canonical situations: the three
/// basic proper responses, an occluded stopped-car handoff, and the violator
/// profiles used by the responsibility tests.
pub mod presets {
    use super::*;

    fn base(name: &str, map: MapSpec, agents: Vec<AgentSpec>, duration: f64) -> Scenario {
        Scenario {
            name: name.into(),
            map,
            agents,
            params: RssParameters::default(),
            unstructured: UnstructuredParams::default(),
            pedestrian: PedestrianParams::default(),
            right_of_way: RightOfWay::Dynamic,
            hidden_limits: None,
            occlusion_caution: true,
            duration,
            timestep: 0.01,
            policy_period: 0.1,
            seed: 0,
        }
    }

    fn lane(lon: f64, lat: f64, lon_vel: f64) -> InitState {
        InitState::Lane { lon, lat, lon_vel, lat_vel: 0.0 }
    }

    fn vehicle(id: usize, init: InitState, behavior: BehaviorSpec) -> AgentSpec {
        AgentSpec {
            id,
            kind: AgentKind::Vehicle,
            route: 0,
            init,
            behavior,
            half_length: None,
            half_width: None,
            occludes: false,
        }
    }

    /// A fast car closes on a slower leader in the same lane; after the
    /// response time it must brake longitudinally.
    pub fn rear_approach() -> Scenario {
        let agents = vec![
            vehicle(0, lane(0.0, 0.0, 20.0), compliant(20.0)),
            vehicle(1, lane(80.0, 0.0, 8.0), compliant(8.0)),
        ];
        base(
            "rear-approach",
            MapSpec::Straight { lanes: 1, lane_width: 3.5, length: 1400.0, occluders: vec![] },
            agents,
            20.0,
        )
    }

    /// A car drifts into an occupied adjacent lane; the drifting car must
    /// brake laterally while the car already at lateral rest holds course.
    pub fn cut_in() -> Scenario {
        let agents = vec![
            vehicle(0, lane(30.0, -1.75, 15.0), compliant(15.0)),
            vehicle(
                1,
                lane(45.0, 1.75, 12.0),
                BehaviorSpec::Compliant {
                    desired_speed: 12.0,
                    lat_target: None,
                    lane_change: Some(LaneChange { at: 1.0, lat_target: -1.75 }),
                    stop_at: None,
                    defensive: true,
                },
            ),
        ];
        base(
            "cut-in",
            MapSpec::Straight { lanes: 2, lane_width: 3.5, length: 800.0, occluders: vec![] },
            agents,
            20.0,
        )
    }

    /// Two cars head toward each other in the same corridor; both must brake
    /// once the gap shrinks below the opposite-direction safe distance.
    pub fn oncoming() -> Scenario {
        let agents = vec![
            vehicle(0, lane(0.0, 0.0, 15.0), compliant(15.0)),
            vehicle(1, lane(220.0, 0.0, -15.0), compliant(-15.0)),
        ];
        base(
            "oncoming",
            MapSpec::Straight { lanes: 1, lane_width: 3.5, length: 260.0, occluders: vec![] },
            agents,
            20.0,
        )
    }

    fn swerve_base(follower: AgentSpec) -> Scenario {
        let red = AgentSpec {
            id: 1,
            kind: AgentKind::Vehicle,
            route: 0,
            init: lane(49.1, -1.75, 20.0),
            behavior: BehaviorSpec::Scripted {
                segments: vec![
                    ScriptSegment { until: 1.0, lon_acc: 0.0, lat_acc: 3.5 },
                    ScriptSegment { until: 2.0, lon_acc: 0.0, lat_acc: -3.5 },
                ],
            },
            half_length: Some(2.3),
            half_width: Some(1.4),
            occludes: true,
        };
        let blue = vehicle(2, lane(77.5, -1.75, 0.0), compliant(0.0));
        let mut sc = base(
            "swerve",
            MapSpec::Straight { lanes: 2, lane_width: 3.5, length: 300.0, occluders: vec![] },
            vec![follower, red, blue],
            8.0,
        );
        // Plain see-and-react sensing: the example predates worst-case
        // occlusion reasoning, which would otherwise defuse it.
        sc.occlusion_caution = false;
        sc.hidden_limits =
            Some(SpeedLimits { lon_low: 0.0, lon_high: 25.0, lat_low: -0.3, lat_high: 0.3 });
        sc
    }

    /// A van tailed at a safe distance hides a stopped car it is itself
    /// dangerously close to, then swerves aside at the last moment. The
    /// follower is exposed too late to stop: it collides with the stopped
    /// car without ever breaking a rule, while the van leaves the scene.
    pub fn swerve() -> Scenario {
        swerve_base(vehicle(0, lane(0.0, -1.75, 20.0), compliant(20.0)))
    }

    /// The same handoff, but the follower tailgates at well above the
    /// hidden-traffic speed limit while unobservable.
    pub fn swerve_speeding() -> Scenario {
        let mut sc = swerve_base(vehicle(
            0,
            lane(0.0, -1.75, 30.0),
            BehaviorSpec::Violator {
                profile: ViolatorProfile::OccludedSpeeding { desired_speed: 30.0 },
            },
        ));
        sc.name = "swerve-speeding".into();
        sc
    }

    /// Leader brakes far beyond the physical envelope; the follower, seeded
    /// just beyond the safe distance, cannot stop in time.
    pub fn overbrake(v: f64) -> Scenario {
        let p = RssParameters::default();
        let gap = safe_lon_distance_same_dir(v, v, &p).expect("valid speeds") * 1.02;
        let agents = vec![
            vehicle(
                0,
                lane(0.0, 0.0, v),
                // The rear car keeps chasing its target speed even while the
                // pair is latched dangerous: the point of this scenario is to
                // exercise the full legally-permitted envelope behind a
                // pathological braker, so the extra defensive margin is
                // deliberately switched off.
                BehaviorSpec::Compliant {
                    desired_speed: v + 3.0,
                    lat_target: None,
                    lane_change: None,
                    stop_at: None,
                    defensive: false,
                },
            ),
            vehicle(
                1,
                lane(4.0 + gap, 0.0, v),
                BehaviorSpec::Violator { profile: ViolatorProfile::Overbrake { at: 0.2, brake: 16.0 } },
            ),
        ];
        base(
            "overbrake",
            MapSpec::Straight { lanes: 1, lane_width: 3.5, length: 1200.0, occluders: vec![] },
            agents,
            25.0,
        )
    }

    /// Leader performs a legal hard stop; the follower ignores the danger
    /// for `extra` seconds beyond its allowed response time.
    pub fn delayed(v: f64, extra: f64) -> Scenario {
        let p = RssParameters::default();
        let gap = safe_lon_distance_same_dir(v, v, &p).expect("valid speeds") * 1.05;
        let brake_time = 0.5 + v / 6.0;
        let agents = vec![
            vehicle(
                0,
                lane(0.0, 0.0, v),
                BehaviorSpec::Violator {
                    profile: ViolatorProfile::DelayedResponse { extra, desired_speed: v },
                },
            ),
            AgentSpec {
                id: 1,
                kind: AgentKind::Vehicle,
                route: 0,
                init: lane(4.0 + gap, 0.0, v),
                behavior: BehaviorSpec::Scripted {
                    segments: vec![
                        ScriptSegment { until: 0.5, lon_acc: 0.0, lat_acc: 0.0 },
                        ScriptSegment { until: brake_time, lon_acc: -6.0, lat_acc: 0.0 },
                    ],
                },
                half_length: None,
                half_width: None,
                occludes: false,
            },
        ];
        base(
            "delayed-response",
            MapSpec::Straight { lanes: 1, lane_width: 3.5, length: 1200.0, occluders: vec![] },
            agents,
            25.0,
        )
    }

    /// A car holds a lateral acceleration beyond the physical envelope and
    /// drifts into its neighbor, which may not leave its own envelope.
    pub fn drift(v: f64, lat_acc: f64) -> Scenario {
        let agents = vec![
            vehicle(
                0,
                lane(30.0, -1.75, v),
                BehaviorSpec::Violator {
                    profile: ViolatorProfile::LateralDrift { lat_acc, desired_speed: v },
                },
            ),
            vehicle(1, lane(30.0, 1.75, v), compliant(v)),
        ];
        base(
            "lateral-drift",
            MapSpec::Straight { lanes: 2, lane_width: 3.5, length: 1200.0, occluders: vec![] },
            agents,
            20.0,
        )
    }

    /// The swerve handoff with worst-case occlusion reasoning enabled: the
    /// follower hypothesizes stopped traffic in the road cells the van
    /// hides and slows preemptively, defusing the trap it cannot see.
    pub fn swerve_cautious() -> Scenario {
        let mut sc = swerve();
        sc.name = "swerve-cautious".into();
        sc.occlusion_caution = true;
        sc
    }

    /// A deterministic parameter sweep of colliding violator scenarios.
    pub fn violator_suite(n: usize) -> Vec<Scenario> {
        (0..n)
            .map(|k| {
                let step = (k / 3) as f64;
                match k % 3 {
                    0 => {
                        let v = 12.0 + (step % 19.0);
                        let mut sc = overbrake(v);
                        sc.name = format!("overbrake-{k}");
                        sc
                    }
                    1 => {
                        let v = 12.0 + (step % 17.0);
                        let extra = 1.5 + 0.1 * (step % 10.0);
                        let mut sc = delayed(v, extra);
                        sc.name = format!("delayed-{k}");
                        sc
                    }
                    _ => {
                        let v = 10.0 + (step % 16.0);
                        let lat = 1.8 + 0.05 * (step % 14.0);
                        let mut sc = drift(v, lat);
                        sc.name = format!("drift-{k}");
                        sc
                    }
                }
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn run_ok(sc: &Scenario) -> Trace {
        run(sc).expect("scenario runs")
    }

    fn collision_pairs(trace: &Trace) -> Vec<(usize, usize)> {
        trace.collisions().iter().map(|e| (e.a, e.b.unwrap())).collect()
    }

    #[test]
    fn scenario_schema_round_trips_and_validates() {
        let sc = presets::rear_approach();
        let json = sc.to_json_pretty();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(back.agents.len(), 2);

        // Unknown keys anywhere are rejected.
        let bad = json.replace("\"timestep\"", "\"time_step\"");
        assert!(Scenario::from_json(&bad).is_err());

        // Semantic validation.
        let mut dup = sc.clone();
        dup.agents[1].id = 0;
        assert!(matches!(dup.validate(), Err(SimError::InvalidScenario(_))));
        let mut bad_dt = sc.clone();
        bad_dt.timestep = 0.5;
        assert!(bad_dt.validate().is_err());
        let mut bad_route = sc.clone();
        bad_route.agents[0].route = 3;
        assert!(bad_route.validate().is_err());
    }

    #[test]
    fn lone_cruiser_is_uneventful_and_deterministic() {
        let sc = Scenario {
            name: "solo".into(),
            map: MapSpec::Straight { lanes: 1, lane_width: 3.5, length: 400.0, occluders: vec![] },
            agents: vec![AgentSpec {
                id: 7,
                kind: AgentKind::Vehicle,
                route: 0,
                init: InitState::Lane { lon: 0.0, lat: 0.0, lon_vel: 10.0, lat_vel: 0.0 },
                behavior: compliant(10.0),
                half_length: None,
                half_width: None,
                occludes: false,
            }],
            params: RssParameters::default(),
            unstructured: UnstructuredParams::default(),
            pedestrian: PedestrianParams::default(),
            right_of_way: RightOfWay::Dynamic,
            hidden_limits: None,
            occlusion_caution: true,
            duration: 5.0,
            timestep: 0.01,
            policy_period: 0.1,
            seed: 3,
        };
        let t1 = run_ok(&sc);
        let t2 = run_ok(&sc);
        assert!(t1.events.is_empty());
        assert_eq!(t1.steps.len(), 501);
        let last = t1.steps.last().unwrap();
        assert!((last.agents[0].lon - 50.0).abs() < 1e-9);
        assert_eq!(t1.digest(), t2.digest());
        // Timestamps are monotone.
        assert!(t1.steps.windows(2).all(|w| w[1].t > w[0].t));
    }

    #[test]
    fn rear_approach_brakes_and_stays_clear() {
        let trace = run_ok(&presets::rear_approach());
        assert!(trace.collisions().is_empty());
        let onset = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::DangerOnset)
            .expect("closing gap becomes dangerous");
        // After the response time the rear car's applied acceleration must
        // be a real brake.
        let p = RssParameters::default();
        let braked = trace.steps.iter().any(|s| {
            s.t > onset.t + p.rho
                && s.agents[0].applied_lon <= -p.a_min_brake + 1e-9
                && s.pairs[0].dangerous
        });
        assert!(braked, "rear car never braked after the response window");
        assert!(!trace.events.iter().any(|e| e.kind == EventKind::Violation));
        // The rear settles near the leader's speed (small regulation
        // oscillations around the safe gap are expected).
        let last = trace.steps.last().unwrap();
        assert!(last.agents[0].lon_vel < 12.0);
    }

    #[test]
    fn cut_in_forces_lateral_retreat_of_the_cutter() {
        let trace = run_ok(&presets::cut_in());
        assert!(trace.collisions().is_empty());
        let onset = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::DangerOnset)
            .expect("cut-in becomes dangerous");
        let p = RssParameters::default();
        // The cutter (id 1, moving laterally) must brake laterally: positive
        // lateral acceleration pushing it back while it still moves down.
        let cutter_braked = trace.steps.iter().any(|s| {
            s.t > onset.t + p.rho
                && s.agents[1].lat_vel < -1e-3
                && s.agents[1].applied_lat >= p.a_lat_min_brake - 1e-9
        });
        assert!(cutter_braked, "cutter never braked laterally");
        // The ego, already at lateral rest, never needs lateral action.
        assert!(trace.steps.iter().all(|s| s.agents[0].applied_lat.abs() < 1e-9));
        assert!(!trace.events.iter().any(|e| e.kind == EventKind::Violation));
    }

    #[test]
    fn oncoming_pair_brakes_to_a_standstill_apart() {
        let trace = run_ok(&presets::oncoming());
        assert!(trace.collisions().is_empty());
        assert!(trace.events.iter().any(|e| e.kind == EventKind::DangerOnset));
        // The pair settles into a standoff. The standoff is not perfectly
        // static: whenever danger unlatches (speeds near zero shrink the
        // required distance to its floor) a car may nudge forward for a step
        // before re-latching and coasting to rest, so "standstill" means
        // creep speeds, and the gap floor is the at-rest required distance.
        let last = trace.steps.last().unwrap();
        assert!(last.agents[0].lon_vel.abs() < 0.1, "car 0 still moving");
        assert!(last.agents[1].lon_vel.abs() < 0.1, "car 1 still moving");
        let gap = last.agents[1].lon - last.agents[0].lon - 4.0;
        assert!(gap > 0.5, "cars stopped too close: gap {gap}");
        // The wrong-direction mover brakes with positive acceleration.
        let b_braked = trace
            .steps
            .iter()
            .any(|s| s.agents[1].lon_vel < -1e-6 && s.agents[1].applied_lon >= 3.0 - 1e-9);
        assert!(b_braked);
        assert!(!trace.events.iter().any(|e| e.kind == EventKind::Violation));
    }

    #[test]
    fn overbrake_collision_blames_only_the_leader() {
        let sc = presets::overbrake(20.0);
        let trace = run_ok(&sc);
        let pairs = collision_pairs(&trace);
        assert_eq!(pairs.len(), 1, "expected exactly one collision");
        // The runner's events agree with the standalone detector.
        let redetected = detect_collisions(&sc, &trace);
        assert_eq!(redetected.len(), 1);
        assert!((redetected[0].t - trace.collisions()[0].t).abs() < 1e-9);

        let report = assign_responsibility(&sc, &trace);
        assert!(report.all_attributed());
        assert_eq!(report.named(), BTreeSet::from([1]));
        let incident = &report.incidents[0];
        assert!(incident.t_danger.is_some());
        let v0 = incident.verdicts.iter().find(|v| v.id == 0).unwrap();
        let v1 = incident.verdicts.iter().find(|v| v.id == 1).unwrap();
        assert!(v0.compliant, "follower wrongly blamed");
        assert!(!v1.compliant, "overbraking leader not blamed");
        // A collision must be preceded by a dangerous step for the pair.
        let t_c = incident.t_collision;
        let dangerous_before = trace
            .steps
            .iter()
            .any(|s| s.t < t_c && s.pairs.iter().any(|p| p.dangerous));
        assert!(dangerous_before);
    }

    #[test]
    fn delayed_response_collision_blames_the_sleeper() {
        let sc = presets::delayed(20.0, 1.8);
        let trace = run_ok(&sc);
        assert_eq!(collision_pairs(&trace).len(), 1);
        let report = assign_responsibility(&sc, &trace);
        assert!(report.all_attributed());
        // The scripted leader's stop was legal: it is never named.
        assert_eq!(report.named(), BTreeSet::from([0]));
    }

    #[test]
    fn lateral_drift_collision_blames_the_drifter() {
        let sc = presets::drift(15.0, 2.0);
        let trace = run_ok(&sc);
        assert_eq!(collision_pairs(&trace).len(), 1);
        let report = assign_responsibility(&sc, &trace);
        assert!(report.all_attributed());
        assert_eq!(report.named(), BTreeSet::from([0]));
        let incident = &report.incidents[0];
        let victim = incident.verdicts.iter().find(|v| v.id == 1).unwrap();
        assert!(victim.compliant);
    }

    #[test]
    fn swerve_handoff_blames_no_pair_member_but_flags_the_van() {
        let sc = presets::swerve();
        let trace = run_ok(&sc);
        let pairs = collision_pairs(&trace);
        assert_eq!(pairs, vec![(0, 2)], "follower must hit the stopped car");
        // The van was exposed as a violator before the collision.
        assert!(trace
            .events
            .iter()
            .any(|e| e.kind == EventKind::Violation && e.a == 1));
        // The follower saw the stopped car only after the swerve began.
        let exposure = trace
            .events
            .iter()
            .find(|e| e.kind == EventKind::Exposure && e.a == 0 && e.b == Some(2))
            .expect("exposure event");
        assert!(exposure.t > 0.3, "stopped car visible too early: {}", exposure.t);

        let report = assign_responsibility(&sc, &trace);
        let incident = &report.incidents[0];
        let follower = incident.verdicts.iter().find(|v| v.id == 0).unwrap();
        let stopped = incident.verdicts.iter().find(|v| v.id == 2).unwrap();
        assert!(follower.compliant, "the too-late-exposed follower must not be blamed");
        assert!(!follower.hidden_speeding);
        assert!(stopped.compliant);
        assert_eq!(incident.contributing, vec![1], "the van contributed");
        assert!(report.all_attributed());
    }

    #[test]
    fn swerve_speeding_variant_flags_hidden_speed() {
        let sc = presets::swerve_speeding();
        let trace = run_ok(&sc);
        assert_eq!(collision_pairs(&trace), vec![(0, 2)]);
        let report = assign_responsibility(&sc, &trace);
        let incident = &report.incidents[0];
        let follower = incident.verdicts.iter().find(|v| v.id == 0).unwrap();
        assert!(follower.hidden_speeding, "30 m/s while hidden must be flagged");
        assert!(!follower.compliant);
        let stopped = incident.verdicts.iter().find(|v| v.id == 2).unwrap();
        assert!(stopped.compliant);
    }

    #[test]
    fn occlusion_caution_defuses_the_swerve_handoff() {
        let cautious = run_ok(&presets::swerve_cautious());
        assert!(
            cautious.collisions().is_empty(),
            "worst-case hypotheses should force a preemptive slowdown"
        );
        // The identical scenario with plain see-and-react sensing collides
        // (covered in detail by the blame test).
        let blind = run_ok(&presets::swerve());
        assert!(!blind.collisions().is_empty());
    }

    #[test]
    fn trace_digest_is_reproducible_and_sensitive() {
        let sc = presets::cut_in();
        let d1 = run_ok(&sc).digest();
        let d2 = run_ok(&sc).digest();
        assert_eq!(d1, d2);
        let mut other = sc.clone();
        other.agents[0].init = InitState::Lane { lon: 30.5, lat: -1.75, lon_vel: 15.0, lat_vel: 0.0 };
        assert_ne!(d1, run_ok(&other).digest());
    }

    #[test]
    fn utopia_smoke_all_families_stay_collision_free() {
        for family in [
            ScenarioFamily::Highway,
            ScenarioFamily::Junction,
            ScenarioFamily::Unstructured,
            ScenarioFamily::OccludedMerge,
        ] {
            let mut cfg = GeneratorConfig::for_family(family);
            cfg.duration = 25.0;
            let report = utopia_fuzz(6, &cfg, 0x5eed).unwrap();
            assert!(
                report.clean(),
                "family {:?} produced collisions: {:?}",
                family,
                report
                    .failures
                    .iter()
                    .map(|f| (f.index, f.collisions.clone()))
                    .collect::<Vec<_>>()
            );
        }
    }

    #[test]
    fn violator_suite_scenarios_all_collide_with_clean_blame() {
        for (k, sc) in presets::violator_suite(9).into_iter().enumerate() {
            let trace = run_ok(&sc);
            assert!(!trace.collisions().is_empty(), "{} did not collide", sc.name);
            let report = assign_responsibility(&sc, &trace);
            assert!(report.all_attributed(), "{} has an unattributed collision", sc.name);
            // Overbrake entries put the violator in front (id 1); the delayed
            // and drift entries make agent 0 the violator.
            let expected = if k % 3 == 0 { 1 } else { 0 };
            assert_eq!(report.named(), BTreeSet::from([expected]), "{} named the wrong agent", sc.name);
        }
    }
}
