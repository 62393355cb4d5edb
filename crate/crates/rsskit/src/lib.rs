//! Responsibility-Sensitive Safety (RSS) toolkit.
//!
//! The crate implements the RSS driving-safety model end to end:
//!
//! * [`geometry`] — lane coordinate systems (piecewise line/arc centerlines)
//!   and the bijection between world and lane-frame coordinates,
//! * [`rss_core`] — safe longitudinal/lateral distances, danger detection and
//!   the proper-response acceleration constraints for a shared lane geometry,
//! * [`multi_route`] — safety and responses for agents on different routes
//!   (junctions, merges, traffic lights),
//! * [`unstructured`] — trajectory-family reasoning for roads without lane
//!   structure (parking lots, pedestrians),
//! * [`occlusion`] — worst-case hypotheses for agents hidden behind occluders
//!   and the exemptions they grant,
//! * [`policy`] — a semantic-action driving policy with closed-form
//!   trajectory synthesis, filtered through the RSS constraints,
//! * [`sensing`] — statistical validation of sensing systems (PAC sensing,
//!   redundant-subsystem fusion, validation-infeasibility estimates),
//! * [`sim`] — a deterministic multi-agent simulator with collision
//!   detection, responsibility assignment and a fuzzing harness for the
//!   no-collision ("utopia") property.
//!
//! Everything is deterministic: randomized components take explicit seeds and
//! produce identical results for identical inputs on every platform.

pub mod config;
pub mod geometry;
pub mod kinematics;
pub mod math;
pub mod multi_route;
pub mod occlusion;
pub mod policy;
pub mod rss_core;
pub mod sensing;
pub mod sim;
pub mod unstructured;

pub use config::Config;
pub use rss_core::RssParameters;
