//! Online min-cost perfect matching with delays.
//!
//! Requests arrive over time at points of a metric space and must be matched
//! in pairs; an algorithm pays the distance between matched points plus the
//! time each request waits. This crate simulates the poly-logarithmically
//! competitive online algorithm built from growing components and per
//! component greedy matchers, together with exact offline oracles and an
//! audit of its structural invariants.

pub mod audit;
pub mod decomposition;
pub mod greedy;
pub mod instance;
pub mod metric;
pub mod oracles;
pub mod orchestrator;

pub use instance::{generate, GeneratorKind, GeneratorSpec, Instance, InstanceError};
pub use metric::{GroundMetric, Point, RequestId, TimedPoint, TimedRequest, EPSILON};
pub use orchestrator::{MatchingResult, RunConfig, Simulation, SimulationError};
