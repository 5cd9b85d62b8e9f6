//! Discrete-event simulation of a broker network, with oracles and
//! invariant checks.

pub mod engine;
pub mod invariants;
pub mod metrics;
pub mod oracle;
pub mod scenario;

pub use engine::{check_quiescence, run, InvariantViolation, RunOptions, RunResult, RunStats, Simulation, StopReason};
pub use invariants::{assert_invariants, check_broker, CheckDepth};
pub use metrics::{Metrics, MetricsRow};
pub use scenario::{Action, DemandStream, RandomDemands, Scenario, ScenarioError, TimedAction};
