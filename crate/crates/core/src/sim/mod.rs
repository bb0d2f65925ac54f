//! Scenario configuration, reference trajectory, closed-loop harness and run logging.

mod harness;
pub mod log;
mod scenario;
mod trajectory;

pub use harness::{allocation_violations, run_scenario, simulate, summarize, RunOutput, BOUND_TOL};
pub use log::{AllocationRow, ControllerRow, EnvironmentRow, ObserverRow, RunSummary, Traces};
pub use scenario::{
    AllocationConfig, ControllerConfig, DisturbanceConfig, NetworkConfig, ObserverConfig, RunConfig, Scenario,
    VesselConfig, WaveConfig, WindConfig, DEFAULT_SCENARIO,
};
pub use trajectory::desired_trajectory;
