//! Scenarios, trajectories, the closed-loop runner, traces and metrics.

pub mod calibration;
mod config;
mod metrics;
mod runner;
mod scenario;
mod trace;
mod trajectory;

pub use config::Config;
pub use metrics::{
    compute_metrics, compute_metrics_window, divergence_time, is_diverged, Metrics, ATTITUDE_LIMIT, POSITION_LIMIT,
    TRANSIENT,
};
pub use runner::{run_scenario, LoopCounters, RunOutput};
pub use scenario::{
    builtin, resolve, AllocationMode, ControllerVariant, FailureEvent, Scenario, SCENARIO_GROUPS, SCENARIO_NAMES,
};
pub use trace::{
    csv_header, csv_row, Trace, TraceRecord, SAT_ALLOCATION_CONSTRAINED, SAT_QP_NOT_OPTIMAL, SAT_THRUST_COMMAND,
};
pub use trajectory::{
    euler_rate_matrix, generate_trajectory, sample_trajectory, ReferenceSample, TrajectoryKind, TrajectorySpec,
};
