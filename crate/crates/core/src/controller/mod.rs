//! High-level trajectory tracking and per-module low-level control.

mod lowlevel;
mod lqi;

pub use lowlevel::{
    full_rank_map, lowlevel_step, nominal_map, one_fail_map, partner_propeller, propeller_map, two_fail_map,
    LowLevelConfig, LowLevelOutput, LowLevelState, LowLevelVariant, PidGains,
};
pub use lqi::{
    attitude_angle_error, attitude_error, augmented_system, closed_loop_abscissa, closed_loop_is_hurwitz, vee,
    LqiState, LqiWeights, Reference,
};
