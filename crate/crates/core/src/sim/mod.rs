//! Deterministic fixed-step plant with failures, sensing noise and command
//! delay.

mod delay;
mod plant;
mod sensing;

pub use delay::{delay_steps, DelayLine};
pub use plant::{apply_failures, plant_step, MotorLag};
pub use sensing::{sense, Sensor};

use serde::{Deserialize, Serialize};

/// Standard deviations of the additive measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// m
    pub position: f64,
    /// rad, on each Euler angle
    pub attitude: f64,
    /// rad/s, on each body rate
    pub rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { position: 1e-3, attitude: 0.2_f64.to_radians(), rate: 0.01 }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self { position: 0.0, attitude: 0.0, rate: 0.0 }
    }

    pub fn is_zero(&self) -> bool {
        self.position == 0.0 && self.attitude == 0.0 && self.rate == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt_physics: f64,
    pub noise: NoiseConfig,
    /// Overrides the platform's command delay when set.
    pub comm_delay: Option<f64>,
    pub seed: u64,
    pub include_gyroscopic: bool,
    /// Propeller time constant in seconds; 0 applies commands instantly.
    pub motor_tau: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_physics: 1e-3,
            noise: NoiseConfig::default(),
            comm_delay: None,
            seed: 0,
            include_gyroscopic: true,
            motor_tau: 0.0,
        }
    }
}
