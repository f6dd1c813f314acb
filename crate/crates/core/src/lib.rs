//! Fault-tolerant hierarchical flight control for an over-actuated platform
//! built from four quadcopters on passive hinges.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: parameters, state, thrust Jacobians and propeller mixing.
//! - [`numerics`]: pseudoinverse, nullspace basis, dense active-set QP and
//!   continuous-time Riccati solver.
//! - [`allocation`]: force-decomposition and nullspace-based wrench allocation.
//! - [`controller`]: LQI tracking and the per-module low-level control laws.
//! - [`ftc`]: thrust-limit adjustment and the torque compensation loop.
//! - [`sim`]: fixed-step plant, failures, sensing noise and command delay.
//! - [`harness`]: scenarios, trajectories, the closed-loop runner and metrics.

pub mod allocation;
pub mod controller;
pub mod error;
pub mod ftc;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod sim;

pub use error::{Error, Result};
