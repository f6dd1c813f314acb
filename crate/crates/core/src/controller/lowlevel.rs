//! Per-module low-level control: hinge PID and propeller mixing for the
//! nominal and failed-propeller cases.
//!
//! The failure maps are written for a general failed index using the sign
//! pattern of the mixing matrix. For a single failure the propeller sharing
//! the failed one's pitch sign is the "partner"; it carries half the thrust.

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::model::{
    mix_inverse_raw, quad_mixing, FailureStatus, FailureStrategy, PlatformParams, PropellerThrusts, QuadCommand,
    QuadOutputs, PROP_SIGNS,
};

/// Single-failure handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LowLevelVariant {
    /// Controls `(T, M_y)` and releases `Mx`, `Mz`.
    #[default]
    Reduced28,
    /// Controls `(T, Mx, M_y)` and releases `Mz`. Can demand negative thrust.
    FullRank27,
}

/// Hinge PID gains. The derivative acts on the measured hinge rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the magnitude of the integral state.
    pub integral_limit: f64,
}

impl Default for PidGains {
    fn default() -> Self {
        Self { kp: 0.0144, ki: 0.05, kd: 7.7e-4, integral_limit: 0.5 }
    }
}

/// Config section of the low-level controller.
pub type LowLevelConfig = PidGains;

/// Integrator state of one module's hinge loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowLevelState {
    pub gains: PidGains,
    pub variant: LowLevelVariant,
    pub integral: f64,
    pub prev_error: f64,
}

impl LowLevelState {
    pub fn new(gains: PidGains, variant: LowLevelVariant) -> Self {
        assert!(gains.kp >= 0.0 && gains.ki >= 0.0 && gains.kd >= 0.0, "PID gains must be nonnegative");
        Self { gains, variant, integral: 0.0, prev_error: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LowLevelOutput {
    pub thrusts: PropellerThrusts,
    /// Hinge torque requested by the PID.
    pub my_cmd: f64,
    /// Output of the clamped thrusts through the mixing matrix.
    pub achieved: QuadOutputs,
    /// Uncontrolled body torques released by a failure map.
    pub mx_dist: f64,
    pub mz_dist: f64,
    pub saturated: bool,
}

/// Healthy propeller with the same pitch sign as `j`.
pub fn partner_propeller(j: usize) -> usize {
    3 - j
}

pub fn nominal_map(thrust: f64, mx: f64, my: f64, mz: f64, b: f64, c_tau: f64) -> Vector4<f64> {
    mix_inverse_raw(&QuadOutputs { thrust, mx, my, mz }, b, c_tau)
}

/// `(T, M_y)` onto the three healthy propellers after propeller `j` fails.
pub fn one_fail_map(j: usize, thrust: f64, my: f64, b: f64) -> Vector4<f64> {
    let p = partner_propeller(j);
    let s = PROP_SIGNS[p].1;
    let mut t = Vector4::repeat(thrust / 4.0 - s * my / (4.0 * b));
    t[j] = 0.0;
    t[p] = thrust / 2.0 + s * my / (2.0 * b);
    t
}

/// `(T, M_y)` onto the two remaining propellers, which must have opposite
/// pitch signs.
pub fn two_fail_map(j: usize, k: usize, thrust: f64, my: f64, b: f64) -> Vector4<f64> {
    let mut t = Vector4::zeros();
    for i in (0..4).filter(|&i| i != j && i != k) {
        t[i] = (thrust + PROP_SIGNS[i].1 * my / b) / 2.0;
    }
    t
}

/// `(T, Mx, M_y)` onto the three healthy propellers after propeller `j`
/// fails, by inverting the corresponding 3×3 block of the mixing matrix.
pub fn full_rank_map(j: usize, thrust: f64, mx: f64, my: f64, b: f64) -> Vector4<f64> {
    let idx: Vec<usize> = (0..4).filter(|&i| i != j).collect();
    let m = Matrix3::from_fn(|r, c| match r {
        0 => 1.0,
        1 => PROP_SIGNS[idx[c]].0 * b,
        _ => PROP_SIGNS[idx[c]].1 * b,
    });
    let sol = m.try_inverse().expect("mixing sub-block is invertible") * Vector3::new(thrust, mx, my);
    let mut t = Vector4::zeros();
    for (n, &i) in idx.iter().enumerate() {
        t[i] = sol[n];
    }
    t
}

/// Unclamped propeller thrusts for a strategy.
pub fn propeller_map(
    strategy: FailureStrategy,
    variant: LowLevelVariant,
    cmd: &QuadCommand,
    my: f64,
    params: &PlatformParams,
) -> Vector4<f64> {
    let b = params.b;
    match strategy {
        FailureStrategy::Nominal => nominal_map(cmd.thrust, cmd.mx_aux, my, cmd.mz_aux, b, params.c_tau),
        FailureStrategy::OneFail(j) => match variant {
            LowLevelVariant::Reduced28 => one_fail_map(j, cmd.thrust, my, b),
            LowLevelVariant::FullRank27 => full_rank_map(j, cmd.thrust, cmd.mx_aux, my, b),
        },
        FailureStrategy::TwoFailControllable(j, k) => two_fail_map(j, k, cmd.thrust, my, b),
        FailureStrategy::QuadLost => Vector4::zeros(),
    }
}

/// One low-level tick of a module: hinge PID on `e_α = α_ref − α`, then the
/// strategy's mixing and propeller clamping to `[0, t_max]`.
pub fn lowlevel_step(
    cmd: &QuadCommand,
    alpha_meas: f64,
    alpha_rate_meas: f64,
    failure: &FailureStatus,
    ll: &mut LowLevelState,
    params: &PlatformParams,
    dt: f64,
) -> LowLevelOutput {
    debug_assert!(dt > 0.0);
    let g = ll.gains;
    let e = cmd.alpha_ref - alpha_meas;
    if failure.strategy != FailureStrategy::QuadLost {
        ll.integral = (ll.integral + 0.5 * (e + ll.prev_error) * dt).clamp(-g.integral_limit, g.integral_limit);
    }
    ll.prev_error = e;
    let my = g.kp * e + g.ki * ll.integral - g.kd * alpha_rate_meas;

    let raw = propeller_map(failure.strategy, ll.variant, cmd, my, params);
    let (mut thrusts, saturated) = PropellerThrusts::saturate(raw, params.t_max);
    for j in failure.failed.indices() {
        thrusts.t[j] = 0.0;
    }
    let achieved = quad_mixing(&thrusts, params);
    let (mx_dist, mz_dist) = match failure.strategy {
        FailureStrategy::OneFail(_) if ll.variant == LowLevelVariant::FullRank27 => {
            (achieved.mx - cmd.mx_aux, achieved.mz)
        }
        FailureStrategy::OneFail(_) | FailureStrategy::TwoFailControllable(..) => (achieved.mx, achieved.mz),
        _ => (0.0, 0.0),
    };
    LowLevelOutput { thrusts, my_cmd: my, achieved, mx_dist, mz_dist, saturated }
}
