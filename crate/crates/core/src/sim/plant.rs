use nalgebra::{UnitQuaternion, Vector4};

use super::SimConfig;
use crate::model::{
    quad_mixing, thrust_jacobians, PlatformParams, PlatformState, PropellerSet, PropellerThrusts, NUM_QUADS,
};

/// `sin(πi/2)` and `cos(πi/2)` for the four hinge orientations.
const HINGE_SIN: [f64; 4] = [0.0, 1.0, 0.0, -1.0];
const HINGE_COS: [f64; 4] = [1.0, 0.0, -1.0, 0.0];

/// Failed propellers produce exactly zero thrust.
pub fn apply_failures(commanded: &PropellerThrusts, failed: PropellerSet) -> PropellerThrusts {
    let mut out = *commanded;
    for j in failed.indices() {
        out.t[j] = 0.0;
    }
    out
}

/// Advance the platform by `cfg.dt_physics`. Velocities are updated first and
/// the new rates drive attitude and hinge angles (semi-implicit Euler).
pub fn plant_step(
    state: &PlatformState,
    thrusts: &[PropellerThrusts; NUM_QUADS],
    params: &PlatformParams,
    cfg: &SimConfig,
) -> PlatformState {
    let dt = cfg.dt_physics;
    let mut t = Vector4::zeros();
    let mut mx = Vector4::zeros();
    let mut my = Vector4::zeros();
    let mut mz = Vector4::zeros();
    for i in 0..NUM_QUADS {
        let clamped = PropellerThrusts::new(thrusts[i].t.map(|v| v.clamp(0.0, params.t_max)));
        let out = quad_mixing(&clamped, params);
        t[i] = out.thrust;
        mx[i] = out.mx;
        my[i] = out.my;
        mz[i] = out.mz;
    }

    let jac = thrust_jacobians(&state.alpha, params.l);
    let r = state.rotation();
    let xi_ddot = r * (jac.j_xi * t) / params.m_total + params.gravity();

    let mut torque = jac.j_nu * t + jac.j_mx * mx + jac.j_mz * mz;
    if cfg.include_gyroscopic {
        torque -= state.nu.cross(&(params.i_total * state.nu));
    }
    let i_inv = params.i_total.try_inverse().unwrap_or_else(nalgebra::Matrix3::zeros);
    let nu_dot = i_inv * torque;

    let iy = params.hinge_inertia();
    let alpha_ddot = Vector4::from_fn(|i, _| my[i] / iy - HINGE_SIN[i] * nu_dot.x - HINGE_COS[i] * nu_dot.y);

    let mut next = state.clone();
    // position takes the exact constant-acceleration step; plain
    // semi-implicit Euler is off by dt/t relative in free fall
    next.xi += state.xi_dot * dt + xi_ddot * (0.5 * dt * dt);
    next.xi_dot += xi_ddot * dt;
    next.nu += nu_dot * dt;
    let q = state.attitude_q * UnitQuaternion::from_scaled_axis(next.nu * dt);
    next.attitude_q = UnitQuaternion::new_normalize(q.into_inner());
    next.alpha_dot += alpha_ddot * dt;
    next.alpha += next.alpha_dot * dt;
    next.sync_eta();
    next
}

/// First-order propeller response. With `tau = 0` it passes commands
/// through.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorLag {
    tau: f64,
    state: Option<[PropellerThrusts; NUM_QUADS]>,
}

impl MotorLag {
    pub fn new(tau: f64) -> Self {
        Self { tau: tau.max(0.0), state: None }
    }

    pub fn step(&mut self, cmd: &[PropellerThrusts; NUM_QUADS], dt: f64) -> [PropellerThrusts; NUM_QUADS] {
        if self.tau == 0.0 {
            return *cmd;
        }
        let k = dt / (self.tau + dt);
        let mut s = self.state.unwrap_or(*cmd);
        for i in 0..NUM_QUADS {
            s[i].t += (cmd[i].t - s[i].t) * k;
        }
        self.state = Some(s);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    fn quiet() -> SimConfig {
        SimConfig { noise: super::super::NoiseConfig::none(), ..SimConfig::default() }
    }

    #[test]
    fn hover_is_equilibrium() {
        let p = PlatformParams::default();
        let per_prop = p.hover_thrust() / 4.0;
        let thrusts = [PropellerThrusts::uniform(per_prop); 4];
        let s = plant_step(&PlatformState::default(), &thrusts, &p, &quiet());
        assert!(s.xi_dot.norm() < 1e-15 && s.nu.norm() < 1e-15 && s.alpha_dot.norm() < 1e-15);
    }

    #[test]
    fn free_fall() {
        let p = PlatformParams::default();
        let cfg = quiet();
        let mut s = PlatformState::default();
        s.xi.z = 10.0;
        let zero = [PropellerThrusts::default(); 4];
        let s1 = plant_step(&s, &zero, &p, &cfg);
        assert!((s1.xi_dot.z / cfg.dt_physics + 9.81).abs() < 1e-12);
        for _ in 0..1000 {
            s = plant_step(&s, &zero, &p, &cfg);
        }
        let drop = 0.5 * 9.81;
        assert!(((10.0 - s.xi.z) - drop).abs() <= 1e-3 * drop);
    }

    #[test]
    fn hinge_acceleration_from_torque() {
        let p = PlatformParams::default();
        let cfg = quiet();
        // thrusts on module 0 producing M_y = 1e-4 with zero total moment elsewhere
        let dt = 1e-4 / (2.0 * p.b);
        let base = p.hover_thrust() / 4.0;
        let mut thrusts = [PropellerThrusts::uniform(base); 4];
        thrusts[0].t = Vector4::new(base + dt / 2.0, base - dt / 2.0, base - dt / 2.0, base + dt / 2.0);
        let out = quad_mixing(&thrusts[0], &p);
        assert!((out.my - 1e-4).abs() < 1e-15 && out.mx.abs() < 1e-15);
        let s = plant_step(&PlatformState::default(), &thrusts, &p, &cfg);
        let alpha_ddot = s.alpha_dot[0] / cfg.dt_physics;
        assert!((alpha_ddot - 6.25).abs() < 1e-9, "{alpha_ddot}");
    }

    #[test]
    fn quaternion_norm_preserved() {
        let p = PlatformParams::default();
        let cfg = quiet();
        let mut s = PlatformState { nu: Vector3::new(0.7, -1.3, 2.1), ..Default::default() };
        let zero = [PropellerThrusts::default(); 4];
        for _ in 0..10_000 {
            s = plant_step(&s, &zero, &p, &cfg);
        }
        assert!((s.attitude_q.coords.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn failures_zero_outputs() {
        let t = PropellerThrusts::uniform(0.1);
        assert_eq!(apply_failures(&t, PropellerSet::EMPTY), t);
        let one = apply_failures(&t, PropellerSet::from_indices(&[0]).unwrap());
        assert_eq!(one.t, Vector4::new(0.0, 0.1, 0.1, 0.1));
        let all = apply_failures(&t, PropellerSet::from_indices(&[0, 1, 2, 3]).unwrap());
        assert_eq!(all.t, Vector4::zeros());
    }

    #[test]
    fn motor_lag_passthrough_and_filter() {
        let cmd = [PropellerThrusts::uniform(0.1); 4];
        let mut lag = MotorLag::new(0.0);
        assert_eq!(lag.step(&cmd, 1e-3), cmd);
        let mut lag = MotorLag::new(0.02);
        lag.step(&[PropellerThrusts::default(); 4], 1e-3);
        let out = lag.step(&cmd, 1e-3);
        assert!(out[0].t[0] > 0.0 && out[0].t[0] < 0.1);
    }
}
