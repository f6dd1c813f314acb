//! Reference trajectories: raised-cosine ramps from the origin to the
//! configured amplitudes, then hold.
//!
//! The ramp profile `s(τ) = τ − sin(2πτ)/(2π)` has zero first and second
//! derivatives at both ends, so the reference is C² everywhere.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::controller::Reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    #[default]
    Hover,
    /// Attitude ramps only; position held at the origin.
    AttitudeSinusoid,
    /// Position and attitude ramps together.
    SixDof,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(rename = "type")]
    pub kind: TrajectoryKind,
    /// `(φ_max, θ_max, ψ_max)` in rad.
    pub attitude: [f64; 3],
    /// Final position in m (six-dof only).
    pub position: [f64; 3],
    /// Ramp duration in s.
    pub period: f64,
    /// Ramp start time in s.
    pub start: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self { kind: TrajectoryKind::Hover, attitude: [0.0; 3], position: [0.0; 3], period: 4.0, start: 0.5 }
    }
}

impl TrajectorySpec {
    pub fn attitude_ramp(attitude: [f64; 3], period: f64, start: f64) -> Self {
        Self { kind: TrajectoryKind::AttitudeSinusoid, attitude, position: [0.0; 3], period, start }
    }

    pub fn is_valid(&self) -> bool {
        self.attitude.iter().chain(self.position.iter()).all(|v| v.is_finite())
            && self.period > 0.0
            && self.start >= 0.0
            && self.start.is_finite()
    }

    /// End of the ramp.
    pub fn settle_time(&self) -> f64 {
        self.start + self.period
    }
}

/// Ramp value and its first two time derivatives.
fn ramp(spec: &TrajectorySpec, t: f64) -> (f64, f64, f64) {
    let tau = (t - spec.start) / spec.period;
    if tau <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if tau >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let w = 2.0 * PI * tau;
    let s = tau - w.sin() / (2.0 * PI);
    let ds = (1.0 - w.cos()) / spec.period;
    let dds = 2.0 * PI * w.sin() / (spec.period * spec.period);
    (s, ds, dds)
}

/// Body rates from Z-Y-X Euler angle rates.
pub fn euler_rate_matrix(eta: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    Matrix3::new(1.0, 0.0, -st, 0.0, cp, sp * ct, 0.0, -sp, cp * ct)
}

/// Reference with its feedforward accelerations, used by calibration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReferenceSample {
    pub reference: Reference,
    pub xi_ddot_r: Vector3<f64>,
    pub eta_dot_r: Vector3<f64>,
    pub eta_ddot_r: Vector3<f64>,
}

pub fn sample_trajectory(spec: &TrajectorySpec, t: f64) -> ReferenceSample {
    let (s, ds, dds) = ramp(spec, t);
    let att = Vector3::from(spec.attitude);
    let pos = match spec.kind {
        TrajectoryKind::SixDof => Vector3::from(spec.position),
        _ => Vector3::zeros(),
    };
    let att = match spec.kind {
        TrajectoryKind::Hover => Vector3::zeros(),
        _ => att,
    };
    let eta_r = att * s;
    let eta_dot_r = att * ds;
    ReferenceSample {
        reference: Reference { xi_r: pos * s, xi_dot_r: pos * ds, eta_r, nu_r: euler_rate_matrix(&eta_r) * eta_dot_r },
        xi_ddot_r: pos * dds,
        eta_dot_r,
        eta_ddot_r: att * dds,
    }
}

pub fn generate_trajectory(spec: &TrajectorySpec, t: f64) -> Reference {
    sample_trajectory(spec, t).reference
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::rotation_from_euler;

    fn six_dof() -> TrajectorySpec {
        TrajectorySpec {
            kind: TrajectoryKind::SixDof,
            attitude: [0.5, 0.2, 0.4],
            position: [1.0, -0.5, 0.3],
            period: 3.0,
            start: 0.5,
        }
    }

    #[test]
    fn hover_is_constant() {
        let spec = TrajectorySpec::default();
        for t in [0.0, 1.0, 7.5] {
            assert_eq!(generate_trajectory(&spec, t), Reference::default());
        }
    }

    #[test]
    fn reaches_and_holds_amplitudes() {
        let spec = TrajectorySpec::attitude_ramp([0.5, 0.2, 0.4], 3.0, 0.5);
        let r = generate_trajectory(&spec, 10.0);
        assert_eq!(r.eta_r, Vector3::new(0.5, 0.2, 0.4));
        assert_eq!(r.nu_r, Vector3::zeros());
        assert_eq!(r.xi_r, Vector3::zeros());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let spec = six_dof();
        let h = 1e-5;
        for k in 0..40 {
            let t = 0.3 + k as f64 * 0.09;
            let a = sample_trajectory(&spec, t - h);
            let b = sample_trajectory(&spec, t + h);
            let mid = sample_trajectory(&spec, t);
            let v = (b.reference.xi_r - a.reference.xi_r) / (2.0 * h);
            assert!((v - mid.reference.xi_dot_r).amax() < 1e-8);
            let acc = (b.reference.xi_dot_r - a.reference.xi_dot_r) / (2.0 * h);
            assert!((acc - mid.xi_ddot_r).amax() < 1e-7);
            let ed = (b.reference.eta_r - a.reference.eta_r) / (2.0 * h);
            assert!((ed - mid.eta_dot_r).amax() < 1e-8);
        }
    }

    #[test]
    fn body_rate_matches_rotation_derivative() {
        // Rᵀ Ṙ = [ν]×
        let spec = six_dof();
        let h = 1e-6;
        let t = 1.7;
        let r0 = rotation_from_euler(&generate_trajectory(&spec, t - h).eta_r);
        let r1 = rotation_from_euler(&generate_trajectory(&spec, t + h).eta_r);
        let r = rotation_from_euler(&generate_trajectory(&spec, t).eta_r);
        let skew = r.transpose() * (r1 - r0) / (2.0 * h);
        let nu = Vector3::new(skew[(2, 1)], skew[(0, 2)], skew[(1, 0)]);
        assert!((nu - generate_trajectory(&spec, t).nu_r).amax() < 1e-6);
    }

    #[test]
    fn c2_at_ramp_ends() {
        let spec = six_dof();
        for t in [spec.start, spec.settle_time()] {
            let s = sample_trajectory(&spec, t);
            assert!(s.xi_ddot_r.amax() < 1e-12 && s.reference.xi_dot_r.amax() < 1e-12);
        }
    }
}
