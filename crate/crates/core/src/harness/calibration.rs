//! Trajectory calibration: module thrusts the nominal allocator would demand
//! for perfect tracking, used to place scenarios inside or beyond the
//! failure limits.

use nalgebra::{Vector2, Vector3, Vector4};

use super::trajectory::{sample_trajectory, TrajectorySpec};
use crate::allocation::Allocator;
use crate::model::{rotation_from_euler, PlatformParams, WrenchCommand};

/// Wrench that makes the feedback-linearised model follow the reference
/// exactly.
pub fn feedforward_wrench(spec: &TrajectorySpec, t: f64, params: &PlatformParams, h: f64) -> WrenchCommand {
    let s = sample_trajectory(spec, t);
    let r = rotation_from_euler(&s.reference.eta_r);
    let nu_dot =
        (sample_trajectory(spec, t + h).reference.nu_r - sample_trajectory(spec, t - h).reference.nu_r) / (2.0 * h);
    WrenchCommand::new(r.transpose() * (s.xi_ddot_r - params.gravity()) * params.m_total, params.i_total * nu_dot)
}

/// Per-module peak of the nominal-allocation thrust over `[0, duration]`.
pub fn peak_fd_thrust(
    spec: &TrajectorySpec,
    duration: f64,
    params: &PlatformParams,
    allocator: &Allocator,
    extra_torque: Vector3<f64>,
) -> Vector4<f64> {
    let dt = 1.0 / params.hl_rate;
    let mut peak = Vector4::zeros();
    let mut alpha = Vector4::zeros();
    let n = (duration / dt).round() as usize;
    for k in 0..=n {
        let mut u = feedforward_wrench(spec, k as f64 * dt, params, 1e-4);
        u.torque += extra_torque;
        let sol = allocator.fd_allocate(&u, &Vector2::zeros(), &alpha);
        alpha = sol.alpha;
        peak = peak.sup(&sol.thrust);
    }
    peak
}

/// Smallest achievable largest module thrust for wrench `u`, searching the
/// two-dimensional nullspace on a grid of half-width `range` with `steps`
/// points per axis, refined twice around the best point.
pub fn nullspace_min_peak_thrust(allocator: &Allocator, u: &WrenchCommand, range: f64, steps: usize) -> f64 {
    let base = allocator.w_pinv() * u.to_vector();
    let n = allocator.nullspace();
    let peak = |z: &Vector2<f64>| {
        let f = base + n * z;
        (0..4).map(|i| f[2 * i].hypot(f[2 * i + 1])).fold(0.0, f64::max)
    };
    let mut centre = Vector2::zeros();
    let mut half = range;
    let mut best = peak(&centre);
    for _ in 0..3 {
        let step = 2.0 * half / steps as f64;
        let c = centre;
        for a in 0..=steps {
            for b in 0..=steps {
                let z = c + Vector2::new(-half + a as f64 * step, -half + b as f64 * step);
                let v = peak(&z);
                if v < best {
                    best = v;
                    centre = z;
                }
            }
        }
        half = 2.0 * step;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::AllocationConfig;

    #[test]
    fn hover_feedforward() {
        let p = PlatformParams::default();
        let a = Allocator::new(&p, &AllocationConfig::default());
        let peak = peak_fd_thrust(&TrajectorySpec::default(), 2.0, &p, &a, Vector3::zeros());
        assert!((peak - Vector4::repeat(p.hover_thrust())).amax() < 1e-12);
    }

    #[test]
    fn nullspace_search_never_worse_than_fd() {
        let p = PlatformParams::default();
        let a = Allocator::new(&p, &AllocationConfig::default());
        let u = WrenchCommand::new(Vector3::new(0.0, 1.3, 0.5), Vector3::zeros());
        let fd = a.fd_allocate(&u, &Vector2::zeros(), &Vector4::zeros()).thrust.amax();
        let ns = nullspace_min_peak_thrust(&a, &u, 1.0, 40);
        assert!(ns <= fd + 1e-15);
    }
}
