//! Supervisory fault handling: allocator thrust limits per failure class,
//! and the compensation QP that cancels a bad module's released torques with
//! the auxiliary torques of the healthy ones.

use log::warn;
use nalgebra::{DMatrix, DVector, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::model::{thrust_jacobians, FailureStatus, FailureStrategy, PlatformParams, NUM_QUADS, PROP_SIGNS};
use crate::numerics::{solve_qp, QpOptions, QpProblem, QpStatus};

/// Outcome of the limit adjustment.
#[derive(Debug, Clone, PartialEq)]
pub enum ThrustLimits {
    /// Per-module thrust ceilings for the allocator.
    Limits(Vector4<f64>),
    /// Lost modules that are not an opposing pair: the platform cannot fly.
    PlatformFailure { lost: Vec<usize> },
}

pub fn adjust_thrust_limits(failures: &[FailureStatus; NUM_QUADS], t_max: f64) -> ThrustLimits {
    let mut limits = Vector4::repeat(4.0 * t_max);
    let lost: Vec<usize> = (0..NUM_QUADS).filter(|&i| failures[i].strategy == FailureStrategy::QuadLost).collect();
    match lost.as_slice() {
        [] => {}
        [i] => {
            limits[*i] = 0.0;
            limits[(i + 2) % 4] = 0.0;
        }
        [i, j] if (i + 2) % 4 == *j => {
            limits[*i] = 0.0;
            limits[*j] = 0.0;
        }
        _ => return ThrustLimits::PlatformFailure { lost },
    }
    for i in 0..NUM_QUADS {
        match failures[i].strategy {
            FailureStrategy::OneFail(_) | FailureStrategy::TwoFailControllable(..) if limits[i] > 0.0 => {
                limits[i] = 2.0 * t_max;
            }
            _ => {}
        }
    }
    ThrustLimits::Limits(limits)
}

/// Diagonal weights of the compensation QP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompensationConfig {
    /// Weight on the six auxiliary torques `[Mx_g0..2, Mz_g0..2]`.
    pub a_diag: [f64; 6],
    /// Weight on the three slack components.
    pub b_diag: [f64; 3],
}

impl Default for CompensationConfig {
    fn default() -> Self {
        Self { a_diag: [1.0; 6], b_diag: [1.0e4; 3] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationProblem {
    pub alpha: Vector4<f64>,
    /// Current module thrust commands.
    pub thrust: Vector4<f64>,
    /// Current hinge torques; the bad module's entry is ignored.
    pub my: Vector4<f64>,
    pub bad: usize,
    /// Released `(Mx, Mz)` of the bad module.
    pub disturbance: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompensationResult {
    /// Healthy module indices, in the order of the aux vectors.
    pub good: [usize; 3],
    pub mx_aux: Vector3<f64>,
    pub mz_aux: Vector3<f64>,
    /// Total auxiliary torque plus disturbance on the frame.
    pub residual: Vector3<f64>,
    pub status: Option<QpStatus>,
}

impl CompensationResult {
    /// Aux commands indexed by module; zero for the bad module.
    pub fn per_module(&self) -> (Vector4<f64>, Vector4<f64>) {
        let mut mx = Vector4::zeros();
        let mut mz = Vector4::zeros();
        for (n, &g) in self.good.iter().enumerate() {
            mx[g] = self.mx_aux[n];
            mz[g] = self.mz_aux[n];
        }
        (mx, mz)
    }
}

pub fn good_modules(bad: usize) -> [usize; 3] {
    [(bad + 1) % 4, (bad + 2) % 4, (bad + 3) % 4]
}

/// Inequality rows `G y ≤ h` keeping every healthy propeller inside
/// `[min(0, t⁰), max(t_max, t⁰)]`, where `t⁰` are the thrusts with zero aux.
/// The widening makes `y = 0` always feasible.
pub fn propeller_constraints(p: &CompensationProblem, params: &PlatformParams) -> (DMatrix<f64>, DVector<f64>) {
    let good = good_modules(p.bad);
    let (b, c) = (params.b, params.c_tau);
    let mut g = DMatrix::zeros(24, 9);
    let mut h = DVector::zeros(24);
    for (n, &q) in good.iter().enumerate() {
        for (j, (sx, sy, sz)) in PROP_SIGNS.iter().enumerate() {
            let t0 = p.thrust[q] / 4.0 + sy * p.my[q] / (4.0 * b);
            let (lo, hi) = (t0.min(0.0), t0.max(params.t_max));
            let row = 8 * n + 2 * j;
            g[(row, n)] = sx / (4.0 * b);
            g[(row, 3 + n)] = sz / (4.0 * c);
            h[row] = hi - t0;
            g[(row + 1, n)] = -sx / (4.0 * b);
            g[(row + 1, 3 + n)] = -sz / (4.0 * c);
            h[row + 1] = t0 - lo;
        }
    }
    (g, h)
}

/// Solve for the healthy modules' auxiliary torques. Decision vector is
/// `[Mx_aux (3), Mz_aux (3), k (3)]`.
pub fn compensate(p: &CompensationProblem, params: &PlatformParams, cfg: &CompensationConfig) -> CompensationResult {
    let good = good_modules(p.bad);
    let jac = thrust_jacobians(&p.alpha, params.l);
    let d = jac.j_mx.column(p.bad) * p.disturbance.x + jac.j_mz.column(p.bad) * p.disturbance.y;

    let mut h = DMatrix::zeros(9, 9);
    for i in 0..6 {
        h[(i, i)] = 2.0 * cfg.a_diag[i];
    }
    for i in 0..3 {
        h[(6 + i, 6 + i)] = 2.0 * cfg.b_diag[i];
    }
    let mut a_eq = DMatrix::zeros(3, 9);
    for (n, &q) in good.iter().enumerate() {
        a_eq.view_mut((0, n), (3, 1)).copy_from(&jac.j_mx.column(q));
        a_eq.view_mut((0, 3 + n), (3, 1)).copy_from(&jac.j_mz.column(q));
    }
    a_eq.view_mut((0, 6), (3, 3)).fill_with_identity();
    let b_eq = DVector::from_column_slice((-d).as_slice());
    let (g, hv) = propeller_constraints(p, params);

    let mut x0 = DVector::zeros(9);
    x0.rows_mut(6, 3).copy_from(&(-d));
    let problem = QpProblem::new(h, DVector::zeros(9)).with_equality(a_eq, b_eq).with_inequality(g, hv);
    let fallback =
        |status| CompensationResult { good, mx_aux: Vector3::zeros(), mz_aux: Vector3::zeros(), residual: d, status };
    match solve_qp(&problem, Some(&x0), &QpOptions::default()) {
        Ok(sol) if sol.status == QpStatus::Optimal || sol.status == QpStatus::MaxIter => {
            let x = &sol.x;
            CompensationResult {
                good,
                mx_aux: Vector3::new(x[0], x[1], x[2]),
                mz_aux: Vector3::new(x[3], x[4], x[5]),
                residual: -Vector3::new(x[6], x[7], x[8]),
                status: Some(sol.status),
            }
        }
        Ok(sol) => {
            warn!("compensation QP returned {:?}; aux torques zeroed", sol.status);
            fallback(Some(sol.status))
        }
        Err(e) => {
            warn!("compensation QP rejected: {e}");
            fallback(None)
        }
    }
}
