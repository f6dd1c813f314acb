//! LQI tracking on the feedback-linearised platform.
//!
//! With `force = m Rᵀ(u_ξ − G)` and `torque = I u_ν` the platform is a pair
//! of double integrators. The gain comes from the CARE of the 18-state error
//! system `[e_ξ, e_η, ė_ξ, ė_η, ∫e_ξ, ∫e_η]`, where errors are reference
//! minus state.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{rotation_from_euler, PlatformParams, PlatformState, WrenchCommand};
use crate::numerics::{is_hurwitz, solve_care, spectral_abscissa};

type Vector18 = SVector<f64, 18>;
type Matrix6x18 = SMatrix<f64, 6, 18>;

/// Reference sample at the high-level rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub xi_r: Vector3<f64>,
    pub xi_dot_r: Vector3<f64>,
    pub eta_r: Vector3<f64>,
    /// Body angular velocity of the reference attitude.
    pub nu_r: Vector3<f64>,
}

/// Diagonal LQI weights. The state weight is
/// `diag(pos, att, vel, rate, int_pos, int_att)`, the input weight
/// `diag(force, torque)` on the virtual accelerations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LqiWeights {
    pub pos: [f64; 3],
    pub att: [f64; 3],
    pub vel: [f64; 3],
    pub rate: [f64; 3],
    pub int_pos: [f64; 3],
    pub int_att: [f64; 3],
    pub force: [f64; 3],
    pub torque: [f64; 3],
}

impl Default for LqiWeights {
    fn default() -> Self {
        Self {
            pos: [20.0; 3],
            att: [200.0; 3],
            vel: [4.0; 3],
            rate: [2.0; 3],
            int_pos: [10.0; 3],
            int_att: [3.0; 3],
            force: [1.0; 3],
            torque: [0.1; 3],
        }
    }
}

impl LqiWeights {
    fn q_diag(&self) -> Vector18 {
        let groups = [self.pos, self.att, self.vel, self.rate, self.int_pos, self.int_att];
        Vector18::from_iterator(groups.iter().flatten().copied())
    }

    fn r_diag(&self) -> SVector<f64, 6> {
        SVector::<f64, 6>::from_iterator(self.force.iter().chain(self.torque.iter()).copied())
    }

    fn integral_free(&self) -> bool {
        self.int_pos.iter().chain(self.int_att.iter()).all(|&w| w == 0.0)
    }
}

/// Vee map of a 3×3 skew-symmetric matrix.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// `½[R(η)ᵀR(η_r) − R(η_r)ᵀR(η)]∨`.
pub fn attitude_error(eta: &Vector3<f64>, eta_r: &Vector3<f64>) -> Vector3<f64> {
    let r = rotation_from_euler(eta);
    let rr = rotation_from_euler(eta_r);
    rotation_error(&r, &rr)
}

fn rotation_error(r: &Matrix3<f64>, rr: &Matrix3<f64>) -> Vector3<f64> {
    let rel = r.transpose() * rr;
    vee(&(rel - rel.transpose())) * 0.5
}

/// Geodesic angle between the two attitudes, in `[0, π]`.
pub fn attitude_angle_error(eta: &Vector3<f64>, eta_r: &Vector3<f64>) -> f64 {
    let rel = rotation_from_euler(eta).transpose() * rotation_from_euler(eta_r);
    ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Gain and integrator state of the high-level controller.
#[derive(Debug, Clone, PartialEq)]
pub struct LqiState {
    pub k: Matrix6x18,
    pub integral_e_xi: Vector3<f64>,
    pub integral_e_eta: Vector3<f64>,
    /// Riccati residual of the gain design.
    pub care_residual: f64,
    prev_error: Option<(Vector3<f64>, Vector3<f64>)>,
    mass: f64,
    inertia: Matrix3<f64>,
    gravity: Vector3<f64>,
}

impl LqiState {
    pub fn new(params: &PlatformParams, weights: &LqiWeights) -> Result<Self> {
        let (k, care_residual) = design_gain(weights)?;
        Ok(Self {
            k,
            integral_e_xi: Vector3::zeros(),
            integral_e_eta: Vector3::zeros(),
            care_residual,
            prev_error: None,
            mass: params.m_total,
            inertia: params.i_total,
            gravity: params.gravity(),
        })
    }

    pub fn reset(&mut self) {
        self.integral_e_xi = Vector3::zeros();
        self.integral_e_eta = Vector3::zeros();
        self.prev_error = None;
    }

    /// Augmented error state for the given measurement, with the current
    /// integrals.
    pub fn error_state(&self, state: &PlatformState, reference: &Reference) -> Vector18 {
        let (e_xi, e_eta, e_xi_dot, e_eta_dot) = errors(state, reference);
        stack_error(&e_xi, &e_eta, &e_xi_dot, &e_eta_dot, &self.integral_e_xi, &self.integral_e_eta)
    }

    /// One high-level step: update the integrals (trapezoidal rule), then
    /// `ũ = −K X̃` and the feedback-linearising wrench.
    pub fn step(&mut self, state: &PlatformState, reference: &Reference, dt: f64) -> WrenchCommand {
        let (e_xi, e_eta, e_xi_dot, e_eta_dot) = errors(state, reference);
        let (p_xi, p_eta) = self.prev_error.unwrap_or((e_xi, e_eta));
        self.integral_e_xi += (p_xi + e_xi) * (0.5 * dt);
        self.integral_e_eta += (p_eta + e_eta) * (0.5 * dt);
        self.prev_error = Some((e_xi, e_eta));

        let x = stack_error(&e_xi, &e_eta, &e_xi_dot, &e_eta_dot, &self.integral_e_xi, &self.integral_e_eta);
        let u = -(self.k * x);
        let u_xi = Vector3::new(u[0], u[1], u[2]);
        let u_nu = Vector3::new(u[3], u[4], u[5]);
        let r = state.rotation();
        WrenchCommand::new(r.transpose() * (u_xi - self.gravity) * self.mass, self.inertia * u_nu)
    }
}

fn errors(state: &PlatformState, reference: &Reference) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let r = state.rotation();
    let rr = rotation_from_euler(&reference.eta_r);
    let e_xi = reference.xi_r - state.xi;
    let e_xi_dot = reference.xi_dot_r - state.xi_dot;
    let e_eta = rotation_error(&r, &rr);
    let e_eta_dot = r.transpose() * rr * reference.nu_r - state.nu;
    (e_xi, e_eta, e_xi_dot, e_eta_dot)
}

fn stack_error(
    e_xi: &Vector3<f64>,
    e_eta: &Vector3<f64>,
    e_xi_dot: &Vector3<f64>,
    e_eta_dot: &Vector3<f64>,
    i_xi: &Vector3<f64>,
    i_eta: &Vector3<f64>,
) -> Vector18 {
    Vector18::from_iterator([e_xi, e_eta, e_xi_dot, e_eta_dot, i_xi, i_eta].iter().flat_map(|v| v.iter().copied()))
}

/// Augmented error dynamics `(Ã, B̃)`. The errors obey `ë = (reference
/// acceleration) − ũ`, so `B̃` carries `−I` on the rate rows.
pub fn augmented_system() -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = DMatrix::zeros(18, 18);
    let mut b = DMatrix::zeros(18, 6);
    for i in 0..6 {
        a[(i, 6 + i)] = 1.0;
        a[(12 + i, i)] = 1.0;
        b[(6 + i, i)] = -1.0;
    }
    (a, b)
}

fn design_gain(weights: &LqiWeights) -> Result<(Matrix6x18, f64)> {
    let q = weights.q_diag();
    let r = weights.r_diag();
    if q.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || r.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Config("LQI weights must be finite, state weights ≥ 0 and input weights > 0".into()));
    }
    let (a, b) = augmented_system();
    let r_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(r.as_slice()));
    let mut k = Matrix6x18::zeros();
    let residual = if weights.integral_free() {
        // without integral weights the integrator modes are uncontrollable
        // marginal modes; design on the 12-state error system instead
        let a12 = a.view((0, 0), (12, 12)).into_owned();
        let b12 = b.view((0, 0), (12, 6)).into_owned();
        let q12 = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&q.as_slice()[..12]));
        let sol = solve_care(&a12, &b12, &q12, &r_mat)?;
        k.view_mut((0, 0), (6, 12)).copy_from(&sol.k);
        sol.residual
    } else {
        let q_mat = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(q.as_slice()));
        let sol = solve_care(&a, &b, &q_mat, &r_mat)?;
        k.copy_from(&sol.k);
        sol.residual
    };
    Ok((k, residual))
}

fn closed_loop(k: &Matrix6x18) -> DMatrix<f64> {
    let (a, b) = augmented_system();
    a - b * DMatrix::from_column_slice(6, 18, k.as_slice())
}

/// Largest real part of the closed-loop augmented error dynamics.
pub fn closed_loop_abscissa(k: &Matrix6x18) -> f64 {
    spectral_abscissa(&closed_loop(k))
}

pub fn closed_loop_is_hurwitz(k: &Matrix6x18) -> bool {
    is_hurwitz(&closed_loop(k))
}
