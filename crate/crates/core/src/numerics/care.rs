//! Continuous-time algebraic Riccati equation
//! `AᵀP + PA − PBR⁻¹BᵀP + Q = 0`.
//!
//! The stable invariant subspace of the Hamiltonian is extracted with the
//! scaled matrix sign function, then polished with Newton–Kleinman steps.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    /// Optimal gain `K = R⁻¹BᵀP`, applied as `u = −Kx`.
    pub k: DMatrix<f64>,
    /// Frobenius norm of the Riccati residual.
    pub residual: f64,
}

const SIGN_MAX_ITER: usize = 100;
const NEWTON_STEPS: usize = 4;
const RESIDUAL_TOL: f64 = 1e-8;

pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<CareSolution> {
    let n = a.nrows();
    let m = b.ncols();
    if a.shape() != (n, n) || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Riccati("inconsistent dimensions".into()));
    }
    let r_inv =
        r.clone().cholesky().ok_or_else(|| Error::Riccati("R must be symmetric positive definite".into()))?.inverse();
    let s = b * &r_inv * b.transpose();

    let mut ham = DMatrix::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(a);
    ham.view_mut((0, n), (n, n)).copy_from(&(-&s));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-q));
    ham.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(ham)?;
    let s11 = sign.view((0, 0), (n, n));
    let s12 = sign.view((0, n), (n, n));
    let s21 = sign.view((n, 0), (n, n));
    let s22 = sign.view((n, n), (n, n));
    let eye = DMatrix::<f64>::identity(n, n);

    // [S12; S22 + I] P = −[S11 + I; S21]
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s12);
    lhs.view_mut((n, 0), (n, n)).copy_from(&(s22 + &eye));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(s11 + &eye)));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s21));
    let mut p = lhs.svd(true, true).solve(&rhs, 1e-14).map_err(|e| Error::Riccati(e.to_string()))?;
    p = (&p + p.transpose()) * 0.5;

    // Newton steps in correction form: the update is solved from the current
    // residual, which keeps the accuracy when P is large
    let mut best = (riccati_residual(a, &s, q, &p), p.clone());
    for _ in 0..NEWTON_STEPS {
        if best.0 <= 1e-13 * (1.0 + p.norm()) {
            break;
        }
        let closed = a - &s * &p;
        let res = a.transpose() * &p + &p * a - &p * &s * &p + q;
        let Some(delta) = solve_lyapunov(&closed, &res) else { break };
        p += (&delta + delta.transpose()) * 0.5;
        let r = riccati_residual(a, &s, q, &p);
        if !(r < best.0) {
            break;
        }
        best = (r, p.clone());
    }
    let p = best.1;

    let k = &r_inv * b.transpose() * &p;
    let residual = riccati_residual(a, &s, q, &p);
    if !residual.is_finite() || residual > RESIDUAL_TOL {
        return Err(Error::Riccati(format!("residual {residual:e} above tolerance")));
    }
    if !is_hurwitz(&(a - b * &k)) {
        return Err(Error::Riccati("closed loop not Hurwitz".into()));
    }
    Ok(CareSolution { p, k, residual })
}

fn riccati_residual(a: &DMatrix<f64>, s: &DMatrix<f64>, q: &DMatrix<f64>, p: &DMatrix<f64>) -> f64 {
    (a.transpose() * p + p * a - p * s * p + q).norm()
}

/// Largest real part among the eigenvalues of `m`. Falls back to bisection
/// on the Lyapunov test when the Schur iteration stalls, which happens with
/// repeated eigenvalues.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    if let Some(schur) = m.clone().try_schur(f64::EPSILON, 10_000) {
        return schur.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    }
    let n = m.nrows();
    let bound = m.norm() + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if is_hurwitz(&(m - DMatrix::identity(n, n) * mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * bound {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Lyapunov test: `m` is Hurwitz iff `mᵀX + Xm = −I` has a positive
/// definite solution.
pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    match solve_lyapunov(m, &DMatrix::identity(n, n)) {
        Some(x) => {
            let sym = (&x + x.transpose()) * 0.5;
            x.iter().all(|v| v.is_finite()) && sym.cholesky().is_some()
        }
        None => false,
    }
}

/// Solve `AᵀX + XA = −C` through the Kronecker form. Sized for the small
/// systems used here (n ≤ 20).
pub fn solve_lyapunov(a: &DMatrix<f64>, c: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(&a.transpose()) + a.transpose().kronecker(&eye);
    let rhs = DMatrix::from_column_slice(n * n, 1, (-c).as_slice());
    let x = op.lu().solve(&rhs)?;
    Some(DMatrix::from_column_slice(n, n, x.as_slice()))
}

/// Newton iteration for sign(H) with determinant scaling.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = z.nrows() as f64;
    let mut scaling = true;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let log_det: f64 = (0..z.nrows()).map(|i| lu.u()[(i, i)].abs().ln()).sum();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Riccati("Hamiltonian has eigenvalues on the imaginary axis".into()))?;
        let c = if scaling && log_det.is_finite() { (log_det / dim).exp() } else { 1.0 };
        let next = (&z / c + inv * c) * 0.5;
        let change = (&next - &z).norm();
        let size = next.norm();
        if !size.is_finite() {
            return Err(Error::Riccati("sign iteration diverged".into()));
        }
        z = next;
        if change <= 1e-3 * size {
            scaling = false;
        }
        if change <= 1e-13 * size {
            return Ok(z);
        }
    }
    Err(Error::Riccati("sign iteration did not converge (eigenvalues near the imaginary axis)".into()))
}
