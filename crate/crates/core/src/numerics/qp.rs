//! Primal active-set solver for small dense convex QPs:
//!
//! ```text
//! min ½ xᵀHx + gᵀx   s.t.  A_eq x = b_eq,  A_in x ≤ b_in,  lb ≤ x ≤ ub
//! ```
//!
//! Subproblems are solved in the nullspace of the working constraints, so a
//! positive semidefinite `H` is handled: zero-curvature descent directions
//! are followed until a constraint blocks them. A feasible starting point is
//! found with an elastic phase-1 program when the warm start is infeasible.

use nalgebra::{DMatrix, DVector};

use super::linalg::{nullspace_basis, pseudoinverse};
use crate::error::{Error, Result};

/// Convex quadratic program. Infinite entries of `lb`/`ub` mean "unbounded".
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
            lb: DVector::from_element(n, f64::NEG_INFINITY),
            ub: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn with_equality(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn with_inequality(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_in = a;
        self.b_in = b;
        self
    }

    pub fn with_bounds(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let bad = |msg: &str| Err(Error::InvalidProblem(msg.to_string()));
        if self.h.shape() != (n, n) {
            return bad("H must be n×n");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality dimensions inconsistent");
        }
        if self.a_in.ncols() != n || self.a_in.nrows() != self.b_in.len() {
            return bad("inequality dimensions inconsistent");
        }
        if self.lb.len() != n || self.ub.len() != n {
            return bad("bound dimensions inconsistent");
        }
        let scale = self.h.amax().max(1.0);
        if (&self.h - self.h.transpose()).amax() > 1e-10 * scale {
            return bad("H must be symmetric");
        }
        if self.lb.iter().zip(self.ub.iter()).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return bad("lb must not exceed ub");
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !finite(&self.h) || !self.g.iter().all(|v| v.is_finite()) || !finite(&self.a_eq) || !finite(&self.a_in) {
            return bad("problem data must be finite");
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Active inequality constraints at the solution, as stable ids usable
    /// in a [`WarmStart`]: `k` for row `k` of `A_in`, `p + j` for `ub[j]`,
    /// `p + n + j` for `lb[j]`.
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

/// Starting point and working-set guess.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WarmStart {
    pub x0: Option<DVector<f64>>,
    pub active: Vec<usize>,
}

/// Solve from an optional starting point.
pub fn solve_qp(p: &QpProblem, x0: Option<&DVector<f64>>, opts: &QpOptions) -> Result<QpSolution> {
    let warm = WarmStart { x0: x0.cloned(), active: Vec::new() };
    solve_qp_warm(p, &warm, opts)
}

pub fn solve_qp_warm(p: &QpProblem, warm: &WarmStart, opts: &QpOptions) -> Result<QpSolution> {
    p.validate()?;
    let n = p.dim();
    let cons = Constraints::build(p);

    let start = match &warm.x0 {
        Some(x) if x.len() == n => x.clone(),
        Some(_) => return Err(Error::InvalidProblem("warm start has wrong dimension".into())),
        None => DVector::zeros(n),
    };

    let (x, phase1_iters) = if cons.max_violation(&start) <= opts.tol {
        (start, 0)
    } else {
        match phase_one(p, &start, opts) {
            Some(found) => found,
            None => {
                let x = clamp_to_box(&start, &p.lb, &p.ub);
                let kkt = cons.max_violation(&x);
                return Ok(QpSolution {
                    x,
                    status: QpStatus::Infeasible,
                    kkt_residual: kkt,
                    iterations: 0,
                    active: Vec::new(),
                });
            }
        }
    };

    let hint: Vec<usize> = warm.active.iter().filter_map(|&id| cons.row_of_id(id)).collect();
    let working = cons.initial_working_set(&x, &hint, opts.tol);
    let run = active_set(&p.h, &p.g, &cons, x, working, opts.max_iter);

    let (kkt, _) = cons.kkt_residual(&p.h, &p.g, &run.x, &run.working);
    let status = match run.outcome {
        Outcome::Converged if kkt <= opts.tol => QpStatus::Optimal,
        Outcome::Converged => QpStatus::MaxIter,
        Outcome::MaxIter => QpStatus::MaxIter,
        Outcome::Unbounded => QpStatus::Unbounded,
    };
    let active = run.working.iter().map(|&r| cons.ids[r]).collect();
    Ok(QpSolution { x: run.x, status, kkt_residual: kkt, iterations: run.iterations + phase1_iters, active })
}

fn clamp_to_box(x: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i].max(lb[i]).min(ub[i]))
}

/// Stacked constraint rows: equalities first, then `a·x ≤ b` rows.
struct Constraints {
    a: DMatrix<f64>,
    b: DVector<f64>,
    n_eq: usize,
    /// Stable warm-start id of each row (equality rows carry `usize::MAX`).
    ids: Vec<usize>,
    /// Coordinate of rows that are plain variable bounds.
    unit: Vec<Option<usize>>,
}

impl Constraints {
    fn build(p: &QpProblem) -> Self {
        let n = p.dim();
        let m = p.a_eq.nrows();
        let k = p.a_in.nrows();
        let mut rows: Vec<(DVector<f64>, f64, usize)> = Vec::new();
        for r in 0..m {
            rows.push((p.a_eq.row(r).transpose(), p.b_eq[r], usize::MAX));
        }
        for r in 0..k {
            rows.push((p.a_in.row(r).transpose(), p.b_in[r], r));
        }
        for j in 0..n {
            if p.ub[j].is_finite() {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                rows.push((e, p.ub[j], k + j));
            }
        }
        for j in 0..n {
            if p.lb[j].is_finite() {
                let mut e = DVector::zeros(n);
                e[j] = -1.0;
                rows.push((e, -p.lb[j], k + n + j));
            }
        }
        let mut a = DMatrix::zeros(rows.len(), n);
        let mut b = DVector::zeros(rows.len());
        let mut ids = Vec::with_capacity(rows.len());
        for (i, (row, rhs, id)) in rows.into_iter().enumerate() {
            a.set_row(i, &row.transpose());
            b[i] = rhs;
            ids.push(id);
        }
        let unit = (0..a.nrows())
            .map(|r| {
                let row = a.row(r);
                let mut nonzero = row.iter().enumerate().filter(|(_, v)| **v != 0.0);
                match (nonzero.next(), nonzero.next()) {
                    (Some((j, v)), None) if v.abs() == 1.0 => Some(j),
                    _ => None,
                }
            })
            .collect();
        Self { a, b, n_eq: m, ids, unit }
    }

    /// Coordinates left free by the equalities and working rows when all of
    /// them are variable bounds; `None` otherwise.
    fn free_coordinates(&self, working: &[usize]) -> Option<Vec<usize>> {
        let n = self.a.ncols();
        let mut fixed = vec![false; n];
        for r in (0..self.n_eq).chain(working.iter().copied()) {
            fixed[self.unit[r]?] = true;
        }
        Some((0..n).filter(|&j| !fixed[j]).collect())
    }

    fn len(&self) -> usize {
        self.b.len()
    }

    fn row_of_id(&self, id: usize) -> Option<usize> {
        self.ids.iter().position(|&x| x == id && x != usize::MAX)
    }

    fn residual(&self, r: usize, x: &DVector<f64>) -> f64 {
        self.a.row(r).dot(&x.transpose()) - self.b[r]
    }

    fn max_violation(&self, x: &DVector<f64>) -> f64 {
        (0..self.len())
            .map(|r| {
                let res = self.residual(r, x);
                if r < self.n_eq {
                    res.abs()
                } else {
                    res.max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    fn working_matrix(&self, working: &[usize]) -> DMatrix<f64> {
        let n = self.a.ncols();
        let mut aw = DMatrix::zeros(self.n_eq + working.len(), n);
        for r in 0..self.n_eq {
            aw.set_row(r, &self.a.row(r));
        }
        for (i, &r) in working.iter().enumerate() {
            aw.set_row(self.n_eq + i, &self.a.row(r));
        }
        aw
    }

    /// Hinted constraints that are active at `x` and linearly independent of
    /// the rows already chosen.
    fn initial_working_set(&self, x: &DVector<f64>, hint: &[usize], tol: f64) -> Vec<usize> {
        let mut working: Vec<usize> = Vec::new();
        let mut rank = rank_of(&self.working_matrix(&working));
        for &r in hint {
            if r < self.n_eq || working.contains(&r) || self.residual(r, x).abs() > tol {
                continue;
            }
            working.push(r);
            let new_rank = rank_of(&self.working_matrix(&working));
            if new_rank > rank {
                rank = new_rank;
            } else {
                working.pop();
            }
        }
        working
    }

    /// Multipliers of the working set and the combined KKT residual
    /// (stationarity, primal feasibility, dual feasibility, complementarity).
    fn kkt_residual(
        &self,
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        x: &DVector<f64>,
        working: &[usize],
    ) -> (f64, DVector<f64>) {
        let grad = h * x + g;
        let aw = self.working_matrix(working);
        let lambda = if aw.nrows() > 0 { pseudoinverse(&aw.transpose()) * (-&grad) } else { DVector::zeros(0) };
        let stationarity = if aw.nrows() > 0 { (&grad + aw.transpose() * &lambda).amax() } else { grad.amax() };
        let mut dual = 0.0f64;
        let mut comp = 0.0f64;
        for (i, &r) in working.iter().enumerate() {
            let l = lambda[self.n_eq + i];
            dual = dual.max(-l);
            comp = comp.max((l * self.residual(r, x)).abs());
        }
        let kkt = stationarity.max(self.max_violation(x)).max(dual).max(comp);
        (kkt, lambda)
    }
}

fn rank_of(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    m.ncols() - nullspace_basis(m).ncols()
}

enum Outcome {
    Converged,
    MaxIter,
    Unbounded,
}

struct Run {
    x: DVector<f64>,
    working: Vec<usize>,
    outcome: Outcome,
    iterations: usize,
}

fn active_set(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    cons: &Constraints,
    mut x: DVector<f64>,
    mut working: Vec<usize>,
    max_iter: usize,
) -> Run {
    let n = x.len();
    let h_scale = h.amax().max(1e-300);

    for iter in 0..max_iter {
        let grad = h * &x + g;
        let aw = cons.working_matrix(&working);
        let z = match cons.free_coordinates(&working) {
            Some(free) => DMatrix::from_fn(n, free.len(), |r, c| if free[c] == r { 1.0 } else { 0.0 }),
            None => nullspace_basis(&aw),
        };

        let mut dir = DVector::zeros(n);
        let mut full_step = true;
        if z.ncols() > 0 {
            let gz = z.transpose() * &grad;
            let hz = z.transpose() * h * &z;
            let hz = (&hz + hz.transpose()) * 0.5;
            let curv_tol = 1e-12 * h_scale;
            // well-conditioned reduced Hessian: plain Newton step
            let newton = hz.clone().cholesky().filter(|c| c.l_dirty().diagonal().min().powi(2) > 1e3 * curv_tol);
            if let Some(chol) = newton {
                dir = &z * chol.solve(&(-&gz));
            } else {
                let eig = hz.symmetric_eigen();
                let mut pz = DVector::zeros(z.ncols());
                let mut flat = DVector::zeros(z.ncols());
                for (k, &ev) in eig.eigenvalues.iter().enumerate() {
                    let v = eig.eigenvectors.column(k);
                    let c = v.dot(&gz);
                    if ev > curv_tol {
                        pz -= v * (c / ev);
                    } else {
                        flat += v * c;
                    }
                }
                if flat.amax() > 1e-14 * grad.amax().max(1.0) {
                    dir = -(&z * flat);
                    full_step = false;
                } else {
                    dir = &z * pz;
                }
            }
        }

        if dir.amax() <= 1e-14 * (1.0 + x.amax()) {
            // stationary on the working set: check inequality multipliers
            if working.is_empty() {
                return Run { x, working, outcome: Outcome::Converged, iterations: iter };
            }
            let lambda = pseudoinverse(&aw.transpose()) * (-&grad);
            let drop_tol = 1e-12 * grad.amax().max(1.0);
            let mut worst: Option<(usize, f64)> = None;
            for i in 0..working.len() {
                let l = lambda[cons.n_eq + i];
                if l < -drop_tol && worst.is_none_or(|(_, w)| l < w) {
                    worst = Some((i, l));
                }
            }
            match worst {
                None => return Run { x, working, outcome: Outcome::Converged, iterations: iter },
                Some((i, _)) => {
                    working.remove(i);
                }
            }
            continue;
        }

        let mut step = if full_step { 1.0 } else { f64::INFINITY };
        let mut blocking = None;
        let dnorm = dir.norm();
        for r in cons.n_eq..cons.len() {
            if working.contains(&r) {
                continue;
            }
            let row = cons.a.row(r);
            let ad = row.dot(&dir.transpose());
            if ad > 1e-14 * row.norm() * dnorm {
                let slack = (cons.b[r] - row.dot(&x.transpose())).max(0.0);
                let s = slack / ad;
                if s < step {
                    step = s;
                    blocking = Some(r);
                }
            }
        }
        if step.is_infinite() {
            return Run { x, working, outcome: Outcome::Unbounded, iterations: iter };
        }
        x += dir * step;
        if let Some(r) = blocking {
            working.push(r);
        }
    }
    Run { x, working, outcome: Outcome::MaxIter, iterations: max_iter }
}

/// Elastic feasibility program. Returns a feasible point (to tolerance) and
/// the iterations used, or `None` when the constraints are inconsistent.
fn phase_one(p: &QpProblem, start: &DVector<f64>, opts: &QpOptions) -> Option<(DVector<f64>, usize)> {
    let n = p.dim();
    let m = p.a_eq.nrows();
    let k = p.a_in.nrows();
    let nz = n + 2 * m + k;
    const PROXIMITY: f64 = 1e-6;

    let x0 = clamp_to_box(start, &p.lb, &p.ub);
    let row_scale = |a: &DMatrix<f64>, r: usize| {
        let s = a.row(r).norm();
        if s > 0.0 {
            1.0 / s
        } else {
            1.0
        }
    };

    let mut h = DMatrix::zeros(nz, nz);
    let mut g = DVector::zeros(nz);
    for i in 0..n {
        h[(i, i)] = PROXIMITY;
        g[i] = -PROXIMITY * x0[i];
    }
    for i in n..nz {
        g[i] = 1.0;
    }

    let mut a_eq = DMatrix::zeros(m, nz);
    let mut b_eq = DVector::zeros(m);
    for r in 0..m {
        let s = row_scale(&p.a_eq, r);
        for j in 0..n {
            a_eq[(r, j)] = p.a_eq[(r, j)] * s;
        }
        a_eq[(r, n + r)] = 1.0;
        a_eq[(r, n + m + r)] = -1.0;
        b_eq[r] = p.b_eq[r] * s;
    }
    let mut a_in = DMatrix::zeros(k, nz);
    let mut b_in = DVector::zeros(k);
    for r in 0..k {
        let s = row_scale(&p.a_in, r);
        for j in 0..n {
            a_in[(r, j)] = p.a_in[(r, j)] * s;
        }
        a_in[(r, n + 2 * m + r)] = -1.0;
        b_in[r] = p.b_in[r] * s;
    }
    let mut lb = DVector::zeros(nz);
    let mut ub = DVector::from_element(nz, f64::INFINITY);
    for j in 0..n {
        lb[j] = p.lb[j];
        ub[j] = p.ub[j];
    }

    let mut z0 = DVector::zeros(nz);
    z0.rows_mut(0, n).copy_from(&x0);
    for r in 0..m {
        let res = b_eq[r] - a_eq.row(r).columns(0, n).dot(&x0.transpose());
        z0[n + r] = res.max(0.0);
        z0[n + m + r] = (-res).max(0.0);
    }
    for r in 0..k {
        let res = a_in.row(r).columns(0, n).dot(&x0.transpose()) - b_in[r];
        z0[n + 2 * m + r] = res.max(0.0);
    }

    let aux = QpProblem { h, g, a_eq, b_eq, a_in, b_in, lb, ub };
    let cons = Constraints::build(&aux);
    let run = active_set(&aux.h, &aux.g, &cons, z0, Vec::new(), opts.max_iter.max(50) * 4);
    let elastic: f64 = run.x.rows(n, nz - n).sum();
    if !matches!(run.outcome, Outcome::Converged) || elastic > opts.tol {
        return None;
    }
    Some((run.x.rows(0, n).into_owned(), run.iterations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> QpOptions {
        QpOptions::default()
    }

    #[test]
    fn equality_only_symmetric() {
        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equality(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0));
        let s = solve_qp(&p, None, &opts()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 0.5).abs() < 1e-12 && (s.x[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn active_upper_bound() {
        // (x − 2)² = x² − 4x + 4
        let p = QpProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, -4.0))
            .with_inequality(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0));
        let s = solve_qp(&p, None, &opts()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        assert_eq!(s.active, vec![0]);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0]);
        let p = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(2)).with_equality(a, b);
        let s = solve_qp(&p, None, &opts()).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn box_and_inequality_infeasible() {
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .with_bounds(DVector::from_element(1, 0.0), DVector::from_element(1, 1.0))
            .with_inequality(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -2.0));
        assert_eq!(solve_qp(&p, None, &opts()).unwrap().status, QpStatus::Infeasible);
    }

    #[test]
    fn semidefinite_linear_objective_hits_bound() {
        // min x₀ with zero curvature, 1 ≤ x₀ ≤ 3
        let p = QpProblem::new(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0))
            .with_bounds(DVector::from_element(1, 1.0), DVector::from_element(1, 3.0));
        let s = solve_qp(&p, Some(&DVector::from_element(1, 2.5)), &opts()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unbounded_reported() {
        let p = QpProblem::new(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0));
        assert_eq!(solve_qp(&p, None, &opts()).unwrap().status, QpStatus::Unbounded);
    }

    #[test]
    fn invalid_problems_rejected() {
        let p = QpProblem::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), DVector::zeros(2));
        assert!(solve_qp(&p, None, &opts()).is_err());
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .with_bounds(DVector::from_element(1, 1.0), DVector::from_element(1, 0.0));
        assert!(solve_qp(&p, None, &opts()).is_err());
    }

    #[test]
    fn warm_start_reuses_active_set() {
        let p = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::from_column_slice(&[-4.0, -4.0]))
            .with_bounds(DVector::from_element(2, -1.0), DVector::from_element(2, 1.0));
        let cold = solve_qp(&p, None, &opts()).unwrap();
        assert_eq!(cold.status, QpStatus::Optimal);
        let warm = WarmStart { x0: Some(cold.x.clone()), active: cold.active.clone() };
        let hot = solve_qp_warm(&p, &warm, &opts()).unwrap();
        assert_eq!(hot.x, cold.x);
        assert!(hot.iterations <= 1);
    }
}
