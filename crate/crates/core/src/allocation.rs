//! Wrench allocation: desired body wrench to hinge angles and module thrusts.
//!
//! Both allocators work on the intermediate forces `F` (see
//! [`crate::model::inputs_to_forces`]), in which the wrench map becomes the
//! constant matrix `W`. The nominal allocator takes the minimum-norm
//! solution. The nullspace allocator solves a linearised QP over input
//! increments with box and rate limits, then projects back onto the exact
//! solution set `{F : W F = u}`.

use std::f64::consts::FRAC_PI_2;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::model::{forces_to_inputs, inputs_to_forces, Matrix6x8, PlatformParams, Vector8, WrenchCommand, NUM_QUADS};
use crate::numerics::{nullspace_basis, pseudoinverse, solve_qp_warm, QpOptions, QpProblem, QpStatus, WarmStart};

pub type Matrix8 = SMatrix<f64, 8, 8>;
type Matrix8x6 = SMatrix<f64, 8, 6>;
type Matrix8x2 = SMatrix<f64, 8, 2>;
type Matrix6 = SMatrix<f64, 6, 6>;

/// Allocation matrix `W` with `W F = [J_ξ T; J_ν T]`.
pub fn build_w(l: f64) -> Matrix6x8 {
    let mut w = Matrix6x8::zeros();
    // force rows
    w[(0, 0)] = -1.0;
    w[(0, 4)] = 1.0;
    w[(1, 2)] = 1.0;
    w[(1, 6)] = -1.0;
    for i in 0..NUM_QUADS {
        w[(2, 2 * i + 1)] = 1.0;
        w[(5, 2 * i)] = l;
    }
    // torque rows
    w[(3, 1)] = -l;
    w[(3, 5)] = l;
    w[(4, 3)] = l;
    w[(4, 7)] = -l;
    w
}

/// `∂F/∂X` for `X = [α; T]`. Column `i` is `∂F/∂α_i`, column `4 + i` is
/// `∂F/∂T_i`; only the two rows of module `i` are nonzero.
pub fn force_jacobian(alpha: &Vector4<f64>, thrust: &Vector4<f64>) -> Matrix8 {
    let mut j = Matrix8::zeros();
    for i in 0..NUM_QUADS {
        let (s, c) = alpha[i].sin_cos();
        j[(2 * i, i)] = c * thrust[i];
        j[(2 * i + 1, i)] = -s * thrust[i];
        j[(2 * i, 4 + i)] = s;
        j[(2 * i + 1, 4 + i)] = c;
    }
    j
}

/// Box and per-step rate limits on `X = [α; T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationLimits {
    pub t_max: Vector4<f64>,
    pub t_min: Vector4<f64>,
    pub alpha_min: Vector4<f64>,
    pub alpha_max: Vector4<f64>,
    /// Largest step of each component of `X` per allocation call.
    pub dx_max: Vector8,
}

impl AllocationLimits {
    pub fn nominal(params: &PlatformParams, cfg: &AllocationConfig) -> Self {
        let mut dx_max = Vector8::zeros();
        for i in 0..NUM_QUADS {
            dx_max[i] = cfg.d_alpha_max;
            dx_max[4 + i] = cfg.d_thrust_max;
        }
        Self {
            t_max: Vector4::repeat(4.0 * params.t_max),
            t_min: Vector4::zeros(),
            alpha_min: Vector4::repeat(cfg.alpha_min),
            alpha_max: Vector4::repeat(cfg.alpha_max),
            dx_max,
        }
    }

    pub fn x_min(&self) -> Vector8 {
        stack(&self.alpha_min, &self.t_min)
    }

    pub fn x_max(&self) -> Vector8 {
        stack(&self.alpha_max, &self.t_max)
    }

    pub fn is_valid(&self) -> bool {
        (0..NUM_QUADS).all(|i| self.t_min[i] <= self.t_max[i] && self.alpha_min[i] <= self.alpha_max[i])
            && self.dx_max.iter().all(|&v| v > 0.0)
    }
}

/// Re-linearisation passes after the first allocation QP.
pub const REFINE_PASSES: usize = 20;
const BOX_TOL: f64 = 1e-9;
/// Refinement passes only restore feasibility, so slack is made expensive
/// enough that an in-region exact point is preferred whenever one exists.
const REFINE_SLACK_SCALE: f64 = 1e6;

struct Refinement {
    /// Projected forces whose inputs lie inside the region.
    exact: Option<Vector8>,
    /// Projection of the last pass, inside the region or not.
    projected: Vector8,
    x_qp: Vector8,
    slack: Vector8,
    /// Status and warm start of the first pass.
    status: Option<QpStatus>,
    warm: NullspaceWarmStart,
    passes: usize,
}

fn clamp(x: &Vector8, lo: &Vector8, hi: &Vector8) -> Vector8 {
    x.zip_zip_map(lo, hi, |v, lo, hi| v.max(lo).min(hi))
}

fn stack(alpha: &Vector4<f64>, thrust: &Vector4<f64>) -> Vector8 {
    Vector8::from_iterator(alpha.iter().chain(thrust.iter()).copied())
}

/// Allocator tuning, as read from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    /// Diagonal of the increment weight `P`.
    pub p_diag: [f64; 8],
    /// Diagonal of the slack weight `Q`.
    pub q_diag: [f64; 8],
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub d_alpha_max: f64,
    pub d_thrust_max: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            p_diag: [1.0; 8],
            q_diag: [1.0e3; 8],
            alpha_min: -FRAC_PI_2,
            alpha_max: FRAC_PI_2,
            d_alpha_max: 0.1,
            d_thrust_max: 0.2,
            qp_tol: 1e-8,
            qp_max_iter: 200,
        }
    }
}

/// Result of one allocation call.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSolution {
    pub alpha: Vector4<f64>,
    pub thrust: Vector4<f64>,
    pub f: Vector8,
    pub u_achieved: WrenchCommand,
    pub slack_norm: f64,
    /// Set when a limit is active in the QP or the QP did not solve cleanly.
    pub constrained: bool,
    pub qp_status: Option<QpStatus>,
    /// Increment and active set, for warm-starting the next call.
    pub warm: NullspaceWarmStart,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NullspaceWarmStart {
    pub delta_x: Vector8,
    pub active: Vec<usize>,
}

/// Holds the constant allocation data; all solves are `&self`.
#[derive(Debug, Clone)]
pub struct Allocator {
    w: Matrix6x8,
    w_pinv: Matrix8x6,
    n_w: Matrix8x2,
    /// `N_W N_W†`, the orthogonal projector onto the nullspace of `W`.
    null_projector: Matrix8,
    /// `(I − N_W N_W†) W†`.
    range_map: Matrix8x6,
    p: Matrix8,
    /// Cheapest slack closing a residual `r` is `slack_gain · r`, at cost
    /// `rᵀ slack_metric r`: `(W Q⁻¹ Wᵀ)⁻¹` and `Q⁻¹ Wᵀ (W Q⁻¹ Wᵀ)⁻¹`.
    slack_metric: Matrix6,
    slack_gain: Matrix8x6,
    qp: QpOptions,
}

impl Allocator {
    pub fn new(params: &PlatformParams, cfg: &AllocationConfig) -> Self {
        Self::with_matrix(build_w(params.l), cfg)
    }

    /// Build around an arbitrary full-row-rank 6×8 allocation matrix.
    pub fn with_matrix(w: Matrix6x8, cfg: &AllocationConfig) -> Self {
        let wd = DMatrix::from_column_slice(6, 8, w.as_slice());
        let w_pinv_d = pseudoinverse(&wd);
        let n_d = nullspace_basis(&wd);
        assert_eq!(n_d.ncols(), 2, "allocation matrix must have full row rank");
        let n_pinv_d = pseudoinverse(&n_d);

        let w_pinv = Matrix8x6::from_column_slice(w_pinv_d.as_slice());
        let n_w = Matrix8x2::from_column_slice(n_d.as_slice());
        let n_pinv = SMatrix::<f64, 2, 8>::from_column_slice(n_pinv_d.as_slice());
        let null_projector = n_w * n_pinv;
        let range_map = (Matrix8::identity() - null_projector) * w_pinv;
        let q_inv = Matrix8::from_diagonal(&Vector8::from(cfg.q_diag).map(|v| 1.0 / v));
        let slack_metric = (w * q_inv * w.transpose()).try_inverse().expect("W has full row rank");
        Self {
            w,
            w_pinv,
            n_w,
            null_projector,
            range_map,
            p: Matrix8::from_diagonal(&Vector8::from(cfg.p_diag)),
            slack_gain: q_inv * w.transpose() * slack_metric,
            slack_metric,
            qp: QpOptions { tol: cfg.qp_tol, max_iter: cfg.qp_max_iter },
        }
    }

    pub fn w(&self) -> &Matrix6x8 {
        &self.w
    }

    pub fn w_pinv(&self) -> &Matrix8x6 {
        &self.w_pinv
    }

    pub fn nullspace(&self) -> &Matrix8x2 {
        &self.n_w
    }

    /// Nominal force-decomposition allocation `F = W†u + N_W Z`. No limits
    /// are considered.
    pub fn fd_allocate(&self, u_d: &WrenchCommand, z: &Vector2<f64>, alpha_prev: &Vector4<f64>) -> AllocationSolution {
        let f = self.w_pinv * u_d.to_vector() + self.n_w * z;
        let (alpha, thrust) = forces_to_inputs(&f, alpha_prev);
        AllocationSolution {
            alpha,
            thrust,
            f,
            u_achieved: WrenchCommand::from_vector(&(self.w * f)),
            slack_norm: 0.0,
            constrained: false,
            qp_status: None,
            warm: NullspaceWarmStart::default(),
        }
    }

    /// Project intermediate forces onto `{F : W F = u}` along the range of `W`ᵀ,
    /// keeping their nullspace component.
    pub fn project(&self, u_d: &WrenchCommand, f: &Vector8) -> Vector8 {
        self.range_map * u_d.to_vector() + self.null_projector * f
    }

    /// Constrained nullspace-based allocation around the previous inputs.
    ///
    /// The projected solution is exact but can leave its bounds by the
    /// linearisation error, so it is re-linearised up to [`REFINE_PASSES`]
    /// times. The search first stays inside the rate window around the
    /// previous inputs, then widens to the plain box. If the command cannot be
    /// met inside the box at all, the exact projection is returned anyway and
    /// its inputs exceed the limits; the low-level loop saturates them.
    pub fn nullspace_allocate(
        &self,
        u_d: &WrenchCommand,
        alpha_prev: &Vector4<f64>,
        thrust_prev: &Vector4<f64>,
        limits: &AllocationLimits,
        warm: &NullspaceWarmStart,
    ) -> AllocationSolution {
        let x_min = limits.x_min();
        let x_max = limits.x_max();
        let raw_prev = stack(alpha_prev, thrust_prev);
        let x_prev = clamp(&raw_prev, &x_min, &x_max);
        if (x_prev - raw_prev).amax() > 1e-9 {
            debug!("previous allocation outside limits, clamped by {:.3e}", (x_prev - raw_prev).amax());
        }
        let lo = x_min.sup(&(x_prev - limits.dx_max));
        let hi = x_max.inf(&(x_prev + limits.dx_max));

        let windowed = self.refine(u_d, &x_prev, &lo, &hi, warm, true);
        let (status, warm_out) = (windowed.status, windowed.warm.clone());
        let bound_active = (0..8).any(|i| {
            let x = x_prev[i] + windowed.warm.delta_x[i];
            x <= lo[i] + 1e-12 && lo[i] < x_prev[i] || x >= hi[i] - 1e-12 && hi[i] > x_prev[i]
        });
        let (result, widened) = match windowed.exact {
            Some(_) => (windowed, false),
            None => (self.refine(u_d, &x_prev, &x_min, &x_max, &NullspaceWarmStart::default(), false), true),
        };
        let (f, exact) = match result.exact {
            Some(f) => (f, true),
            None => {
                debug!("command unreachable inside limits, returning the unbounded projection");
                (result.projected, false)
            }
        };
        let (alpha, thrust) = forces_to_inputs(&f, &result.x_qp.fixed_rows::<4>(0).into_owned());
        AllocationSolution {
            alpha,
            thrust,
            f,
            u_achieved: WrenchCommand::from_vector(&(self.w * f)),
            slack_norm: result.slack.norm(),
            constrained: status != Some(QpStatus::Optimal) || bound_active || widened || !exact || result.passes > 0,
            qp_status: status,
            warm: warm_out,
        }
    }

    /// Linearise, solve and project until the projected inputs land in
    /// `[lo, hi]`. With `early_exit`, gives up once the excess stops
    /// contracting, which is how an out-of-reach command shows up.
    fn refine(
        &self,
        u_d: &WrenchCommand,
        x_start: &Vector8,
        lo: &Vector8,
        hi: &Vector8,
        warm: &NullspaceWarmStart,
        early_exit: bool,
    ) -> Refinement {
        let mut x_lin = *x_start;
        let mut last_excess = f64::INFINITY;
        let mut out = Refinement {
            exact: None,
            projected: inputs_to_forces(
                &x_start.fixed_rows::<4>(0).into_owned(),
                &x_start.fixed_rows::<4>(4).into_owned(),
            ),
            x_qp: *x_start,
            slack: Vector8::zeros(),
            status: None,
            warm: NullspaceWarmStart::default(),
            passes: 0,
        };
        for pass in 0..=REFINE_PASSES {
            let alpha_o = x_lin.fixed_rows::<4>(0).into_owned();
            let thrust_o = x_lin.fixed_rows::<4>(4).into_owned();
            let jac = force_jacobian(&alpha_o, &thrust_o);
            let rhs = u_d.to_vector() - self.w * inputs_to_forces(&alpha_o, &thrust_o);
            let (lb, ub) = (lo - x_lin, hi - x_lin);
            let start = if pass == 0 { warm.clone() } else { NullspaceWarmStart::default() };
            let (delta_x, slack, status, active) = self
                .solve_increment(&jac, &rhs, &lb, &ub, &start, if pass == 0 { 1.0 } else { REFINE_SLACK_SCALE })
                .unwrap_or((Vector8::zeros(), Vector8::zeros(), None, Vec::new()));
            if pass == 0 {
                if status != Some(QpStatus::Optimal) {
                    debug!("allocation QP status {status:?}");
                }
                out.status = status;
                out.warm = NullspaceWarmStart { delta_x, active };
            }
            out.passes = pass;
            out.slack = slack;
            out.x_qp = clamp(&(x_lin + delta_x), lo, hi);

            let f_lin =
                inputs_to_forces(&out.x_qp.fixed_rows::<4>(0).into_owned(), &out.x_qp.fixed_rows::<4>(4).into_owned());
            out.projected = self.project(u_d, &f_lin);
            let (alpha, thrust) = forces_to_inputs(&out.projected, &out.x_qp.fixed_rows::<4>(0).into_owned());
            let x = stack(&alpha, &thrust);
            let excess = (x - hi).sup(&(lo - x)).max();
            if excess <= BOX_TOL {
                out.exact = Some(out.projected);
                break;
            }
            if early_exit && excess > 0.5 * last_excess {
                break;
            }
            last_excess = excess;
            x_lin = x;
        }
        out
    }

    #[allow(clippy::type_complexity)]
    fn solve_increment(
        &self,
        jac: &Matrix8,
        rhs: &SVector<f64, 6>,
        lb: &Vector8,
        ub: &Vector8,
        warm: &NullspaceWarmStart,
        slack_scale: f64,
    ) -> Option<(Vector8, Vector8, Option<QpStatus>, Vec<usize>)> {
        // min Δxᵀ P Δx + sᵀ Q s  s.t.  W J Δx + W s = rhs, lb ≤ Δx ≤ ub,
        // with the slack eliminated in closed form
        let wj = self.w * jac;
        let metric = self.slack_metric * slack_scale;
        let h = (self.p + wj.transpose() * metric * wj) * 2.0;
        let g = wj.transpose() * metric * rhs * -2.0;
        let problem =
            QpProblem::new(DMatrix::from_column_slice(8, 8, h.as_slice()), DVector::from_column_slice(g.as_slice()))
                .with_bounds(DVector::from_column_slice(lb.as_slice()), DVector::from_column_slice(ub.as_slice()));
        let dx0 = warm.delta_x.zip_zip_map(lb, ub, |v, lo, hi| v.max(lo).min(hi));
        let start = WarmStart { x0: Some(DVector::from_column_slice(dx0.as_slice())), active: warm.active.clone() };
        match solve_qp_warm(&problem, &start, &self.qp) {
            Ok(sol) => {
                let dx = Vector8::from_column_slice(sol.x.as_slice());
                let s = self.slack_gain * (rhs - wj * dx);
                Some((dx, s, Some(sol.status), sol.active))
            }
            Err(e) => {
                warn!("allocation QP rejected: {e}");
                None
            }
        }
    }
}
