//! Dense linear algebra and optimisation kernels.
//!
//! All routines are pure functions on small dense matrices; none keep state
//! between calls.

mod care;
mod linalg;
mod qp;

pub use care::{is_hurwitz, solve_care, solve_lyapunov, spectral_abscissa, CareSolution};
pub use linalg::{nullspace_basis, pseudoinverse, SVD_RELATIVE_CUTOFF};
pub use qp::{solve_qp, solve_qp_warm, QpOptions, QpProblem, QpSolution, QpStatus, WarmStart};
