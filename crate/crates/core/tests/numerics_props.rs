use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hingeflight::numerics::{pseudoinverse, solve_care, solve_qp, spectral_abscissa, QpOptions, QpProblem, QpStatus};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn any_matrix() -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..7, 1usize..9).prop_flat_map(|(r, c)| matrix(r, c))
}

/// Random strictly convex QP with a known feasible point.
fn random_qp(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8);
    let me = rng.random_range(0..n.min(3));
    let mi = rng.random_range(0..=8);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
    let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(-0.5..0.5));
    let a_eq = DMatrix::from_fn(me, n, |_, _| rng.random_range(-1.0..1.0));
    let b_eq = &a_eq * &x0;
    let a_in = DMatrix::from_fn(mi, n, |_, _| rng.random_range(-1.0..1.0));
    let b_in = &a_in * &x0 + DVector::from_fn(mi, |_, _| rng.random_range(0.0..0.5));
    let lb = DVector::from_fn(n, |_, _| x0.max() - 2.0 + rng.random_range(-0.5..0.0));
    let ub = DVector::from_fn(n, |_, _| x0.min() + 2.0 + rng.random_range(0.0..0.5));
    QpProblem::new(h, g).with_equality(a_eq, b_eq).with_inequality(a_in, b_in).with_bounds(lb, ub)
}

/// Smallest PBH margin `σ_min([A − λI, B])` over the eigenvalues of `A`
/// with nonnegative real part.
fn unstable_mode_margin(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (n, m) = b.shape();
    a.complex_eigenvalues()
        .iter()
        .filter(|l| l.re >= 0.0)
        .map(|l| {
            let pencil = DMatrix::<Complex<f64>>::from_fn(n, n + m, |r, c| {
                if c < n {
                    Complex::new(a[(r, c)], 0.0) - if r == c { *l } else { Complex::new(0.0, 0.0) }
                } else {
                    Complex::new(b[(r, c - n)], 0.0)
                }
            });
            pencil.svd(false, false).singular_values.min()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Random `(A, B)` whose unstable modes are clearly controllable. Weakly
/// controllable draws give a `P` so large that a 1e-8 residual is below
/// double-precision rounding.
fn stabilizable_pair(n: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let m = rng.random_range(1..=n);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-2.0..2.0));
        if unstable_mode_margin(&a, &b) > 0.5 {
            return (a, b);
        }
    }
}

proptest! {
    #[test]
    fn penrose_conditions(m in any_matrix()) {
        let p = pseudoinverse(&m);
        let mp = &m * &p;
        let pm = &p * &m;
        prop_assert!((&mp * &m - &m).amax() <= 1e-9);
        prop_assert!((&pm * &p - &p).amax() <= 1e-9);
        prop_assert!((mp.transpose() - &mp).amax() <= 1e-9);
        prop_assert!((pm.transpose() - &pm).amax() <= 1e-9);
    }

    #[test]
    fn full_row_rank_right_inverse(m in matrix(6, 8)) {
        let p = pseudoinverse(&m);
        prop_assume!(m.clone().svd(false, false).singular_values.min() > 1e-3);
        prop_assert!((&m * p - DMatrix::identity(6, 6)).amax() <= 1e-10);
    }

    #[test]
    fn qp_invariant_to_row_order_and_scale(seed in any::<u64>(), scale in 0.01..100.0f64, shift in 0usize..8) {
        let p = random_qp(seed);
        let base = solve_qp(&p, None, &QpOptions::default()).unwrap();
        prop_assert_eq!(base.status, QpStatus::Optimal);

        let mut q = p.clone();
        let mi = q.a_in.nrows();
        if mi > 0 {
            let order: Vec<usize> = (0..mi).map(|i| (i + shift) % mi).collect();
            q.a_in = DMatrix::from_fn(mi, q.dim(), |r, c| p.a_in[(order[r], c)]);
            q.b_in = DVector::from_fn(mi, |r, _| p.b_in[order[r]]);
        }
        q.h *= scale;
        q.g *= scale;
        let other = solve_qp(&q, None, &QpOptions::default()).unwrap();
        prop_assert_eq!(other.status, QpStatus::Optimal);
        prop_assert!((&base.x - &other.x).amax() <= 1e-7, "{} vs {}", base.x, other.x);
    }

    #[test]
    fn optimal_points_are_feasible(seed in any::<u64>()) {
        let p = random_qp(seed);
        let s = solve_qp(&p, None, &QpOptions::default()).unwrap();
        prop_assert_eq!(s.status, QpStatus::Optimal);
        prop_assert!((&p.a_eq * &s.x - &p.b_eq).amax() <= 1e-8);
        prop_assert!((&p.a_in * &s.x - &p.b_in).iter().all(|&v| v <= 1e-8));
        prop_assert!(s.x.iter().zip(p.lb.iter()).all(|(x, l)| *x >= l - 1e-8));
        prop_assert!(s.x.iter().zip(p.ub.iter()).all(|(x, u)| *x <= u + 1e-8));
    }

    #[test]
    fn care_stabilizes(n in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = stabilizable_pair(n, &mut rng);
        let m = b.ncols();
        let sol = solve_care(&a, &b, &DMatrix::identity(n, n), &DMatrix::identity(m, m)).unwrap();
        prop_assert!(sol.residual <= 1e-8);
        prop_assert!(spectral_abscissa(&(a - b * sol.k)) < 0.0);
    }
}
