//! Physical model of the hinged four-quadcopter platform.
//!
//! Everything here is shared by the simulator and the controllers: the
//! parameter set, the platform state, the thrust Jacobians of the central
//! frame, the per-quadcopter propeller mixing, and the force-decomposition
//! change of variables used by the allocators.

use std::f64::consts::SQRT_2;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, SMatrix, SVector, UnitQuaternion, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector6 = SVector<f64, 6>;
pub type Vector8 = SVector<f64, 8>;
pub type Matrix3x4 = SMatrix<f64, 3, 4>;
pub type Matrix6x8 = SMatrix<f64, 6, 8>;

/// Number of quadcopter modules on the frame.
pub const NUM_QUADS: usize = 4;

/// Sign pattern of the propeller columns of the mixing matrix:
/// `(roll, pitch, yaw)` sign of propeller `j`.
pub const PROP_SIGNS: [(f64, f64, f64); 4] = [(-1.0, 1.0, 1.0), (-1.0, -1.0, -1.0), (1.0, -1.0, 1.0), (1.0, 1.0, -1.0)];

/// Serializable parameter file section. Inertias are given as diagonals in
/// kg·m²; derived quantities are filled in by [`PlatformParams::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformConfig {
    pub m_frame: f64,
    pub m_quad: f64,
    pub i_frame: [f64; 3],
    pub i_quad: [f64; 3],
    /// Overrides the composite platform inertia when set.
    pub i_total: Option<[f64; 3]>,
    pub l: f64,
    pub a: f64,
    pub c_tau: f64,
    pub t_max: f64,
    pub g: f64,
    pub comm_delay: f64,
    pub hl_rate: f64,
    pub ll_rate: f64,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            m_frame: 0.036,
            m_quad: 0.027,
            i_frame: [3.0e-4, 3.0e-4, 4.5e-4],
            i_quad: [1.6e-5, 1.6e-5, 2.9e-5],
            i_total: None,
            l: 0.14,
            a: 0.046,
            c_tau: 0.006,
            t_max: 0.167,
            g: 9.81,
            comm_delay: 0.02,
            hl_rate: 100.0,
            ll_rate: 500.0,
        }
    }
}

/// Physical and software constants of the platform.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformParams {
    pub m_frame: f64,
    pub m_quad: f64,
    pub m_total: f64,
    pub i_frame: Matrix3<f64>,
    pub i_quad: Matrix3<f64>,
    pub i_total: Matrix3<f64>,
    pub l: f64,
    pub a: f64,
    pub b: f64,
    pub c_tau: f64,
    pub t_max: f64,
    pub g: f64,
    pub comm_delay: f64,
    pub hl_rate: f64,
    pub ll_rate: f64,
}

impl Default for PlatformParams {
    fn default() -> Self {
        Self::new(&PlatformConfig::default()).expect("default platform parameters are valid")
    }
}

impl PlatformParams {
    pub fn new(cfg: &PlatformConfig) -> Result<Self> {
        let positive = [
            ("m_frame", cfg.m_frame),
            ("m_quad", cfg.m_quad),
            ("l", cfg.l),
            ("a", cfg.a),
            ("c_tau", cfg.c_tau),
            ("t_max", cfg.t_max),
            ("g", cfg.g),
            ("hl_rate", cfg.hl_rate),
            ("ll_rate", cfg.ll_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("platform.{name} must be positive, got {v}")));
            }
        }
        if !(cfg.comm_delay.is_finite() && cfg.comm_delay >= 0.0) {
            return Err(Error::Config("platform.comm_delay must be nonnegative".into()));
        }
        let diag_ok = |d: &[f64; 3]| d.iter().all(|v| v.is_finite() && *v > 0.0);
        if !diag_ok(&cfg.i_frame) || !diag_ok(&cfg.i_quad) || !cfg.i_total.as_ref().is_none_or(diag_ok) {
            return Err(Error::Config("inertia diagonals must be positive".into()));
        }

        let m_total = cfg.m_frame + 4.0 * cfg.m_quad;
        let i_frame = Matrix3::from_diagonal(&Vector3::from(cfg.i_frame));
        let i_quad = Matrix3::from_diagonal(&Vector3::from(cfg.i_quad));
        let i_total = match cfg.i_total {
            Some(d) => Matrix3::from_diagonal(&Vector3::from(d)),
            None => composite_inertia(&i_frame, &i_quad, cfg.m_quad, cfg.l),
        };
        Ok(Self {
            m_frame: cfg.m_frame,
            m_quad: cfg.m_quad,
            m_total,
            i_frame,
            i_quad,
            i_total,
            l: cfg.l,
            a: cfg.a,
            b: cfg.a / SQRT_2,
            c_tau: cfg.c_tau,
            t_max: cfg.t_max,
            g: cfg.g,
            comm_delay: cfg.comm_delay,
            hl_rate: cfg.hl_rate,
            ll_rate: cfg.ll_rate,
        })
    }

    /// Hinge-axis inertia `I^y` of one quadcopter module.
    pub fn hinge_inertia(&self) -> f64 {
        self.i_quad[(1, 1)]
    }

    /// Per-quad thrust that balances gravity with level hinges.
    pub fn hover_thrust(&self) -> f64 {
        self.m_total * self.g / NUM_QUADS as f64
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.g)
    }
}

/// Frame inertia plus the four modules treated as rigid bodies at level
/// hinges, offset by `l` along the body x/y axes.
fn composite_inertia(i_frame: &Matrix3<f64>, i_quad: &Matrix3<f64>, m_quad: f64, l: f64) -> Matrix3<f64> {
    let mut total = *i_frame;
    for i in 0..NUM_QUADS {
        // modules 1 and 3 have their hinge along body x, so their x/y axes swap
        let local = if i % 2 == 1 {
            Matrix3::from_diagonal(&Vector3::new(i_quad[(1, 1)], i_quad[(0, 0)], i_quad[(2, 2)]))
        } else {
            *i_quad
        };
        let d = module_offset(i, l);
        let parallel = (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * m_quad;
        total += local + parallel;
    }
    total
}

/// Position of module `i` relative to the frame centre.
pub fn module_offset(i: usize, l: f64) -> Vector3<f64> {
    match i % 4 {
        0 => Vector3::new(0.0, -l, 0.0),
        1 => Vector3::new(-l, 0.0, 0.0),
        2 => Vector3::new(0.0, l, 0.0),
        _ => Vector3::new(l, 0.0, 0.0),
    }
}

/// Full platform state. `eta` is kept in sync with `attitude_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlatformState {
    pub xi: Vector3<f64>,
    pub eta: Vector3<f64>,
    pub attitude_q: UnitQuaternion<f64>,
    pub xi_dot: Vector3<f64>,
    pub nu: Vector3<f64>,
    pub alpha: Vector4<f64>,
    pub alpha_dot: Vector4<f64>,
}

impl Default for PlatformState {
    fn default() -> Self {
        Self {
            xi: Vector3::zeros(),
            eta: Vector3::zeros(),
            attitude_q: UnitQuaternion::identity(),
            xi_dot: Vector3::zeros(),
            nu: Vector3::zeros(),
            alpha: Vector4::zeros(),
            alpha_dot: Vector4::zeros(),
        }
    }
}

impl PlatformState {
    pub fn with_attitude(mut self, eta: Vector3<f64>) -> Self {
        self.attitude_q = UnitQuaternion::from_euler_angles(eta.x, eta.y, eta.z);
        self.sync_eta();
        self
    }

    /// Body-to-world rotation.
    pub fn rotation(&self) -> Matrix3<f64> {
        self.attitude_q.to_rotation_matrix().into_inner()
    }

    pub fn sync_eta(&mut self) {
        let (roll, pitch, yaw) = self.attitude_q.euler_angles();
        self.eta = Vector3::new(roll, pitch, yaw);
    }

    pub fn is_finite(&self) -> bool {
        self.xi.iter().all(|v| v.is_finite())
            && self.xi_dot.iter().all(|v| v.is_finite())
            && self.nu.iter().all(|v| v.is_finite())
            && self.alpha.iter().all(|v| v.is_finite())
            && self.alpha_dot.iter().all(|v| v.is_finite())
            && self.attitude_q.coords.iter().all(|v| v.is_finite())
    }
}

/// Roll-pitch-yaw (Z-Y-X) Euler angles to rotation matrix.
pub fn rotation_from_euler(eta: &Vector3<f64>) -> Matrix3<f64> {
    UnitQuaternion::from_euler_angles(eta.x, eta.y, eta.z).to_rotation_matrix().into_inner()
}

/// Desired body-frame force and torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrenchCommand {
    pub force: Vector3<f64>,
    pub torque: Vector3<f64>,
}

impl WrenchCommand {
    pub fn new(force: Vector3<f64>, torque: Vector3<f64>) -> Self {
        Self { force, torque }
    }

    pub fn from_vector(v: &Vector6) -> Self {
        Self { force: Vector3::new(v[0], v[1], v[2]), torque: Vector3::new(v[3], v[4], v[5]) }
    }

    pub fn to_vector(&self) -> Vector6 {
        Vector6::from_iterator(self.force.iter().chain(self.torque.iter()).copied())
    }
}

/// Command sent from the high level to one quadcopter module.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadCommand {
    pub thrust: f64,
    pub alpha_ref: f64,
    pub mx_aux: f64,
    pub mz_aux: f64,
}

impl QuadCommand {
    /// Clamps the thrust into `[0, 4·t_max]`.
    pub fn new(thrust: f64, alpha_ref: f64, t_max: f64) -> Self {
        Self { thrust: thrust.clamp(0.0, 4.0 * t_max), alpha_ref, mx_aux: 0.0, mz_aux: 0.0 }
    }
}

/// Thrusts of the four propellers of one module, in newtons.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropellerThrusts {
    pub t: Vector4<f64>,
}

impl PropellerThrusts {
    pub fn new(t: Vector4<f64>) -> Self {
        Self { t }
    }

    pub fn uniform(v: f64) -> Self {
        Self { t: Vector4::repeat(v) }
    }

    /// Clamp into `[0, t_max]`; the flag reports whether anything moved.
    pub fn saturate(raw: Vector4<f64>, t_max: f64) -> (Self, bool) {
        let clamped = raw.map(|v| v.clamp(0.0, t_max));
        let saturated = (clamped - raw).amax() > 1e-15;
        (Self { t: clamped }, saturated)
    }
}

/// Collective output of one module: thrust and body torques in its own frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadOutputs {
    pub thrust: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
}

impl QuadOutputs {
    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.mx, self.my, self.mz)
    }
}

/// The 4×4 propeller mixing matrix mapping `t` to `(T, Mx, My, Mz)`.
pub fn mixing_matrix(b: f64, c_tau: f64) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for (j, (sx, sy, sz)) in PROP_SIGNS.iter().enumerate() {
        m[(0, j)] = 1.0;
        m[(1, j)] = sx * b;
        m[(2, j)] = sy * b;
        m[(3, j)] = sz * c_tau;
    }
    m
}

pub fn quad_mixing(t: &PropellerThrusts, params: &PlatformParams) -> QuadOutputs {
    let v = mixing_matrix(params.b, params.c_tau) * t.t;
    QuadOutputs { thrust: v[0], mx: v[1], my: v[2], mz: v[3] }
}

/// Unsaturated inverse of the mixing matrix. Its rows are mutually
/// orthogonal, so the inverse is the scaled transpose.
pub fn mix_inverse_raw(out: &QuadOutputs, b: f64, c_tau: f64) -> Vector4<f64> {
    Vector4::from_fn(|j, _| {
        let (sx, sy, sz) = PROP_SIGNS[j];
        out.thrust / 4.0 + sx * out.mx / (4.0 * b) + sy * out.my / (4.0 * b) + sz * out.mz / (4.0 * c_tau)
    })
}

/// Inverse mixing followed by propeller saturation.
pub fn mix_inverse(out: &QuadOutputs, params: &PlatformParams) -> (PropellerThrusts, bool) {
    PropellerThrusts::saturate(mix_inverse_raw(out, params.b, params.c_tau), params.t_max)
}

/// Geometry-dependent Jacobians of the central frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrustJacobians {
    pub j_xi: Matrix3x4,
    /// Includes the arm length factor `l`.
    pub j_nu: Matrix3x4,
    pub j_mx: Matrix3x4,
    pub j_mz: Matrix3x4,
}

pub fn thrust_jacobians(alpha: &Vector4<f64>, l: f64) -> ThrustJacobians {
    let s = alpha.map(f64::sin);
    let c = alpha.map(f64::cos);
    #[rustfmt::skip]
    let j_xi = Matrix3x4::new(
        -s[0], 0.0,  s[2], 0.0,
        0.0,   s[1], 0.0,  -s[3],
        c[0],  c[1], c[2], c[3],
    );
    #[rustfmt::skip]
    let j_mx = Matrix3x4::new(
        -c[0], 0.0,  c[2], 0.0,
        0.0,   c[1], 0.0,  -c[3],
        s[0],  s[1], s[2], s[3],
    );
    #[rustfmt::skip]
    let j_mz = Matrix3x4::new(
        s[0], 0.0,   -s[2], 0.0,
        0.0,  -s[1], 0.0,   s[3],
        c[0], c[1],  c[2],  c[3],
    );
    ThrustJacobians { j_xi, j_nu: j_mx * l, j_mx, j_mz }
}

/// Body wrench produced by hinge angles `alpha` and module thrusts `thrust`.
pub fn wrench_from_inputs(alpha: &Vector4<f64>, thrust: &Vector4<f64>, params: &PlatformParams) -> WrenchCommand {
    let j = thrust_jacobians(alpha, params.l);
    WrenchCommand::new(j.j_xi * thrust, j.j_nu * thrust)
}

/// `F = [Fs0, Fc0, …, Fs3, Fc3]` with `Fs = sin α·T`, `Fc = cos α·T`.
pub fn inputs_to_forces(alpha: &Vector4<f64>, thrust: &Vector4<f64>) -> Vector8 {
    let mut f = Vector8::zeros();
    for i in 0..NUM_QUADS {
        f[2 * i] = alpha[i].sin() * thrust[i];
        f[2 * i + 1] = alpha[i].cos() * thrust[i];
    }
    f
}

/// Recover `(alpha, T)` from intermediate forces. A module with zero force
/// keeps its previous angle so the hinge reference stays continuous.
pub fn forces_to_inputs(f: &Vector8, alpha_prev: &Vector4<f64>) -> (Vector4<f64>, Vector4<f64>) {
    let mut alpha = Vector4::zeros();
    let mut thrust = Vector4::zeros();
    for i in 0..NUM_QUADS {
        let (fs, fc) = (f[2 * i], f[2 * i + 1]);
        if fs == 0.0 && fc == 0.0 {
            alpha[i] = alpha_prev[i];
        } else {
            thrust[i] = fs.hypot(fc);
            alpha[i] = fs.atan2(fc);
        }
    }
    (alpha, thrust)
}

/// Set of failed propellers on one module, as a bitmask over indices 0..3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PropellerSet(u8);

impl PropellerSet {
    pub const EMPTY: Self = Self(0);

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut bits = 0u8;
        for &j in indices {
            if j > 3 {
                return Err(Error::InvalidPropeller(j));
            }
            bits |= 1 << j;
        }
        Ok(Self(bits))
    }

    pub fn from_bits(bits: u8) -> Self {
        Self(bits & 0x0f)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, j: usize) -> bool {
        j < 4 && self.0 & (1 << j) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..4).filter(move |&j| self.contains(j))
    }
}

impl TryFrom<Vec<usize>> for PropellerSet {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::from_indices(&v)
    }
}

impl From<PropellerSet> for Vec<usize> {
    fn from(s: PropellerSet) -> Self {
        s.indices().collect()
    }
}

impl fmt::Display for PropellerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().map(|j| j.to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

/// Low-level handling class for a failure combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureStrategy {
    Nominal,
    OneFail(usize),
    /// Remaining controllable pair after two failures: `(failed_j, failed_k)`.
    TwoFailControllable(usize, usize),
    QuadLost,
}

/// Classify a failed-propeller set. Two failures are survivable only when the
/// two healthy propellers sit on opposite sides of the hinge axis, so that
/// they can still produce a hinge torque.
pub fn classify_failure(failed: PropellerSet) -> FailureStrategy {
    let idx: Vec<usize> = failed.indices().collect();
    match idx.as_slice() {
        [] => FailureStrategy::Nominal,
        [j] => FailureStrategy::OneFail(*j),
        [j, k] => {
            if PROP_SIGNS[*j].1 == PROP_SIGNS[*k].1 {
                FailureStrategy::QuadLost
            } else {
                FailureStrategy::TwoFailControllable(*j, *k)
            }
        }
        _ => FailureStrategy::QuadLost,
    }
}

/// Failure bookkeeping of one module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FailureStatus {
    pub failed: PropellerSet,
    pub strategy: FailureStrategy,
}

impl Default for FailureStatus {
    fn default() -> Self {
        Self::new(PropellerSet::EMPTY)
    }
}

impl FailureStatus {
    pub fn new(failed: PropellerSet) -> Self {
        Self { failed, strategy: classify_failure(failed) }
    }

    pub fn is_nominal(&self) -> bool {
        self.strategy == FailureStrategy::Nominal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> PlatformParams {
        PlatformParams::default()
    }

    #[test]
    fn default_values_and_derived_constants() {
        let p = params();
        assert!((p.m_total - 0.144).abs() < 1e-15);
        assert_eq!(p.b, 0.046 / SQRT_2);
        assert!((p.hover_thrust() - 0.35316).abs() < 1e-5);
        assert!((p.hinge_inertia() - 1.6e-5).abs() < 1e-20);
        let i = p.i_total;
        assert!((i - i.transpose()).amax() == 0.0);
        assert!(i.symmetric_eigenvalues().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = PlatformConfig { t_max: 0.0, ..Default::default() };
        assert!(PlatformParams::new(&cfg).is_err());
        let cfg = PlatformConfig { i_quad: [1e-5, -1.0, 1e-5], ..Default::default() };
        assert!(PlatformParams::new(&cfg).is_err());
    }

    #[test]
    fn jacobians_at_level_hinges() {
        let j = thrust_jacobians(&Vector4::zeros(), 0.14);
        #[rustfmt::skip]
        let xi = Matrix3x4::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0);
        #[rustfmt::skip]
        let nu = Matrix3x4::new(-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0) * 0.14;
        assert_eq!(j.j_xi, xi);
        assert_eq!(j.j_nu, nu);
    }

    #[test]
    fn jacobians_at_right_angle() {
        let j = thrust_jacobians(&Vector4::repeat(FRAC_PI_2), 0.14);
        #[rustfmt::skip]
        let xi = Matrix3x4::new(-1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0);
        assert!((j.j_xi - xi).amax() < 1e-15);
    }

    #[test]
    fn hover_wrench() {
        let p = params();
        let w = wrench_from_inputs(&Vector4::zeros(), &Vector4::repeat(0.3532), &p);
        assert!((w.force - Vector3::new(0.0, 0.0, 1.4128)).amax() < 1e-12);
        assert!(w.torque.amax() < 1e-15);

        let w = wrench_from_inputs(&Vector4::zeros(), &Vector4::new(0.4, 0.3, 0.4, 0.3), &p);
        assert!((w.force.z - 1.4).abs() < 1e-12);
        assert!(w.torque.amax() < 1e-15);
    }

    #[test]
    fn mixing_examples() {
        let p = params();
        let out = quad_mixing(&PropellerThrusts::uniform(0.1), &p);
        assert!((out.thrust - 0.4).abs() < 1e-15);
        assert!(out.mx.abs() < 1e-15 && out.my.abs() < 1e-15 && out.mz.abs() < 1e-15);

        let out = quad_mixing(&PropellerThrusts::new(Vector4::new(0.0, 0.0, 0.1, 0.1)), &p);
        assert!((out.thrust - 0.2).abs() < 1e-15);
        assert!((out.mx - 2.0 * p.b * 0.1).abs() < 1e-15);
        assert!(out.my.abs() < 1e-15 && out.mz.abs() < 1e-15);
    }

    #[test]
    fn mix_inverse_matches_numeric_inverse() {
        let p = params();
        let inv = mixing_matrix(p.b, p.c_tau).try_inverse().unwrap();
        let out = QuadOutputs { thrust: 0.3, mx: 0.001, my: -0.002, mz: 0.0003 };
        let analytic = mix_inverse_raw(&out, p.b, p.c_tau);
        assert!((analytic - inv * out.to_vector()).amax() < 1e-14);
    }

    #[test]
    fn mix_inverse_boundaries() {
        let p = params();
        let (t, sat) = mix_inverse(&QuadOutputs { thrust: 4.0 * p.t_max, ..Default::default() }, &p);
        assert!((t.t - Vector4::repeat(p.t_max)).amax() < 1e-15);
        assert!(!sat);

        let (t, sat) = mix_inverse(&QuadOutputs { mx: 1.0, ..Default::default() }, &p);
        assert!(sat);
        assert!(t.t.iter().all(|&v| (0.0..=p.t_max).contains(&v)));
        assert!(t.t.iter().any(|&v| v == 0.0));
    }

    #[test]
    fn force_decomposition_examples() {
        let f = inputs_to_forces(&Vector4::zeros(), &Vector4::new(0.3, 0.0, 0.0, 0.0));
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], 0.3);

        let mut f = Vector8::zeros();
        f[0] = 0.1;
        f[1] = 0.1;
        let prev = Vector4::new(0.0, 0.2, -0.3, 0.4);
        let (alpha, t) = forces_to_inputs(&f, &prev);
        assert!((t[0] - 0.1f64.hypot(0.1)).abs() < 1e-15);
        assert!((alpha[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        // degenerate modules keep their previous angle
        assert_eq!(alpha.fixed_rows::<3>(1), prev.fixed_rows::<3>(1));
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn table_one_classification() {
        let set = |v: &[usize]| PropellerSet::from_indices(v).unwrap();
        assert_eq!(classify_failure(set(&[])), FailureStrategy::Nominal);
        assert_eq!(classify_failure(set(&[0])), FailureStrategy::OneFail(0));
        assert_eq!(classify_failure(set(&[0, 1])), FailureStrategy::TwoFailControllable(0, 1));
        assert_eq!(classify_failure(set(&[0, 3])), FailureStrategy::QuadLost);
        assert_eq!(classify_failure(set(&[1, 2])), FailureStrategy::QuadLost);
        assert_eq!(classify_failure(set(&[0, 1, 2])), FailureStrategy::QuadLost);
        assert!(PropellerSet::from_indices(&[4]).is_err());
    }

    #[test]
    fn state_attitude_roundtrip() {
        let eta = Vector3::new(0.3, -0.2, 1.1);
        let s = PlatformState::default().with_attitude(eta);
        assert!((s.eta - eta).amax() < 1e-12);
        assert!((s.rotation() - rotation_from_euler(&eta)).amax() < 1e-15);
    }
}
