//! Euler–Lagrange dynamics of planar serial arms with revolute joints.
//!
//! All joint angles are relative (joint `i` rotates link `i` with respect to
//! link `i - 1`), the base frame has `x` horizontal and `y` pointing up, and
//! gravity acts along `-y`. Every matrix is built in closed form from the link
//! Jacobians, so `M(q)` is symmetric by construction and the Coriolis matrix
//! comes from Christoffel symbols of the first kind, which makes
//! `Ṁ − 2C` skew-symmetric.

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Supported numbers of joints.
pub const MIN_DOF: usize = 2;
pub const MAX_DOF: usize = 3;

/// Default width of the `tanh` used to smooth Coulomb friction, rad/s.
pub const DEFAULT_FRICTION_SMOOTHING: f64 = 1e-3;

/// Ratio of largest to smallest Cholesky pivot (squared) beyond which the
/// inertia matrix is treated as singular.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    /// Joint-to-joint length, m.
    pub length: f64,
    /// kg.
    pub mass: f64,
    /// Distance from the proximal joint to the center of mass, m.
    pub com_offset: f64,
    /// Rotational inertia about the center of mass, kg·m².
    pub inertia_com: f64,
}

impl LinkParams {
    pub fn new(length: f64, mass: f64, com_offset: f64, inertia_com: f64) -> Result<Self> {
        let link = Self {
            length,
            mass,
            com_offset,
            inertia_com,
        };
        link.validate()?;
        Ok(link)
    }

    /// All mass concentrated at the distal end of the link.
    pub fn point_mass(length: f64, mass: f64) -> Result<Self> {
        Self::new(length, mass, length, 0.0)
    }

    /// Center of mass at mid-length, inertia given in g·cm².
    pub fn from_g_cm2(length: f64, mass: f64, inertia_g_cm2: f64) -> Result<Self> {
        Self::new(length, mass, 0.5 * length, inertia_g_cm2 * 1e-7)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.length, self.mass, self.com_offset, self.inertia_com]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("link parameters must be finite".into()));
        }
        if self.length <= 0.0 || self.mass <= 0.0 {
            return Err(Error::Config(format!(
                "link length and mass must be positive (length = {}, mass = {})",
                self.length, self.mass
            )));
        }
        if self.inertia_com < 0.0 {
            return Err(Error::Config("link inertia must be non-negative".into()));
        }
        if self.com_offset < 0.0 || self.com_offset > self.length {
            return Err(Error::Config(format!(
                "center-of-mass offset {} outside [0, {}]",
                self.com_offset, self.length
            )));
        }
        Ok(())
    }
}

/// Position and velocity of every joint.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: Vector,
    pub qdot: Vector,
}

impl JointState {
    pub fn new(q: Vector, qdot: Vector) -> Result<Self> {
        check_dim("joint velocity", q.len(), qdot.len())?;
        Ok(Self { q, qdot })
    }

    pub fn at_rest(q: Vector) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: Vector::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.qdot.iter()).all(|v| v.is_finite())
    }
}

/// A planar serial arm with 2 or 3 revolute joints.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel {
    links: Vec<LinkParams>,
    gravity_accel: f64,
    viscous_friction: Vector,
    coulomb_friction: Vector,
    friction_smoothing: f64,
    max_condition: f64,
}

/// Trigonometric data of the absolute link angles at one configuration.
struct Frames {
    /// (cos θ_k, sin θ_k) with θ_k = q_0 + … + q_k.
    axis: Vec<Vector2<f64>>,
    /// (−sin θ_k, cos θ_k).
    normal: Vec<Vector2<f64>>,
}

impl Frames {
    fn new(q: &Vector) -> Self {
        let mut theta = 0.0;
        let mut axis = Vec::with_capacity(q.len());
        let mut normal = Vec::with_capacity(q.len());
        for &qi in q.iter() {
            theta += qi;
            let (s, c) = theta.sin_cos();
            axis.push(Vector2::new(c, s));
            normal.push(Vector2::new(-s, c));
        }
        Self { axis, normal }
    }
}

impl ManipulatorModel {
    /// Frictionless model.
    pub fn new(links: Vec<LinkParams>, gravity_accel: f64) -> Result<Self> {
        let n = links.len();
        Self::with_friction(links, gravity_accel, Vector::zeros(n), Vector::zeros(n))
    }

    pub fn with_friction(
        links: Vec<LinkParams>,
        gravity_accel: f64,
        viscous_friction: Vector,
        coulomb_friction: Vector,
    ) -> Result<Self> {
        let n = links.len();
        if !(MIN_DOF..=MAX_DOF).contains(&n) {
            return Err(Error::Config(format!(
                "planar arm must have {MIN_DOF} or {MAX_DOF} links, got {n}"
            )));
        }
        for link in &links {
            link.validate()?;
        }
        if !gravity_accel.is_finite() || gravity_accel < 0.0 {
            return Err(Error::Config(format!(
                "gravity acceleration must be finite and non-negative, got {gravity_accel}"
            )));
        }
        check_dim("viscous friction", n, viscous_friction.len())?;
        check_dim("coulomb friction", n, coulomb_friction.len())?;
        let nonneg = |v: &Vector| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg(&viscous_friction) || !nonneg(&coulomb_friction) {
            return Err(Error::Config(
                "friction coefficients must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            links,
            gravity_accel,
            viscous_friction,
            coulomb_friction,
            friction_smoothing: DEFAULT_FRICTION_SMOOTHING,
            max_condition: DEFAULT_MAX_CONDITION,
        })
    }

    /// The three-link planar arm of the experimental setup: 0.06 m links,
    /// 0.67/0.67/0.62 kg, 624/624/622 g·cm², centers of mass at mid-length.
    pub fn three_link_bench(gravity_accel: f64) -> Self {
        let links = vec![
            LinkParams::from_g_cm2(0.06, 0.67, 624.0).unwrap(),
            LinkParams::from_g_cm2(0.06, 0.67, 624.0).unwrap(),
            LinkParams::from_g_cm2(0.06, 0.62, 622.0).unwrap(),
        ];
        Self::new(links, gravity_accel).unwrap()
    }

    pub fn with_friction_smoothing(mut self, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::Config(format!(
                "friction smoothing width must be positive, got {width}"
            )));
        }
        self.friction_smoothing = width;
        Ok(self)
    }

    pub fn with_max_condition(mut self, max_condition: f64) -> Self {
        self.max_condition = max_condition;
        self
    }

    pub fn dof(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[LinkParams] {
        &self.links
    }

    pub fn gravity_accel(&self) -> f64 {
        self.gravity_accel
    }

    pub fn viscous_friction(&self) -> &Vector {
        &self.viscous_friction
    }

    pub fn coulomb_friction(&self) -> &Vector {
        &self.coulomb_friction
    }

    pub fn friction_smoothing(&self) -> f64 {
        self.friction_smoothing
    }

    /// Total reach `Σ l_i`.
    pub fn reach(&self) -> f64 {
        self.links.iter().map(|l| l.length).sum()
    }

    /// `∂p_i/∂q_j` for the center of mass of link `i` (zero for `j > i`).
    fn com_jacobian_column(&self, frames: &Frames, i: usize, j: usize) -> Vector2<f64> {
        if j > i {
            return Vector2::zeros();
        }
        let mut col = frames.normal[i] * self.links[i].com_offset;
        for k in j..i {
            col += frames.normal[k] * self.links[k].length;
        }
        col
    }

    /// `∂²p_i/∂q_j∂q_l` for the center of mass of link `i`.
    fn com_hessian(&self, frames: &Frames, i: usize, j: usize, l: usize) -> Vector2<f64> {
        if j > i || l > i {
            return Vector2::zeros();
        }
        let mut h = frames.axis[i] * self.links[i].com_offset;
        for k in j.max(l)..i {
            h += frames.axis[k] * self.links[k].length;
        }
        -h
    }

    fn com_jacobians(&self, frames: &Frames) -> Vec<Vec<Vector2<f64>>> {
        let n = self.dof();
        (0..n)
            .map(|i| (0..n).map(|j| self.com_jacobian_column(frames, i, j)).collect())
            .collect()
    }

    /// Joint-space inertia matrix `M(q)`.
    pub fn mass_matrix(&self, q: &Vector) -> Matrix {
        debug_assert_eq!(q.len(), self.dof());
        let n = self.dof();
        let frames = Frames::new(q);
        let jac = self.com_jacobians(&frames);
        Matrix::from_fn(n, n, |j, k| {
            (j.max(k)..n)
                .map(|i| {
                    let link = &self.links[i];
                    link.mass * jac[i][j].dot(&jac[i][k]) + link.inertia_com
                })
                .sum()
        })
    }

    /// `∂M/∂q_l` for every joint `l`, in joint order.
    pub fn mass_matrix_partials(&self, q: &Vector) -> Vec<Matrix> {
        let n = self.dof();
        let frames = Frames::new(q);
        let jac = self.com_jacobians(&frames);
        (0..n)
            .map(|l| {
                Matrix::from_fn(n, n, |j, k| {
                    (j.max(k)..n)
                        .map(|i| {
                            let hj = self.com_hessian(&frames, i, j, l);
                            let hk = self.com_hessian(&frames, i, k, l);
                            self.links[i].mass * (hj.dot(&jac[i][k]) + jac[i][j].dot(&hk))
                        })
                        .sum()
                })
            })
            .collect()
    }

    /// Matrices `C_i(q)` with `C(q, q̇) = Σ_i q̇_i C_i(q)`; entry `(k, j)` of
    /// `C_i` is the Christoffel symbol `Γ_ijk`.
    pub fn coriolis_factors(&self, q: &Vector) -> Vec<Matrix> {
        let n = self.dof();
        let dm = self.mass_matrix_partials(q);
        (0..n)
            .map(|i| Matrix::from_fn(n, n, |k, j| 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)])))
            .collect()
    }

    /// Coriolis/centrifugal matrix `C(q, q̇)` from Christoffel symbols.
    pub fn coriolis_matrix(&self, q: &Vector, qdot: &Vector) -> Matrix {
        let n = self.dof();
        self.coriolis_factors(q)
            .into_iter()
            .zip(qdot.iter())
            .fold(Matrix::zeros(n, n), |acc, (ci, &v)| acc + ci * v)
    }

    /// Gravity torque `g(q) = ∂U/∂q`.
    pub fn gravity_vector(&self, q: &Vector) -> Vector {
        let n = self.dof();
        if self.gravity_accel == 0.0 {
            return Vector::zeros(n);
        }
        let frames = Frames::new(q);
        Vector::from_fn(n, |j, _| {
            (j..n)
                .map(|i| self.links[i].mass * self.com_jacobian_column(&frames, i, j).y)
                .sum::<f64>()
                * self.gravity_accel
        })
    }

    /// Viscous plus `tanh`-smoothed Coulomb friction.
    pub fn friction_torque(&self, qdot: &Vector) -> Vector {
        let eps = self.friction_smoothing;
        Vector::from_fn(self.dof(), |i, _| {
            self.viscous_friction[i] * qdot[i] + self.coulomb_friction[i] * (qdot[i] / eps).tanh()
        })
    }

    /// Solves `M q̈ = τ − C q̇ − g − τ_fric − τ_load` for `q̈`.
    pub fn forward_dynamics(&self, state: &JointState, tau: &Vector, tau_load: &Vector) -> Result<Vector> {
        let n = self.dof();
        check_dim("joint position", n, state.q.len())?;
        check_dim("joint velocity", n, state.qdot.len())?;
        check_dim("torque", n, tau.len())?;
        check_dim("load torque", n, tau_load.len())?;
        let m = self.mass_matrix(&state.q);
        let rhs = tau
            - self.coriolis_matrix(&state.q, &state.qdot) * &state.qdot
            - self.gravity_vector(&state.q)
            - self.friction_torque(&state.qdot)
            - tau_load;
        solve_spd(m, &rhs, self.max_condition)
    }

    /// `½ q̇ᵀ M(q) q̇`.
    pub fn kinetic_energy(&self, state: &JointState) -> f64 {
        0.5 * state.qdot.dot(&(self.mass_matrix(&state.q) * &state.qdot))
    }

    /// `Σ m_i g y_i(q)`, zero at the horizontal configuration.
    pub fn potential_energy(&self, q: &Vector) -> f64 {
        self.com_positions(q)
            .iter()
            .zip(&self.links)
            .map(|(p, link)| link.mass * self.gravity_accel * p.y)
            .sum()
    }

    pub fn com_positions(&self, q: &Vector) -> Vec<Vector2<f64>> {
        let frames = Frames::new(q);
        let mut joint = Vector2::zeros();
        let mut out = Vec::with_capacity(self.dof());
        for (k, link) in self.links.iter().enumerate() {
            out.push(joint + frames.axis[k] * link.com_offset);
            joint += frames.axis[k] * link.length;
        }
        out
    }

    /// End-effector position.
    pub fn tip_position(&self, q: &Vector) -> Vector2<f64> {
        let frames = Frames::new(q);
        self.links
            .iter()
            .zip(&frames.axis)
            .fold(Vector2::zeros(), |acc, (link, axis)| acc + axis * link.length)
    }

    /// 2×n Jacobian of the end-effector position.
    pub fn tip_jacobian(&self, q: &Vector) -> Matrix {
        let n = self.dof();
        let frames = Frames::new(q);
        let mut jac = Matrix::zeros(2, n);
        for j in 0..n {
            let col = (j..n).fold(Vector2::zeros(), |acc, k| acc + frames.normal[k] * self.links[k].length);
            jac[(0, j)] = col.x;
            jac[(1, j)] = col.y;
        }
        jac
    }
}

/// Cholesky solve with a pivot-ratio guard against near-singular matrices.
pub(crate) fn solve_spd(m: Matrix, rhs: &Vector, max_condition: f64) -> Result<Vector> {
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Degenerate("inertia matrix is not positive definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let ratio = (hi / lo).powi(2);
    if !(ratio.is_finite() && ratio <= max_condition) {
        return Err(Error::Degenerate(format!(
            "inertia matrix pivot ratio {ratio:.3e} exceeds {max_condition:.3e}"
        )));
    }
    Ok(chol.solve(rhs))
}
