//! Grid estimates of the constants the stability argument quantifies over,
//! the ultimate bound `Γ`, the nominal-inertia dominance test and the
//! practical bandwidth limit of the observer.
//!
//! "For all `q`" is made computable by restricting configurations to a
//! [`WorkspaceBox`] and sampling it on a regular grid. Grids refined with
//! [`WorkspaceBox::refined`] contain the coarse grid, so maxima can only grow
//! and minima only shrink under refinement.
//!
//! For planar arms `M(q)` and `C(q, q̇)` do not depend on the base angle
//! `q_1`, so inertial quantities are sampled on the grid of `q_2 … q_n`
//! only; gravity is sampled on the full grid.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::dynamics::{ManipulatorModel, Matrix, Vector};
use crate::error::{check_dim, Error, Result};
use crate::par::{self, Exec};

/// Below this magnitude an eigenvalue of `ΔM` counts as zero.
const DOMINANCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceBox {
    pub q_min: Vector,
    pub q_max: Vector,
    /// Per-joint speed bound, rad/s.
    pub qdot_max: Vector,
    pub grid_points_per_dim: usize,
}

impl WorkspaceBox {
    pub fn new(q_min: Vector, q_max: Vector, qdot_max: Vector, grid_points_per_dim: usize) -> Result<Self> {
        let b = Self {
            q_min,
            q_max,
            qdot_max,
            grid_points_per_dim,
        };
        b.validate()?;
        Ok(b)
    }

    /// Every joint over `[−π, π]`.
    pub fn full_turn(n: usize, qdot_max: f64, grid_points_per_dim: usize) -> Result<Self> {
        use std::f64::consts::PI;
        Self::new(
            Vector::from_element(n, -PI),
            Vector::from_element(n, PI),
            Vector::from_element(n, qdot_max),
            grid_points_per_dim,
        )
    }

    /// A single configuration.
    pub fn point(q: Vector, qdot_max: Vector) -> Result<Self> {
        let b = Self {
            q_min: q.clone(),
            q_max: q,
            qdot_max,
            grid_points_per_dim: 1,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn dof(&self) -> usize {
        self.q_min.len()
    }

    pub fn is_point(&self) -> bool {
        self.grid_points_per_dim == 1
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q_min.len();
        check_dim("workspace q_max", n, self.q_max.len())?;
        check_dim("workspace qdot_max", n, self.qdot_max.len())?;
        let finite = |v: &Vector| v.iter().all(|x| x.is_finite());
        if !finite(&self.q_min) || !finite(&self.q_max) || !finite(&self.qdot_max) {
            return Err(Error::Config("workspace bounds must be finite".into()));
        }
        if self.qdot_max.iter().any(|v| *v < 0.0) {
            return Err(Error::Config("workspace speed bounds must be non-negative".into()));
        }
        if self.grid_points_per_dim == 1 {
            if self.q_min != self.q_max {
                return Err(Error::Config("a one-point grid needs q_min == q_max".into()));
            }
            return Ok(());
        }
        if self.grid_points_per_dim < 3 {
            return Err(Error::Config(format!(
                "grid needs at least 3 points per dimension, got {}",
                self.grid_points_per_dim
            )));
        }
        if self.q_min.iter().zip(self.q_max.iter()).any(|(lo, hi)| lo >= hi) {
            return Err(Error::Config("workspace needs q_min < q_max on every joint".into()));
        }
        Ok(())
    }

    /// Nested refinement: `factor − 1` new points between each pair of
    /// neighbours.
    pub fn refined(&self, factor: usize) -> Self {
        let mut b = self.clone();
        if !self.is_point() {
            b.grid_points_per_dim = factor.max(1) * (self.grid_points_per_dim - 1) + 1;
        }
        b
    }

    fn coordinate(&self, joint: usize, k: usize) -> f64 {
        if self.is_point() {
            return self.q_min[joint];
        }
        let s = k as f64 / (self.grid_points_per_dim - 1) as f64;
        self.q_min[joint] + s * (self.q_max[joint] - self.q_min[joint])
    }

    /// Grid size when joints `first..n` vary and the others sit at `q_min`.
    fn grid_len(&self, first: usize) -> usize {
        self.grid_points_per_dim.pow((self.dof() - first) as u32)
    }

    fn grid_point(&self, first: usize, mut index: usize) -> Vector {
        let g = self.grid_points_per_dim;
        Vector::from_fn(self.dof(), |j, _| {
            if j < first {
                self.q_min[j]
            } else {
                let k = index % g;
                index /= g;
                self.coordinate(j, k)
            }
        })
    }

    /// Every configuration of the full grid.
    pub fn configurations(&self) -> impl Iterator<Item = Vector> + '_ {
        (0..self.grid_len(0)).map(move |i| self.grid_point(0, i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaConstants {
    pub beta_m_min: f64,
    pub beta_m_max: f64,
    pub beta_c: f64,
    pub beta_g: f64,
    /// Smallest `|λ(ΔM)|` over the workspace; zero when an eigenvalue of
    /// `ΔM` changes sign on the grid.
    pub beta_dm_min: f64,
    /// Largest `|λ(ΔM)|`, i.e. the largest spectral norm of `ΔM`.
    pub beta_dm_max: f64,
    pub beta_fric_max: f64,
    pub beta_load_max: f64,
    pub beta_mn_min: f64,
    pub beta_mn_max: f64,
}

impl BetaConstants {
    /// Sum of the configuration-independent disturbance bounds.
    pub fn static_disturbance(&self) -> f64 {
        self.beta_g + self.beta_fric_max + self.beta_load_max
    }
}

#[derive(Debug, Clone, PartialEq)]
struct InertialStats {
    m_min: f64,
    m_max: f64,
    dm_min: f64,
    dm_max: f64,
    /// `(min, max)` of each sorted eigenvalue of `ΔM`.
    dm_ranges: Vec<(f64, f64)>,
    c: f64,
}

impl InertialStats {
    const EMPTY: Self = Self {
        m_min: f64::INFINITY,
        m_max: f64::NEG_INFINITY,
        dm_min: f64::INFINITY,
        dm_max: f64::NEG_INFINITY,
        dm_ranges: Vec::new(),
        c: f64::NEG_INFINITY,
    };

    fn merge(self, o: Self) -> Self {
        let dm_ranges = if self.dm_ranges.is_empty() {
            o.dm_ranges
        } else if o.dm_ranges.is_empty() {
            self.dm_ranges
        } else {
            self.dm_ranges
                .iter()
                .zip(&o.dm_ranges)
                .map(|(a, b)| (a.0.min(b.0), a.1.max(b.1)))
                .collect()
        };
        Self {
            m_min: self.m_min.min(o.m_min),
            m_max: self.m_max.max(o.m_max),
            dm_min: self.dm_min.min(o.dm_min),
            dm_max: self.dm_max.max(o.dm_max),
            dm_ranges,
            c: self.c.max(o.c),
        }
    }

    /// `inf |λ(ΔM)|`. Sorted eigenvalues are continuous on the connected
    /// workspace, so one that takes both signs on the grid passes through zero.
    fn dm_abs_min(&self) -> f64 {
        if self.dm_ranges.iter().any(|&(lo, hi)| lo <= 0.0 && hi >= 0.0) {
            0.0
        } else {
            self.dm_min
        }
    }
}

fn spectral_norm(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.transpose() * m).eigenvalues.max().max(0.0).sqrt()
}

/// `sup_{‖q̇‖=1} ‖C(q, q̇)‖₂` bounded through `‖Σ q̇_i C_i‖ ≤ ‖q̇‖ (Σ ‖C_i‖²)^½`.
pub fn coriolis_gain(model: &ManipulatorModel, q: &Vector) -> f64 {
    model
        .coriolis_factors(q)
        .iter()
        .map(|c| spectral_norm(c).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn inertial_stats(model: &ManipulatorModel, m_n: &Matrix, q: &Vector) -> InertialStats {
    let m = model.mass_matrix(q);
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let deig = SymmetricEigen::new(m - m_n).eigenvalues;
    let dabs = deig.map(f64::abs);
    let mut sorted: Vec<f64> = deig.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    InertialStats {
        m_min: eig.min(),
        m_max: eig.max(),
        dm_min: dabs.min(),
        dm_max: dabs.max(),
        dm_ranges: sorted.into_iter().map(|l| (l, l)).collect(),
        c: coriolis_gain(model, q),
    }
}

/// `(min, max)` eigenvalue of `M(q)` over the inertial grid.
pub fn inertia_eigen_range(exec: Exec, model: &ManipulatorModel, ws: &WorkspaceBox) -> Result<(f64, f64)> {
    ws.validate()?;
    check_dim("workspace dimension", model.dof(), ws.dof())?;
    Ok(par::map_reduce(
        exec,
        ws.grid_len(1),
        (f64::INFINITY, f64::NEG_INFINITY),
        |i| {
            let eig = SymmetricEigen::new(model.mass_matrix(&ws.grid_point(1, i))).eigenvalues;
            (eig.min(), eig.max())
        },
        |a, b| (a.0.min(b.0), a.1.max(b.1)),
    ))
}

/// Largest friction torque norm over the speed box. Each component is odd
/// and increasing in its own joint speed, so the corner is the maximizer.
pub fn friction_bound(model: &ManipulatorModel, qdot_max: &Vector) -> f64 {
    model.friction_torque(qdot_max).norm()
}

fn check_inputs(model: &ManipulatorModel, cfg: &ControllerConfig, ws: &WorkspaceBox) -> Result<()> {
    ws.validate()?;
    check_dim("workspace dimension", model.dof(), ws.dof())?;
    check_dim("nominal inertia dimension", model.dof(), cfg.dof())?;
    Ok(())
}

pub fn estimate_betas(
    model: &ManipulatorModel,
    cfg: &ControllerConfig,
    ws: &WorkspaceBox,
    load_bound: f64,
) -> Result<BetaConstants> {
    estimate_betas_with(Exec::default(), model, cfg, ws, load_bound)
}

pub fn estimate_betas_with(
    exec: Exec,
    model: &ManipulatorModel,
    cfg: &ControllerConfig,
    ws: &WorkspaceBox,
    load_bound: f64,
) -> Result<BetaConstants> {
    check_inputs(model, cfg, ws)?;
    if !(load_bound.is_finite() && load_bound >= 0.0) {
        return Err(Error::Config("declared load bound must be non-negative".into()));
    }
    let m_n = &cfg.nominal_inertia;
    let inertial = par::map_reduce(
        exec,
        ws.grid_len(1),
        InertialStats::EMPTY,
        |i| inertial_stats(model, m_n, &ws.grid_point(1, i)),
        InertialStats::merge,
    );
    let beta_g = if model.gravity_accel() == 0.0 {
        0.0
    } else {
        par::map_reduce(
            exec,
            ws.grid_len(0),
            0.0,
            |i| model.gravity_vector(&ws.grid_point(0, i)).norm(),
            f64::max,
        )
    };
    let mn_eig = SymmetricEigen::new(m_n.clone()).eigenvalues;
    Ok(BetaConstants {
        beta_m_min: inertial.m_min,
        beta_m_max: inertial.m_max,
        beta_c: inertial.c,
        beta_g,
        beta_dm_min: inertial.dm_abs_min(),
        beta_dm_max: inertial.dm_max,
        beta_fric_max: friction_bound(model, &ws.qdot_max),
        beta_load_max: load_bound,
        beta_mn_min: mn_eig.min(),
        beta_mn_max: mn_eig.max(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominance {
    /// `M_n ≥ M(q)` on the whole grid.
    Dominant,
    /// `M(q) > M_n` somewhere and `ΔM` is never negative semidefinite.
    Dominated,
    Indefinite,
}

#[derive(Debug, Clone, Copy, Default)]
struct DominanceCount {
    nsd: usize,
    pd: usize,
    total: usize,
}

/// Classifies `ΔM(q) = M(q) − M_n` over the grid.
pub fn nominal_dominance(model: &ManipulatorModel, cfg: &ControllerConfig, ws: &WorkspaceBox) -> Result<Dominance> {
    nominal_dominance_with(Exec::default(), model, cfg, ws)
}

pub fn nominal_dominance_with(
    exec: Exec,
    model: &ManipulatorModel,
    cfg: &ControllerConfig,
    ws: &WorkspaceBox,
) -> Result<Dominance> {
    check_inputs(model, cfg, ws)?;
    let m_n = &cfg.nominal_inertia;
    let scale = m_n.amax().max(f64::MIN_POSITIVE);
    let count = par::map_reduce(
        exec,
        ws.grid_len(1),
        DominanceCount::default(),
        |i| {
            let q = ws.grid_point(1, i);
            let eig = SymmetricEigen::new(model.mass_matrix(&q) - m_n).eigenvalues;
            DominanceCount {
                nsd: usize::from(eig.max() <= DOMINANCE_TOL * scale),
                pd: usize::from(eig.min() > DOMINANCE_TOL * scale),
                total: 1,
            }
        },
        |a, b| DominanceCount {
            nsd: a.nsd + b.nsd,
            pd: a.pd + b.pd,
            total: a.total + b.total,
        },
    );
    Ok(if count.nsd == count.total {
        Dominance::Dominant
    } else if count.pd > 0 && count.nsd == 0 {
        Dominance::Dominated
    } else {
        Dominance::Indefinite
    })
}

/// Suprema of the closed-loop signals entering `Γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSuprema {
    /// `sup ‖q̈_des‖₂`, rad/s².
    pub qddot_des: f64,
    /// `sup ‖q̇‖₂`, rad/s.
    pub qdot: f64,
    /// `sup ‖q̇_des‖₂`, rad/s.
    pub qdot_des: f64,
}

/// Worst-case `‖ψ‖` for the given signal norms:
/// `β_ΔM ‖q̈_des‖ + β_C ‖q̇‖ ‖q̇_des‖ + β_g + β_fric + β_load`.
pub fn disturbance_bound(betas: &BetaConstants, qddot_des: f64, qdot: f64, qdot_des: f64) -> f64 {
    betas.beta_dm_max * qddot_des + betas.beta_c * qdot * qdot_des + betas.static_disturbance()
}

/// Radius of the ball the dynamic error `e_D` ultimately enters.
pub fn ultimate_bound_gamma(betas: &BetaConstants, g_dob: f64, sup: &SignalSuprema) -> Result<f64> {
    let denom = g_dob * betas.beta_mn_min;
    if !(denom.is_finite() && denom > 0.0) {
        return Err(Error::Config(format!(
            "ultimate bound needs g_dob·β_Mn_min > 0 (got {g_dob} · {})",
            betas.beta_mn_min
        )));
    }
    Ok(disturbance_bound(betas, sup.qddot_des, sup.qdot, sup.qdot_des) / denom)
}

/// Largest observer bandwidth allowed by `2 (M_n/M) g_dob ≤ g_v` with the
/// inertia ratio replaced by its worst case `β_Mn_max / β_M_min`.
pub fn bandwidth_upper_bound(betas: &BetaConstants, g_v: f64) -> Result<f64> {
    if !(g_v.is_finite() && g_v > 0.0) {
        return Err(Error::Config(format!(
            "velocity measurement bandwidth must be positive, got {g_v}"
        )));
    }
    Ok(g_v * betas.beta_m_min / (2.0 * betas.beta_mn_max))
}

/// Same limit with the inertia ratio read direction by direction: the
/// largest generalized eigenvalue of `(M_n, M(q))` over the grid.
pub fn bandwidth_upper_bound_directional(
    model: &ManipulatorModel,
    cfg: &ControllerConfig,
    ws: &WorkspaceBox,
    g_v: f64,
) -> Result<f64> {
    check_inputs(model, cfg, ws)?;
    if !(g_v.is_finite() && g_v > 0.0) {
        return Err(Error::Config(format!(
            "velocity measurement bandwidth must be positive, got {g_v}"
        )));
    }
    let ratio = max_inertia_ratio(Exec::default(), model, &cfg.nominal_inertia, ws)?;
    Ok(g_v / (2.0 * ratio))
}

/// `max_q λ_max(M(q)⁻¹ M_n)` over the inertial grid.
pub fn max_inertia_ratio(exec: Exec, model: &ManipulatorModel, m_n: &Matrix, ws: &WorkspaceBox) -> Result<f64> {
    let ratio = par::map_reduce(
        exec,
        ws.grid_len(1),
        f64::NEG_INFINITY,
        |i| {
            let q = ws.grid_point(1, i);
            match model.mass_matrix(&q).cholesky() {
                Some(chol) => {
                    let l_inv = chol.l().try_inverse().unwrap_or_else(|| Matrix::zeros(1, 1));
                    if l_inv.nrows() != m_n.nrows() {
                        return f64::INFINITY;
                    }
                    SymmetricEigen::new(&l_inv * m_n * l_inv.transpose()).eigenvalues.max()
                }
                None => f64::INFINITY,
            }
        },
        f64::max,
    );
    if ratio.is_finite() {
        Ok(ratio)
    } else {
        Err(Error::Degenerate(
            "inertia matrix singular on the workspace grid".into(),
        ))
    }
}

/// Checks the bandwidth limit. Returns `(limit, satisfied)`.
pub fn bandwidth_check(limit: f64, g_dob: f64) -> (f64, bool) {
    (limit, g_dob <= limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LinkParams;
    use approx::assert_relative_eq;

    fn betas() -> BetaConstants {
        BetaConstants {
            beta_m_min: 0.1,
            beta_m_max: 1.0,
            beta_c: 0.5,
            beta_g: 2.0,
            beta_dm_min: 0.0,
            beta_dm_max: 0.3,
            beta_fric_max: 0.1,
            beta_load_max: 0.4,
            beta_mn_min: 1.2,
            beta_mn_max: 1.5,
        }
    }

    fn sup() -> SignalSuprema {
        SignalSuprema {
            qddot_des: 10.0,
            qdot: 2.0,
            qdot_des: 2.5,
        }
    }

    #[test]
    fn gamma_zero_numerator() {
        let b = BetaConstants {
            beta_c: 0.0,
            beta_g: 0.0,
            beta_dm_max: 0.0,
            beta_fric_max: 0.0,
            beta_load_max: 0.0,
            ..betas()
        };
        assert_eq!(ultimate_bound_gamma(&b, 200.0, &sup()).unwrap(), 0.0);
    }

    #[test]
    fn gamma_halves_when_bandwidth_doubles() {
        let g1 = ultimate_bound_gamma(&betas(), 200.0, &sup()).unwrap();
        let g2 = ultimate_bound_gamma(&betas(), 400.0, &sup()).unwrap();
        assert_relative_eq!(g1, 2.0 * g2, max_relative = 1e-15);
        let expected = (0.3 * 10.0 + 0.5 * 2.0 * 2.5 + 2.0 + 0.1 + 0.4) / (200.0 * 1.2);
        assert_relative_eq!(g1, expected, max_relative = 1e-15);
    }

    #[test]
    fn gamma_rejects_bad_denominator() {
        assert!(ultimate_bound_gamma(&betas(), 0.0, &sup()).is_err());
        let b = BetaConstants {
            beta_mn_min: 0.0,
            ..betas()
        };
        assert!(ultimate_bound_gamma(&b, 200.0, &sup()).is_err());
    }

    #[test]
    fn scalar_bandwidth_limit() {
        let b = BetaConstants {
            beta_m_min: 0.7,
            beta_mn_max: 0.7,
            ..betas()
        };
        assert_relative_eq!(bandwidth_upper_bound(&b, 1000.0).unwrap(), 500.0);
        let doubled = BetaConstants { beta_mn_max: 1.4, ..b };
        assert_relative_eq!(bandwidth_upper_bound(&doubled, 1000.0).unwrap(), 250.0);
        assert!(bandwidth_upper_bound(&b, 0.0).is_err());
    }

    #[test]
    fn one_point_grid_with_matching_nominal_inertia() {
        let model = ManipulatorModel::three_link_bench(9.81);
        let q0 = Vector::from_vec(vec![0.2, 0.7, -0.4]);
        let cfg = ControllerConfig::uniform(model.mass_matrix(&q0), 200.0, 25.0, 250.0).unwrap();
        let ws = WorkspaceBox::point(q0, Vector::from_element(3, 1.0)).unwrap();
        let b = estimate_betas(&model, &cfg, &ws, 0.0).unwrap();
        assert!(b.beta_dm_min.abs() < 1e-15);
        assert!(b.beta_dm_max.abs() < 1e-15);
    }

    #[test]
    fn inertia_difference_crossing_zero_gives_zero_minimum() {
        let model = ManipulatorModel::three_link_bench(0.0);
        let ws = WorkspaceBox::full_turn(3, 5.0, 9).unwrap();
        let probe = ControllerConfig::uniform(Matrix::identity(3, 3), 200.0, 25.0, 250.0).unwrap();
        let b = estimate_betas(&model, &probe, &ws, 0.0).unwrap();
        // a scalar M_n between the extreme eigenvalues of M(q) crosses one of them
        let mid = 0.5 * (b.beta_m_min + b.beta_m_max);
        let cfg = probe.with_nominal_inertia(Matrix::identity(3, 3) * mid).unwrap();
        assert_eq!(estimate_betas(&model, &cfg, &ws, 0.0).unwrap().beta_dm_min, 0.0);
        let big = ControllerConfig::uniform(Matrix::identity(3, 3) * (2.0 * b.beta_m_max), 200.0, 25.0, 250.0).unwrap();
        assert!(estimate_betas(&model, &big, &ws, 0.0).unwrap().beta_dm_min > 0.0);
    }

    #[test]
    fn zero_gravity_beta() {
        let model = ManipulatorModel::three_link_bench(0.0);
        let cfg = ControllerConfig::uniform(Matrix::identity(3, 3) * 0.05, 200.0, 25.0, 250.0).unwrap();
        let ws = WorkspaceBox::full_turn(3, 5.0, 5).unwrap();
        assert_eq!(estimate_betas(&model, &cfg, &ws, 0.0).unwrap().beta_g, 0.0);
    }

    #[test]
    fn dominance_classes() {
        let model = ManipulatorModel::three_link_bench(0.0);
        let ws = WorkspaceBox::full_turn(3, 5.0, 9).unwrap();
        let probe = ControllerConfig::uniform(Matrix::identity(3, 3), 200.0, 25.0, 250.0).unwrap();
        let b = estimate_betas(&model, &probe, &ws, 0.0).unwrap();
        let big = probe
            .clone()
            .with_nominal_inertia(Matrix::identity(3, 3) * (2.0 * b.beta_m_max))
            .unwrap();
        assert_eq!(nominal_dominance(&model, &big, &ws).unwrap(), Dominance::Dominant);
        let small = probe
            .clone()
            .with_nominal_inertia(Matrix::identity(3, 3) * 0.01)
            .unwrap();
        // λ_min(M(q)) < 0.01 < λ_max(M(q)) everywhere on this arm, so ΔM is
        // indefinite at every grid point
        assert_eq!(nominal_dominance(&model, &small, &ws).unwrap(), Dominance::Indefinite);
        let tiny = probe
            .with_nominal_inertia(Matrix::identity(3, 3) * (0.5 * b.beta_m_min))
            .unwrap();
        assert_eq!(nominal_dominance(&model, &tiny, &ws).unwrap(), Dominance::Dominated);
    }

    #[test]
    fn refinement_is_nested() {
        let ws = WorkspaceBox::full_turn(2, 1.0, 5).unwrap();
        let fine = ws.refined(10);
        assert_eq!(fine.grid_points_per_dim, 41);
        let coarse: Vec<_> = ws.configurations().collect();
        let fine_pts: Vec<_> = fine.configurations().collect();
        for p in &coarse {
            assert!(fine_pts.iter().any(|f| (f - p).amax() < 1e-12));
        }
    }

    #[test]
    fn box_validation() {
        let z = Vector::zeros(2);
        let one = Vector::from_element(2, 1.0);
        assert!(WorkspaceBox::new(one.clone(), z.clone(), one.clone(), 5).is_err());
        assert!(WorkspaceBox::new(z.clone(), one.clone(), one.clone(), 2).is_err());
        assert!(WorkspaceBox::new(z.clone(), one.clone(), -&one, 5).is_err());
        assert!(WorkspaceBox::new(z, one.clone(), one, 3).is_ok());
    }

    #[test]
    fn friction_bound_is_corner_value() {
        let links = vec![LinkParams::point_mass(1.0, 1.0).unwrap(); 2];
        let model = ManipulatorModel::with_friction(
            links,
            0.0,
            Vector::from_vec(vec![0.1, 0.2]),
            Vector::from_vec(vec![0.3, 0.05]),
        )
        .unwrap();
        let bound = friction_bound(&model, &Vector::from_vec(vec![2.0, 3.0]));
        let expected = ((0.2f64 + 0.3).powi(2) + (0.6f64 + 0.05).powi(2)).sqrt();
        assert_relative_eq!(bound, expected, max_relative = 1e-12);
    }
}
