//! Acceleration-based robust position controller.
//!
//! The outer loop turns the tracking error into a desired acceleration
//! `q̈_des = q̈_ref − K_D ė − K_P e` and a desired torque `τ_des = M_n q̈_des`.
//! The inner disturbance observer estimates the lumped disturbance through
//! the integrator filter `G/s` applied to `τ_des − M_n q̈`. Since `q̈` is not
//! measured, the observer is realized without it:
//!
//! ```text
//! ẇ = G τ_des,    τ̂_dis = w − G M_n q̇
//! ```
//!
//! which, for a scalar bandwidth `g` and `w(0) = g M_n q̇(0)`, is identical to
//! the algebraic form `τ̂_dis = g M_n (q̇_des − q̇)` with `q̇_des = q̇(0) + ∫ q̈_des`.

use nalgebra::SymmetricEigen;

use crate::dynamics::{Matrix, Vector};
use crate::error::{check_dim, Error, Result};

/// Position, velocity and acceleration of the reference at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSample {
    pub q: Vector,
    pub qdot: Vector,
    pub qddot: Vector,
}

impl ReferenceSample {
    pub fn hold(q: Vector) -> Self {
        let n = q.len();
        Self {
            q,
            qdot: Vector::zeros(n),
            qddot: Vector::zeros(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerConfig {
    /// Nominal inertia `M_n`, kg·m².
    pub nominal_inertia: Matrix,
    /// Per-joint observer bandwidth, rad/s.
    pub dob_bandwidth: Vector,
    /// Diagonal of `K_D`, 1/s.
    pub kd: Vector,
    /// Diagonal of `K_P`, 1/s².
    pub kp: Vector,
    /// Pseudo-derivative bandwidth, rad/s. Zero means the controller reads
    /// the exact joint velocity.
    pub velocity_bandwidth: f64,
    /// Optional symmetric torque limit per joint, N·m.
    pub torque_limit: Option<Vector>,
}

impl ControllerConfig {
    pub fn new(
        nominal_inertia: Matrix,
        dob_bandwidth: Vector,
        kd: Vector,
        kp: Vector,
        velocity_bandwidth: f64,
    ) -> Result<Self> {
        let cfg = Self {
            nominal_inertia,
            dob_bandwidth,
            kd,
            kp,
            velocity_bandwidth,
            torque_limit: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same scalar bandwidth and gains on every joint.
    pub fn uniform(nominal_inertia: Matrix, g_dob: f64, kd: f64, kp: f64) -> Result<Self> {
        let n = nominal_inertia.nrows();
        Self::new(
            nominal_inertia,
            Vector::from_element(n, g_dob),
            Vector::from_element(n, kd),
            Vector::from_element(n, kp),
            0.0,
        )
    }

    pub fn with_torque_limit(mut self, limit: Vector) -> Result<Self> {
        self.torque_limit = Some(limit);
        self.validate()?;
        Ok(self)
    }

    pub fn with_velocity_bandwidth(mut self, g_v: f64) -> Result<Self> {
        self.velocity_bandwidth = g_v;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nominal_inertia(mut self, m_n: Matrix) -> Result<Self> {
        self.nominal_inertia = m_n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_uniform_bandwidth(mut self, g_dob: f64) -> Result<Self> {
        self.dob_bandwidth = Vector::from_element(self.dof(), g_dob);
        self.validate()?;
        Ok(self)
    }

    pub fn dof(&self) -> usize {
        self.nominal_inertia.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nominal_inertia.nrows();
        check_dim("nominal inertia columns", n, self.nominal_inertia.ncols())?;
        check_dim("observer bandwidths", n, self.dob_bandwidth.len())?;
        check_dim("velocity gains", n, self.kd.len())?;
        check_dim("position gains", n, self.kp.len())?;
        let m = &self.nominal_inertia;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("nominal inertia must be finite".into()));
        }
        if (m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(Error::Config("nominal inertia must be symmetric".into()));
        }
        let lambda_min = SymmetricEigen::new(m.clone()).eigenvalues.min();
        if lambda_min <= 0.0 {
            return Err(Error::Config(format!(
                "nominal inertia must be positive definite (smallest eigenvalue {lambda_min:.4e})"
            )));
        }
        let nonneg = |v: &Vector| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !nonneg(&self.dob_bandwidth) || !nonneg(&self.kd) || !nonneg(&self.kp) {
            return Err(Error::Config(
                "bandwidths and gains must be finite and non-negative".into(),
            ));
        }
        if !(self.velocity_bandwidth.is_finite() && self.velocity_bandwidth >= 0.0) {
            return Err(Error::Config("velocity bandwidth must be non-negative".into()));
        }
        if let Some(limit) = &self.torque_limit {
            check_dim("torque limit", n, limit.len())?;
            if !limit.iter().all(|x| *x > 0.0) {
                return Err(Error::Config("torque limits must be positive".into()));
            }
        }
        Ok(())
    }

    /// The common observer bandwidth, if all joints share one.
    pub fn uniform_bandwidth(&self) -> Option<f64> {
        let g0 = self.dob_bandwidth[0];
        self.dob_bandwidth.iter().all(|&g| g == g0).then_some(g0)
    }

    /// `G M_n` with `G = diag(g_dob)`.
    pub fn weighted_nominal_inertia(&self) -> Matrix {
        Matrix::from_diagonal(&self.dob_bandwidth) * &self.nominal_inertia
    }

    /// Diagonal part `M_n^d`.
    pub fn nominal_diagonal(&self) -> Matrix {
        Matrix::from_diagonal(&self.nominal_inertia.diagonal())
    }

    /// Off-diagonal part `M_n^nd = M_n − M_n^d`.
    pub fn nominal_off_diagonal(&self) -> Matrix {
        &self.nominal_inertia - self.nominal_diagonal()
    }

    pub fn filters_velocity(&self) -> bool {
        self.velocity_bandwidth > 0.0
    }
}

/// Internal state of the observer and the velocity filter.
#[derive(Debug, Clone, PartialEq)]
pub struct DObState {
    /// Observer integrator `w`, N·m.
    pub w: Vector,
    /// Low-passed position `z` of the pseudo-derivative `v̂ = g_v (q − z)`, rad.
    pub filter: Vector,
}

impl DObState {
    /// Initial state matching the algebraic form at `t = 0` with the given
    /// initial disturbance estimate (usually zero).
    pub fn consistent(cfg: &ControllerConfig, q: &Vector, qdot: &Vector, tau_dis_hat: &Vector) -> Self {
        let w = tau_dis_hat + cfg.weighted_nominal_inertia() * qdot;
        let filter = if cfg.filters_velocity() {
            q - qdot / cfg.velocity_bandwidth
        } else {
            q.clone()
        };
        Self { w, filter }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerOutput {
    /// Applied torque (after optional saturation).
    pub tau: Vector,
    pub tau_des: Vector,
    pub tau_dis_hat: Vector,
    pub qddot_des: Vector,
    /// Velocity seen by the controller.
    pub qdot_est: Vector,
    pub saturated: bool,
}

/// `q̈_ref − K_D (q̇ − q̇_ref) − K_P (q − q_ref)`.
pub fn desired_acceleration(cfg: &ControllerConfig, q: &Vector, qdot: &Vector, reference: &ReferenceSample) -> Vector {
    let e = q - &reference.q;
    let edot = qdot - &reference.qdot;
    &reference.qddot - cfg.kd.component_mul(&edot) - cfg.kp.component_mul(&e)
}

/// `τ_des = M_n q̈_des`.
pub fn desired_torque(cfg: &ControllerConfig, qddot_des: &Vector) -> Vector {
    &cfg.nominal_inertia * qddot_des
}

/// Observer output `τ̂_dis = w − G M_n q̇`.
pub fn dob_output(cfg: &ControllerConfig, w: &Vector, qdot_meas: &Vector) -> Vector {
    w - cfg.weighted_nominal_inertia() * qdot_meas
}

/// Advances the observer integrator by one step with `τ_des` held over `dt`.
/// Returns the new state and the estimate at the start of the step.
pub fn dob_update(
    cfg: &ControllerConfig,
    dob: &DObState,
    tau_des: &Vector,
    qdot_meas: &Vector,
    dt: f64,
) -> (DObState, Vector) {
    debug_assert!(dt > 0.0);
    let tau_dis_hat = dob_output(cfg, &dob.w, qdot_meas);
    // the input is constant over the step, so every explicit scheme agrees
    let w = &dob.w + cfg.dob_bandwidth.component_mul(tau_des) * dt;
    (
        DObState {
            w,
            filter: dob.filter.clone(),
        },
        tau_dis_hat,
    )
}

/// `g M_n (q̇_des − q̇)`; only defined for a common bandwidth on all joints.
pub fn dob_estimate_algebraic(cfg: &ControllerConfig, qdot_des: &Vector, qdot: &Vector) -> Result<Vector> {
    let g = cfg
        .uniform_bandwidth()
        .ok_or_else(|| Error::Unsupported("algebraic observer form needs equal bandwidths on all joints".into()))?;
    Ok(&cfg.nominal_inertia * (qdot_des - qdot) * g)
}

/// Pseudo-derivative `v̂ = g_v s/(s + g_v) q`, one sample with the filter
/// state discretized exactly under a zero-order hold. Returns the new filter
/// state and the estimate at the start of the step.
pub fn velocity_filter(cfg: &ControllerConfig, filter: &Vector, q_meas: &Vector, dt: f64) -> (Vector, Vector) {
    let g_v = cfg.velocity_bandwidth;
    let v_hat = (q_meas - filter) * g_v;
    let blend = -(-g_v * dt).exp_m1();
    let next = filter + (q_meas - filter) * blend;
    (next, v_hat)
}

/// Continuous-time evaluation used inside the integrator: controller output
/// plus time derivatives of the observer and filter states.
pub fn evaluate(
    cfg: &ControllerConfig,
    dob: &DObState,
    q_meas: &Vector,
    qdot: &Vector,
    reference: &ReferenceSample,
) -> (ControllerOutput, DObState) {
    let (qdot_est, filter_rate) = if cfg.filters_velocity() {
        let v_hat = (q_meas - &dob.filter) * cfg.velocity_bandwidth;
        (v_hat.clone(), v_hat)
    } else {
        (qdot.clone(), Vector::zeros(qdot.len()))
    };
    let out = compose(cfg, &dob.w, q_meas, qdot_est, reference);
    let rates = DObState {
        w: cfg.dob_bandwidth.component_mul(&out.tau_des),
        filter: filter_rate,
    };
    (out, rates)
}

/// One sampled control step: velocity estimation, outer loop, observer
/// update and torque composition.
pub fn control_torque(
    cfg: &ControllerConfig,
    dob: &DObState,
    q_meas: &Vector,
    qdot: &Vector,
    reference: &ReferenceSample,
    dt: f64,
) -> (ControllerOutput, DObState) {
    let (filter, qdot_est) = if cfg.filters_velocity() {
        velocity_filter(cfg, &dob.filter, q_meas, dt)
    } else {
        (dob.filter.clone(), qdot.clone())
    };
    let out = compose(cfg, &dob.w, q_meas, qdot_est, reference);
    let (next, _) = dob_update(cfg, dob, &out.tau_des, &out.qdot_est, dt);
    (out, DObState { w: next.w, filter })
}

fn compose(
    cfg: &ControllerConfig,
    w: &Vector,
    q_meas: &Vector,
    qdot_est: Vector,
    reference: &ReferenceSample,
) -> ControllerOutput {
    let qddot_des = desired_acceleration(cfg, q_meas, &qdot_est, reference);
    let tau_des = desired_torque(cfg, &qddot_des);
    let tau_dis_hat = dob_output(cfg, w, &qdot_est);
    let mut tau = &tau_des + &tau_dis_hat;
    let mut saturated = false;
    if let Some(limit) = &cfg.torque_limit {
        for (t, &l) in tau.iter_mut().zip(limit.iter()) {
            if t.abs() > l {
                *t = t.clamp(-l, l);
                saturated = true;
            }
        }
    }
    ControllerOutput {
        tau,
        tau_des,
        tau_dis_hat,
        qddot_des,
        qdot_est,
        saturated,
    }
}

/// Nominal inertia of the experimental three-link arm (diagonal plus
/// off-diagonal part). Note that this matrix is slightly indefinite.
pub fn experimental_nominal_inertia() -> Matrix {
    Matrix::from_row_slice(
        3,
        3,
        &[
            0.0332, 0.00181, 0.00573, //
            0.00181, 0.0163, 0.00367, //
            0.00573, 0.00367, 0.00117,
        ],
    )
}
