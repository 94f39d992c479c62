//! Theory quantities along a run and the run verdict.
//!
//! With `e_D = q̇ − q̇_des` the closed loop obeys
//!
//! ```text
//! M ė_D + C e_D + G M_n e_D + ψ = 0,
//! ψ = ΔM q̈_des + C q̇_des + g + τ_fric + τ_load,   ΔM = M − M_n
//! ```
//!
//! and `V = ½ e_Dᵀ M e_D` has `V̇ = −e_Dᵀ G M_n e_D − e_Dᵀ ψ` once the
//! skew-symmetric part `½ Ṁ − C` is dropped. Everything here is plain
//! post-processing of a [`RunLog`].

use serde::{Deserialize, Serialize};

use crate::bounds::{
    disturbance_bound, estimate_betas_with, ultimate_bound_gamma, BetaConstants, SignalSuprema, WorkspaceBox,
};
use crate::controller::ControllerConfig;
use crate::dynamics::{ManipulatorModel, Matrix, Vector};
use crate::error::Result;
use crate::par::Exec;
use crate::simulation::{LogStep, RunLog, Scenario};

/// Default share of the horizon used as the settle window.
pub const DEFAULT_SETTLE_FRACTION: f64 = 0.2;
pub const DEFAULT_POSITION_TOLERANCE: f64 = 1e-3;
pub const DEFAULT_DYNAMIC_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Bounded,
    /// Finite but the settled `‖e_D‖` exceeds the a-posteriori `Γ`.
    BoundedGammaViolated,
    Divergent,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Bounded => "bounded",
            Verdict::BoundedGammaViolated => "bounded_gamma_violated",
            Verdict::Divergent => "divergent",
        })
    }
}

/// Per-step theory quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryStep {
    pub t: f64,
    pub e: Vector,
    pub e_d: Vector,
    pub psi: Vector,
    pub v: f64,
    pub vdot_analytic: f64,
    /// Five-point difference of `V`; `None` near the ends and wherever the
    /// stencil straddles a load switch.
    pub vdot_numeric: Option<f64>,
    pub residual_norm: f64,
    pub passivity_running: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TheoryTrace {
    pub steps: Vec<TheoryStep>,
}

/// `ė + K_D e + K_P ∫e` with the integral accumulated by the trapezoid rule
/// from `integral0` at the first log entry.
pub fn dynamic_error(steps: &[LogStep], kd: &Vector, kp: &Vector, integral0: &Vector) -> Vec<Vector> {
    let mut integral = integral0.clone();
    let mut prev: Option<(f64, Vector)> = None;
    steps
        .iter()
        .map(|s| {
            let e = s.error();
            if let Some((t0, e0)) = &prev {
                integral += (e0 + &e) * (0.5 * (s.t - t0));
            }
            let out = s.error_rate() + kd.component_mul(&e) + kp.component_mul(&integral);
            prev = Some((s.t, e));
            out
        })
        .collect()
}

/// Initial value of `∫e` that makes `ė + K_D e + K_P ∫e` start at
/// `q̇(0) − q̇_des(0)`. Joints without position gain keep a zero integral.
pub fn consistent_integral(first: &LogStep, kd: &Vector, kp: &Vector) -> Vector {
    let offset = first.dynamic_error() - first.error_rate() - kd.component_mul(&first.error());
    Vector::from_fn(offset.len(), |i, _| if kp[i] != 0.0 { offset[i] / kp[i] } else { 0.0 })
}

/// `ψ = (M − M_n) q̈_des + C(q, q̇) q̇_des + g + τ_fric + τ_load`.
pub fn disturbance_psi(model: &ManipulatorModel, cfg: &ControllerConfig, step: &LogStep) -> Vector {
    let dm = model.mass_matrix(&step.q) - &cfg.nominal_inertia;
    dm * &step.qddot_des
        + model.coriolis_matrix(&step.q, &step.qdot) * &step.qdot_des
        + model.gravity_vector(&step.q)
        + model.friction_torque(&step.qdot)
        + &step.tau_load
}

/// `V = ½ e_Dᵀ M(q) e_D`.
pub fn lyapunov(model: &ManipulatorModel, e_d: &Vector, q: &Vector) -> f64 {
    0.5 * e_d.dot(&(model.mass_matrix(q) * e_d))
}

/// Torque injected by velocity measurement error, `G M_n (q̇_est − q̇)`.
/// Zero when the observer sees the exact joint speed.
pub fn measurement_torque(cfg: &ControllerConfig, step: &LogStep) -> Vector {
    cfg.weighted_nominal_inertia() * (&step.qdot_est - &step.qdot)
}

/// `V̇ = −e_Dᵀ G M_n e_D − e_Dᵀ (ψ + G M_n (q̇_est − q̇))`.
pub fn lyapunov_rate(model: &ManipulatorModel, cfg: &ControllerConfig, step: &LogStep) -> f64 {
    let e_d = step.dynamic_error();
    let psi = disturbance_psi(model, cfg, step) + measurement_torque(cfg, step);
    -e_d.dot(&(cfg.weighted_nominal_inertia() * &e_d)) - e_d.dot(&psi)
}

/// `M ė_D + C e_D + G M_n e_D + ψ + G M_n (q̇_est − q̇)` with `ė_D = q̈ − q̈_des`.
pub fn error_dynamics_residual(model: &ManipulatorModel, cfg: &ControllerConfig, step: &LogStep) -> Vector {
    let e_d = step.dynamic_error();
    let m = model.mass_matrix(&step.q);
    m * (&step.qddot - &step.qddot_des)
        + model.coriolis_matrix(&step.q, &step.qdot) * &e_d
        + cfg.weighted_nominal_inertia() * &e_d
        + disturbance_psi(model, cfg, step)
        + measurement_torque(cfg, step)
}

/// Worst-case `‖ψ‖` at one step from the β constants.
pub fn step_disturbance_bound(betas: &BetaConstants, step: &LogStep) -> f64 {
    disturbance_bound(betas, step.qddot_des.norm(), step.qdot.norm(), step.qdot_des.norm())
}

/// `g β_Mn_min ‖e_D‖ − B`; positive means `V̇ ≤ −‖e_D‖ · margin < 0`.
pub fn sufficient_condition_margin(betas: &BetaConstants, g_dob: f64, step: &LogStep) -> f64 {
    g_dob * betas.beta_mn_min * step.dynamic_error().norm() - step_disturbance_bound(betas, step)
}

/// Trapezoid running integral of `e_Dᵀ ψ`.
pub fn passivity_integral(times: &[f64], e_d: &[Vector], psi: &[Vector]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        if k > 0 {
            let a = e_d[k - 1].dot(&psi[k - 1]);
            let b = e_d[k].dot(&psi[k]);
            acc += 0.5 * (a + b) * (times[k] - times[k - 1]);
        }
        out.push(acc);
    }
    out
}

/// Infimum of a running integral and whether it stays finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassivityReport {
    pub infimum: f64,
    pub final_value: f64,
    /// Estimated `ϕ = −min(0, inf ∫ e_Dᵀψ)`.
    pub phi: f64,
    pub bounded_below: bool,
}

pub fn passivity_report(running: &[f64]) -> PassivityReport {
    let infimum = running.iter().copied().fold(0.0, f64::min);
    PassivityReport {
        infimum,
        final_value: running.last().copied().unwrap_or(0.0),
        phi: (-infimum).max(0.0),
        bounded_below: running.iter().all(|v| v.is_finite()),
    }
}

/// Five-point central difference of a uniformly sampled series.
pub fn five_point_derivative(values: &[f64], h: f64) -> Vec<Option<f64>> {
    let n = values.len();
    (0..n)
        .map(|k| {
            if k < 2 || k + 2 >= n {
                return None;
            }
            Some((values[k - 2] - 8.0 * values[k - 1] + 8.0 * values[k + 1] - values[k + 2]) / (12.0 * h))
        })
        .collect()
}

/// Everything the theory needs besides the run itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub workspace: WorkspaceBox,
    pub settle_fraction: f64,
    pub position_tolerance: f64,
    pub dynamic_tolerance: f64,
    /// Bandwidth of the velocity measurement used in the bandwidth check;
    /// `None` falls back to the controller's filter, then to 1000 rad/s.
    pub measurement_bandwidth: Option<f64>,
    /// Declared suprema for the a-priori `Γ`.
    pub declared_suprema: Option<SignalSuprema>,
}

impl AnalysisConfig {
    pub fn new(workspace: WorkspaceBox) -> Self {
        Self {
            workspace,
            settle_fraction: DEFAULT_SETTLE_FRACTION,
            position_tolerance: DEFAULT_POSITION_TOLERANCE,
            dynamic_tolerance: DEFAULT_DYNAMIC_TOLERANCE,
            measurement_bandwidth: None,
            declared_suprema: None,
        }
    }

    pub fn measurement_bandwidth(&self, cfg: &ControllerConfig) -> f64 {
        self.measurement_bandwidth.unwrap_or(if cfg.filters_velocity() {
            cfg.velocity_bandwidth
        } else {
            1000.0
        })
    }
}

/// Settled-window statistics and the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub settle_start: f64,
    pub settled_max_e: f64,
    pub settled_max_e_d: f64,
}

/// Classifies a run. `horizon` is the intended duration, so that the
/// settle window of a diverged run is well defined.
pub fn classify_run(
    log: &RunLog,
    horizon: f64,
    gamma: f64,
    settle_fraction: f64,
    position_tolerance: f64,
    dynamic_tolerance: f64,
) -> Classification {
    let settle_start = horizon * (1.0 - settle_fraction);
    let settled = log.steps.iter().filter(|s| s.t >= settle_start - 1e-12);
    let (mut max_e, mut max_ed) = (0.0f64, 0.0f64);
    let mut finite = true;
    for s in settled {
        let (e, ed) = (s.error().norm(), s.dynamic_error().norm());
        finite &= e.is_finite() && ed.is_finite();
        max_e = max_e.max(e);
        max_ed = max_ed.max(ed);
    }
    let verdict = if log.diverged() || !finite || log.steps.is_empty() {
        Verdict::Divergent
    } else if max_e < position_tolerance && max_ed < dynamic_tolerance {
        Verdict::Converged
    } else if max_ed <= gamma {
        Verdict::Bounded
    } else {
        Verdict::BoundedGammaViolated
    };
    Classification {
        verdict,
        settle_start,
        settled_max_e: max_e,
        settled_max_e_d: max_ed,
    }
}

/// Whole-run suprema of the signals entering `Γ`.
pub fn measured_suprema(steps: &[LogStep]) -> SignalSuprema {
    steps.iter().fold(
        SignalSuprema {
            qddot_des: 0.0,
            qdot: 0.0,
            qdot_des: 0.0,
        },
        |acc, s| SignalSuprema {
            qddot_des: acc.qddot_des.max(s.qddot_des.norm()),
            qdot: acc.qdot.max(s.qdot.norm()),
            qdot_des: acc.qdot_des.max(s.qdot_des.norm()),
        },
    )
}

/// Summary of one analysed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub verdict: Verdict,
    pub classification: Classification,
    pub betas: BetaConstants,
    pub suprema: SignalSuprema,
    pub gamma_post: Option<f64>,
    pub gamma_prior: Option<f64>,
    pub passivity: PassivityReport,
    pub v_min: f64,
    /// Largest error-dynamics residual `‖M ė_D + C e_D + g M_n e_D + ψ + measurement torque‖`.
    pub max_residual: f64,
    /// Largest `residual / max(1, ‖ψ‖)` over the run.
    pub max_scaled_residual: f64,
    /// Largest `|τ̂_dis − g M_n (q̇_des − q̇)|` when the algebraic form exists.
    pub realization_max_deviation: Option<f64>,
    /// Steps with positive margin and `V̇ > 0`.
    pub margin_violations: usize,
    pub steps_with_positive_margin: usize,
    /// Largest `|V̇_analytic − V̇_numeric| / max(1, |V̇_analytic|)`.
    pub vdot_max_mismatch: Option<f64>,
    /// Share of steps with `e_Dᵀ q̈_des > 0` (diagnostic only).
    pub ed_qddot_des_positive_share: f64,
    pub saturated_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub trace: TheoryTrace,
    pub report: AnalysisReport,
}

/// Runs every monitor over a finished (or aborted) run.
pub fn analyze(scenario: &Scenario, log: &RunLog, cfg: &AnalysisConfig, exec: Exec) -> Result<Analysis> {
    let model = &scenario.model;
    let ctl = &scenario.controller;
    let betas = estimate_betas_with(
        exec,
        model,
        ctl,
        &cfg.workspace,
        scenario.disturbances.declared_load_bound,
    )?;
    let g = ctl.uniform_bandwidth().unwrap_or_else(|| ctl.dob_bandwidth.min());
    let suprema = measured_suprema(&log.steps);
    let gamma_post = ultimate_bound_gamma(&betas, g, &suprema).ok();
    let gamma_prior = match &cfg.declared_suprema {
        Some(sup) => ultimate_bound_gamma(&betas, g, sup).ok(),
        None => None,
    };

    let times: Vec<f64> = log.steps.iter().map(|s| s.t).collect();
    let e_d: Vec<Vector> = log.steps.iter().map(LogStep::dynamic_error).collect();
    let psi: Vec<Vector> = log.steps.iter().map(|s| disturbance_psi(model, ctl, s)).collect();
    let v: Vec<f64> = log
        .steps
        .iter()
        .zip(&e_d)
        .map(|(s, ed)| lyapunov(model, ed, &s.q))
        .collect();
    let gm = ctl.weighted_nominal_inertia();
    let vdot: Vec<f64> = log
        .steps
        .iter()
        .zip(e_d.iter().zip(&psi))
        .map(|(s, (ed, p))| -ed.dot(&(&gm * ed)) - ed.dot(&(p + measurement_torque(ctl, s))))
        .collect();
    let mut vdot_num = five_point_derivative(&v, log.log_interval);
    for (k, d) in vdot_num.iter_mut().enumerate() {
        let lo = k.saturating_sub(2);
        let hi = (k + 2).min(log.steps.len() - 1);
        if log.steps[lo].tau_load != log.steps[hi].tau_load {
            *d = None;
        }
    }
    let passivity = passivity_integral(&times, &e_d, &psi);

    let mut steps = Vec::with_capacity(log.steps.len());
    let mut residual_max: f64 = 0.0;
    let mut scaled_residual: f64 = 0.0;
    let mut realization: Option<f64> = None;
    let mut violations = 0;
    let mut positive = 0;
    let mut vdot_mismatch: Option<f64> = None;
    let mut ed_qdd_positive = 0usize;
    for (k, s) in log.steps.iter().enumerate() {
        let residual = error_dynamics_residual(model, ctl, s).norm();
        residual_max = residual_max.max(residual);
        scaled_residual = scaled_residual.max(residual / psi[k].norm().max(1.0));
        if let Some(alg) = &s.tau_dis_alg {
            let dev = (&s.tau_dis_hat - alg).amax();
            realization = Some(realization.map_or(dev, |r: f64| r.max(dev)));
        }
        let margin = sufficient_condition_margin(&betas, g, s) - measurement_torque(ctl, s).norm();
        if margin > 0.0 {
            positive += 1;
            if vdot[k] > 0.0 {
                violations += 1;
            }
        }
        if let Some(num) = vdot_num[k] {
            let rel = (vdot[k] - num).abs() / vdot[k].abs().max(1.0);
            vdot_mismatch = Some(vdot_mismatch.map_or(rel, |m: f64| m.max(rel)));
        }
        if e_d[k].dot(&s.qddot_des) > 0.0 {
            ed_qdd_positive += 1;
        }
        steps.push(TheoryStep {
            t: s.t,
            e: s.error(),
            e_d: e_d[k].clone(),
            psi: psi[k].clone(),
            v: v[k],
            vdot_analytic: vdot[k],
            vdot_numeric: vdot_num[k],
            residual_norm: residual,
            passivity_running: passivity[k],
            margin,
        });
    }

    let classification = classify_run(
        log,
        scenario.sim.duration,
        gamma_post.unwrap_or(f64::INFINITY),
        cfg.settle_fraction,
        cfg.position_tolerance,
        cfg.dynamic_tolerance,
    );
    let report = AnalysisReport {
        verdict: classification.verdict,
        classification,
        betas,
        suprema,
        gamma_post,
        gamma_prior,
        passivity: passivity_report(&passivity),
        v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
        max_residual: residual_max,
        max_scaled_residual: scaled_residual,
        realization_max_deviation: realization,
        margin_violations: violations,
        steps_with_positive_margin: positive,
        vdot_max_mismatch: vdot_mismatch,
        ed_qddot_des_positive_share: if log.steps.is_empty() {
            0.0
        } else {
            ed_qdd_positive as f64 / log.steps.len() as f64
        },
        saturated_steps: log.steps.iter().filter(|s| s.saturated).count(),
    };
    Ok(Analysis {
        trace: TheoryTrace { steps },
        report,
    })
}

/// `M_n` with its off-diagonal part scaled by `s`: `diag(M_n) + s·offdiag(M_n)`.
pub fn scale_off_diagonal(m_n: &Matrix, s: f64) -> Matrix {
    Matrix::from_fn(m_n.nrows(), m_n.ncols(), |i, j| {
        if i == j {
            m_n[(i, j)]
        } else {
            s * m_n[(i, j)]
        }
    })
}
