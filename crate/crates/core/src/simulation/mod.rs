//! Closed-loop integration of plant, observer and outer loop.
//!
//! The integrated state is `x = [q, q̇, w, q̇_des, z]`: joint state, observer
//! integrator, running integral of `q̈_des` and the velocity-filter state.
//! Carrying `q̇_des` in the same state keeps `w − G M_n q̇_des` constant to
//! roundoff, so the observer output and its algebraic form coincide.

pub mod integrator;
pub mod kinematics;
pub mod reference;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use integrator::{integrator_step, Integrator};
pub use kinematics::{operational_to_joint, JointPath, OperationalCircle};
pub use reference::{reference_sample, Reference, SampledPath, DEFAULT_SMOOTHING};

use crate::controller::{
    control_torque, dob_estimate_algebraic, evaluate, ControllerConfig, ControllerOutput, DObState,
};
use crate::dynamics::{JointState, ManipulatorModel, Vector};
use crate::error::{check_dim, Error, Result};

/// Default divergence guard on `‖q − q_ref‖`, rad.
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 10.0;

/// Where the controller is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    /// At every integrator stage (continuous-time controller).
    #[default]
    Continuous,
    /// Once per step, torque held over the step.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub mode: ControllerMode,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    #[serde(default = "default_decimation")]
    pub log_decimation: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_DIVERGENCE_THRESHOLD
}

fn default_decimation() -> usize {
    1
}

impl SimConfig {
    pub fn new(dt: f64, duration: f64) -> Self {
        Self {
            dt,
            duration,
            integrator: Integrator::Rk4,
            mode: ControllerMode::Continuous,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            log_decimation: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration.is_finite() && self.duration > self.dt) {
            return Err(Error::Config("duration must exceed dt".into()));
        }
        if self.divergence_threshold.is_nan() || self.divergence_threshold <= 0.0 {
            return Err(Error::Config("divergence threshold must be positive".into()));
        }
        if self.log_decimation == 0 {
            return Err(Error::Config("log decimation must be at least 1".into()));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Load torque switched on at `time` (replaces the previous load).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadStep {
    pub time: f64,
    pub tau_load: Vector,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisturbanceSchedule {
    pub load_steps: Vec<LoadStep>,
    /// Declared bound on `‖τ_load‖`, N·m.
    pub declared_load_bound: f64,
}

impl DisturbanceSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        for (k, step) in self.load_steps.iter().enumerate() {
            check_dim("load torque", n, step.tau_load.len())?;
            if !step.time.is_finite() || step.time < 0.0 {
                return Err(Error::Config(format!("load step {k} has invalid time {}", step.time)));
            }
            let norm = step.tau_load.norm();
            if norm > self.declared_load_bound * (1.0 + 1e-12) {
                return Err(Error::Config(format!(
                    "load step {k} has ‖τ_load‖ = {norm} above the declared bound {}",
                    self.declared_load_bound
                )));
            }
        }
        if self.load_steps.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(Error::Config("load steps must be sorted by time".into()));
        }
        Ok(())
    }

    /// Load active at time `t` (steps take effect at their time stamp).
    pub fn load_at(&self, t: f64, n: usize) -> Vector {
        self.load_steps
            .iter()
            .rev()
            .find(|s| s.time <= t)
            .map_or_else(|| Vector::zeros(n), |s| s.tau_load.clone())
    }
}

/// Zero-mean uniform noise added to the measured joint positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoise {
    /// Half-width of the uniform distribution, rad.
    pub amplitude: f64,
    pub seed: u64,
}

/// Initial condition relative to the reference at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    /// `q(0) − q_ref(0)`, rad.
    pub position_error: Vector,
    /// `q̇(0)`, rad/s.
    pub velocity: Vector,
}

impl InitialCondition {
    pub fn at_rest(n: usize) -> Self {
        Self {
            position_error: Vector::zeros(n),
            velocity: Vector::zeros(n),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: ManipulatorModel,
    pub controller: ControllerConfig,
    pub reference: Reference,
    pub disturbances: DisturbanceSchedule,
    pub sim: SimConfig,
    pub initial: InitialCondition,
    pub noise: Option<MeasurementNoise>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.model.dof();
        check_dim("controller", n, self.controller.dof())?;
        check_dim("reference", n, self.reference.dof())?;
        check_dim("initial position error", n, self.initial.position_error.len())?;
        check_dim("initial velocity", n, self.initial.velocity.len())?;
        self.controller.validate()?;
        self.reference.validate()?;
        self.disturbances.validate(n)?;
        self.sim.validate()?;
        if let Some(noise) = &self.noise {
            if !(noise.amplitude.is_finite() && noise.amplitude >= 0.0) {
                return Err(Error::Config("noise amplitude must be non-negative".into()));
            }
        }
        Ok(())
    }
}

/// One logged instant; every controller quantity is the one applied at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogStep {
    pub t: f64,
    pub q: Vector,
    pub qdot: Vector,
    pub q_ref: Vector,
    pub qdot_ref: Vector,
    pub qddot_ref: Vector,
    pub qdot_des: Vector,
    pub qddot_des: Vector,
    /// Plant acceleration from the forward dynamics.
    pub qddot: Vector,
    pub tau: Vector,
    pub tau_des: Vector,
    pub tau_dis_hat: Vector,
    /// Algebraic observer output, when the bandwidth is uniform.
    pub tau_dis_alg: Option<Vector>,
    pub tau_load: Vector,
    pub tau_fric: Vector,
    pub qdot_est: Vector,
    pub saturated: bool,
}

impl LogStep {
    pub fn error(&self) -> Vector {
        &self.q - &self.q_ref
    }

    pub fn error_rate(&self) -> Vector {
        &self.qdot - &self.qdot_ref
    }

    /// `e_D = q̇ − q̇_des`.
    pub fn dynamic_error(&self) -> Vector {
        &self.qdot - &self.qdot_des
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Outcome {
    Completed,
    Diverged { t: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub steps: Vec<LogStep>,
    pub outcome: Outcome,
    pub warnings: Vec<String>,
    /// Time between consecutive log entries, s.
    pub log_interval: f64,
}

impl RunLog {
    pub fn diverged(&self) -> bool {
        matches!(self.outcome, Outcome::Diverged { .. })
    }
}

/// Offsets of the blocks inside the integrated state.
struct Layout {
    n: usize,
}

impl Layout {
    fn len(&self) -> usize {
        5 * self.n
    }
    fn block(&self, x: &Vector, k: usize) -> Vector {
        x.rows(k * self.n, self.n).into_owned()
    }
    fn assemble(&self, blocks: [&Vector; 5]) -> Vector {
        let mut x = Vector::zeros(self.len());
        for (k, b) in blocks.iter().enumerate() {
            x.rows_mut(k * self.n, self.n).copy_from(b);
        }
        x
    }
}

struct Evaluated {
    out: ControllerOutput,
    rates: DObState,
    qddot: Vector,
}

/// Integrates the closed loop. Instability is reported through
/// [`RunLog::outcome`]; errors are reserved for invalid scenarios.
pub fn run_scenario(scenario: &Scenario) -> Result<RunLog> {
    scenario.validate()?;
    let Scenario {
        model,
        controller: cfg,
        reference,
        disturbances,
        sim,
        initial,
        noise,
    } = scenario;
    let n = model.dof();
    let layout = Layout { n };
    let dt = sim.dt;
    let steps = sim.step_count();

    let mut warnings = Vec::new();
    if !reference.is_continuous() {
        warnings.push("raw step reference: the theory assumes continuous references".into());
    }
    if cfg.torque_limit.is_some() {
        warnings.push("torque saturation enabled: the theory assumes none".into());
    }

    let r0 = reference.sample(0.0);
    let q0 = &r0.q + &initial.position_error;
    let qdot0 = initial.velocity.clone();
    let dob0 = DObState::consistent(cfg, &q0, &qdot0, &Vector::zeros(n));
    let mut x = layout.assemble([&q0, &qdot0, &dob0.w, &qdot0, &dob0.filter]);

    let mut rng = noise.map(|nz| (ChaCha8Rng::seed_from_u64(nz.seed), nz.amplitude));
    let mut draw_noise = || match rng.as_mut() {
        Some((rng, amp)) if *amp > 0.0 => {
            let amp = *amp;
            Vector::from_fn(n, |_, _| rng.random_range(-amp..=amp))
        }
        _ => Vector::zeros(n),
    };

    let continuous = |t: f64, x: &Vector, noise: &Vector, load: &Vector| -> Result<Evaluated> {
        let q = layout.block(x, 0);
        let qdot = layout.block(x, 1);
        let dob = DObState {
            w: layout.block(x, 2),
            filter: layout.block(x, 4),
        };
        let q_meas = &q + noise;
        let (out, rates) = evaluate(cfg, &dob, &q_meas, &qdot, &reference.sample(t));
        let state = JointState { q, qdot };
        let qddot = model.forward_dynamics(&state, &out.tau, load)?;
        Ok(Evaluated { out, rates, qddot })
    };

    let mut log = Vec::with_capacity(steps / sim.log_decimation + 1);
    let mut outcome = Outcome::Completed;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let nz = draw_noise();
        let load = disturbances.load_at(t, n);
        let q = layout.block(&x, 0);
        let qdot = layout.block(&x, 1);
        let r = reference.sample(t);

        if let Some(reason) = divergence(&q, &qdot, &r.q, sim.divergence_threshold) {
            outcome = Outcome::Diverged { t, reason };
            break;
        }

        // controller output and plant response at the start of the step
        let dob = DObState {
            w: layout.block(&x, 2),
            filter: layout.block(&x, 4),
        };
        let (out, next_dob) = match sim.mode {
            ControllerMode::Continuous => {
                let (out, _) = evaluate(cfg, &dob, &(&q + &nz), &qdot, &r);
                (out, None)
            }
            ControllerMode::Sampled => {
                let (out, next) = control_torque(cfg, &dob, &(&q + &nz), &qdot, &r, dt);
                (out, Some(next))
            }
        };
        let state = JointState {
            q: q.clone(),
            qdot: qdot.clone(),
        };
        let qddot = match model.forward_dynamics(&state, &out.tau, &load) {
            Ok(a) => a,
            Err(err) => {
                outcome = Outcome::Diverged {
                    t,
                    reason: err.to_string(),
                };
                break;
            }
        };

        if k % sim.log_decimation == 0 {
            let qdot_des = layout.block(&x, 3);
            let tau_dis_alg = dob_estimate_algebraic(cfg, &qdot_des, &out.qdot_est).ok();
            log.push(LogStep {
                t,
                tau_fric: model.friction_torque(&qdot),
                q: q.clone(),
                qdot: qdot.clone(),
                q_ref: r.q,
                qdot_ref: r.qdot,
                qddot_ref: r.qddot,
                qdot_des,
                qddot_des: out.qddot_des.clone(),
                qddot,
                tau: out.tau.clone(),
                tau_des: out.tau_des.clone(),
                tau_dis_hat: out.tau_dis_hat.clone(),
                tau_dis_alg,
                tau_load: load.clone(),
                qdot_est: out.qdot_est.clone(),
                saturated: out.saturated,
            });
        }
        if k == steps {
            break;
        }

        let stepped = match next_dob {
            None => integrator_step(
                sim.integrator,
                |ts, xs: &Vector| {
                    let ev = continuous(ts, xs, &nz, &load)?;
                    Ok::<_, Error>(layout.assemble([
                        &layout.block(xs, 1),
                        &ev.qddot,
                        &ev.rates.w,
                        &ev.out.qddot_des,
                        &ev.rates.filter,
                    ]))
                },
                t,
                &x,
                dt,
            ),
            Some(next) => {
                let plant = x.rows(0, 2 * n).into_owned();
                integrator_step(
                    sim.integrator,
                    |_, xs: &Vector| {
                        let state = JointState {
                            q: xs.rows(0, n).into_owned(),
                            qdot: xs.rows(n, n).into_owned(),
                        };
                        let a = model.forward_dynamics(&state, &out.tau, &load)?;
                        let mut d = Vector::zeros(2 * n);
                        d.rows_mut(0, n).copy_from(&state.qdot);
                        d.rows_mut(n, n).copy_from(&a);
                        Ok::<_, Error>(d)
                    },
                    t,
                    &plant,
                    dt,
                )
                .map(|p| {
                    let qdot_des = layout.block(&x, 3) + &out.qddot_des * dt;
                    let q1 = p.rows(0, n).into_owned();
                    let v1 = p.rows(n, n).into_owned();
                    layout.assemble([&q1, &v1, &next.w, &qdot_des, &next.filter])
                })
            }
        };
        match stepped {
            Ok(next) => x = next,
            Err(err) => {
                outcome = Outcome::Diverged {
                    t,
                    reason: err.to_string(),
                };
                break;
            }
        }
    }

    if let Some(first_sat) = log.iter().find(|s| s.saturated) {
        warnings.push(format!("torque saturated first at t = {:.4} s", first_sat.t));
    }
    Ok(RunLog {
        steps: log,
        outcome,
        warnings,
        log_interval: dt * sim.log_decimation as f64,
    })
}

fn divergence(q: &Vector, qdot: &Vector, q_ref: &Vector, threshold: f64) -> Option<String> {
    if !q.iter().chain(qdot.iter()).all(|v| v.is_finite()) {
        return Some("non-finite state".into());
    }
    let e = (q - q_ref).norm();
    if e > threshold {
        return Some(format!(
            "‖e‖ = {e:.3} rad exceeds the divergence threshold {threshold} rad"
        ));
    }
    None
}
