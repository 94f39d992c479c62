//! JSON scenario files: parsing with field paths and resolution into a
//! runnable [`Scenario`].

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, DEFAULT_DYNAMIC_TOLERANCE, DEFAULT_POSITION_TOLERANCE, DEFAULT_SETTLE_FRACTION};
use crate::bounds::{inertia_eigen_range, SignalSuprema, WorkspaceBox};
use crate::controller::{experimental_nominal_inertia, ControllerConfig};
use crate::dynamics::{LinkParams, ManipulatorModel, Matrix, Vector};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::simulation::{
    operational_to_joint, ControllerMode, DisturbanceSchedule, InitialCondition, Integrator, LoadStep,
    MeasurementNoise, OperationalCircle, Reference, SampledPath, Scenario, SimConfig, DEFAULT_DIVERGENCE_THRESHOLD,
    DEFAULT_SMOOTHING,
};

/// A per-joint quantity: one number for every joint, or one per joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerJoint {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerJoint {
    fn resolve(&self, n: usize, path: &str) -> Result<Vector> {
        match self {
            PerJoint::Uniform(v) => Ok(Vector::from_element(n, *v)),
            PerJoint::Each(v) if v.len() == n => Ok(Vector::from_column_slice(v)),
            PerJoint::Each(v) => Err(schema(path, format!("expected {n} entries, got {}", v.len()))),
        }
    }
}

impl Default for PerJoint {
    fn default() -> Self {
        PerJoint::Uniform(0.0)
    }
}

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn vector(v: &[f64], n: usize, path: &str) -> Result<Vector> {
    if v.len() == n {
        Ok(Vector::from_column_slice(v))
    } else {
        Err(schema(path, format!("expected {n} entries, got {}", v.len())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub model: ModelSpec,
    pub controller: ControllerSpec,
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub disturbances: DisturbanceSpec,
    pub sim: SimSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinksSpec {
    /// `"three_link_bench"`: the three 0.06 m links of the experimental arm.
    Named(String),
    Explicit(Vec<LinkParams>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub links: LinksSpec,
    pub gravity_accel: f64,
    #[serde(default)]
    pub viscous_friction: PerJoint,
    #[serde(default)]
    pub coulomb_friction: PerJoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friction_smoothing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NominalInertiaSpec {
    Matrix(Vec<Vec<f64>>),
    IdentityTimes(f64),
    /// `c · β_M^min · I` over the analysis workspace.
    BetaMMinTimes(f64),
    /// `c · β_M^max · I` over the analysis workspace.
    BetaMMaxTimes(f64),
    /// `scale · M(q)`.
    MassMatrixAt {
        q: Vec<f64>,
        scale: f64,
    },
    /// Diagonal plus off-diagonal nominal inertia of the experimental arm.
    Experimental,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub nominal_inertia: NominalInertiaSpec,
    /// Multiplies the whole nominal inertia.
    #[serde(default = "one")]
    pub nominal_scale: f64,
    /// Multiplies only the off-diagonal entries of the nominal inertia.
    #[serde(default = "one")]
    pub off_diagonal_scale: f64,
    pub dob_bandwidth: PerJoint,
    pub kd: PerJoint,
    pub kp: PerJoint,
    #[serde(default)]
    pub velocity_bandwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_limit: Option<PerJoint>,
}

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

fn default_spacing() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Step {
        start: Vec<f64>,
        target: Vec<f64>,
        #[serde(default)]
        t_step: f64,
    },
    SmoothedStep {
        start: Vec<f64>,
        target: Vec<f64>,
        #[serde(default)]
        t_step: f64,
        #[serde(default = "default_smoothing")]
        time_constant: f64,
    },
    JointCircle {
        center: Vec<f64>,
        amplitude: Vec<f64>,
        period: f64,
        #[serde(default)]
        phase: Option<Vec<f64>>,
    },
    OperationalCircle {
        center: [f64; 2],
        radius: f64,
        period: f64,
        #[serde(default)]
        start_angle: f64,
        #[serde(default = "default_spacing")]
        sample_spacing: f64,
    },
    Samples {
        #[serde(default)]
        t0: f64,
        spacing: f64,
        q: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadStepSpec {
    pub time: f64,
    pub tau_load: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSpec {
    #[serde(default)]
    pub load_steps: Vec<LoadStepSpec>,
    /// Defaults to the largest scheduled `‖τ_load‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_load_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_noise: Option<MeasurementNoise>,
}

fn default_threshold() -> f64 {
    DEFAULT_DIVERGENCE_THRESHOLD
}

fn default_decimation() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
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
    /// `q(0) − q_ref(0)`, rad.
    #[serde(default)]
    pub initial_error: PerJoint,
    #[serde(default)]
    pub initial_velocity: PerJoint,
}

fn default_qdot_max() -> PerJoint {
    PerJoint::Uniform(10.0)
}

fn default_grid() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceSpec {
    /// Defaults to `−π` on every joint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_min: Option<PerJoint>,
    /// Defaults to `π` on every joint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<PerJoint>,
    #[serde(default = "default_qdot_max")]
    pub qdot_max: PerJoint,
    #[serde(default = "default_grid")]
    pub grid_points_per_dim: usize,
}

impl Default for WorkspaceSpec {
    fn default() -> Self {
        Self {
            q_min: None,
            q_max: None,
            qdot_max: default_qdot_max(),
            grid_points_per_dim: default_grid(),
        }
    }
}

fn default_settle() -> f64 {
    DEFAULT_SETTLE_FRACTION
}

fn default_e_tol() -> f64 {
    DEFAULT_POSITION_TOLERANCE
}

fn default_ed_tol() -> f64 {
    DEFAULT_DYNAMIC_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default)]
    pub workspace: WorkspaceSpec,
    #[serde(default = "default_settle")]
    pub settle_fraction: f64,
    #[serde(default = "default_e_tol")]
    pub position_tolerance: f64,
    #[serde(default = "default_ed_tol")]
    pub dynamic_tolerance: f64,
    /// Velocity measurement bandwidth for the bandwidth check, rad/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_suprema: Option<SignalSuprema>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            workspace: WorkspaceSpec::default(),
            settle_fraction: default_settle(),
            position_tolerance: default_e_tol(),
            dynamic_tolerance: default_ed_tol(),
            measurement_bandwidth: None,
            declared_suprema: None,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "yes")]
    pub plots: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { plots: true }
    }
}

/// Parses a scenario, reporting the path of the offending field.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| Error::Schema {
        path: err.path().to_string(),
        message: err.inner().to_string(),
    })
}

/// Sweepable parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GDob,
    MnScale,
    MnOffdiagScale,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GDob => "g_dob",
            SweepAxis::MnScale => "mn_scale",
            SweepAxis::MnOffdiagScale => "mn_offdiag_scale",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "g_dob" => Ok(SweepAxis::GDob),
            "mn_scale" => Ok(SweepAxis::MnScale),
            "mn_offdiag_scale" => Ok(SweepAxis::MnOffdiagScale),
            other => Err(schema(
                "axis",
                format!("unknown sweep axis `{other}` (expected g_dob, mn_scale or mn_offdiag_scale)"),
            )),
        }
    }

    /// Returns a copy of `file` with this parameter set to `value`:
    /// a uniform observer bandwidth, the overall nominal-inertia scale, or
    /// the off-diagonal scale.
    pub fn apply(self, file: &ScenarioFile, value: f64) -> ScenarioFile {
        let mut out = file.clone();
        match self {
            SweepAxis::GDob => out.controller.dob_bandwidth = PerJoint::Uniform(value),
            SweepAxis::MnScale => out.controller.nominal_scale = value,
            SweepAxis::MnOffdiagScale => out.controller.off_diagonal_scale = value,
        }
        out
    }

    pub fn validate_value(self, value: f64) -> Result<()> {
        let ok = match self {
            SweepAxis::MnOffdiagScale => value.is_finite() && value >= 0.0,
            _ => value.is_finite() && value > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(schema("values", format!("invalid {} value {value}", self.name())))
        }
    }
}

/// A scenario ready to simulate, plus what the monitors need.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub scenario: Scenario,
    pub analysis: AnalysisConfig,
    pub plots: bool,
    /// Non-fatal notes produced while resolving (e.g. near singularities).
    pub warnings: Vec<String>,
}

impl ScenarioFile {
    pub fn resolve(&self, exec: Exec) -> Result<ResolvedScenario> {
        let model = self.resolve_model()?;
        let n = model.dof();
        let workspace = self.resolve_workspace(n)?;
        let controller = self.resolve_controller(&model, &workspace, exec)?;
        let mut warnings = Vec::new();
        let reference = self.resolve_reference(&model, n, &mut warnings)?;
        let disturbances = self.resolve_disturbances(n)?;
        let sim = SimConfig {
            dt: self.sim.dt,
            duration: self.sim.duration,
            integrator: self.sim.integrator,
            mode: self.sim.mode,
            divergence_threshold: self.sim.divergence_threshold,
            log_decimation: self.sim.log_decimation,
        };
        sim.validate().map_err(|e| schema("sim", e.to_string()))?;
        let initial = InitialCondition {
            position_error: self.sim.initial_error.resolve(n, "sim.initial_error")?,
            velocity: self.sim.initial_velocity.resolve(n, "sim.initial_velocity")?,
        };
        let a = &self.analysis;
        if !(a.settle_fraction > 0.0 && a.settle_fraction <= 1.0) {
            return Err(schema("analysis.settle_fraction", "must lie in (0, 1]"));
        }
        if let Some(g_v) = a.measurement_bandwidth {
            if !(g_v.is_finite() && g_v > 0.0) {
                return Err(schema("analysis.measurement_bandwidth", "must be positive"));
            }
        }
        let analysis = AnalysisConfig {
            workspace,
            settle_fraction: a.settle_fraction,
            position_tolerance: a.position_tolerance,
            dynamic_tolerance: a.dynamic_tolerance,
            measurement_bandwidth: a.measurement_bandwidth,
            declared_suprema: a.declared_suprema,
        };
        let scenario = Scenario {
            model,
            controller,
            reference,
            disturbances,
            sim,
            initial,
            noise: self.disturbances.measurement_noise,
        };
        scenario.validate()?;
        Ok(ResolvedScenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            scenario,
            analysis,
            plots: self.output.plots,
            warnings,
        })
    }

    fn resolve_model(&self) -> Result<ManipulatorModel> {
        let m = &self.model;
        let links = match &m.links {
            LinksSpec::Named(name) if name == "three_link_bench" => {
                ManipulatorModel::three_link_bench(0.0).links().to_vec()
            }
            LinksSpec::Named(name) => {
                return Err(schema(
                    "model.links",
                    format!("unknown link set `{name}` (expected \"three_link_bench\")"),
                ))
            }
            LinksSpec::Explicit(links) => links.clone(),
        };
        let n = links.len();
        if !(2..=3).contains(&n) {
            return Err(schema("model.links", format!("expected 2 or 3 links, got {n}")));
        }
        for (k, link) in links.iter().enumerate() {
            link.validate()
                .map_err(|e| schema(&format!("model.links[{k}]"), e.to_string()))?;
        }
        let viscous = m.viscous_friction.resolve(n, "model.viscous_friction")?;
        let coulomb = m.coulomb_friction.resolve(n, "model.coulomb_friction")?;
        let mut model = ManipulatorModel::with_friction(links, m.gravity_accel, viscous, coulomb)
            .map_err(|e| schema("model", e.to_string()))?;
        if let Some(eps) = m.friction_smoothing {
            model = model
                .with_friction_smoothing(eps)
                .map_err(|e| schema("model.friction_smoothing", e.to_string()))?;
        }
        Ok(model)
    }

    fn resolve_workspace(&self, n: usize) -> Result<WorkspaceBox> {
        use std::f64::consts::PI;
        let w = &self.analysis.workspace;
        let q_min = match &w.q_min {
            Some(v) => v.resolve(n, "analysis.workspace.q_min")?,
            None => Vector::from_element(n, -PI),
        };
        let q_max = match &w.q_max {
            Some(v) => v.resolve(n, "analysis.workspace.q_max")?,
            None => Vector::from_element(n, PI),
        };
        let qdot_max = w.qdot_max.resolve(n, "analysis.workspace.qdot_max")?;
        WorkspaceBox::new(q_min, q_max, qdot_max, w.grid_points_per_dim)
            .map_err(|e| schema("analysis.workspace", e.to_string()))
    }

    fn resolve_controller(&self, model: &ManipulatorModel, ws: &WorkspaceBox, exec: Exec) -> Result<ControllerConfig> {
        let c = &self.controller;
        let n = model.dof();
        let base = match &c.nominal_inertia {
            NominalInertiaSpec::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(schema(
                        "controller.nominal_inertia.matrix",
                        format!("expected a {n}×{n} matrix"),
                    ));
                }
                Matrix::from_fn(n, n, |i, j| rows[i][j])
            }
            NominalInertiaSpec::IdentityTimes(c) => Matrix::identity(n, n) * *c,
            NominalInertiaSpec::BetaMMinTimes(c) => {
                Matrix::identity(n, n) * (*c * inertia_eigen_range(exec, model, ws)?.0)
            }
            NominalInertiaSpec::BetaMMaxTimes(c) => {
                Matrix::identity(n, n) * (*c * inertia_eigen_range(exec, model, ws)?.1)
            }
            NominalInertiaSpec::MassMatrixAt { q, scale } => {
                model.mass_matrix(&vector(q, n, "controller.nominal_inertia.mass_matrix_at.q")?) * *scale
            }
            NominalInertiaSpec::Experimental => {
                if n != 3 {
                    return Err(schema(
                        "controller.nominal_inertia",
                        "the experimental nominal inertia is 3×3",
                    ));
                }
                experimental_nominal_inertia()
            }
        };
        let m_n = crate::analysis::scale_off_diagonal(&base, c.off_diagonal_scale) * c.nominal_scale;
        let mut cfg = ControllerConfig {
            nominal_inertia: m_n,
            dob_bandwidth: c.dob_bandwidth.resolve(n, "controller.dob_bandwidth")?,
            kd: c.kd.resolve(n, "controller.kd")?,
            kp: c.kp.resolve(n, "controller.kp")?,
            velocity_bandwidth: c.velocity_bandwidth,
            torque_limit: None,
        };
        if let Some(limit) = &c.torque_limit {
            cfg.torque_limit = Some(limit.resolve(n, "controller.torque_limit")?);
        }
        cfg.validate().map_err(|e| schema("controller", e.to_string()))?;
        Ok(cfg)
    }

    fn resolve_reference(&self, model: &ManipulatorModel, n: usize, warnings: &mut Vec<String>) -> Result<Reference> {
        let reference = match &self.reference {
            ReferenceSpec::Step { start, target, t_step } => Reference::Step {
                start: vector(start, n, "reference.start")?,
                target: vector(target, n, "reference.target")?,
                t_step: *t_step,
            },
            ReferenceSpec::SmoothedStep {
                start,
                target,
                t_step,
                time_constant,
            } => Reference::SmoothedStep {
                start: vector(start, n, "reference.start")?,
                target: vector(target, n, "reference.target")?,
                t_step: *t_step,
                time_constant: *time_constant,
            },
            ReferenceSpec::JointCircle {
                center,
                amplitude,
                period,
                phase,
            } => Reference::JointCircle {
                center: vector(center, n, "reference.center")?,
                amplitude: vector(amplitude, n, "reference.amplitude")?,
                period: *period,
                phase: match phase {
                    Some(p) => vector(p, n, "reference.phase")?,
                    None => Vector::zeros(n),
                },
            },
            ReferenceSpec::OperationalCircle {
                center,
                radius,
                period,
                start_angle,
                sample_spacing,
            } => {
                let circle = OperationalCircle {
                    center: nalgebra::Vector2::new(center[0], center[1]),
                    radius: *radius,
                    period: *period,
                    start_angle: *start_angle,
                };
                let path =
                    operational_to_joint(model, &circle, self.sim.duration, *sample_spacing).map_err(|e| match e {
                        Error::Unreachable { .. } => schema("reference", e.to_string()),
                        other => other,
                    })?;
                warnings.extend(path.warnings);
                path.reference
            }
            ReferenceSpec::Samples { t0, spacing, q } => {
                let rows = q
                    .iter()
                    .enumerate()
                    .map(|(k, row)| vector(row, n, &format!("reference.q[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                Reference::Samples(
                    SampledPath::from_positions(*t0, *spacing, rows)
                        .map_err(|e| schema("reference.q", e.to_string()))?,
                )
            }
        };
        reference.validate().map_err(|e| schema("reference", e.to_string()))?;
        Ok(reference)
    }

    fn resolve_disturbances(&self, n: usize) -> Result<DisturbanceSchedule> {
        let d = &self.disturbances;
        let load_steps = d
            .load_steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                Ok(LoadStep {
                    time: s.time,
                    tau_load: vector(&s.tau_load, n, &format!("disturbances.load_steps[{k}].tau_load"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let largest = load_steps.iter().map(|s| s.tau_load.norm()).fold(0.0, f64::max);
        let schedule = DisturbanceSchedule {
            load_steps,
            declared_load_bound: d.declared_load_bound.unwrap_or(largest),
        };
        schedule
            .validate(n)
            .map_err(|e| schema("disturbances", e.to_string()))?;
        if let Some(noise) = &d.measurement_noise {
            if !(noise.amplitude.is_finite() && noise.amplitude >= 0.0) {
                return Err(schema(
                    "disturbances.measurement_noise.amplitude",
                    "must be non-negative",
                ));
            }
        }
        Ok(schedule)
    }
}
