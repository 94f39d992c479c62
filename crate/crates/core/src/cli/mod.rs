//! Command-line front end: scenario files, presets, single runs, sweeps and
//! static pre-flight checks.

pub mod presets;
pub mod schema;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, Analysis, AnalysisReport, Verdict};
use crate::bounds::{
    bandwidth_upper_bound, estimate_betas_with, max_inertia_ratio, nominal_dominance_with, ultimate_bound_gamma,
    BetaConstants, Dominance,
};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::simulation::{run_scenario, Outcome, RunLog};

pub use schema::{parse_scenario, ResolvedScenario, ScenarioFile, SweepAxis};
use svg::{Chart, Series};

/// Process exit code for invalid input.
pub const EXIT_INVALID: i32 = 2;
/// Process exit code for runtime failures (I/O and the like).
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "dobsim",
    version,
    about = "Disturbance-observer position control simulation lab"
)]
pub struct Cli {
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one scenario and write run.csv, summary.json and plots.
    Run {
        /// Scenario file, or the name of a built-in preset.
        scenario: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate variants of a scenario along one parameter axis.
    Sweep {
        scenario: String,
        /// g_dob, mn_scale or mn_offdiag_scale.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 100,200,400.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Static pre-flight report: β constants, dominance, bandwidth limit.
    Check { scenario: String },
    /// List built-in presets, or write them as JSON files.
    Presets {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

/// Executes a parsed command line, returning the text for stdout.
pub fn dispatch(cli: &Cli) -> Result<String> {
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    par::with_configured_pool(|| match &cli.command {
        Command::Run { scenario, out } => {
            let file = load_scenario(scenario)?;
            let result = run(&file, out, exec)?;
            Ok(format!(
                "{}: {} (outcome: {})\nwrote {}\n",
                result.summary.name,
                result.summary.report.verdict,
                outcome_text(&result.summary.outcome),
                out.display()
            ))
        }
        Command::Sweep {
            scenario,
            axis,
            values,
            out,
        } => {
            let file = load_scenario(scenario)?;
            let axis = SweepAxis::parse(axis)?;
            let rows = sweep(&file, axis, values, out, exec)?;
            let mut text = String::new();
            for row in &rows {
                text.push_str(&format!(
                    "{} = {}: {} (settled max ‖e‖ {:.3e}, ‖e_D‖ {:.3e})\n",
                    axis.name(),
                    row.value,
                    row.verdict,
                    row.settled_max_e,
                    row.settled_max_e_d
                ));
            }
            text.push_str(&format!("wrote {}\n", out.display()));
            Ok(text)
        }
        Command::Check { scenario } => {
            let file = load_scenario(scenario)?;
            Ok(check(&file, exec)?.to_string())
        }
        Command::Presets { out } => match out {
            None => Ok(presets::PRESETS
                .iter()
                .map(|p| format!("{:<28} {}\n", p.name, p.summary))
                .collect()),
            Some(dir) => {
                fs::create_dir_all(dir)?;
                for p in presets::PRESETS {
                    fs::write(dir.join(format!("{}.json", p.name)), p.json)?;
                }
                Ok(format!(
                    "wrote {} presets to {}\n",
                    presets::PRESETS.len(),
                    dir.display()
                ))
            }
        },
    })
}

fn outcome_text(o: &Outcome) -> String {
    match o {
        Outcome::Completed => "completed".into(),
        Outcome::Diverged { t, reason } => format!("stopped at t = {t:.4} s: {reason}"),
    }
}

/// Reads a scenario file, or a built-in preset when no such file exists.
pub fn load_scenario(source: &str) -> Result<ScenarioFile> {
    let path = Path::new(source);
    if path.exists() {
        parse_scenario(&fs::read_to_string(path)?)
    } else if let Some(p) = presets::find(source) {
        parse_scenario(p.json)
    } else {
        Err(Error::Schema {
            path: String::new(),
            message: format!("no scenario file or preset named `{source}`"),
        })
    }
}

/// Observer-bandwidth limits for the velocity measurement bandwidth `g_v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthReport {
    pub g_dob: f64,
    pub measurement_bandwidth: f64,
    /// `g_v β_M^min / (2 β_Mn^max)`.
    pub conservative_limit: f64,
    pub conservative_ok: bool,
    /// `g_v / (2 max_q λ_max(M(q)⁻¹ M_n))`.
    pub directional_limit: f64,
    pub directional_ok: bool,
}

fn bandwidth_report(resolved: &ResolvedScenario, betas: &BetaConstants, exec: Exec) -> Result<BandwidthReport> {
    let s = &resolved.scenario;
    let g_v = resolved.analysis.measurement_bandwidth(&s.controller);
    let g_dob = s.controller.dob_bandwidth.max();
    let conservative = bandwidth_upper_bound(betas, g_v)?;
    let ratio = max_inertia_ratio(
        exec,
        &s.model,
        &s.controller.nominal_inertia,
        &resolved.analysis.workspace,
    )?;
    let directional = g_v / (2.0 * ratio);
    Ok(BandwidthReport {
        g_dob,
        measurement_bandwidth: g_v,
        conservative_limit: conservative,
        conservative_ok: g_dob <= conservative,
        directional_limit: directional,
        directional_ok: g_dob <= directional,
    })
}

/// Content of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub name: String,
    pub dof: usize,
    pub outcome: Outcome,
    pub dominance: Dominance,
    pub bandwidth: BandwidthReport,
    pub report: AnalysisReport,
    pub warnings: Vec<String>,
}

impl Summary {
    /// Parses a summary with the same strictness as scenario files.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|err| Error::Schema {
            path: err.path().to_string(),
            message: err.inner().to_string(),
        })
    }
}

/// A simulated and analysed scenario.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub resolved: ResolvedScenario,
    pub log: RunLog,
    pub analysis: Analysis,
    pub summary: Summary,
}

/// Resolves, simulates and analyses without touching the file system.
pub fn execute(file: &ScenarioFile, exec: Exec) -> Result<RunResult> {
    let resolved = file.resolve(exec)?;
    let log = run_scenario(&resolved.scenario)?;
    let analysis = analyze(&resolved.scenario, &log, &resolved.analysis, exec)?;
    let s = &resolved.scenario;
    let dominance = nominal_dominance_with(exec, &s.model, &s.controller, &resolved.analysis.workspace)?;
    let bandwidth = bandwidth_report(&resolved, &analysis.report.betas, exec)?;
    let mut warnings = resolved.warnings.clone();
    warnings.extend(log.warnings.iter().cloned());
    if !bandwidth.directional_ok {
        warnings.push(format!(
            "observer bandwidth {} rad/s exceeds the practical limit {:.1} rad/s",
            bandwidth.g_dob, bandwidth.directional_limit
        ));
    }
    if analysis.report.suprema.qdot > resolved.analysis.workspace.qdot_max.norm() {
        warnings.push("joint speed left the workspace speed box; friction bound may be invalid".into());
    }
    let summary = Summary {
        name: resolved.name.clone(),
        dof: s.model.dof(),
        outcome: log.outcome.clone(),
        dominance,
        bandwidth,
        report: analysis.report.clone(),
        warnings,
    };
    Ok(RunResult {
        resolved,
        log,
        analysis,
        summary,
    })
}

/// `run`: simulate and write `run.csv`, `summary.json` and plots to `out`.
pub fn run(file: &ScenarioFile, out: &Path, exec: Exec) -> Result<RunResult> {
    let result = execute(file, exec)?;
    fs::create_dir_all(out)?;
    write_run_csv(&result, &out.join("run.csv"))?;
    fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&result.summary)? + "\n",
    )?;
    if result.resolved.plots {
        write_run_plots(&result, out)?;
    }
    Ok(result)
}

/// Column names of `run.csv` for an `n`-joint arm.
pub fn run_csv_header(n: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("q{i}")));
    h.extend((1..=n).map(|i| format!("e{i}")));
    h.extend(["eD_norm", "V", "Vdot"].map(String::from));
    h.extend((1..=n).map(|i| format!("tau{i}")));
    h.extend((1..=n).map(|i| format!("tau_dis_hat{i}")));
    h.extend(["gamma_post", "margin"].map(String::from));
    h
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_run_csv(result: &RunResult, path: &Path) -> Result<()> {
    let n = result.summary.dof;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(run_csv_header(n))?;
    let gamma = result.summary.report.gamma_post.map(num).unwrap_or_default();
    for (s, th) in result.log.steps.iter().zip(&result.analysis.trace.steps) {
        let mut row = vec![num(s.t)];
        row.extend(s.q.iter().map(|&v| num(v)));
        row.extend(th.e.iter().map(|&v| num(v)));
        row.push(num(th.e_d.norm()));
        row.push(num(th.v));
        row.push(num(th.vdot_analytic));
        row.extend(s.tau.iter().map(|&v| num(v)));
        row.extend(s.tau_dis_hat.iter().map(|&v| num(v)));
        row.push(gamma.clone());
        row.push(num(th.margin));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_run_plots(result: &RunResult, out: &Path) -> Result<()> {
    let tr = &result.analysis.trace.steps;
    let series = |f: &dyn Fn(&crate::analysis::TheoryStep) -> f64| tr.iter().map(|s| (s.t, f(s))).collect::<Vec<_>>();
    let name = &result.summary.name;
    let e = Chart::new(&format!("{name}: position error"), "t [s]", "‖e‖ [rad]")
        .log_y()
        .with(Series::new("‖e‖", series(&|s| s.e.norm())));
    fs::write(out.join("error_norm.svg"), e.render())?;
    let mut ed = Chart::new(&format!("{name}: dynamic error"), "t [s]", "‖e_D‖ [rad/s]")
        .log_y()
        .with(Series::new("‖e_D‖", series(&|s| s.e_d.norm())));
    if let Some(g) = result.summary.report.gamma_post {
        let t_end = tr.last().map_or(0.0, |s| s.t);
        ed = ed.with(Series::new("Γ (a posteriori)", vec![(0.0, g), (t_end, g)]).dashed());
    }
    fs::write(out.join("dynamic_error_norm.svg"), ed.render())?;
    let v = Chart::new(&format!("{name}: Lyapunov function"), "t [s]", "V")
        .log_y()
        .with(Series::new("V", series(&|s| s.v)));
    fs::write(out.join("lyapunov.svg"), v.render())?;
    let vd = Chart::new(&format!("{name}: Lyapunov derivative"), "t [s]", "dV/dt")
        .with(Series::new("dV/dt", series(&|s| s.vdot_analytic)));
    fs::write(out.join("lyapunov_rate.svg"), vd.render())?;
    Ok(())
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: Verdict,
    pub settled_max_e: f64,
    pub settled_max_e_d: f64,
    pub gamma_post: Option<f64>,
    pub g_dob_max: f64,
    pub bandwidth_ok: bool,
    pub g_dob_max_directional: f64,
    pub bandwidth_directional_ok: bool,
    /// RMS of the first difference of `τ` over the settle window, N·m.
    pub tau_diff_rms: f64,
}

pub const SWEEP_CSV_HEADER: [&str; 10] = [
    "value",
    "verdict",
    "settled_max_e",
    "settled_max_eD",
    "gamma_post",
    "g_dob_max",
    "bandwidth_ok",
    "g_dob_max_directional",
    "bandwidth_directional_ok",
    "tau_diff_rms",
];

/// RMS of `τ_k − τ_{k−1}` over log entries with `t ≥ from`.
pub fn torque_difference_rms(log: &RunLog, from: f64) -> f64 {
    let steps: Vec<_> = log.steps.iter().filter(|s| s.t >= from - 1e-12).collect();
    if steps.len() < 2 {
        return 0.0;
    }
    let sum: f64 = steps.windows(2).map(|w| (&w[1].tau - &w[0].tau).norm_squared()).sum();
    (sum / (steps.len() - 1) as f64).sqrt()
}

/// Runs every variant (in parallel when enabled) without writing files.
/// Results are in the order of `values`.
pub fn sweep_results(file: &ScenarioFile, axis: SweepAxis, values: &[f64], exec: Exec) -> Result<Vec<RunResult>> {
    if values.is_empty() {
        return Err(Error::Schema {
            path: "values".into(),
            message: "sweep needs at least one value".into(),
        });
    }
    for &v in values {
        axis.validate_value(v)?;
    }
    let variants: Vec<ScenarioFile> = values.iter().map(|&v| axis.apply(file, v)).collect();
    // each variant runs sequentially inside; parallelism is across variants
    par::map(exec, &variants, |f| execute(f, Exec::Sequential))
        .into_iter()
        .collect()
}

pub fn sweep_row(value: f64, r: &RunResult) -> SweepRow {
    let c = &r.summary.report.classification;
    SweepRow {
        value,
        verdict: r.summary.report.verdict,
        settled_max_e: c.settled_max_e,
        settled_max_e_d: c.settled_max_e_d,
        gamma_post: r.summary.report.gamma_post,
        g_dob_max: r.summary.bandwidth.conservative_limit,
        bandwidth_ok: r.summary.bandwidth.conservative_ok,
        g_dob_max_directional: r.summary.bandwidth.directional_limit,
        bandwidth_directional_ok: r.summary.bandwidth.directional_ok,
        tau_diff_rms: torque_difference_rms(&r.log, c.settle_start),
    }
}

/// `sweep`: writes `sweep.csv` and overlay plots to `out`.
pub fn sweep(file: &ScenarioFile, axis: SweepAxis, values: &[f64], out: &Path, exec: Exec) -> Result<Vec<SweepRow>> {
    let results = sweep_results(file, axis, values, exec)?;
    let rows: Vec<SweepRow> = values.iter().zip(&results).map(|(&v, r)| sweep_row(v, r)).collect();
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("sweep.csv"))?;
    w.write_record(SWEEP_CSV_HEADER)?;
    for r in &rows {
        w.write_record([
            num(r.value),
            r.verdict.to_string(),
            num(r.settled_max_e),
            num(r.settled_max_e_d),
            r.gamma_post.map(num).unwrap_or_default(),
            num(r.g_dob_max),
            r.bandwidth_ok.to_string(),
            num(r.g_dob_max_directional),
            r.bandwidth_directional_ok.to_string(),
            num(r.tau_diff_rms),
        ])?;
    }
    w.flush()?;
    let plots = results.first().is_some_and(|r| r.resolved.plots);
    if plots {
        let name = results[0].summary.name.clone();
        let mut e = Chart::new(&format!("{name}: ‖e‖ over {}", axis.name()), "t [s]", "‖e‖ [rad]").log_y();
        let mut ed = Chart::new(&format!("{name}: ‖e_D‖ over {}", axis.name()), "t [s]", "‖e_D‖ [rad/s]").log_y();
        for (v, r) in values.iter().zip(&results) {
            let label = format!("{} = {v}", axis.name());
            let tr = &r.analysis.trace.steps;
            e = e.with(Series::new(
                label.clone(),
                tr.iter().map(|s| (s.t, s.e.norm())).collect(),
            ));
            ed = ed.with(Series::new(label, tr.iter().map(|s| (s.t, s.e_d.norm())).collect()));
        }
        fs::write(out.join("error_norm_overlay.svg"), e.render())?;
        fs::write(out.join("dynamic_error_overlay.svg"), ed.render())?;
    }
    Ok(rows)
}

/// Result of the static `check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub betas: BetaConstants,
    pub dominance: Dominance,
    pub bandwidth: BandwidthReport,
    pub gamma_prior: Option<f64>,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for CheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let b = &self.betas;
        writeln!(f, "scenario: {}", self.name)?;
        writeln!(f, "beta_M_min    = {:.6e}", b.beta_m_min)?;
        writeln!(f, "beta_M_max    = {:.6e}", b.beta_m_max)?;
        writeln!(f, "beta_C        = {:.6e}", b.beta_c)?;
        writeln!(f, "beta_g        = {:.6e}", b.beta_g)?;
        writeln!(f, "beta_dM_min   = {:.6e}", b.beta_dm_min)?;
        writeln!(f, "beta_dM_max   = {:.6e}", b.beta_dm_max)?;
        writeln!(f, "beta_fric_max = {:.6e}", b.beta_fric_max)?;
        writeln!(f, "beta_load_max = {:.6e}", b.beta_load_max)?;
        writeln!(f, "beta_Mn_min   = {:.6e}", b.beta_mn_min)?;
        writeln!(f, "beta_Mn_max   = {:.6e}", b.beta_mn_max)?;
        writeln!(f, "nominal inertia: {:?}", self.dominance)?;
        let bw = &self.bandwidth;
        writeln!(
            f,
            "bandwidth (g_v = {} rad/s): g_dob = {}, conservative limit {:.3} ({}), directional limit {:.3} ({})",
            bw.measurement_bandwidth,
            bw.g_dob,
            bw.conservative_limit,
            if bw.conservative_ok { "ok" } else { "violated" },
            bw.directional_limit,
            if bw.directional_ok { "ok" } else { "violated" },
        )?;
        match self.gamma_prior {
            Some(g) => writeln!(f, "a-priori Gamma = {g:.6e}")?,
            None => writeln!(f, "a-priori Gamma: no declared suprema")?,
        }
        for w in &self.warnings {
            writeln!(f, "warning: {w}")?;
        }
        Ok(())
    }
}

/// `check`: no simulation, only the static quantities.
pub fn check(file: &ScenarioFile, exec: Exec) -> Result<CheckReport> {
    let resolved = file.resolve(exec)?;
    let s = &resolved.scenario;
    let ws = &resolved.analysis.workspace;
    let betas = estimate_betas_with(exec, &s.model, &s.controller, ws, s.disturbances.declared_load_bound)?;
    let dominance = nominal_dominance_with(exec, &s.model, &s.controller, ws)?;
    let bandwidth = bandwidth_report(&resolved, &betas, exec)?;
    let g = s.controller.dob_bandwidth.min();
    let gamma_prior = match &resolved.analysis.declared_suprema {
        Some(sup) => Some(ultimate_bound_gamma(&betas, g, sup)?),
        None => None,
    };
    let mut warnings = resolved.warnings.clone();
    if dominance != Dominance::Dominant {
        warnings.push("nominal inertia does not dominate M(q); the ultimate-bound argument does not apply".into());
    }
    if !bandwidth.conservative_ok {
        warnings.push("observer bandwidth exceeds the conservative practical limit".into());
    }
    if !bandwidth.directional_ok {
        warnings.push("observer bandwidth exceeds the directional practical limit".into());
    }
    Ok(CheckReport {
        name: resolved.name,
        betas,
        dominance,
        bandwidth,
        gamma_prior,
        warnings,
    })
}
