//! Configuration-driven runner for exchange fluctuation experiments.

pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};

use serde::Serialize;
use xft_core::theorems::{max_work_report, real_repr, MaxWorkReport, TheoremReport};

pub use config::{parse_config, CheckName, ExperimentConfig, Format, Generator};
pub use error::CliError;
pub use pipeline::{execute, RunArtifacts, RunReport};

use output::{classes_csv, fmt_real, histories_csv, json_bytes, table_csv, write_all};

pub const OUT_DIR_ENV: &str = "XFT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "xft-out";

/// Command-line overrides applied on top of a parsed configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub formats: Option<Vec<Format>>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) -> Result<(), CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(formats) = &self.formats {
            config.output.formats = formats.clone();
        }
        if let Some(out) = &self.out {
            config.output.dir = Some(out.clone());
        }
        config.validate()
    }
}

/// Output directory: `--out`, then the config, then the environment, then
/// [`DEFAULT_OUT_DIR`].
pub fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output
        .dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn run_files(artifacts: &RunArtifacts, config: &ExperimentConfig, prefix: &str) -> Result<Vec<(String, Vec<u8>)>, CliError> {
    let mut files = Vec::new();
    if config.wants(Format::Json) {
        files.push((format!("{prefix}report.json"), json_bytes(&artifacts.report)?));
    }
    if config.wants(Format::Csv) {
        files.push((format!("{prefix}histories.csv"), histories_csv(&artifacts.histories)?));
        files.push((format!("{prefix}classes.csv"), classes_csv(&artifacts.classes, config.bin_tol)?));
    }
    Ok(files)
}

/// Runs one experiment and writes its outputs.
pub fn run(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    let artifacts = execute(config)?;
    write_all(&output_dir(config), &run_files(&artifacts, config, "")?)?;
    Ok(artifacts)
}

/// Runs the checks without writing anything.
pub fn verify(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    execute(config)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    BetaA,
    BetaB,
    Strength,
    T,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::BetaA => "beta_a",
            SweepAxis::BetaB => "beta_b",
            SweepAxis::Strength => "strength",
            SweepAxis::T => "t",
        }
    }

    /// Axes along which the dynamics are varied continuously; their runs
    /// share one seed so neighbouring runs differ only in the value.
    pub fn is_dynamical(self) -> bool {
        matches!(self, SweepAxis::Strength | SweepAxis::T)
    }

    fn set(self, config: &mut ExperimentConfig, value: f64) {
        match self {
            SweepAxis::Lambda => config.state.lambda = value,
            SweepAxis::BetaA => config.thermal.beta_a = value,
            SweepAxis::BetaB => config.thermal.beta_b = value,
            SweepAxis::Strength => config.dynamics.strength = value,
            SweepAxis::T => config.dynamics.t = value,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryRow {
    #[serde(serialize_with = "real_repr")]
    pub value: f64,
    pub seed: u64,
    #[serde(serialize_with = "real_repr")]
    pub mean_q: f64,
    #[serde(serialize_with = "real_repr")]
    pub mean_delta_eps: f64,
    #[serde(serialize_with = "real_repr")]
    pub mean_delta_i: f64,
    #[serde(serialize_with = "real_repr")]
    pub integral_lhs: f64,
    #[serde(serialize_with = "real_repr")]
    pub max_bound_width: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub seed_policy: String,
    pub pass: bool,
    pub summary: Vec<SummaryRow>,
    pub max_work: Vec<MaxWorkReport>,
}

pub struct SweepOutcome {
    pub report: SweepReport,
    pub runs: Vec<RunArtifacts>,
}

/// Canonical description of a run with the swept value blanked out.
fn run_context(config: &ExperimentConfig, axis: SweepAxis) -> Result<String, CliError> {
    let mut c = config.clone();
    axis.set(&mut c, 0.0);
    c.output.dir = None;
    serde_json::to_string(&c).map_err(|e| CliError::io("<json>", e))
}

/// One run per value, written to `run-NNN/`, plus `summary.csv` and
/// `sweep.json`. Seeds are `seed + index`, except on dynamical axes where
/// every run uses `seed`.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepOutcome, CliError> {
    if values.is_empty() {
        return Err(CliError::Validation { field: "values".into(), message: "sweep needs at least one value".into() });
    }
    let mut runs = Vec::with_capacity(values.len());
    let mut configs = Vec::with_capacity(values.len());
    for (i, &value) in values.iter().enumerate() {
        let mut c = config.clone();
        axis.set(&mut c, value);
        if !axis.is_dynamical() {
            c.seed = config.seed.wrapping_add(i as u64);
        }
        c.validate().map_err(|e| match e {
            CliError::Validation { field, message } => {
                CliError::Validation { field, message: format!("{message} (sweep value {value})") }
            }
            other => other,
        })?;
        runs.push(execute(&c)?);
        configs.push(c);
    }

    let summary: Vec<SummaryRow> = values
        .iter()
        .zip(&runs)
        .zip(&configs)
        .map(|((&value, r), c)| {
            let o = &r.report.observables;
            SummaryRow {
                value,
                seed: c.seed,
                mean_q: o.mean_q,
                mean_delta_eps: o.mean_delta_eps,
                mean_delta_i: o.mean_delta_i,
                integral_lhs: o.integral_lhs,
                max_bound_width: o.max_bound_width,
                pass: r.report.pass,
            }
        })
        .collect();

    let mut max_work = Vec::new();
    if axis.is_dynamical() {
        for k in 1..runs.len() {
            let first = runs[k - 1].run_point(axis.name(), values[k - 1], run_context(&configs[k - 1], axis)?);
            let second = runs[k].run_point(axis.name(), values[k], run_context(&configs[k], axis)?);
            let (ta, tb) = (1.0 / config.thermal.beta_a, 1.0 / config.thermal.beta_b);
            max_work.push(max_work_report(&first, &second, ta, tb).map_err(|e| CliError::Stage { stage: "max_work", source: e })?);
        }
    }

    let seed_policy = if axis.is_dynamical() { "shared seed" } else { "seed + index" };
    let report = SweepReport {
        axis,
        values: values.to_vec(),
        seed_policy: seed_policy.to_string(),
        pass: runs.iter().all(|r| r.report.pass),
        summary,
        max_work,
    };

    let mut files = Vec::new();
    for (i, (r, c)) in runs.iter().zip(&configs).enumerate() {
        files.extend(run_files(r, c, &format!("run-{i:03}/"))?);
    }
    if config.wants(Format::Csv) {
        let rows: Vec<Vec<String>> = report
            .summary
            .iter()
            .map(|s| {
                vec![
                    fmt_real(s.value),
                    s.seed.to_string(),
                    fmt_real(s.mean_q),
                    fmt_real(s.mean_delta_eps),
                    fmt_real(s.mean_delta_i),
                    fmt_real(s.integral_lhs),
                    fmt_real(s.max_bound_width),
                    s.pass.to_string(),
                ]
            })
            .collect();
        let header = [axis.name(), "seed", "mean_q", "mean_delta_eps", "mean_delta_i", "integral_lhs", "max_bound_width", "pass"];
        files.push(("summary.csv".into(), table_csv(&header, &rows)?));
        if !report.max_work.is_empty() {
            let rows: Vec<Vec<String>> = report
                .max_work
                .iter()
                .map(|m| {
                    [m.from, m.to, m.d_u_a, m.dq_mean, m.d_s_a, m.d_i_mean, m.work_bound].iter().map(|&v| fmt_real(v)).collect()
                })
                .collect();
            let header = ["from", "to", "d_u_a", "dq_mean", "d_s_a", "d_i_mean", "work_bound"];
            files.push(("max_work.csv".into(), table_csv(&header, &rows)?));
        }
    }
    if config.wants(Format::Json) {
        files.push(("sweep.json".into(), json_bytes(&report)?));
    }
    write_all(&output_dir(config), &files)?;
    Ok(SweepOutcome { report, runs })
}

/// One line per check.
pub fn check_lines(checks: &[TheoremReport]) -> Vec<String> {
    checks
        .iter()
        .map(|c| {
            let status = match (c.pass, &c.skipped_reason) {
                (true, Some(_)) if !c.conditional => "SKIP",
                (true, _) => "PASS",
                (false, _) => "FAIL",
            };
            let mut line = format!("{status} {:<22} max_violation={:.3e} tol={:.1e}", c.name, c.max_violation, c.tolerance);
            if c.conditional {
                line.push_str(" (conditional)");
            }
            if let Some(reason) = &c.skipped_reason {
                line.push_str(&format!(" [{reason}]"));
            }
            line
        })
        .collect()
}

pub fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut config = parse_config(path)?;
    overrides.apply(&mut config)?;
    Ok(config)
}
