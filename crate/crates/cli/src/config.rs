//! Experiment configuration: TOML schema, defaults and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xft_core::dynamics::{make_time_reversal, DynamicsMode};
use xft_core::history::{DEFAULT_BIN_TOL, MAX_PRODUCT_DIM};
use xft_core::theorems;
use xft_core::thermal::{CorrelatedBase, ProductEnergyBasis, StateFamily};

use crate::error::CliError;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    bin_tol: Option<f64>,
    system: RawSystem,
    thermal: RawThermal,
    #[serde(default)]
    state: RawState,
    #[serde(default)]
    dynamics: RawDynamics,
    #[serde(default)]
    checks: RawChecks,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSpectrum {
    Levels(Vec<f64>),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    a: RawSpectrum,
    b: RawSpectrum,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermal {
    beta_a: f64,
    beta_b: f64,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawState {
    family: Option<StateFamily>,
    lambda: Option<f64>,
    base: Option<CorrelatedBase>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawDynamics {
    generator: Option<Generator>,
    mode: Option<DynamicsMode>,
    t: Option<f64>,
    strength: Option<f64>,
    mean_tol: Option<f64>,
    theta: Option<Vec<usize>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    names: Option<Vec<CheckName>>,
    #[serde(default)]
    tolerances: BTreeMap<CheckName, f64>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    formats: Option<Vec<Format>>,
}

/// How the evolution operator is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Seeded random time-reversal-symmetric interaction.
    RandomTrs,
    /// Exchange of the two subsystems (equal dimensions).
    Swap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    PerHistoryRatio,
    ClassBounds,
    IntegralEquality,
    AveragedInequality,
    BaselineXft,
    Clausius,
    MutualInformation,
    TransitionReversal,
    EnergyConservation,
}

impl CheckName {
    pub const ALL: [CheckName; 9] = [
        CheckName::PerHistoryRatio,
        CheckName::ClassBounds,
        CheckName::IntegralEquality,
        CheckName::AveragedInequality,
        CheckName::BaselineXft,
        CheckName::Clausius,
        CheckName::MutualInformation,
        CheckName::TransitionReversal,
        CheckName::EnergyConservation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::PerHistoryRatio => "per_history_ratio",
            CheckName::ClassBounds => "class_bounds",
            CheckName::IntegralEquality => "integral_equality",
            CheckName::AveragedInequality => "averaged_inequality",
            CheckName::BaselineXft => "baseline_xft",
            CheckName::Clausius => "clausius",
            CheckName::MutualInformation => "mutual_information",
            CheckName::TransitionReversal => "transition_reversal",
            CheckName::EnergyConservation => "energy_conservation",
        }
    }

    fn default_tolerance(self, mode: DynamicsMode, mean_tol: f64) -> f64 {
        match self {
            CheckName::PerHistoryRatio => theorems::RATIO_TOL,
            CheckName::ClassBounds => theorems::BOUNDS_TOL,
            CheckName::IntegralEquality => theorems::INTEGRAL_TOL,
            CheckName::AveragedInequality => theorems::AVERAGE_TOL,
            CheckName::BaselineXft => theorems::BASELINE_TOL,
            CheckName::Clausius => theorems::CLAUSIUS_TOL,
            CheckName::MutualInformation => theorems::IDENTITY_TOL,
            CheckName::TransitionReversal => 1e-10,
            CheckName::EnergyConservation => match mode {
                DynamicsMode::Strict => 1e-9,
                DynamicsMode::MeanConserving => mean_tol,
            },
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format {other:?} (expected json or csv)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemConfig {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThermalConfig {
    pub beta_a: f64,
    pub beta_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StateConfig {
    pub family: StateFamily,
    pub lambda: f64,
    pub base: CorrelatedBase,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DynamicsConfig {
    pub generator: Generator,
    pub mode: DynamicsMode,
    pub t: f64,
    pub strength: f64,
    pub mean_tol: f64,
    pub theta: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChecksConfig {
    pub names: Vec<CheckName>,
    pub tolerances: BTreeMap<CheckName, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

/// A fully resolved experiment: every default is filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub bin_tol: f64,
    pub system: SystemConfig,
    pub thermal: ThermalConfig,
    pub state: StateConfig,
    pub dynamics: DynamicsConfig,
    pub checks: ChecksConfig,
    pub output: OutputConfig,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { field: field.to_string(), message: message.into() }
}

/// Resolves `"qubit"`, `"qutrit"`, `"ladder(d, gap)"` or an explicit list.
fn resolve_spectrum(raw: RawSpectrum, field: &str) -> Result<Vec<f64>, CliError> {
    let levels = match raw {
        RawSpectrum::Levels(v) => v,
        RawSpectrum::Named(name) => match name.trim() {
            "qubit" => vec![0.0, 1.0],
            "qutrit" => vec![0.0, 1.0, 2.0],
            other => parse_ladder(other).ok_or_else(|| {
                invalid(field, format!("unknown spectrum {other:?}; use a list, \"qubit\", \"qutrit\" or \"ladder(d, gap)\""))
            })?,
        },
    };
    if levels.is_empty() {
        return Err(invalid(field, "spectrum is empty"));
    }
    if let Some(bad) = levels.iter().find(|e| !e.is_finite()) {
        return Err(invalid(field, format!("energy {bad} is not finite")));
    }
    Ok(levels)
}

fn parse_ladder(s: &str) -> Option<Vec<f64>> {
    let inner = s.strip_prefix("ladder(")?.strip_suffix(')')?;
    let (d, gap) = inner.split_once(',')?;
    let d: usize = d.trim().parse().ok()?;
    let gap: f64 = gap.trim().parse().ok()?;
    if d == 0 {
        return None;
    }
    Some((0..d).map(|k| k as f64 * gap).collect())
}

fn check_nonnegative(field: &str, v: f64) -> Result<(), CliError> {
    if !v.is_finite() || v < 0.0 {
        return Err(invalid(field, format!("must be a finite value >= 0, got {v}")));
    }
    Ok(())
}

fn check_positive(field: &str, v: f64) -> Result<(), CliError> {
    if !v.is_finite() || v <= 0.0 {
        return Err(invalid(field, format!("must be a finite value > 0, got {v}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text)
            .map_err(|e| CliError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
        Self::resolve(raw)
    }

    fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let system = SystemConfig {
            a: resolve_spectrum(raw.system.a, "system.a")?,
            b: resolve_spectrum(raw.system.b, "system.b")?,
        };
        let n = system.a.len() * system.b.len();

        let state = StateConfig {
            family: raw.state.family.unwrap_or(StateFamily::Product),
            lambda: raw.state.lambda.unwrap_or(0.0),
            base: raw.state.base.unwrap_or_default(),
        };

        let mode = raw.dynamics.mode.unwrap_or(DynamicsMode::Strict);
        let max_total = system
            .a
            .iter()
            .flat_map(|ea| system.b.iter().map(move |eb| (ea + eb).abs()))
            .fold(0.0_f64, f64::max);
        let default_mean_tol = 1e-6 * max_total.max(f64::MIN_POSITIVE);
        let dynamics = DynamicsConfig {
            generator: raw.dynamics.generator.unwrap_or(Generator::RandomTrs),
            mode,
            t: raw.dynamics.t.unwrap_or(1.0),
            strength: raw.dynamics.strength.unwrap_or(1.0),
            mean_tol: raw.dynamics.mean_tol.unwrap_or(default_mean_tol),
            theta: raw.dynamics.theta.unwrap_or_else(|| (0..n).collect()),
        };

        let names = raw.checks.names.unwrap_or_else(|| CheckName::ALL.to_vec());
        let mut tolerances = BTreeMap::new();
        for name in CheckName::ALL {
            let tol = raw
                .checks
                .tolerances
                .get(&name)
                .copied()
                .unwrap_or_else(|| name.default_tolerance(mode, dynamics.mean_tol));
            tolerances.insert(name, tol);
        }

        let config = Self {
            seed: raw.seed.unwrap_or(0),
            bin_tol: raw.bin_tol.unwrap_or(DEFAULT_BIN_TOL),
            system,
            thermal: ThermalConfig { beta_a: raw.thermal.beta_a, beta_b: raw.thermal.beta_b },
            state,
            dynamics,
            checks: ChecksConfig { names, tolerances },
            output: OutputConfig {
                dir: raw.output.dir,
                formats: raw.output.formats.unwrap_or_else(|| vec![Format::Json, Format::Csv]),
            },
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks ranges and cross-field constraints. Called on every resolved
    /// or modified configuration.
    pub fn validate(&self) -> Result<(), CliError> {
        let (da, db) = (self.system.a.len(), self.system.b.len());
        if da * db > MAX_PRODUCT_DIM {
            return Err(invalid("system", format!("product dimension {} exceeds {MAX_PRODUCT_DIM}", da * db)));
        }
        check_nonnegative("thermal.beta_a", self.thermal.beta_a)?;
        check_nonnegative("thermal.beta_b", self.thermal.beta_b)?;
        if !(0.0..=1.0).contains(&self.state.lambda) {
            return Err(invalid("state.lambda", format!("must lie in [0, 1], got {}", self.state.lambda)));
        }
        if !self.dynamics.t.is_finite() {
            return Err(invalid("dynamics.t", "must be finite"));
        }
        check_nonnegative("dynamics.strength", self.dynamics.strength)?;
        check_positive("dynamics.mean_tol", self.dynamics.mean_tol)?;
        check_positive("bin_tol", self.bin_tol)?;
        if self.dynamics.generator == Generator::Swap && da != db {
            return Err(invalid("dynamics.generator", format!("swap needs equal dimensions, got {da} and {db}")));
        }
        let basis = ProductEnergyBasis::from_energies(&sorted(&self.system.a), &sorted(&self.system.b));
        make_time_reversal(self.dynamics.theta.clone(), &basis).map_err(|e| invalid("dynamics.theta", e.to_string()))?;
        if self.checks.names.is_empty() {
            return Err(invalid("checks.names", "no checks requested"));
        }
        for (name, tol) in &self.checks.tolerances {
            check_positive(&format!("checks.tolerances.{name}"), *tol)?;
        }
        if self.output.formats.is_empty() {
            return Err(invalid("output.formats", "no output formats requested"));
        }
        Ok(())
    }

    pub fn tolerance(&self, name: CheckName) -> f64 {
        self.checks.tolerances[&name]
    }

    pub fn wants(&self, format: Format) -> bool {
        self.output.formats.contains(&format)
    }
}

/// Energies in the ascending order used for product energy coordinates.
pub fn sorted(levels: &[f64]) -> Vec<f64> {
    let mut v = levels.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    ExperimentConfig::from_toml(&text, path)
}
