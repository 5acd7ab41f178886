//! One experiment: state, dynamics, histories, checks.

use std::time::Instant;

use serde::Serialize;
use xft_core::dynamics::{
    check_energy_conservation, check_trs, evolve, generate_dynamics, make_time_reversal, swap_unitary,
    transition_reversal_deviation, InteractionSpec, DynamicsMode, TimeReversal, SHELL_TOL,
};
use xft_core::history::{enumerate_histories, group_classes, reverse_class, HistorySet, Measurement, TransitionClass};
use xft_core::linalg::{partial_trace, ComplexOperator, DensityMatrix, HermitianOperator, Subsystem};
use xft_core::theorems::{
    averaged_inequality_check, baseline_xft_check, class_bounds_check, clausius_comparison, integral_equality_check,
    integral_lhs, mutual_information_identities, opt_real_repr, per_history_ratio_check, real_repr, RunPoint,
    TheoremReport,
};
use xft_core::thermal::{verify_thermal_marginals, JointStateSpec, MarginalReport, ProductEnergyBasis, ThermalSpec};
use xft_core::XftError;

use crate::config::{CheckName, ExperimentConfig, Generator};
use crate::error::{AtStage, CliError};

/// Marginals of every generated state are compared to Gibbs at this level.
pub const MARGINAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct DynamicsSummary {
    pub draws: usize,
    #[serde(serialize_with = "real_repr")]
    pub energy_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Observables {
    #[serde(serialize_with = "real_repr")]
    pub mean_q: f64,
    #[serde(serialize_with = "real_repr")]
    pub mean_delta_eps: f64,
    #[serde(serialize_with = "real_repr")]
    pub mean_delta_i: f64,
    /// `tr[H_A ρ_A]` before and after the unmeasured evolution.
    #[serde(serialize_with = "real_repr")]
    pub energy_a_initial: f64,
    #[serde(serialize_with = "real_repr")]
    pub energy_a_final: f64,
    #[serde(serialize_with = "real_repr")]
    pub integral_lhs: f64,
    /// Largest finite `ΔI_l − ΔI_u` over classes with probability.
    #[serde(serialize_with = "real_repr")]
    pub max_bound_width: f64,
    pub full_support: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClassRow {
    #[serde(serialize_with = "real_repr")]
    pub q: f64,
    #[serde(serialize_with = "real_repr")]
    pub delta_eps: f64,
    #[serde(serialize_with = "real_repr")]
    pub prob: f64,
    #[serde(serialize_with = "real_repr")]
    pub reverse_prob: f64,
    #[serde(serialize_with = "opt_real_repr")]
    pub delta_i_l: Option<f64>,
    #[serde(serialize_with = "opt_real_repr")]
    pub delta_i_u: Option<f64>,
    pub members: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub pass: bool,
    pub marginals: MarginalReport,
    #[serde(serialize_with = "real_repr")]
    pub energy_conservation: f64,
    #[serde(serialize_with = "real_repr")]
    pub trs_deviation: f64,
    #[serde(serialize_with = "real_repr")]
    pub transition_reversal_deviation: f64,
    pub dynamics: DynamicsSummary,
    pub observables: Observables,
    pub classes: Vec<ClassRow>,
    pub checks: Vec<TheoremReport>,
    /// Seconds spent computing; the only field that varies between
    /// identical runs.
    pub wall_time_s: f64,
}

/// Everything a run produces, before anything is written.
pub struct RunArtifacts {
    pub report: RunReport,
    pub histories: HistorySet,
    pub classes: Vec<TransitionClass>,
}

impl RunArtifacts {
    pub fn run_point(&self, axis: &str, value: f64, context: String) -> RunPoint {
        let o = &self.report.observables;
        RunPoint {
            axis: axis.to_string(),
            value,
            context,
            energy_a: o.energy_a_final,
            mean_q: o.mean_q,
            mean_delta_i: o.mean_delta_i,
        }
    }
}

fn local_energy(rho: &DensityMatrix, basis: &ProductEnergyBasis) -> Result<f64, XftError> {
    let r = partial_trace(rho, basis.dims(), Subsystem::A)?;
    Ok(basis.energies_a().iter().enumerate().map(|(k, e)| e * r[(k, k)].re).sum())
}

struct Evolution {
    unitary: ComplexOperator,
    draws: usize,
    drift: f64,
}

fn swap_dynamics(config: &ExperimentConfig, basis: &ProductEnergyBasis, rho: &DensityMatrix) -> Result<Evolution, XftError> {
    let u = swap_unitary(basis.dims().a);
    let totals = basis.total_energies();
    let n = totals.len();
    let h0 = basis.free_hamiltonian();
    let drift = evolve(&u, rho)?.sub(rho).matmul(&h0).trace().re.abs();
    match config.dynamics.mode {
        DynamicsMode::Strict => {
            for i in 0..n {
                for j in 0..n {
                    if u[(i, j)].norm() > 0.0 && (totals[i] - totals[j]).abs() > SHELL_TOL {
                        return Err(XftError::Generation(
                            "swap does not conserve the total energy of these spectra".into(),
                        ));
                    }
                }
            }
        }
        DynamicsMode::MeanConserving => {
            if drift > config.dynamics.mean_tol {
                return Err(XftError::Generation(format!(
                    "swap changes the mean energy by {drift:e}, above {:e}",
                    config.dynamics.mean_tol
                )));
            }
        }
    }
    Ok(Evolution { unitary: u, draws: 0, drift })
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    name: CheckName,
    config: &ExperimentConfig,
    rho: &DensityMatrix,
    evolution: &Evolution,
    theta: &TimeReversal,
    set: &HistorySet,
    classes: &[TransitionClass],
    energy_conservation: f64,
) -> Result<TheoremReport, CliError> {
    let (ba, bb) = (config.thermal.beta_a, config.thermal.beta_b);
    let tol = config.tolerance(name);
    let report = match name {
        CheckName::PerHistoryRatio => per_history_ratio_check(set, ba, bb, tol),
        CheckName::ClassBounds => class_bounds_check(classes, ba, bb, config.bin_tol, tol),
        CheckName::IntegralEquality => integral_equality_check(set, ba, bb, tol),
        CheckName::AveragedInequality => averaged_inequality_check(set, ba, bb).with_tolerance(tol),
        CheckName::BaselineXft => match baseline_xft_check(set, ba, bb, config.bin_tol, tol) {
            Ok(r) => r,
            Err(XftError::NotProductState(dev)) => TheoremReport::skipped(
                "baseline_xft",
                tol,
                format!("initial state is not a product of Gibbs states (deviation {dev:e})"),
            ),
            Err(e) => return Err(CliError::Stage { stage: "baseline_xft", source: e }),
        },
        CheckName::Clausius => {
            clausius_comparison(rho, &evolution.unitary, set, ba, bb).at("clausius")?.with_tolerance(tol)
        }
        CheckName::MutualInformation => {
            mutual_information_identities(rho, &Measurement::sharp_energy(set.dims)).at("mutual_information")?.with_tolerance(tol)
        }
        CheckName::TransitionReversal => {
            TheoremReport::measured("transition_reversal", transition_reversal_deviation(&evolution.unitary, theta), tol)
        }
        CheckName::EnergyConservation => TheoremReport::measured("energy_conservation", energy_conservation, tol),
    };
    Ok(report)
}

/// Runs the full pipeline in memory.
pub fn execute(config: &ExperimentConfig) -> Result<RunArtifacts, CliError> {
    config.validate()?;
    let start = Instant::now();
    let (ba, bb) = (config.thermal.beta_a, config.thermal.beta_b);
    let spec_a = ThermalSpec::from_spectrum(&config.system.a, ba).at("thermal")?;
    let spec_b = ThermalSpec::from_spectrum(&config.system.b, bb).at("thermal")?;
    let joint = JointStateSpec::new(config.state.family, config.state.lambda, spec_a.clone(), spec_b.clone())
        .with_base(config.state.base);
    let rho_original = joint.build().at("state")?;
    let marginals = verify_thermal_marginals(&rho_original, &spec_a, &spec_b, MARGINAL_TOL).at("state")?;
    let basis = joint.basis();
    let rho = basis.state_to_energy(&rho_original);

    let theta = make_time_reversal(config.dynamics.theta.clone(), &basis).at("dynamics")?;
    let evolution = match config.dynamics.generator {
        Generator::RandomTrs => {
            let spec = InteractionSpec {
                mode: config.dynamics.mode,
                t: config.dynamics.t,
                strength: config.dynamics.strength,
                seed: config.seed,
                mean_tol: Some(config.dynamics.mean_tol),
            };
            let d = generate_dynamics(&spec, &basis, &theta, &rho).at("dynamics")?;
            Evolution { unitary: d.unitary, draws: d.draws, drift: d.energy_drift }
        }
        Generator::Swap => swap_dynamics(config, &basis, &rho).at("dynamics")?,
    };

    let h_a = HermitianOperator::from_real_diagonal(basis.energies_a());
    let h_b = HermitianOperator::from_real_diagonal(basis.energies_b());
    let energy_conservation = check_energy_conservation(&rho, &evolution.unitary, &h_a, &h_b).at("dynamics")?;
    let trs_deviation = check_trs(&evolution.unitary, &theta);
    let transition_deviation = transition_reversal_deviation(&evolution.unitary, &theta);

    let set = enumerate_histories(&rho, &evolution.unitary, &theta, &basis).at("histories")?;
    let classes = group_classes(&set, config.bin_tol);

    let mut checks = Vec::with_capacity(config.checks.names.len());
    for &name in &config.checks.names {
        checks.push(evaluate(name, config, &rho, &evolution, &theta, &set, &classes, energy_conservation)?);
    }
    let pass = checks.iter().all(|c| c.pass);

    let evolved = evolve(&evolution.unitary, &rho).at("dynamics")?;
    let max_bound_width = classes
        .iter()
        .filter(|c| c.prob > 0.0)
        .filter_map(|c| c.bound_width())
        .filter(|w| w.is_finite())
        .fold(0.0_f64, f64::max);
    let observables = Observables {
        mean_q: set.mean(|h| h.q),
        mean_delta_eps: set.mean(|h| h.delta_eps),
        mean_delta_i: set.mean(|h| h.delta_i),
        energy_a_initial: local_energy(&rho, &basis).at("observables")?,
        energy_a_final: local_energy(&evolved, &basis).at("observables")?,
        integral_lhs: integral_lhs(&set, ba, bb),
        max_bound_width,
        full_support: set.full_support(),
    };
    let class_rows = classes
        .iter()
        .map(|c| ClassRow {
            q: c.q,
            delta_eps: c.delta_eps,
            prob: c.prob,
            reverse_prob: reverse_class(&classes, c.q, c.delta_eps, config.bin_tol).prob,
            delta_i_l: c.delta_i_l,
            delta_i_u: c.delta_i_u,
            members: c.member_ids.len(),
        })
        .collect();

    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        pass,
        marginals,
        energy_conservation,
        trs_deviation,
        transition_reversal_deviation: transition_deviation,
        dynamics: DynamicsSummary { draws: evolution.draws, energy_drift: evolution.drift },
        observables,
        classes: class_rows,
        checks,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(RunArtifacts { report, histories: set, classes })
}
