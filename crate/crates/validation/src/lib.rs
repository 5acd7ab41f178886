//! Randomized experiment cases and oracles that recompute the checked
//! quantities straight from the state and the unitary.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xft_core::dynamics::{generate_dynamics, DynamicsMode, InteractionSpec, TimeReversal};
use xft_core::history::{enumerate_histories, group_classes, HistorySet, TransitionClass};
use xft_core::linalg::{ComplexOperator, DensityMatrix, Dims};
use xft_core::thermal::{CorrelatedBase, JointStateSpec, ProductEnergyBasis, StateFamily, ThermalSpec};
use xft_core::{Result, XftError};

pub const FAMILIES: [StateFamily; 4] =
    [StateFamily::Product, StateFamily::ClassicalCoupled, StateFamily::ThermofieldPure, StateFamily::Interpolated];
pub const LAMBDAS: [f64; 4] = [0.0, 0.3, 0.7, 1.0];
pub const MODES: [DynamicsMode; 2] = [DynamicsMode::Strict, DynamicsMode::MeanConserving];
pub const DIMS: [usize; 3] = [2, 3, 4];

/// Below this a probability is treated as vanishing.
pub const FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct Case {
    pub family: StateFamily,
    pub lambda: f64,
    pub base: CorrelatedBase,
    pub mode: DynamicsMode,
    pub beta_a: f64,
    pub beta_b: f64,
    pub energies_a: Vec<f64>,
    pub energies_b: Vec<f64>,
    pub t: f64,
    pub strength: f64,
    pub seed: u64,
}

impl Case {
    pub fn label(&self) -> String {
        format!(
            "{:?} λ={} {:?} {}x{} βA={:.3} βB={:.3} seed={}",
            self.family,
            self.lambda,
            self.mode,
            self.energies_a.len(),
            self.energies_b.len(),
            self.beta_a,
            self.beta_b,
            self.seed
        )
    }

    /// The joint state is diagonal in the product energy basis.
    pub fn is_classical(&self) -> bool {
        match self.family {
            StateFamily::Product | StateFamily::ClassicalCoupled => true,
            StateFamily::ThermofieldPure => false,
            StateFamily::Interpolated => self.base == CorrelatedBase::ClassicalCoupled || self.lambda == 0.0,
        }
    }

    /// The state reduces to the product of Gibbs states.
    pub fn is_uncorrelated(&self) -> bool {
        match self.family {
            StateFamily::Product => true,
            StateFamily::ThermofieldPure => false,
            StateFamily::ClassicalCoupled | StateFamily::Interpolated => self.lambda == 0.0,
        }
    }
}

fn lattice(rng: &mut ChaCha8Rng, d: usize, gap: f64) -> Vec<f64> {
    let mut pool: Vec<u32> = (0..=5).collect();
    let mut levels = Vec::with_capacity(d);
    for _ in 0..d {
        let k = rng.random_range(0..pool.len());
        levels.push(pool.swap_remove(k));
    }
    levels.sort_unstable();
    levels.into_iter().map(|k| k as f64 * gap).collect()
}

/// The full grid of dimensions, families, correlation strengths and
/// dynamics modes, with randomized spectra, temperatures and interactions.
///
/// Spectra sit on commensurate lattices so strict dynamics has degenerate
/// shells to act on. Pure thermofield states need equal dimensions and
/// matching Gibbs weights, so their B spectrum is A's rescaled by
/// `β_A/β_B`; unequal dimensions skip that family.
pub fn case_grid(seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for &da in &DIMS {
        for &db in &DIMS {
            for family in FAMILIES {
                let needs_matching = match family {
                    StateFamily::ThermofieldPure => true,
                    StateFamily::Interpolated => da == db,
                    _ => false,
                };
                if family == StateFamily::ThermofieldPure && da != db {
                    continue;
                }
                for &lambda in &LAMBDAS {
                    for &mode in &MODES {
                        let gap_a = *[0.5, 1.0].choose(&mut rng).unwrap();
                        let energies_a = lattice(&mut rng, da, gap_a);
                        let beta_a = rng.random_range(0.2..2.0);
                        let (beta_b, energies_b) = if needs_matching {
                            let beta_b = beta_a * *[0.5, 1.0, 2.0].choose(&mut rng).unwrap();
                            (beta_b, energies_a.iter().map(|e| e * beta_a / beta_b).collect())
                        } else {
                            let gap_b = gap_a * *[0.5, 1.0, 2.0].choose(&mut rng).unwrap();
                            (rng.random_range(0.2..2.0), lattice(&mut rng, db, gap_b))
                        };
                        let base = if needs_matching { CorrelatedBase::ThermofieldPure } else { CorrelatedBase::ClassicalCoupled };
                        cases.push(Case {
                            family,
                            lambda,
                            base,
                            mode,
                            beta_a,
                            beta_b,
                            energies_a,
                            energies_b,
                            t: rng.random_range(0.5..2.5),
                            strength: rng.random_range(0.3..1.5),
                            seed: rng.random(),
                        });
                    }
                }
            }
        }
    }
    cases
}

/// Everything one case produces, in product energy coordinates.
pub struct Realized {
    pub rho: DensityMatrix,
    pub unitary: ComplexOperator,
    pub theta: TimeReversal,
    pub basis: ProductEnergyBasis,
    pub set: HistorySet,
    pub classes: Vec<TransitionClass>,
    pub energy_drift: f64,
}

pub fn realize(case: &Case) -> Result<Realized> {
    let spec_a = ThermalSpec::from_spectrum(&case.energies_a, case.beta_a)?;
    let spec_b = ThermalSpec::from_spectrum(&case.energies_b, case.beta_b)?;
    let joint = JointStateSpec::new(case.family, case.lambda, spec_a, spec_b).with_base(case.base);
    let basis = joint.basis();
    let rho = basis.state_to_energy(&joint.build()?);
    let theta = TimeReversal::conjugation(basis.dims().total());
    let spec = InteractionSpec { mode: case.mode, t: case.t, strength: case.strength, seed: case.seed, mean_tol: None };
    let dynamics = generate_dynamics(&spec, &basis, &theta, &rho)?;
    let set = enumerate_histories(&rho, &dynamics.unitary, &theta, &basis)?;
    let classes = group_classes(&set, xft_core::history::DEFAULT_BIN_TOL);
    Ok(Realized { rho, unitary: dynamics.unitary, theta, basis, set, classes, energy_drift: dynamics.energy_drift })
}

pub fn is_generation_failure(e: &XftError) -> bool {
    matches!(e, XftError::Generation(_))
}

/// Outcome probabilities, their marginals and the per-outcome correlation
/// index, recomputed from the state's diagonal.
pub struct OutcomeOracle {
    pub dims: Dims,
    pub p: Vec<f64>,
    pub index: Vec<f64>,
}

impl OutcomeOracle {
    pub fn new(rho: &DensityMatrix, dims: Dims) -> Self {
        let p: Vec<f64> = (0..dims.total()).map(|k| rho[(k, k)].re).collect();
        let mut ma = vec![0.0; dims.a];
        let mut mb = vec![0.0; dims.b];
        for phi in 0..dims.a {
            for chi in 0..dims.b {
                ma[phi] += p[phi * dims.b + chi];
                mb[chi] += p[phi * dims.b + chi];
            }
        }
        let index = (0..dims.total())
            .map(|k| {
                let (phi, chi) = (k / dims.b, k % dims.b);
                if p[k] > 0.0 {
                    (p[k] / (ma[phi] * mb[chi])).ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Self { dims, p, index }
    }
}

/// Largest relative deviation of `P[γ]/P[γ*]` from
/// `exp(Δβq + β_BΔε − ΔI)` over pairs with both sides above [`FLOOR`],
/// computed without the history module.
pub fn ratio_oracle(r: &Realized, beta_a: f64, beta_b: f64) -> (f64, usize) {
    let dims = r.basis.dims();
    let o = OutcomeOracle::new(&r.rho, dims);
    let n = dims.total();
    let ea = r.basis.energies_a();
    let total = r.basis.total_energies();
    let mut worst = 0.0f64;
    let mut pairs = 0;
    for a in 0..n {
        for b in 0..n {
            let forward = o.p[a] * r.unitary[(b, a)].norm_sqr();
            let (ra, rb) = (r.theta.image(b), r.theta.image(a));
            let backward = o.p[ra] * r.unitary[(rb, ra)].norm_sqr();
            if forward <= FLOOR || backward <= FLOOR {
                continue;
            }
            let q = ea[b / dims.b] - ea[a / dims.b];
            let de = total[b] - total[a];
            let di = o.index[ra] - o.index[a];
            let x = (beta_a - beta_b) * q + beta_b * de - di;
            let dev = (forward.ln() - backward.ln() - x).exp_m1().abs();
            worst = worst.max(dev);
            pairs += 1;
        }
    }
    (worst, pairs)
}

/// `tr[H_A(UρU† − ρ)]` and `Σ P[γ] q`, both from scratch.
pub fn heat_oracle(r: &Realized) -> (f64, f64) {
    let dims = r.basis.dims();
    let n = dims.total();
    let ea = r.basis.energies_a();
    let evolved = r.unitary.matmul(&r.rho).matmul(&r.unitary.adjoint());
    let local = |op: &ComplexOperator| -> f64 { (0..n).map(|k| ea[k / dims.b] * op[(k, k)].re).sum() };
    let q_a = local(&evolved) - local(&r.rho);
    let mut mean_q = 0.0;
    for a in 0..n {
        let pa = r.rho[(a, a)].re;
        for b in 0..n {
            mean_q += pa * r.unitary[(b, a)].norm_sqr() * (ea[b / dims.b] - ea[a / dims.b]);
        }
    }
    (q_a, mean_q)
}

/// `−Σ p ln p`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Aggregate probability of exchange `q` into A (summed over `Δε`).
pub fn exchange_probability(set: &HistorySet, q: f64, tol: f64) -> f64 {
    set.histories.iter().filter(|h| (h.q - q).abs() <= tol).map(|h| h.prob).sum()
}

/// Largest `P(q) − e^{Δβq} P(−q)` over `q < 0`, relative to `P(q)`.
/// Positive values mean heat flows against the temperature gradient more
/// often than the uncorrelated relation allows.
pub fn arrow_excess(set: &HistorySet, beta_a: f64, beta_b: f64, tol: f64) -> f64 {
    let mut qs: Vec<f64> = set.histories.iter().filter(|h| h.prob > FLOOR && h.q < -tol).map(|h| h.q).collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup_by(|a, b| (*a - *b).abs() <= tol);
    qs.iter()
        .map(|&q| {
            let forward = exchange_probability(set, q, tol);
            let backward = exchange_probability(set, -q, tol);
            (forward - ((beta_a - beta_b) * q).exp() * backward) / forward
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
