//! Time reversal, time-reversal-invariant interactions and unitary evolution.
//!
//! All joint operators here are expressed in product energy coordinates
//! (see [`ProductEnergyBasis`]).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, XftError};
use crate::linalg::{expm_i, kron, ComplexOperator, DensityMatrix, HermitianOperator, C64};
use crate::thermal::ProductEnergyBasis;

/// Energies closer than this belong to the same total-energy shell.
pub const SHELL_TOL: f64 = 1e-9;
pub const UNITARY_TOL: f64 = 1e-10;
pub const MEAN_CONSERVING_RETRIES: usize = 1000;
const BISECTION_STEPS: usize = 200;

/// Anti-unitary `Θ = P ∘ K`: complex conjugation in the product energy
/// basis followed by a basis permutation, so `Θ|k⟩ = |P(k)⟩`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimeReversal {
    permutation: Vec<usize>,
}

impl TimeReversal {
    /// Pure complex conjugation.
    pub fn conjugation(dim: usize) -> Self {
        Self { permutation: (0..dim).collect() }
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn is_conjugation(&self) -> bool {
        self.permutation.iter().enumerate().all(|(k, &p)| k == p)
    }

    /// Label of `Θ|k⟩`.
    pub fn image(&self, k: usize) -> usize {
        self.permutation[k]
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); v.len()];
        for (k, z) in v.iter().enumerate() {
            out[self.permutation[k]] = z.conj();
        }
        out
    }

    /// `Θ A Θ†`
    pub fn apply_op(&self, a: &ComplexOperator) -> ComplexOperator {
        let p = &self.permutation;
        let mut out = ComplexOperator::zeros(a.dim());
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                out[(p[i], p[j])] = a[(i, j)].conj();
            }
        }
        out
    }

    /// `Θ† U† Θ`, whose `(i, j)` entry is `U[P(j), P(i)]`.
    pub fn reversed_adjoint(&self, u: &ComplexOperator) -> ComplexOperator {
        let p = &self.permutation;
        ComplexOperator::from_fn(u.dim(), |i, j| u[(p[j], p[i])])
    }
}

/// Validates a permutation as the basis part of a time reversal.
pub fn make_time_reversal(permutation: Vec<usize>, basis: &ProductEnergyBasis) -> Result<TimeReversal> {
    let dims = basis.dims();
    let n = dims.total();
    if permutation.len() != n {
        return Err(XftError::InvalidSymmetry(format!(
            "permutation has {} entries, expected {n}",
            permutation.len()
        )));
    }
    if let Some(&bad) = permutation.iter().find(|&&p| p >= n) {
        return Err(XftError::InvalidSymmetry(format!("permutation entry {bad} out of range")));
    }
    for (k, &p) in permutation.iter().enumerate() {
        if permutation[p] != k {
            return Err(XftError::InvalidSymmetry(format!(
                "permutation is not an involution: {k} -> {p} -> {}",
                permutation[p]
            )));
        }
        let (phi, chi) = dims.split(k);
        let (phi_t, chi_t) = dims.split(p);
        let da = (basis.energies_a()[phi] - basis.energies_a()[phi_t]).abs();
        let db = (basis.energies_b()[chi] - basis.energies_b()[chi_t]).abs();
        if da > 1e-12 || db > 1e-12 {
            return Err(XftError::InvalidSymmetry(format!(
                "permutation maps ({phi},{chi}) to ({phi_t},{chi_t}) and changes local energies"
            )));
        }
    }
    Ok(TimeReversal { permutation })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsMode {
    /// `H_int` commutes with `H_A + H_B`.
    Strict,
    /// `H_int` unrestricted; mean energy of the target state conserved.
    MeanConserving,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractionSpec {
    pub mode: DynamicsMode,
    pub t: f64,
    pub strength: f64,
    pub seed: u64,
    /// Defaults to `1e−6·‖H_A + H_B‖_max`.
    pub mean_tol: Option<f64>,
}

/// Shell label per product index; labels ascend with energy.
pub fn energy_shells(total_energies: &[f64], tol: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..total_energies.len()).collect();
    order.sort_by(|&i, &j| total_energies[i].total_cmp(&total_energies[j]).then(i.cmp(&j)));
    let mut labels = vec![0; total_energies.len()];
    let mut shell = 0;
    for w in 0..order.len() {
        if w > 0 && total_energies[order[w]] - total_energies[order[w - 1]] > tol {
            shell += 1;
        }
        labels[order[w]] = shell;
    }
    labels
}

fn draw_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let x: f64 = StandardNormal.sample(rng);
            g[i * n + j] = x;
            g[j * n + i] = x;
        }
    }
    g
}

/// Real symmetric, `Θ`-invariant, scaled to `‖·‖_max = strength`.
fn finish_interaction(mut g: Vec<f64>, n: usize, theta: &TimeReversal, strength: f64) -> HermitianOperator {
    if !theta.is_conjugation() {
        let p = theta.permutation();
        let sym: Vec<f64> = (0..n * n).map(|k| 0.5 * (g[k] + g[p[k / n] * n + p[k % n]])).collect();
        g = sym;
    }
    let max = g.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let scale = if max > 0.0 { strength / max } else { 0.0 };
    let op = ComplexOperator::new(n, g.into_iter().map(|x| C64::new(x * scale, 0.0)).collect())
        .expect("square buffer");
    HermitianOperator::new(op).expect("real symmetric by construction")
}

fn mask_to_shells(g: &mut [f64], shells: &[usize]) {
    let n = shells.len();
    for i in 0..n {
        for j in 0..n {
            if shells[i] != shells[j] {
                g[i * n + j] = 0.0;
            }
        }
    }
}

/// Random interaction Hamiltonian, deterministic in `spec.seed`.
///
/// Entries are i.i.d. standard normal, real and symmetric in the product
/// energy basis, so `Θ† H_int Θ = H_int` for `Θ` = conjugation (a permuted
/// `Θ` is enforced by symmetrizing over the permutation). In strict mode
/// entries coupling different total-energy shells are zeroed.
pub fn random_trs_hamiltonian(spec: &InteractionSpec, basis: &ProductEnergyBasis, theta: &TimeReversal) -> HermitianOperator {
    let n = basis.dims().total();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g = draw_symmetric(&mut rng, n);
    if spec.mode == DynamicsMode::Strict {
        mask_to_shells(&mut g, &energy_shells(&basis.total_energies(), SHELL_TOL));
    }
    finish_interaction(g, n, theta, spec.strength)
}

/// `H_A + H_B + H_int` in energy coordinates.
pub fn total_hamiltonian(basis: &ProductEnergyBasis, h_int: &HermitianOperator) -> HermitianOperator {
    HermitianOperator::symmetrized(&basis.free_hamiltonian().add(h_int))
}

#[derive(Clone, Debug)]
pub struct Dynamics {
    pub h_int: HermitianOperator,
    pub unitary: ComplexOperator,
    /// `|tr[(UρU† − ρ)(H_A + H_B)]|` for the target state.
    pub energy_drift: f64,
    /// Interaction draws consumed (1 in strict mode).
    pub draws: usize,
}

fn drift_for(basis: &ProductEnergyBasis, h_int: &HermitianOperator, t: f64, rho: &DensityMatrix) -> Result<(ComplexOperator, f64)> {
    let u = expm_i(&total_hamiltonian(basis, h_int), t)?;
    let h0 = basis.free_hamiltonian();
    let evolved = u.matmul(rho).matmul(&u.adjoint());
    let signed = evolved.sub(rho).matmul(&h0).trace().re;
    Ok((u, signed))
}

/// Generates `H_int` and `U = e^{−iHt}` for the given mode.
///
/// Mean-conserving mode draws unrestricted interactions. A draw whose drift
/// is within `mean_tol` is accepted outright; otherwise, once draws of both
/// drift signs are available, the drift is bisected to zero along the
/// segment joining them (rescaled to the target strength at every point).
pub fn generate_dynamics(
    spec: &InteractionSpec,
    basis: &ProductEnergyBasis,
    theta: &TimeReversal,
    rho: &DensityMatrix,
) -> Result<Dynamics> {
    let n = basis.dims().total();
    if rho.dim() != n {
        return Err(XftError::Dimension(format!("state has dimension {}, basis {n}", rho.dim())));
    }
    if spec.mode == DynamicsMode::Strict {
        let h_int = random_trs_hamiltonian(spec, basis, theta);
        let (unitary, drift) = drift_for(basis, &h_int, spec.t, rho)?;
        return Ok(Dynamics { h_int, unitary, energy_drift: drift.abs(), draws: 1 });
    }

    let tol = spec
        .mean_tol
        .unwrap_or_else(|| 1e-6 * basis.total_energies().iter().fold(0.0_f64, |m, e| m.max(e.abs())));
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut positive: Option<Vec<f64>> = None;
    let mut negative: Option<Vec<f64>> = None;

    for draw in 1..=MEAN_CONSERVING_RETRIES {
        let g = draw_symmetric(&mut rng, n);
        let h_int = finish_interaction(g.clone(), n, theta, spec.strength);
        let (unitary, drift) = drift_for(basis, &h_int, spec.t, rho)?;
        if drift.abs() <= tol {
            return Ok(Dynamics { h_int, unitary, energy_drift: drift.abs(), draws: draw });
        }
        if drift > 0.0 && positive.is_none() {
            positive = Some(g);
        } else if drift < 0.0 && negative.is_none() {
            negative = Some(g);
        }
        if let (Some(gp), Some(gn)) = (&positive, &negative) {
            if let Some((h_int, unitary, drift)) = bisect_drift(gp, gn, n, spec, basis, theta, rho, tol)? {
                return Ok(Dynamics { h_int, unitary, energy_drift: drift, draws: draw });
            }
            // the segment crossed a degenerate direction; look for a new bracket
            positive = None;
            negative = None;
        }
    }
    Err(XftError::Generation(format!(
        "no mean-conserving interaction within {tol:e} after {MEAN_CONSERVING_RETRIES} draws"
    )))
}

#[allow(clippy::too_many_arguments)]
fn bisect_drift(
    gp: &[f64],
    gn: &[f64],
    n: usize,
    spec: &InteractionSpec,
    basis: &ProductEnergyBasis,
    theta: &TimeReversal,
    rho: &DensityMatrix,
    tol: f64,
) -> Result<Option<(HermitianOperator, ComplexOperator, f64)>> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_STEPS {
        let s = 0.5 * (lo + hi);
        let g: Vec<f64> = gp.iter().zip(gn).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        let h_int = finish_interaction(g, n, theta, spec.strength);
        let (u, drift) = drift_for(basis, &h_int, spec.t, rho)?;
        if drift.abs() <= tol {
            return Ok(Some((h_int, u, drift.abs())));
        }
        if drift > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if (hi - lo).abs() < f64::EPSILON {
            break;
        }
    }
    Ok(None)
}

/// `UρU†`
pub fn evolve(u: &ComplexOperator, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if u.dim() != rho.dim() {
        return Err(XftError::Dimension(format!("unitary {} vs state {}", u.dim(), rho.dim())));
    }
    let dev = u.unitarity_deviation();
    if dev > UNITARY_TOL {
        return Err(XftError::NonUnitary(dev));
    }
    let out = u.matmul(rho).matmul(&u.adjoint());
    Ok(DensityMatrix::trusted(HermitianOperator::symmetrized(&out).into_operator()))
}

/// `‖U − Θ†U†Θ‖_max`
pub fn check_trs(u: &ComplexOperator, theta: &TimeReversal) -> f64 {
    u.max_diff(&theta.reversed_adjoint(u))
}

/// `max | |⟨b|U|a⟩|² − |⟨Θa|U|Θb⟩|² |` over all basis pairs.
pub fn transition_reversal_deviation(u: &ComplexOperator, theta: &TimeReversal) -> f64 {
    let n = u.dim();
    let mut worst = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            let fwd = u[(b, a)].norm_sqr();
            let rev = u[(theta.image(a), theta.image(b))].norm_sqr();
            worst = worst.max((fwd - rev).abs());
        }
    }
    worst
}

/// `|tr[(UρU† − ρ)(H_A⊗I + I⊗H_B)]|`, all operators in one common basis.
pub fn check_energy_conservation(
    rho: &DensityMatrix,
    u: &ComplexOperator,
    h_a: &HermitianOperator,
    h_b: &HermitianOperator,
) -> Result<f64> {
    let n = h_a.dim() * h_b.dim();
    if rho.dim() != n || u.dim() != n {
        return Err(XftError::Dimension(format!(
            "state {} and unitary {} must match {}x{}",
            rho.dim(),
            u.dim(),
            h_a.dim(),
            h_b.dim()
        )));
    }
    let h0 = kron(h_a, &ComplexOperator::identity(h_b.dim())).add(&kron(&ComplexOperator::identity(h_a.dim()), h_b));
    let evolved = u.matmul(rho).matmul(&u.adjoint());
    Ok(evolved.sub(rho).matmul(&h0).trace().re.abs())
}

/// Exchange of two equal-dimension subsystems.
pub fn swap_unitary(d: usize) -> ComplexOperator {
    let mut u = ComplexOperator::zeros(d * d);
    for i in 0..d {
        for j in 0..d {
            u[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    u
}
