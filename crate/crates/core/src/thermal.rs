//! Gibbs states and joint states with prescribed thermal marginals.

use serde::{Deserialize, Serialize};

use crate::error::{Result, XftError};
use crate::linalg::{
    eigh, kron, partial_trace, ComplexOperator, DensityMatrix, Dims, Eigen, HermitianOperator,
    Subsystem, C64,
};

/// Largest admissible `β·(E_max − E_min)`.
pub const MAX_BOLTZMANN_EXPONENT: f64 = 700.0;
/// Sorted Gibbs pmfs must agree this closely for a thermofield pairing.
pub const PMF_MATCH_TOL: f64 = 1e-10;

/// A subsystem Hamiltonian together with an inverse temperature.
#[derive(Clone, Debug)]
pub struct ThermalSpec {
    hamiltonian: HermitianOperator,
    beta: f64,
    eigen: Eigen,
    pmf: Vec<f64>,
    log_partition: f64,
}

impl ThermalSpec {
    pub fn new(hamiltonian: HermitianOperator, beta: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return Err(XftError::Invalid(format!("inverse temperature must be >= 0, got {beta}")));
        }
        if beta.is_infinite() {
            return Err(XftError::Range(
                "beta = inf is not representable; use a large finite beta".into(),
            ));
        }
        let eigen = eigh(&hamiltonian)?;
        let e0 = eigen.values[0];
        let spread = eigen.values[eigen.values.len() - 1] - e0;
        if beta * spread > MAX_BOLTZMANN_EXPONENT {
            return Err(XftError::Range(format!(
                "beta * spectral spread = {} exceeds {MAX_BOLTZMANN_EXPONENT}",
                beta * spread
            )));
        }
        let weights: Vec<f64> = eigen.values.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let sum: f64 = weights.iter().sum();
        let pmf = weights.iter().map(|w| w / sum).collect();
        let log_partition = -beta * e0 + sum.ln();
        if !log_partition.exp().is_finite() {
            return Err(XftError::Range(format!(
                "partition function overflows (ln Z = {log_partition}); shift the spectrum"
            )));
        }
        Ok(Self { hamiltonian, beta, eigen, pmf, log_partition })
    }

    pub fn from_spectrum(energies: &[f64], beta: f64) -> Result<Self> {
        if energies.is_empty() || energies.iter().any(|e| !e.is_finite()) {
            return Err(XftError::Invalid("spectrum must be a non-empty list of finite reals".into()));
        }
        Self::new(HermitianOperator::from_real_diagonal(energies), beta)
    }

    pub fn hamiltonian(&self) -> &HermitianOperator {
        &self.hamiltonian
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn temperature(&self) -> f64 {
        1.0 / self.beta
    }

    pub fn dim(&self) -> usize {
        self.pmf.len()
    }

    /// Energies in ascending order; index `k` labels the `k`-th eigenvector.
    pub fn energies(&self) -> &[f64] {
        &self.eigen.values
    }

    pub fn eigenbasis(&self) -> &Eigen {
        &self.eigen
    }

    /// Gibbs populations in the energy eigenbasis.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn partition_fn(&self) -> f64 {
        self.log_partition.exp()
    }

    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    pub fn mean_energy(&self) -> f64 {
        self.pmf.iter().zip(self.energies()).map(|(p, e)| p * e).sum()
    }
}

/// `e^{−βH}/Z` in the basis `H` was given in.
pub fn gibbs_state(spec: &ThermalSpec) -> DensityMatrix {
    let pmf = spec.pmf();
    let mut k = 0;
    let op = spec.eigenbasis().reconstruct_with(|_| {
        let w = C64::new(pmf[k], 0.0);
        k += 1;
        w
    });
    DensityMatrix::trusted(op)
}

pub fn product_state(rho_a: &DensityMatrix, rho_b: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::trusted(kron(rho_a, rho_b))
}

/// The product energy eigenbasis `{|φ⟩⊗|χ⟩}` of two subsystems.
///
/// Dynamics and histories work in these coordinates; `to_energy` and
/// `from_energy` convert joint operators from and to the original basis.
#[derive(Clone, Debug)]
pub struct ProductEnergyBasis {
    dims: Dims,
    energies_a: Vec<f64>,
    energies_b: Vec<f64>,
    transform: ComplexOperator,
}

impl ProductEnergyBasis {
    pub fn new(spec_a: &ThermalSpec, spec_b: &ThermalSpec) -> Self {
        Self {
            dims: Dims::new(spec_a.dim(), spec_b.dim()),
            energies_a: spec_a.energies().to_vec(),
            energies_b: spec_b.energies().to_vec(),
            transform: kron(&spec_a.eigenbasis().vectors, &spec_b.eigenbasis().vectors),
        }
    }

    /// Basis whose kets are the computational ones, for diagonal Hamiltonians
    /// whose spectra are already ascending.
    pub fn from_energies(energies_a: &[f64], energies_b: &[f64]) -> Self {
        let dims = Dims::new(energies_a.len(), energies_b.len());
        Self {
            dims,
            energies_a: energies_a.to_vec(),
            energies_b: energies_b.to_vec(),
            transform: ComplexOperator::identity(dims.total()),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn energies_a(&self) -> &[f64] {
        &self.energies_a
    }

    pub fn energies_b(&self) -> &[f64] {
        &self.energies_b
    }

    pub fn total_energy(&self, k: usize) -> f64 {
        let (phi, chi) = self.dims.split(k);
        self.energies_a[phi] + self.energies_b[chi]
    }

    pub fn total_energies(&self) -> Vec<f64> {
        (0..self.dims.total()).map(|k| self.total_energy(k)).collect()
    }

    /// `H_A ⊗ I` in energy coordinates.
    pub fn local_hamiltonian_a(&self) -> HermitianOperator {
        let d: Vec<f64> = (0..self.dims.total()).map(|k| self.energies_a[self.dims.split(k).0]).collect();
        HermitianOperator::from_real_diagonal(&d)
    }

    /// `I ⊗ H_B` in energy coordinates.
    pub fn local_hamiltonian_b(&self) -> HermitianOperator {
        let d: Vec<f64> = (0..self.dims.total()).map(|k| self.energies_b[self.dims.split(k).1]).collect();
        HermitianOperator::from_real_diagonal(&d)
    }

    /// `H_A ⊗ I + I ⊗ H_B` in energy coordinates.
    pub fn free_hamiltonian(&self) -> HermitianOperator {
        HermitianOperator::from_real_diagonal(&self.total_energies())
    }

    pub fn to_energy(&self, op: &ComplexOperator) -> ComplexOperator {
        op.conjugate_by(&self.transform)
    }

    pub fn from_energy(&self, op: &ComplexOperator) -> ComplexOperator {
        op.conjugate_by(&self.transform.adjoint())
    }

    pub fn state_to_energy(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::trusted(HermitianOperator::symmetrized(&self.to_energy(rho)).into_operator())
    }

    pub fn state_from_energy(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix::trusted(HermitianOperator::symmetrized(&self.from_energy(rho)).into_operator())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    Product,
    ClassicalCoupled,
    ThermofieldPure,
    Interpolated,
}

/// Correlated endpoint used by the interpolated family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatedBase {
    ClassicalCoupled,
    #[default]
    ThermofieldPure,
}

#[derive(Clone, Debug)]
pub struct JointStateSpec {
    pub family: StateFamily,
    /// Correlation strength in `[0, 1]`.
    pub lambda: f64,
    pub spec_a: ThermalSpec,
    pub spec_b: ThermalSpec,
    pub base: CorrelatedBase,
}

impl JointStateSpec {
    pub fn new(family: StateFamily, lambda: f64, spec_a: ThermalSpec, spec_b: ThermalSpec) -> Self {
        Self { family, lambda, spec_a, spec_b, base: CorrelatedBase::default() }
    }

    pub fn with_base(mut self, base: CorrelatedBase) -> Self {
        self.base = base;
        self
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.spec_a.dim(), self.spec_b.dim())
    }

    pub fn basis(&self) -> ProductEnergyBasis {
        ProductEnergyBasis::new(&self.spec_a, &self.spec_b)
    }

    fn check_lambda(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(XftError::Invalid(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }

    /// Builds the joint state named by `family`.
    pub fn build(&self) -> Result<DensityMatrix> {
        match self.family {
            StateFamily::Product => Ok(product_state(&gibbs_state(&self.spec_a), &gibbs_state(&self.spec_b))),
            StateFamily::ClassicalCoupled => classical_coupled_state(self),
            StateFamily::ThermofieldPure => thermofield_pure_state(self),
            StateFamily::Interpolated => {
                let corr = match self.base {
                    CorrelatedBase::ClassicalCoupled => {
                        classical_coupled_state(&JointStateSpec { lambda: 1.0, ..self.clone() })?
                    }
                    CorrelatedBase::ThermofieldPure => thermofield_pure_state(self)?,
                };
                interpolated_state(&corr, self)
            }
        }
    }
}

/// Indices sorted by descending probability, ties by ascending index.
fn descending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&i, &j| p[j].total_cmp(&p[i]).then(i.cmp(&j)));
    idx
}

/// Comonotone coupling of two pmfs: mass matched in sorted order.
///
/// The greedy sweep runs from the smallest masses upward, which yields the
/// same coupling as the north-west-corner rule on descending order but
/// leaves the rounding residue on the largest entries.
pub fn comonotone_coupling(p: &[f64], r: &[f64]) -> Vec<Vec<f64>> {
    let oa = descending_order(p);
    let ob = descending_order(r);
    let mut c = vec![vec![0.0; r.len()]; p.len()];
    let (mut ia, mut ib) = (p.len(), r.len());
    let mut ra = 0.0;
    let mut rb = 0.0;
    let mut fresh_a = true;
    let mut fresh_b = true;
    while ia > 0 && ib > 0 {
        let i = oa[ia - 1];
        let j = ob[ib - 1];
        if fresh_a {
            ra = p[i];
            fresh_a = false;
        }
        if fresh_b {
            rb = r[j];
            fresh_b = false;
        }
        if ra <= rb {
            c[i][j] += ra;
            rb -= ra;
            ia -= 1;
            fresh_a = true;
            if ia == 0 {
                break;
            }
        } else {
            c[i][j] += rb;
            ra -= rb;
            ib -= 1;
            fresh_b = true;
        }
    }
    c
}

pub fn classical_coupled_state(spec: &JointStateSpec) -> Result<DensityMatrix> {
    spec.check_lambda()?;
    let dims = spec.dims();
    let p = spec.spec_a.pmf();
    let r = spec.spec_b.pmf();
    let coupling = comonotone_coupling(p, r);
    let lambda = spec.lambda;
    let diag: Vec<f64> = (0..dims.total())
        .map(|k| {
            let (i, j) = dims.split(k);
            (1.0 - lambda) * (p[i] * r[j]) + lambda * coupling[i][j]
        })
        .collect();
    let energy_rho = DensityMatrix::trusted(ComplexOperator::from_real_diagonal(&diag));
    Ok(spec.basis().state_from_energy(&energy_rho))
}

/// Pairing `π` with `p_A(k) = p_B(π(k))`, or the deviation that prevents it.
pub fn thermofield_pairing(p: &[f64], r: &[f64]) -> Result<Vec<usize>> {
    if p.len() != r.len() {
        return Err(XftError::IncompatibleSpectra(format!(
            "subsystem dimensions differ ({} vs {})",
            p.len(),
            r.len()
        )));
    }
    let oa = descending_order(p);
    let ob = descending_order(r);
    let dev = oa.iter().zip(&ob).map(|(&i, &j)| (p[i] - r[j]).abs()).fold(0.0, f64::max);
    if dev > PMF_MATCH_TOL {
        return Err(XftError::IncompatibleSpectra(format!(
            "sorted Gibbs pmfs differ by up to {dev:e} (tolerance {PMF_MATCH_TOL:e})"
        )));
    }
    let mut pairing = vec![0; p.len()];
    for (&i, &j) in oa.iter().zip(&ob) {
        pairing[i] = j;
    }
    Ok(pairing)
}

/// `|ψ⟩ = Σ_k √p_k |φ_k⟩⊗|χ_{π(k)}⟩`, a purification with Gibbs marginals.
pub fn thermofield_pure_state(spec: &JointStateSpec) -> Result<DensityMatrix> {
    let p = spec.spec_a.pmf();
    let pairing = thermofield_pairing(p, spec.spec_b.pmf())?;
    let dims = spec.dims();
    let mut psi = vec![C64::new(0.0, 0.0); dims.total()];
    for (k, &j) in pairing.iter().enumerate() {
        psi[dims.index(k, j)] = C64::new(p[k].sqrt(), 0.0);
    }
    let energy_rho = DensityMatrix::trusted(ComplexOperator::outer(&psi));
    Ok(spec.basis().state_from_energy(&energy_rho))
}

/// `(1−λ) ρ_A⊗ρ_B + λ ρ_corr`.
pub fn interpolated_state(rho_corr: &DensityMatrix, spec: &JointStateSpec) -> Result<DensityMatrix> {
    spec.check_lambda()?;
    let report = verify_thermal_marginals(rho_corr, &spec.spec_a, &spec.spec_b, 1e-10)?;
    if !report.pass {
        return Err(XftError::Marginal(format!(
            "correlated endpoint deviates from Gibbs marginals by {:e} (A) and {:e} (B)",
            report.deviation_a, report.deviation_b
        )));
    }
    let prod = product_state(&gibbs_state(&spec.spec_a), &gibbs_state(&spec.spec_b));
    let lambda = spec.lambda;
    let entries = prod
        .entries()
        .iter()
        .zip(rho_corr.entries())
        .map(|(x, y)| x * (1.0 - lambda) + y * lambda)
        .collect();
    Ok(DensityMatrix::trusted(ComplexOperator::new(prod.dim(), entries)?))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarginalReport {
    pub deviation_a: f64,
    pub deviation_b: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn verify_thermal_marginals(
    rho: &DensityMatrix,
    spec_a: &ThermalSpec,
    spec_b: &ThermalSpec,
    tol: f64,
) -> Result<MarginalReport> {
    let dims = Dims::new(spec_a.dim(), spec_b.dim());
    let ra = partial_trace(rho, dims, Subsystem::A)?;
    let rb = partial_trace(rho, dims, Subsystem::B)?;
    let deviation_a = ra.max_diff(&gibbs_state(spec_a));
    let deviation_b = rb.max_diff(&gibbs_state(spec_b));
    Ok(MarginalReport { deviation_a, deviation_b, tolerance: tol, pass: deviation_a <= tol && deviation_b <= tol })
}
