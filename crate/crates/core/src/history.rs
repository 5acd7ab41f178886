//! Two-point energy measurement histories.
//!
//! A history `γ = (φ,χ) → (φ',χ')` records the outcome of the initial sharp
//! energy measurement, unitary evolution and the final measurement. The
//! full history set is materialized, including zero-probability members,
//! so that twin pairing is total and sums run over the whole index set.

use serde::Serialize;

use crate::dynamics::{TimeReversal, SHELL_TOL};
use crate::error::{Result, XftError};
use crate::linalg::{factorization_deviation, kron, partial_trace_op, ComplexOperator, DensityMatrix, Dims, Subsystem, C64};
use crate::thermal::ProductEnergyBasis;

/// Probabilities at or below this are treated as vanishing in ratio checks.
pub const PROB_FLOOR: f64 = 1e-14;
pub const DEFAULT_BIN_TOL: f64 = SHELL_TOL;
/// Largest product dimension for which histories are enumerated.
pub const MAX_PRODUCT_DIM: usize = 4096;

const EFFECT_PSD_TOL: f64 = 1e-12;
const COMPLETENESS_TOL: f64 = 1e-10;
const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    SharpEnergy,
    GeneralPovm,
}

/// Local effects `{M_i}` on A and `{N_j}` on B; the joint outcomes are all
/// pairs `M_i ⊗ N_j`. Effects are in energy coordinates.
#[derive(Clone, Debug)]
pub struct Measurement {
    kind: MeasurementKind,
    effects_a: Vec<ComplexOperator>,
    effects_b: Vec<ComplexOperator>,
}

fn check_effects(effects: &[ComplexOperator], label: &str) -> Result<()> {
    let Some(first) = effects.first() else {
        return Err(XftError::Invalid(format!("measurement on {label} has no effects")));
    };
    let d = first.dim();
    let mut sum = ComplexOperator::zeros(d);
    for (i, e) in effects.iter().enumerate() {
        if e.dim() != d {
            return Err(XftError::Dimension(format!("effect {i} on {label} has dimension {}", e.dim())));
        }
        let h = crate::linalg::HermitianOperator::new(e.clone())
            .map_err(|_| XftError::Invalid(format!("effect {i} on {label} is not self-adjoint")))?;
        let min = crate::linalg::eigh(&h)?.values[0];
        if min < -EFFECT_PSD_TOL {
            return Err(XftError::Invalid(format!("effect {i} on {label} has eigenvalue {min:e}")));
        }
        sum = sum.add(e);
    }
    let dev = sum.max_diff(&ComplexOperator::identity(d));
    if dev > COMPLETENESS_TOL {
        return Err(XftError::Invalid(format!("effects on {label} sum to identity only within {dev:e}")));
    }
    Ok(())
}

impl Measurement {
    /// Rank-1 projectors onto the product energy basis.
    pub fn sharp_energy(dims: Dims) -> Self {
        let proj = |d: usize| {
            (0..d)
                .map(|k| {
                    let mut p = ComplexOperator::zeros(d);
                    p[(k, k)] = C64::new(1.0, 0.0);
                    p
                })
                .collect()
        };
        Self { kind: MeasurementKind::SharpEnergy, effects_a: proj(dims.a), effects_b: proj(dims.b) }
    }

    pub fn general_povm(effects_a: Vec<ComplexOperator>, effects_b: Vec<ComplexOperator>) -> Result<Self> {
        check_effects(&effects_a, "A")?;
        check_effects(&effects_b, "B")?;
        Ok(Self { kind: MeasurementKind::GeneralPovm, effects_a, effects_b })
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn effects_a(&self) -> &[ComplexOperator] {
        &self.effects_a
    }

    pub fn effects_b(&self) -> &[ComplexOperator] {
        &self.effects_b
    }

    pub fn dims(&self) -> Dims {
        Dims::new(self.effects_a[0].dim(), self.effects_b[0].dim())
    }

    /// Joint effects `M_i ⊗ N_j` with their labels.
    pub fn joint_effects(&self) -> Vec<((usize, usize), ComplexOperator)> {
        let mut out = Vec::with_capacity(self.effects_a.len() * self.effects_b.len());
        for (i, m) in self.effects_a.iter().enumerate() {
            for (j, n) in self.effects_b.iter().enumerate() {
                out.push(((i, j), kron(m, n)));
            }
        }
        out
    }
}

/// `Σ (M_φ⊗N_χ) ρ (M_φ⊗N_χ)` for a sharp energy measurement.
pub fn dephase(rho: &DensityMatrix, m1: &Measurement) -> Result<DensityMatrix> {
    if m1.kind() != MeasurementKind::SharpEnergy {
        return Err(XftError::Invalid("dephasing requires a sharp energy measurement".into()));
    }
    let dims = m1.dims();
    if rho.dim() != dims.total() {
        return Err(XftError::Dimension(format!("state {} vs measurement {}", rho.dim(), dims.total())));
    }
    let mut out = ComplexOperator::zeros(rho.dim());
    for (_, p) in m1.joint_effects() {
        out = out.add(&p.matmul(rho).matmul(&p));
    }
    Ok(DensityMatrix::trusted(out))
}

/// `⟨φ,χ|ρ|φ,χ⟩` with `ρ` in energy coordinates.
pub fn outcome_probability(rho: &DensityMatrix, dims: Dims, phi: usize, chi: usize) -> Result<f64> {
    if rho.dim() != dims.total() {
        return Err(XftError::Dimension(format!("state {} vs dims {}x{}", rho.dim(), dims.a, dims.b)));
    }
    if phi >= dims.a || chi >= dims.b {
        return Err(XftError::Index(format!("outcome ({phi},{chi}) outside {}x{}", dims.a, dims.b)));
    }
    let k = dims.index(phi, chi);
    Ok(rho[(k, k)].re)
}

fn log_ratio(joint: f64, marginal: f64) -> Result<f64> {
    if marginal <= DENOMINATOR_FLOOR {
        return Err(XftError::Undefined(format!("marginal outcome probability {marginal:e} vanishes")));
    }
    if joint <= DENOMINATOR_FLOOR {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(joint.ln() - marginal.ln())
}

/// `I(ρ; M, N) = ln( tr[M⊗N ρ] / (tr[M ρ_A] tr[N ρ_B]) )`.
///
/// Returns `−∞` when the joint probability vanishes but the marginals do
/// not; `Undefined` when a marginal probability vanishes.
pub fn correlation_index(rho: &DensityMatrix, dims: Dims, m: &ComplexOperator, n: &ComplexOperator) -> Result<f64> {
    if m.dim() != dims.a || n.dim() != dims.b {
        return Err(XftError::Dimension(format!("effects {}x{} vs dims {}x{}", m.dim(), n.dim(), dims.a, dims.b)));
    }
    let joint = kron(m, n).matmul(rho).trace().re;
    let pa = m.matmul(&partial_trace_op(rho, dims, Subsystem::A)?).trace().re;
    let pb = n.matmul(&partial_trace_op(rho, dims, Subsystem::B)?).trace().re;
    log_ratio(joint, pa * pb)
}

/// Correlation index at every sharp product outcome, in one pass.
fn sharp_correlation_indices(outcome: &[f64], dims: Dims) -> Vec<std::result::Result<f64, XftError>> {
    let mut ma = vec![0.0; dims.a];
    let mut mb = vec![0.0; dims.b];
    for (k, p) in outcome.iter().enumerate() {
        let (phi, chi) = dims.split(k);
        ma[phi] += p;
        mb[chi] += p;
    }
    outcome
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let (phi, chi) = dims.split(k);
            log_ratio(p, ma[phi] * mb[chi])
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct History {
    pub id: usize,
    /// `(φ, χ)`
    pub initial: (usize, usize),
    /// `(φ', χ')`
    pub final_: (usize, usize),
    pub prob: f64,
    /// Energy transferred into A.
    pub q: f64,
    /// Change of the total free energy `E_A + E_B`.
    pub delta_eps: f64,
    /// `I` at the reversed final outcome minus `I` at the initial outcome.
    /// May be `±∞`; `NaN` only on zero-probability histories whose indices
    /// are both unreachable.
    pub delta_i: f64,
    pub reverse_id: usize,
    /// `|⟨φ',χ'|U|φ,χ⟩|²`
    #[serde(skip)]
    pub transition: f64,
}

/// All histories of one run plus the data they were built from.
#[derive(Clone, Debug)]
pub struct HistorySet {
    pub dims: Dims,
    pub energies_a: Vec<f64>,
    pub energies_b: Vec<f64>,
    /// Initial outcome probabilities `p(φ,χ)`, indexed by product index.
    pub outcome_probs: Vec<f64>,
    /// `I(ρ; M_φ, N_χ)` per product index (`NaN` where undefined).
    pub correlation: Vec<f64>,
    /// Reduced initial states in energy coordinates.
    pub reduced_a: ComplexOperator,
    pub reduced_b: ComplexOperator,
    /// `‖ρ − ρ_A⊗ρ_B‖_max` of the initial state.
    pub factorization_deviation: f64,
    pub histories: Vec<History>,
}

impl HistorySet {
    pub fn len(&self) -> usize {
        self.histories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.histories.is_empty()
    }

    pub fn twin(&self, h: &History) -> &History {
        &self.histories[h.reverse_id]
    }

    /// True when every product outcome has probability above [`PROB_FLOOR`].
    pub fn full_support(&self) -> bool {
        self.outcome_probs.iter().all(|&p| p > PROB_FLOOR)
    }

    /// Final outcome distribution `Σ_{initial} Prob[γ]`.
    pub fn final_probs(&self) -> Vec<f64> {
        let n = self.dims.total();
        let mut out = vec![0.0; n];
        for h in &self.histories {
            out[self.dims.index(h.final_.0, h.final_.1)] += h.prob;
        }
        out
    }

    pub fn mean(&self, f: impl Fn(&History) -> f64) -> f64 {
        self.histories.iter().filter(|h| h.prob > 0.0).map(|h| h.prob * f(h)).sum()
    }
}

/// Enumerates all `(d_A d_B)²` histories.
///
/// `rho` and `u` are in product energy coordinates. Histories are ordered
/// by `(initial, final)` product index; `id = initial·D + final`.
pub fn enumerate_histories(
    rho: &DensityMatrix,
    u: &ComplexOperator,
    theta: &TimeReversal,
    basis: &ProductEnergyBasis,
) -> Result<HistorySet> {
    let dims = basis.dims();
    let n = dims.total();
    if n > MAX_PRODUCT_DIM {
        return Err(XftError::Dimension(format!(
            "product dimension {n} exceeds the enumeration cap {MAX_PRODUCT_DIM}"
        )));
    }
    if rho.dim() != n || u.dim() != n || theta.dim() != n {
        return Err(XftError::Dimension(format!(
            "state {}, unitary {} and time reversal {} must all be {n}",
            rho.dim(),
            u.dim(),
            theta.dim()
        )));
    }
    let dev = u.unitarity_deviation();
    if dev > crate::dynamics::UNITARY_TOL {
        return Err(XftError::NonUnitary(dev));
    }

    let outcome_probs: Vec<f64> = (0..n).map(|k| rho[(k, k)].re).collect();
    let indices = sharp_correlation_indices(&outcome_probs, dims);
    let correlation: Vec<f64> = indices.iter().map(|r| *r.as_ref().unwrap_or(&f64::NAN)).collect();

    let mut histories = Vec::with_capacity(n * n);
    for a in 0..n {
        let (phi, chi) = dims.split(a);
        for b in 0..n {
            let (phi_f, chi_f) = dims.split(b);
            let transition = u[(b, a)].norm_sqr();
            let prob = outcome_probs[a].max(0.0) * transition;
            let b_star = theta.image(b);
            let delta_i = match (&indices[b_star], &indices[a]) {
                (Ok(fin), Ok(init)) => fin - init,
                (Err(e), _) | (_, Err(e)) => {
                    if prob > 0.0 {
                        return Err(e.clone());
                    }
                    f64::NAN
                }
            };
            let q = basis.energies_a()[phi_f] - basis.energies_a()[phi];
            let delta_eps = basis.total_energy(b) - basis.total_energy(a);
            let reverse_id = b_star * n + theta.image(a);
            histories.push(History {
                id: a * n + b,
                initial: (phi, chi),
                final_: (phi_f, chi_f),
                prob,
                q,
                delta_eps,
                delta_i,
                reverse_id,
                transition,
            });
        }
    }
    Ok(HistorySet {
        dims,
        energies_a: basis.energies_a().to_vec(),
        energies_b: basis.energies_b().to_vec(),
        outcome_probs,
        correlation,
        reduced_a: partial_trace_op(rho, dims, Subsystem::A)?,
        reduced_b: partial_trace_op(rho, dims, Subsystem::B)?,
        factorization_deviation: factorization_deviation(rho, dims)?,
        histories,
    })
}

/// The histories sharing one `(q, Δε)` label.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionClass {
    pub q: f64,
    pub delta_eps: f64,
    pub prob: f64,
    /// Largest member `ΔI`; `None` when no member contributes.
    pub delta_i_l: Option<f64>,
    /// Smallest member `ΔI`; `None` when no member contributes.
    pub delta_i_u: Option<f64>,
    pub member_ids: Vec<usize>,
}

impl TransitionClass {
    pub fn empty(q: f64, delta_eps: f64) -> Self {
        Self { q, delta_eps, prob: 0.0, delta_i_l: None, delta_i_u: None, member_ids: Vec::new() }
    }

    /// `ΔI_l − ΔI_u`
    pub fn bound_width(&self) -> Option<f64> {
        Some(self.delta_i_l? - self.delta_i_u?)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Groups histories into classes `Γ(q, Δε)`.
///
/// Histories closer than `bin_tol` in both coordinates are joined
/// (transitively); a class is labelled by its member means. The extremal
/// `ΔI` values range over members that carry probability on either side
/// of their twin pair, i.e. the members entering `Prob[Γ]` or
/// `Prob[Γ*]`.
pub fn group_classes(set: &HistorySet, bin_tol: f64) -> Vec<TransitionClass> {
    let hs = &set.histories;
    let m = hs.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| hs[i].q.total_cmp(&hs[j].q).then(hs[i].delta_eps.total_cmp(&hs[j].delta_eps)).then(i.cmp(&j)));
    let mut parent: Vec<usize> = (0..m).collect();
    for w in 0..m {
        let i = order[w];
        for &j in &order[w + 1..] {
            if hs[j].q - hs[i].q > bin_tol {
                break;
            }
            if (hs[j].delta_eps - hs[i].delta_eps).abs() <= bin_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(i);
    }

    let mut classes: Vec<TransitionClass> = groups
        .into_values()
        .map(|members| {
            let count = members.len() as f64;
            let q = members.iter().map(|&i| hs[i].q).sum::<f64>() / count;
            let delta_eps = members.iter().map(|&i| hs[i].delta_eps).sum::<f64>() / count;
            let prob = members.iter().map(|&i| hs[i].prob).sum();
            let contributing = members
                .iter()
                .map(|&i| &hs[i])
                .filter(|h| (h.prob > PROB_FLOOR || hs[h.reverse_id].prob > PROB_FLOOR) && !h.delta_i.is_nan());
            let (mut lo, mut hi): (Option<f64>, Option<f64>) = (None, None);
            for h in contributing {
                hi = Some(hi.map_or(h.delta_i, |v| v.max(h.delta_i)));
                lo = Some(lo.map_or(h.delta_i, |v| v.min(h.delta_i)));
            }
            TransitionClass {
                q,
                delta_eps,
                prob,
                delta_i_l: hi,
                delta_i_u: lo,
                member_ids: members.iter().map(|&i| hs[i].id).collect(),
            }
        })
        .collect();
    classes.sort_by(|a, b| a.q.total_cmp(&b.q).then(a.delta_eps.total_cmp(&b.delta_eps)));
    classes
}

/// The class at `(−q, −Δε)`, or an empty class when none exists.
pub fn reverse_class(classes: &[TransitionClass], q: f64, delta_eps: f64, bin_tol: f64) -> TransitionClass {
    classes
        .iter()
        .find(|c| (c.q + q).abs() <= bin_tol && (c.delta_eps + delta_eps).abs() <= bin_tol)
        .cloned()
        .unwrap_or_else(|| TransitionClass::empty(-q, -delta_eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::swap_unitary;
    use crate::thermal::{gibbs_state, product_state, thermofield_pure_state, JointStateSpec, StateFamily, ThermalSpec};

    fn qubit(beta: f64) -> ThermalSpec {
        ThermalSpec::from_spectrum(&[0.0, 1.0], beta).unwrap()
    }

    fn swap_setup() -> (HistorySet, ThermalSpec, ThermalSpec) {
        let (sa, sb) = (qubit(2.0), qubit(1.0));
        let basis = ProductEnergyBasis::new(&sa, &sb);
        let rho = product_state(&gibbs_state(&sa), &gibbs_state(&sb));
        let set = enumerate_histories(&rho, &swap_unitary(2), &TimeReversal::conjugation(4), &basis).unwrap();
        (set, sa, sb)
    }

    fn tfd(beta: f64) -> (DensityMatrix, Dims) {
        let spec = JointStateSpec::new(StateFamily::ThermofieldPure, 0.0, qubit(beta), qubit(beta));
        (thermofield_pure_state(&spec).unwrap(), spec.dims())
    }

    #[test]
    fn dephase_examples() {
        let dims = Dims::new(2, 2);
        let m1 = Measurement::sharp_energy(dims);
        let diag = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.4, 0.1, 0.3, 0.2])).unwrap();
        assert!(dephase(&diag, &m1).unwrap().max_diff(&diag) <= 1e-14);

        let (rho, _) = tfd(1.0);
        let d = dephase(&rho, &m1).unwrap();
        let p0 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!(d.max_diff(&ComplexOperator::from_real_diagonal(&[p0, 0.0, 0.0, 1.0 - p0])) < 1e-15);
        for keep in [Subsystem::A, Subsystem::B] {
            let before = partial_trace_op(&rho, dims, keep).unwrap();
            let after = partial_trace_op(&d, dims, keep).unwrap();
            assert!(before.max_diff(&after) <= 1e-12);
        }
    }

    #[test]
    fn outcome_probability_examples() {
        let dims = Dims::new(2, 2);
        let mixed = DensityMatrix::maximally_mixed(4);
        assert_eq!(outcome_probability(&mixed, dims, 1, 0).unwrap(), 0.25);
        let (sa, sb) = (qubit(2.0), qubit(1.0));
        let rho = product_state(&gibbs_state(&sa), &gibbs_state(&sb));
        assert!((outcome_probability(&rho, dims, 1, 0).unwrap() - sa.pmf()[1] * sb.pmf()[0]).abs() < 1e-16);
        let (t, _) = tfd(1.0);
        assert!((outcome_probability(&t, dims, 0, 0).unwrap() - 0.7311).abs() < 1e-4);
        assert_eq!(outcome_probability(&t, dims, 0, 1).unwrap(), 0.0);
        assert!(matches!(outcome_probability(&t, dims, 2, 0), Err(XftError::Index(_))));
    }

    #[test]
    fn correlation_index_examples() {
        let dims = Dims::new(2, 2);
        let p0 = ComplexOperator::from_real_diagonal(&[1.0, 0.0]);
        let p1 = ComplexOperator::from_real_diagonal(&[0.0, 1.0]);
        let (sa, sb) = (qubit(2.0), qubit(1.0));
        let rho = product_state(&gibbs_state(&sa), &gibbs_state(&sb));
        assert!(correlation_index(&rho, dims, &p0, &p1).unwrap().abs() <= 1e-12);

        let (t, _) = tfd(1.0);
        let i00 = correlation_index(&t, dims, &p0, &p0).unwrap();
        assert!((i00 - 0.3133).abs() < 1e-3);
        assert_eq!(correlation_index(&t, dims, &p0, &p1).unwrap(), f64::NEG_INFINITY);

        let pure0 = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!(matches!(correlation_index(&pure0, dims, &p1, &p1), Err(XftError::Undefined(_))));
    }

    #[test]
    fn sharp_fast_path_matches_general_index() {
        let (t, dims) = tfd(0.7);
        let mixed = DensityMatrix::maximally_mixed(4);
        let rho = DensityMatrix::trusted(t.scale_real(0.6).add(&mixed.scale_real(0.4)));
        let probs: Vec<f64> = (0..4).map(|k| rho[(k, k)].re).collect();
        let fast = sharp_correlation_indices(&probs, dims);
        let m1 = Measurement::sharp_energy(dims);
        for ((i, j), _) in m1.joint_effects() {
            let general = correlation_index(&rho, dims, &m1.effects_a()[i], &m1.effects_b()[j]).unwrap();
            assert!((fast[dims.index(i, j)].as_ref().unwrap() - general).abs() < 1e-14);
        }
    }

    #[test]
    fn swap_histories() {
        let (set, sa, sb) = swap_setup();
        assert_eq!(set.len(), 16);
        let total: f64 = set.histories.iter().map(|h| h.prob).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        // (0,1) -> (1,0): index 1 -> 2
        let h = &set.histories[4 + 2];
        assert_eq!((h.initial, h.final_), ((0, 1), (1, 0)));
        assert!((h.prob - 0.8808 * 0.2689).abs() < 1e-3);
        assert!((h.prob - sa.pmf()[0] * sb.pmf()[1]).abs() < 1e-16);
        assert_eq!((h.q, h.delta_eps), (1.0, 0.0));
        assert_eq!(h.reverse_id, 2 * 4 + 1);
    }

    #[test]
    fn identity_dynamics_moves_nothing() {
        let basis = ProductEnergyBasis::from_energies(&[0.0, 1.0], &[0.0, 2.0]);
        let rho = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.4, 0.1, 0.3, 0.2])).unwrap();
        let set = enumerate_histories(&rho, &ComplexOperator::identity(4), &TimeReversal::conjugation(4), &basis).unwrap();
        for h in &set.histories {
            if h.prob > 0.0 {
                assert_eq!(h.initial, h.final_);
                assert_eq!((h.q, h.delta_eps), (0.0, 0.0));
            }
        }
        let classes = group_classes(&set, DEFAULT_BIN_TOL);
        let at_origin: Vec<_> = classes.iter().filter(|c| c.q == 0.0 && c.delta_eps == 0.0).collect();
        assert_eq!(at_origin.len(), 1);
        assert!((at_origin[0].prob - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reverse_pairing_is_a_bijection() {
        let (set, _, _) = swap_setup();
        let mut seen = vec![0; set.len()];
        for h in &set.histories {
            assert_eq!(set.twin(set.twin(h)).id, h.id);
            seen[h.reverse_id] += 1;
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn swap_classes_and_reverse() {
        let (set, sa, sb) = swap_setup();
        let classes = group_classes(&set, DEFAULT_BIN_TOL);
        assert_eq!(classes.len(), 9);
        assert!(classes.iter().all(|c| c.delta_eps == 0.0 || c.prob == 0.0));
        let up = classes.iter().find(|c| c.q == 1.0 && c.delta_eps == 0.0).unwrap();
        let down = reverse_class(&classes, up.q, up.delta_eps, DEFAULT_BIN_TOL);
        assert_eq!(down.q, -1.0);
        assert!((down.prob - 0.1192 * 0.7311).abs() < 1e-3);
        assert!((down.prob - sa.pmf()[1] * sb.pmf()[0]).abs() < 1e-16);
        let back = reverse_class(&classes, down.q, down.delta_eps, DEFAULT_BIN_TOL);
        assert_eq!(&back, up);
        let origin = classes.iter().find(|c| c.q == 0.0 && c.delta_eps == 0.0).unwrap();
        assert_eq!(&reverse_class(&classes, 0.0, 0.0, DEFAULT_BIN_TOL), origin);
        for c in &classes {
            let r = reverse_class(&classes, c.q, c.delta_eps, DEFAULT_BIN_TOL);
            assert_eq!(c.member_ids.len(), r.member_ids.len());
        }
        assert_eq!(reverse_class(&classes, 5.0, 0.0, DEFAULT_BIN_TOL).prob, 0.0);
    }

    #[test]
    fn enumeration_cap_and_dims() {
        let basis = ProductEnergyBasis::from_energies(&[0.0, 1.0], &[0.0, 1.0]);
        let err = enumerate_histories(&DensityMatrix::maximally_mixed(3), &swap_unitary(2), &TimeReversal::conjugation(4), &basis).unwrap_err();
        assert!(matches!(err, XftError::Dimension(_)));
    }

    #[test]
    fn povm_validation() {
        let half = ComplexOperator::identity(2).scale_real(0.5);
        assert!(Measurement::general_povm(vec![half.clone(), half.clone()], vec![ComplexOperator::identity(2)]).is_ok());
        assert!(Measurement::general_povm(vec![half.clone()], vec![ComplexOperator::identity(2)]).is_err());
        let neg = ComplexOperator::from_real_diagonal(&[1.5, -0.5]);
        let rest = ComplexOperator::from_real_diagonal(&[-0.5, 1.5]);
        assert!(Measurement::general_povm(vec![neg, rest], vec![ComplexOperator::identity(2)]).is_err());
    }
}
