//! Dense complex linear algebra for small bipartite systems.
//!
//! Operators are stored row-major. Composite indices follow the usual
//! tensor-product convention: the pair `(i, k)` of an `A ⊗ B` space maps
//! to `i * dim_b + k`.

use std::fmt;
use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Result, XftError};

pub type C64 = Complex64;

/// Self-adjointness tolerance at construction, relative to `max(1, ‖A‖_max)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace and eigenvalue slack for density matrices.
pub const STATE_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 100;

#[derive(Clone, PartialEq)]
pub struct ComplexOperator {
    dim: usize,
    entries: Vec<C64>,
}

impl fmt::Debug for ComplexOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexOperator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self[(i, j)];
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

impl ComplexOperator {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if dim == 0 {
            return Err(XftError::Dimension("operator dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(XftError::Dimension(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be at least 1");
        Self { dim, entries: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            op[(i, i)] = C64::new(1.0, 0.0);
        }
        op
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut op = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                op[(i, j)] = f(i, j);
            }
        }
        op
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut op = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            op[(i, i)] = C64::new(d, 0.0);
        }
        op
    }

    /// `|v⟩⟨v|`
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z.conj()).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.entries[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let row = &rhs.entries[k * n..(k + 1) * n];
                let dst = &mut out.entries[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        let entries = self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect();
        Self { dim: self.dim, entries }
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * c).collect() }
    }

    pub fn scale_real(&self, c: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|z| z * c).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖self − other‖_max`
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_diff dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)].re).collect()
    }

    pub fn max_off_diagonal(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    m = m.max(self[(i, j)].norm());
                }
            }
        }
        m
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "apply dimension mismatch");
        (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn commutator(&self, rhs: &Self) -> Self {
        self.matmul(rhs).sub(&rhs.matmul(self))
    }

    /// `‖U†U − I‖_max`
    pub fn unitarity_deviation(&self) -> f64 {
        self.adjoint().matmul(self).max_diff(&Self::identity(self.dim))
    }

    /// `max |A_ij − conj(A_ji)|`
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.dim {
            for j in i..self.dim {
                m = m.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        m
    }

    /// `W† A W`
    pub fn conjugate_by(&self, w: &Self) -> Self {
        w.adjoint().matmul(self).matmul(w)
    }
}

impl Index<(usize, usize)> for ComplexOperator {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexOperator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl Mul for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, rhs: &ComplexOperator) -> ComplexOperator {
        self.matmul(rhs)
    }
}

/// A self-adjoint operator.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator(ComplexOperator);

impl HermitianOperator {
    pub fn new(op: ComplexOperator) -> Result<Self> {
        let dev = op.hermiticity_deviation();
        if dev > HERMITIAN_TOL * op.max_abs().max(1.0) {
            return Err(XftError::Invalid(format!("operator is not self-adjoint (deviation {dev:e})")));
        }
        Ok(Self(op))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexOperator::from_real_diagonal(diag))
    }

    /// Replaces `A` by `(A + A†)/2`, removing rounding asymmetry.
    pub fn symmetrized(op: &ComplexOperator) -> Self {
        let adj = op.adjoint();
        Self(op.add(&adj).scale_real(0.5))
    }

    pub fn as_operator(&self) -> &ComplexOperator {
        &self.0
    }

    pub fn into_operator(self) -> ComplexOperator {
        self.0
    }
}

impl std::ops::Deref for HermitianOperator {
    type Target = ComplexOperator;
    fn deref(&self) -> &ComplexOperator {
        &self.0
    }
}

/// A positive, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexOperator);

impl DensityMatrix {
    pub fn new(op: ComplexOperator) -> Result<Self> {
        let h = HermitianOperator::new(op)?;
        let tr = h.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(XftError::Invalid(format!("trace {tr} differs from 1")));
        }
        let eig = eigh(&h)?;
        if let Some(&min) = eig.values.first() {
            if min < -STATE_TOL {
                return Err(XftError::Invalid(format!("negative eigenvalue {min:e}")));
            }
        }
        Ok(Self(h.into_operator()))
    }

    /// Construction path for operators that are states by construction
    /// (unitary conjugation, convex mixtures, partial traces of states).
    pub(crate) fn trusted(op: ComplexOperator) -> Self {
        Self(op)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self(ComplexOperator::identity(dim).scale_real(1.0 / dim as f64))
    }

    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(XftError::Invalid(format!("state vector norm² {norm} differs from 1")));
        }
        Ok(Self(ComplexOperator::outer(psi)))
    }

    pub fn as_operator(&self) -> &ComplexOperator {
        &self.0
    }

    pub fn as_hermitian(&self) -> HermitianOperator {
        HermitianOperator(self.0.clone())
    }

    pub fn purity(&self) -> f64 {
        self.0.matmul(&self.0).trace().re
    }
}

impl std::ops::Deref for DensityMatrix {
    type Target = ComplexOperator;
    fn deref(&self) -> &ComplexOperator {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Subsystem {
    A,
    B,
}

/// Local dimensions of a bipartite space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub a: usize,
    pub b: usize,
}

impl Dims {
    pub fn new(a: usize, b: usize) -> Self {
        Self { a, b }
    }

    pub fn total(&self) -> usize {
        self.a * self.b
    }

    pub fn index(&self, phi: usize, chi: usize) -> usize {
        phi * self.b + chi
    }

    pub fn split(&self, k: usize) -> (usize, usize) {
        (k / self.b, k % self.b)
    }
}

pub fn kron(a: &ComplexOperator, b: &ComplexOperator) -> ComplexOperator {
    let (da, db) = (a.dim(), b.dim());
    let n = da * db;
    let mut out = ComplexOperator::zeros(n);
    for i in 0..da {
        for j in 0..da {
            let aij = a[(i, j)];
            for k in 0..db {
                for l in 0..db {
                    out[(i * db + k, j * db + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn partial_trace_op(op: &ComplexOperator, dims: Dims, keep: Subsystem) -> Result<ComplexOperator> {
    if op.dim() != dims.total() {
        return Err(XftError::Dimension(format!(
            "operator of dimension {} cannot be split as {}x{}",
            op.dim(),
            dims.a,
            dims.b
        )));
    }
    let out = match keep {
        Subsystem::A => ComplexOperator::from_fn(dims.a, |i, j| {
            (0..dims.b).map(|k| op[(dims.index(i, k), dims.index(j, k))]).sum()
        }),
        Subsystem::B => ComplexOperator::from_fn(dims.b, |k, l| {
            (0..dims.a).map(|i| op[(dims.index(i, k), dims.index(i, l))]).sum()
        }),
    };
    Ok(out)
}

/// `‖ρ − ρ_A⊗ρ_B‖_max`, without forming the product.
pub fn factorization_deviation(op: &ComplexOperator, dims: Dims) -> Result<f64> {
    let ra = partial_trace_op(op, dims, Subsystem::A)?;
    let rb = partial_trace_op(op, dims, Subsystem::B)?;
    let mut worst = 0.0f64;
    for r in 0..dims.total() {
        let (i, k) = dims.split(r);
        for c in 0..dims.total() {
            let (j, l) = dims.split(c);
            worst = worst.max((op[(r, c)] - ra[(i, j)] * rb[(k, l)]).norm());
        }
    }
    Ok(worst)
}

pub fn partial_trace(rho: &DensityMatrix, dims: Dims, keep: Subsystem) -> Result<DensityMatrix> {
    partial_trace_op(rho, dims, keep).map(DensityMatrix::trusted)
}

/// Spectral decomposition `H = V diag(values) V†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: ComplexOperator,
}

impl Eigen {
    pub fn column(&self, k: usize) -> Vec<C64> {
        (0..self.vectors.dim()).map(|i| self.vectors[(i, k)]).collect()
    }

    /// `V diag(f(λ)) V†`, accumulated so that a real `V` yields an exactly
    /// symmetric result.
    pub fn reconstruct_with(&self, mut f: impl FnMut(f64) -> C64) -> ComplexOperator {
        let n = self.values.len();
        let weights: Vec<C64> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        ComplexOperator::from_fn(n, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, w) in weights.iter().enumerate() {
                acc += (v[(i, k)] * v[(j, k)].conj()) * w;
            }
            acc
        })
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian operators.
///
/// Each rotation first removes the phase of the pivot, then applies the
/// classical real rotation, so real symmetric input stays real throughout.
pub fn eigh(h: &HermitianOperator) -> Result<Eigen> {
    let n = h.dim();
    let mut a = h.as_operator().clone();
    for i in 0..n {
        a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
    }
    let mut v = ComplexOperator::identity(n);
    let frob: f64 = a.entries().iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off += a[(p, q)].norm_sqr();
                }
            }
        }
        if off.sqrt() <= f64::EPSILON * 1e-2 * frob || off == 0.0 {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).map(move |q| (p, q)))
            .filter(|(p, q)| p != q)
            .map(|(p, q)| a[(p, q)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        // rounding can stall the last few digits; accept if still far below tolerance
        if off > 1e-13 * frob.max(f64::MIN_POSITIVE) {
            return Err(XftError::Numerical(format!(
                "Jacobi eigensolver did not converge after {MAX_SWEEPS} sweeps (off-diagonal norm {off:e})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = ComplexOperator::from_fn(n, |r, c| v[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

fn rotate(a: &mut ComplexOperator, v: &mut ComplexOperator, p: usize, q: usize) {
    let apq = a[(p, q)];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let n = a.dim();
    let phase = apq / b;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * b);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let pc = phase.conj();

    // columns: A ← A J, V ← V J
    for r in 0..n {
        let (x, y) = (a[(r, p)], a[(r, q)]);
        a[(r, p)] = x * c - y * pc * s;
        a[(r, q)] = x * s + y * pc * c;
        let (x, y) = (v[(r, p)], v[(r, q)]);
        v[(r, p)] = x * c - y * pc * s;
        v[(r, q)] = x * s + y * pc * c;
    }
    // rows: A ← J† A
    for col in 0..n {
        let (x, y) = (a[(p, col)], a[(q, col)]);
        a[(p, col)] = x * c - y * phase * s;
        a[(q, col)] = x * s + y * phase * c;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(app - t * b, 0.0);
    a[(q, q)] = C64::new(aqq + t * b, 0.0);
}

/// `e^{−iHt}`, computed spectrally.
pub fn expm_i(h: &HermitianOperator, t: f64) -> Result<ComplexOperator> {
    let eig = eigh(h)?;
    Ok(eig.reconstruct_with(|l| C64::from_polar(1.0, -l * t)))
}

/// Shannon entropy (nats) of a probability vector, `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &x in p {
        if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&x) {
            return Err(XftError::Numerical(format!("probability {x} outside [0, 1]")));
        }
        let x = x.clamp(0.0, 1.0);
        if x > 0.0 {
            s -= x * x.ln();
        }
    }
    Ok(s)
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let eig = eigh(&rho.as_hermitian())?;
    shannon_entropy(&eig.values).map(|s| s.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn sigma_x() -> ComplexOperator {
        ComplexOperator::new(2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap()
    }

    fn random_hermitian(n: usize, seed: u64) -> HermitianOperator {
        // small LCG keeps the unit tests free of the rand dependency
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut op = ComplexOperator::zeros(n);
        for i in 0..n {
            op[(i, i)] = c(next(), 0.0);
            for j in i + 1..n {
                let z = c(next(), next());
                op[(i, j)] = z;
                op[(j, i)] = z.conj();
            }
        }
        HermitianOperator::new(op).unwrap()
    }

    #[test]
    fn kron_identity_and_projectors() {
        let i2 = ComplexOperator::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexOperator::identity(4));
        let p0 = ComplexOperator::from_real_diagonal(&[1.0, 0.0]);
        let p1 = ComplexOperator::from_real_diagonal(&[0.0, 1.0]);
        assert_eq!(kron(&p0, &p1), ComplexOperator::from_real_diagonal(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn kron_sigma_x_flips_both_qubits() {
        let xx = kron(&sigma_x(), &sigma_x());
        let ket00 = vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)];
        let out = xx.apply(&ket00);
        assert_eq!(out, vec![c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn partial_trace_examples() {
        let dims = Dims::new(2, 2);
        let ra = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.6, 0.4])).unwrap();
        let rb = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.3, 0.7])).unwrap();
        let prod = DensityMatrix::new(kron(&ra, &rb)).unwrap();
        let back = partial_trace(&prod, dims, Subsystem::A).unwrap();
        assert!(back.max_diff(&ra) < 1e-15);

        let s = FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)]).unwrap();
        let half = ComplexOperator::identity(2).scale_real(0.5);
        assert!(partial_trace(&bell, dims, Subsystem::A).unwrap().max_diff(&half) < 1e-15);
        assert!(partial_trace(&bell, dims, Subsystem::B).unwrap().max_diff(&half) < 1e-15);

        let diag = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.5, 0.2, 0.2, 0.1])).unwrap();
        let ma = partial_trace(&diag, dims, Subsystem::A).unwrap();
        assert!(ma.max_diff(&ComplexOperator::from_real_diagonal(&[0.7, 0.3])) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let rho = DensityMatrix::maximally_mixed(4);
        let err = partial_trace(&rho, Dims::new(3, 2), Subsystem::A).unwrap_err();
        assert!(matches!(err, XftError::Dimension(_)));
    }

    #[test]
    fn eigh_diagonal_input_gives_permutation() {
        let h = HermitianOperator::from_real_diagonal(&[3.0, 1.0, 2.0]);
        let eig = eigh(&h).unwrap();
        assert_eq!(eig.values, vec![1.0, 2.0, 3.0]);
        assert_eq!(eig.column(0), vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(eig.column(2), vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
    }

    #[test]
    fn eigh_sigma_x_closed_form() {
        let eig = eigh(&HermitianOperator::new(sigma_x()).unwrap()).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        // eigenvectors equal (|0⟩ ∓ |1⟩)/√2 up to a global phase
        let v0 = eig.column(0);
        let v1 = eig.column(1);
        assert!(((v0[0] + v0[1]).norm()) < 1e-15);
        assert!(((v0[0].norm()) - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(((v1[0] - v1[1]).norm()) < 1e-15);
        assert!(((v1[0].norm()) - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn eigh_reconstructs_random_hermitian() {
        for seed in 0..5 {
            let h = random_hermitian(8, seed);
            let eig = eigh(&h).unwrap();
            let rebuilt = eig.reconstruct_with(|l| c(l, 0.0));
            assert!(rebuilt.max_diff(&h) <= 1e-10 * h.max_abs());
            assert!(eig.vectors.unitarity_deviation() <= 1e-10);
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eigh_keeps_real_input_real() {
        let mut op = ComplexOperator::zeros(5);
        for i in 0..5 {
            for j in 0..5 {
                op[(i, j)] = c(((i + 2 * j) % 7) as f64 + ((j + 2 * i) % 7) as f64 - 6.0, 0.0);
            }
        }
        let eig = eigh(&HermitianOperator::new(op).unwrap()).unwrap();
        assert!(eig.vectors.entries().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn expm_examples() {
        let h = HermitianOperator::new(random_hermitian(3, 9).into_operator()).unwrap();
        assert!(expm_i(&h, 0.0).unwrap().max_diff(&ComplexOperator::identity(3)) < 1e-14);

        let d = HermitianOperator::from_real_diagonal(&[0.0, PI]);
        let u = expm_i(&d, 1.0).unwrap();
        assert!(u.max_diff(&ComplexOperator::from_real_diagonal(&[1.0, -1.0])) < 1e-15);

        let x = HermitianOperator::new(sigma_x()).unwrap();
        let u = expm_i(&x, PI / 2.0).unwrap();
        assert!(u.max_diff(&sigma_x().scale(c(0.0, -1.0))) < 1e-15);
    }

    #[test]
    fn expm_group_property_and_conservation() {
        let h = random_hermitian(6, 3);
        let (s, t) = (0.37, 1.91);
        let lhs = expm_i(&h, s).unwrap().matmul(&expm_i(&h, t).unwrap());
        assert!(lhs.max_diff(&expm_i(&h, s + t).unwrap()) < 1e-10);
        let u = expm_i(&h, t).unwrap();
        let back = u.matmul(&h).matmul(&expm_i(&h, -t).unwrap());
        assert!(back.max_diff(&h) < 1e-10);
        assert!(u.unitarity_deviation() < 1e-10);
    }

    #[test]
    fn entropy_examples() {
        let s = FRAC_1_SQRT_2;
        let pure = DensityMatrix::pure(&[c(s, 0.0), c(0.0, s)]).unwrap();
        assert!(von_neumann_entropy(&pure).unwrap().abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2);
        assert!((von_neumann_entropy(&mixed).unwrap() - LN_2).abs() < 1e-15);
        let d = DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.7311, 0.2689])).unwrap();
        // −0.7311 ln 0.7311 − 0.2689 ln 0.2689
        assert!((von_neumann_entropy(&d).unwrap() - 0.5828).abs() < 1e-3);
    }

    #[test]
    fn entropy_is_unitarily_invariant() {
        let rho_op = {
            let h = random_hermitian(4, 11);
            let eig = eigh(&h).unwrap();
            eig.reconstruct_with(|l| c((-l).exp(), 0.0))
        };
        let z = rho_op.trace().re;
        let rho = DensityMatrix::new(rho_op.scale_real(1.0 / z)).unwrap();
        let u = expm_i(&random_hermitian(4, 12), 0.8).unwrap();
        let rotated = DensityMatrix::new(HermitianOperator::symmetrized(&u.matmul(&rho).matmul(&u.adjoint())).into_operator()).unwrap();
        let d = von_neumann_entropy(&rho).unwrap() - von_neumann_entropy(&rotated).unwrap();
        assert!(d.abs() <= 1e-10);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexOperator::from_real_diagonal(&[0.5, 0.6])).is_err());
        assert!(DensityMatrix::new(ComplexOperator::from_real_diagonal(&[1.2, -0.2])).is_err());
        assert!(HermitianOperator::new(ComplexOperator::new(2, vec![c(0.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap()).is_err());
        assert!(ComplexOperator::new(2, vec![c(0.0, 0.0); 3]).is_err());
    }
}
