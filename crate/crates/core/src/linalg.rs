//! Dense complex operators and states over the probe (Dicke) space or the
//! probe ⊗ ancilla composite space.
//!
//! Composite indices put the ancilla fastest: `index = 2 * k + a`, where `k`
//! runs over the probe's Jz basis (m = +j first) and `a = 0` is the excited
//! ancilla level (σz = +1), `a = 1` the ground level.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const NORM_TOL: f64 = 1e-12;
pub(crate) const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

#[inline]
pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// e^{-i x}
#[inline]
pub(crate) fn phase(x: f64) -> C64 {
    C64::new(x.cos(), -x.sin())
}

/// Which Hilbert space a matrix or vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Probe space, Jz eigenbasis ordered m = +j … −j.
    ProbeJz,
    /// Probe ⊗ ancilla, ancilla index fastest.
    Composite,
}

impl Basis {
    pub fn name(self) -> &'static str {
        match self {
            Basis::ProbeJz => "probe-Jz",
            Basis::Composite => "composite",
        }
    }
}

/// Largest entry of |A − A†|.
pub fn hermiticity_residual(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |A − B|.
pub fn max_abs_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == C64::new(0.0, 0.0)))
}

/// A dense square operator with cached structural flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
    hermitian: bool,
    diagonal: bool,
    basis: Basis,
}

impl Operator {
    /// Wraps a matrix, flagging it Hermitian when it passes the 1e-12 check.
    pub fn new(matrix: DMatrix<C64>, basis: Basis) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let hermitian = hermiticity_residual(&matrix) <= HERMITIAN_TOL;
        let diagonal = is_diagonal(&matrix);
        Ok(Operator {
            matrix,
            hermitian,
            diagonal,
            basis,
        })
    }

    /// Like [`Operator::new`] but fails unless the matrix is Hermitian.
    pub fn hermitian(matrix: DMatrix<C64>, basis: Basis) -> Result<Self> {
        let residual = hermiticity_residual(&matrix);
        if residual > HERMITIAN_TOL {
            return Err(Error::Contract {
                what: "operator is not Hermitian".into(),
                residual,
            });
        }
        let mut op = Operator::new(matrix, basis)?;
        op.hermitian = true;
        Ok(op)
    }

    pub fn identity(dim: usize, basis: Basis) -> Self {
        Operator {
            matrix: DMatrix::identity(dim, dim),
            hermitian: true,
            diagonal: true,
            basis,
        }
    }

    pub fn from_diagonal(diag: &DVector<C64>, basis: Basis) -> Self {
        let hermitian = diag.iter().all(|z| z.im == 0.0);
        Operator {
            matrix: DMatrix::from_diagonal(diag),
            hermitian,
            diagonal: true,
            basis,
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            matrix: self.matrix.adjoint(),
            ..self.clone()
        }
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Operator product `self · rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        self.check_same(rhs)?;
        Operator::new(&self.matrix * &rhs.matrix, self.basis)
    }

    pub fn scale(&self, s: C64) -> Operator {
        let mut out = self.clone();
        out.matrix *= s;
        out.hermitian = self.hermitian && s.im == 0.0;
        out
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        self.check_same(rhs)?;
        Operator::new(&self.matrix + &rhs.matrix, self.basis)
    }

    pub fn apply(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        if self.diagonal {
            Ok(v.component_mul(&self.matrix.diagonal()))
        } else {
            Ok(&self.matrix * v)
        }
    }

    /// `A ρ A†`.
    pub fn conjugate(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        if rho.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rho.nrows(),
            });
        }
        if self.diagonal {
            let d = self.matrix.diagonal();
            Ok(DMatrix::from_fn(rho.nrows(), rho.ncols(), |i, j| {
                d[i] * rho[(i, j)] * d[j].conj()
            }))
        } else {
            Ok(&self.matrix * rho * self.matrix.adjoint())
        }
    }

    /// Largest entry of |A†A − I|.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim();
        max_abs_diff(
            &(self.matrix.adjoint() * &self.matrix),
            &DMatrix::identity(n, n),
        )
    }

    fn check_same(&self, rhs: &Operator) -> Result<()> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rhs.dim(),
            });
        }
        if self.basis != rhs.basis {
            return Err(Error::WrongBasis {
                expected: self.basis.name(),
                found: rhs.basis.name(),
            });
        }
        Ok(())
    }
}

/// A state vector. Normalized vectors have `norm_sqr == 1`; branch vectors
/// produced by projective measurements keep their squared norm (the branch
/// probability) explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PureVector {
    amplitudes: DVector<C64>,
    basis: Basis,
    norm_sqr: f64,
}

impl PureVector {
    /// Fails unless `| ‖v‖² − 1 | ≤ 1e-12`.
    pub fn normalized(amplitudes: DVector<C64>, basis: Basis) -> Result<Self> {
        let norm_sqr = amplitudes.norm_squared();
        if (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "vector norm² = {norm_sqr}, expected 1"
            )));
        }
        Ok(PureVector {
            amplitudes,
            basis,
            norm_sqr,
        })
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalize(amplitudes: DVector<C64>, basis: Basis) -> Result<Self> {
        let norm_sqr = amplitudes.norm_squared();
        if norm_sqr <= 0.0 || !norm_sqr.is_finite() {
            return Err(Error::InvalidState("cannot normalize a null vector".into()));
        }
        Ok(PureVector {
            amplitudes: amplitudes / c(norm_sqr.sqrt()),
            basis,
            norm_sqr: 1.0,
        })
    }

    pub fn unnormalized(amplitudes: DVector<C64>, basis: Basis) -> Self {
        let norm_sqr = amplitudes.norm_squared();
        PureVector {
            amplitudes,
            basis,
            norm_sqr,
        }
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn norm_sqr(&self) -> f64 {
        self.norm_sqr
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &PureVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// |⟨a|b⟩| / (‖a‖‖b‖), i.e. 1 for states equal up to a global phase.
    pub fn overlap_modulus(&self, other: &PureVector) -> f64 {
        self.inner(other).norm() / (self.norm_sqr * other.norm_sqr).sqrt()
    }

    pub fn projector(&self) -> DMatrix<C64> {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// A density matrix. Constructors validate hermiticity, unit trace and
/// positivity (eigenvalues ≥ −1e-10).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
    basis: Basis,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>, basis: Basis) -> Result<Self> {
        let residual = hermiticity_residual(&entries);
        if residual > HERMITIAN_TOL {
            return Err(Error::Contract {
                what: "density matrix is not Hermitian".into(),
                residual,
            });
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > NORM_TOL || tr.im.abs() > NORM_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}, expected 1")));
        }
        let min_eig = Spectrum::of_matrix(&entries)
            .values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -NEGATIVE_EIGEN_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityMatrix { entries, basis })
    }

    /// Skips the validation; used for intermediate branch states whose
    /// normalization is tracked separately.
    pub(crate) fn from_raw(entries: DMatrix<C64>, basis: Basis) -> Self {
        DensityMatrix { entries, basis }
    }

    pub fn from_pure(v: &PureVector) -> Self {
        let scale = 1.0 / v.norm_sqr();
        DensityMatrix {
            entries: v.projector() * c(scale),
            basis: v.basis(),
        }
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace().re
    }

    /// Eigen-decomposition of the state as a probability ensemble.
    pub fn spectrum(&self) -> Spectrum {
        Spectrum::of_matrix(&self.entries)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in descending
/// order, eigenvectors as the matching columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn of(op: &Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::Contract {
                what: "spectral decomposition needs a Hermitian operator".into(),
                residual: hermiticity_residual(op.matrix()),
            });
        }
        Ok(Self::of_matrix(op.matrix()))
    }

    /// Caller guarantees hermiticity.
    pub(crate) fn of_matrix(m: &DMatrix<C64>) -> Self {
        let eig = m.clone().symmetric_eigen();
        let n = m.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Spectrum { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// V f(Λ) V†
    pub fn map(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            self.vectors[(i, j)] * f(self.values[j])
        });
        scaled * self.vectors.adjoint()
    }

    /// e^{-iHt}
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        self.map(|lambda| phase(lambda * t))
    }
}

/// A convex mixture Σ p_i |ψ_i⟩⟨ψ_i| with orthonormal ψ_i; the spectral
/// decomposition of a probe state.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub weights: Vec<f64>,
    pub states: Vec<PureVector>,
}

impl Ensemble {
    pub fn new(weights: Vec<f64>, states: Vec<PureVector>) -> Result<Self> {
        if weights.len() != states.len() || weights.is_empty() {
            return Err(Error::InvalidState(
                "ensemble needs one weight per state".into(),
            ));
        }
        if weights.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidState("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("weights sum to {total}")));
        }
        let dim = states[0].dim();
        if let Some(s) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
        Ok(Ensemble { weights, states })
    }

    pub fn pure(state: PureVector) -> Self {
        Ensemble {
            weights: vec![1.0],
            states: vec![state],
        }
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn is_pure(&self) -> bool {
        self.weights.iter().filter(|&&p| p > 0.0).count() == 1
    }

    pub fn density(&self) -> DMatrix<C64> {
        let n = self.dim();
        let mut rho = DMatrix::zeros(n, n);
        for (p, s) in self.weights.iter().zip(&self.states) {
            if *p > 0.0 {
                rho += s.projector() * c(*p);
            }
        }
        rho
    }
}
