//! Collective spin algebra on the symmetric (Dicke) subspace of N spin-1/2
//! particles, plus the ancilla-qubit tensor structure.
//!
//! Phase convention for the Jx eigenvectors |j,m⟩_x: for m > −j the amplitude
//! on |j,j⟩ is real positive; |j,−j⟩_x has its amplitude on |j,−j⟩ real
//! positive. With this choice ⟨j,m|j,−j⟩_x = (−i)^{2(j+m)} ⟨j,m|j,j⟩_x holds
//! for both parities of N. The rotated-frame eigenvectors |j,m⟩_opt inherit
//! it through e^{iαJz}.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{c, phase, Basis, DensityMatrix, Operator, PureVector, Spectrum, C64};

/// N spin-1/2 particles in the symmetric subspace: total spin j = N/2,
/// dimension N + 1. Stores N = 2j so half-integer j is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinDimension {
    spins: u32,
}

impl SpinDimension {
    pub fn new(spins: u32) -> Result<Self> {
        if spins < 1 {
            return Err(Error::InvalidDimension(
                "spin count must be at least 1".into(),
            ));
        }
        Ok(SpinDimension { spins })
    }

    /// N
    pub fn spins(&self) -> u32 {
        self.spins
    }

    /// 2j
    pub fn two_j(&self) -> u32 {
        self.spins
    }

    pub fn j(&self) -> f64 {
        self.spins as f64 / 2.0
    }

    /// d = N + 1
    pub fn dim(&self) -> usize {
        self.spins as usize + 1
    }

    /// Magnetic quantum number at basis index `k`: m = j − k.
    pub fn m_at(&self, k: usize) -> f64 {
        self.j() - k as f64
    }

    pub fn m_values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.dim()).map(move |k| self.m_at(k))
    }

    /// Basis index of eigenvalue `m`; requires −j ≤ m ≤ j with j − m integer.
    pub fn index_of(&self, m: f64) -> Result<usize> {
        let k = self.j() - m;
        let rounded = k.round();
        if !m.is_finite()
            || (k - rounded).abs() > 1e-9
            || rounded < 0.0
            || rounded > self.spins as f64
        {
            return Err(Error::Domain(format!(
                "m = {m} is not an eigenvalue for j = {}",
                self.j()
            )));
        }
        Ok(rounded as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// J₊ in the Jz basis: ⟨m+1|J₊|m⟩ = √(j(j+1) − m(m+1)).
fn raising(dim: SpinDimension) -> DMatrix<C64> {
    let j = dim.j();
    let d = dim.dim();
    let mut jp = DMatrix::zeros(d, d);
    for k in 1..d {
        let m = dim.m_at(k);
        jp[(k - 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt());
    }
    jp
}

/// Collective spin component Jα = Σ_k σα^k / 2 on the Dicke subspace.
pub fn collective_operator(dim: SpinDimension, axis: Axis) -> Operator {
    let d = dim.dim();
    let matrix = match axis {
        Axis::Z => DMatrix::from_diagonal(&DVector::from_iterator(d, dim.m_values().map(c))),
        Axis::X => {
            let jp = raising(dim);
            (&jp + jp.adjoint()) * c(0.5)
        }
        Axis::Y => {
            let jp = raising(dim);
            (&jp - jp.adjoint()) * C64::new(0.0, -0.5)
        }
    };
    Operator::hermitian(matrix, Basis::ProbeJz).expect("collective spin operators are Hermitian")
}

/// All Jx eigenvectors as columns, ordered m = +j … −j, in the module's
/// phase convention.
///
/// Built as the Wigner rotation e^{−iπJy/2}|j,m⟩ (whose |j,−j⟩ amplitude is
/// always positive) followed by the exact sign (−1)^{j−m} for m > −j, so the
/// phase never depends on resolving an exponentially small amplitude.
pub fn x_basis(dim: SpinDimension) -> DMatrix<C64> {
    let jy = collective_operator(dim, Axis::Y);
    let rotation = Spectrum::of(&jy)
        .expect("Jy is Hermitian")
        .propagator(FRAC_PI_2);
    let d = dim.dim();
    let mut basis = rotation;
    for k in 0..d - 1 {
        if k % 2 == 1 {
            basis.column_mut(k).neg_mut();
        }
    }
    // Wigner rotations of a real-symmetric generator are real; drop roundoff.
    basis.apply(|z| *z = c(z.re));
    basis
}

/// |j,m⟩_x: eigenvector of Jx with eigenvalue m.
pub fn x_basis_eigenvector(dim: SpinDimension, m: f64) -> Result<PureVector> {
    let k = dim.index_of(m)?;
    let column = x_basis(dim).column(k).into_owned();
    PureVector::normalized(column, Basis::ProbeJz)
}

/// Rotation angle (ωP + g)·t1 of the optimized frame.
pub fn opt_angle(omega_p: f64, g: f64, t1: f64) -> f64 {
    (omega_p + g) * t1
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::params("non-finite frame parameter"))
    }
}

/// J_opt = cos[(ωP+g)t1] Jx − sin[(ωP+g)t1] Jy.
pub fn opt_operator(dim: SpinDimension, omega_p: f64, g: f64, t1: f64) -> Result<Operator> {
    check_finite(&[omega_p, g, t1])?;
    Ok(frame_operator(dim, opt_angle(omega_p, g, t1)))
}

/// J_φ = cos φ Jx − sin φ Jy.
pub fn frame_operator(dim: SpinDimension, angle: f64) -> Operator {
    let jx = collective_operator(dim, Axis::X);
    let jy = collective_operator(dim, Axis::Y);
    let m = jx.matrix() * c(angle.cos()) - jy.matrix() * c(angle.sin());
    Operator::hermitian(m, Basis::ProbeJz).expect("real combination of Hermitian operators")
}

/// Eigenvectors of J_φ as columns: e^{iφJz}|j,m⟩_x, m = +j … −j.
pub fn frame_basis(dim: SpinDimension, angle: f64) -> DMatrix<C64> {
    let mut basis = x_basis(dim);
    for (k, mut row) in basis.row_iter_mut().enumerate() {
        row *= phase(-angle * dim.m_at(k));
    }
    basis
}

/// |j,m⟩_opt = e^{i(ωP+g)t1 Jz}|j,m⟩_x.
pub fn opt_eigenvector(
    dim: SpinDimension,
    m: f64,
    omega_p: f64,
    g: f64,
    t1: f64,
) -> Result<PureVector> {
    check_finite(&[omega_p, g, t1])?;
    let k = dim.index_of(m)?;
    let basis = frame_basis(dim, opt_angle(omega_p, g, t1));
    PureVector::normalized(basis.column(k).into_owned(), Basis::ProbeJz)
}

/// e^{−iHt} by spectral decomposition; diagonal H is exponentiated directly.
pub fn hermitian_propagator(h: &Operator, t: f64) -> Result<Operator> {
    if !h.is_hermitian() {
        return Err(Error::Contract {
            what: "propagator needs a Hermitian generator".into(),
            residual: crate::linalg::hermiticity_residual(h.matrix()),
        });
    }
    if !t.is_finite() {
        return Err(Error::params("non-finite evolution time"));
    }
    if h.is_diagonal() {
        let d = h.matrix().diagonal().map(|e| phase(e.re * t));
        return Ok(Operator::from_diagonal(&d, h.basis()));
    }
    let u = Spectrum::of(h)?.propagator(t);
    Operator::new(u, h.basis())
}

/// R_x(θ) = e^{−iθJx}.
pub fn rotate_x(dim: SpinDimension, theta: f64) -> Result<Operator> {
    XRotation::new(dim).operator(theta)
}

/// Cached spectral data of Jx for repeated R_x(θ) evaluation.
#[derive(Debug, Clone)]
pub struct XRotation {
    dim: SpinDimension,
    jx: Operator,
    spectrum: Spectrum,
}

impl XRotation {
    pub fn new(dim: SpinDimension) -> Self {
        let jx = collective_operator(dim, Axis::X);
        let spectrum = Spectrum::of(&jx).expect("Jx is Hermitian");
        XRotation { dim, jx, spectrum }
    }

    pub fn dim(&self) -> SpinDimension {
        self.dim
    }

    /// The encoding generator Jx.
    pub fn generator(&self) -> &Operator {
        &self.jx
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn matrix(&self, theta: f64) -> DMatrix<C64> {
        self.spectrum.propagator(theta)
    }

    pub fn operator(&self, theta: f64) -> Result<Operator> {
        if !theta.is_finite() {
            return Err(Error::params("non-finite rotation angle"));
        }
        Operator::new(self.matrix(theta), Basis::ProbeJz)
    }
}

/// σz with σz|e⟩ = +|e⟩; ancilla ordering (|e⟩, |g⟩).
pub fn sigma_z() -> Operator {
    Operator::from_diagonal(&DVector::from_vec(vec![c(1.0), c(-1.0)]), Basis::ProbeJz)
}

pub fn sigma_x() -> Operator {
    Operator::hermitian(
        DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        Basis::ProbeJz,
    )
    .expect("σx is Hermitian")
}

/// probe ⊗ ancilla, ancilla index fastest.
pub fn tensor(probe: &Operator, ancilla: &Operator) -> Result<Operator> {
    if ancilla.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: ancilla.dim(),
        });
    }
    if probe.basis() != Basis::ProbeJz {
        return Err(Error::WrongBasis {
            expected: Basis::ProbeJz.name(),
            found: probe.basis().name(),
        });
    }
    Operator::new(probe.matrix().kronecker(ancilla.matrix()), Basis::Composite)
}

pub(crate) fn partial_trace_ancilla_matrix(rho: &DMatrix<C64>) -> DMatrix<C64> {
    let d = rho.nrows() / 2;
    DMatrix::from_fn(d, d, |k, l| {
        rho[(2 * k, 2 * l)] + rho[(2 * k + 1, 2 * l + 1)]
    })
}

/// Tr_A over the ancilla qubit.
pub fn partial_trace_ancilla(rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.basis() != Basis::Composite {
        return Err(Error::WrongBasis {
            expected: Basis::Composite.name(),
            found: rho.basis().name(),
        });
    }
    Ok(DensityMatrix::from_raw(
        partial_trace_ancilla_matrix(rho.entries()),
        Basis::ProbeJz,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use std::f64::consts::PI;

    fn dim(n: u32) -> SpinDimension {
        SpinDimension::new(n).unwrap()
    }

    fn commutator(a: &Operator, b: &Operator) -> DMatrix<C64> {
        a.matrix() * b.matrix() - b.matrix() * a.matrix()
    }

    #[test]
    fn rejects_zero_spins() {
        assert!(matches!(
            SpinDimension::new(0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn index_domain() {
        let d = dim(3);
        assert_eq!(d.index_of(1.5).unwrap(), 0);
        assert_eq!(d.index_of(-1.5).unwrap(), 3);
        assert!(d.index_of(1.0).is_err());
        assert!(d.index_of(2.5).is_err());
        assert!(x_basis_eigenvector(d, 0.5 + 3.0).is_err());
    }

    #[test]
    fn single_spin_jz() {
        let jz = collective_operator(dim(1), Axis::Z);
        assert_eq!(jz.matrix()[(0, 0)], c(0.5));
        assert_eq!(jz.matrix()[(1, 1)], c(-0.5));
        assert!(jz.is_diagonal());
    }

    #[test]
    fn spin_one_jx_ladder() {
        let jx = collective_operator(dim(2), Axis::X);
        let s = 1.0 / 2f64.sqrt();
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((jx.matrix()[(i, j)] - c(s)).norm() < 1e-15);
        }
        assert_eq!(jx.matrix()[(0, 2)], c(0.0));
    }

    #[test]
    fn commutation_relations_n4() {
        let d = dim(4);
        let (jx, jy, jz) = (
            collective_operator(d, Axis::X),
            collective_operator(d, Axis::Y),
            collective_operator(d, Axis::Z),
        );
        assert!(jy.is_hermitian());
        let i = C64::new(0.0, 1.0);
        assert!(max_abs_diff(&commutator(&jx, &jy), &(jz.matrix() * i)) < 1e-12);
    }

    #[test]
    fn sigma_x_eigenvector_for_single_spin() {
        let v = x_basis_eigenvector(dim(1), 0.5).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((v.amplitudes()[0] - c(s)).norm() < 1e-14);
        assert!((v.amplitudes()[1] - c(s)).norm() < 1e-14);
    }

    #[test]
    fn spin_one_m_zero_x_eigenvector() {
        let v = x_basis_eigenvector(dim(2), 0.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expected = [c(s), c(0.0), c(-s)];
        for (a, b) in v.amplitudes().iter().zip(expected) {
            assert!((a - b).norm() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn x_eigenvector_residual_n3() {
        let d = dim(3);
        let v = x_basis_eigenvector(d, -1.5).unwrap();
        let jx = collective_operator(d, Axis::X);
        let r = jx.apply(v.amplitudes()).unwrap() - v.amplitudes() * c(-1.5);
        assert!(r.norm() < 1e-10);
    }

    #[test]
    fn first_amplitude_positive_except_lowest() {
        for n in 1..=12 {
            let d = dim(n);
            let basis = x_basis(d);
            for k in 0..n as usize {
                let a = basis[(0, k)];
                assert!(a.re > 0.0 && a.im == 0.0, "N={n} k={k}: {a}");
            }
            let last = basis[(n as usize, n as usize)];
            assert!(last.re > 0.0, "N={n}: {last}");
        }
    }

    #[test]
    fn opt_operator_special_angles() {
        let d = dim(3);
        let jx = collective_operator(d, Axis::X);
        let jy = collective_operator(d, Axis::Y);
        let zero = opt_operator(d, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(zero.matrix(), jx.matrix());
        let quarter = opt_operator(d, FRAC_PI_2, 0.0, 1.0).unwrap();
        assert!(max_abs_diff(quarter.matrix(), &(-jy.matrix())) < 1e-15);
    }

    #[test]
    fn opt_operator_matches_conjugated_jx() {
        let d = dim(2);
        let (wp, g, t1) = (10.0, 1.0, FRAC_PI_2);
        let direct = opt_operator(d, wp, g, t1).unwrap();
        let jz = collective_operator(d, Axis::Z);
        let u = hermitian_propagator(&jz, -opt_angle(wp, g, t1)).unwrap();
        let jx = collective_operator(d, Axis::X);
        let conj = u.matrix() * jx.matrix() * u.matrix().adjoint();
        assert!(max_abs_diff(direct.matrix(), &conj) < 1e-10);
    }

    #[test]
    fn opt_eigenvectors() {
        let d = dim(2);
        let zero = opt_eigenvector(d, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(zero, x_basis_eigenvector(d, 1.0).unwrap());
        let (wp, g, t1) = (10.0, 1.0, FRAC_PI_2);
        let v = opt_eigenvector(d, 1.0, wp, g, t1).unwrap();
        let jopt = opt_operator(d, wp, g, t1).unwrap();
        assert!((jopt.apply(v.amplitudes()).unwrap() - v.amplitudes()).norm() < 1e-10);
        for m in [1.0, 0.0, -1.0] {
            let v = opt_eigenvector(d, m, wp, g, 0.3).unwrap();
            assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn propagator_basics() {
        let d = dim(2);
        let jz = collective_operator(d, Axis::Z);
        let u = hermitian_propagator(&jz, PI).unwrap();
        let expected = [phase(PI), c(1.0), phase(-PI)];
        for (k, e) in expected.iter().enumerate() {
            assert!((u.matrix()[(k, k)] - e).norm() < 1e-15);
        }
        let jx = collective_operator(d, Axis::X);
        let id = hermitian_propagator(&jx, 0.0).unwrap();
        assert!(max_abs_diff(id.matrix(), &DMatrix::identity(3, 3)) < 1e-14);
        let bad = Operator::new(
            DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]),
            Basis::ProbeJz,
        )
        .unwrap();
        assert!(matches!(
            hermitian_propagator(&bad, 1.0),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn rotate_x_special_angles() {
        for n in 1..=6 {
            let d = dim(n);
            let full = rotate_x(d, 2.0 * PI).unwrap();
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let target = DMatrix::<C64>::identity(d.dim(), d.dim()) * c(sign);
            assert!(max_abs_diff(full.matrix(), &target) < 1e-12, "N={n}");
            let zero = rotate_x(d, 0.0).unwrap();
            assert!(max_abs_diff(zero.matrix(), &DMatrix::identity(d.dim(), d.dim())) < 1e-14);
        }
        let r = rotate_x(dim(1), PI).unwrap();
        let target = sigma_x().matrix() * C64::new(0.0, -1.0);
        assert!(max_abs_diff(r.matrix(), &target) < 1e-14);
    }

    #[test]
    fn tensor_products() {
        let d = dim(1);
        let id = tensor(
            &Operator::identity(2, Basis::ProbeJz),
            &Operator::identity(2, Basis::ProbeJz),
        )
        .unwrap();
        assert_eq!(id.matrix(), &DMatrix::<C64>::identity(4, 4));
        let jz_sz = tensor(&collective_operator(d, Axis::Z), &sigma_z()).unwrap();
        let expected = [0.5, -0.5, -0.5, 0.5];
        for (k, e) in expected.iter().enumerate() {
            assert_eq!(jz_sz.matrix()[(k, k)], c(*e));
        }
        assert!(jz_sz.is_diagonal());
        let wrong = tensor(
            &collective_operator(d, Axis::Z),
            &collective_operator(dim(2), Axis::Z),
        );
        assert!(matches!(wrong, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_trace_examples() {
        // ρ_P ⊗ |+⟩⟨+|
        let rho_p = DMatrix::from_row_slice(
            2,
            2,
            &[c(0.7), C64::new(0.1, 0.2), C64::new(0.1, -0.2), c(0.3)],
        );
        let plus = DMatrix::from_element(2, 2, c(0.5));
        let composite = DensityMatrix::new(rho_p.kronecker(&plus), Basis::Composite).unwrap();
        let reduced = partial_trace_ancilla(&composite).unwrap();
        assert!(max_abs_diff(reduced.entries(), &rho_p) < 1e-15);

        // (|↑e⟩ + |↓g⟩)/√2
        let s = 1.0 / 2f64.sqrt();
        let bell = PureVector::normalized(
            DVector::from_vec(vec![c(s), c(0.0), c(0.0), c(s)]),
            Basis::Composite,
        )
        .unwrap();
        let reduced = partial_trace_ancilla(&DensityMatrix::from_pure(&bell)).unwrap();
        assert!(max_abs_diff(reduced.entries(), &(DMatrix::identity(2, 2) * c(0.5))) < 1e-15);

        assert!(partial_trace_ancilla(&DensityMatrix::from_raw(rho_p, Basis::ProbeJz)).is_err());
    }
}
