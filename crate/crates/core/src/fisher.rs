//! Quantum and classical Fisher information.
//!
//! Three independent QFI paths are provided and cross-checked in tests:
//! the pure-branch formula with analytic generator insertion, the spectral
//! formula for an effective generator, and an SLD oracle that only needs a
//! family of density matrices and differentiates it numerically.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{
    c, hermiticity_residual, Basis, Ensemble, Operator, PureVector, Spectrum, C64,
};
use crate::protocol::{Circuit, Schedule, Sign, WithDerivative, NULL_BRANCH};
use crate::spin::{self, Axis, SpinDimension};

/// Pairs with p_i + p_j at or below this are left out of the SLD sum.
pub const PAIR_CUTOFF: f64 = 1e-12;
/// Outcomes with p at or below this contribute nothing to the CFI.
pub const OUTCOME_CUTOFF: f64 = 1e-14;
/// Slope above which a vanishing outcome marks a singular point.
pub const SINGULAR_SLOPE: f64 = 1e-9;
/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Relative tolerance of the h vs h/2 consistency check.
pub const FD_CONSISTENCY: f64 = 1e-6;

/// How θ-derivatives are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DerivativeMethod {
    #[default]
    Analytic,
    /// Central difference with one Richardson refinement.
    CentralDifference {
        h: f64,
    },
}

/// Which QFI path produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QfiMethod {
    Pure,
    Spectral,
    Sld,
}

impl QfiMethod {
    pub const ALL: [QfiMethod; 3] = [QfiMethod::Pure, QfiMethod::Spectral, QfiMethod::Sld];

    pub fn name(self) -> &'static str {
        match self {
            QfiMethod::Pure => "pure",
            QfiMethod::Spectral => "spectral",
            QfiMethod::Sld => "sld",
        }
    }
}

impl std::str::FromStr for QfiMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure" => Ok(QfiMethod::Pure),
            "spectral" => Ok(QfiMethod::Spectral),
            "sld" => Ok(QfiMethod::Sld),
            other => Err(Error::params(format!("unknown QFI method '{other}'"))),
        }
    }
}

/// Effective QFI of both measurement branches at one θ.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherReport {
    pub theta: f64,
    pub fq_plus_eff: f64,
    pub fq_minus_eff: f64,
    pub fq_total: f64,
    pub prob_plus: f64,
    pub prob_minus: f64,
    /// Σ (∂θ𝒩±)²/𝒩±: information in the outcome probabilities themselves.
    /// Not part of the effective QFI; zero when measurement precedes encoding.
    pub fq_outcome: f64,
    pub method: QfiMethod,
    /// SLD pairs dropped by the p_i + p_j cutoff, summed over branches.
    pub excluded_pairs: usize,
    /// Largest relative h vs h/2 discrepancy of a numerical derivative.
    pub fd_discrepancy: f64,
    pub notes: Vec<String>,
}

impl FisherReport {
    fn new(theta: f64, method: QfiMethod, per_branch: [f64; 2], probs: [f64; 2]) -> Self {
        FisherReport {
            theta,
            fq_plus_eff: per_branch[0],
            fq_minus_eff: per_branch[1],
            fq_total: per_branch[0] + per_branch[1],
            prob_plus: probs[0],
            prob_minus: probs[1],
            fq_outcome: 0.0,
            method,
            excluded_pairs: 0,
            fd_discrepancy: 0.0,
            notes: Vec::new(),
        }
    }
}

/// Effective generator for the spectral formula.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub matrix: Operator,
    pub label: String,
}

impl GeneratorSpec {
    pub fn hermitian(op: Operator, label: impl Into<String>) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::Contract {
                what: "generator expected to be Hermitian".into(),
                residual: hermiticity_residual(op.matrix()),
            });
        }
        Ok(GeneratorSpec {
            matrix: op,
            label: label.into(),
        })
    }

    /// e^{−iπJz} J_φ: the branch generator of the measured circuit at the
    /// optimal working point, with φ = (ωP + g)t1.
    pub fn branch(dim: SpinDimension, frame_angle: f64) -> Self {
        let flip = spin::hermitian_propagator(
            &spin::collective_operator(dim, Axis::Z),
            std::f64::consts::PI,
        )
        .expect("Jz is Hermitian");
        let j_opt = spin::frame_operator(dim, frame_angle);
        GeneratorSpec {
            matrix: flip.compose(&j_opt).expect("same dimension"),
            label: "exp(-i pi Jz) J_opt".into(),
        }
    }

    /// J_φ = cos φ Jx − sin φ Jy; the generator without the ancilla.
    pub fn rotated(dim: SpinDimension, angle: f64) -> Self {
        GeneratorSpec {
            matrix: spin::frame_operator(dim, angle),
            label: "J_phi".into(),
        }
    }
}

fn ensemble_check(ensemble: &Ensemble, dim: usize) -> Result<()> {
    if ensemble.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: ensemble.dim(),
        });
    }
    Ok(())
}

/// F = Σ 4p_i⟨ψi|𝓗†𝓗|ψi⟩ − Σ_{ij} 8p_ip_j/(p_i+p_j)|⟨ψi|𝓗|ψj⟩|².
pub fn qfi_spectral(ensemble: &Ensemble, generator: &GeneratorSpec) -> Result<f64> {
    let h = generator.matrix.matrix();
    ensemble_check(ensemble, h.nrows())?;
    let kept: Vec<(f64, &PureVector)> = ensemble
        .weights
        .iter()
        .copied()
        .zip(&ensemble.states)
        .filter(|(p, _)| *p > 0.0)
        .collect();
    let mapped: Vec<DVector<C64>> = kept.iter().map(|(_, s)| h * s.amplitudes()).collect();
    let mut first = 0.0;
    for ((p, _), hv) in kept.iter().zip(&mapped) {
        first += 4.0 * p * hv.norm_squared();
    }
    let mut second = 0.0;
    for (pi, si) in &kept {
        for (j, (pj, _)) in kept.iter().enumerate() {
            if pi + pj <= PAIR_CUTOFF {
                continue;
            }
            let elem = si.amplitudes().dotc(&mapped[j]);
            second += 8.0 * pi * pj / (pi + pj) * elem.norm_sqr();
        }
    }
    Ok(first - second)
}

/// Outcome of the SLD oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SldReport {
    pub value: f64,
    pub excluded_pairs: usize,
    pub fd_discrepancy: f64,
}

/// QFI from a state and its derivative: Σ_{p_i+p_j>ε} 2|⟨i|∂ρ|j⟩|²/(p_i+p_j).
pub fn sld_qfi_from_derivative(rho: &DMatrix<C64>, drho: &DMatrix<C64>) -> Result<(f64, usize)> {
    let spectrum = hermitian_spectrum(rho)?;
    Ok(sld_sum(&spectrum, drho))
}

fn hermitian_spectrum(rho: &DMatrix<C64>) -> Result<Spectrum> {
    let sym = (rho + rho.adjoint()) * c(0.5);
    let spectrum = Spectrum::of_matrix(&sym);
    let min = spectrum
        .values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min < -crate::linalg::NEGATIVE_EIGEN_TOL {
        return Err(Error::InvalidState(format!(
            "density matrix has eigenvalue {min:.3e}"
        )));
    }
    Ok(spectrum)
}

fn sld_sum(spectrum: &Spectrum, drho: &DMatrix<C64>) -> (f64, usize) {
    let v = &spectrum.vectors;
    let rotated = v.adjoint() * drho * v;
    let p = &spectrum.values;
    let n = p.len();
    let mut total = 0.0;
    let mut excluded = 0;
    for i in 0..n {
        for j in 0..n {
            let s = p[i] + p[j];
            if s <= PAIR_CUTOFF {
                excluded += 1;
                continue;
            }
            total += 2.0 * rotated[(i, j)].norm_sqr() / s;
        }
    }
    (total, excluded)
}

fn central(f: &dyn Fn(f64) -> Result<DMatrix<C64>>, theta: f64, h: f64) -> Result<DMatrix<C64>> {
    Ok((f(theta + h)? - f(theta - h)?) * c(0.5 / h))
}

/// SLD oracle on a family of normalized density matrices. ∂θρ comes from a
/// central difference with step `h` refined once by Richardson
/// extrapolation; the h/2 estimate alone is kept as a consistency check.
pub fn qfi_sld(
    family: &dyn Fn(f64) -> Result<DMatrix<C64>>,
    theta: f64,
    h: f64,
) -> Result<SldReport> {
    let rho = family(theta)?;
    let spectrum = hermitian_spectrum(&rho)?;
    let coarse = central(family, theta, h)?;
    let fine = central(family, theta, h / 2.0)?;
    let refined = (&fine * c(4.0) - coarse) * c(1.0 / 3.0);
    let (value, excluded_pairs) = sld_sum(&spectrum, &refined);
    let (check, _) = sld_sum(&spectrum, &fine);
    let fd_discrepancy = (value - check).abs() / value.abs().max(1.0);
    Ok(SldReport {
        value,
        excluded_pairs,
        fd_discrepancy,
    })
}

/// Per-branch pure-state effective QFI:
/// 4[⟨∂Ψ|∂Ψ⟩ − |⟨Ψ|∂Ψ⟩|²/𝒩] for an unnormalized branch Ψ with 𝒩 = ⟨Ψ|Ψ⟩.
pub fn pure_branch_qfi(branch: &WithDerivative<DVector<C64>>) -> (f64, f64) {
    let norm = branch.value.norm_squared();
    if norm <= NULL_BRANCH {
        return (norm, 0.0);
    }
    let overlap = branch.value.dotc(&branch.derivative);
    let fq = 4.0 * (branch.derivative.norm_squared() - overlap.norm_sqr() / norm);
    (norm, fq.max(0.0))
}

/// A θ-family of unnormalized branch vectors.
pub trait PureBranchFamily {
    fn branches(&self, theta: f64) -> Result<[DVector<C64>; 2]>;

    /// Analytic derivatives, if the family can supply them.
    fn branches_with_derivative(
        &self,
        _theta: f64,
    ) -> Option<Result<[WithDerivative<DVector<C64>>; 2]>> {
        None
    }
}

impl PureBranchFamily for Circuit {
    fn branches(&self, theta: f64) -> Result<[DVector<C64>; 2]> {
        Ok(self.branch_vectors(theta)?.map(|b| b.value))
    }

    fn branches_with_derivative(
        &self,
        theta: f64,
    ) -> Option<Result<[WithDerivative<DVector<C64>>; 2]>> {
        Some(self.branch_vectors(theta))
    }
}

/// Jumps in a branch norm larger than this across ±h mean the family is not
/// differentiable at θ.
const NORM_JUMP: f64 = 1e-6;

/// Effective QFI of both pure branches.
pub fn qfi_pure_branches(
    family: &dyn PureBranchFamily,
    theta: f64,
    method: DerivativeMethod,
) -> Result<FisherReport> {
    let (branches, discrepancy) = match (method, family.branches_with_derivative(theta)) {
        (DerivativeMethod::Analytic, Some(analytic)) => (analytic?, 0.0),
        (DerivativeMethod::Analytic, None) => numeric_branches(family, theta, FD_STEP)?,
        (DerivativeMethod::CentralDifference { h }, _) => numeric_branches(family, theta, h)?,
    };
    let [(np, fp), (nm, fm)] = [pure_branch_qfi(&branches[0]), pure_branch_qfi(&branches[1])];
    let mut report = FisherReport::new(theta, QfiMethod::Pure, [fp, fm], [np, nm]);
    report.fd_discrepancy = discrepancy;
    report.fq_outcome = branches
        .iter()
        .map(|b| {
            let norm = b.value.norm_squared();
            let slope = 2.0 * b.value.dotc(&b.derivative).re;
            outcome_term(norm, slope)
        })
        .sum();
    Ok(report)
}

fn numeric_branches(
    family: &dyn PureBranchFamily,
    theta: f64,
    h: f64,
) -> Result<([WithDerivative<DVector<C64>>; 2], f64)> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::params("finite-difference step must be positive"));
    }
    let at = family.branches(theta)?;
    let [p1, m1] = family.branches(theta + h)?;
    let [p0, m0] = family.branches(theta - h)?;
    let [p3, m3] = family.branches(theta + h / 2.0)?;
    let [p2, m2] = family.branches(theta - h / 2.0)?;
    for (lo, mid, hi) in [(&p0, &at[0], &p1), (&m0, &at[1], &m1)] {
        let jump = (lo.norm_squared() + hi.norm_squared() - 2.0 * mid.norm_squared()).abs();
        if jump > NORM_JUMP {
            return Err(Error::NonDifferentiable {
                theta,
                reason: format!("branch probability jumps by {jump:.3e}"),
            });
        }
    }
    let mut discrepancy: f64 = 0.0;
    let mut build = |value: &DVector<C64>,
                     lo: DVector<C64>,
                     hi: DVector<C64>,
                     lo2: DVector<C64>,
                     hi2: DVector<C64>| {
        let coarse = (hi - lo) * c(0.5 / h);
        let fine = (hi2 - lo2) * c(1.0 / h);
        let refined = (&fine * c(4.0) - &coarse) * c(1.0 / 3.0);
        let a = pure_branch_qfi(&WithDerivative {
            value: value.clone(),
            derivative: refined.clone(),
        })
        .1;
        let b = pure_branch_qfi(&WithDerivative {
            value: value.clone(),
            derivative: fine,
        })
        .1;
        discrepancy = discrepancy.max((a - b).abs() / a.abs().max(1.0));
        WithDerivative {
            value: value.clone(),
            derivative: refined,
        }
    };
    let plus = build(&at[0], p0, p1, p2, p3);
    let minus = build(&at[1], m0, m1, m2, m3);
    Ok(([plus, minus], discrepancy))
}

fn outcome_term(norm: f64, slope: f64) -> f64 {
    if norm > NULL_BRANCH {
        slope * slope / norm
    } else {
        0.0
    }
}

/// Effective QFI of the circuit at `theta` by the requested path.
///
/// * `Pure` needs a pure probe and uses analytic generator insertion.
/// * `Sld` works for any probe: each normalized branch family is handed to
///   the SLD oracle and weighted by its probability.
/// * `Spectral` applies the closed generator formula to the probe ensemble;
///   it is exact only when the branch maps are unitary up to a constant and
///   only defined for the synchronous schedule.
pub fn circuit_qfi(circuit: &Circuit, theta: f64, method: QfiMethod) -> Result<FisherReport> {
    match method {
        QfiMethod::Pure => qfi_pure_branches(circuit, theta, DerivativeMethod::Analytic),
        QfiMethod::Sld => circuit_qfi_sld(circuit, theta),
        QfiMethod::Spectral => circuit_qfi_spectral(circuit, theta),
    }
}

fn circuit_qfi_sld(circuit: &Circuit, theta: f64) -> Result<FisherReport> {
    let mut per_branch = [0.0; 2];
    let mut probs = [0.0; 2];
    let mut excluded = 0;
    let mut discrepancy: f64 = 0.0;
    let mut fq_outcome = 0.0;
    for (idx, sign) in Sign::BOTH.into_iter().enumerate() {
        let report = match circuit.measured_probe_state(sign) {
            Some(sigma) => {
                let norm = sigma.trace().re;
                probs[idx] = norm;
                if norm <= NULL_BRANCH {
                    continue;
                }
                // Work in the Jx eigenframe, where R_x(θ) is a diagonal phase.
                let spectrum = circuit.rotation().spectrum();
                let frame = spectrum.vectors.adjoint() * sigma * &spectrum.vectors * c(1.0 / norm);
                let lambdas = spectrum.values.clone();
                let family = move |t: f64| -> Result<DMatrix<C64>> {
                    Ok(DMatrix::from_fn(frame.nrows(), frame.ncols(), |i, j| {
                        frame[(i, j)] * crate::linalg::phase(t * (lambdas[i] - lambdas[j]))
                    }))
                };
                qfi_sld(&family, theta, FD_STEP)?
            }
            None => {
                let trace = |t: f64| circuit.qfi_branch_density(sign, t).trace().re;
                let norm = trace(theta);
                probs[idx] = norm;
                if norm <= NULL_BRANCH {
                    continue;
                }
                let h = FD_STEP;
                let coarse = (trace(theta + h) - trace(theta - h)) / (2.0 * h);
                let fine = (trace(theta + h / 2.0) - trace(theta - h / 2.0)) / h;
                fq_outcome += outcome_term(norm, (4.0 * fine - coarse) / 3.0);
                let family = |t: f64| -> Result<DMatrix<C64>> {
                    let rho = circuit.qfi_branch_density(sign, t);
                    let tr = rho.trace().re;
                    if tr <= NULL_BRANCH {
                        return Err(Error::NonDifferentiable {
                            theta: t,
                            reason: "branch vanishes in the difference stencil".into(),
                        });
                    }
                    Ok(rho * c(1.0 / tr))
                };
                qfi_sld(&family, theta, FD_STEP)?
            }
        };
        per_branch[idx] = probs[idx] * report.value;
        excluded += report.excluded_pairs;
        discrepancy = discrepancy.max(report.fd_discrepancy);
    }
    let mut report = FisherReport::new(theta, QfiMethod::Sld, per_branch, probs);
    report.excluded_pairs = excluded;
    report.fd_discrepancy = discrepancy;
    report.fq_outcome = fq_outcome;
    if discrepancy > FD_CONSISTENCY {
        report.notes.push(format!(
            "finite-difference h/2 check off by {discrepancy:.2e}"
        ));
    }
    Ok(report)
}

/// Relative spread of |K±|² over the probe basis; zero when the branch maps
/// are unitary up to a constant.
pub fn branch_unitarity_defect(circuit: &Circuit) -> f64 {
    Sign::BOTH
        .iter()
        .map(|&s| {
            let k = circuit.kraus_diagonal(s);
            let mags: Vec<f64> = k.iter().map(|z| z.norm_sqr()).collect();
            let hi = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
            (hi - lo) / hi.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

fn circuit_qfi_spectral(circuit: &Circuit, theta: f64) -> Result<FisherReport> {
    if circuit.schedule() != Schedule::Synchronous {
        return Err(Error::Domain(
            "the spectral generator is defined for the synchronous schedule only".into(),
        ));
    }
    let params = circuit.params();
    let dim = circuit.dimension();
    let generator = if params.g == 0.0 {
        GeneratorSpec::rotated(dim, params.omega_p * params.t1)
    } else {
        GeneratorSpec::branch(dim, params.frame_angle())
    };
    let total = qfi_spectral(&circuit.probe().ensemble, &generator)?;
    let probs = circuit.probabilities(theta)?;
    let mut report = FisherReport::new(theta, QfiMethod::Spectral, probs.map(|p| p * total), probs);
    let defect = branch_unitarity_defect(circuit);
    if defect > 1e-10 {
        report.notes.push(format!(
            "branch maps not unitary (defect {defect:.2e}); spectral value outside its domain"
        ));
    }
    if params.g != 0.0 && (params.frame_time() - params.t1).abs() > 0.0 {
        report
            .notes
            .push("frame time differs from t1; spectral generator uses the frame".into());
    }
    Ok(report)
}

/// Extremal spectrum of a Hermitian generator.
#[derive(Debug, Clone)]
pub struct GeneratorExtremes {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub fq_max: f64,
    /// (|λmax⟩ + |λmin⟩)/√2
    pub optimal_state: PureVector,
    /// An extremal eigenvalue is degenerate; any eigenvector was used.
    pub degenerate: bool,
}

const SNAP_TOL: f64 = 1e-9;
const DEGENERACY_TOL: f64 = 1e-9;

fn snap_half_integer(x: f64) -> f64 {
    let twice = 2.0 * x;
    if (twice - twice.round()).abs() < SNAP_TOL {
        twice.round() / 2.0
    } else {
        x
    }
}

/// Rotates a vector so its first non-negligible amplitude is real positive.
fn fix_phase(v: &mut DVector<C64>) {
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let u = z.conj() / z.norm();
        v.apply(|a| *a *= u);
    }
}

/// λmax, λmin, (λmax − λmin)² and the optimal superposition state.
pub fn generator_extremes(h: &Operator) -> Result<GeneratorExtremes> {
    let spectrum = Spectrum::of(h)?;
    let n = spectrum.dim();
    let values = &spectrum.values;
    let lambda_max = snap_half_integer(values[0]);
    let lambda_min = snap_half_integer(values[n - 1]);
    let degenerate = n > 1
        && ((values[0] - values[1]).abs() < DEGENERACY_TOL
            || (values[n - 1] - values[n - 2]).abs() < DEGENERACY_TOL);
    let mut top = spectrum.vectors.column(0).into_owned();
    let mut bottom = spectrum.vectors.column(n - 1).into_owned();
    fix_phase(&mut top);
    fix_phase(&mut bottom);
    let optimal_state = if n == 1 {
        PureVector::normalized(top, h.basis())?
    } else {
        PureVector::normalize(top + bottom, h.basis())?
    };
    // Differences of half-integers are exact in binary floating point.
    let spread = lambda_max - lambda_min;
    Ok(GeneratorExtremes {
        lambda_max,
        lambda_min,
        fq_max: spread * spread,
        optimal_state,
        degenerate,
    })
}

/// θ ↦ outcome probabilities.
pub trait DistributionFamily {
    fn probabilities(&self, theta: f64) -> Result<Vec<f64>>;

    fn with_derivative(&self, _theta: f64) -> Option<Result<WithDerivative<Vec<f64>>>> {
        None
    }
}

/// Projective Jz readout of the probe together with the ancilla outcome.
pub struct JzReadout<'a>(pub &'a Circuit);

impl DistributionFamily for JzReadout<'_> {
    fn probabilities(&self, theta: f64) -> Result<Vec<f64>> {
        Ok(self.0.distribution(theta)?.value.flatten())
    }

    fn with_derivative(&self, theta: f64) -> Option<Result<WithDerivative<Vec<f64>>>> {
        Some(self.0.distribution(theta).map(|d| WithDerivative {
            value: d.value.flatten(),
            derivative: d.derivative.flatten(),
        }))
    }
}

/// Wraps a closure as a distribution family without analytic derivatives.
pub struct FnFamily<F>(pub F);

impl<F: Fn(f64) -> Result<Vec<f64>>> DistributionFamily for FnFamily<F> {
    fn probabilities(&self, theta: f64) -> Result<Vec<f64>> {
        (self.0)(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfiReport {
    pub value: f64,
    /// A vanishing outcome had a non-vanishing slope.
    pub singular: bool,
    pub method: DerivativeMethod,
}

fn numeric_distribution_derivative(
    family: &dyn DistributionFamily,
    theta: f64,
    h: f64,
) -> Result<Vec<f64>> {
    let diff = |step: f64| -> Result<Vec<f64>> {
        let hi = family.probabilities(theta + step)?;
        let lo = family.probabilities(theta - step)?;
        Ok(hi
            .iter()
            .zip(&lo)
            .map(|(a, b)| (a - b) / (2.0 * step))
            .collect())
    };
    let coarse = diff(h)?;
    let fine = diff(h / 2.0)?;
    Ok(fine
        .iter()
        .zip(&coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect())
}

/// ∂θp by central difference with one Richardson step.
pub fn distribution_derivative_fd(
    family: &dyn DistributionFamily,
    theta: f64,
    h: f64,
) -> Result<Vec<f64>> {
    numeric_distribution_derivative(family, theta, h)
}

/// F_C = Σ (∂θp)²/p over outcomes with p > 1e−14.
pub fn cfi(
    family: &dyn DistributionFamily,
    theta: f64,
    method: DerivativeMethod,
) -> Result<CfiReport> {
    let (p, dp, used) = match (method, family.with_derivative(theta)) {
        (DerivativeMethod::Analytic, Some(d)) => {
            let d = d?;
            (d.value, d.derivative, DerivativeMethod::Analytic)
        }
        (DerivativeMethod::Analytic, None) => (
            family.probabilities(theta)?,
            numeric_distribution_derivative(family, theta, FD_STEP)?,
            DerivativeMethod::CentralDifference { h: FD_STEP },
        ),
        (DerivativeMethod::CentralDifference { h }, _) => (
            family.probabilities(theta)?,
            numeric_distribution_derivative(family, theta, h)?,
            method,
        ),
    };
    if p.len() != dp.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: dp.len(),
        });
    }
    let mut value = 0.0;
    let mut singular = false;
    for (pi, di) in p.iter().zip(&dp) {
        if *pi > OUTCOME_CUTOFF {
            value += di * di / pi;
        } else if di.abs() > SINGULAR_SLOPE {
            singular = true;
        }
    }
    Ok(CfiReport {
        value,
        singular,
        method: used,
    })
}

/// Largest relative difference between analytic and central-difference
/// derivatives of a distribution, relative to the largest slope.
pub fn derivative_agreement(family: &dyn DistributionFamily, theta: f64) -> Result<f64> {
    let Some(analytic) = family.with_derivative(theta) else {
        return Err(Error::Domain("family has no analytic derivative".into()));
    };
    let analytic = analytic?.derivative;
    let numeric = numeric_distribution_derivative(family, theta, FD_STEP)?;
    let scale = analytic
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-300);
    Ok(analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max))
}

/// Convenience: a pure probe state in the Jz basis as a one-element ensemble.
pub fn pure_ensemble(amplitudes: DVector<C64>) -> Result<Ensemble> {
    Ok(Ensemble::pure(PureVector::normalize(
        amplitudes,
        Basis::ProbeJz,
    )?))
}
