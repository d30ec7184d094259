//! The measurement-assisted metrology circuit: joint evolution of probe and
//! ancilla, an unconditional σx measurement of the ancilla, the phase
//! encoding R_x(θ), and a final joint evolution.
//!
//! Units: frequencies are in units of the coupling g and times in 1/g.
//! Both measurement outcomes are always carried along; nothing is sampled.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{c, phase, Basis, DensityMatrix, Ensemble, Operator, PureVector, C64};
use crate::spin::{self, SpinDimension, XRotation};

/// Branch probabilities at or below this are treated as null branches.
pub const NULL_BRANCH: f64 = 1e-14;

/// Physical parameters of one circuit run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub spins: u32,
    pub omega_p: f64,
    pub omega_a: f64,
    pub g: f64,
    pub t1: f64,
    pub t2: f64,
    pub theta: f64,
    /// Evolution-1 time that defines the optimized probe frame |j,m⟩_opt.
    /// `None` uses `t1`; set it to hold the frame fixed while `t1` varies.
    pub frame_t1: Option<f64>,
}

impl ProtocolParams {
    /// Optimal working point: g = 1, ωP = 10, t1 = π/2, ωA from the
    /// unitarity condition with the parity rule for n2, t2 = θ = 0.
    pub fn optimized(spins: u32) -> Result<Self> {
        let t1 = optimal_t1(1.0, 0)?;
        Ok(ProtocolParams {
            spins,
            omega_p: 10.0,
            omega_a: parity_rule_omega_a(spins, t1)?,
            g: 1.0,
            t1,
            t2: 0.0,
            theta: 0.0,
            frame_t1: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        SpinDimension::new(self.spins)?;
        let named = [
            ("omega_p", self.omega_p),
            ("omega_a", self.omega_a),
            ("g", self.g),
            ("t1", self.t1),
            ("t2", self.t2),
            ("theta", self.theta),
            ("frame_t1", self.frame_t1.unwrap_or(0.0)),
        ];
        if let Some((name, v)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::params(format!("{name} = {v} is not finite")));
        }
        // g = 0 is the decoupled baseline; negative couplings are just a relabeling.
        if self.g < 0.0 {
            return Err(Error::params("coupling g must be non-negative"));
        }
        if self.t1 < 0.0 || self.t2 < 0.0 {
            return Err(Error::params("evolution times must be non-negative"));
        }
        Ok(())
    }

    pub fn dimension(&self) -> Result<SpinDimension> {
        SpinDimension::new(self.spins)
    }

    pub fn frame_time(&self) -> f64 {
        self.frame_t1.unwrap_or(self.t1)
    }

    /// (ωP + g)·t1 of the optimized frame.
    pub fn frame_angle(&self) -> f64 {
        spin::opt_angle(self.omega_p, self.g, self.frame_time())
    }
}

/// t1,opt(n1) = (n1 + 1/2)π/g.
pub fn optimal_t1(g: f64, n1: i64) -> Result<f64> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::params("optimal t1 needs g > 0"));
    }
    Ok((n1 as f64 + 0.5) * PI / g)
}

/// ωA = (N + 1 + 2 n2)π / (4 t1,opt): makes the branch maps unitary.
pub fn optimal_omega_a(spins: u32, t1_opt: f64, n2: i64) -> Result<f64> {
    if !(t1_opt > 0.0) || !t1_opt.is_finite() {
        return Err(Error::params("optimal omega_A needs t1_opt > 0"));
    }
    Ok((spins as f64 + 1.0 + 2.0 * n2 as f64) * PI / (4.0 * t1_opt))
}

/// n2 = (9 − N)/2 for odd N, (10 − N)/2 for even N; keeps ωA near 5g at
/// t1 = π/(2g).
pub fn parity_n2(spins: u32) -> i64 {
    let n = spins as i64;
    if n % 2 == 1 {
        (9 - n) / 2
    } else {
        (10 - n) / 2
    }
}

pub fn parity_rule_omega_a(spins: u32, t1_opt: f64) -> Result<f64> {
    optimal_omega_a(spins, t1_opt, parity_n2(spins))
}

/// Measurement outcome of the ancilla in the σx basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    /// |±⟩ = (|e⟩ ± |g⟩)/√2 as (e, g) amplitudes.
    pub fn ancilla_amplitudes(self) -> [f64; 2] {
        [FRAC_1_SQRT_2, self.value() * FRAC_1_SQRT_2]
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// Initial probe state.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbePrep {
    /// |j,±j⟩_opt
    PolarizedOpt(Sign),
    /// a|j,j⟩_opt + b e^{−iφ}|j,−j⟩_opt with real a, b.
    SuperposedOpt { a: f64, b: f64, phi: f64 },
    /// (1 + e^{−iφ0} e^{iπJz})|j,j⟩_x / √2
    GhzX { phi0: f64 },
    /// Σ_m p_m |j,m⟩⟨j,m| over Dicke states, weights ordered m = +j … −j.
    DickeMixture(Vec<f64>),
    /// Σ_m e^{−mβ}/Z |j,m⟩_opt⟨j,m|
    Thermal { beta: f64 },
}

impl ProbePrep {
    pub fn is_pure(&self) -> bool {
        !matches!(self, ProbePrep::DickeMixture(_) | ProbePrep::Thermal { .. })
    }
}

/// Initial ancilla state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AncillaPrep {
    Plus,
    Minus,
    Ground,
    Excited,
    /// cos(ϑ/2)|e⟩ + e^{iϕ} sin(ϑ/2)|g⟩
    Bloch {
        theta: f64,
        phi: f64,
    },
}

impl AncillaPrep {
    /// (e, g) amplitudes.
    pub fn amplitudes(self) -> Result<[C64; 2]> {
        Ok(match self {
            AncillaPrep::Plus => [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)],
            AncillaPrep::Minus => [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)],
            AncillaPrep::Excited => [c(1.0), c(0.0)],
            AncillaPrep::Ground => [c(0.0), c(1.0)],
            AncillaPrep::Bloch { theta, phi } => {
                if !theta.is_finite() || !phi.is_finite() {
                    return Err(Error::params("non-finite Bloch angles"));
                }
                [c((theta / 2.0).cos()), phase(-phi) * (theta / 2.0).sin()]
            }
        })
    }
}

/// Relative timing of encoding and measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// U(t2) R_x(θ) M± U(t1)
    Synchronous,
    /// U(t2) M± U(Δt) R_x(θ) U(t1)
    MeasurementDelay(f64),
    /// U(t2) R_x(θ) U(Δt) M± U(t1)
    EncodingDelay(f64),
}

impl Schedule {
    pub fn delay(&self) -> f64 {
        match *self {
            Schedule::Synchronous => 0.0,
            Schedule::MeasurementDelay(dt) | Schedule::EncodingDelay(dt) => dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dt = self.delay();
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::params(format!("delay {dt} must be finite and >= 0")));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Synchronous => "synchronous",
            Schedule::MeasurementDelay(_) => "measurement_delay",
            Schedule::EncodingDelay(_) => "encoding_delay",
        }
    }
}

/// One stage of the circuit, applied left to right.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Evolve(f64),
    Project(Sign),
    Encode,
}

fn steps(params: &ProtocolParams, schedule: Schedule, sign: Sign) -> Vec<Step> {
    use Step::*;
    match schedule {
        Schedule::Synchronous => vec![Evolve(params.t1), Project(sign), Encode, Evolve(params.t2)],
        Schedule::MeasurementDelay(dt) => vec![
            Evolve(params.t1),
            Encode,
            Evolve(dt),
            Project(sign),
            Evolve(params.t2),
        ],
        Schedule::EncodingDelay(dt) => vec![
            Evolve(params.t1),
            Project(sign),
            Evolve(dt),
            Encode,
            Evolve(params.t2),
        ],
    }
}

/// Probe state with its spectral decomposition.
#[derive(Debug, Clone)]
pub struct PreparedProbe {
    pub state: BranchState,
    pub ensemble: Ensemble,
}

impl PreparedProbe {
    pub fn density(&self) -> DMatrix<C64> {
        match &self.state {
            BranchState::Pure(v) => v.projector(),
            BranchState::Mixed(rho) => rho.entries().clone(),
        }
    }
}

/// Builds the probe state in the Jz basis. The optimized frame uses
/// `params.frame_time()`.
pub fn prepare_probe(prep: &ProbePrep, params: &ProtocolParams) -> Result<PreparedProbe> {
    let dim = params.dimension()?;
    let d = dim.dim();
    let pure = |amps: DVector<C64>| -> Result<PreparedProbe> {
        let v = PureVector::normalize(amps, Basis::ProbeJz)?;
        Ok(PreparedProbe {
            state: BranchState::Pure(v.clone()),
            ensemble: Ensemble::pure(v),
        })
    };
    match prep {
        ProbePrep::PolarizedOpt(sign) => {
            let k = if *sign == Sign::Plus { 0 } else { d - 1 };
            let basis = spin::frame_basis(dim, params.frame_angle());
            pure(basis.column(k).into_owned())
        }
        ProbePrep::SuperposedOpt { a, b, phi } => {
            if ![a, b, phi].iter().all(|v| v.is_finite()) || (a * a + b * b - 1.0).abs() > 1e-10 {
                return Err(Error::params(format!(
                    "superposition needs a² + b² = 1, got a = {a}, b = {b}"
                )));
            }
            let basis = spin::frame_basis(dim, params.frame_angle());
            let amps = basis.column(0) * c(*a) + basis.column(d - 1) * (phase(*phi) * *b);
            pure(amps)
        }
        ProbePrep::GhzX { phi0 } => {
            if !phi0.is_finite() {
                return Err(Error::params("non-finite GHZ phase"));
            }
            let top = spin::x_basis(dim).column(0).into_owned();
            let flipped = DVector::from_fn(d, |k, _| top[k] * phase(-PI * dim.m_at(k)));
            pure((top + flipped * phase(*phi0)) * c(FRAC_1_SQRT_2))
        }
        ProbePrep::DickeMixture(weights) => {
            if weights.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: weights.len(),
                });
            }
            let states = (0..d)
                .map(|k| {
                    let mut e = DVector::zeros(d);
                    e[k] = c(1.0);
                    PureVector::unnormalized(e, Basis::ProbeJz)
                })
                .collect();
            let ensemble = Ensemble::new(weights.clone(), states)
                .map_err(|e| Error::params(format!("dicke mixture: {e}")))?;
            mixed(ensemble)
        }
        ProbePrep::Thermal { beta } => {
            if !beta.is_finite() {
                return Err(Error::params("inverse temperature must be finite"));
            }
            let basis = spin::frame_basis(dim, params.frame_angle());
            let weights = thermal_weights(dim, *beta);
            let states = (0..d)
                .map(|k| PureVector::unnormalized(basis.column(k).into_owned(), Basis::ProbeJz))
                .collect();
            mixed(Ensemble::new(weights, states)?)
        }
    }
}

/// e^{−mβ}/Z over m = +j … −j, evaluated with the largest exponent shifted out.
pub fn thermal_weights(dim: SpinDimension, beta: f64) -> Vec<f64> {
    let exponents: Vec<f64> = dim.m_values().map(|m| -m * beta).collect();
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = exponents.iter().map(|x| (x - top).exp()).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / z).collect()
}

fn mixed(ensemble: Ensemble) -> Result<PreparedProbe> {
    let rho = DensityMatrix::new(ensemble.density(), Basis::ProbeJz)?;
    Ok(PreparedProbe {
        state: BranchState::Mixed(rho),
        ensemble,
    })
}

/// ωP Jz⊗I + ωA I⊗σz + g Jz⊗σz; diagonal in the composite basis.
pub fn full_hamiltonian(params: &ProtocolParams) -> Result<Operator> {
    params.validate()?;
    let diag = composite_energies(params.dimension()?, params);
    Ok(Operator::from_diagonal(
        &DVector::from_iterator(diag.len(), diag.into_iter().map(c)),
        Basis::Composite,
    ))
}

fn composite_energies(dim: SpinDimension, p: &ProtocolParams) -> Vec<f64> {
    dim.m_values()
        .flat_map(|m| [1.0, -1.0].map(|s| p.omega_p * m + p.omega_a * s + p.g * m * s))
        .collect()
}

/// State of one measurement branch.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchState {
    Pure(PureVector),
    Mixed(DensityMatrix),
}

impl BranchState {
    pub fn basis(&self) -> Basis {
        match self {
            BranchState::Pure(v) => v.basis(),
            BranchState::Mixed(r) => r.basis(),
        }
    }

    /// ⟨ψ|ψ⟩ or Tr ρ.
    pub fn weight(&self) -> f64 {
        match self {
            BranchState::Pure(v) => v.norm_sqr(),
            BranchState::Mixed(r) => r.trace(),
        }
    }

    pub fn density(&self) -> DMatrix<C64> {
        match self {
            BranchState::Pure(v) => v.projector(),
            BranchState::Mixed(r) => r.entries().clone(),
        }
    }
}

/// One unraveling of the unconditional measurement. `state` is normalized,
/// or `None` for a branch of vanishing probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub sign: Sign,
    pub probability: f64,
    pub state: Option<BranchState>,
}

impl BranchOutcome {
    fn from_unnormalized(sign: Sign, state: BranchState) -> Self {
        let probability = state.weight();
        if probability <= NULL_BRANCH {
            return BranchOutcome {
                sign,
                probability,
                state: None,
            };
        }
        let state = match state {
            BranchState::Pure(v) => {
                let basis = v.basis();
                BranchState::Pure(
                    PureVector::normalize(v.into_amplitudes(), basis).expect("non-null branch"),
                )
            }
            BranchState::Mixed(r) => {
                let basis = r.basis();
                BranchState::Mixed(DensityMatrix::from_raw(
                    r.into_entries() * c(1.0 / probability),
                    basis,
                ))
            }
        };
        BranchOutcome {
            sign,
            probability,
            state: Some(state),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CircuitResult {
    pub branches: [BranchOutcome; 2],
    pub params: ProtocolParams,
    pub schedule: Schedule,
}

impl CircuitResult {
    pub fn branch(&self, sign: Sign) -> &BranchOutcome {
        &self.branches[if sign == Sign::Plus { 0 } else { 1 }]
    }

    /// Σ probability · trace(normalized state); 1 up to roundoff.
    pub fn total_weight(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.probability * b.state.as_ref().map_or(0.0, |s| s.weight()))
            .sum()
    }
}

fn project_vector(v: &mut DVector<C64>, sign: Sign) {
    let [se, sg] = sign.ancilla_amplitudes();
    for k in 0..v.len() / 2 {
        let amp = v[2 * k] * se + v[2 * k + 1] * sg;
        v[2 * k] = amp * se;
        v[2 * k + 1] = amp * sg;
    }
}

/// Projects the ancilla onto |±⟩ for both outcomes of a composite state.
pub fn measure_sigma_x(state: &BranchState) -> Result<[BranchOutcome; 2]> {
    if state.basis() != Basis::Composite {
        return Err(Error::WrongBasis {
            expected: Basis::Composite.name(),
            found: state.basis().name(),
        });
    }
    Ok(Sign::BOTH.map(|sign| {
        let branch = match state {
            BranchState::Pure(v) => {
                let mut amps = v.amplitudes().clone();
                project_vector(&mut amps, sign);
                BranchState::Pure(PureVector::unnormalized(amps, Basis::Composite))
            }
            BranchState::Mixed(r) => {
                let mut rho = r.entries().clone();
                project_density(&mut rho, sign);
                BranchState::Mixed(DensityMatrix::from_raw(rho, Basis::Composite))
            }
        };
        BranchOutcome::from_unnormalized(sign, branch)
    }))
}

fn project_density(rho: &mut DMatrix<C64>, sign: Sign) {
    for mut col in rho.column_iter_mut() {
        let mut v = col.clone_owned();
        project_vector(&mut v, sign);
        col.copy_from(&v);
    }
    for mut row in rho.row_iter_mut() {
        let mut v = row.transpose();
        project_vector(&mut v, sign);
        row.copy_from(&v.transpose());
    }
}

/// P(m, ±) over the Jz basis, m = +j … −j, for each outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchDistribution {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl BranchDistribution {
    /// Outcomes (m, +) followed by (m, −).
    pub fn flatten(&self) -> Vec<f64> {
        self.plus.iter().chain(&self.minus).copied().collect()
    }

    pub fn total(&self) -> f64 {
        self.plus.iter().chain(&self.minus).sum()
    }
}

fn probe_populations(rho: &DMatrix<C64>) -> Vec<f64> {
    (0..rho.nrows() / 2)
        .map(|k| rho[(2 * k, 2 * k)].re + rho[(2 * k + 1, 2 * k + 1)].re)
        .collect()
}

/// P(m, sign) = ⟨j,m| Tr_A[branch] |j,m⟩ · probability.
pub fn branch_distribution(branch: &BranchOutcome) -> Result<Vec<f64>> {
    let Some(state) = &branch.state else {
        return Ok(Vec::new());
    };
    if state.basis() != Basis::Composite {
        return Err(Error::WrongBasis {
            expected: Basis::Composite.name(),
            found: state.basis().name(),
        });
    }
    let populations = match state {
        BranchState::Pure(v) => v
            .amplitudes()
            .as_slice()
            .chunks(2)
            .map(|a| a[0].norm_sqr() + a[1].norm_sqr())
            .collect(),
        BranchState::Mixed(r) => probe_populations(r.entries()),
    };
    Ok(populations
        .into_iter()
        .map(|p: f64| p * branch.probability)
        .collect())
}

/// Initial probe ⊗ ancilla state.
#[derive(Debug, Clone)]
enum Initial {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// A fully specified circuit. θ is supplied per evaluation so that the same
/// circuit can be differentiated and swept.
#[derive(Debug, Clone)]
pub struct Circuit {
    params: ProtocolParams,
    schedule: Schedule,
    dim: SpinDimension,
    energies: Vec<f64>,
    rotation: XRotation,
    probe: PreparedProbe,
    ancilla: [C64; 2],
    initial: Initial,
}

/// A value together with its θ-derivative.
#[derive(Debug, Clone)]
pub struct WithDerivative<T> {
    pub value: T,
    pub derivative: T,
}

impl Circuit {
    pub fn new(
        params: ProtocolParams,
        prep: &ProbePrep,
        ancilla: AncillaPrep,
        schedule: Schedule,
    ) -> Result<Self> {
        params.validate()?;
        schedule.validate()?;
        let dim = params.dimension()?;
        let probe = prepare_probe(prep, &params)?;
        let ancilla = ancilla.amplitudes()?;
        let anc = DVector::from_row_slice(&ancilla);
        let initial = match &probe.state {
            BranchState::Pure(v) => Initial::Pure(v.amplitudes().kronecker(&anc)),
            BranchState::Mixed(r) => Initial::Mixed(r.entries().kronecker(&(&anc * anc.adjoint()))),
        };
        Ok(Circuit {
            energies: composite_energies(dim, &params),
            rotation: XRotation::new(dim),
            params,
            schedule,
            dim,
            probe,
            ancilla,
            initial,
        })
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn schedule(&self) -> Schedule {
        self.schedule
    }

    pub fn dimension(&self) -> SpinDimension {
        self.dim
    }

    pub fn probe(&self) -> &PreparedProbe {
        &self.probe
    }

    pub fn rotation(&self) -> &XRotation {
        &self.rotation
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.initial, Initial::Pure(_))
    }

    pub fn steps(&self, sign: Sign) -> Vec<Step> {
        steps(&self.params, self.schedule, sign)
    }

    fn evolve_vector(&self, v: &mut DVector<C64>, t: f64) {
        for (a, e) in v.iter_mut().zip(&self.energies) {
            *a *= phase(e * t);
        }
    }

    fn evolve_density(&self, rho: &mut DMatrix<C64>, t: f64) {
        let u: Vec<C64> = self.energies.iter().map(|e| phase(e * t)).collect();
        for j in 0..rho.ncols() {
            for i in 0..rho.nrows() {
                rho[(i, j)] *= u[i] * u[j].conj();
            }
        }
    }

    /// (A ⊗ I) v for a probe operator A.
    fn probe_apply(a: &DMatrix<C64>, v: &DVector<C64>) -> DVector<C64> {
        let d = a.nrows();
        let mut out = DVector::zeros(v.len());
        for anc in 0..2 {
            let slice = DVector::from_fn(d, |k, _| v[2 * k + anc]);
            let mapped = a * slice;
            for k in 0..d {
                out[2 * k + anc] = mapped[k];
            }
        }
        out
    }

    /// Unnormalized branch vectors and their θ-derivatives for a pure probe.
    pub fn branch_vectors(&self, theta: f64) -> Result<[WithDerivative<DVector<C64>>; 2]> {
        let Initial::Pure(psi0) = &self.initial else {
            return Err(Error::InvalidState(
                "branch vectors need a pure probe state".into(),
            ));
        };
        let r = self.rotation.matrix(theta);
        let jx = self.rotation.generator().matrix();
        Ok(Sign::BOTH.map(|sign| {
            let mut value = psi0.clone();
            let mut derivative = DVector::zeros(psi0.len());
            for step in self.steps(sign) {
                match step {
                    Step::Evolve(t) => {
                        self.evolve_vector(&mut value, t);
                        self.evolve_vector(&mut derivative, t);
                    }
                    Step::Project(s) => {
                        project_vector(&mut value, s);
                        project_vector(&mut derivative, s);
                    }
                    Step::Encode => {
                        value = Self::probe_apply(&r, &value);
                        derivative = Self::probe_apply(&r, &derivative)
                            + Self::probe_apply(jx, &value) * C64::new(0.0, -1.0);
                    }
                }
            }
            WithDerivative { value, derivative }
        }))
    }

    fn initial_density(&self) -> DMatrix<C64> {
        match &self.initial {
            Initial::Pure(v) => v * v.adjoint(),
            Initial::Mixed(r) => r.clone(),
        }
    }

    /// Runs `steps` on the composite density matrix, carrying ∂θρ.
    fn propagate_density(
        &self,
        steps: &[Step],
        theta: f64,
        rho0: DMatrix<C64>,
    ) -> WithDerivative<DMatrix<C64>> {
        let r = self
            .rotation
            .matrix(theta)
            .kronecker(&DMatrix::<C64>::identity(2, 2));
        let g = self
            .rotation
            .generator()
            .matrix()
            .kronecker(&DMatrix::<C64>::identity(2, 2));
        let n = rho0.nrows();
        let mut value = rho0;
        let mut derivative: Option<DMatrix<C64>> = None;
        for step in steps {
            match *step {
                Step::Evolve(t) => {
                    self.evolve_density(&mut value, t);
                    if let Some(d) = derivative.as_mut() {
                        self.evolve_density(d, t);
                    }
                }
                Step::Project(s) => {
                    project_density(&mut value, s);
                    if let Some(d) = derivative.as_mut() {
                        project_density(d, s);
                    }
                }
                Step::Encode => {
                    value = &r * value * r.adjoint();
                    let commutator = (&g * &value - &value * &g) * C64::new(0.0, -1.0);
                    derivative = Some(match derivative {
                        Some(d) => &r * d * r.adjoint() + commutator,
                        None => commutator,
                    });
                }
            }
        }
        WithDerivative {
            value,
            derivative: derivative.unwrap_or_else(|| DMatrix::zeros(n, n)),
        }
    }

    /// Unnormalized composite branch density matrices with θ-derivatives.
    pub fn branch_densities(&self, theta: f64) -> [WithDerivative<DMatrix<C64>>; 2] {
        Sign::BOTH
            .map(|sign| self.propagate_density(&self.steps(sign), theta, self.initial_density()))
    }

    /// Unnormalized branch state entering the QFI: the output with trailing
    /// θ-independent evolution removed (the QFI is invariant under it).
    pub(crate) fn qfi_branch_density(&self, sign: Sign, theta: f64) -> DMatrix<C64> {
        let mut steps = self.steps(sign);
        while let Some(Step::Evolve(_)) = steps.last() {
            steps.pop();
        }
        self.propagate_density(&steps, theta, self.initial_density())
            .value
    }

    /// Effective probe operator ⟨s|U(t1)|φ⟩, diagonal in the Jz basis.
    pub fn kraus_diagonal(&self, sign: Sign) -> DVector<C64> {
        let s = sign.ancilla_amplitudes();
        DVector::from_fn(self.dim.dim(), |k, _| {
            (0..2)
                .map(|a| self.ancilla[a] * s[a] * phase(self.energies[2 * k + a] * self.params.t1))
                .sum()
        })
    }

    /// For the synchronous schedule, the post-measurement probe state
    /// K ρ0 K† (unnormalized). The branch is this state ⊗ |±⟩⟨±| up to the
    /// encoding and the final evolution.
    pub fn measured_probe_state(&self, sign: Sign) -> Option<DMatrix<C64>> {
        if self.schedule != Schedule::Synchronous {
            return None;
        }
        let k = self.kraus_diagonal(sign);
        let rho0 = self.probe.density();
        Some(DMatrix::from_fn(rho0.nrows(), rho0.ncols(), |i, j| {
            k[i] * rho0[(i, j)] * k[j].conj()
        }))
    }

    /// Both measurement branches at `theta`.
    pub fn outcomes(&self, theta: f64) -> Result<[BranchOutcome; 2]> {
        let states: [BranchState; 2] = if self.is_pure() {
            self.branch_vectors(theta)?
                .map(|b| BranchState::Pure(PureVector::unnormalized(b.value, Basis::Composite)))
        } else {
            self.branch_densities(theta)
                .map(|b| BranchState::Mixed(DensityMatrix::from_raw(b.value, Basis::Composite)))
        };
        let [plus, minus] = states;
        Ok([
            BranchOutcome::from_unnormalized(Sign::Plus, plus),
            BranchOutcome::from_unnormalized(Sign::Minus, minus),
        ])
    }

    /// Branch probabilities (N₊, N₋) at `theta`.
    pub fn probabilities(&self, theta: f64) -> Result<[f64; 2]> {
        Ok(self.outcomes(theta)?.map(|b| b.probability))
    }

    /// Jz-readout distribution over (m, ±) and its θ-derivative.
    pub fn distribution(&self, theta: f64) -> Result<WithDerivative<BranchDistribution>> {
        let (pops, dpops): (Vec<Vec<f64>>, Vec<Vec<f64>>) = if self.is_pure() {
            self.branch_vectors(theta)?
                .into_iter()
                .map(|b| {
                    let p = b.value.iter().map(|a| a.norm_sqr()).collect::<Vec<_>>();
                    let dp = b
                        .value
                        .iter()
                        .zip(b.derivative.iter())
                        .map(|(a, da)| 2.0 * (a.conj() * da).re)
                        .collect::<Vec<_>>();
                    (fold_ancilla(&p), fold_ancilla(&dp))
                })
                .unzip()
        } else {
            self.branch_densities(theta)
                .into_iter()
                .map(|b| {
                    (
                        probe_populations(&b.value),
                        probe_populations(&b.derivative),
                    )
                })
                .unzip()
        };
        let mut pops = pops.into_iter();
        let mut dpops = dpops.into_iter();
        Ok(WithDerivative {
            value: BranchDistribution {
                plus: pops.next().unwrap(),
                minus: pops.next().unwrap(),
            },
            derivative: BranchDistribution {
                plus: dpops.next().unwrap(),
                minus: dpops.next().unwrap(),
            },
        })
    }
}

fn fold_ancilla(per_composite: &[f64]) -> Vec<f64> {
    per_composite.chunks(2).map(|p| p[0] + p[1]).collect()
}

/// Executes the circuit at `params.theta` and returns both branches.
pub fn run(
    params: ProtocolParams,
    prep: &ProbePrep,
    ancilla: AncillaPrep,
    schedule: Schedule,
) -> Result<CircuitResult> {
    let circuit = Circuit::new(params, prep, ancilla, schedule)?;
    Ok(CircuitResult {
        branches: circuit.outcomes(params.theta)?,
        params,
        schedule,
    })
}
