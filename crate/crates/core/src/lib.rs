//! Simulation of measurement-assisted quantum metrology with a collective
//! spin probe coupled to an ancillary qubit.
//!
//! The probe of N spin-1/2 particles lives in the symmetric (Dicke)
//! subspace, ordered m = +j … −j. Composite probe⊗ancilla vectors index the
//! ancilla fastest, with |e⟩ (σz = +1) before |g⟩.
//!
//! * [`spin`]: collective operators, Jx eigenbasis, rotations, tensor products
//! * [`protocol`]: the evolve, measure, encode circuit with both outcomes kept
//! * [`fisher`]: quantum and classical Fisher information engines
//! * [`analytic`]: closed-form expressions for the same quantities

pub mod analytic;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod protocol;
pub mod spin;

pub use analytic::ClosedFormResult;
pub use error::{Error, Result};
pub use fisher::{
    cfi, circuit_qfi, qfi_pure_branches, qfi_sld, qfi_spectral, CfiReport, DerivativeMethod,
    DistributionFamily, FisherReport, GeneratorSpec, JzReadout, QfiMethod,
};
pub use linalg::{Basis, DensityMatrix, Ensemble, Operator, PureVector, Spectrum, C64};
pub use protocol::{
    run, AncillaPrep, BranchOutcome, BranchState, Circuit, CircuitResult, ProbePrep,
    ProtocolParams, Schedule, Sign,
};
pub use spin::{Axis, SpinDimension};
