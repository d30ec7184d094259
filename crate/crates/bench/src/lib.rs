//! Fixtures shared by the benchmarks.

use spinmetro_core::{AncillaPrep, Circuit, ProbePrep, ProtocolParams, Result, Schedule, Sign};

/// Optimized synchronous circuit for `n` spins.
pub fn optimized_circuit(n: u32, prep: ProbePrep, schedule: Schedule) -> Result<Circuit> {
    Circuit::new(
        ProtocolParams::optimized(n)?,
        &prep,
        AncillaPrep::Plus,
        schedule,
    )
}

pub fn polarized(n: u32) -> Circuit {
    optimized_circuit(
        n,
        ProbePrep::PolarizedOpt(Sign::Plus),
        Schedule::Synchronous,
    )
    .expect("valid optimized circuit")
}

pub fn thermal(n: u32, beta: f64) -> Circuit {
    optimized_circuit(n, ProbePrep::Thermal { beta }, Schedule::Synchronous)
        .expect("valid optimized circuit")
}
