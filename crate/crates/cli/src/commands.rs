//! Single-point and sweep evaluation.

use std::time::Instant;

use rayon::prelude::*;
use spinmetro_core::{cfi, circuit_qfi, Circuit, DerivativeMethod, JzReadout, QfiMethod, Schedule};

use crate::config::{MethodChoice, PrepKind, RunConfig, ScheduleKind, SweepAxis};
use crate::error::{CliError, Result};
use crate::records::Record;

pub fn build_circuit(config: &RunConfig) -> Result<Circuit> {
    Ok(Circuit::new(
        config.params()?,
        &config.probe_prep(),
        config.ancilla_prep(),
        config.schedule(),
    )?)
}

/// Copies every input that can affect a result into `record`.
pub fn echo_inputs(config: &RunConfig, record: &mut Record) -> Result<()> {
    let weights = config
        .weights
        .iter()
        .map(|w| format!("{w}"))
        .collect::<Vec<_>>()
        .join(" ");
    record
        .input("a", config.a)
        .input("ancilla", config.ancilla.name())
        .input("ancilla_phi", config.ancilla_phi)
        .input("ancilla_theta", config.ancilla_theta)
        .input("b", config.b)
        .input("beta", config.beta)
        .input("dt", config.dt)
        .input("frame_t1", config.frame_t1)
        .input("g", config.g)
        .input("n", config.n)
        .input("omega_a", config.resolved_omega_a()?)
        .input("omega_p", config.omega_p)
        .input("phi", config.phi)
        .input("phi0", config.phi0)
        .input("prep", config.prep.name())
        .input("schedule", config.schedule.name())
        .input("t1", config.t1)
        .input("t2", config.t2)
        .input("theta", config.theta)
        .input("weights", weights);
    Ok(())
}

/// Resolves the requested method(s) against what the circuit supports.
pub fn methods_for(choice: MethodChoice, circuit: &Circuit) -> Result<Vec<QfiMethod>> {
    let pure_ok = circuit.is_pure();
    let spectral_ok = circuit.schedule() == Schedule::Synchronous;
    match choice {
        MethodChoice::Auto => Ok(vec![if pure_ok {
            QfiMethod::Pure
        } else {
            QfiMethod::Sld
        }]),
        MethodChoice::All => Ok(QfiMethod::ALL
            .into_iter()
            .filter(|m| match m {
                QfiMethod::Pure => pure_ok,
                QfiMethod::Spectral => spectral_ok,
                QfiMethod::Sld => true,
            })
            .collect()),
        MethodChoice::One(QfiMethod::Pure) if !pure_ok => {
            Err(CliError::config("method pure needs a pure probe state"))
        }
        MethodChoice::One(QfiMethod::Spectral) if !spectral_ok => Err(CliError::config(
            "method spectral is defined for the synchronous schedule only",
        )),
        MethodChoice::One(m) => Ok(vec![m]),
    }
}

/// Evaluates one configuration: one record per QFI method, optionally with
/// the CFI of the Jz readout.
pub fn evaluate(config: &RunConfig, with_cfi: bool) -> Result<Vec<Record>> {
    let circuit = build_circuit(config)?;
    let methods = methods_for(config.method, &circuit)?;
    let n2 = f64::from(config.n).powi(2);
    let mut records = Vec::with_capacity(methods.len());
    for method in methods {
        let start = Instant::now();
        let report = circuit_qfi(&circuit, config.theta, method)?;
        let mut r = Record::default();
        echo_inputs(config, &mut r)?;
        r.output("method", method.name())
            .output("fq_plus_eff", report.fq_plus_eff)
            .output("fq_minus_eff", report.fq_minus_eff)
            .output("fq_total", report.fq_total)
            .output("fq_norm", report.fq_total / n2)
            .output("fq_outcome", report.fq_outcome)
            .output("prob_plus", report.prob_plus)
            .output("prob_minus", report.prob_minus);
        if with_cfi {
            let fc = cfi(
                &JzReadout(&circuit),
                config.theta,
                DerivativeMethod::Analytic,
            )?;
            r.output("fc", fc.value).output("fc_norm", fc.value / n2);
            if fc.singular {
                r.notes
                    .push("vanishing outcome with nonzero slope; CFI singular".into());
            }
        }
        r.output("excluded_pairs", report.excluded_pairs);
        r.notes.extend(report.notes);
        r.wall_time = start.elapsed().as_secs_f64();
        records.push(r);
    }
    Ok(records)
}

pub fn cmd_qfi(config: &RunConfig) -> Result<Vec<Record>> {
    evaluate(config, false)
}

pub fn cmd_cfi(config: &RunConfig) -> Result<Vec<Record>> {
    evaluate(config, true)
}

/// Maps `f` over `items` on a pool of `jobs` threads (0: pool default),
/// keeping input order.
pub fn par_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    pool.install(|| items.into_par_iter().map(f).collect())
}

pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<Record>> {
    let axis = config.validate_sweep()?;
    if axis == SweepAxis::Dt && config.schedule == ScheduleKind::Synchronous {
        return Err(CliError::config("axis dt needs a delay schedule"));
    }
    if axis == SweepAxis::Beta && config.prep != PrepKind::Thermal {
        return Err(CliError::config("axis beta needs prep = thermal"));
    }
    let points: Vec<RunConfig> = config
        .grid(axis)
        .into_iter()
        .map(|v| config.with_axis_value(axis, v))
        .collect();
    // Fail fast on configuration errors before spawning work.
    for p in &points {
        p.params()?;
    }
    let per_point = par_map(config.jobs, points, |p| evaluate(&p, true))?;
    Ok(per_point.into_iter().flatten().collect())
}
