//! Figure datasets, each written with a JSON manifest of its parameters.
//!
//! All figures use ωP = 10g, g = 1, t1 = π/2, ancilla |+⟩ and ωA from the
//! unitarity condition with the parity rule, unless a column says otherwise.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use serde_json::{json, Value as Json};
use spinmetro_core::analytic::{thermal_qfi_exact, thermal_qfi_lower_bound};
use spinmetro_core::{cfi, circuit_qfi, Circuit, DerivativeMethod, JzReadout, QfiMethod};

use crate::commands::par_map;
use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};
use crate::records::{encode, Record, Value};

pub const FIGURES: [&str; 8] = [
    "fig2", "fig3a", "fig3b", "fig3c", "fig3d", "fig3e", "fig3f", "fig4",
];

pub const FIG2_BETAS: [f64; 3] = [2.0, 1.0, 0.1];
pub const FIG2_MAX_N: u32 = 150;
pub const FIG3_SPINS: [u32; 3] = [2, 10, 100];
pub const FIG3_POINTS: usize = 101;
pub const FIG3_BETA: f64 = 1.0;
pub const FIG4_SPINS: u32 = 10;
pub const FIG4_BETAS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 10.0];
pub const FIG4_POINTS: usize = 100;
/// Fixed ωA = 5g, run next to the parity-rule value.
pub const FIG4_FIXED_OMEGA_A: f64 = 5.0;

pub struct FigureData {
    pub id: String,
    pub records: Vec<Record>,
    pub manifest: Json,
}

fn base() -> RunConfig {
    RunConfig::default()
}

fn common_parameters() -> Json {
    json!({
        "g": 1.0,
        "omega_p": 10.0,
        "t1": FRAC_PI_2,
        "ancilla": "plus",
        "omega_a": "(N + 1 + 2 n2) pi / (4 t1), n2 = (9 - N)/2 for odd N, (10 - N)/2 for even N",
    })
}

pub fn generate(id: &str, jobs: usize) -> Result<FigureData> {
    match id {
        "fig2" => fig2(jobs),
        "fig3a" | "fig3b" | "fig3c" | "fig3d" | "fig3e" | "fig3f" => fig3(id, jobs),
        "fig4" => fig4(jobs),
        other => Err(CliError::config(format!(
            "unknown figure '{other}'; expected one of {}",
            FIGURES.join(", ")
        ))),
    }
}

fn thermal_circuit(config: &RunConfig) -> Result<Circuit> {
    Ok(Circuit::new(
        config.params()?,
        &config.probe_prep(),
        config.ancilla_prep(),
        config.schedule(),
    )?)
}

fn fig2(jobs: usize) -> Result<FigureData> {
    let points: Vec<(f64, u32)> = FIG2_BETAS
        .iter()
        .flat_map(|&b| (1..=FIG2_MAX_N).map(move |n| (b, n)))
        .collect();
    let records = par_map(jobs, points, |(beta, n)| {
        let mut c = base();
        c.n = n;
        c.prep = crate::config::PrepKind::Thermal;
        c.beta = beta;
        let circuit = thermal_circuit(&c)?;
        let sld = circuit_qfi(&circuit, 0.0, QfiMethod::Sld)?;
        let mut r = Record::default();
        r.input("beta", beta)
            .input("n", n)
            .input("omega_a", c.resolved_omega_a()?);
        r.output("fq_exact", thermal_qfi_exact(n, beta)?.value)
            .output("fq_bound", thermal_qfi_lower_bound(n, beta)?.value)
            .output("fq_sld_oracle", sld.fq_total);
        r.notes.extend(sld.notes);
        Ok(r)
    })?;
    let manifest = json!({
        "figure": "fig2",
        "description": "QFI of a thermal probe versus N: exact sum, lower bound, and SLD oracle on the simulated circuit",
        "parameters": common_parameters(),
        "grid": { "beta": FIG2_BETAS, "n": format!("1..={FIG2_MAX_N}"), "theta": 0.0 },
        "notes": [
            "N grid 1..150",
            "fq_bound is a lower bound derived for N >> 1",
        ],
    });
    Ok(FigureData {
        id: "fig2".into(),
        records,
        manifest,
    })
}

fn fig3(id: &str, jobs: usize) -> Result<FigureData> {
    let thermal = matches!(id, "fig3b" | "fig3d" | "fig3f");
    let (axis, schedule, description) = match id {
        "fig3a" | "fig3b" => (
            "g_t1",
            "synchronous",
            "first evolution time t1 varied, probe frame held at g t1 = pi/2",
        ),
        "fig3c" | "fig3d" => (
            "g_dt",
            "measurement_delay",
            "encoding followed by a delayed ancilla measurement",
        ),
        _ => (
            "g_dt",
            "encoding_delay",
            "ancilla measurement followed by a delayed encoding",
        ),
    };
    let grid: Vec<f64> = (0..FIG3_POINTS)
        .map(|k| PI * k as f64 / (FIG3_POINTS - 1) as f64)
        .collect();
    let points: Vec<(u32, f64)> = FIG3_SPINS
        .iter()
        .flat_map(|&n| grid.iter().map(move |&x| (n, x)))
        .collect();
    let records = par_map(jobs, points, |(n, x)| {
        let mut c = base();
        c.n = n;
        if thermal {
            c.prep = crate::config::PrepKind::Thermal;
            c.beta = FIG3_BETA;
        }
        c.set("schedule", schedule)?;
        if axis == "g_t1" {
            c.frame_t1 = Some(FRAC_PI_2);
            c.t1 = x;
        } else {
            c.dt = x;
        }
        let circuit = thermal_circuit(&c)?;
        let method = if thermal {
            QfiMethod::Sld
        } else {
            QfiMethod::Pure
        };
        let report = circuit_qfi(&circuit, 0.0, method)?;
        let mut r = Record::default();
        r.input(
            "beta",
            if thermal {
                Value::Num(FIG3_BETA)
            } else {
                Value::Missing
            },
        )
        .input(axis, x)
        .input("n", n)
        .input("omega_a", c.resolved_omega_a()?);
        r.output("method", method.name())
            .output("fq_plus_eff", report.fq_plus_eff)
            .output("fq_minus_eff", report.fq_minus_eff)
            .output("fq_total", report.fq_total)
            .output("fq_norm", report.fq_total / f64::from(n * n))
            .output("prob_plus", report.prob_plus)
            .output("prob_minus", report.prob_minus);
        r.notes.extend(report.notes);
        Ok(r)
    })?;
    let prep = if thermal {
        json!({ "prep": "thermal", "beta": FIG3_BETA })
    } else {
        json!({ "prep": "polarized_plus" })
    };
    let manifest = json!({
        "figure": id,
        "description": format!("normalized QFI, {description}"),
        "parameters": common_parameters(),
        "probe": prep,
        "schedule": schedule,
        "grid": { axis: { "start": 0.0, "stop": PI, "points": FIG3_POINTS }, "n": FIG3_SPINS, "theta": 0.0 },
        "notes": ["omega_a uses the frame time pi/2 for every grid point"],
    });
    Ok(FigureData {
        id: id.into(),
        records,
        manifest,
    })
}

fn fig4(jobs: usize) -> Result<FigureData> {
    let mut points = Vec::new();
    for rule in ["parity", "fixed_5g"] {
        for &beta in &FIG4_BETAS {
            for k in 0..FIG4_POINTS {
                points.push((rule, beta, 2.0 * PI * k as f64 / FIG4_POINTS as f64));
            }
        }
    }
    let n2 = f64::from(FIG4_SPINS * FIG4_SPINS);
    let records = par_map(jobs, points, |(rule, beta, theta)| {
        let mut c = base();
        c.n = FIG4_SPINS;
        c.prep = crate::config::PrepKind::Thermal;
        c.beta = beta;
        c.theta = theta;
        if rule == "fixed_5g" {
            c.omega_a = crate::config::OmegaA::Value(FIG4_FIXED_OMEGA_A);
        }
        let circuit = thermal_circuit(&c)?;
        let fq = circuit_qfi(&circuit, theta, QfiMethod::Sld)?;
        let fc = cfi(&JzReadout(&circuit), theta, DerivativeMethod::Analytic)?;
        let mut r = Record::default();
        r.input("beta", beta)
            .input("n", FIG4_SPINS)
            .input("omega_a", c.resolved_omega_a()?)
            .input("omega_a_rule", rule)
            .input("theta", theta);
        r.output("fc", fc.value)
            .output("fq", fq.fq_total)
            .output("fc_norm", fc.value / n2)
            .output("fq_norm", fq.fq_total / n2);
        r.notes.extend(fq.notes);
        Ok(r)
    })?;
    let manifest = json!({
        "figure": "fig4",
        "description": "normalized CFI of the Jz readout and QFI versus theta for thermal probes",
        "parameters": common_parameters(),
        "grid": {
            "n": FIG4_SPINS,
            "beta": FIG4_BETAS,
            "theta": { "start": 0.0, "stop_exclusive": 2.0 * PI, "points": FIG4_POINTS },
            "omega_a_rule": ["parity", "fixed_5g"],
        },
        "notes": [
            "omega_a_rule = parity uses the unitarity condition (5.5 at N = 10)",
            "omega_a_rule = fixed_5g uses omega_a = 5",
        ],
    });
    Ok(FigureData {
        id: "fig4".into(),
        records,
        manifest,
    })
}

/// `<stem>.manifest.json` next to the data file.
pub fn manifest_path(data: &Path) -> PathBuf {
    let stem = data
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "figure".into());
    data.with_file_name(format!("{stem}.manifest.json"))
}

/// Writes the dataset and its manifest; returns both paths.
pub fn write(data: &FigureData, out: Option<&Path>, format: Format) -> Result<[PathBuf; 2]> {
    let data_path = match out {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(format!("{}.{}", data.id, format.name())),
    };
    let manifest_path = manifest_path(&data_path);
    let mut manifest = data.manifest.clone();
    manifest["records"] = json!(data.records.len());
    manifest["format"] = json!(format.name());
    manifest["data_file"] = json!(data_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned()));
    let body = encode(&data.records, format)?;
    std::fs::write(&data_path, body)
        .map_err(|e| CliError::io(data_path.display().to_string(), e))?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text)
        .map_err(|e| CliError::io(manifest_path.display().to_string(), e))?;
    Ok([data_path, manifest_path])
}
