//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criterion 12 runs the installed binary twice.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use spinmetro_cli::validate::{self, Check, Status, Tolerances};

const NAMES: [&str; 12] = [
    "Heisenberg scaling, exact",
    "branch probabilities",
    "thermal-state values",
    "thermal bound ordering",
    "measurement delay",
    "encoding delay",
    "CFI saturation",
    "CFI bound",
    "general-t1 structure",
    "oracle equivalence",
    "g = 0 baseline",
    "determinism",
];

fn run_fig2(dir: &Path, tag: &str, jobs: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let out = dir.join(format!("fig2_{tag}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_spinmetro"))
        .args(["figure", "fig2", "--jobs", jobs, "--out"])
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("figure fig2 exited with {status}"));
    }
    let manifest = dir.join(format!("fig2_{tag}.manifest.json"));
    let read = |p: &Path| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()));
    Ok((read(&out)?, read(&manifest)?))
}

/// Two binary runs (serial and default pool) must give identical bytes.
fn determinism() -> Vec<Check> {
    let check = |measured: f64, detail: String| Check {
        criterion: 12,
        name: "repeated `figure fig2` output is byte-identical".into(),
        status: if measured == 0.0 {
            Status::Pass
        } else {
            Status::Fail
        },
        measured,
        threshold: 0.0,
        detail,
    };
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return vec![check(f64::NAN, format!("error: {e}"))],
    };
    let result = match (
        run_fig2(dir.path(), "a", "1"),
        run_fig2(dir.path(), "b", "0"),
    ) {
        (Ok(a), Ok(b)) => {
            let csv_same = a.0 == b.0 && !a.0.is_empty();
            // Manifests name their own data file; compare everything else.
            let strip = |m: &[u8]| {
                String::from_utf8_lossy(m)
                    .replace("fig2_a", "X")
                    .replace("fig2_b", "X")
            };
            let manifest_same = strip(&a.1) == strip(&b.1);
            let mismatches = usize::from(!csv_same) + usize::from(!manifest_same);
            check(
                mismatches as f64,
                format!(
                    "{} CSV bytes; count of differing files (CSV, manifest)",
                    a.0.len()
                ),
            )
        }
        (Err(e), _) | (_, Err(e)) => check(f64::NAN, format!("error: {e}")),
    };
    vec![result]
}

fn main() -> ExitCode {
    let tol = Tolerances::default();
    let mut failed = Vec::new();
    for k in validate::CRITERIA {
        let start = Instant::now();
        let checks = if k == 12 {
            determinism()
        } else {
            validate::criterion(k, &tol)
        };
        let status = validate::summarize(&checks);
        println!(
            "{status} criterion {k:>2} ({}) [{:.1}s]",
            NAMES[usize::from(k) - 1],
            start.elapsed().as_secs_f64()
        );
        for c in &checks {
            println!("       {}", c.line());
        }
        if status == Status::Fail {
            failed.push(k);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", NAMES.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
