//! Validation suite: every acceptance check with its measured residual.
//!
//! Comparisons with reference values that the exact expressions do not
//! reproduce are reported as WARN, never FAIL.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;
use spinmetro_core::analytic::{
    encoding_delay_qfi, encoding_delay_qfi_quadratic, measurement_delay_qfi, thermal_bound_gap,
    thermal_qfi_exact,
};
use spinmetro_core::{
    cfi, circuit_qfi, AncillaPrep, Circuit, DerivativeMethod, JzReadout, ProbePrep, ProtocolParams,
    QfiMethod, Schedule, Sign,
};

use crate::figures;
use crate::records::{to_csv, Record};

pub const CRITERIA: std::ops::RangeInclusive<u8> = 1..=12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
        })
    }
}

/// One measured comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn bound(criterion: u8, name: &str, measured: f64, threshold: f64, detail: String) -> Self {
        Check {
            criterion,
            name: name.into(),
            status: if measured <= threshold {
                Status::Pass
            } else {
                Status::Fail
            },
            measured,
            threshold,
            detail,
        }
    }

    fn warn_unless(
        criterion: u8,
        name: &str,
        measured: f64,
        threshold: f64,
        detail: String,
    ) -> Self {
        let mut c = Check::bound(criterion, name, measured, threshold, detail);
        if c.status == Status::Fail {
            c.status = Status::Warn;
        }
        c
    }

    fn error(criterion: u8, name: &str, err: impl fmt::Display) -> Self {
        Check {
            criterion,
            name: name.into(),
            status: Status::Fail,
            measured: f64::NAN,
            threshold: f64::NAN,
            detail: format!("error: {err}"),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {}: measured {:.3e}, threshold {:.3e}; {}",
            self.status, self.criterion, self.name, self.measured, self.threshold, self.detail
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "criterion": self.criterion,
            "name": self.name,
            "status": self.status.to_string(),
            "measured": finite_or_null(self.measured),
            "threshold": finite_or_null(self.threshold),
            "detail": self.detail,
        })
    }
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Agreement tolerances; `--tol` replaces every default agreement tolerance.
/// Reference-value bands (e.g. 0.946 ± 0.005) are not affected.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tolerances {
    pub override_tol: Option<f64>,
}

impl Tolerances {
    pub fn agreement(&self, default: f64) -> f64 {
        self.override_tol.unwrap_or(default)
    }
}

/// Overall status of a criterion: FAIL if any check failed.
pub fn summarize(checks: &[Check]) -> Status {
    if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else {
        Status::Pass
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn circuit(
    params: ProtocolParams,
    prep: &ProbePrep,
    schedule: Schedule,
) -> spinmetro_core::Result<Circuit> {
    Circuit::new(params, prep, AncillaPrep::Plus, schedule)
}

fn optimized(n: u32) -> spinmetro_core::Result<ProtocolParams> {
    ProtocolParams::optimized(n)
}

type Outcome = std::result::Result<Vec<Check>, String>;

/// Runs one criterion; an internal error becomes a FAIL entry.
pub fn criterion(k: u8, tol: &Tolerances) -> Vec<Check> {
    let (name, result): (&str, Outcome) = match k {
        1 => ("heisenberg_scaling", c1(tol)),
        2 => ("branch_probabilities", c2(tol)),
        3 => ("thermal_values", c3(tol)),
        4 => ("thermal_bound_ordering", c4(tol)),
        5 => ("measurement_delay", c5(tol)),
        6 => ("encoding_delay", c6(tol)),
        7 => ("cfi_saturation", c7(tol)),
        8 => ("cfi_bound", c8(tol)),
        9 => ("general_t1", c9(tol)),
        10 => ("oracle_equivalence", c10(tol)),
        11 => ("decoupled_baseline", c11(tol)),
        12 => ("determinism", c12(tol)),
        _ => return vec![Check::error(k, "unknown", format!("no criterion {k}"))],
    };
    result.unwrap_or_else(|e| vec![Check::error(k, name, e)])
}

pub fn run_all(tol: &Tolerances) -> Vec<Check> {
    CRITERIA.flat_map(|k| criterion(k, tol)).collect()
}

fn s<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn c1(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-8);
    let preps = [
        ("polarized_plus", ProbePrep::PolarizedOpt(Sign::Plus)),
        ("polarized_minus", ProbePrep::PolarizedOpt(Sign::Minus)),
        (
            "superposed_0.6_0.8",
            ProbePrep::SuperposedOpt {
                a: 0.6,
                b: 0.8,
                phi: 0.0,
            },
        ),
    ];
    let mut checks = Vec::new();
    for (label, prep) in preps {
        let mut worst = (0.0, 0);
        for n in 1..=60 {
            let c = circuit(optimized(n).map_err(s)?, &prep, Schedule::Synchronous).map_err(s)?;
            let r = circuit_qfi(&c, 0.0, QfiMethod::Pure).map_err(s)?;
            let e = rel(r.fq_total, f64::from(n * n));
            if e > worst.0 {
                worst = (e, n);
            }
        }
        checks.push(Check::bound(
            1,
            &format!("fq_total = N^2, {label}, N = 1..60"),
            worst.0,
            t,
            format!("worst at N = {}", worst.1),
        ));
    }
    Ok(checks)
}

fn c2(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-10);
    let thetas: Vec<f64> = (0..50).map(|k| 2.0 * PI * k as f64 / 50.0).collect();
    let mut cases: Vec<(String, u32, ProbePrep)> = (1..=20)
        .map(|n| {
            (
                format!("polarized N={n}"),
                n,
                ProbePrep::PolarizedOpt(Sign::Plus),
            )
        })
        .collect();
    cases.push((
        "thermal N=10 beta=2".into(),
        10,
        ProbePrep::Thermal { beta: 2.0 },
    ));
    let mut worst = (0.0f64, String::new());
    for (label, n, prep) in cases {
        let c = circuit(optimized(n).map_err(s)?, &prep, Schedule::Synchronous).map_err(s)?;
        for &theta in &thetas {
            let p = c.probabilities(theta).map_err(s)?;
            let dev = (p[0] - 0.5).abs().max((p[1] - 0.5).abs());
            if dev >= worst.0 {
                worst = (dev, label.clone());
            }
        }
    }
    Ok(vec![Check::bound(
        2,
        "branch probabilities 1/2 on a 50-point theta grid",
        worst.0,
        t,
        format!("worst case {}", worst.1),
    )])
}

fn thermal_sld(n: u32, beta: f64) -> std::result::Result<f64, String> {
    let c = circuit(
        optimized(n).map_err(s)?,
        &ProbePrep::Thermal { beta },
        Schedule::Synchronous,
    )
    .map_err(s)?;
    Ok(circuit_qfi(&c, 0.0, QfiMethod::Sld).map_err(s)?.fq_total)
}

fn c3(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-6);
    let mut checks = Vec::new();
    for (beta, target, band) in [(2.0, 0.946, 0.005), (1.0, 0.82, 0.01)] {
        let n = 10;
        let n2 = 100.0;
        let exact = thermal_qfi_exact(n, beta).map_err(s)?.value;
        let sld = thermal_sld(n, beta)?;
        for (label, v) in [("closed form", exact), ("SLD oracle", sld)] {
            checks.push(Check::bound(
                3,
                &format!("fq/N^2 at N=10, beta={beta}, {label}"),
                (v / n2 - target).abs(),
                band,
                format!("value {:.6}, target {target} +- {band}", v / n2),
            ));
        }
        checks.push(Check::bound(
            3,
            &format!("closed form vs SLD oracle at N=10, beta={beta}"),
            rel(sld, exact),
            t,
            format!("exact {exact:.12}, sld {sld:.12}"),
        ));
    }
    // Reference values the exact sum does not reproduce.
    let exact = thermal_qfi_exact(2, 1.0).map_err(s)?.value / 4.0;
    let sld = thermal_sld(2, 1.0)? / 4.0;
    checks.push(Check::warn_unless(
        3,
        "reference fq/N^2 = 0.75 at N=2, beta=1",
        (exact - 0.75).abs(),
        0.01,
        format!("closed form {exact:.6}, SLD oracle {sld:.6}, reference 0.75"),
    ));
    let exact = thermal_qfi_exact(10, 0.1).map_err(s)?.value / 100.0;
    let sld = thermal_sld(10, 0.1)? / 100.0;
    checks.push(Check::warn_unless(
        3,
        "reference bound 0.415 at N=10, beta=0.1",
        (exact - 0.415).abs(),
        0.005,
        format!("closed form {exact:.6}, SLD oracle {sld:.6}, reference 0.415"),
    ));
    Ok(checks)
}

fn c4(tol: &Tolerances) -> Outcome {
    let mut negative = 0usize;
    let mut smallest = (f64::INFINITY, 0, 0.0);
    for n in (10..=200).step_by(10) {
        for beta in [0.5, 1.0, 2.0] {
            let gap = thermal_bound_gap(n, beta).map_err(s)?;
            if gap <= 0.0 {
                negative += 1;
            }
            if gap < smallest.0 {
                smallest = (gap, n, beta);
            }
        }
    }
    let exact = thermal_qfi_exact(50, 16.0).map_err(s)?.value;
    Ok(vec![
        Check::bound(
            4,
            "exact >= bound, N = 10..200 step 10, beta in {0.5, 1, 2}",
            negative as f64,
            0.0,
            format!(
                "count of non-positive gaps; smallest gap {:.3e} at N={}, beta={}",
                smallest.0, smallest.1, smallest.2
            ),
        ),
        Check::bound(
            4,
            "exact within 0.1% of N^2 at N=50, beta=16",
            rel(exact, 2500.0),
            tol.agreement(1e-3).max(1e-3),
            format!("exact {exact:.9}"),
        ),
    ])
}

fn c5(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-8);
    let mut checks = Vec::new();
    for n in [2u32, 10] {
        let params = optimized(n).map_err(s)?;
        let mut worst = (0.0, 0.0);
        let mut at_zero = f64::NAN;
        for k in 0..=30 {
            let dt = 0.05 * k as f64;
            let c = circuit(
                params,
                &ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::MeasurementDelay(dt),
            )
            .map_err(s)?;
            let sim = circuit_qfi(&c, 0.0, QfiMethod::Pure).map_err(s)?.fq_total;
            let closed = measurement_delay_qfi(n, dt, params.omega_a, params.t1, 0.0, params.g)
                .map_err(s)?
                .value;
            let e = rel(sim, closed);
            if e > worst.0 {
                worst = (e, dt);
            }
            if k == 0 {
                at_zero = rel(sim, f64::from(n * n));
            }
        }
        checks.push(Check::bound(
            5,
            &format!("simulation vs closed form, N={n}, g dt = 0..1.5"),
            worst.0,
            t,
            format!("worst at g dt = {:.2}", worst.1),
        ));
        checks.push(Check::bound(
            5,
            &format!("dt = 0 gives N^2, N={n}"),
            at_zero,
            t,
            String::new(),
        ));
    }
    Ok(checks)
}

fn c6(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-8);
    let mut checks = Vec::new();
    for n in [2u32, 10] {
        let params = optimized(n).map_err(s)?;
        let sim = |dt: f64| -> std::result::Result<f64, String> {
            let c = circuit(
                params,
                &ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::EncodingDelay(dt),
            )
            .map_err(s)?;
            Ok(circuit_qfi(&c, 0.0, QfiMethod::Pure).map_err(s)?.fq_total)
        };
        let mut worst = (0.0, 0.0);
        for k in 0..=64 {
            let dt = PI * k as f64 / 64.0;
            let closed = encoding_delay_qfi(n, dt, params.g, params.omega_p)
                .map_err(s)?
                .value;
            // Relative to N^2: the closed form has near-zeros on this grid.
            let e = (sim(dt)? - closed).abs() / f64::from(n * n);
            if e > worst.0 {
                worst = (e, dt);
            }
        }
        checks.push(Check::bound(
            6,
            &format!("simulation vs closed form, N={n}, g dt in [0, pi]"),
            worst.0,
            t,
            format!("error relative to N^2, worst at g dt = {:.4}", worst.1),
        ));
        if n > 1 {
            let err = |dt: f64| -> std::result::Result<f64, String> {
                let full = encoding_delay_qfi(n, dt, params.g, params.omega_p)
                    .map_err(s)?
                    .value;
                let quad = encoding_delay_qfi_quadratic(n, dt, params.g, params.omega_p)
                    .map_err(s)?
                    .value;
                Ok(full - quad)
            };
            let h = 0.01;
            let ratio = err(h)? / err(h / 2.0)?;
            checks.push(Check::bound(
                6,
                &format!("quadratic form error is fourth order, N={n}"),
                (ratio / 16.0 - 1.0).abs(),
                0.1,
                format!("error ratio {ratio:.4} for dt halved from {h}"),
            ));
        }
        checks.push(Check::bound(
            6,
            &format!("g dt = pi recovers N^2, N={n}"),
            rel(sim(PI)?, f64::from(n * n)),
            t,
            String::new(),
        ));
    }
    Ok(checks)
}

fn c7(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-8);
    let mut worst = (0.0, 0, 0.0);
    for n in [2u32, 5, 10] {
        for t2 in [0.0, 0.7, 3.1] {
            let mut p = optimized(n).map_err(s)?;
            p.t2 = t2;
            let c = circuit(
                p,
                &ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::Synchronous,
            )
            .map_err(s)?;
            for theta in [0.25, 1.3] {
                let fc = cfi(&JzReadout(&c), theta, DerivativeMethod::Analytic).map_err(s)?;
                let e = rel(fc.value, f64::from(n * n));
                if e > worst.0 {
                    worst = (e, n, t2);
                }
            }
        }
    }
    Ok(vec![Check::bound(
        7,
        "Jz readout CFI = N^2, N in {2, 5, 10}, g t2 in {0, 0.7, 3.1}",
        worst.0,
        t,
        format!("worst at N={}, t2={}", worst.1, worst.2),
    )])
}

fn fig4_max_norm(records: &[Record], rule: &str, beta: f64) -> f64 {
    records
        .iter()
        .filter(|r| r.get("omega_a_rule") == Some(&rule.into()) && r.num("beta") == Some(beta))
        .filter_map(|r| r.num("fc_norm"))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn c8(_tol: &Tolerances) -> Outcome {
    let data = figures::generate("fig4", 0).map_err(s)?;
    let mut excess = f64::NEG_INFINITY;
    for r in &data.records {
        let (fc, fq) = (
            r.num("fc").unwrap_or(f64::NAN),
            r.num("fq").unwrap_or(f64::NAN),
        );
        excess = excess.max(fc - fq);
    }
    let fixed = fig4_max_norm(&data.records, "fixed_5g", 2.0);
    let parity = fig4_max_norm(&data.records, "parity", 2.0);
    let low = fig4_max_norm(&data.records, "fixed_5g", 0.1);
    Ok(vec![
        Check::bound(
            8,
            "CFI <= QFI + 1e-9 on the fig4 grid (both omega_a readings)",
            excess.max(0.0),
            1e-9,
            format!(
                "largest fc - fq = {excess:.3e} over {} points",
                data.records.len()
            ),
        ),
        Check::bound(
            8,
            "max CFI/N^2 at beta=2 with omega_a = 5",
            (fixed - 0.946).abs(),
            0.005,
            format!("value {fixed:.6}, target 0.946 +- 0.005"),
        ),
        Check::warn_unless(
            8,
            "max CFI/N^2 at beta=2 with the parity-rule omega_a",
            (parity - 0.946).abs(),
            0.005,
            format!("value {parity:.6}, target 0.946 +- 0.005"),
        ),
        Check::warn_unless(
            8,
            "reference max CFI/N^2 = 0.415 at beta=0.1",
            (low - 0.415).abs(),
            0.005,
            format!("omega_a = 5 value {low:.6}, reference 0.415"),
        ),
    ])
}

fn c9(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-6);
    let data = figures::generate("fig3a", 0).map_err(s)?;
    let mut checks = Vec::new();
    for n in [2u32, 10] {
        let n2 = f64::from(n * n);
        let rows: Vec<(f64, f64)> = data
            .records
            .iter()
            .filter(|r| r.num("n") == Some(f64::from(n)))
            .map(|r| {
                (
                    r.num("g_t1").unwrap_or(f64::NAN),
                    r.num("fq_total").unwrap_or(f64::NAN),
                )
            })
            .collect();
        let (arg, peak) =
            rows.iter()
                .copied()
                .fold((f64::NAN, f64::NEG_INFINITY), |best, (x, f)| {
                    if f > best.1 {
                        (x, f)
                    } else {
                        best
                    }
                });
        checks.push(Check::bound(
            9,
            &format!("global maximum N^2 at g t1 = pi/2, N={n}"),
            rel(peak, n2).max((arg - FRAC_PI_2).abs()),
            tol.agreement(1e-8),
            format!("peak {peak:.12} at g t1 = {arg:.6}"),
        ));
        let m = rows.len();
        let asym = (0..m)
            .map(|k| (rows[k].1 - rows[m - 1 - k].1).abs() / n2)
            .fold(0.0, f64::max);
        checks.push(Check::bound(
            9,
            &format!("F(t1) = F(pi - t1), N={n}"),
            asym,
            t,
            "difference relative to N^2".into(),
        ));
    }
    Ok(checks)
}

fn c10(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-6);
    let mut rng = StdRng::seed_from_u64(0x5eed_0010);
    let mut worst = (0.0, String::new());
    for _ in 0..20 {
        let n = rng.random_range(1..=12u32);
        let alpha = rng.random_range(0.0..FRAC_PI_2);
        let phi = rng.random_range(0.0..2.0 * PI);
        let theta = rng.random_range(0.0..2.0 * PI);
        let prep = ProbePrep::SuperposedOpt {
            a: alpha.cos(),
            b: alpha.sin(),
            phi,
        };
        let c = circuit(optimized(n).map_err(s)?, &prep, Schedule::Synchronous).map_err(s)?;
        let values: Vec<f64> = QfiMethod::ALL
            .iter()
            .map(|&m| circuit_qfi(&c, theta, m).map(|r| r.fq_total))
            .collect::<spinmetro_core::Result<_>>()
            .map_err(s)?;
        let spread = values
            .iter()
            .flat_map(|a| values.iter().map(move |b| rel(*a, *b)))
            .fold(0.0, f64::max);
        if spread >= worst.0 {
            worst = (
                spread,
                format!(
                    "N={n}, a={:.4}, b={:.4}, phi={phi:.4}, theta={theta:.4}",
                    alpha.cos(),
                    alpha.sin()
                ),
            );
        }
    }
    Ok(vec![Check::bound(
        10,
        "pure, spectral and SLD agree on 20 random superpositions, N <= 12",
        worst.0,
        t,
        format!("worst {}", worst.1),
    )])
}

fn c11(tol: &Tolerances) -> Outcome {
    let t = tol.agreement(1e-8);
    let mut ghz = 0.0f64;
    let mut polarized = 0.0f64;
    for n in 1..=20 {
        let mut p = optimized(n).map_err(s)?;
        p.g = 0.0;
        let g = circuit(
            p,
            &ProbePrep::SuperposedOpt {
                a: FRAC_1_SQRT_2,
                b: FRAC_1_SQRT_2,
                phi: 0.0,
            },
            Schedule::Synchronous,
        )
        .map_err(s)?;
        ghz = ghz.max(rel(
            circuit_qfi(&g, 0.3, QfiMethod::Pure).map_err(s)?.fq_total,
            f64::from(n * n),
        ));
        let c = circuit(
            p,
            &ProbePrep::PolarizedOpt(Sign::Plus),
            Schedule::Synchronous,
        )
        .map_err(s)?;
        polarized = polarized.max(
            circuit_qfi(&c, 0.3, QfiMethod::Pure)
                .map_err(s)?
                .fq_total
                .abs(),
        );
    }
    Ok(vec![
        Check::bound(
            11,
            "g = 0, GHZ probe in the J_phi basis: QFI = N^2, N = 1..20",
            ghz,
            t,
            "relative".into(),
        ),
        Check::bound(
            11,
            "g = 0, polarized probe: QFI = 0, N = 1..20",
            polarized,
            t,
            "absolute".into(),
        ),
    ])
}

fn c12(_tol: &Tolerances) -> Outcome {
    let first = to_csv(&figures::generate("fig2", 1).map_err(s)?.records).map_err(s)?;
    let second = to_csv(&figures::generate("fig2", 0).map_err(s)?.records).map_err(s)?;
    let differing = first
        .lines()
        .zip(second.lines())
        .filter(|(a, b)| a != b)
        .count()
        + first.lines().count().abs_diff(second.lines().count());
    Ok(vec![Check::bound(
        12,
        "fig2 CSV identical between a serial and a parallel run",
        differing as f64,
        0.0,
        format!("{} bytes, count of differing lines", first.len()),
    )])
}
