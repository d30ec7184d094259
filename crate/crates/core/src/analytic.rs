//! Closed-form Fisher information expressions for the measured circuit.
//!
//! These are fast paths for users and independent targets for the
//! simulator. Thermal sums are evaluated with the largest exponent shifted
//! out so that βN in the thousands stays finite.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{Ensemble, Operator};
use crate::spin::{self, SpinDimension};

/// Value of a closed-form expression with the conditions it relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormResult {
    pub value: f64,
    pub formula: &'static str,
    pub note: &'static str,
    /// The expression was 0/0 and its continuous extension was returned.
    pub degenerate: bool,
}

impl ClosedFormResult {
    fn new(value: f64, formula: &'static str, note: &'static str) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Domain(format!("{formula} evaluated to {value}")));
        }
        Ok(ClosedFormResult {
            value,
            formula,
            note,
            degenerate: false,
        })
    }
}

const OPTIMIZED: &str =
    "optimized probe, ancilla |+>, t1 = t1_opt, omega_A from the unitarity condition";

fn check_spins(n: u32) -> Result<f64> {
    SpinDimension::new(n)?;
    Ok(n as f64)
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::params("non-finite argument"))
    }
}

/// N²: the Heisenberg limit reached by the optimized circuit.
pub fn hl_qfi(n: u32) -> Result<ClosedFormResult> {
    let n = check_spins(n)?;
    ClosedFormResult::new(n * n, "hl_qfi", OPTIMIZED)
}

/// One term c_m (a|j,m⟩ + b e^{−iφ}|j,−m⟩) of a probe superposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpositionComponent {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub phi: f64,
    pub m: f64,
}

/// 4 Σ m² |c_m|² (1 − 4a_m²b_m² sin²φ_m).
pub fn superposition_qfi(components: &[SuperpositionComponent]) -> Result<ClosedFormResult> {
    if components.is_empty() {
        return Err(Error::params("empty superposition"));
    }
    let mut weight = 0.0;
    let mut value = 0.0;
    for k in components {
        check_finite(&[k.c, k.a, k.b, k.phi, k.m])?;
        if (k.a * k.a + k.b * k.b - 1.0).abs() > 1e-10 {
            return Err(Error::params(format!(
                "component m = {} needs a² + b² = 1",
                k.m
            )));
        }
        let c2 = k.c * k.c;
        weight += c2;
        let s = k.phi.sin();
        value += 4.0 * k.m * k.m * c2 * (1.0 - 4.0 * k.a * k.a * k.b * k.b * s * s);
    }
    if (weight - 1.0).abs() > 1e-10 {
        return Err(Error::params(format!("weights sum to {weight}, not 1")));
    }
    ClosedFormResult::new(value, "superposition_qfi", OPTIMIZED)
}

/// Exact thermal sum (4/Z)Σ m² e^{−mβ} − (8/Z)Σ m²/(e^{−mβ} + e^{mβ}).
pub fn thermal_qfi_exact(n: u32, beta: f64) -> Result<ClosedFormResult> {
    check_spins(n)?;
    check_finite(&[beta])?;
    let dim = SpinDimension::new(n)?;
    let shift = dim.j() * beta.abs();
    let mut z = 0.0;
    let mut first = 0.0;
    let mut second = 0.0;
    for m in dim.m_values() {
        let w = (-m * beta - shift).exp();
        z += w;
        first += m * m * w;
        // e^{−s}/(e^{−mβ} + e^{mβ}), both exponents non-negative.
        second += m * m / ((shift - m * beta).exp() + (shift + m * beta).exp());
    }
    let value = (4.0 * first - 8.0 * second) / z;
    ClosedFormResult::new(value, "thermal_qfi_exact", OPTIMIZED)
}

/// N² − 4N/(e^β−1) + 4(e^β+1)/(e^β−1)² − (π³/β³)e^{−Nβ/2}(1−e^{−β}).
pub fn thermal_qfi_lower_bound(n: u32, beta: f64) -> Result<ClosedFormResult> {
    let n = check_spins(n)?;
    check_finite(&[beta])?;
    if beta <= 0.0 {
        return Err(Error::Domain("thermal bound needs beta > 0".into()));
    }
    let em1 = beta.exp_m1();
    let value = n * n - 4.0 * n / em1 + 4.0 * (em1 + 2.0) / (em1 * em1)
        - PI.powi(3) / beta.powi(3) * (-n * beta / 2.0).exp() * -(-beta).exp_m1();
    ClosedFormResult::new(
        value,
        "thermal_qfi_lower_bound",
        "integral approximation derived for N >> 1; a lower bound, not an equality target",
    )
}

/// thermal_qfi_exact − thermal_qfi_lower_bound without cancellation.
///
/// The first three terms of the bound are 4⟨m²⟩ for the untruncated
/// geometric distribution, so the gap splits into a truncation correction
/// and the difference between Σ m²/cosh and its integral; both carry an
/// explicit small prefactor.
pub fn thermal_bound_gap(n: u32, beta: f64) -> Result<f64> {
    let nf = check_spins(n)?;
    check_finite(&[beta])?;
    if beta <= 0.0 {
        return Err(Error::Domain("thermal bound needs beta > 0".into()));
    }
    let dim = SpinDimension::new(n)?;
    let j = dim.j();
    let x = (-beta).exp();
    let one_minus_x = -(-beta).exp_m1();
    let tail = ((nf + 1.0) * -beta).exp();
    let one_minus_tail = -((nf + 1.0) * -beta).exp_m1();

    // Truncated ⟨m²⟩ with r = m + j and weights x^r (1−x)/(1−x^{N+1}).
    let mut trunc = 0.0;
    let mut w = 1.0;
    for r in 0..=n {
        let m = r as f64 - j;
        trunc += m * m * w;
        w *= x;
    }
    trunc *= one_minus_x / one_minus_tail;
    let a = j + 1.0;
    let shifted_tail =
        a * a + 2.0 * a * x / one_minus_x + x * (1.0 + x) / (one_minus_x * one_minus_x);
    let truncation = 4.0 * tail * (trunc - shifted_tail);

    let s: f64 = dim
        .m_values()
        .map(|m| {
            let e = (-m.abs() * beta).exp();
            m * m * e / (1.0 + e * e)
        })
        .sum();
    let integral = PI.powi(3) / beta.powi(3) - 8.0 * s / one_minus_tail;
    let discretization = (-nf * beta / 2.0).exp() * one_minus_x * integral;
    Ok(truncation + discretization)
}

/// N²[1 − sin^{2N}(gΔt)] / (1 − sin^{2N}(gΔt) cos²[2ωA(Δt + t1opt) + Nθ]).
///
/// Where numerator and denominator both vanish the continuous extension N²
/// is returned with `degenerate` set.
pub fn measurement_delay_qfi(
    n: u32,
    dt: f64,
    omega_a: f64,
    t1_opt: f64,
    theta: f64,
    g: f64,
) -> Result<ClosedFormResult> {
    let nf = check_spins(n)?;
    check_finite(&[dt, omega_a, t1_opt, theta, g])?;
    let s = (g * dt).sin().powi(2 * n as i32);
    let cos2 = (2.0 * omega_a * (dt + t1_opt) + nf * theta).cos().powi(2);
    let note = "optimized probe and ancilla; encoding before a delayed measurement";
    if 1.0 - s <= 1e-14 && 1.0 - cos2 <= 1e-14 {
        let mut r = ClosedFormResult::new(nf * nf, "measurement_delay_qfi", note)?;
        r.degenerate = true;
        return Ok(r);
    }
    ClosedFormResult::new(
        nf * nf * (1.0 - s) / (1.0 - s * cos2),
        "measurement_delay_qfi",
        note,
    )
}

/// (N/4){2(N+1) + (N−1)[cos(2Δt(g−ωP)) + cos(2Δt(g+ωP))]}.
pub fn encoding_delay_qfi(n: u32, dt: f64, g: f64, omega_p: f64) -> Result<ClosedFormResult> {
    let nf = check_spins(n)?;
    check_finite(&[dt, g, omega_p])?;
    let osc = (2.0 * dt * (g - omega_p)).cos() + (2.0 * dt * (g + omega_p)).cos();
    ClosedFormResult::new(
        nf / 4.0 * (2.0 * (nf + 1.0) + (nf - 1.0) * osc),
        "encoding_delay_qfi",
        "optimized probe and ancilla; measurement before a delayed encoding",
    )
}

/// N² − N(N−1)(g² + ωP²)Δt², the small-delay expansion of
/// [`encoding_delay_qfi`].
pub fn encoding_delay_qfi_quadratic(
    n: u32,
    dt: f64,
    g: f64,
    omega_p: f64,
) -> Result<ClosedFormResult> {
    let nf = check_spins(n)?;
    check_finite(&[dt, g, omega_p])?;
    ClosedFormResult::new(
        nf * nf - nf * (nf - 1.0) * (g * g + omega_p * omega_p) * dt * dt,
        "encoding_delay_qfi_quadratic",
        "second order in the delay; accurate only for small g*dt and omega_P*dt",
    )
}

/// Branch probabilities [1 ± cos(2ωA t1) cos^N(g t1)]/2 for a polarized
/// optimized probe and ancilla |+⟩.
pub fn general_t1_probability(n: u32, omega_a: f64, g: f64, t1: f64) -> Result<(f64, f64)> {
    check_spins(n)?;
    check_finite(&[omega_a, g, t1])?;
    let k = (2.0 * omega_a * t1).cos() * (g * t1).cos().powi(n as i32);
    Ok(((1.0 + k) / 2.0, (1.0 - k) / 2.0))
}

/// QFI of the uncoupled probe: generator J_φ with φ = ωP t1.
///
/// Evaluated directly as 4Σp_i⟨ψi|J_φ²|ψi⟩ − 8Σ p_ip_j/(p_i+p_j)|⟨ψi|J_φ|ψj⟩|².
pub fn no_ancilla_qfi(ensemble: &Ensemble, omega_p: f64, t1: f64) -> Result<ClosedFormResult> {
    check_finite(&[omega_p, t1])?;
    let d = ensemble.dim();
    let spins = u32::try_from(d - 1).map_err(|_| Error::params("dimension too large"))?;
    let dim = SpinDimension::new(spins)?;
    let j_phi: Operator = spin::frame_operator(dim, omega_p * t1);
    let jm = j_phi.matrix();
    let j2 = jm * jm;
    let mut value = 0.0;
    for (p, s) in ensemble.weights.iter().zip(&ensemble.states) {
        if *p > 0.0 {
            value += 4.0 * p * s.amplitudes().dotc(&(&j2 * s.amplitudes())).re;
        }
    }
    for (pi, si) in ensemble.weights.iter().zip(&ensemble.states) {
        for (pj, sj) in ensemble.weights.iter().zip(&ensemble.states) {
            if pi + pj > 1e-12 && *pi > 0.0 && *pj > 0.0 {
                let elem = si.amplitudes().dotc(&(jm * sj.amplitudes()));
                value -= 8.0 * pi * pj / (pi + pj) * elem.norm_sqr();
            }
        }
    }
    ClosedFormResult::new(value, "no_ancilla_qfi", "ancilla decoupled (g = 0)")
}

/// N²: CFI of the Jz readout of the optimized circuit, for any t2.
pub fn cfi_optimal(n: u32) -> Result<ClosedFormResult> {
    let n = check_spins(n)?;
    ClosedFormResult::new(
        n * n,
        "cfi_optimal",
        "optimized probe, projective Jz readout, any t2",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn heisenberg_values() {
        assert_eq!(hl_qfi(1).unwrap().value, 1.0);
        assert_eq!(hl_qfi(10).unwrap().value, 100.0);
        assert_eq!(cfi_optimal(2).unwrap().value, 4.0);
        assert!(hl_qfi(0).is_err());
    }

    #[test]
    fn superposition_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let one = |a: f64, b: f64, phi: f64, m: f64| SuperpositionComponent {
            c: 1.0,
            a,
            b,
            phi,
            m,
        };
        assert!((superposition_qfi(&[one(r, r, 0.0, 2.5)]).unwrap().value - 25.0).abs() < 1e-12);
        assert!(
            superposition_qfi(&[one(r, r, PI / 2.0, 2.5)])
                .unwrap()
                .value
                .abs()
                < 1e-12
        );
        assert!(
            (superposition_qfi(&[one(1.0, 0.0, 0.3, 2.0)]).unwrap().value - 16.0).abs() < 1e-12
        );
        let two = [
            SuperpositionComponent {
                c: r,
                a: 1.0,
                b: 0.0,
                phi: 0.0,
                m: 2.0,
            },
            SuperpositionComponent {
                c: r,
                a: 1.0,
                b: 0.0,
                phi: 0.0,
                m: 1.0,
            },
        ];
        assert!((superposition_qfi(&two).unwrap().value - 10.0).abs() < 1e-12);
        assert!(superposition_qfi(&[one(0.5, 0.5, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn thermal_exact_reference_values() {
        let cases = [
            (10, 2.0, 94.561199454654765),
            (10, 1.0, 81.636609850916052),
            (2, 1.0, 1.7523074633464886),
            (10, 0.1, 6.5647155169289938),
            (10, 0.5, 58.722360416772817),
            (200, 0.1, 33154.501161584536),
            (4, 1.0, 10.25315549150573),
            (1, 1.0, 0.21355226703407259),
            (50, 16.0, 2499.9999779431034),
        ];
        for (n, beta, expected) in cases {
            let v = thermal_qfi_exact(n, beta).unwrap().value;
            assert!(rel(v, expected) < 1e-12, "N={n} beta={beta}: {v}");
        }
    }

    #[test]
    fn thermal_exact_limits() {
        for n in [1, 7, 40] {
            let nn = (n * n) as f64;
            assert!(rel(thermal_qfi_exact(n, 200.0).unwrap().value, nn) < 1e-9);
            assert!(rel(thermal_qfi_exact(n, -200.0).unwrap().value, nn) < 1e-9);
            assert!(thermal_qfi_exact(n, 0.0).unwrap().value.abs() < 1e-12);
        }
        assert!(thermal_qfi_exact(2000, 5.0).unwrap().value.is_finite());
    }

    #[test]
    fn thermal_bound_values() {
        assert!(
            rel(
                thermal_qfi_lower_bound(10, 1.0).unwrap().value,
                81.62635187831275
            ) < 1e-12
        );
        assert!(
            rel(
                thermal_qfi_lower_bound(10, 0.5).unwrap().value,
                55.504336586885838
            ) < 1e-12
        );
        assert!(rel(thermal_qfi_lower_bound(30, 40.0).unwrap().value, 900.0) < 1e-12);
        assert!(thermal_qfi_lower_bound(10, 0.0).is_err());
        assert!(thermal_qfi_lower_bound(10, -1.0).is_err());
    }

    #[test]
    fn bound_gap_reference_values() {
        let cases = [
            (10, 0.5, 3.21802382988698),
            (40, 1.0, 8.36960158404729e-12),
            (100, 0.5, 1.94865843038918e-17),
            (60, 2.0, 8.49914092428607e-28),
            (200, 2.0, 1.34322128118341e-88),
            (200, 0.5, 2.01445207456716e-28),
            (150, 1.0, 1.08625329116144e-35),
            (7, 1.0, 0.120043272521733),
            (3, 2.0, 0.0269906412177038),
        ];
        for (n, beta, expected) in cases {
            let gap = thermal_bound_gap(n, beta).unwrap();
            assert!(rel(gap, expected) < 1e-6, "N={n} beta={beta}: {gap:e}");
        }
        let direct = thermal_qfi_exact(10, 0.5).unwrap().value
            - thermal_qfi_lower_bound(10, 0.5).unwrap().value;
        assert!(rel(thermal_bound_gap(10, 0.5).unwrap(), direct) < 1e-12);
    }

    #[test]
    fn measurement_delay_examples() {
        let t1 = PI / 2.0;
        assert_eq!(
            measurement_delay_qfi(10, 0.0, 5.5, t1, 0.0, 1.0)
                .unwrap()
                .value,
            100.0
        );
        let v = measurement_delay_qfi(10, PI / 2.0, 5.5, t1, 0.3, 1.0).unwrap();
        assert!(v.value.abs() < 1e-12 && !v.degenerate);
        // cos²[2ωA(π/2 + π/2)] = 1 with ωA = 5.5
        let d = measurement_delay_qfi(10, PI / 2.0, 5.5, t1, 0.0, 1.0).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.value, 100.0);
    }

    #[test]
    fn measurement_delay_mirror_symmetry() {
        // sin²(gΔt) is symmetric about π/2; matching the cosine argument via θ
        // leaves the value unchanged.
        let (n, wa, t1) = (6u32, 5.5, PI / 2.0);
        for &x in &[0.2, 0.7, 1.1] {
            let theta = 0.4;
            let a = measurement_delay_qfi(n, x, wa, t1, theta, 1.0)
                .unwrap()
                .value;
            let mirrored = PI - x;
            let theta_m = theta + 2.0 * wa * (x - mirrored) / n as f64;
            let b = measurement_delay_qfi(n, mirrored, wa, t1, theta_m, 1.0)
                .unwrap()
                .value;
            assert!(rel(a, b) < 1e-10);
        }
    }

    #[test]
    fn encoding_delay_examples() {
        assert!(rel(encoding_delay_qfi(10, 0.0, 1.0, 10.0).unwrap().value, 100.0) < 1e-15);
        let v = encoding_delay_qfi(10, 0.01, 1.0, 10.0).unwrap().value;
        let expected = 2.5 * (22.0 + 9.0 * (0.18f64.cos() + 0.22f64.cos()));
        assert!(rel(v, expected) < 1e-14);
        assert!((v - 99.09).abs() < 0.01);
        assert!(rel(encoding_delay_qfi(10, PI, 1.0, 10.0).unwrap().value, 100.0) < 1e-12);
        assert!(
            rel(
                encoding_delay_qfi_quadratic(10, 0.01, 1.0, 10.0)
                    .unwrap()
                    .value,
                99.091
            ) < 1e-14
        );
    }

    #[test]
    fn quadratic_expansion_is_fourth_order() {
        let diff = |dt: f64| {
            encoding_delay_qfi(10, dt, 1.0, 10.0).unwrap().value
                - encoding_delay_qfi_quadratic(10, dt, 1.0, 10.0)
                    .unwrap()
                    .value
        };
        let ratio = diff(0.01) / diff(0.005);
        assert!((ratio - 16.0).abs() < 1.6, "ratio {ratio}");
    }

    #[test]
    fn general_t1_examples() {
        let (p, m) = general_t1_probability(7, 5.0, 1.0, PI / 2.0).unwrap();
        assert!((p - 0.5).abs() < 1e-15 && (m - 0.5).abs() < 1e-15);
        assert_eq!(
            general_t1_probability(3, 2.3, 1.0, 0.0).unwrap(),
            (1.0, 0.0)
        );
    }

    #[test]
    fn no_ancilla_examples() {
        use crate::linalg::{Basis, PureVector};
        let dim = SpinDimension::new(4).unwrap();
        let (wp, t1) = (10.0, PI / 2.0);
        let basis = spin::frame_basis(dim, wp * t1);
        let ghz = PureVector::normalize(basis.column(0) + basis.column(4), Basis::ProbeJz).unwrap();
        let v = no_ancilla_qfi(&Ensemble::pure(ghz), wp, t1).unwrap().value;
        assert!((v - 16.0).abs() < 1e-10);
        let polarized =
            PureVector::normalized(basis.column(0).into_owned(), Basis::ProbeJz).unwrap();
        assert!(
            no_ancilla_qfi(&Ensemble::pure(polarized), wp, t1)
                .unwrap()
                .value
                .abs()
                < 1e-10
        );
    }
}
