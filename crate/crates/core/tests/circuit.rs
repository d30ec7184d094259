use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use spinmetro_core::analytic;
use spinmetro_core::fisher::{self, derivative_agreement, GeneratorSpec};
use spinmetro_core::protocol::{full_hamiltonian, measure_sigma_x};
use spinmetro_core::spin::hermitian_propagator;
use spinmetro_core::{
    cfi, circuit_qfi, AncillaPrep, BranchState, Circuit, DerivativeMethod, JzReadout, ProbePrep,
    ProtocolParams, PureVector, QfiMethod, Schedule, Sign,
};

fn optimized(n: u32) -> ProtocolParams {
    ProtocolParams::optimized(n).unwrap()
}

fn circuit(p: ProtocolParams, prep: ProbePrep, schedule: Schedule) -> Circuit {
    Circuit::new(p, &prep, AncillaPrep::Plus, schedule).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn theta_grid(points: usize) -> impl Iterator<Item = f64> {
    (0..points).map(move |k| 2.0 * PI * k as f64 / points as f64)
}

#[test]
fn optimized_probabilities_are_half_for_every_theta() {
    for n in [1, 4, 9] {
        let c = circuit(
            optimized(n),
            ProbePrep::PolarizedOpt(Sign::Plus),
            Schedule::Synchronous,
        );
        for theta in theta_grid(50) {
            let [p, m] = c.probabilities(theta).unwrap();
            assert!((p - 0.5).abs() < 1e-10 && (m - 0.5).abs() < 1e-10);
        }
    }
}

#[test]
fn optimized_qfi_is_theta_independent() {
    let n = 7;
    let c = circuit(
        optimized(n),
        ProbePrep::PolarizedOpt(Sign::Minus),
        Schedule::Synchronous,
    );
    let values: Vec<f64> = theta_grid(50)
        .map(|t| circuit_qfi(&c, t, QfiMethod::Pure).unwrap().fq_total)
        .collect();
    let spread = values.iter().cloned().fold(f64::MIN, f64::max)
        - values.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread < 1e-8 * 49.0);
}

#[test]
fn zero_delays_reproduce_synchronous_branches() {
    let mut p = optimized(5);
    p.t2 = 0.8;
    let prep = ProbePrep::SuperposedOpt {
        a: 0.6,
        b: 0.8,
        phi: 0.3,
    };
    let reference = circuit(p, prep.clone(), Schedule::Synchronous)
        .outcomes(0.9)
        .unwrap();
    for schedule in [
        Schedule::MeasurementDelay(0.0),
        Schedule::EncodingDelay(0.0),
    ] {
        let other = circuit(p, prep.clone(), schedule).outcomes(0.9).unwrap();
        for (a, b) in reference.iter().zip(&other) {
            let (Some(BranchState::Pure(x)), Some(BranchState::Pure(y))) = (&a.state, &b.state)
            else {
                panic!("expected pure branches");
            };
            assert!((x.overlap_modulus(y) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn evolution_preserves_composite_populations() {
    let p = optimized(3);
    let h = full_hamiltonian(&p).unwrap();
    assert!(h.is_diagonal());
    let u = hermitian_propagator(&h, 1.3).unwrap();
    let v = nalgebra::DVector::from_fn(8, |k, _| {
        spinmetro_core::C64::new(k as f64 + 1.0, 0.5 - k as f64)
    });
    let out = u.apply(&v).unwrap();
    for (a, b) in v.iter().zip(out.iter()) {
        assert!((a.norm_sqr() - b.norm_sqr()).abs() < 1e-12);
    }
}

#[test]
fn general_t1_probability_matches_measurement() {
    for n in [1, 2, 5, 10] {
        for k in 0..=40 {
            let t1 = PI * k as f64 / 40.0;
            let mut p = optimized(n);
            p.t1 = t1;
            p.frame_t1 = Some(FRAC_PI_2);
            let c = circuit(
                p,
                ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::Synchronous,
            );
            let [sim, _] = c.probabilities(0.0).unwrap();
            let (formula, _) = analytic::general_t1_probability(n, p.omega_a, p.g, t1).unwrap();
            assert!((sim - formula).abs() < 1e-10, "N={n} t1={t1}");
        }
    }
}

#[test]
fn methods_agree_on_optimized_pure_states() {
    for n in (1..=20).step_by(3) {
        let c = circuit(
            optimized(n),
            ProbePrep::PolarizedOpt(Sign::Plus),
            Schedule::Synchronous,
        );
        let nn = (n * n) as f64;
        for method in QfiMethod::ALL {
            let r = circuit_qfi(&c, 0.37, method).unwrap();
            assert!(
                rel(r.fq_total, nn) < 1e-6,
                "N={n} {}: {}",
                method.name(),
                r.fq_total
            );
        }
    }
}

#[test]
fn methods_agree_on_thermal_states() {
    for n in [1, 2, 5, 8, 12] {
        for beta in [0.5, 1.0, 2.0] {
            let c = circuit(
                optimized(n),
                ProbePrep::Thermal { beta },
                Schedule::Synchronous,
            );
            let sld = circuit_qfi(&c, 0.2, QfiMethod::Sld).unwrap().fq_total;
            let spectral = circuit_qfi(&c, 0.2, QfiMethod::Spectral).unwrap().fq_total;
            let exact = analytic::thermal_qfi_exact(n, beta).unwrap().value;
            assert!(rel(sld, spectral) < 1e-6, "N={n} beta={beta}");
            assert!(rel(spectral, exact) < 1e-9, "N={n} beta={beta}");
        }
    }
}

#[test]
fn superposition_formula_matches_simulation() {
    for n in [2, 5, 8] {
        let j = n as f64 / 2.0;
        for (a, phi) in [(0.6f64, 0.0), (0.3, 1.1), (0.9, 2.5)] {
            let b = (1.0 - a * a).sqrt();
            let c = circuit(
                optimized(n),
                ProbePrep::SuperposedOpt { a, b, phi },
                Schedule::Synchronous,
            );
            let sim = circuit_qfi(&c, 0.1, QfiMethod::Pure).unwrap().fq_total;
            let formula = analytic::superposition_qfi(&[analytic::SuperpositionComponent {
                c: 1.0,
                a,
                b,
                phi,
                m: j,
            }])
            .unwrap()
            .value;
            assert!(
                (sim - formula).abs() < 1e-9 * (n * n) as f64,
                "N={n} a={a} phi={phi}"
            );
        }
    }
}

#[test]
fn delayed_measurement_matches_closed_form() {
    for n in [2, 10] {
        let p = optimized(n);
        for k in 0..=30 {
            let dt = 0.05 * k as f64;
            let c = circuit(
                p,
                ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::MeasurementDelay(dt),
            );
            let sim = circuit_qfi(&c, 0.0, QfiMethod::Pure).unwrap().fq_total;
            let formula = analytic::measurement_delay_qfi(n, dt, p.omega_a, p.t1, 0.0, p.g)
                .unwrap()
                .value;
            assert!(
                rel(sim, formula) < 1e-8,
                "N={n} dt={dt}: {sim} vs {formula}"
            );
        }
    }
}

#[test]
fn delayed_encoding_matches_closed_form() {
    for n in [2, 10] {
        let p = optimized(n);
        for k in 0..=40 {
            let dt = PI * k as f64 / 40.0;
            let c = circuit(
                p,
                ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::EncodingDelay(dt),
            );
            let sim = circuit_qfi(&c, 0.0, QfiMethod::Pure).unwrap().fq_total;
            let formula = analytic::encoding_delay_qfi(n, dt, p.g, p.omega_p)
                .unwrap()
                .value;
            assert!(rel(sim, formula) < 1e-8, "N={n} dt={dt}");
        }
    }
}

#[test]
fn cfi_saturates_and_validates_derivatives() {
    for n in [2, 5, 10] {
        for t2 in [0.0, 0.7, 3.1] {
            let mut p = optimized(n);
            p.t2 = t2;
            let c = circuit(
                p,
                ProbePrep::PolarizedOpt(Sign::Plus),
                Schedule::Synchronous,
            );
            let r = cfi(&JzReadout(&c), 0.25, DerivativeMethod::Analytic).unwrap();
            assert!(rel(r.value, (n * n) as f64) < 1e-8);
            assert!(derivative_agreement(&JzReadout(&c), 0.25).unwrap() < 1e-6);
        }
    }
}

#[test]
fn no_ancilla_formula_matches_spectral_generator() {
    let mut p = optimized(4);
    p.g = 0.0;
    // Thermal in the generator's own eigenbasis commutes with it.
    let c = circuit(p, ProbePrep::Thermal { beta: 1.0 }, Schedule::Synchronous);
    let direct = analytic::no_ancilla_qfi(&c.probe().ensemble, p.omega_p, p.t1)
        .unwrap()
        .value;
    assert!(direct.abs() < 1e-9);

    // A frame rotated away from J_phi leaves coherences for the encoding to act on.
    p.frame_t1 = Some(0.5);
    let c = circuit(p, ProbePrep::Thermal { beta: 1.0 }, Schedule::Synchronous);
    let ensemble = &c.probe().ensemble;
    let direct = analytic::no_ancilla_qfi(ensemble, p.omega_p, p.t1)
        .unwrap()
        .value;
    let generator = GeneratorSpec::rotated(c.dimension(), p.omega_p * p.t1);
    let spectral = fisher::qfi_spectral(ensemble, &generator).unwrap();
    assert!(direct > 1.0 && direct < 16.0, "{direct}");
    assert!((direct - spectral).abs() < 1e-9);
    let sld = circuit_qfi(&c, 0.0, QfiMethod::Sld).unwrap().fq_total;
    assert!(rel(sld, direct) < 1e-6, "{sld} vs {direct}");
}

#[test]
fn decoupled_ancilla_baseline() {
    let mut p = optimized(6);
    p.g = 0.0;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let ghz = circuit(
        p,
        ProbePrep::SuperposedOpt {
            a: r,
            b: r,
            phi: 0.0,
        },
        Schedule::Synchronous,
    );
    assert!(
        rel(
            circuit_qfi(&ghz, 0.3, QfiMethod::Pure).unwrap().fq_total,
            36.0
        ) < 1e-8
    );
    let polarized = circuit(
        p,
        ProbePrep::PolarizedOpt(Sign::Plus),
        Schedule::Synchronous,
    );
    assert!(
        circuit_qfi(&polarized, 0.3, QfiMethod::Pure)
            .unwrap()
            .fq_total
            .abs()
            < 1e-8
    );
}

#[test]
fn thermal_bound_ordering() {
    for n in (10..=200).step_by(10) {
        for beta in [0.5, 1.0, 2.0] {
            let gap = analytic::thermal_bound_gap(n, beta).unwrap();
            assert!(gap > 0.0, "N={n} beta={beta}: {gap:e}");
        }
    }
    let f = analytic::thermal_qfi_exact(50, 16.0).unwrap().value;
    assert!(rel(f, 2500.0) < 1e-3);
}

#[test]
fn thermal_exact_increases_toward_heisenberg_limit() {
    for n in [3, 10, 50] {
        let values: Vec<f64> = [1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&b| analytic::thermal_qfi_exact(n, b).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]));
        assert!(*values.last().unwrap() <= (n * n) as f64 * (1.0 + 1e-12));
    }
}

#[test]
fn encoding_delay_is_periodic() {
    for k in 0..20 {
        let dt = 0.17 * k as f64;
        let a = analytic::encoding_delay_qfi(10, dt, 1.0, 10.0)
            .unwrap()
            .value;
        let b = analytic::encoding_delay_qfi(10, dt + PI, 1.0, 10.0)
            .unwrap()
            .value;
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn heisenberg_limit_at_one_hundred_spins() {
    let c = circuit(
        optimized(100),
        ProbePrep::PolarizedOpt(Sign::Plus),
        Schedule::Synchronous,
    );
    let r = circuit_qfi(&c, 0.4, QfiMethod::Pure).unwrap();
    assert!(rel(r.fq_total, analytic::hl_qfi(100).unwrap().value) < 1e-8);
}

#[test]
fn measurement_keeps_pure_states_pure() {
    let c = circuit(
        optimized(2),
        ProbePrep::PolarizedOpt(Sign::Plus),
        Schedule::Synchronous,
    );
    let branch = c.branch_vectors(0.0).unwrap();
    let joined = &branch[0].value + &branch[1].value;
    let state = PureVector::normalized(joined, spinmetro_core::Basis::Composite).unwrap();
    let outcomes = measure_sigma_x(&BranchState::Pure(state)).unwrap();
    assert!(outcomes
        .iter()
        .all(|o| matches!(o.state, Some(BranchState::Pure(_)))));
}

fn prep_strategy() -> impl Strategy<Value = ProbePrep> {
    prop_oneof![
        Just(ProbePrep::PolarizedOpt(Sign::Plus)),
        Just(ProbePrep::PolarizedOpt(Sign::Minus)),
        (0.0f64..1.0, 0.0f64..6.3).prop_map(|(a, phi)| ProbePrep::SuperposedOpt {
            a,
            b: (1.0 - a * a).sqrt(),
            phi
        }),
        (0.0f64..6.3).prop_map(|phi0| ProbePrep::GhzX { phi0 }),
        (-3.0f64..3.0).prop_map(|beta| ProbePrep::Thermal { beta }),
    ]
}

fn schedule_strategy() -> impl Strategy<Value = Schedule> {
    prop_oneof![
        Just(Schedule::Synchronous),
        (0.0f64..3.0).prop_map(Schedule::MeasurementDelay),
        (0.0f64..3.0).prop_map(Schedule::EncodingDelay),
    ]
}

fn ancilla_strategy() -> impl Strategy<Value = AncillaPrep> {
    prop_oneof![
        Just(AncillaPrep::Plus),
        Just(AncillaPrep::Minus),
        Just(AncillaPrep::Ground),
        Just(AncillaPrep::Excited),
        (0.0f64..PI, 0.0f64..6.3).prop_map(|(theta, phi)| AncillaPrep::Bloch { theta, phi }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn branch_probabilities_sum_to_one(
        n in 1u32..7,
        omega_a in 0.0f64..8.0,
        g in 0.0f64..2.0,
        t1 in 0.0f64..3.0,
        t2 in 0.0f64..3.0,
        theta in 0.0f64..6.3,
        prep in prep_strategy(),
        ancilla in ancilla_strategy(),
        schedule in schedule_strategy(),
    ) {
        let p = ProtocolParams { spins: n, omega_p: 10.0, omega_a, g, t1, t2, theta, frame_t1: None };
        let c = Circuit::new(p, &prep, ancilla, schedule).unwrap();
        let outcomes = c.outcomes(theta).unwrap();
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
        for o in &outcomes {
            if let Some(state) = &o.state {
                prop_assert!((state.weight() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn classical_information_is_bounded_by_quantum(
        n in 1u32..7,
        omega_a in 0.0f64..8.0,
        t1 in 0.0f64..3.0,
        t2 in 0.0f64..3.0,
        theta in 0.0f64..6.3,
        prep in prep_strategy(),
        schedule in schedule_strategy(),
    ) {
        let p = ProtocolParams { spins: n, omega_p: 10.0, omega_a, g: 1.0, t1, t2, theta, frame_t1: None };
        let c = Circuit::new(p, &prep, AncillaPrep::Plus, schedule).unwrap();
        let fc = cfi(&JzReadout(&c), theta, DerivativeMethod::Analytic).unwrap();
        let method = if prep.is_pure() { QfiMethod::Pure } else { QfiMethod::Sld };
        let fq = circuit_qfi(&c, theta, method).unwrap();
        // Delayed measurement makes the outcome probabilities θ-dependent;
        // the joint readout then also sees that classical information.
        let bound = fq.fq_total + fq.fq_outcome;
        prop_assert!(fc.value <= bound + 1e-9, "fc {} fq {} outcome {}", fc.value, fq.fq_total, fq.fq_outcome);
        if !matches!(schedule, Schedule::MeasurementDelay(_)) {
            prop_assert!(fq.fq_outcome.abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_equivalence_on_random_superpositions(
        n in 1u32..=12,
        a in 0.0f64..1.0,
        phi in 0.0f64..6.3,
        theta in 0.0f64..6.3,
    ) {
        let prep = ProbePrep::SuperposedOpt { a, b: (1.0 - a * a).sqrt(), phi };
        let c = circuit(optimized(n), prep, Schedule::Synchronous);
        let pure = circuit_qfi(&c, theta, QfiMethod::Pure).unwrap().fq_total;
        let spectral = circuit_qfi(&c, theta, QfiMethod::Spectral).unwrap().fq_total;
        let sld = circuit_qfi(&c, theta, QfiMethod::Sld).unwrap().fq_total;
        let scale = pure.abs().max(1e-6 * (n * n) as f64);
        prop_assert!((pure - spectral).abs() / scale < 1e-6);
        prop_assert!((pure - sld).abs() / scale < 1e-6);
    }
}
