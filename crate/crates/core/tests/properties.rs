use approx::assert_abs_diff_eq;
use num_complex::Complex64;
use phononcp::objective::{excitation_profile, modulus_loss};
use phononcp::pulses::{composite_unitary, CompositeEvaluator};
use phononcp::robustness::{perturb, sweep, Probe, PulseSelection, SweepAxis, SweepSpec};
use phononcp::thermometry::{
    coefficient_matrix, correct_populations, evaluate_thermometry, simulate_measurements,
    CorrectionProblem, PhononDistribution, ThermometrySetup,
};
use phononcp::{CompositePulse, PulseParams, SystemConfig, TargetPreset};
use proptest::prelude::*;

fn pulse_strategy(count: usize) -> impl Strategy<Value = CompositePulse> {
    proptest::collection::vec(
        (0.25f64..2.5, 0.05f64..1.0, -3.2f64..3.2, 0.0f64..40.0),
        count,
    )
    .prop_map(|ps| {
        CompositePulse::new(
            ps.into_iter()
                .map(|(d, o, phi, t)| PulseParams::new(d, o, phi, t))
                .collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn excitation_profile_is_a_probability(cp in pulse_strategy(3)) {
        let cfg = SystemConfig::with_cutoff(5);
        let profile = excitation_profile(&composite_unitary(&cfg, &cp).unwrap()).unwrap();
        for p in profile {
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        }
    }

    #[test]
    fn cached_evaluator_matches_direct_product(cp in pulse_strategy(4)) {
        let cfg = SystemConfig::with_cutoff(4);
        let direct = composite_unitary(&cfg, &cp).unwrap();
        let mut evaluator = CompositeEvaluator::new(cfg).unwrap();
        for p in cp.pulses() {
            evaluator.register(p.delta, p.omega).unwrap();
        }
        let cached = evaluator.unitary(&cp).unwrap();
        let diff = direct.iter().zip(cached.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-10, "difference {}", diff);
    }

    #[test]
    fn loss_ignores_elementwise_phases(cp in pulse_strategy(3), seed in 0u64..1000) {
        let cfg = SystemConfig::with_cutoff(3);
        let u = composite_unitary(&cfg, &cp).unwrap();
        let rotated = u.map_with_location(|i, j, z| {
            z * Complex64::from_polar(1.0, (seed as f64) * 0.37 + (i * 7 + j) as f64)
        });
        let spec = TargetPreset::Swap(0).build(&cfg).unwrap();
        let a = modulus_loss(&u, &spec).unwrap().value();
        let b = modulus_loss(&rotated, &spec).unwrap().value();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn common_phase_shift_leaves_populations_unchanged(cp in pulse_strategy(3), shift in -3.0f64..3.0) {
        let cfg = SystemConfig::with_cutoff(4);
        let mut shifted = cp.clone();
        for p in shifted.pulses_mut() {
            p.phi += shift;
        }
        let a = excitation_profile(&composite_unitary(&cfg, &cp).unwrap()).unwrap();
        let b = excitation_profile(&composite_unitary(&cfg, &shifted).unwrap()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}

#[test]
fn correction_is_exact_without_population_outside_the_window() {
    // Design and truth spaces agree and all population sits in the window,
    // so a R = M holds exactly.
    let cfg = SystemConfig::with_cutoff(6);
    let pulses: Vec<CompositePulse> = [(120.0, 0.0), (260.0, 0.7), (400.0, 1.9)]
        .iter()
        .map(|&(t, phi)| {
            CompositePulse::new(vec![
                PulseParams::new(1.0, 0.3, 0.0, t),
                PulseParams::new(0.0, 0.2, phi, 15.0),
            ])
            .unwrap()
        })
        .collect();
    let window = [0, 1, 2];
    let dist = PhononDistribution::from_entries(6, &[(0, 0.5), (1, 0.3), (2, 0.2)]).unwrap();
    let coeff = coefficient_matrix(&cfg, &pulses, &window).unwrap();
    let measured = simulate_measurements(&cfg, &pulses, &dist).unwrap();
    let c = correct_populations(&CorrectionProblem { coeff, measured }).unwrap();
    for (r, p) in c.corrected.iter().zip([0.5, 0.3, 0.2]) {
        assert_abs_diff_eq!(*r, p, epsilon = 1e-9);
    }
}

#[test]
fn cached_pulse_workflow_reports_every_window_state() {
    let setup = ThermometrySetup {
        design: SystemConfig::with_cutoff(6),
        truth: SystemConfig::with_cutoff(30),
        window: vec![0, 1],
        ..ThermometrySetup::default()
    };
    let pulses = vec![
        CompositePulse::new(vec![PulseParams::new(1.0, 0.1, 0.0, 374.0)]).unwrap(),
        CompositePulse::new(vec![PulseParams::new(0.0, 0.1, 0.0, 31.4)]).unwrap(),
    ];
    let dist = PhononDistribution::new(vec![1.0 / 30.0; 30]).unwrap();
    let report = evaluate_thermometry(&setup, &pulses, &dist).unwrap();
    assert_eq!(report.window, vec![0, 1]);
    assert_eq!(report.pulses.len(), 2);
    assert!(report
        .pulses
        .iter()
        .all(|p| p.loss.is_none() && p.excitation.len() == 6));
    let mut csv = Vec::new();
    report.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
}

#[test]
fn sweep_nominal_point_is_the_unperturbed_pulse() {
    let cfg = SystemConfig::with_cutoff(4);
    let cp = CompositePulse::new(vec![
        PulseParams::new(1.0, 0.1, 0.0, 200.0),
        PulseParams::new(1.0, 0.1, 1.1, 300.0),
        PulseParams::new(1.0, 0.1, 2.0, 150.0),
    ])
    .unwrap();
    let probe = Probe::w01();
    let direct = probe
        .evaluate(&cfg, &composite_unitary(&cfg, &cp).unwrap())
        .unwrap();
    for axis in [SweepAxis::DurationOffset, SweepAxis::PhaseOffset] {
        let spec = SweepSpec::new(axis, (-0.9, 1.3), 12).unwrap();
        let result = sweep(&cfg, &cp, &spec, &probe).unwrap();
        assert_eq!(
            result.nominal().unwrap().probability.to_bits(),
            direct.to_bits()
        );
        assert!(result.points.windows(2).all(|w| w[0].offset < w[1].offset));
    }
}

#[test]
fn single_pulse_selection_touches_one_pulse() {
    let cp = CompositePulse::new(vec![
        PulseParams::new(1.0, 0.1, 0.0, 5.0),
        PulseParams::new(1.0, 0.1, 0.5, 5.0),
    ])
    .unwrap();
    let spec = SweepSpec {
        which: PulseSelection::Single(0),
        ..SweepSpec::new(SweepAxis::DurationOffset, (-10.0, 10.0), 3).unwrap()
    };
    let (out, clamped) = perturb(&cp, &spec, -10.0).unwrap();
    assert!(clamped);
    assert_eq!(out.pulses()[0].t, 0.0);
    assert_eq!(out.pulses()[1], cp.pulses()[1]);
}
