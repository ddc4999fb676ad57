use bellstore::bathfn::{chi, filter_function, SpectralDensity};
use bellstore::dynamics::{
    DephasingMode, Distribution, HamiltonianKind, MoleculeParams, NoiseModel, OuProcess, RelaxationParams, Simulator,
};
use bellstore::experiment::{count_above_threshold, fit_exponential, CorrelationTrace, TracePoint};
use bellstore::sequence::{
    compile, cpmg_times, parse_sequence_spec, udd_times, PulseParams, Scheme, Segment, SequenceSpec, Timeline,
};
use bellstore::spinops::{
    correlation, deviation, pauli_expectations, pseudopure, CanonicalState, DensityMatrix, Matrix4c, PseudopureParams,
    Spin, SpinOperator, StateVector,
};
use nalgebra::Vector4;
use num_complex::Complex64;
use proptest::prelude::*;

fn state_strategy() -> impl Strategy<Value = StateVector> {
    prop::array::uniform8(-1.0f64..1.0)
        .prop_filter("non-zero", |a| a.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(|a| {
            StateVector::normalized(Vector4::from_fn(|r, _| Complex64::new(a[2 * r], a[2 * r + 1]))).unwrap()
        })
}

fn mixed_strategy() -> impl Strategy<Value = Matrix4c> {
    (state_strategy(), state_strategy(), 0.0f64..1.0).prop_map(|(a, b, w)| {
        let pa = DensityMatrix::pure(&a, "a").matrix;
        let pb = DensityMatrix::pure(&b, "b").matrix;
        pa * Complex64::new(w, 0.0) + pb * Complex64::new(1.0 - w, 0.0)
    })
}

fn plus_zero() -> DensityMatrix {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let v = Vector4::new(
        Complex64::new(r, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(r, 0.0),
        Complex64::new(0.0, 0.0),
    );
    DensityMatrix::pure(&StateVector::new(v).unwrap(), "+0")
}

fn coherence1(rho: &Matrix4c) -> f64 {
    let plus = SpinOperator::ix(Spin::First).0 + SpinOperator::iy(Spin::First).0 * Complex64::new(0.0, 1.0);
    ((rho * plus).trace() * 2.0).norm()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn correlation_is_scale_invariant(rho in mixed_strategy(), psi in state_strategy(), c in 1e-6f64..1e6) {
        let dev = deviation(&rho);
        prop_assume!(dev.norm() > 1e-6);
        let a = correlation(&dev, &psi).unwrap();
        let b = correlation(&(dev * Complex64::new(c, 0.0)), &psi).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn correlation_is_bounded(rho in mixed_strategy(), psi in state_strategy()) {
        prop_assume!(deviation(&rho).norm() > 1e-6);
        let c = correlation(&rho, &psi).unwrap();
        prop_assert!(c.abs() <= 1.0 + 1e-12);
        let own = DensityMatrix::pure(&psi, "psi").matrix;
        let scaled = own * Complex64::new(0.3, 0.0) + Matrix4c::identity() * Complex64::new(0.7 / 4.0, 0.0);
        prop_assert!((correlation(&scaled, &psi).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn pseudopure_correlation_ignores_epsilon(psi in state_strategy(), target in state_strategy(), e1 in 1e-6f64..=1.0, e2 in 1e-6f64..=1.0) {
        let a = pseudopure(&psi, PseudopureParams::new(e1).unwrap());
        let b = pseudopure(&psi, PseudopureParams::new(e2).unwrap());
        let ca = correlation(&a.matrix, &target).unwrap();
        let cb = correlation(&b.matrix, &target).unwrap();
        prop_assert!((ca - cb).abs() <= 1e-12, "{} vs {}", ca, cb);
    }

    #[test]
    fn pauli_reconstruction_round_trip(rho in mixed_strategy()) {
        let d = DensityMatrix::new(rho, "rho");
        let back = pauli_expectations(&d).reconstruct();
        prop_assert!((back - rho).norm() <= 1e-12);
    }

    #[test]
    fn udd_instants_are_ordered_and_symmetric(n in 1usize..=100, period in 1e-6f64..100.0) {
        let t = udd_times(n, period).unwrap();
        let tj = t.instants();
        prop_assert!(tj[0] > 0.0 && tj[n - 1] < period);
        prop_assert!(tj.windows(2).all(|w| w[1] > w[0]));
        for j in 0..n {
            prop_assert!((tj[j] + tj[n - 1 - j] - period).abs() <= 1e-12 * period);
        }
        let c = cpmg_times(n, period).unwrap();
        let diff = tj.iter().zip(c.instants()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if n <= 2 {
            prop_assert!(diff <= 1e-12 * period);
        } else {
            prop_assert!(diff > 0.0);
        }
    }

    #[test]
    fn compiled_blocks_sum_and_center(
        udd in any::<bool>(),
        n in 1usize..=12,
        tau in 1e-4f64..1e-2,
        tau_pi_frac in 0.0f64..0.5,
        repeats in 1usize..5,
    ) {
        let spec = SequenceSpec {
            scheme: if udd { Scheme::Udd } else { Scheme::Cpmg },
            order: n,
            tau_cpmg: tau,
            tau_pi: tau * tau_pi_frac,
            repeats,
            phase_deg: 0.0,
        };
        let period = spec.period().unwrap();
        let timing = spec.timing().unwrap();
        match compile(&timing, &spec.pulse(), repeats) {
            Ok(tl) => {
                let sum: f64 = tl.segments().iter().map(|s| s.duration).sum();
                prop_assert!((sum - period).abs() <= 1e-12 * period.max(1.0));
                prop_assert!((tl.total_duration() - repeats as f64 * period).abs() <= 1e-12 * repeats as f64);
                let centers = tl.pulse_centers();
                prop_assert_eq!(centers.len(), n);
                for (c, t) in centers.iter().zip(timing.instants()) {
                    prop_assert!((c - t).abs() <= 1e-12);
                }
            }
            Err(bellstore::Error::Overlap { .. }) => prop_assert!(udd),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn sequence_text_round_trips(
        udd in any::<bool>(),
        order in 1usize..200,
        tau_cpmg in 1e-7f64..1.0,
        tau_pi in 0.0f64..1e-3,
        repeats in 1usize..10_000,
        phase in prop_oneof![Just(0.0f64), 0.0f64..360.0],
    ) {
        let spec = SequenceSpec {
            scheme: if udd { Scheme::Udd } else { Scheme::Cpmg },
            order,
            tau_cpmg,
            tau_pi,
            repeats,
            phase_deg: phase,
        };
        let back = parse_sequence_spec(&spec.to_string()).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn filter_function_is_non_negative(udd in any::<bool>(), n in 0usize..12, period in 1e-3f64..10.0, omega in 0.0f64..1e4) {
        let t = match (n, udd) {
            (0, _) => bellstore::sequence::TimingVector::free(period).unwrap(),
            (_, true) => udd_times(n, period).unwrap(),
            (_, false) => cpmg_times(n, period).unwrap(),
        };
        prop_assert!(filter_function(&t, omega) >= 0.0);
        prop_assert_eq!(filter_function(&t, 0.0), 0.0);
    }

    #[test]
    fn threshold_count_matches_brute_force(values in prop::collection::vec(-1.0f64..=1.0, 0..60), threshold in 0.01f64..0.99) {
        let trace = CorrelationTrace::new("s", "q", values.iter().enumerate().map(|(k, &c)| TracePoint {
            time: k as f64,
            correlation: c,
            std_error: 0.0,
        }).collect());
        let mut brute = 0;
        for v in &values {
            if *v > threshold {
                brute += 1;
            }
        }
        prop_assert_eq!(count_above_threshold(&trace, threshold), brute);
    }

    #[test]
    fn fit_recovers_tau(tau in 0.5f64..50.0, amp in 0.2f64..1.0) {
        let pts: Vec<(f64, f64)> = (0..25).map(|k| {
            let t = 40.0 * k as f64 / 24.0;
            (t, amp * (-t / tau).exp())
        }).collect();
        let fit = fit_exponential(&pts).unwrap();
        prop_assert!(((fit.tau - tau) / tau).abs() < 0.01, "{} vs {}", fit.tau, tau);
        prop_assert!(fit.tau > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chi_scales_linearly(c in 1e-3f64..1e3, n in 1usize..8, tau_c in 0.01f64..2.0) {
        let timing = udd_times(n, 1.0).unwrap();
        let s = SpectralDensity::lorentzian(1.0, tau_c).unwrap();
        let base = chi(&timing, &s).unwrap().chi;
        let scaled = chi(&timing, &s.scaled(c).unwrap()).unwrap().chi;
        prop_assert!(((scaled - c * base) / (c * base)).abs() <= 3e-8);
    }

    #[test]
    fn ideal_blocks_refocus_static_offsets(
        udd in any::<bool>(),
        n in 1usize..10,
        offset in -3000.0f64..3000.0,
        shift in -500.0f64..500.0,
        repeats in 1usize..4,
    ) {
        let period = 4e-3 * n as f64;
        let timing = if udd { udd_times(n, period) } else { cpmg_times(n, period) }.unwrap();
        let tl = compile(&timing, &PulseParams::ideal_pi(), repeats).unwrap();
        let noise = NoiseModel { static_offset: Distribution::Fixed(offset), ..NoiseModel::noiseless() };
        let rho0 = plus_zero();
        let res = Simulator::new(MoleculeParams::new(shift, 0.0).unwrap(), noise).run(&rho0, &tl, &[]).unwrap();
        prop_assert!((coherence1(&res.final_state.matrix) - coherence1(&rho0.matrix)).abs() <= 1e-9);
    }

    #[test]
    fn singlet_is_stationary_for_any_coupling(j in 0.0f64..200.0, t in 0.0f64..50.0) {
        let singlet = DensityMatrix::pure(&CanonicalState::Singlet.vector(), "S");
        let tl = Timeline::from_segments(vec![Segment::delay(t.max(1e-9))], 1).unwrap();
        for kind in [HamiltonianKind::Free, HamiltonianKind::Equivalence] {
            let mol = MoleculeParams::new(0.0, j).unwrap();
            let res = Simulator::new(mol, NoiseModel::noiseless()).with_hamiltonian(kind).run(&singlet, &tl, &[]).unwrap();
            let c = correlation(&res.final_state.matrix, &CanonicalState::Singlet.vector()).unwrap();
            prop_assert!((c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn relaxing_eigenstates_never_gain_correlation(
        which in 0usize..4,
        t1 in 0.5f64..10.0,
        t2_frac in 0.05f64..2.0,
        seed in any::<u64>(),
    ) {
        let state = [CanonicalState::Up00, CanonicalState::Up01, CanonicalState::Up10, CanonicalState::Up11][which];
        let noise = NoiseModel {
            relaxation: Some(RelaxationParams::new(t1, t2_frac * t1).unwrap()),
            ensemble_size: 4,
            master_seed: seed,
            ..NoiseModel::calibration_defaults()
        };
        // past ~10 T1 the deviation is below the degeneracy floor
        let end = (5.0 * t1).min(40.0);
        let grid: Vec<f64> = (0..25).map(|k| end * k as f64 / 24.0).collect();
        let tl = Timeline::from_segments(vec![Segment::delay(end)], 1).unwrap();
        let rho0 = DensityMatrix::pure(&state.vector(), state.label());
        let res = Simulator::new(MoleculeParams::new(270.4, 0.0).unwrap(), noise).run(&rho0, &tl, &grid).unwrap();
        let c: Vec<f64> = res.samples.iter().map(|(_, r)| correlation(&r.matrix, &state.vector()).unwrap()).collect();
        for w in c.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "{:?}", c);
        }
    }
}

#[test]
fn long_noisy_run_stays_physical() {
    // non-commuting independent OU noise forces ~1e4 short propagation steps
    let noise = NoiseModel {
        relaxation: Some(RelaxationParams::proton_pair()),
        dephasing: Some(OuProcess {
            sigma: 50.0,
            correlation_time: 1e-4,
        }),
        dephasing_mode: DephasingMode::Independent,
        ensemble_size: 2,
        master_seed: 99,
        ..NoiseModel::calibration_defaults()
    };
    let spec = parse_sequence_spec("udd order=5 tau_cpmg=1ms tau_pi=20us repeats=5").unwrap();
    let tl = spec.compile().unwrap();
    let steps = tl.total_duration() / (1e-4 / 20.0);
    assert!(steps >= 1e4, "{steps}");
    let rho0 = DensityMatrix::pure(&CanonicalState::Singlet.vector(), "S");
    let block = tl.block_duration();
    let samples: Vec<f64> = (0..=5).map(|k| k as f64 * block).collect();
    let res = Simulator::new(MoleculeParams::proton_pair(), noise).run(&rho0, &tl, &samples).unwrap();
    let d = res.diagnostics;
    assert!(d.max_trace_drift <= 1e-10, "{d:?}");
    assert!(d.max_hermitian_defect <= 1e-10, "{d:?}");
    assert!(d.min_eigenvalue >= -1e-10, "{d:?}");
}
