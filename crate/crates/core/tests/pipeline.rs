//! Cross-module checks: encodings feed QSVT, decompositions feed estimators,
//! and every route to a channel expectation agrees with the exact value.

use proptest::prelude::*;

use tudsim::channels::{exact_expectation, gad_channel, pauli_observables, probe_states, GAD_P};
use tudsim::encodings::{sznagy_encode, verify_block_encoding, BlockEncoding};
use tudsim::estimation::{block_postselect_estimator, fud_estimator, tud_estimator, RngStream, Shots};
use tudsim::experiments::gad_phases;
use tudsim::numerics::{basis_state, op_norm, pauli_z, random_contraction_with_spectrum, seeded_rng};
use tudsim::tud::{
    oracle_fud, oracle_tud_svd, run_fud_with, run_tud, sznagy_fud, PhaseSource, TudOptions,
};

fn channel_routes_agree(gamma: f64) {
    let ch = gad_channel(GAD_P, gamma).unwrap();
    let mut rng = seeded_rng(0);
    for (_, psi) in probe_states() {
        for (_, o) in pauli_observables() {
            let exact = exact_expectation(&ch, &psi, &o).unwrap();
            let mut shortcut = 0.0;
            let mut oracle = 0.0;
            let mut block = 0.0;
            for a in &ch.operators {
                shortcut += fud_estimator(&sznagy_fud(a).unwrap(), &o, &psi, Shots::Infinite, &mut rng)
                    .unwrap()
                    .estimate;
                oracle += fud_estimator(&oracle_fud(a, 1.61).unwrap(), &o, &psi, Shots::Infinite, &mut rng)
                    .unwrap()
                    .estimate;
                if op_norm(a) > 0.0 {
                    let enc_o = BlockEncoding::from_unitary(o.clone()).unwrap();
                    block += block_postselect_estimator(&sznagy_encode(a).unwrap(), &enc_o, &psi, Shots::Infinite, &mut rng)
                        .unwrap()
                        .estimate;
                }
            }
            assert!((shortcut - exact).abs() < 1e-12, "shortcut {shortcut} vs {exact}");
            assert!((oracle - exact).abs() < 1e-12, "oracle {oracle} vs {exact}");
            assert!((block - exact).abs() < 1e-12, "block {block} vs {exact}");
        }
    }
}

#[test]
fn exact_routes_agree_on_damping_channel() {
    for gamma in [0.0, 0.3, 0.75, 1.0] {
        channel_routes_agree(gamma);
    }
}

#[test]
fn qsvt_route_matches_channel_within_tolerance() {
    let phases = gad_phases(1.61, 30, PhaseSource::Solver).unwrap();
    let ch = gad_channel(GAD_P, 0.4).unwrap();
    let psi = basis_state(2, 1);
    let exact = exact_expectation(&ch, &psi, &pauli_z()).unwrap();
    let mut rng = seeded_rng(1);
    let est: f64 = ch
        .operators
        .iter()
        .map(|a| {
            let dec = run_fud_with(a, 1.61, &phases, true).unwrap();
            fud_estimator(&dec, &pauli_z(), &psi, Shots::Infinite, &mut rng).unwrap().estimate
        })
        .sum();
    assert!((est - exact).abs() < 1e-2, "{est} vs {exact}");
}

#[test]
fn finite_shot_estimates_are_reproducible() {
    let a = random_contraction_with_spectrum(&[0.4, 0.6], 9).unwrap();
    let dec = oracle_tud_svd(&a).unwrap();
    let psi = basis_state(2, 0);
    let draw = |k| {
        let mut rng = RngStream::new(5, 0).child(k).rng();
        tud_estimator(&dec, &pauli_z(), &psi, Shots::Finite(4000), &mut rng).unwrap().estimate
    };
    assert_eq!(draw(0), draw(0));
    assert_ne!(draw(0), draw(1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dilation_then_decomposition_reconstructs(
        s1 in 0.2f64..0.8,
        s2 in 0.2f64..0.8,
        seed in any::<u64>(),
    ) {
        let a = random_contraction_with_spectrum(&[s1, s2], seed).unwrap();
        let enc = sznagy_encode(&a).unwrap();
        prop_assert!(verify_block_encoding(&enc, &a).unwrap() < 1e-12);

        let oracle = oracle_tud_svd(&a).unwrap();
        prop_assert!(oracle.reconstruction_error(&a) < 1e-12);

        let dec = run_tud(&enc, &TudOptions::default()).unwrap();
        prop_assert!(dec.reconstruction_error(&a) <= 2e-2);
        prop_assert!(dec.success_probabilities.iter().all(|&p| p > 0.999));
    }

    #[test]
    fn infinite_shot_estimator_equals_quadratic_form(
        s1 in 0.0f64..1.0,
        s2 in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let a = random_contraction_with_spectrum(&[s1, s2], seed).unwrap();
        let psi = basis_state(2, 1);
        let v = &a * &psi;
        let direct = (v.adjoint() * pauli_z() * &v)[(0, 0)].re;
        let mut rng = seeded_rng(seed);
        let fud = fud_estimator(&sznagy_fud(&a).unwrap(), &pauli_z(), &psi, Shots::Infinite, &mut rng).unwrap();
        prop_assert!((fud.estimate - direct).abs() < 1e-12);
        let tud = tud_estimator(&oracle_tud_svd(&a).unwrap(), &pauli_z(), &psi, Shots::Infinite, &mut rng).unwrap();
        prop_assert!((tud.estimate - direct).abs() < 1e-12);
    }
}
