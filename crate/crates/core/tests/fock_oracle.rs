use num_complex::Complex64;
use proptest::prelude::*;
use sfg_core::fock::{
    apply_loss, build_state, build_state_with, oracle_expectation, sfg_rate_correlated,
    sfg_rate_uncorrelated, thermal_pair_probability, Ensemble, LossChannel, MultimodeState,
    NormalOrderedOperator, StateForm,
};

const TOL: f64 = 1e-10;

fn check(state: &impl Ensemble) {
    let pairs = state.num_pairs();
    let rc = sfg_rate_correlated(state);
    let oc = oracle_expectation(state, &NormalOrderedOperator::sfg_correlated(pairs)).unwrap();
    assert!(
        (rc - oc.re).abs() < TOL && oc.im.abs() < TOL,
        "correlated {rc} vs {oc}"
    );
    if pairs >= 2 {
        let ru = sfg_rate_uncorrelated(state).unwrap();
        let ou =
            oracle_expectation(state, &NormalOrderedOperator::sfg_uncorrelated(pairs)).unwrap();
        assert!(
            (ru - ou.re).abs() < TOL && ou.im.abs() < TOL,
            "uncorrelated {ru} vs {ou}"
        );
    }
}

/// Every (pairs, cutoff) with basis dimension at most 10^4.
fn small_bases() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for cutoff in 1..=9usize {
        for pairs in 1..=6usize {
            if (cutoff + 1).pow(2 * pairs as u32) <= 10_000 {
                out.push((pairs, cutoff));
            }
        }
    }
    out
}

#[test]
fn built_states_match_oracle_on_all_small_bases() {
    for (pairs, cutoff) in small_bases() {
        for n in [0.0, 1e-3, 0.05, 0.3] {
            let sector_full = cutoff == 1 && pairs as f64 * n / (1.0 + n) > 1.0;
            if !sector_full {
                check(&build_state(n, pairs, cutoff, 0.7).unwrap());
            }
            if cutoff == 1 {
                check(&build_state_with(StateForm::Product, n, pairs, cutoff, 0.7).unwrap());
            }
        }
    }
}

#[test]
fn lossy_ensembles_match_oracle() {
    for (pairs, cutoff) in [(1, 1), (2, 1), (3, 1), (1, 2), (2, 2), (1, 6)] {
        let s = build_state(0.1, pairs, cutoff, 0.0).unwrap();
        for t in [0.1, 0.5, 0.9] {
            check(&apply_loss(&s, LossChannel::new(t).unwrap()).unwrap());
        }
    }
}

#[test]
fn phase_randomized_states_match_oracle() {
    let s = build_state(0.2, 3, 1, 0.0).unwrap();
    check(&s.with_pair_phases(&[0.3, 2.0, -1.1]).unwrap());
}

#[test]
fn coherent_gain_via_oracle() {
    let op = |k| NormalOrderedOperator::sfg_correlated(k);
    let one = oracle_expectation(&build_state(0.05, 1, 1, 0.0).unwrap(), &op(1))
        .unwrap()
        .re;
    let three = oracle_expectation(&build_state(0.05, 3, 1, 0.0).unwrap(), &op(3))
        .unwrap()
        .re;
    assert!((three / one - 9.0).abs() < 1e-12);
}

#[test]
fn truncated_squeezed_moment_matches_partial_sum() {
    let n = 0.1;
    let cutoff = 6;
    let s = build_state(n, 1, cutoff, 0.0).unwrap();
    let norm: f64 = (0..=cutoff).map(|k| thermal_pair_probability(n, k)).sum();
    let partial: f64 = (0..=cutoff)
        .map(|k| (k * k) as f64 * thermal_pair_probability(n, k))
        .sum::<f64>()
        / norm;
    let got = oracle_expectation(&s, &NormalOrderedOperator::number_correlation(0, 1)).unwrap();
    assert!((got.re - partial).abs() < 1e-14);
    assert!((sfg_rate_correlated(&s) - partial).abs() < 1e-14);
}

fn arbitrary_state() -> impl Strategy<Value = MultimodeState> {
    (1usize..=2, 1usize..=3).prop_flat_map(|(pairs, cutoff)| {
        let dim = (cutoff + 1).pow(2 * pairs as u32);
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim).prop_map(move |raw| {
            let mut amps: Vec<Complex64> =
                raw.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            let norm = amps
                .iter()
                .map(|a| a.norm_sqr())
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            for a in &mut amps {
                *a /= norm;
            }
            MultimodeState::from_amplitudes(pairs, cutoff, amps, 0.0).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_match_oracle_on_arbitrary_states(s in arbitrary_state()) {
        check(&s);
    }

    #[test]
    fn number_moments_match_oracle(s in arbitrary_state(), t in 0.0f64..=1.0) {
        let lossy = apply_loss(&s, LossChannel::new(t).unwrap()).unwrap();
        let before = oracle_expectation(&s, &NormalOrderedOperator::number(0)).unwrap().re;
        let after = oracle_expectation(&lossy, &NormalOrderedOperator::number(0)).unwrap().re;
        prop_assert!((after - t * before).abs() < 1e-10);
    }
}
