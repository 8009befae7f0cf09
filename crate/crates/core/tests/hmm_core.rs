mod common;

use common::{brute_density, brute_smoothing, power_stationary, random_discrete};
use nphmm::hmm::{forward_filter, joint_marginal_density, log_likelihood, simulate, stationary_distribution, tv_mixing_check};
use nphmm::rng::stream;
use nphmm::{Error, InitialDistribution, TransitionMatrix};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_matches_path_sum(seed in any::<u64>(), k in 1usize..=3, v in 2usize..=4, n in 1usize..=6) {
        let mut rng = stream(seed);
        let theta = random_discrete(&mut rng, k, v, 0.05);
        let obs: Vec<f64> = (0..n).map(|_| rng.random_range(1..=v) as f64).collect();
        let ll = log_likelihood(&theta, &obs).unwrap();
        prop_assert!((ll - brute_density(&theta, &obs).ln()).abs() <= 1e-10);
    }

    #[test]
    fn stationary_is_fixed_point(seed in any::<u64>(), k in 2usize..=5) {
        let mut rng = stream(seed);
        let rows = (0..k).map(|_| common::simplex(&mut rng, k, 0.01)).collect();
        let q = TransitionMatrix::from_rows(rows).unwrap();
        let mu = stationary_distribution(&q).unwrap();
        let oracle = power_stationary(&q);
        for (a, b) in mu.probs().iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        prop_assert!((mu.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_is_label_invariant(seed in any::<u64>()) {
        let mut rng = stream(seed);
        let theta = random_discrete(&mut rng, 3, 4, 0.05);
        let obs: Vec<f64> = (0..20).map(|_| rng.random_range(1..=4) as f64).collect();
        let swapped = theta.permuted(&[2, 0, 1]).unwrap();
        let (a, b) = (log_likelihood(&theta, &obs).unwrap(), log_likelihood(&swapped, &obs).unwrap());
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn mixing_bound_on_floored_matrices(seed in any::<u64>(), k in 2usize..=4) {
        let mut rng = stream(seed);
        let q = rng.random_range(0.01..=1.0 / k as f64);
        let rows = (0..k).map(|_| common::simplex(&mut rng, k, q)).collect();
        let rep = tv_mixing_check(&TransitionMatrix::from_rows(rows).unwrap(), 60).unwrap();
        prop_assert!(rep.holds);
    }
}

#[test]
fn filtered_rows_match_path_sums_at_the_last_step() {
    let mut rng = stream(3);
    let theta = random_discrete(&mut rng, 3, 3, 0.05);
    let obs = [1.0, 3.0, 2.0, 2.0, 1.0];
    let mu = theta.stationary().unwrap();
    let trace = forward_filter(&theta, &mu, &obs).unwrap();
    let brute = brute_smoothing(&theta, &obs);
    let last = trace.filtered_row(obs.len() - 1);
    for i in 0..3 {
        assert!((last[i] - brute[(obs.len() - 1) * 3 + i]).abs() < 1e-12);
    }
}

#[test]
fn window_density_is_a_path_sum() {
    let mut rng = stream(9);
    let theta = random_discrete(&mut rng, 2, 3, 0.1);
    for w in common::sequences(3, 3) {
        let a = joint_marginal_density(&theta, &w).unwrap();
        assert!((a - brute_density(&theta, &w)).abs() < 1e-14);
    }
}

#[test]
fn simulated_states_visit_the_stationary_law() {
    let mut rng = stream(5);
    let theta = random_discrete(&mut rng, 3, 3, 0.1);
    let (states, obs) = simulate(&theta, 200_000, &mut stream(6)).unwrap();
    assert_eq!(obs.len(), 200_000);
    let mu = power_stationary(theta.transition());
    for i in 0..3 {
        let freq = states.iter().filter(|&&s| s == i).count() as f64 / states.len() as f64;
        assert!((freq - mu[i]).abs() < 0.01, "state {i}: {freq} vs {}", mu[i]);
    }
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(TransitionMatrix::from_rows(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
    assert!(InitialDistribution::new(vec![0.2, 0.2]).is_err());
    let reducible = TransitionMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    assert_eq!(stationary_distribution(&reducible).unwrap_err(), Error::Reducible);
    let theta = random_discrete(&mut stream(1), 2, 3, 0.1);
    assert!(log_likelihood(&theta, &[1.0, 7.0]).is_err());
}
