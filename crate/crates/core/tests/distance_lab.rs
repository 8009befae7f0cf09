mod common;

use common::{brute_density, brute_kl, power_stationary, random_discrete, sequences};
use nphmm::checks::{kl_scaling_probe, small_instance};
use nphmm::distance::{c_k_constant, d_ell, d_ell_lipschitz_bound, kl_path, llr_variance, DEllMethod, PathMethod};
use nphmm::rng::stream;
use nphmm::{DiscretePmf, EmissionDensity, GaussianMixtureDensity, HmmParams, TransitionMatrix};
use proptest::prelude::*;

fn d(a: &HmmParams, b: &HmmParams, ell: usize) -> f64 {
    d_ell(a, b, ell, DEllMethod::Auto).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pseudo_metric_axioms(seed in any::<u64>(), ell in 1usize..=3) {
        let mut rng = stream(seed);
        let a = random_discrete(&mut rng, 2, 3, 0.05);
        let b = random_discrete(&mut rng, 2, 3, 0.05);
        let c = random_discrete(&mut rng, 2, 3, 0.05);
        let (ab, bc, ac) = (d(&a, &b, ell), d(&b, &c, ell), d(&a, &c, ell));
        prop_assert!((ab - d(&b, &a, ell)).abs() < 1e-12);
        prop_assert!((0.0..=2.0 + 1e-12).contains(&ab));
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(d(&a, &a, ell) <= 1e-12);
        prop_assert!(d(&a, &a.permuted(&[1, 0]).unwrap(), ell) <= 1e-10);
    }

    #[test]
    fn one_window_is_a_marginal_of_two(seed in any::<u64>()) {
        let mut rng = stream(seed);
        let a = random_discrete(&mut rng, 3, 3, 0.05);
        let b = random_discrete(&mut rng, 2, 3, 0.05);
        prop_assert!(d(&a, &b, 1) <= d(&a, &b, 2) + 1e-12);
    }

    #[test]
    fn lipschitz_bound_holds(seed in any::<u64>(), ell in 1usize..=3) {
        let mut rng = stream(seed);
        let a = random_discrete(&mut rng, 2, 4, 0.05);
        let b = random_discrete(&mut rng, 2, 4, 0.05);
        prop_assert!(d_ell_lipschitz_bound(&a, &b, ell).unwrap().holds);
    }
}

#[test]
fn windows_match_path_sum_oracle() {
    let mut rng = stream(11);
    let a = random_discrete(&mut rng, 2, 3, 0.1);
    let b = random_discrete(&mut rng, 3, 3, 0.1);
    for ell in 1..=3 {
        let oracle: f64 = sequences(3, ell).iter().map(|y| (brute_density(&a, y) - brute_density(&b, y)).abs()).sum();
        assert!((d(&a, &b, ell) - oracle).abs() < 1e-12, "ell {ell}");
    }
}

#[test]
fn single_window_is_l1_of_stationary_mixtures() {
    let mut rng = stream(12);
    let a = random_discrete(&mut rng, 2, 4, 0.1);
    let b = random_discrete(&mut rng, 2, 4, 0.1);
    let mix = |t: &HmmParams, y: f64| {
        let mu = power_stationary(t.transition());
        (0..2).map(|i| mu[i] * t.emissions()[i].density(y).unwrap()).sum::<f64>()
    };
    let oracle: f64 = (1..=4).map(|y| (mix(&a, y as f64) - mix(&b, y as f64)).abs()).sum();
    assert!((d(&a, &b, 1) - oracle).abs() < 1e-13);
}

#[test]
fn continuous_two_window_agrees_with_monte_carlo() {
    let q = TransitionMatrix::from_rows(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    let g = |m: f64| EmissionDensity::Gmix(GaussianMixtureDensity::single(m, 1.0).unwrap());
    let a = HmmParams::new(q.clone(), vec![g(-1.0), g(1.0)]).unwrap();
    let b = HmmParams::new(q, vec![g(-0.5), g(1.5)]).unwrap();
    let quad = d_ell(&a, &b, 2, DEllMethod::Auto).unwrap();
    let mc = d_ell(&a, &b, 2, DEllMethod::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
    let se = mc.mc_se.unwrap();
    assert!((quad.value - mc.value).abs() < 4.0 * se + quad.error_bar, "{} vs {} ± {se}", quad.value, mc.value);
}

#[test]
fn kl_matches_sequence_sum_oracle() {
    let mut rng = stream(13);
    let a = random_discrete(&mut rng, 2, 3, 0.1);
    let b = random_discrete(&mut rng, 2, 3, 0.1);
    for n in 1..=4 {
        let kl = kl_path(&a, &b, n, PathMethod::Exact).unwrap().value;
        assert!((kl - brute_kl(&a, &b, 3, n)).abs() < 1e-12, "n {n}");
    }
}

#[test]
fn iid_reduction_is_additive() {
    // Identical rows make the hidden states i.i.d.
    let q = TransitionMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
    let f = |p: Vec<f64>| EmissionDensity::Discrete(DiscretePmf::new(p, 0.0, 0.0).unwrap());
    let a = HmmParams::new(q.clone(), vec![f(vec![0.6, 0.3, 0.1]), f(vec![0.1, 0.2, 0.7])]).unwrap();
    let b = HmmParams::new(q, vec![f(vec![0.5, 0.3, 0.2]), f(vec![0.2, 0.2, 0.6])]).unwrap();
    let one = kl_path(&a, &b, 1, PathMethod::Exact).unwrap().value;
    for n in 2..=6 {
        let kl = kl_path(&a, &b, n, PathMethod::Exact).unwrap().value;
        assert!((kl - n as f64 * one).abs() < 1e-10);
    }
}

#[test]
fn chain_rule_and_variance_mc_agree_with_exact() {
    for t in 0..4 {
        let (a, pert) = small_instance(21, t).unwrap();
        let b = pert.apply(&a, 0.3).unwrap();
        let exact = kl_path(&a, &b, 6, PathMethod::Exact).unwrap().value;
        let mc = kl_path(&a, &b, 6, PathMethod::MonteCarlo { paths: 20_000, seed: t }).unwrap();
        assert!((exact - mc.value).abs() <= 3.0 * mc.mc_se.unwrap(), "trial {t}");
        let ve = llr_variance(&a, &b, 6, PathMethod::Exact).unwrap().report.value;
        let vm = llr_variance(&a, &b, 6, PathMethod::MonteCarlo { paths: 20_000, seed: t }).unwrap().report;
        assert!((ve - vm.value).abs() <= 3.0 * vm.mc_se.unwrap(), "trial {t}");
    }
}

#[test]
fn local_quadratic_growth() {
    for t in 0..5 {
        let (a, pert) = small_instance(22, t).unwrap();
        let r = kl_scaling_probe(&a, &pert, &[0.02, 0.04, 0.08], &[6]).unwrap();
        let e = r.eps_exponent.unwrap();
        assert!((1.8..=2.2).contains(&e), "trial {t}: {e}");
        assert!(r.bound.holds);
    }
}

#[test]
fn support_mismatch_is_infinite() {
    let q = TransitionMatrix::uniform(2);
    let f = |p: Vec<f64>| EmissionDensity::Discrete(DiscretePmf::new(p, 0.0, 0.0).unwrap());
    let a = HmmParams::new(q.clone(), vec![f(vec![0.5, 0.5]), f(vec![0.5, 0.5])]).unwrap();
    let b = HmmParams::new(q, vec![f(vec![1.0, 0.0]), f(vec![1.0, 0.0])]).unwrap();
    let r = kl_path(&a, &b, 2, PathMethod::Exact).unwrap();
    assert!(r.infinite && r.value.is_infinite());
}

#[test]
fn c_k_grows_as_the_floor_shrinks() {
    let a = c_k_constant(2, 0.3).unwrap();
    let b = c_k_constant(2, 0.1).unwrap();
    assert!(a.is_finite() && b > a);
    assert!(c_k_constant(2, 0.0).is_err());
}
