use nphmm::priors::{
    paired_q_tail_comparison, prior_q_tail_estimate, sample_dp_discrete, sample_dpm_gaussian, sample_transition_prior,
    DpDiscreteSpec, DpmGaussianSpec, QPriorSpec, RateSchedule,
};
use nphmm::rng::stream;
use nphmm::Error;
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, InverseGamma};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn q3_draws_respect_the_floor(seed in any::<u64>(), k in 2usize..=4, frac in 0.05f64..1.0) {
        let floor = frac / k as f64;
        let q = sample_transition_prior(&QPriorSpec::Q3 { floor }, k, &mut stream(seed)).unwrap();
        prop_assert!(q.min_entry() >= floor - 1e-15);
        for row in q.rows() {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dp_draws_are_normalized(seed in any::<u64>()) {
        let d = sample_dp_discrete(&DpDiscreteSpec::default(), &mut stream(seed)).unwrap();
        let total: f64 = d.density.probs().iter().sum::<f64>() + d.density.tail_mass();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(d.sticks >= 1 && d.sticks <= 100);
    }

    #[test]
    fn dpm_draws_are_normalized(seed in any::<u64>()) {
        let d = sample_dpm_gaussian(&DpmGaussianSpec::default(), &mut stream(seed)).unwrap();
        prop_assert!((d.density.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(d.density.sigma() > 0.0);
    }
}

#[test]
fn q1_and_q2_rows_are_valid() {
    let mut rng = stream(4);
    for spec in [QPriorSpec::q1(0.5, 3), QPriorSpec::q2(1.0, 0.5, 3)] {
        for _ in 0..50 {
            let q = sample_transition_prior(&spec, 3, &mut rng).unwrap();
            assert!(q.min_entry() > 0.0);
        }
    }
    assert!(matches!(
        sample_transition_prior(&QPriorSpec::q1(-1.0, 2), 2, &mut rng),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn floor_prior_has_no_mass_below_its_floor() {
    let est = prior_q_tail_estimate(&QPriorSpec::Q3 { floor: 0.1 }, 3, &[0.02, 0.05, 0.1], 5000, &mut stream(1)).unwrap();
    assert!(est.iter().all(|e| e.estimate == 0.0 && e.se == 0.0));
}

#[test]
fn doubly_exponential_prior_has_lighter_tails() {
    let grid = [0.1, 0.15, 0.2];
    let r = paired_q_tail_comparison(&QPriorSpec::q1(1.0, 2), &QPriorSpec::q2(1.0, 1.0, 2), 2, &grid, 50_000, &mut stream(2))
        .unwrap();
    for p in &r {
        assert!(p.difference <= 3.0 * p.se, "{p:?}");
    }
}

#[test]
fn dp_mean_mass_at_one() {
    // E f(1) = G(1) / G(N) = 6 / pi^2 for G(l) = l^-2.
    let spec = DpDiscreteSpec::default();
    let mut rng = stream(3);
    let n = 4000;
    let xs: Vec<f64> = (0..n).map(|_| sample_dp_discrete(&spec, &mut rng).unwrap().density.prob(1)).collect();
    let m = xs.iter().sum::<f64>() / n as f64;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    let target = 6.0 / std::f64::consts::PI.powi(2);
    assert!((m - target).abs() < 4.0 * (v / n as f64).sqrt(), "{m} vs {target}");
}

#[test]
fn bandwidth_prior_median() {
    let spec = DpmGaussianSpec::default();
    let mut rng = stream(8);
    let mut s: Vec<f64> = (0..20_000).map(|_| spec.sample_sigma(&mut rng)).collect();
    s.sort_by(f64::total_cmp);
    let ig = InverseGamma::new(2.0, 1.0).unwrap();
    let p = ig.cdf(s[s.len() / 2]);
    assert!((p - 0.5).abs() < 0.015, "{p}");
}

#[test]
fn rate_formulas() {
    let d = RateSchedule::discrete(1.0, 1.5, 1.0);
    let n = 1000u64;
    let ln = (n as f64).ln();
    assert!((d.eps(n) - ln.powf(1.5) / (n as f64).sqrt()).abs() < 1e-15);
    assert!((d.eps_tilde(n) - ln / (n as f64).sqrt()).abs() < 1e-15);
    assert!((d.u(n) - ln.powf(1.5)).abs() < 1e-12);
    let h = RateSchedule::holder(2.0, 1.0, 1.5, 1.0);
    assert!((h.eps(n) - (n as f64).powf(-0.4) * ln.powf(1.5)).abs() < 1e-15);
    assert_eq!(h.u(n), 1.0);
    assert!(d.check_grid(&[100, 1000, 10_000]).is_ok());
    assert!(matches!(d.check_grid(&[2, 100]), Err(Error::DegenerateGrid(_))));
}

#[test]
fn base_measure_bracket() {
    let spec = DpDiscreteSpec::default();
    assert!(spec.bracket_holds(100_000));
    assert!((spec.total_mass() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
}
