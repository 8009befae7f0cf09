mod common;

use common::{brute_smoothing, random_discrete};
use nphmm::hmm::simulate;
use nphmm::rng::stream;
use nphmm::sampler::{ffbs_states, geweke_joint_check, run_chain, GibbsConfig};
use nphmm::Error;

#[test]
fn ffbs_marginals_match_path_sums() {
    let mut rng = stream(31);
    let theta = random_discrete(&mut rng, 2, 3, 0.1);
    let obs = [1.0, 3.0, 3.0, 2.0, 1.0];
    let exact = brute_smoothing(&theta, &obs);
    let draws = 40_000;
    let mut counts = vec![0usize; obs.len() * 2];
    let mut srng = stream(32);
    for _ in 0..draws {
        for (t, s) in ffbs_states(&theta, &obs, &mut srng).unwrap().into_iter().enumerate() {
            counts[t * 2 + s] += 1;
        }
    }
    for (c, p) in counts.iter().zip(&exact) {
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((*c as f64 / draws as f64 - p).abs() <= 3.0 * se, "{c} vs {p}");
    }
}

#[test]
fn single_state_posterior_is_the_conjugate_dp_update() {
    // With one state the posterior of f is DP(G + sum of point masses):
    // E[f(1) | y] = (G(1) + n_1) / (G(N) + n) with G(l) = l^-2.
    let obs: Vec<f64> = [1.0, 2.0, 1.0, 3.0, 1.0, 1.0, 5.0, 2.0].repeat(3);
    let mut cfg = GibbsConfig::discrete(1, 9);
    cfg.iterations = 20_000;
    cfg.burn_in = 100;
    cfg.thin = 1;
    let sample = run_chain(&cfg, &obs).unwrap();
    let f1: Vec<f64> = sample.draws.iter().map(|d| d.emissions()[0].density(1.0).unwrap()).collect();
    let m = f1.iter().sum::<f64>() / f1.len() as f64;
    let n1 = obs.iter().filter(|&&y| y == 1.0).count() as f64;
    let target = (1.0 + n1) / (std::f64::consts::PI.powi(2) / 6.0 + obs.len() as f64);
    // Draws are independent given the fixed single-state path.
    let v = f1.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (f1.len() - 1) as f64;
    assert!((m - target).abs() < 4.0 * (v / f1.len() as f64).sqrt(), "{m} vs {target}");
}

#[test]
fn chains_are_reproducible() {
    let mut cfg = GibbsConfig::discrete(2, 4);
    cfg.iterations = 300;
    cfg.burn_in = 100;
    let theta = random_discrete(&mut stream(1), 2, 4, 0.1);
    let (_, obs) = simulate(&theta, 200, &mut stream(2)).unwrap();
    let a = run_chain(&cfg, &obs).unwrap();
    let b = run_chain(&cfg, &obs).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.draws.len(), 50);
    cfg.seed = 5;
    assert_ne!(run_chain(&cfg, &obs).unwrap().draws, a.draws);
}

#[test]
fn out_of_support_data_is_rejected() {
    let cfg = GibbsConfig::discrete(2, 0);
    assert_eq!(run_chain(&cfg, &[1.0, 0.0]).unwrap_err(), Error::Domain(0.0));
    assert_eq!(run_chain(&cfg, &[1.0, 2.5]).unwrap_err(), Error::Domain(2.5));
    let cfg = GibbsConfig::continuous(2, 0);
    assert!(run_chain(&cfg, &[f64::NAN]).is_err());
}

#[test]
fn geweke_discrete() {
    let r = geweke_joint_check(&GibbsConfig::discrete(2, 0), 10, 10_000, 1).unwrap();
    assert!(r.passed, "{r:?}");
}

#[test]
fn geweke_continuous() {
    let r = geweke_joint_check(&GibbsConfig::continuous(2, 0), 10, 10_000, 1).unwrap();
    assert!(r.passed, "{r:?}");
}
