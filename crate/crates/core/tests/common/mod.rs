#![allow(dead_code)]

use nphmm::rng::StreamRng;
use nphmm::{DiscretePmf, EmissionDensity, HmmParams, TransitionMatrix};
use rand::Rng;

/// Random probability vector with every entry at least `floor`.
pub fn simplex(rng: &mut StreamRng, k: usize, floor: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| floor + (1.0 - k as f64 * floor) * x / s).collect()
}

/// k-state model with finite pmfs on `{1..v}`.
pub fn random_discrete(rng: &mut StreamRng, k: usize, v: usize, floor: f64) -> HmmParams {
    let rows = (0..k).map(|_| simplex(rng, k, floor)).collect();
    let f = (0..k)
        .map(|_| EmissionDensity::Discrete(DiscretePmf::new(simplex(rng, v, 0.02), 0.0, 0.0).unwrap()))
        .collect();
    HmmParams::new(TransitionMatrix::from_rows(rows).unwrap(), f).unwrap()
}

/// Stationary law by power iteration, independent of the library's solver.
pub fn power_stationary(q: &TransitionMatrix) -> Vec<f64> {
    let k = q.k();
    let mut mu = vec![1.0 / k as f64; k];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| mu[i] * q.get(i, j)).sum()).collect();
        let done = next.iter().zip(&mu).all(|(a, b)| (a - b).abs() < 1e-16);
        mu = next;
        if done {
            break;
        }
    }
    mu
}

fn pmf(theta: &HmmParams, i: usize, y: f64) -> f64 {
    theta.emissions()[i].density(y).unwrap()
}

/// Calls `visit(path, weight)` for every hidden path of length `n` with
/// its prior weight under the stationary start.
fn for_each_path(theta: &HmmParams, n: usize, mut visit: impl FnMut(&[usize], f64)) {
    let k = theta.k();
    let mu = power_stationary(theta.transition());
    let total = k.pow(n as u32);
    let mut path = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for s in path.iter_mut() {
            *s = c % k;
            c /= k;
        }
        let mut w = mu[path[0]];
        for t in 1..n {
            w *= theta.transition().get(path[t - 1], path[t]);
        }
        visit(&path, w);
    }
}

/// `p(y_1..y_n)` as an explicit sum over hidden paths.
pub fn brute_density(theta: &HmmParams, obs: &[f64]) -> f64 {
    let mut p = 0.0;
    for_each_path(theta, obs.len(), |path, w| {
        p += w * path.iter().zip(obs).map(|(&s, &y)| pmf(theta, s, y)).product::<f64>();
    });
    p
}

/// `P(X_t = i | y_1..y_n)` as explicit path sums, row-major `n x k`.
pub fn brute_smoothing(theta: &HmmParams, obs: &[f64]) -> Vec<f64> {
    let (n, k) = (obs.len(), theta.k());
    let mut m = vec![0.0; n * k];
    let mut z = 0.0;
    for_each_path(theta, n, |path, w| {
        let p = w * path.iter().zip(obs).map(|(&s, &y)| pmf(theta, s, y)).product::<f64>();
        z += p;
        for (t, &s) in path.iter().enumerate() {
            m[t * k + s] += p;
        }
    });
    m.iter().map(|x| x / z).collect()
}

/// Every sequence in `{1..v}^n`.
pub fn sequences(v: usize, n: usize) -> Vec<Vec<f64>> {
    let total = v.pow(n as u32);
    (0..total)
        .map(|code| {
            let mut c = code;
            (0..n)
                .map(|_| {
                    let y = (c % v + 1) as f64;
                    c /= v;
                    y
                })
                .collect()
        })
        .collect()
}

/// `KL(p_n^a, p_n^b)` by summing over all sequences with brute-force
/// densities.
pub fn brute_kl(a: &HmmParams, b: &HmmParams, v: usize, n: usize) -> f64 {
    sequences(v, n)
        .iter()
        .map(|y| {
            let pa = brute_density(a, y);
            if pa == 0.0 {
                0.0
            } else {
                pa * (pa / brute_density(b, y)).ln()
            }
        })
        .sum()
}
