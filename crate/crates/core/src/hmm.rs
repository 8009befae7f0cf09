//! Finite-state HMM machinery: parameters, simulation, stationary law,
//! scaled forward filtering and joint densities of consecutive observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::emission::{common_space, EmissionDensity, ObsSpace};
use crate::error::{Error, Result};

const ROW_TOL: f64 = 1e-12;

/// Row-stochastic `k x k` matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct TransitionMatrix {
    k: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for TransitionMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        TransitionMatrix::from_rows(rows)
    }
}

impl From<TransitionMatrix> for Vec<Vec<f64>> {
    fn from(q: TransitionMatrix) -> Self {
        q.rows().map(|r| r.to_vec()).collect()
    }
}

impl TransitionMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParameter("transition matrix must be square and nonempty".into()));
        }
        Self::new(k, rows.into_iter().flatten().collect())
    }

    /// Validates entries in `[0, 1]` and row sums within 1e-12 of one.
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() != k * k {
            return Err(Error::InvalidParameter(format!("expected {} entries", k * k)));
        }
        if data.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidParameter("transition entries must lie in [0, 1]".into()));
        }
        for (i, row) in data.chunks(k).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_TOL {
                return Err(Error::InvalidParameter(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix { k, data })
    }

    /// Divides each row by its sum before validating.
    pub fn normalized(k: usize, mut data: Vec<f64>) -> Result<Self> {
        for row in data.chunks_mut(k) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        Self::new(k, data)
    }

    pub fn uniform(k: usize) -> Self {
        TransitionMatrix { k, data: vec![1.0 / k as f64; k * k] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.k)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Replaces row `i`; the new row must be a probability vector.
    pub fn with_row(&self, i: usize, row: &[f64]) -> Result<Self> {
        let mut data = self.data.clone();
        data[i * self.k..(i + 1) * self.k].copy_from_slice(row);
        Self::new(self.k, data)
    }

    /// The floor `q` such that `Q` has every entry at least `q`.
    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &TransitionMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, q) in out.iter_mut().zip(self.row(i)) {
                *o += vi * q;
            }
        }
        out
    }

    pub fn matmul(&self, other: &TransitionMatrix) -> TransitionMatrix {
        let k = self.k;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let a = self.get(i, l);
                for j in 0..k {
                    data[i * k + j] += a * other.get(l, j);
                }
            }
        }
        TransitionMatrix { k, data }
    }

    fn is_irreducible(&self) -> bool {
        let k = self.k;
        let reach = |forward: bool| {
            let mut seen = vec![false; k];
            let mut stack = vec![0usize];
            seen[0] = true;
            while let Some(i) = stack.pop() {
                for j in 0..k {
                    let edge = if forward { self.get(i, j) } else { self.get(j, i) };
                    if edge > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach(true) && reach(false)
    }

    /// Permutes the state labels: new state `perm[i]` is old state `i`.
    pub fn permuted(&self, perm: &[usize]) -> TransitionMatrix {
        let k = self.k;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                data[perm[i] * k + perm[j]] = self.get(i, j);
            }
        }
        TransitionMatrix { k, data }
    }
}

/// Probability vector over the hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InitialDistribution {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for InitialDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        InitialDistribution::new(v)
    }
}

impl From<InitialDistribution> for Vec<f64> {
    fn from(d: InitialDistribution) -> Self {
        d.probs
    }
}

impl InitialDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("initial distribution must be nonnegative".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::InvalidParameter(format!("initial distribution sums to {s}")));
        }
        Ok(InitialDistribution { probs })
    }

    pub fn uniform(k: usize) -> Self {
        InitialDistribution { probs: vec![1.0 / k as f64; k] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Solves `mu (Q - I) = 0`, `sum(mu) = 1` by Gaussian elimination with
/// partial pivoting.
fn stationary_dense(q: &TransitionMatrix) -> Option<Vec<f64>> {
    let k = q.k();
    // Rows of A are equations; A = (Q^T - I) with the last equation replaced
    // by the normalization constraint.
    let mut a = vec![0.0; k * (k + 1)];
    let w = k + 1;
    for i in 0..k {
        for j in 0..k {
            a[i * w + j] = q.get(j, i) - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        a[(k - 1) * w + j] = 1.0;
    }
    a[(k - 1) * w + k] = 1.0;
    for col in 0..k {
        let pivot = (col..k).max_by(|&x, &y| a[x * w + col].abs().partial_cmp(&a[y * w + col].abs()).unwrap())?;
        if a[pivot * w + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for c in 0..w {
                a.swap(pivot * w + c, col * w + c);
            }
        }
        let d = a[col * w + col];
        for r in 0..k {
            if r != col {
                let f = a[r * w + col] / d;
                if f != 0.0 {
                    for c in col..w {
                        a[r * w + c] -= f * a[col * w + c];
                    }
                }
            }
        }
    }
    Some((0..k).map(|i| a[i * w + k] / a[i * w + i]).collect())
}

fn stationary_power(q: &TransitionMatrix) -> Vec<f64> {
    let k = q.k();
    let mut mu = vec![1.0 / k as f64; k];
    for _ in 0..1_000_000 {
        let next = q.left_mul(&mu);
        let delta: f64 = next.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum();
        mu = next;
        if delta < 1e-13 {
            break;
        }
    }
    mu
}

/// Unique stationary distribution `mu Q = mu`.
///
/// Dense solve for `k <= 8`, power iteration beyond. A matrix with zero
/// entries is accepted only if it is irreducible.
pub fn stationary_distribution(q: &TransitionMatrix) -> Result<InitialDistribution> {
    if q.min_entry() <= 0.0 && !q.is_irreducible() {
        return Err(Error::Reducible);
    }
    if q.k() == 1 {
        return Ok(InitialDistribution { probs: vec![1.0] });
    }
    let mut mu = if q.k() <= 8 { stationary_dense(q).ok_or(Error::Reducible)? } else { stationary_power(q) };
    mu.iter_mut().for_each(|x| *x = x.max(0.0));
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= s);
    Ok(InitialDistribution { probs: mu })
}

/// Parameter `theta = (Q, f)` of a k-state HMM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct HmmParams {
    q: TransitionMatrix,
    emissions: Vec<EmissionDensity>,
    space: ObsSpace,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    k: usize,
    #[serde(rename = "Q")]
    q: TransitionMatrix,
    emissions: Vec<EmissionDensity>,
}

impl TryFrom<RawParams> for HmmParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        if raw.k != raw.q.k() {
            return Err(Error::InvalidParameter(format!("k = {} but Q is {}x{}", raw.k, raw.q.k(), raw.q.k())));
        }
        HmmParams::new(raw.q, raw.emissions)
    }
}

impl From<HmmParams> for RawParams {
    fn from(p: HmmParams) -> Self {
        RawParams { k: p.q.k(), q: p.q, emissions: p.emissions }
    }
}

impl HmmParams {
    pub fn new(q: TransitionMatrix, emissions: Vec<EmissionDensity>) -> Result<Self> {
        if emissions.len() != q.k() {
            return Err(Error::InvalidParameter(format!(
                "{} emissions for {} states",
                emissions.len(),
                q.k()
            )));
        }
        let space = common_space(&emissions)?;
        Ok(HmmParams { q, emissions, space })
    }

    pub fn k(&self) -> usize {
        self.q.k()
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.q
    }

    pub fn emissions(&self) -> &[EmissionDensity] {
        &self.emissions
    }

    pub fn space(&self) -> ObsSpace {
        self.space
    }

    pub fn stationary(&self) -> Result<InitialDistribution> {
        stationary_distribution(&self.q)
    }

    /// Relabels the hidden states: new state `perm[i]` is old state `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<HmmParams> {
        let k = self.k();
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..k).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
        let mut emissions = self.emissions.clone();
        for (i, &p) in perm.iter().enumerate() {
            emissions[p] = self.emissions[i].clone();
        }
        HmmParams::new(self.q.permuted(perm), emissions)
    }

    /// `n x k` row-major matrix of `log f_i(y_t)`.
    pub fn ln_emission_matrix(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let k = self.k();
        let mut out = Vec::with_capacity(obs.len() * k);
        for &y in obs {
            for f in &self.emissions {
                out.push(f.ln_density(y)?);
            }
        }
        Ok(out)
    }
}

/// Draws `(states, observations)` of length `n` from the stationary chain.
pub fn simulate<R: Rng + ?Sized>(theta: &HmmParams, n: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("simulation length must be at least 1".into()));
    }
    let mu = theta.stationary()?;
    let states = simulate_states(theta.transition(), mu.probs(), n, rng);
    let obs = states.iter().map(|&x| theta.emissions()[x].sample(rng)).collect();
    Ok((states, obs))
}

pub(crate) fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Markov chain path from initial law `mu`.
pub fn simulate_states<R: Rng + ?Sized>(q: &TransitionMatrix, mu: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut states = Vec::with_capacity(n);
    let mut x = sample_index(mu, rng);
    states.push(x);
    for _ in 1..n {
        x = sample_index(q.row(x), rng);
        states.push(x);
    }
    states
}

/// Output of the forward filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterTrace {
    pub k: usize,
    /// Row `t`: law of `X_t` given `Y_{1:t-1}`.
    pub predictive: Vec<f64>,
    /// Row `t`: law of `X_t` given `Y_{1:t}`.
    pub filtered: Vec<f64>,
    /// `log p(Y_t | Y_{1:t-1})` for each t.
    pub step_log_lik: Vec<f64>,
    pub log_lik: f64,
}

impl FilterTrace {
    pub fn len(&self) -> usize {
        self.step_log_lik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.step_log_lik.is_empty()
    }

    pub fn predictive_row(&self, t: usize) -> &[f64] {
        &self.predictive[t * self.k..(t + 1) * self.k]
    }

    pub fn filtered_row(&self, t: usize) -> &[f64] {
        &self.filtered[t * self.k..(t + 1) * self.k]
    }
}

/// Forward recursion on precomputed log emissions (`n x k`, row-major).
///
/// Each step rescales the emission row by its maximum before mixing, so
/// the recursion is stable for arbitrarily long sequences.
pub fn forward_filter_ln(q: &TransitionMatrix, mu: &[f64], ln_em: &[f64]) -> Result<FilterTrace> {
    let k = q.k();
    let n = ln_em.len() / k;
    let mut predictive = Vec::with_capacity(n * k);
    let mut filtered = Vec::with_capacity(n * k);
    let mut step_log_lik = Vec::with_capacity(n);
    let mut pred = mu.to_vec();
    let mut log_lik = 0.0;
    let mut w = vec![0.0; k];
    for t in 0..n {
        let row = &ln_em[t * k..(t + 1) * k];
        let mut max = f64::NEG_INFINITY;
        for (i, &l) in row.iter().enumerate() {
            if pred[i] > 0.0 && l > max {
                max = l;
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood { t });
        }
        let mut c = 0.0;
        for i in 0..k {
            w[i] = if pred[i] > 0.0 { pred[i] * (row[i] - max).exp() } else { 0.0 };
            c += w[i];
        }
        let step = max + c.ln();
        log_lik += step;
        step_log_lik.push(step);
        predictive.extend_from_slice(&pred);
        w.iter_mut().for_each(|x| *x /= c);
        filtered.extend_from_slice(&w);
        pred = q.left_mul(&w);
    }
    Ok(FilterTrace { k, predictive, filtered, step_log_lik, log_lik })
}

/// Filters `obs` under `theta` started from `mu`.
pub fn forward_filter(theta: &HmmParams, mu: &InitialDistribution, obs: &[f64]) -> Result<FilterTrace> {
    if mu.len() != theta.k() {
        return Err(Error::InvalidParameter("initial distribution has the wrong length".into()));
    }
    let ln_em = theta.ln_emission_matrix(obs)?;
    forward_filter_ln(theta.transition(), mu.probs(), &ln_em)
}

/// Log-likelihood `log p_n(Y_{1:n})` from the stationary start.
pub fn log_likelihood(theta: &HmmParams, obs: &[f64]) -> Result<f64> {
    let mu = theta.stationary()?;
    Ok(forward_filter(theta, &mu, obs)?.log_lik)
}

/// Joint density of `window.len()` consecutive observations under the
/// stationary chain; zero when no path can produce the window.
pub fn joint_marginal_density(theta: &HmmParams, window: &[f64]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::InvalidParameter("window length must be at least 1".into()));
    }
    let mu = theta.stationary()?;
    joint_density_with(theta, mu.probs(), window)
}

pub(crate) fn joint_density_with(theta: &HmmParams, mu: &[f64], window: &[f64]) -> Result<f64> {
    let k = theta.k();
    let mut alpha: Vec<f64> = (0..k)
        .map(|i| Ok(mu[i] * theta.emissions()[i].density(window[0])?))
        .collect::<Result<_>>()?;
    for &y in &window[1..] {
        let moved = theta.transition().left_mul(&alpha);
        alpha = moved
            .into_iter()
            .enumerate()
            .map(|(j, a)| Ok(a * theta.emissions()[j].density(y)?))
            .collect::<Result<_>>()?;
    }
    Ok(alpha.iter().sum())
}

/// One horizon of the mixing check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingRow {
    pub m: usize,
    pub tv_gap: f64,
    pub bound: f64,
    pub margin: f64,
}

/// Result of [`tv_mixing_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub floor: f64,
    pub rows: Vec<MixingRow>,
    pub holds: bool,
}

/// `max_i TV(Q^m(i, .), mu^Q)` against `(1 - q)^m` for `m = 1..=m_max`.
pub fn tv_mixing_check(q: &TransitionMatrix, m_max: usize) -> Result<MixingReport> {
    let floor = q.min_entry();
    if floor <= 0.0 {
        return Err(Error::InvalidParameter("mixing check requires a positive floor".into()));
    }
    let mu = stationary_distribution(q)?;
    let mut power = q.clone();
    let mut rows = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        if m > 1 {
            power = power.matmul(q);
        }
        let tv_gap = power
            .rows()
            .map(|r| 0.5 * r.iter().zip(mu.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        let bound = (1.0 - floor).powi(m as i32);
        rows.push(MixingRow { m, tv_gap, bound, margin: bound - tv_gap });
    }
    let holds = rows.iter().all(|r| r.tv_gap <= r.bound + 1e-12);
    Ok(MixingReport { floor, rows, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::DiscretePmf;
    use crate::rng::stream;

    pub(crate) fn q2(a: f64, b: f64) -> TransitionMatrix {
        TransitionMatrix::from_rows(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]]).unwrap()
    }

    fn pmf(p: &[f64]) -> EmissionDensity {
        EmissionDensity::Discrete(DiscretePmf::new(p.to_vec(), 0.0, 0.0).unwrap())
    }

    fn matrix_power_row(q: &TransitionMatrix, m: usize) -> Vec<f64> {
        let mut v = vec![1.0, 0.0];
        for _ in 0..m {
            v = q.left_mul(&v);
        }
        v
    }

    #[test]
    fn stationary_examples() {
        let mu = stationary_distribution(&q2(0.5, 0.5)).unwrap();
        assert!((mu.probs()[0] - 0.5).abs() < 1e-15);
        let mu = stationary_distribution(&q2(0.9, 0.1)).unwrap();
        assert!((mu.probs()[0] - 0.5).abs() < 1e-15);
        // Power-iteration oracle on Q^m.
        let q = q2(0.7, 0.4);
        let oracle = matrix_power_row(&q, 2000);
        let mu = stationary_distribution(&q).unwrap();
        assert!((mu.probs()[0] - oracle[0]).abs() < 1e-13);
        assert!((mu.probs()[0] - 4.0 / 7.0).abs() < 1e-13);
    }

    #[test]
    fn stationary_is_fixed_point_for_large_k() {
        let k = 11;
        let data: Vec<f64> = (0..k * k).map(|i| 1.0 + ((i * 7) % 5) as f64).collect();
        let q = TransitionMatrix::normalized(k, data).unwrap();
        let mu = stationary_distribution(&q).unwrap();
        let next = q.left_mul(mu.probs());
        for (a, b) in next.iter().zip(mu.probs()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn reducible_matrix_is_rejected() {
        let q = TransitionMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(stationary_distribution(&q), Err(Error::Reducible));
        let flip = TransitionMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(stationary_distribution(&flip).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn single_state_simulation() {
        let theta = HmmParams::new(TransitionMatrix::uniform(1), vec![pmf(&[0.5, 0.5])]).unwrap();
        let (x, y) = simulate(&theta, 50, &mut stream(1)).unwrap();
        assert!(x.iter().all(|&s| s == 0));
        assert_eq!(y.len(), 50);
    }

    #[test]
    fn state_frequency_matches_stationary_law() {
        let theta = HmmParams::new(q2(0.7, 0.4), vec![pmf(&[1.0]), pmf(&[0.0, 1.0])]).unwrap();
        let n = 1_000_000;
        let (x, _) = simulate(&theta, n, &mut stream(11)).unwrap();
        let freq = x.iter().filter(|&&s| s == 0).count() as f64 / n as f64;
        // Asymptotic variance of the occupation frequency for a two-state
        // chain: p(1-p)(1+lambda)/(1-lambda), lambda = 0.7 - 0.4.
        let p = 4.0 / 7.0;
        let lambda: f64 = 0.3;
        let sd = (p * (1.0 - p) * (1.0 + lambda) / (1.0 - lambda) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * sd, "{freq}");
    }

    #[test]
    fn identical_emissions_give_iid_observations() {
        let f = pmf(&[0.2, 0.5, 0.3]);
        let theta = HmmParams::new(q2(0.9, 0.2), vec![f.clone(), f]).unwrap();
        let n = 100_000;
        let (_, y) = simulate(&theta, n, &mut stream(5)).unwrap();
        let expected = [0.2, 0.5, 0.3];
        let chi2: f64 = (1..=3)
            .map(|v| {
                let o = y.iter().filter(|&&s| s == v as f64).count() as f64;
                let e = expected[v - 1] * n as f64;
                (o - e).powi(2) / e
            })
            .sum();
        // 99.9% quantile of chi-square with 2 degrees of freedom.
        assert!(chi2 < 13.82, "{chi2}");
    }

    #[test]
    fn uninformative_filter_stays_stationary() {
        let f = pmf(&[0.3, 0.7]);
        let theta = HmmParams::new(q2(0.8, 0.3), vec![f.clone(), f]).unwrap();
        let mu = theta.stationary().unwrap();
        let trace = forward_filter(&theta, &mu, &[1.0, 2.0, 2.0, 1.0, 2.0]).unwrap();
        for t in 0..5 {
            for (a, b) in trace.predictive_row(t).iter().zip(mu.probs()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    fn brute_force_density(theta: &HmmParams, mu: &[f64], y: &[f64]) -> f64 {
        let k = theta.k();
        let n = y.len();
        let mut total = 0.0;
        for code in 0..k.pow(n as u32) {
            let mut c = code;
            let path: Vec<usize> = (0..n)
                .map(|_| {
                    let s = c % k;
                    c /= k;
                    s
                })
                .collect();
            let mut p = mu[path[0]] * theta.emissions()[path[0]].density(y[0]).unwrap();
            for t in 1..n {
                p *= theta.transition().get(path[t - 1], path[t]) * theta.emissions()[path[t]].density(y[t]).unwrap();
            }
            total += p;
        }
        total
    }

    #[test]
    fn filter_matches_path_enumeration() {
        let theta = HmmParams::new(q2(0.65, 0.25), vec![pmf(&[0.5, 0.3, 0.2]), pmf(&[0.1, 0.2, 0.7])]).unwrap();
        let mu = theta.stationary().unwrap();
        let y = [1.0, 3.0, 3.0, 2.0, 1.0];
        let trace = forward_filter(&theta, &mu, &y).unwrap();
        let exact = brute_force_density(&theta, mu.probs(), &y).ln();
        assert!((trace.log_lik - exact).abs() < 1e-10);
    }

    #[test]
    fn predictive_floor_holds() {
        let q = TransitionMatrix::from_rows(vec![vec![0.8, 0.2], vec![0.2, 0.8]]).unwrap();
        let theta = HmmParams::new(q, vec![pmf(&[0.99, 0.01]), pmf(&[0.01, 0.99])]).unwrap();
        let mu = InitialDistribution::new(vec![1.0, 0.0]).unwrap();
        let y = [1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0];
        let trace = forward_filter(&theta, &mu, &y).unwrap();
        for t in 1..y.len() {
            assert!(trace.predictive_row(t).iter().all(|&p| p >= 0.2 - 1e-12));
        }
    }

    #[test]
    fn zero_likelihood_is_reported() {
        let theta = HmmParams::new(q2(0.5, 0.5), vec![pmf(&[1.0, 0.0]), pmf(&[1.0, 0.0])]).unwrap();
        let mu = theta.stationary().unwrap();
        assert_eq!(forward_filter(&theta, &mu, &[1.0, 2.0]).unwrap_err(), Error::ZeroLikelihood { t: 1 });
    }

    #[test]
    fn long_sequences_do_not_underflow() {
        let theta = HmmParams::new(q2(0.9, 0.1), vec![pmf(&[0.5, 0.5]), pmf(&[0.9, 0.1])]).unwrap();
        let (_, y) = simulate(&theta, 200_000, &mut stream(2)).unwrap();
        let ll = log_likelihood(&theta, &y).unwrap();
        assert!(ll.is_finite() && ll < 0.0);
    }

    #[test]
    fn joint_marginal_examples() {
        let theta = HmmParams::new(q2(0.5, 0.5), vec![pmf(&[0.8, 0.2]), pmf(&[0.2, 0.8])]).unwrap();
        assert!((joint_marginal_density(&theta, &[1.0]).unwrap() - 0.5).abs() < 1e-15);
        let theta = HmmParams::new(q2(0.7, 0.4), vec![pmf(&[0.5, 0.3, 0.2]), pmf(&[0.1, 0.6, 0.3])]).unwrap();
        let mut total = 0.0;
        for a in 1..=3 {
            for b in 1..=3 {
                total += joint_marginal_density(&theta, &[a as f64, b as f64]).unwrap();
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
        let mu = theta.stationary().unwrap();
        let w = [2.0, 1.0, 3.0];
        let exact = brute_force_density(&theta, mu.probs(), &w);
        assert!((joint_marginal_density(&theta, &w).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn mixing_examples() {
        let r = tv_mixing_check(&q2(0.5, 0.5), 10).unwrap();
        assert!(r.rows.iter().all(|row| row.tv_gap.abs() < 1e-15) && r.holds);
        let r = tv_mixing_check(&q2(0.7, 0.4), 1).unwrap();
        // Direct arithmetic: TV(Q(1,.), mu) = |0.7 - 4/7| and Q(2,.) gives |0.4 - 4/7|.
        let direct = (0.7f64 - 4.0 / 7.0).abs().max((0.4f64 - 4.0 / 7.0).abs());
        assert!((r.rows[0].tv_gap - direct).abs() < 1e-15);
        assert!(r.rows[0].tv_gap <= 0.7);
    }

    #[test]
    fn permutation_round_trip() {
        let theta = HmmParams::new(q2(0.7, 0.4), vec![pmf(&[0.5, 0.5]), pmf(&[0.9, 0.1])]).unwrap();
        let swapped = theta.permuted(&[1, 0]).unwrap();
        assert_eq!(swapped.transition().get(0, 0), 0.6);
        assert_eq!(swapped.permuted(&[1, 0]).unwrap(), theta);
        assert!(theta.permuted(&[0, 0]).is_err());
    }

    #[test]
    fn json_round_trip_is_deterministic() {
        let theta = HmmParams::new(q2(0.7, 0.4), vec![pmf(&[0.5, 0.5]), pmf(&[0.9, 0.1])]).unwrap();
        let s = serde_json::to_string(&theta).unwrap();
        assert!(s.starts_with(r#"{"k":2,"Q":[[0.7,0.30000000000000004],[0.4,0.6]],"emissions":[{"type":"discrete""#));
        let back: HmmParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, theta);
        assert_eq!(serde_json::to_string(&back).unwrap(), s);
        let bad = s.replacen(r#""k":2"#, r#""k":3"#, 1);
        assert!(serde_json::from_str::<HmmParams>(&bad).is_err());
    }
}
