//! Prior families on transition matrices and emission densities, the rate
//! schedules of the concentration experiments, and Monte Carlo probes of
//! prior mass.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Zeta};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{kl_neighborhood_measure, Measured, Subset};
use crate::emission::{DiscretePmf, EmissionDensity, EnvelopeClassSpec, GaussianMixtureDensity, ObsSpace};
use crate::error::{Error, Result};
use crate::hmm::TransitionMatrix;
use crate::numeric::{isotonic_nondecreasing, mean, power_tail};
use crate::rng::substream;

/// Default number of proposals per row before a rejection sampler gives up.
pub const REJECTION_BUDGET: u64 = 1_000_000;

/// Prior on the rows of the transition matrix. Each row carries the same
/// product density over its entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum QPriorSpec {
    /// Row density proportional to `prod_i exp(-alpha_i / u_i)`.
    Q1 { alpha: Vec<f64> },
    /// Row density proportional to `prod_i exp(-beta_i exp(u_i^(-alpha_i)))`.
    Q2 { alpha: Vec<f64>, beta: Vec<f64> },
    /// Uniform on matrices whose entries are all at least `floor`.
    Q3 { floor: f64 },
}

impl QPriorSpec {
    pub fn q1(alpha: f64, k: usize) -> Self {
        QPriorSpec::Q1 { alpha: vec![alpha; k] }
    }

    pub fn q2(alpha: f64, beta: f64, k: usize) -> Self {
        QPriorSpec::Q2 { alpha: vec![alpha; k], beta: vec![beta; k] }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let positive = |v: &[f64]| v.len() == k && v.iter().all(|x| *x > 0.0 && x.is_finite());
        let ok = match self {
            QPriorSpec::Q1 { alpha } => positive(alpha),
            QPriorSpec::Q2 { alpha, beta } => positive(alpha) && positive(beta),
            QPriorSpec::Q3 { floor } => *floor > 0.0 && *floor * k as f64 <= 1.0 + 1e-12,
        };
        if k == 0 || !ok {
            return Err(Error::InvalidParameter(format!("invalid transition prior for k = {k}: {self:?}")));
        }
        Ok(())
    }

    /// Unnormalized log density of one row.
    pub fn row_ln_density(&self, row: &[f64]) -> f64 {
        match self {
            QPriorSpec::Q1 { alpha } => {
                -row.iter().zip(alpha).map(|(u, a)| if *u > 0.0 { a / u } else { f64::INFINITY }).sum::<f64>()
            }
            QPriorSpec::Q2 { alpha, beta } => -row
                .iter()
                .zip(alpha.iter().zip(beta))
                .map(|(u, (a, b))| if *u > 0.0 { b * u.powf(-a).exp() } else { f64::INFINITY })
                .sum::<f64>(),
            QPriorSpec::Q3 { floor } => {
                if row.iter().all(|u| u >= floor) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    /// Supremum of [`Self::row_ln_density`] over the simplex.
    pub fn row_ln_sup(&self) -> f64 {
        match self {
            QPriorSpec::Q1 { alpha } => -alpha.iter().map(|a| a.sqrt()).sum::<f64>().powi(2),
            QPriorSpec::Q2 { alpha, beta } => q2_row_sup(alpha, beta),
            QPriorSpec::Q3 { .. } => 0.0,
        }
    }
}

// Maximizes -sum_i b_i exp(u_i^-a_i) on the simplex through the Lagrange
// condition b_i a_i u_i^(-a_i-1) exp(u_i^-a_i) = lambda.
fn q2_row_sup(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let ln_h = |i: usize, u: f64| (beta[i] * alpha[i]).ln() - (alpha[i] + 1.0) * u.ln() + u.powf(-alpha[i]);
    // ln h_i is decreasing in u; invert it on (0, 2].
    let u_of = |i: usize, ln_lambda: f64| {
        let (mut lo, mut hi) = (1e-6f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ln_h(i, mid) > ln_lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut lo = (0..k).map(|i| ln_h(i, 1.0)).fold(f64::INFINITY, f64::min);
    let mut hi = (0..k).map(|i| ln_h(i, 1.0 / k as f64)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let total: f64 = (0..k).map(|i| u_of(i, mid)).sum();
        if total > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut u: Vec<f64> = (0..k).map(|i| u_of(i, 0.5 * (lo + hi))).collect();
    let s: f64 = u.iter().sum();
    u.iter_mut().for_each(|x| *x /= s);
    let spec = QPriorSpec::Q2 { alpha: alpha.to_vec(), beta: beta.to_vec() };
    // A small margin keeps the bound above the true supremum after rounding.
    spec.row_ln_density(&u) + 1e-9
}

/// Unnormalized log prior density of a full matrix (product over rows).
pub fn transition_log_density(spec: &QPriorSpec, q: &TransitionMatrix) -> f64 {
    q.rows().map(|r| spec.row_ln_density(r)).sum()
}

/// Log acceptance weight of `row` as a Dirichlet(1, ..., 1) proposal.
pub fn acceptance_ln_weight(spec: &QPriorSpec, row: &[f64]) -> f64 {
    spec.row_ln_density(row) - spec.row_ln_sup()
}

/// Uniform draw on the simplex of dimension `k`.
pub fn uniform_simplex<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let mut e: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|x| *x /= s);
    e
}

fn sample_row<R: Rng + ?Sized>(spec: &QPriorSpec, k: usize, sup: f64, budget: u64, rng: &mut R) -> Result<Vec<f64>> {
    if let QPriorSpec::Q3 { floor } = spec {
        // Affine image of the uniform simplex is uniform on the floored simplex.
        let span = (1.0 - k as f64 * floor).max(0.0);
        return Ok(uniform_simplex(k, rng).into_iter().map(|v| floor + span * v).collect());
    }
    for _ in 0..budget {
        let row = uniform_simplex(k, rng);
        let ln_u = (1.0 - rng.random::<f64>()).ln();
        if ln_u < spec.row_ln_density(&row) - sup {
            return Ok(row);
        }
    }
    Err(Error::RejectionBudget { budget })
}

/// Draws a transition matrix from the prior with the default budget.
pub fn sample_transition_prior<R: Rng + ?Sized>(spec: &QPriorSpec, k: usize, rng: &mut R) -> Result<TransitionMatrix> {
    sample_transition_prior_with_budget(spec, k, REJECTION_BUDGET, rng)
}

pub fn sample_transition_prior_with_budget<R: Rng + ?Sized>(
    spec: &QPriorSpec,
    k: usize,
    budget: u64,
    rng: &mut R,
) -> Result<TransitionMatrix> {
    spec.validate(k)?;
    let sup = spec.row_ln_sup();
    let mut data = Vec::with_capacity(k * k);
    for _ in 0..k {
        data.extend(sample_row(spec, k, sup, budget, rng)?);
    }
    TransitionMatrix::normalized(k, data)
}

/// Probability that a prior draw leaves `Delta(q)`, with its MC error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QTailEstimate {
    pub q: f64,
    pub estimate: f64,
    pub se: f64,
}

/// Estimates `P(min_ij Q_ij < q)` for every `q` on the grid from one set of
/// `n_mc` prior draws, smoothed to be nondecreasing in `q`.
pub fn prior_q_tail_estimate<R: Rng + ?Sized>(
    spec: &QPriorSpec,
    k: usize,
    q_grid: &[f64],
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<QTailEstimate>> {
    if n_mc < 1000 {
        return Err(Error::InvalidParameter("prior tail estimates need at least 1000 draws".into()));
    }
    let mins: Vec<f64> =
        (0..n_mc).map(|_| sample_transition_prior(spec, k, rng).map(|q| q.min_entry())).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..q_grid.len()).collect();
    order.sort_by(|&a, &b| q_grid[a].total_cmp(&q_grid[b]));
    let raw: Vec<f64> =
        order.iter().map(|&g| mins.iter().filter(|&&m| m < q_grid[g]).count() as f64 / n_mc as f64).collect();
    let smooth = isotonic_nondecreasing(&raw);
    let mut out = vec![QTailEstimate { q: 0.0, estimate: 0.0, se: 0.0 }; q_grid.len()];
    for (pos, &g) in order.iter().enumerate() {
        let p = smooth[pos];
        out[g] = QTailEstimate { q: q_grid[g], estimate: p, se: (p * (1.0 - p) / n_mc as f64).sqrt() };
    }
    Ok(out)
}

/// Paired comparison of two transition priors at one floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTail {
    pub q: f64,
    pub first: f64,
    pub second: f64,
    /// `second - first`.
    pub difference: f64,
    pub se: f64,
}

/// Compares the tail probabilities of two priors by self-normalized
/// importance sampling on shared uniform proposals.
pub fn paired_q_tail_comparison<R: Rng + ?Sized>(
    first: &QPriorSpec,
    second: &QPriorSpec,
    k: usize,
    q_grid: &[f64],
    n_proposals: usize,
    rng: &mut R,
) -> Result<Vec<PairedTail>> {
    first.validate(k)?;
    second.validate(k)?;
    let (sup_a, sup_b) = (first.row_ln_sup(), second.row_ln_sup());
    let mut wa = Vec::with_capacity(n_proposals);
    let mut wb = Vec::with_capacity(n_proposals);
    let mut mins = Vec::with_capacity(n_proposals);
    for _ in 0..n_proposals {
        let rows: Vec<Vec<f64>> = (0..k).map(|_| uniform_simplex(k, rng)).collect();
        wa.push(rows.iter().map(|r| first.row_ln_density(r) - sup_a).sum::<f64>().exp());
        wb.push(rows.iter().map(|r| second.row_ln_density(r) - sup_b).sum::<f64>().exp());
        mins.push(rows.iter().flatten().copied().fold(f64::INFINITY, f64::min));
    }
    let (ma, mb) = (mean(&wa), mean(&wb));
    if !(ma > 0.0 && mb > 0.0) {
        return Err(Error::InvalidParameter("no proposal carries prior weight".into()));
    }
    Ok(q_grid
        .iter()
        .map(|&q| {
            let h: Vec<f64> = mins.iter().map(|&m| if m < q { 1.0 } else { 0.0 }).collect();
            let pa = wa.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() / (ma * n_proposals as f64);
            let pb = wb.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() / (mb * n_proposals as f64);
            let psi: Vec<f64> =
                (0..n_proposals).map(|i| wb[i] / mb * (h[i] - pb) - wa[i] / ma * (h[i] - pa)).collect();
            let var = psi.iter().map(|x| x * x).sum::<f64>() / n_proposals as f64;
            PairedTail { q, first: pa, second: pb, difference: pb - pa, se: (var / n_proposals as f64).sqrt() }
        })
        .collect())
}

/// Stick-breaking truncation policy: stop once the unallocated mass drops
/// below `eps`, or after `h` sticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub h: usize,
    pub eps: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { h: 100, eps: 1e-6 }
    }
}

/// Dirichlet process prior on pmfs over `{1, 2, ...}` with base measure
/// `G(l) = c0 l^(-alpha_g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpDiscreteSpec {
    pub c0: f64,
    pub alpha_g: f64,
    /// Stored support of sampled pmfs; atoms beyond it go to the tail cell.
    pub v_max: u64,
    pub truncation: Truncation,
}

impl Default for DpDiscreteSpec {
    fn default() -> Self {
        DpDiscreteSpec { c0: 1.0, alpha_g: 2.0, v_max: 100, truncation: Truncation::default() }
    }
}

impl DpDiscreteSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.alpha_g >= 2.0 && self.v_max >= 1 && self.truncation.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid DP spec {self:?}")));
        }
        Ok(())
    }

    pub fn base(&self, l: u64) -> f64 {
        self.c0 * (l as f64).powf(-self.alpha_g)
    }

    /// `G({l >= from})`.
    pub fn base_tail(&self, from: u64) -> f64 {
        self.c0 * power_tail(self.alpha_g, from)
    }

    pub fn total_mass(&self) -> f64 {
        self.base_tail(1)
    }

    /// Rate of the geometric continuation matching `G` at the first cell
    /// beyond `v`.
    pub fn tail_rate_after(&self, v: u64) -> f64 {
        (1.0 - self.base(v + 1) / self.base_tail(v + 1)).clamp(0.0, 1.0 - 1e-15)
    }

    /// Checks `a l^-alpha <= G(l) <= A l^-alpha` with `a = A = c0` for
    /// every `l <= l_max`.
    pub fn bracket_holds(&self, l_max: u64) -> bool {
        (1..=l_max).all(|l| {
            let envelope = self.c0 * (l as f64).powf(-self.alpha_g);
            let g = self.base(l);
            envelope <= g && g <= envelope
        })
    }
}

/// One truncated stick-breaking draw.
#[derive(Debug, Clone, PartialEq)]
pub struct StickDraw<T> {
    pub density: T,
    /// Unallocated mass at the stopping point, before folding.
    pub residual: f64,
    pub sticks: usize,
}

// Beta(1, b) by inversion.
fn beta_one<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    1.0 - u.powf(1.0 / b)
}

/// Stick weights until the residual falls below `eps` or `h` sticks are
/// used; the residual is folded into the last stick.
fn stick_weights<R: Rng + ?Sized>(mass: f64, trunc: &Truncation, rng: &mut R) -> (Vec<f64>, f64) {
    let mut weights = Vec::new();
    let mut rest = 1.0;
    while weights.len() < trunc.h.max(1) {
        let v = beta_one(mass, rng);
        weights.push(rest * v);
        rest *= 1.0 - v;
        if rest < trunc.eps {
            break;
        }
    }
    if let Some(last) = weights.last_mut() {
        *last += rest;
    }
    (weights, rest)
}

/// Draws a pmf from `DP(G)` by truncated stick-breaking.
pub fn sample_dp_discrete<R: Rng + ?Sized>(spec: &DpDiscreteSpec, rng: &mut R) -> Result<StickDraw<DiscretePmf>> {
    spec.validate()?;
    let atoms = Zeta::new(spec.alpha_g).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (weights, residual) = stick_weights(spec.total_mass(), &spec.truncation, rng);
    let v = spec.v_max;
    let mut probs = vec![0.0; v as usize];
    let mut tail = 0.0;
    for w in &weights {
        let l = atoms.sample(rng) as u64;
        if l <= v {
            probs[(l - 1) as usize] += w;
        } else {
            tail += w;
        }
    }
    let pmf = DiscretePmf::from_weights(&probs, tail, spec.tail_rate_after(v))?;
    Ok(StickDraw { density: pmf, residual, sticks: weights.len() })
}

/// Log of a Gamma(shape, 1) variate, accurate for tiny shapes.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    } else {
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u = 1.0 - rng.random::<f64>();
        g.ln() + u.ln() / shape
    }
}

/// Exact draw of the cell masses of a `DP(G + counts)` measure on the
/// partition `{1}, ..., {v_cut}, {l > v_cut}`, computed in log space so
/// that cells with tiny base mass keep a finite logarithm. The tail cell
/// spreads its mass geometrically, matching `G` at its first point.
pub fn sample_dp_cells<R: Rng + ?Sized>(
    spec: &DpDiscreteSpec,
    v_cut: u64,
    counts: &[u64],
    tail_count: u64,
    rng: &mut R,
) -> Result<DiscretePmf> {
    spec.validate()?;
    if counts.len() as u64 > v_cut || v_cut == 0 {
        return Err(Error::InvalidParameter("counts extend beyond the partition".into()));
    }
    let ln_w: Vec<f64> = (1..=v_cut)
        .map(|l| {
            let n = counts.get((l - 1) as usize).copied().unwrap_or(0);
            ln_gamma_variate(spec.base(l) + n as f64, rng)
        })
        .collect();
    let ln_tail = ln_gamma_variate(spec.base_tail(v_cut + 1) + tail_count as f64, rng);
    DiscretePmf::from_ln_weights(&ln_w, ln_tail, spec.tail_rate_after(v_cut))
}

/// DP mixture of Gaussian location kernels with one shared bandwidth:
/// locations from `N(base_mean, base_scale^2)`, DP mass `mass`, and
/// `sigma ~ InverseGamma(sigma_shape, sigma_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpmGaussianSpec {
    pub base_mean: f64,
    pub base_scale: f64,
    pub mass: f64,
    pub sigma_shape: f64,
    pub sigma_scale: f64,
    pub truncation: Truncation,
}

impl Default for DpmGaussianSpec {
    fn default() -> Self {
        DpmGaussianSpec {
            base_mean: 0.0,
            base_scale: 3.0,
            mass: 1.0,
            sigma_shape: 2.0,
            sigma_scale: 1.0,
            truncation: Truncation::default(),
        }
    }
}

impl DpmGaussianSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.base_scale >= 0.0
            && self.base_mean.is_finite()
            && self.mass > 0.0
            && self.sigma_shape > 0.0
            && self.sigma_scale > 0.0
            && self.truncation.eps > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid DPM spec {self:?}")));
        }
        Ok(())
    }

    pub fn sample_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = Gamma::new(self.sigma_shape, 1.0 / self.sigma_scale).expect("valid gamma").sample(rng);
        1.0 / g
    }

    /// Inverse-gamma log density of `sigma` up to an additive constant.
    pub fn sigma_ln_density(&self, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -(self.sigma_shape + 1.0) * sigma.ln() - self.sigma_scale / sigma
    }

    pub fn sample_location<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.base_mean + self.base_scale * rng.sample::<f64, _>(rand_distr::StandardNormal)
    }

    /// Mixing measure drawn by stick-breaking for a given bandwidth.
    pub fn sample_with_sigma<R: Rng + ?Sized>(
        &self,
        sigma: f64,
        rng: &mut R,
    ) -> Result<StickDraw<GaussianMixtureDensity>> {
        let (weights, residual) = stick_weights(self.mass, &self.truncation, rng);
        let locations = weights.iter().map(|_| self.sample_location(rng)).collect();
        let density = GaussianMixtureDensity::normalized(weights, locations, sigma)?;
        let sticks = density.weights().len();
        Ok(StickDraw { density, residual, sticks })
    }
}

/// Draws one emission density from the DPM prior, bandwidth included.
pub fn sample_dpm_gaussian<R: Rng + ?Sized>(
    spec: &DpmGaussianSpec,
    rng: &mut R,
) -> Result<StickDraw<GaussianMixtureDensity>> {
    spec.validate()?;
    let sigma = spec.sample_sigma(rng);
    spec.sample_with_sigma(sigma, rng)
}

/// Prior on the emission densities of all states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum EmissionPrior {
    Dp(DpDiscreteSpec),
    Dpm(DpmGaussianSpec),
}

impl EmissionPrior {
    pub fn space(&self) -> ObsSpace {
        match self {
            EmissionPrior::Dp(_) => ObsSpace::Discrete,
            EmissionPrior::Dpm(_) => ObsSpace::Continuous,
        }
    }

    /// Independent DP draws per state; in the mixture case all states
    /// share one bandwidth.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<Vec<EmissionDensity>> {
        match self {
            EmissionPrior::Dp(spec) => {
                (0..k).map(|_| sample_dp_discrete(spec, rng).map(|d| EmissionDensity::Discrete(d.density))).collect()
            }
            EmissionPrior::Dpm(spec) => {
                spec.validate()?;
                let sigma = spec.sample_sigma(rng);
                (0..k)
                    .map(|_| spec.sample_with_sigma(sigma, rng).map(|d| EmissionDensity::Gmix(d.density)))
                    .collect()
            }
        }
    }
}

/// Joint prior on `(Q, f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub transition: QPriorSpec,
    pub emission: EmissionPrior,
}

/// `scale * n^(-n_exponent) * (ln n)^log_power`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFn {
    pub scale: f64,
    pub n_exponent: f64,
    pub log_power: f64,
}

impl RateFn {
    pub fn eval(&self, n: f64) -> f64 {
        self.scale * n.powf(-self.n_exponent) * n.ln().powf(self.log_power)
    }
}

/// Which form of the `u_n` sequence applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UBranch {
    /// `u_n = 1`.
    One,
    /// `u_n = (ln n)^(3/2)`.
    LogPower,
}

/// The pair of rates `eps_tilde(n) <= eps(n)`, the `u_n` branch and the
/// experiment constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSchedule {
    pub eps_tilde: RateFn,
    pub eps: RateFn,
    pub u_branch: UBranch,
    pub t0: f64,
    pub t: f64,
    /// Radius multiplier `M`.
    pub m_const: f64,
}

impl RateSchedule {
    /// `n^(-1/2) (ln n)^t0` and `n^(-1/2) (ln n)^t`; the rate is not of
    /// polynomial order below 1/2, so `u_n = (ln n)^(3/2)`.
    pub fn discrete(t0: f64, t: f64, m_const: f64) -> Self {
        RateSchedule {
            eps_tilde: RateFn { scale: 1.0, n_exponent: 0.5, log_power: t0 },
            eps: RateFn { scale: 1.0, n_exponent: 0.5, log_power: t },
            u_branch: UBranch::LogPower,
            t0,
            t,
            m_const,
        }
    }

    /// `n^(-beta/(2 beta + 1)) (ln n)^t0`, with `u_n = 1`.
    pub fn holder(beta: f64, t0: f64, t: f64, m_const: f64) -> Self {
        let e = beta / (2.0 * beta + 1.0);
        RateSchedule {
            eps_tilde: RateFn { scale: 1.0, n_exponent: e, log_power: t0 },
            eps: RateFn { scale: 1.0, n_exponent: e, log_power: t },
            u_branch: UBranch::One,
            t0,
            t,
            m_const,
        }
    }

    pub fn eps(&self, n: u64) -> f64 {
        self.eps.eval(n as f64)
    }

    pub fn eps_tilde(&self, n: u64) -> f64 {
        self.eps_tilde.eval(n as f64)
    }

    pub fn u(&self, n: u64) -> f64 {
        match self.u_branch {
            UBranch::One => 1.0,
            UBranch::LogPower => (n as f64).ln().powf(1.5),
        }
    }

    /// Checks `eps_tilde <= eps` and that `n eps_tilde^2` increases along
    /// the grid.
    pub fn check_grid(&self, grid: &[u64]) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for &n in grid {
            if n < 3 {
                return Err(Error::DegenerateGrid(format!("n = {n} is too small for log rates")));
            }
            if self.eps_tilde(n) > self.eps(n) {
                return Err(Error::DegenerateGrid(format!("eps_tilde exceeds eps at n = {n}")));
            }
            let growth = n as f64 * self.eps_tilde(n).powi(2);
            if growth <= last {
                return Err(Error::DegenerateGrid(format!("n eps_tilde^2 does not increase at n = {n}")));
            }
            last = growth;
        }
        Ok(())
    }
}

/// Probability estimate that may fall below the Monte Carlo resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MassEstimate {
    Estimate { p: f64, se: f64, ln_p: f64, ln_se: f64 },
    BelowResolution { bound: f64 },
}

impl MassEstimate {
    pub fn from_hits(hits: usize, n: usize) -> Self {
        if hits == 0 {
            return MassEstimate::BelowResolution { bound: 1.0 / n as f64 };
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        MassEstimate::Estimate { p, se, ln_p: p.ln(), ln_se: se / p }
    }

    pub fn ln_p(&self) -> Option<f64> {
        match self {
            MassEstimate::Estimate { ln_p, .. } => Some(*ln_p),
            MassEstimate::BelowResolution { .. } => None,
        }
    }
}

impl fmt::Display for MassEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassEstimate::Estimate { p, se, .. } => write!(f, "{p:.6e} (se {se:.2e})"),
            MassEstimate::BelowResolution { bound } => write!(f, "< {bound:.2e}"),
        }
    }
}

/// Where the neighborhood probe places its set `S`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum ProbeRegion {
    /// `S = {1, ..., L}` with `L` from the envelope class and sample size.
    Discrete { class: EnvelopeClassSpec, n: u64 },
    /// `S` is the union of the truths' effective ranges.
    Continuous,
}

/// `L = ((-ln(eps_tilde^2 / (u_n ln ln n))) / (c - delta))^(1/m)`, rounded up
/// and at least 1.
pub fn probe_subset_size(class: &EnvelopeClassSpec, eps_tilde: f64, u_n: f64, n: u64) -> u64 {
    let lln = (n as f64).ln().ln().max(1e-12);
    let x = -(eps_tilde * eps_tilde / (u_n * lln)).ln() / (class.c - class.delta);
    if x <= 0.0 || !x.is_finite() {
        return 1;
    }
    (x.powf(1.0 / class.m).ceil() as u64).max(1)
}

/// One row of [`prior_mass_kl_neighborhood`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlProbeEstimate {
    pub eps_tilde: f64,
    pub subset: Subset,
    pub hits: usize,
    pub n_mc: usize,
    pub mass: MassEstimate,
}

/// Fraction of joint prior draws `(f_1, ..., f_k)` lying in the
/// neighborhood of `fstar` at each `eps_tilde`, with `f_tilde = f`. All
/// radii are evaluated on the same draws. Discrete draws use the exact DP
/// cell law on `{1, ..., V}` plus one tail cell, with `V` beyond the
/// region where the truths carry mass above 1e-30.
pub fn prior_mass_kl_neighborhood(
    prior: &EmissionPrior,
    fstar: &[EmissionDensity],
    eps_tilde: &[f64],
    u_n: f64,
    region: &ProbeRegion,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<KlProbeEstimate>> {
    if fstar.is_empty() || n_mc == 0 || eps_tilde.iter().any(|e| !(*e > 0.0)) || !(u_n > 0.0) {
        return Err(Error::InvalidParameter("probe needs truths, positive radii and draws".into()));
    }
    let k = fstar.len();
    let subsets: Vec<Subset> = match (prior, region) {
        (EmissionPrior::Dp(_), ProbeRegion::Discrete { class, n }) => eps_tilde
            .iter()
            .map(|&e| Subset::Counts { lo: 1, hi: probe_subset_size(class, e, u_n, *n) })
            .collect(),
        (EmissionPrior::Dpm(_), ProbeRegion::Continuous) => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for f in fstar {
                let g = f.as_gmix().ok_or(Error::MixedSpace)?;
                let (a, b) = g.range();
                lo = lo.min(a);
                hi = hi.max(b);
            }
            vec![Subset::Interval { lo, hi }; eps_tilde.len()]
        }
        _ => return Err(Error::MixedSpace),
    };
    let v_cut = match prior {
        EmissionPrior::Dp(_) => {
            let pmfs: Vec<&DiscretePmf> =
                fstar.iter().map(|f| f.as_discrete().ok_or(Error::MixedSpace)).collect::<Result<_>>()?;
            let l_max = subsets.iter().map(|s| if let Subset::Counts { hi, .. } = s { *hi } else { 0 }).max();
            let mut v = l_max.unwrap_or(1).max(1);
            while v < 5000 && pmfs.iter().any(|p| p.mass_from(v + 1) > 1e-30) {
                v += 1;
            }
            v
        }
        EmissionPrior::Dpm(_) => 0,
    };
    let hits: Vec<Vec<bool>> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            let draw: Vec<EmissionDensity> = match prior {
                EmissionPrior::Dp(spec) => (0..k)
                    .map(|_| sample_dp_cells(spec, v_cut, &[], 0, &mut rng).map(EmissionDensity::Discrete))
                    .collect::<Result<_>>()?,
                EmissionPrior::Dpm(_) => prior.sample(k, &mut rng)?,
            };
            // Radii sharing a subset share one measurement.
            let mut cache: Vec<(Subset, Measured)> = Vec::new();
            eps_tilde
                .iter()
                .zip(&subsets)
                .map(|(&e, s)| {
                    let m = match cache.iter().find(|c| c.0 == *s) {
                        Some(c) => c.1,
                        None => {
                            let m = kl_neighborhood_measure(fstar, &draw, &draw, s)?;
                            cache.push((*s, m));
                            m
                        }
                    };
                    Ok(m.evaluate(e, u_n).all_pass)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(eps_tilde
        .iter()
        .enumerate()
        .map(|(g, &e)| {
            let h = hits.iter().filter(|row| row[g]).count();
            KlProbeEstimate { eps_tilde: e, subset: subsets[g], hits: h, n_mc, mass: MassEstimate::from_hits(h, n_mc) }
        })
        .collect())
}
