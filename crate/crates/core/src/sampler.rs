//! Posterior simulation: forward-filtering backward-sampling of the hidden
//! path, Metropolis-Hastings row updates for the transition matrix, and
//! conjugate or blocked-Gibbs updates for the emissions.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{d_ell, DEllMethod};
use crate::emission::{as_count, DiscretePmf, EmissionDensity, GaussianMixtureDensity, ObsSpace};
use crate::error::{Error, Result};
use crate::hmm::{forward_filter_ln, sample_index, simulate, FilterTrace, HmmParams, TransitionMatrix};
use crate::numeric::{batch_means_se, ln_normal_pdf, log_sum_exp, mean, median, quantile, variance};
use crate::priors::{
    sample_dp_cells, sample_transition_prior, DpDiscreteSpec, DpmGaussianSpec, EmissionPrior, PriorSpec, QPriorSpec,
    RateSchedule, Truncation,
};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    DiscreteDp,
    ContinuousDpm,
}

/// Settings of one Gibbs chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub model: ModelKind,
    pub k: usize,
    pub prior: PriorSpec,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Overrides the truncation of the emission prior.
    pub truncation: Truncation,
    /// Random-walk scale of the `log sigma` proposal.
    pub mh_step: f64,
}

impl GibbsConfig {
    /// DP emissions, uniform prior on `Delta_k^k(0.05)`, 5000 iterations,
    /// 1000 burn-in, thin 4.
    pub fn discrete(k: usize, seed: u64) -> Self {
        GibbsConfig {
            model: ModelKind::DiscreteDp,
            k,
            prior: PriorSpec { transition: QPriorSpec::Q3 { floor: 0.05 }, emission: EmissionPrior::Dp(DpDiscreteSpec::default()) },
            iterations: 5000,
            burn_in: 1000,
            thin: 4,
            seed,
            truncation: Truncation::default(),
            mh_step: 0.1,
        }
    }

    /// DPM Gaussian emissions with a shared bandwidth; otherwise as
    /// [`GibbsConfig::discrete`].
    pub fn continuous(k: usize, seed: u64) -> Self {
        GibbsConfig {
            model: ModelKind::ContinuousDpm,
            prior: PriorSpec {
                transition: QPriorSpec::Q3 { floor: 0.05 },
                emission: EmissionPrior::Dpm(DpmGaussianSpec::default()),
            },
            ..Self::discrete(k, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind_matches = matches!(
            (self.model, &self.prior.emission),
            (ModelKind::DiscreteDp, EmissionPrior::Dp(_)) | (ModelKind::ContinuousDpm, EmissionPrior::Dpm(_))
        );
        if !kind_matches {
            return Err(Error::InvalidParameter("model kind does not match the emission prior".into()));
        }
        if self.iterations < self.burn_in || self.thin == 0 || self.k == 0 {
            return Err(Error::InvalidParameter("need iterations >= burn_in, thin >= 1 and k >= 1".into()));
        }
        if !(self.mh_step > 0.0 && self.truncation.eps > 0.0 && self.truncation.h >= 1) {
            return Err(Error::InvalidParameter("mh_step and truncation must be positive".into()));
        }
        self.prior.transition.validate(self.k)?;
        match &self.prior.emission {
            EmissionPrior::Dp(s) => s.validate(),
            EmissionPrior::Dpm(s) => s.validate(),
        }
    }

    fn dp(&self) -> DpDiscreteSpec {
        match self.prior.emission {
            EmissionPrior::Dp(s) => DpDiscreteSpec { truncation: self.truncation, ..s },
            EmissionPrior::Dpm(_) => unreachable!("validated"),
        }
    }

    fn dpm(&self) -> DpmGaussianSpec {
        match self.prior.emission {
            EmissionPrior::Dpm(s) => DpmGaussianSpec { truncation: self.truncation, ..s },
            EmissionPrior::Dp(_) => unreachable!("validated"),
        }
    }

    /// Number of blocked components: the smallest `H` whose expected
    /// leftover stick mass `(M/(M+1))^H` is below `eps`, capped at `h`.
    pub fn blocked_components(&self) -> usize {
        let m = self.dpm().mass;
        let need = (self.truncation.eps.ln() / (m / (m + 1.0)).ln()).ceil() as usize;
        need.clamp(2, self.truncation.h.max(2))
    }
}

/// Emission parameters carried by the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum EmissionState {
    DiscreteDp { pmfs: Vec<DiscretePmf> },
    /// Blocked mixtures: per state weights and locations, one bandwidth.
    ContinuousDpm { weights: Vec<Vec<f64>>, locations: Vec<Vec<f64>>, sigma: f64 },
}

impl EmissionState {
    pub fn densities(&self) -> Result<Vec<EmissionDensity>> {
        match self {
            EmissionState::DiscreteDp { pmfs } => Ok(pmfs.iter().cloned().map(EmissionDensity::Discrete).collect()),
            EmissionState::ContinuousDpm { weights, locations, sigma } => weights
                .iter()
                .zip(locations)
                .map(|(w, z)| GaussianMixtureDensity::normalized(w.clone(), z.clone(), *sigma).map(EmissionDensity::Gmix))
                .collect(),
        }
    }
}

/// Transition matrix and emissions of one chain iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub transition: TransitionMatrix,
    pub emissions: EmissionState,
}

impl ChainState {
    /// A draw from the prior in the chain's own representation.
    pub fn from_prior<R: Rng + ?Sized>(config: &GibbsConfig, rng: &mut R) -> Result<Self> {
        let transition = sample_transition_prior(&config.prior.transition, config.k, rng)?;
        let emissions = match config.model {
            ModelKind::DiscreteDp => {
                let spec = config.dp();
                let pmfs = (0..config.k).map(|_| sample_dp_cells(&spec, spec.v_max, &[], 0, rng)).collect::<Result<_>>()?;
                EmissionState::DiscreteDp { pmfs }
            }
            ModelKind::ContinuousDpm => {
                let spec = config.dpm();
                let h = config.blocked_components();
                let sigma = spec.sample_sigma(rng);
                let mut weights = Vec::with_capacity(config.k);
                let mut locations = Vec::with_capacity(config.k);
                for _ in 0..config.k {
                    weights.push(blocked_sticks(&vec![0; h], spec.mass, rng));
                    locations.push((0..h).map(|_| spec.sample_location(rng)).collect());
                }
                EmissionState::ContinuousDpm { weights, locations, sigma }
            }
        };
        Ok(ChainState { transition, emissions })
    }

    pub fn params(&self) -> Result<HmmParams> {
        HmmParams::new(self.transition.clone(), self.emissions.densities()?)
    }
}

/// Backward sampling from a filter trace: `X_n` from the last filtered
/// law, then `X_t` proportional to `filtered_t(i) Q(i, x_{t+1})`.
pub fn ffbs_from_trace<R: Rng + ?Sized>(q: &TransitionMatrix, trace: &FilterTrace, rng: &mut R) -> Vec<usize> {
    let n = trace.len();
    let k = q.k();
    let mut x = vec![0; n];
    if n == 0 {
        return x;
    }
    x[n - 1] = sample_index(trace.filtered_row(n - 1), rng);
    let mut w = vec![0.0; k];
    for t in (0..n - 1).rev() {
        let f = trace.filtered_row(t);
        for i in 0..k {
            w[i] = f[i] * q.get(i, x[t + 1]);
        }
        x[t] = sample_index(&w, rng);
    }
    x
}

/// Exact draw of the hidden path given the observations, started from
/// the stationary law of `Q`.
pub fn ffbs_states<R: Rng + ?Sized>(theta: &HmmParams, obs: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let mu = theta.stationary()?;
    let trace = forward_filter_ln(theta.transition(), mu.probs(), &theta.ln_emission_matrix(obs)?)?;
    Ok(ffbs_from_trace(theta.transition(), &trace, rng))
}

/// Row-major `k x k` transition counts of a path.
pub fn transition_counts(states: &[usize], k: usize) -> Vec<u64> {
    let mut c = vec![0; k * k];
    for w in states.windows(2) {
        c[w[0] * k + w[1]] += 1;
    }
    c
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let mut g: Vec<f64> = alpha.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape").sample(rng)).collect();
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|x| *x /= s);
    g
}

/// One Metropolis-Hastings sweep over the rows of `Q`. Each row is
/// proposed from `Dirichlet(1 + counts)`, which cancels the transition
/// likelihood, so the acceptance ratio is the prior factor ratio times,
/// when `first` is given, the ratio of stationary probabilities of the
/// first state. Returns the new matrix and one accept flag per row.
pub fn update_transition<R: Rng + ?Sized>(
    counts: &[u64],
    first: Option<usize>,
    prior: &QPriorSpec,
    current: &TransitionMatrix,
    rng: &mut R,
) -> Result<(TransitionMatrix, Vec<bool>)> {
    let k = current.k();
    if counts.len() != k * k {
        return Err(Error::InvalidParameter("transition counts must be k x k".into()));
    }
    let mut q = current.clone();
    let mut accepted = Vec::with_capacity(k);
    let ln_start = |m: &TransitionMatrix| -> f64 {
        match first {
            Some(x) => crate::hmm::stationary_distribution(m).map_or(f64::NEG_INFINITY, |mu| mu.probs()[x].ln()),
            None => 0.0,
        }
    };
    for i in 0..k {
        let alpha: Vec<f64> = counts[i * k..(i + 1) * k].iter().map(|&c| 1.0 + c as f64).collect();
        let row = dirichlet(&alpha, rng);
        let new_ln = prior.row_ln_density(&row);
        let ok = if new_ln == f64::NEG_INFINITY {
            false
        } else {
            let proposal = q.with_row(i, &row)?;
            let ln_ratio = new_ln - prior.row_ln_density(q.row(i)) + ln_start(&proposal) - ln_start(&q);
            let u: f64 = rng.random();
            if ln_ratio >= 0.0 || u.ln() < ln_ratio {
                q = proposal;
                true
            } else {
                false
            }
        };
        accepted.push(ok);
    }
    Ok((q, accepted))
}

/// Observations grouped by hidden state.
pub fn assignments(states: &[usize], obs: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); k];
    for (&x, &y) in states.iter().zip(obs) {
        out[x].push(y);
    }
    out
}

/// Conjugate update of DP emissions: `DP(G + sum delta_y)` on the cells
/// `{1..V}` plus a tail cell, `V = max(v_max, max y)`.
pub fn update_discrete_emissions<R: Rng + ?Sized>(
    groups: &[Vec<f64>],
    spec: &DpDiscreteSpec,
    rng: &mut R,
) -> Result<Vec<DiscretePmf>> {
    let mut v_cut = spec.v_max;
    for y in groups.iter().flatten() {
        let c = as_count(*y)?;
        if c == 0 {
            return Err(Error::Domain(*y));
        }
        v_cut = v_cut.max(c);
    }
    groups
        .iter()
        .map(|g| {
            let mut counts = vec![0u64; v_cut as usize];
            for &y in g {
                counts[(y as u64 - 1) as usize] += 1;
            }
            sample_dp_cells(spec, v_cut, &counts, 0, rng)
        })
        .collect()
}

// Stick weights of a blocked DP given component counts: V_h ~ Beta(1 +
// n_h, M + n_{>h}) for h < H, the last weight takes what is left.
fn blocked_sticks<R: Rng + ?Sized>(counts: &[usize], mass: f64, rng: &mut R) -> Vec<f64> {
    let h = counts.len();
    let mut after: usize = counts.iter().sum();
    let mut w = Vec::with_capacity(h);
    let mut rest = 1.0;
    for &c in &counts[..h - 1] {
        after -= c;
        let v: f64 = Beta::new(1.0 + c as f64, mass + after as f64).expect("valid beta").sample(rng);
        w.push(rest * v);
        rest *= 1.0 - v;
    }
    w.push(rest);
    w
}

/// Outcome of one blocked-Gibbs sweep of the mixture emissions.
struct DpmSweep {
    weights: Vec<Vec<f64>>,
    locations: Vec<Vec<f64>>,
    sigma: f64,
    sigma_accepted: usize,
}

/// Random-walk steps on `log sigma` per sweep.
pub const SIGMA_STEPS: usize = 25;

fn dpm_sweep<R: Rng + ?Sized>(
    groups: &[Vec<f64>],
    spec: &DpmGaussianSpec,
    weights: &[Vec<f64>],
    locations: &[Vec<f64>],
    sigma: f64,
    mh_step: f64,
    rng: &mut R,
) -> DpmSweep {
    let h = weights[0].len();
    let mut new_w = Vec::with_capacity(groups.len());
    let mut new_z = Vec::with_capacity(groups.len());
    // Allocations are needed again for the bandwidth step.
    let mut alloc: Vec<Vec<usize>> = Vec::with_capacity(groups.len());
    let mut ln_p = vec![0.0; h];
    for (j, g) in groups.iter().enumerate() {
        let ln_w: Vec<f64> = weights[j].iter().map(|w| w.ln()).collect();
        let mut a = Vec::with_capacity(g.len());
        for &y in g {
            for c in 0..h {
                ln_p[c] = ln_w[c] + ln_normal_pdf(y, locations[j][c], sigma);
            }
            let m = log_sum_exp(&ln_p);
            let p: Vec<f64> = ln_p.iter().map(|l| (l - m).exp()).collect();
            a.push(sample_index(&p, rng));
        }
        let mut counts = vec![0usize; h];
        let mut sums = vec![0.0; h];
        for (&c, &y) in a.iter().zip(g) {
            counts[c] += 1;
            sums[c] += y;
        }
        new_w.push(blocked_sticks(&counts, spec.mass, rng));
        let z: Vec<f64> = (0..h)
            .map(|c| {
                if spec.base_scale == 0.0 {
                    return spec.base_mean;
                }
                let prec = 1.0 / spec.base_scale.powi(2) + counts[c] as f64 / (sigma * sigma);
                let m = (spec.base_mean / spec.base_scale.powi(2) + sums[c] / (sigma * sigma)) / prec;
                m + rng.sample::<f64, _>(StandardNormal) / prec.sqrt()
            })
            .collect();
        new_z.push(z);
        alloc.push(a);
    }
    // Random walk on log sigma against the shared residuals.
    let mut ss = 0.0;
    let mut n = 0usize;
    for (j, g) in groups.iter().enumerate() {
        for (&c, &y) in alloc[j].iter().zip(g) {
            ss += (y - new_z[j][c]).powi(2);
            n += 1;
        }
    }
    let ln_target = |s: f64| spec.sigma_ln_density(s) - n as f64 * s.ln() - ss / (2.0 * s * s) + s.ln();
    // The target only needs (ss, n), so extra steps are nearly free.
    let mut sigma = sigma;
    let mut current = ln_target(sigma);
    let mut sigma_accepted = 0;
    for _ in 0..SIGMA_STEPS {
        let prop = sigma * (mh_step * rng.sample::<f64, _>(StandardNormal)).exp();
        let next = ln_target(prop);
        let u: f64 = rng.random();
        if next >= current || u.ln() < next - current {
            sigma = prop;
            current = next;
            sigma_accepted += 1;
        }
    }
    DpmSweep { weights: new_w, locations: new_z, sigma, sigma_accepted }
}

/// Emission update given the observations grouped by state. Returns the
/// new state and, for the mixture model, how many of the `SIGMA_STEPS`
/// bandwidth moves were accepted.
pub fn update_emissions<R: Rng + ?Sized>(
    groups: &[Vec<f64>],
    config: &GibbsConfig,
    current: &EmissionState,
    rng: &mut R,
) -> Result<(EmissionState, Option<usize>)> {
    match current {
        EmissionState::DiscreteDp { .. } => {
            let pmfs = update_discrete_emissions(groups, &config.dp(), rng)?;
            Ok((EmissionState::DiscreteDp { pmfs }, None))
        }
        EmissionState::ContinuousDpm { weights, locations, sigma } => {
            let s = dpm_sweep(groups, &config.dpm(), weights, locations, *sigma, config.mh_step, rng);
            Ok((
                EmissionState::ContinuousDpm { weights: s.weights, locations: s.locations, sigma: s.sigma },
                Some(s.sigma_accepted),
            ))
        }
    }
}

/// Acceptance bookkeeping of one sweep.
#[derive(Debug, Clone, Copy, Default)]
struct SweepStats {
    rows_accepted: usize,
    rows: usize,
    sigma_accepted: usize,
    sigma_moves: usize,
}

/// One full cycle: FFBS, transition rows, emissions.
fn gibbs_sweep<R: Rng + ?Sized>(
    state: &ChainState,
    obs: &[f64],
    config: &GibbsConfig,
    rng: &mut R,
) -> Result<(ChainState, SweepStats)> {
    let theta = state.params()?;
    let states = ffbs_states(&theta, obs, rng)?;
    let counts = transition_counts(&states, config.k);
    let (transition, acc) =
        update_transition(&counts, states.first().copied(), &config.prior.transition, &state.transition, rng)?;
    let groups = assignments(&states, obs, config.k);
    let (emissions, sigma_acc) = update_emissions(&groups, config, &state.emissions, rng)?;
    let stats = SweepStats {
        rows_accepted: acc.iter().filter(|a| **a).count(),
        rows: acc.len(),
        sigma_accepted: sigma_acc.unwrap_or(0),
        sigma_moves: if sigma_acc.is_some() { SIGMA_STEPS } else { 0 },
    };
    Ok((ChainState { transition, emissions }, stats))
}

/// Kept draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub seed: u64,
    pub draws: Vec<HmmParams>,
    /// Acceptance rate per block (`transition`, and `sigma` for mixtures).
    pub acceptance_rates: BTreeMap<String, f64>,
    /// Log-likelihood of the data under each kept draw.
    pub log_liks: Vec<f64>,
}

fn check_obs(config: &GibbsConfig, obs: &[f64]) -> Result<()> {
    for &y in obs {
        match config.model {
            ModelKind::DiscreteDp => {
                if as_count(y)? == 0 || y.fract() != 0.0 {
                    return Err(Error::Domain(y));
                }
            }
            ModelKind::ContinuousDpm => {
                if !y.is_finite() {
                    return Err(Error::Domain(y));
                }
            }
        }
    }
    Ok(())
}

/// Runs the Gibbs sampler from a prior draw. Deterministic given
/// `config.seed`.
pub fn run_chain(config: &GibbsConfig, obs: &[f64]) -> Result<PosteriorSample> {
    config.validate()?;
    check_obs(config, obs)?;
    let mut rng = stream(config.seed);
    let mut state = ChainState::from_prior(config, &mut rng)?;
    let mut totals = SweepStats::default();
    let mut draws = Vec::new();
    let mut log_liks = Vec::new();
    for it in 0..config.iterations {
        let (next, stats) = gibbs_sweep(&state, obs, config, &mut rng).map_err(|e| Error::ChainAborted {
            iteration: it,
            seed: config.seed,
            reason: e.to_string(),
            state: serde_json::to_string(&state).unwrap_or_default(),
        })?;
        state = next;
        totals.rows_accepted += stats.rows_accepted;
        totals.rows += stats.rows;
        totals.sigma_accepted += stats.sigma_accepted;
        totals.sigma_moves += stats.sigma_moves;
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thin) {
            let theta = state.params()?;
            log_liks.push(crate::hmm::log_likelihood(&theta, obs)?);
            draws.push(theta);
        }
    }
    let mut acceptance_rates = BTreeMap::new();
    if totals.rows > 0 {
        acceptance_rates.insert("transition".to_string(), totals.rows_accepted as f64 / totals.rows as f64);
    }
    if totals.sigma_moves > 0 {
        acceptance_rates.insert("sigma".to_string(), totals.sigma_accepted as f64 / totals.sigma_moves as f64);
    }
    Ok(PosteriorSample { seed: config.seed, draws, acceptance_rates, log_liks })
}

/// Posterior summary of `D_l(theta, theta*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub distances: Vec<f64>,
    pub median: f64,
    pub q90: f64,
    pub threshold: f64,
    /// Fraction of draws with `D_l >= threshold`.
    pub exceedance: f64,
}

/// Per-draw `D_l` against the truth, its median and 0.9-quantile, and the
/// posterior fraction at or beyond `M eps_n / q_n`.
pub fn posterior_distance_summary(
    sample: &PosteriorSample,
    theta_star: &HmmParams,
    ell: usize,
    m_const: f64,
    rate: &RateSchedule,
    n: u64,
    q_n: f64,
) -> Result<DistanceSummary> {
    if sample.draws.is_empty() {
        return Err(Error::InvalidParameter("empty posterior sample".into()));
    }
    if !(q_n > 0.0) {
        return Err(Error::Domain(q_n));
    }
    let method = match theta_star.space() {
        ObsSpace::Continuous if ell > 2 => DEllMethod::MonteCarlo { samples: 5000, seed: sample.seed },
        _ => DEllMethod::Auto,
    };
    let distances: Vec<f64> = sample
        .draws
        .par_iter()
        .map(|d| d_ell(d, theta_star, ell, method).map(|r| r.value))
        .collect::<Result<_>>()?;
    let mut sorted = distances.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = m_const * rate.eps(n) / q_n;
    let exceedance = distances.iter().filter(|&&d| d >= threshold).count() as f64 / distances.len() as f64;
    Ok(DistanceSummary { median: median(&sorted), q90: quantile(&sorted, 0.9), threshold, exceedance, distances })
}

/// Mean of one test function under both simulators of the joint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub successive_mean: f64,
    pub successive_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
    pub passed: bool,
}

/// Test functions of the joint draw `(theta, y)`: `Q_11`, `Q_11^2`, the
/// emission functional (mass at 1 or the bandwidth), and a data summary.
fn test_functions(state: &ChainState, obs: &[f64]) -> Vec<(&'static str, f64)> {
    let q11 = state.transition.get(0, 0);
    let mut out = vec![("Q11", q11), ("Q11^2", q11 * q11)];
    match &state.emissions {
        EmissionState::DiscreteDp { pmfs } => {
            out.push(("f1(1)", pmfs[0].prob(1)));
            out.push(("y1==1", f64::from(obs[0] == 1.0)));
        }
        EmissionState::ContinuousDpm { weights, locations, sigma } => {
            out.push(("ln sigma", sigma.ln()));
            out.push(("mean f1", weights[0].iter().zip(&locations[0]).map(|(w, z)| w * z).sum()));
            out.push(("y1", obs[0]));
        }
    }
    out
}

/// Number of batches for the successive-conditional standard errors.
const GEWEKE_BATCHES: usize = 50;

/// Getting-it-right test: compares test-function means of independent
/// prior-then-data draws with those of a Gibbs chain that alternates a
/// posterior cycle with a fresh data draw. `|z| <= 3` for every function.
pub fn geweke_joint_check(config: &GibbsConfig, n_data: usize, n_cycles: usize, seed: u64) -> Result<GewekeReport> {
    config.validate()?;
    if n_data == 0 || n_cycles < 2 * GEWEKE_BATCHES {
        return Err(Error::InvalidParameter("Geweke needs data and at least 100 cycles".into()));
    }
    let mut rng = stream(seed);
    let mut forward: Vec<Vec<(&'static str, f64)>> = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        let s = ChainState::from_prior(config, &mut rng)?;
        let (_, y) = simulate(&s.params()?, n_data, &mut rng)?;
        forward.push(test_functions(&s, &y));
    }
    let mut state = ChainState::from_prior(config, &mut rng)?;
    let (_, mut y) = simulate(&state.params()?, n_data, &mut rng)?;
    let mut successive = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        state = gibbs_sweep(&state, &y, config, &mut rng)?.0;
        y = simulate(&state.params()?, n_data, &mut rng)?.1;
        successive.push(test_functions(&state, &y));
    }
    let names: Vec<&str> = forward[0].iter().map(|p| p.0).collect();
    let stats: Vec<GewekeStat> = names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let f: Vec<f64> = forward.iter().map(|r| r[i].1).collect();
            let s: Vec<f64> = successive.iter().map(|r| r[i].1).collect();
            let (fm, sm) = (mean(&f), mean(&s));
            let fse = (variance(&f) / f.len() as f64).sqrt();
            let sse = batch_means_se(&s, GEWEKE_BATCHES);
            let den = (fse * fse + sse * sse).sqrt();
            let z = if den > 0.0 { (fm - sm) / den } else { 0.0 };
            GewekeStat { name: name.to_string(), forward_mean: fm, forward_se: fse, successive_mean: sm, successive_se: sse, z }
        })
        .collect();
    let passed = stats.iter().all(|s| s.z.abs() <= 3.0);
    Ok(GewekeReport { stats, passed })
}
