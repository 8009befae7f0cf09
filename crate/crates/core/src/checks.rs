//! Numerical checks of the inequalities behind the contraction proofs:
//! filter forgetting, the ratio lemma, KL and variance scaling, and
//! mixing of the hidden chain.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::distance::{c_k_constant, conditional_drift, kl_path, llr_variance, PathMethod};
use crate::emission::{DiscretePmf, EmissionDensity};
use crate::error::{Error, Result};
use crate::hmm::{forward_filter, simulate, tv_mixing_check, HmmParams, InitialDistribution, TransitionMatrix};
use crate::numeric::ols;
use crate::priors::{sample_dp_discrete, uniform_simplex, DpDiscreteSpec};
use crate::rng::{derive_seed, substream};

/// Outcome of one check or fuzz suite. `worst_margin` is bound minus
/// observed, so a negative value is a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub worst_margin: f64,
    pub witness: serde_json::Value,
    pub trials: usize,
    pub holds: bool,
}

impl BoundReport {
    fn single(name: &str, margin: f64, tol: f64, witness: serde_json::Value) -> Self {
        BoundReport { name: name.into(), worst_margin: margin, witness, trials: 1, holds: margin >= -tol }
    }

    // Keeps a failing trial if there is one, then the smallest margin.
    fn worst_of(name: &str, reports: Vec<BoundReport>) -> Self {
        let trials = reports.len();
        let holds = reports.iter().all(|r| r.holds);
        let worst = reports
            .into_iter()
            .min_by(|a, b| a.holds.cmp(&b.holds).then(a.worst_margin.total_cmp(&b.worst_margin)))
            .map(|r| (r.worst_margin, r.witness))
            .unwrap_or((f64::INFINITY, serde_json::Value::Null));
        BoundReport { name: name.into(), worst_margin: worst.0, witness: worst.1, trials, holds }
    }
}

/// Forgetting coefficient `(1 - kq) / (1 - (k-1) q)`.
pub fn rho(q: f64, k: usize) -> Result<f64> {
    let kf = k as f64;
    if k == 0 || !(q > 0.0 && q * kf <= 1.0 + 1e-12) {
        return Err(Error::Domain(q));
    }
    Ok(((1.0 - kf * q) / (1.0 - (kf - 1.0) * q)).max(0.0))
}

/// Tolerance for the forgetting bound.
pub const FORGETTING_TOL: f64 = 1e-10;

/// Compares the predictive state laws of two filters started at `mu` and
/// `mu2` against `2 rho^(t-1)`.
pub fn filter_forgetting_check(
    theta: &HmmParams,
    mu: &InitialDistribution,
    mu2: &InitialDistribution,
    obs: &[f64],
) -> Result<BoundReport> {
    let q = theta.transition().min_entry();
    let r = rho(q, theta.k())?;
    let a = forward_filter(theta, mu, obs)?;
    let b = forward_filter(theta, mu2, obs)?;
    let mut worst = (f64::INFINITY, 0, 0.0);
    for t in 0..obs.len() {
        let gap: f64 = a.predictive_row(t).iter().zip(b.predictive_row(t)).map(|(x, y)| (x - y).abs()).sum();
        let margin = 2.0 * r.powi(t as i32) - gap;
        if margin < worst.0 {
            worst = (margin, t + 1, gap);
        }
    }
    Ok(BoundReport::single(
        "forgetting",
        worst.0,
        FORGETTING_TOL,
        json!({ "t": worst.1, "gap": worst.2, "rho": r, "q": q }),
    ))
}

/// Smallest predictive probability from `t = 2` on, minus the floor of `Q`.
pub fn predictive_floor_check(theta: &HmmParams, mu: &InitialDistribution, obs: &[f64]) -> Result<BoundReport> {
    let q = theta.transition().min_entry();
    let trace = forward_filter(theta, mu, obs)?;
    let mut worst = (f64::INFINITY, 0);
    for t in 1..obs.len() {
        let m = trace.predictive_row(t).iter().copied().fold(f64::INFINITY, f64::min);
        if m - q < worst.0 {
            worst = (m - q, t + 1);
        }
    }
    Ok(BoundReport::single("predictive-floor", worst.0, 1e-12, json!({ "t": worst.1, "q": q })))
}

/// Uniform draw from `{v in simplex : v_i >= floor}`.
pub fn floored_simplex<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 - k as f64 * floor;
    uniform_simplex(k, rng).into_iter().map(|v| floor + scale * v).collect()
}

/// Uniform draw from `Delta_k^k(q)`.
pub fn floored_transition<R: Rng + ?Sized>(k: usize, floor: f64, rng: &mut R) -> Result<TransitionMatrix> {
    TransitionMatrix::normalized(k, (0..k).flat_map(|_| floored_simplex(k, floor, rng)).collect())
}

/// One replayable fuzz instance for the forgetting and floor checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzInstance {
    pub seed: u64,
    pub trial: u64,
    pub q: f64,
    pub theta: HmmParams,
    pub mu: InitialDistribution,
    pub mu2: InitialDistribution,
    pub obs: Vec<f64>,
}

/// Draws instance `trial` of the stream `seed`: `k in {2,3}`,
/// `q ~ U[0.05, 0.3]`, DP emissions, stationary simulated data.
pub fn fuzz_instance(seed: u64, trial: u64, n: usize) -> Result<FuzzInstance> {
    let mut rng = substream(seed, trial);
    let k = rng.random_range(2..=3usize);
    let q = rng.random_range(0.05..=0.3f64).min(1.0 / k as f64);
    let transition = floored_transition(k, q, &mut rng)?;
    let spec = DpDiscreteSpec { v_max: 20, ..DpDiscreteSpec::default() };
    let emissions = (0..k)
        .map(|_| sample_dp_discrete(&spec, &mut rng).map(|d| EmissionDensity::Discrete(d.density)))
        .collect::<Result<Vec<_>>>()?;
    let theta = HmmParams::new(transition, emissions)?;
    let mu = InitialDistribution::new(floored_simplex(k, q, &mut rng))?;
    let mu2 = InitialDistribution::new(floored_simplex(k, q, &mut rng))?;
    let (_, obs) = simulate(&theta, n, &mut rng)?;
    Ok(FuzzInstance { seed, trial, q, theta, mu, mu2, obs })
}

fn fuzz<F>(name: &str, trials: usize, seed: u64, n: usize, check: F) -> Result<BoundReport>
where
    F: Fn(&FuzzInstance) -> Result<BoundReport> + Sync,
{
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let inst = fuzz_instance(seed, t, n)?;
            let mut r = check(&inst)?;
            r.witness = json!({ "seed": seed, "trial": t, "k": inst.theta.k(), "detail": r.witness });
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::worst_of(name, reports))
}

/// Forgetting bound over `trials` random instances of length `n`.
pub fn forgetting_fuzz(trials: usize, seed: u64, n: usize) -> Result<BoundReport> {
    fuzz("forgetting", trials, seed, n, |i| filter_forgetting_check(&i.theta, &i.mu, &i.mu2, &i.obs))
}

/// Predictive floor over `trials` random instances of length `n`.
pub fn predictive_floor_fuzz(trials: usize, seed: u64, n: usize) -> Result<BoundReport> {
    fuzz("predictive-floor", trials, seed, n, |i| predictive_floor_check(&i.theta, &i.mu, &i.obs))
}

/// Tolerance of the ratio lemma, relative to the size of the bound.
pub const RATIO_TOL: f64 = 1e-12;

/// `sum a_i b_i / sum c_i d_i <= max_i(a_i/c_i) max_j(b_j/d_j)`. Indices
/// with `0/0` are skipped; `a_i > 0 = c_i` makes the bound infinite.
/// The margin is relative: `(bound - ratio) / bound`.
pub fn ratio_bound_check(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<BoundReport> {
    let k = a.len();
    if k == 0 || b.len() != k || c.len() != k || d.len() != k {
        return Err(Error::InvalidParameter("ratio check needs four vectors of equal positive length".into()));
    }
    if a.iter().chain(b).chain(c).chain(d).any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidParameter("ratio check needs nonnegative entries".into()));
    }
    let den: f64 = c.iter().zip(d).map(|(x, y)| x * y).sum();
    if den <= 0.0 {
        return Err(Error::InvalidParameter("sum c_i d_i must be positive".into()));
    }
    let max_ratio = |num: &[f64], den: &[f64]| {
        num.iter().zip(den).fold(0.0f64, |m, (&x, &y)| match (x, y) {
            (0.0, 0.0) => m,
            (_, 0.0) => f64::INFINITY,
            _ => m.max(x / y),
        })
    };
    let (ra, rb) = (max_ratio(a, c), max_ratio(b, d));
    let ratio = a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / den;
    let bound = ra * rb;
    let infinite = bound.is_infinite();
    let margin = if infinite {
        f64::INFINITY
    } else if bound > 0.0 {
        (bound - ratio) / bound
    } else {
        -ratio
    };
    Ok(BoundReport::single(
        "ratio",
        margin,
        RATIO_TOL,
        json!({ "a": a, "b": b, "c": c, "d": d, "ratio": ratio, "bound": if infinite { None } else { Some(bound) }, "division_by_zero": infinite }),
    ))
}

/// Ratio lemma on `trials` random tuples in `[0, 10]^k`, `k <= 5`.
pub fn ratio_fuzz(trials: usize, seed: u64) -> Result<BoundReport> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let k = rng.random_range(1..=5usize);
            let mut v = || (0..k).map(|_| rng.random_range(0.0..10.0)).collect::<Vec<f64>>();
            let (a, b, c, d) = (v(), v(), v(), v());
            let mut r = ratio_bound_check(&a, &b, &c, &d)?;
            r.witness["seed"] = json!(seed);
            r.witness["trial"] = json!(t);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::worst_of("ratio", reports))
}

/// Mixing bound `max_i TV(Q^m(i,.), mu^Q) <= (1-q)^m` for `m <= m_max`
/// over random floored matrices.
pub fn mixing_fuzz(trials: usize, seed: u64, m_max: usize) -> Result<BoundReport> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t);
            let k = rng.random_range(2..=4usize);
            let q = rng.random_range(0.01..=1.0 / k as f64);
            let qm = floored_transition(k, q, &mut rng)?;
            let rep = tv_mixing_check(&qm, m_max)?;
            let worst = rep.rows.iter().min_by(|a, b| a.margin.total_cmp(&b.margin));
            let margin = worst.map_or(f64::INFINITY, |w| w.margin);
            let m = worst.map_or(0, |w| w.m);
            Ok(BoundReport::single("mixing", margin, 1e-12, json!({ "seed": seed, "trial": t, "k": k, "m": m, "q": rep.floor })))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::worst_of("mixing", reports))
}

/// Direction along which the truth is perturbed: `theta(eps)` mixes each
/// row of `Q*` and each emission linearly towards the given targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub q_target: TransitionMatrix,
    pub f_target: Vec<EmissionDensity>,
}

impl Perturbation {
    pub fn apply(&self, theta: &HmmParams, eps: f64) -> Result<HmmParams> {
        let k = theta.k();
        if self.q_target.k() != k || self.f_target.len() != k {
            return Err(Error::InvalidParameter("perturbation has the wrong number of states".into()));
        }
        let q: Vec<f64> = theta
            .transition()
            .as_slice()
            .iter()
            .zip(self.q_target.as_slice())
            .map(|(a, b)| (1.0 - eps) * a + eps * b)
            .collect();
        let f = theta
            .emissions()
            .iter()
            .zip(&self.f_target)
            .map(|(a, b)| match (a.as_discrete(), b.as_discrete()) {
                (Some(a), Some(b)) => mix_pmf(a, b, eps).map(EmissionDensity::Discrete),
                _ => Err(Error::InvalidParameter("perturbations are defined for finite discrete emissions".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        HmmParams::new(TransitionMatrix::normalized(k, q)?, f)
    }
}

fn mix_pmf(a: &DiscretePmf, b: &DiscretePmf, eps: f64) -> Result<DiscretePmf> {
    if a.tail_mass() > 0.0 || b.tail_mass() > 0.0 {
        return Err(Error::InvalidParameter("perturbations are defined for finite discrete emissions".into()));
    }
    let v = a.v_max().max(b.v_max());
    let probs = (1..=v).map(|l| (1.0 - eps) * a.prob(l) + eps * b.prob(l)).collect();
    DiscretePmf::new(probs, 0.0, 0.0)
}

/// Per-point values of the KL scaling probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlScalingPoint {
    pub n: usize,
    pub eps: f64,
    pub kl: f64,
    pub ratio: f64,
}

/// Result of [`kl_scaling_probe`]: the margin against `C_K`, the linear
/// growth check and the local exponent of KL in `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlScalingReport {
    pub bound: BoundReport,
    pub c_k: f64,
    pub points: Vec<KlScalingPoint>,
    /// `min_n (KL(n)/n) / max_n (KL(n)/n)` at each `eps`. Reported only:
    /// `KL(n) = n r + c` with an offset `c` that is not small at short `n`.
    pub linear_growth: Vec<f64>,
    pub linear_growth_within_10pct: bool,
    /// Log-log slope of KL against `eps` at the largest `n`.
    pub eps_exponent: Option<f64>,
}

/// Exact KL between `theta*` and `theta(eps)` on a grid; asserts
/// `KL / (n eps^2) <= C_K(k, q*)`.
pub fn kl_scaling_probe(
    theta_star: &HmmParams,
    pert: &Perturbation,
    eps_grid: &[f64],
    n_grid: &[usize],
) -> Result<KlScalingReport> {
    if eps_grid.is_empty() || n_grid.is_empty() {
        return Err(Error::DegenerateGrid("empty probe grid".into()));
    }
    let c_k = c_k_constant(theta_star.k(), theta_star.transition().min_entry())?;
    let mut points = Vec::new();
    for &eps in eps_grid {
        let theta = pert.apply(theta_star, eps)?;
        for &n in n_grid {
            let kl = kl_path(theta_star, &theta, n, PathMethod::Exact)?.value;
            let ratio = if eps > 0.0 { kl / (n as f64 * eps * eps) } else { 0.0 };
            points.push(KlScalingPoint { n, eps, kl, ratio });
        }
    }
    let worst = points.iter().max_by(|a, b| a.ratio.total_cmp(&b.ratio)).expect("nonempty");
    let margin = c_k - worst.ratio;
    let mut linear_growth = Vec::new();
    for &eps in eps_grid.iter().filter(|&&e| e > 0.0) {
        let per: Vec<f64> = points.iter().filter(|p| p.eps == eps).map(|p| p.kl / p.n as f64).collect();
        let hi = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = per.iter().copied().fold(f64::INFINITY, f64::min);
        linear_growth.push(if hi > 0.0 { lo / hi } else { 1.0 });
    }
    let linear_growth_within_10pct = linear_growth.iter().all(|&g| g >= 0.9);
    let n_top = *n_grid.iter().max().expect("nonempty");
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.n == n_top && p.eps > 0.0 && p.kl > 0.0)
        .map(|p| (p.eps.ln(), p.kl.ln()))
        .unzip();
    let eps_exponent = (xs.len() >= 2).then(|| ols(&xs, &ys).0);
    let bound = BoundReport {
        name: "kl".into(),
        worst_margin: margin,
        witness: json!({ "n": worst.n, "eps": worst.eps, "kl": worst.kl, "ratio": worst.ratio }),
        trials: points.len(),
        holds: margin >= 0.0,
    };
    Ok(KlScalingReport { bound, c_k, points, linear_growth, linear_growth_within_10pct, eps_exponent })
}

/// Result of [`variance_bound_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProbeReport {
    pub bound: BoundReport,
    /// `(n, Var(n)/n)`.
    pub per_step: Vec<(usize, f64)>,
    pub spread: f64,
    /// Per-step KL used as `eps^2`.
    pub eps_sq: f64,
    /// `(alpha, fitted C)` with `Var <= C (n / alpha) eps^(2 - alpha)`.
    pub fitted_constants: Vec<(f64, f64)>,
}

/// Maximum allowed spread of `Var(n)/n` across the grid.
pub const VARIANCE_SPREAD: f64 = 1.5;

/// Exact log-likelihood-ratio variance on a grid of `n`. Asserts that
/// `Var(n)/n` stays within a factor 1.5; the constant in front of
/// `(n/alpha) eps^(2-alpha)` is fitted, never asserted.
pub fn variance_bound_probe(
    theta_star: &HmmParams,
    theta: &HmmParams,
    n_grid: &[usize],
    alpha_grid: &[f64],
) -> Result<VarianceProbeReport> {
    if n_grid.is_empty() {
        return Err(Error::DegenerateGrid("empty probe grid".into()));
    }
    let mut per_step = Vec::new();
    let mut eps_sq: f64 = 0.0;
    for &n in n_grid {
        let v = llr_variance(theta_star, theta, n, PathMethod::Exact)?.report.value;
        let kl = kl_path(theta_star, theta, n, PathMethod::Exact)?.value;
        eps_sq = eps_sq.max(kl / n as f64);
        per_step.push((n, v / n as f64));
    }
    let hi = per_step.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = per_step.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let spread = if hi == 0.0 { 1.0 } else { hi / lo };
    let fitted_constants = alpha_grid
        .iter()
        .map(|&a| {
            let c = per_step
                .iter()
                .map(|&(n, v)| if eps_sq > 0.0 { v * n as f64 / ((n as f64 / a) * eps_sq.powf(1.0 - a / 2.0)) } else { 0.0 })
                .fold(0.0, f64::max);
            (a, c)
        })
        .collect();
    let margin = VARIANCE_SPREAD - spread;
    let bound = BoundReport {
        name: "variance".into(),
        worst_margin: margin,
        witness: json!({ "max": hi, "min": lo }),
        trials: per_step.len(),
        holds: margin >= 0.0,
    };
    Ok(VarianceProbeReport { bound, per_step, spread, eps_sq, fitted_constants })
}

/// Decay of `E|E[Z_t | Y_1] - E[Z_t]|` in `t`, the downstream effect of
/// filter forgetting on the log-likelihood ratio increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftDecayReport {
    /// Values for `t = 2..=n`.
    pub drift: Vec<f64>,
    /// `exp` of the log-linear slope over the strictly positive values.
    pub fitted_rate: Option<f64>,
    pub rho_sqrt: f64,
    pub below_rho_sqrt: Option<bool>,
}

/// Reports the fitted geometric decay rate next to `rho^(1/2)`; nothing
/// is asserted.
pub fn drift_decay_probe(theta_star: &HmmParams, theta: &HmmParams, n: usize) -> Result<DriftDecayReport> {
    let drift = conditional_drift(theta_star, theta, n)?;
    let rho_sqrt = rho(theta_star.transition().min_entry(), theta_star.k())?.sqrt();
    let (xs, ys): (Vec<f64>, Vec<f64>) = drift
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 1e-300)
        .map(|(i, d)| ((i + 2) as f64, d.ln()))
        .unzip();
    let fitted_rate = (xs.len() >= 2).then(|| ols(&xs, &ys).0.exp());
    Ok(DriftDecayReport { drift, fitted_rate, rho_sqrt, below_rho_sqrt: fitted_rate.map(|r| r <= rho_sqrt) })
}

/// A small random instance for the KL and variance suites: `k = 2`, three
/// observation values, floored transitions and a random perturbation.
pub fn small_instance(seed: u64, trial: u64) -> Result<(HmmParams, Perturbation)> {
    let mut rng = substream(seed, trial);
    let q = rng.random_range(0.1..=0.3);
    let draw = |rng: &mut crate::rng::StreamRng| -> Result<Vec<EmissionDensity>> {
        (0..2)
            .map(|_| DiscretePmf::new(floored_simplex(3, 0.05, rng), 0.0, 0.0).map(EmissionDensity::Discrete))
            .collect()
    };
    let theta = HmmParams::new(floored_transition(2, q, &mut rng)?, draw(&mut rng)?)?;
    let pert = Perturbation { q_target: floored_transition(2, q, &mut rng)?, f_target: draw(&mut rng)? };
    Ok((theta, pert))
}

/// KL suite: the scaling probe on `trials` small instances with
/// `n in {2..8}` and `eps in {0.02, 0.05, 0.1}`.
pub fn kl_suite(trials: usize, seed: u64) -> Result<BoundReport> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (theta, pert) = small_instance(seed, t)?;
            let r = kl_scaling_probe(&theta, &pert, &[0.02, 0.05, 0.1], &[2, 3, 4, 5, 6, 7, 8])?;
            let mut b = r.bound;
            b.witness = json!({ "seed": seed, "trial": t, "detail": b.witness, "linear_growth": r.linear_growth, "eps_exponent": r.eps_exponent });
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::worst_of("kl", reports))
}

/// Variance suite: the spread probe on `trials` small instances at a
/// near-truth perturbation (`eps = 0.05`) with `n in {4..10}`.
pub fn variance_suite(trials: usize, seed: u64) -> Result<BoundReport> {
    let reports = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (theta_star, pert) = small_instance(seed, t)?;
            let theta = pert.apply(&theta_star, 0.05)?;
            let r = variance_bound_probe(&theta_star, &theta, &[4, 5, 6, 7, 8, 9, 10], &[0.5, 1.0])?;
            let mut b = r.bound;
            b.witness = json!({ "seed": seed, "trial": t, "detail": b.witness, "fitted": r.fitted_constants });
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport::worst_of("variance", reports))
}

/// Named suites for the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Forgetting,
    Ratio,
    Kl,
    Variance,
    Mixing,
}

/// Runs a suite with its default sizes. The forgetting suite also runs the
/// predictive-floor check on the same instances and reports the worse one.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<BoundReport> {
    match suite {
        Suite::Forgetting => {
            let f = forgetting_fuzz(trials, seed, 50)?;
            let p = predictive_floor_fuzz(trials, derive_seed(seed, 0), 50)?;
            let holds = f.holds && p.holds;
            let witness = json!({ "forgetting": f, "predictive_floor": p });
            Ok(BoundReport {
                name: "forgetting".into(),
                worst_margin: f.worst_margin.min(p.worst_margin),
                witness,
                trials,
                holds,
            })
        }
        Suite::Ratio => ratio_fuzz(trials, seed),
        Suite::Kl => kl_suite(trials, seed),
        Suite::Variance => variance_suite(trials, seed),
        Suite::Mixing => mixing_fuzz(trials, seed, 100),
    }
}
