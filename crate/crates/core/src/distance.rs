//! Divergences between HMM parameters: the L1 distance `D_l` between the
//! laws of `l` consecutive observations, path-level Kullback-Leibler
//! divergence, the variance of the log-likelihood ratio, and the
//! neighborhood conditions used by the prior-mass arguments.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emission::{common_space, emission_metric, DiscretePmf, EmissionDensity, ObsSpace};
use crate::error::{Error, Result};
use crate::hmm::{joint_density_with, sample_index, simulate_states, HmmParams};
use crate::numeric::{integrate, mean, simpson_weights};
use crate::rng::substream;

/// Largest lattice or path enumeration attempted.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// How a divergence was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactEnumeration,
    Quadrature,
    ChainRule,
    MonteCarlo,
}

/// A computed divergence with its provenance and error information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub value: f64,
    pub method: Method,
    pub mc_se: Option<f64>,
    /// Window length for `D_l`, path length for KL and variance.
    pub n: usize,
    /// Deterministic error bound (lattice truncation or quadrature change).
    pub error_bar: f64,
    /// Set when some path has positive probability under the truth and
    /// zero probability under the candidate.
    pub infinite: bool,
}

/// Method selection for [`d_ell`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DEllMethod {
    /// Lattice enumeration (discrete) or quadrature for `l <= 2`
    /// (continuous); Monte Carlo with the default budget otherwise.
    Auto,
    MonteCarlo { samples: usize, seed: u64 },
}

const DEFAULT_MC_SAMPLES: usize = 20_000;

fn stationary_probs(theta: &HmmParams) -> Result<Vec<f64>> {
    Ok(theta.stationary()?.probs().to_vec())
}

fn lattice_size(theta: &HmmParams) -> u64 {
    theta
        .emissions()
        .iter()
        .filter_map(|f| f.as_discrete())
        .map(|p| {
            let cap = (2 * p.v_max()).max(16);
            p.effective_upper(1e-14).clamp(1, cap).max(p.v_max())
        })
        .max()
        .unwrap_or(1)
}

fn table(theta: &HmmParams, v: u64) -> Vec<f64> {
    let mut t = Vec::with_capacity((v as usize) * theta.k());
    for l in 1..=v {
        for f in theta.emissions() {
            t.push(f.as_discrete().map_or(0.0, |p| p.prob(l)));
        }
    }
    t
}

struct Lattice<'a> {
    theta: [&'a HmmParams; 2],
    tables: [Vec<f64>; 2],
    v: usize,
    ell: usize,
}

impl Lattice<'_> {
    // Returns (sum |p1 - p2|, sum p1, sum p2) over windows extending the
    // given forward vectors.
    fn walk(&self, depth: usize, a: &[Vec<f64>; 2]) -> (f64, f64, f64) {
        let mut out = (0.0, 0.0, 0.0);
        for y in 0..self.v {
            let next: [Vec<f64>; 2] = std::array::from_fn(|s| {
                let k = self.theta[s].k();
                let row = &self.tables[s][y * k..(y + 1) * k];
                if depth == 0 {
                    a[s].iter().zip(row).map(|(m, f)| m * f).collect()
                } else {
                    self.theta[s].transition().left_mul(&a[s]).iter().zip(row).map(|(m, f)| m * f).collect()
                }
            });
            if depth + 1 == self.ell {
                let p1: f64 = next[0].iter().sum();
                let p2: f64 = next[1].iter().sum();
                out.0 += (p1 - p2).abs();
                out.1 += p1;
                out.2 += p2;
            } else {
                let r = self.walk(depth + 1, &next);
                out.0 += r.0;
                out.1 += r.1;
                out.2 += r.2;
            }
        }
        out
    }
}

fn d_ell_discrete(a: &HmmParams, b: &HmmParams, ell: usize) -> Result<DivergenceReport> {
    let v = lattice_size(a).max(lattice_size(b));
    let size = (v as f64).powi(ell as i32);
    if size > ENUMERATION_BUDGET {
        return Err(Error::Budget { size, budget: ENUMERATION_BUDGET });
    }
    let lat = Lattice { theta: [a, b], tables: [table(a, v), table(b, v)], v: v as usize, ell };
    let start = [stationary_probs(a)?, stationary_probs(b)?];
    // Split the first coordinate across threads.
    let parts: Vec<(f64, f64, f64)> = (0..lat.v)
        .into_par_iter()
        .map(|y| {
            let first: [Vec<f64>; 2] = std::array::from_fn(|s| {
                let k = lat.theta[s].k();
                start[s].iter().zip(&lat.tables[s][y * k..(y + 1) * k]).map(|(m, f)| m * f).collect()
            });
            if ell == 1 {
                let p1: f64 = first[0].iter().sum();
                let p2: f64 = first[1].iter().sum();
                ((p1 - p2).abs(), p1, p2)
            } else {
                lat.walk(1, &first)
            }
        })
        .collect();
    let (mut l1, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for p in parts {
        l1 += p.0;
        m1 += p.1;
        m2 += p.2;
    }
    let (out1, out2) = ((1.0 - m1).max(0.0), (1.0 - m2).max(0.0));
    Ok(DivergenceReport {
        value: l1 + (out1 - out2).abs(),
        method: Method::ExactEnumeration,
        mc_se: None,
        n: ell,
        error_bar: 2.0 * out1.min(out2),
        infinite: false,
    })
}

fn continuous_range(thetas: &[&HmmParams]) -> (f64, f64, Vec<f64>, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut locs = Vec::new();
    let mut sigma = f64::INFINITY;
    for t in thetas {
        for f in t.emissions() {
            if let Some(g) = f.as_gmix() {
                let (a, b) = g.range();
                lo = lo.min(a);
                hi = hi.max(b);
                locs.extend(g.active_locations());
                sigma = sigma.min(g.sigma());
            }
        }
    }
    (lo, hi, locs, sigma)
}

fn marginal_density(theta: &HmmParams, mu: &[f64], y: f64) -> f64 {
    theta.emissions().iter().zip(mu).map(|(f, m)| m * f.density(y).unwrap_or(0.0)).sum()
}

fn d_one_continuous(a: &HmmParams, b: &HmmParams) -> Result<DivergenceReport> {
    let (lo, hi, locs, _) = continuous_range(&[a, b]);
    let (ma, mb) = (stationary_probs(a)?, stationary_probs(b)?);
    let f = |y: f64| (marginal_density(a, &ma, y) - marginal_density(b, &mb, y)).abs();
    let value = integrate(&f, lo, hi, &locs, 1e-10);
    Ok(DivergenceReport { value, method: Method::Quadrature, mc_se: None, n: 1, error_bar: 1e-8, infinite: false })
}

// Joint density of two consecutive observations on a Simpson grid:
// p(y1, y2) = F(y1)^T diag(mu) Q F(y2).
fn pair_grid(theta: &HmmParams, mu: &[f64], ys: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let k = theta.k();
    let mut f = vec![0.0; ys.len() * k];
    for (a, &y) in ys.iter().enumerate() {
        for (i, e) in theta.emissions().iter().enumerate() {
            f[a * k + i] = e.density(y).unwrap_or(0.0);
        }
    }
    let mut m = vec![0.0; ys.len() * k];
    for a in 0..ys.len() {
        for i in 0..k {
            let w = mu[i] * f[a * k + i];
            if w == 0.0 {
                continue;
            }
            for j in 0..k {
                m[a * k + j] += w * theta.transition().get(i, j);
            }
        }
    }
    (m, f)
}

fn d_two_continuous(a: &HmmParams, b: &HmmParams) -> Result<DivergenceReport> {
    let (lo, hi, _, sigma) = continuous_range(&[a, b]);
    let (ma, mb) = (stationary_probs(a)?, stationary_probs(b)?);
    let (ka, kb) = (a.k(), b.k());
    let mut panels = (((hi - lo) / (sigma / 4.0)).ceil() as usize).max(256);
    panels += panels % 2;
    let mut last: Option<f64> = None;
    loop {
        let h = (hi - lo) / panels as f64;
        let ys: Vec<f64> = (0..=panels).map(|i| lo + i as f64 * h).collect();
        let w = simpson_weights(panels, h);
        let (m1, f1) = pair_grid(a, &ma, &ys);
        let (m2, f2) = pair_grid(b, &mb, &ys);
        let value: f64 = (0..ys.len())
            .into_par_iter()
            .map(|r| {
                let mut s = 0.0;
                for c in 0..ys.len() {
                    let p1: f64 = (0..ka).map(|j| m1[r * ka + j] * f1[c * ka + j]).sum();
                    let p2: f64 = (0..kb).map(|j| m2[r * kb + j] * f2[c * kb + j]).sum();
                    s += w[c] * (p1 - p2).abs();
                }
                w[r] * s
            })
            .sum();
        if let Some(prev) = last {
            let change = (value - prev).abs();
            if change < 1e-4 || panels >= 8192 {
                return Ok(DivergenceReport {
                    value,
                    method: Method::Quadrature,
                    mc_se: None,
                    n: 2,
                    error_bar: change,
                    infinite: false,
                });
            }
        }
        last = Some(value);
        panels *= 2;
    }
}

fn d_ell_mc(a: &HmmParams, b: &HmmParams, ell: usize, samples: usize, seed: u64) -> Result<DivergenceReport> {
    if samples < 2 {
        return Err(Error::InvalidParameter("Monte Carlo needs at least two samples".into()));
    }
    let (ma, mb) = (stationary_probs(a)?, stationary_probs(b)?);
    let terms: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(seed, s as u64);
            let (src, mu) = if rng.random::<bool>() { (a, &ma) } else { (b, &mb) };
            let states = simulate_states(src.transition(), mu, ell, &mut rng);
            let window: Vec<f64> = states.iter().map(|&x| src.emissions()[x].sample(&mut rng)).collect();
            let p1 = joint_density_with(a, &ma, &window)?;
            let p2 = joint_density_with(b, &mb, &window)?;
            Ok(if p1 + p2 > 0.0 { 2.0 * (p1 - p2).abs() / (p1 + p2) } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let value = mean(&terms);
    let se = (crate::numeric::variance(&terms) / samples as f64).sqrt();
    Ok(DivergenceReport { value, method: Method::MonteCarlo, mc_se: Some(se), n: ell, error_bar: 0.0, infinite: false })
}

/// `D_l(theta, theta2)`: L1 distance between the stationary laws of `l`
/// consecutive observations.
pub fn d_ell(theta: &HmmParams, theta2: &HmmParams, ell: usize, method: DEllMethod) -> Result<DivergenceReport> {
    if ell == 0 {
        return Err(Error::InvalidParameter("window length must be at least 1".into()));
    }
    if theta.space() != theta2.space() {
        return Err(Error::MixedSpace);
    }
    match (method, theta.space()) {
        (DEllMethod::MonteCarlo { samples, seed }, _) => d_ell_mc(theta, theta2, ell, samples, seed),
        (DEllMethod::Auto, ObsSpace::Discrete) => d_ell_discrete(theta, theta2, ell),
        (DEllMethod::Auto, ObsSpace::Continuous) => match ell {
            1 => d_one_continuous(theta, theta2),
            2 => d_two_continuous(theta, theta2),
            _ => d_ell_mc(theta, theta2, ell, DEFAULT_MC_SAMPLES, 0),
        },
    }
}

/// Right-hand side of the perturbation bound on `D_l` and its comparison
/// with the computed distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub bound: f64,
    pub d_ell: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// `D_l <= sum|mu - mu~| + k (l - 1) max|Q - Q~| + l d(f, f~)`.
pub fn d_ell_lipschitz_bound(theta: &HmmParams, theta2: &HmmParams, ell: usize) -> Result<LipschitzReport> {
    if theta.k() != theta2.k() {
        return Err(Error::InvalidParameter("the bound compares parameters with the same number of states".into()));
    }
    let (ma, mb) = (stationary_probs(theta)?, stationary_probs(theta2)?);
    let mu_gap: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).sum();
    let q_gap = theta.transition().max_abs_diff(theta2.transition());
    let d = emission_metric(theta.emissions(), theta2.emissions())?;
    let bound = mu_gap + (theta.k() * (ell - 1)) as f64 * q_gap + ell as f64 * d;
    let r = d_ell(theta, theta2, ell, DEllMethod::Auto)?;
    let tolerance = 1e-9 + r.error_bar + 3.0 * r.mc_se.unwrap_or(0.0);
    Ok(LipschitzReport { bound, d_ell: r.value, margin: bound - r.value, tolerance, holds: r.value <= bound + tolerance })
}

/// Method selection for [`kl_path`] and [`llr_variance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum PathMethod {
    /// Enumeration of every observation sequence (finite discrete support).
    Exact,
    /// Monte Carlo over paths drawn from the truth.
    MonteCarlo { paths: usize, seed: u64 },
}

/// Path-level moments of `Z = L_n^* - L_n` with the martingale split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    #[serde(flatten)]
    pub report: DivergenceReport,
    /// `E[(sum_t (Z_t - E[Z_t | Y_{1:t-1}]))^2]`.
    pub s1: Option<f64>,
    /// `E[(sum_t (E[Z_t | Y_{1:t-1}] - E[Z_t]))^2]`.
    pub s2: Option<f64>,
}

fn finite_support(theta: &HmmParams) -> Result<u64> {
    let mut v = 1;
    for f in theta.emissions() {
        let p = f.as_discrete().ok_or(Error::MixedSpace)?;
        if p.tail_mass() > 0.0 {
            return Err(Error::InvalidParameter("exact enumeration needs finitely supported emissions".into()));
        }
        let last = p.probs().iter().rposition(|&x| x > 0.0).map_or(1, |i| i as u64 + 1);
        v = v.max(last);
    }
    Ok(v)
}

#[derive(Default)]
struct PathMoments {
    kl: f64,
    ez: f64,
    ez2: f64,
    ec2: f64,
    s1: f64,
    infinite: bool,
    // Joint mass of (Y_1 = y, E[Z_t | Y_{1:t-1}]) laid out as y * n + t - 1.
    by_first: Vec<f64>,
}

struct PathEnum<'a> {
    star: &'a HmmParams,
    cand: &'a HmmParams,
    fs: Vec<f64>,
    fc: Vec<f64>,
    v: usize,
    n: usize,
}

impl PathEnum<'_> {
    #[allow(clippy::too_many_arguments)]
    fn node(&self, depth: usize, first: usize, ps: &[f64], pc: &[f64], prob: f64, z: f64, c: f64, acc: &mut PathMoments) {
        let (ks, kc) = (self.star.k(), self.cand.k());
        let mut cs = vec![0.0; self.v];
        let mut cc = vec![0.0; self.v];
        let mut zs = vec![0.0; self.v];
        let (mut cond, mut second) = (0.0, 0.0);
        for y in 0..self.v {
            cs[y] = (0..ks).map(|i| ps[i] * self.fs[y * ks + i]).sum();
            if cs[y] <= 0.0 {
                continue;
            }
            cc[y] = (0..kc).map(|i| pc[i] * self.fc[y * kc + i]).sum();
            if cc[y] <= 0.0 {
                acc.infinite = true;
                continue;
            }
            zs[y] = cs[y].ln() - cc[y].ln();
            cond += cs[y] * zs[y];
            second += cs[y] * zs[y] * zs[y];
        }
        acc.kl += prob * cond;
        acc.s1 += prob * (second - cond * cond).max(0.0);
        if depth > 0 {
            acc.by_first[first * self.n + depth] += prob * cond;
        }
        for y in 0..self.v {
            if cs[y] <= 0.0 || cc[y] <= 0.0 {
                continue;
            }
            let p = prob * cs[y];
            let (zz, cc_sum) = (z + zs[y], c + cond);
            if depth + 1 == self.n {
                acc.ez += p * zz;
                acc.ez2 += p * zz * zz;
                acc.ec2 += p * cc_sum * cc_sum;
            } else {
                let ns = advance(self.star, ps, &self.fs[y * ks..(y + 1) * ks]);
                let nc = advance(self.cand, pc, &self.fc[y * kc..(y + 1) * kc]);
                let f = if depth == 0 { y } else { first };
                self.node(depth + 1, f, &ns, &nc, p, zz, cc_sum, acc);
            }
        }
    }
}

fn advance(theta: &HmmParams, pred: &[f64], f: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = pred.iter().zip(f).map(|(p, e)| p * e).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    theta.transition().left_mul(&w)
}

fn enumerate_paths(star: &HmmParams, cand: &HmmParams, n: usize) -> Result<PathMoments> {
    if n == 0 {
        return Err(Error::InvalidParameter("path length must be at least 1".into()));
    }
    if star.space() != ObsSpace::Discrete || cand.space() != ObsSpace::Discrete {
        return Err(Error::InvalidParameter("exact enumeration is for discrete observations".into()));
    }
    let v = finite_support(star)?.max(finite_support(cand)?);
    let size = (v as f64).powi(n as i32);
    if size > ENUMERATION_BUDGET {
        return Err(Error::Budget { size, budget: ENUMERATION_BUDGET });
    }
    let e = PathEnum { star, cand, fs: table(star, v), fc: table(cand, v), v: v as usize, n };
    let mut acc = PathMoments { by_first: vec![0.0; e.v * n], ..PathMoments::default() };
    e.node(0, 0, &stationary_probs(star)?, &stationary_probs(cand)?, 1.0, 0.0, 0.0, &mut acc);
    Ok(acc)
}

/// Conditional law of the next observation under the truth and under the
/// candidate, integrated against `z = log(c*/c)`: returns
/// `(E[z], E[z^2], infinite)`.
fn step_moments(star: &HmmParams, ps: &[f64], cand: &HmmParams, pc: &[f64]) -> (f64, f64, bool) {
    let pred = |theta: &HmmParams, p: &[f64], y: f64| -> f64 {
        theta.emissions().iter().zip(p).map(|(f, w)| w * f.density(y).unwrap_or(0.0)).sum()
    };
    match star.space() {
        ObsSpace::Discrete => {
            let upper = star
                .emissions()
                .iter()
                .filter_map(|f| f.as_discrete())
                .map(|p| p.effective_upper(1e-16).max(p.v_max()))
                .max()
                .unwrap_or(1);
            let (mut m1, mut m2, mut inf) = (0.0, 0.0, false);
            for l in 1..=upper {
                let y = l as f64;
                let cs = pred(star, ps, y);
                if cs <= 0.0 {
                    continue;
                }
                let cc = pred(cand, pc, y);
                if cc <= 0.0 {
                    inf = true;
                    continue;
                }
                let z = (cs / cc).ln();
                m1 += cs * z;
                m2 += cs * z * z;
            }
            (m1, m2, inf)
        }
        ObsSpace::Continuous => {
            let (lo, hi, locs, _) = continuous_range(&[star]);
            let z = |y: f64| {
                let cs = pred(star, ps, y);
                let cc = pred(cand, pc, y);
                if cs <= 0.0 {
                    (0.0, 0.0)
                } else {
                    let l = cs.ln() - cc.ln();
                    (cs * l, cs * l * l)
                }
            };
            let m1 = integrate(&|y| z(y).0, lo, hi, &locs, 1e-10);
            let m2 = integrate(&|y| z(y).1, lo, hi, &locs, 1e-10);
            (m1, m2, !m1.is_finite())
        }
    }
}

struct PathSample {
    z: f64,
    kl: f64,
    s1: f64,
    infinite: bool,
}

fn sample_path(star: &HmmParams, cand: &HmmParams, n: usize, seed: u64, conditionals: bool) -> Result<PathSample> {
    let mut rng = crate::rng::stream(seed);
    let mu_s = stationary_probs(star)?;
    let mu_c = stationary_probs(cand)?;
    let (mut ps, mut pc) = (mu_s.clone(), mu_c);
    let mut x = sample_index(&mu_s, &mut rng);
    let mut out = PathSample { z: 0.0, kl: 0.0, s1: 0.0, infinite: false };
    for t in 0..n {
        if t > 0 {
            x = sample_index(star.transition().row(x), &mut rng);
        }
        if conditionals {
            let (m1, m2, inf) = step_moments(star, &ps, cand, &pc);
            out.kl += m1;
            out.s1 += (m2 - m1 * m1).max(0.0);
            out.infinite |= inf;
        }
        let y = star.emissions()[x].sample(&mut rng);
        let es: Vec<f64> = star.emissions().iter().map(|f| f.density(y)).collect::<Result<_>>()?;
        let ec: Vec<f64> = cand.emissions().iter().map(|f| f.density(y)).collect::<Result<_>>()?;
        let cs: f64 = ps.iter().zip(&es).map(|(p, e)| p * e).sum();
        let cc: f64 = pc.iter().zip(&ec).map(|(p, e)| p * e).sum();
        if cc <= 0.0 {
            out.infinite = true;
            return Ok(out);
        }
        out.z += cs.ln() - cc.ln();
        ps = advance(star, &ps, &es);
        pc = advance(cand, &pc, &ec);
    }
    Ok(out)
}

fn sample_paths(star: &HmmParams, cand: &HmmParams, n: usize, paths: usize, seed: u64, cond: bool) -> Result<Vec<PathSample>> {
    if n == 0 || paths < 2 {
        return Err(Error::InvalidParameter("need n >= 1 and at least two paths".into()));
    }
    if star.space() != cand.space() {
        return Err(Error::MixedSpace);
    }
    (0..paths)
        .into_par_iter()
        .map(|p| sample_path(star, cand, n, crate::rng::derive_seed(seed, p as u64), cond))
        .collect()
}

/// `KL(p_n^{theta*}, p_n^theta)` from the stationary start.
pub fn kl_path(theta_star: &HmmParams, theta: &HmmParams, n: usize, method: PathMethod) -> Result<DivergenceReport> {
    match method {
        PathMethod::Exact => {
            let m = enumerate_paths(theta_star, theta, n)?;
            Ok(DivergenceReport {
                value: if m.infinite { f64::INFINITY } else { m.kl },
                method: Method::ExactEnumeration,
                mc_se: None,
                n,
                error_bar: 0.0,
                infinite: m.infinite,
            })
        }
        PathMethod::MonteCarlo { paths, seed } => {
            let s = sample_paths(theta_star, theta, n, paths, seed, true)?;
            let infinite = s.iter().any(|p| p.infinite);
            let kl: Vec<f64> = s.iter().map(|p| p.kl).collect();
            let se = (crate::numeric::variance(&kl) / paths as f64).sqrt();
            Ok(DivergenceReport {
                value: if infinite { f64::INFINITY } else { mean(&kl) },
                method: Method::ChainRule,
                mc_se: Some(se),
                n,
                error_bar: 0.0,
                infinite,
            })
        }
    }
}

/// `Var^{theta*}(L_n^{theta*} - L_n^theta)` with the martingale and
/// forgetting parts `S1`, `S2` (so that `Var <= 2 S1 + 2 S2`).
pub fn llr_variance(theta_star: &HmmParams, theta: &HmmParams, n: usize, method: PathMethod) -> Result<VarianceReport> {
    match method {
        PathMethod::Exact => {
            let m = enumerate_paths(theta_star, theta, n)?;
            let var = (m.ez2 - m.ez * m.ez).max(0.0);
            let s2 = (m.ec2 - m.ez * m.ez).max(0.0);
            Ok(VarianceReport {
                report: DivergenceReport {
                    value: if m.infinite { f64::INFINITY } else { var },
                    method: Method::ExactEnumeration,
                    mc_se: None,
                    n,
                    error_bar: 0.0,
                    infinite: m.infinite,
                },
                s1: Some(m.s1),
                s2: Some(s2),
            })
        }
        PathMethod::MonteCarlo { paths, seed } => {
            let cond = theta_star.space() == ObsSpace::Discrete;
            let s = sample_paths(theta_star, theta, n, paths, seed, cond)?;
            let infinite = s.iter().any(|p| p.infinite);
            let z: Vec<f64> = s.iter().map(|p| p.z).collect();
            let m = mean(&z);
            let s2_hat = z.iter().map(|x| (x - m).powi(2)).sum::<f64>() / paths as f64;
            let m4 = z.iter().map(|x| (x - m).powi(4)).sum::<f64>() / paths as f64;
            let var = s2_hat * paths as f64 / (paths as f64 - 1.0);
            let se = ((m4 - s2_hat * s2_hat).max(0.0) / paths as f64).sqrt();
            let (s1, s2) = if cond {
                let c: Vec<f64> = s.iter().map(|p| p.kl).collect();
                (Some(mean(&s.iter().map(|p| p.s1).collect::<Vec<_>>())), Some(crate::numeric::variance(&c)))
            } else {
                (None, None)
            };
            Ok(VarianceReport {
                report: DivergenceReport {
                    value: if infinite { f64::INFINITY } else { var },
                    method: Method::MonteCarlo,
                    mc_se: Some(se),
                    n,
                    error_bar: 0.0,
                    infinite,
                },
                s1,
                s2,
            })
        }
    }
}

/// `E|E[Z_t | Y_1] - E[Z_t]|` for `t = 2..=n`, where `Z_t` is the log
/// ratio of one-step predictive densities. Exact enumeration.
pub fn conditional_drift(theta_star: &HmmParams, theta: &HmmParams, n: usize) -> Result<Vec<f64>> {
    let m = enumerate_paths(theta_star, theta, n)?;
    let v = m.by_first.len() / n;
    let mu = stationary_probs(theta_star)?;
    let p1: Vec<f64> = (1..=v as u64)
        .map(|l| theta_star.emissions().iter().zip(&mu).map(|(f, w)| w * f.as_discrete().map_or(0.0, |p| p.prob(l))).sum())
        .collect();
    Ok((1..n)
        .map(|t| {
            let total: f64 = (0..v).map(|y| m.by_first[y * n + t]).sum();
            (0..v).map(|y| (m.by_first[y * n + t] - p1[y] * total).abs()).sum()
        })
        .collect())
}

/// `C_K = 4 + ln(2k/q) + 1e4 k^2 / q^5`.
pub fn c_k_constant(k: usize, q_star: f64) -> Result<f64> {
    if k == 0 || !(q_star > 0.0 && q_star * k as f64 <= 1.0 + 1e-12) {
        return Err(Error::Domain(q_star));
    }
    let kf = k as f64;
    Ok(4.0 + (2.0 * kf / q_star).ln() + 1e4 * kf * kf / q_star.powi(5))
}

/// The set `S` of the neighborhood conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Subset {
    /// `{lo, ..., hi}` on the counts.
    Counts { lo: u64, hi: u64 },
    /// `[lo, hi]` on the real line.
    Interval { lo: f64, hi: f64 },
}

/// One measured condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodReport {
    pub conditions: Vec<ConditionResult>,
    pub all_pass: bool,
}

// f*(1 - f/f*)^2 from logarithms, without cancellation or overflow.
fn chi_term(ln_ref: f64, ln_other: f64) -> f64 {
    if ln_ref == f64::NEG_INFINITY {
        return if ln_other == f64::NEG_INFINITY { 0.0 } else { f64::INFINITY };
    }
    if ln_other == f64::NEG_INFINITY {
        return ln_ref.exp();
    }
    let r = ln_other - ln_ref;
    if r <= 0.0 {
        ln_ref.exp() * (-r.exp_m1()).powi(2)
    } else {
        (ln_ref + 2.0 * (r + (-(-r).exp_m1()).ln())).exp()
    }
}

// ln(a/b) with the conventions 0/0 = 1 and a/0 = infinity.
fn ln_ratio(ln_a: f64, ln_b: f64) -> f64 {
    if ln_a == f64::NEG_INFINITY && ln_b == f64::NEG_INFINITY {
        0.0
    } else {
        ln_a - ln_b
    }
}

fn weighted_sum(w: &DiscretePmf, lo: u64, hi: Option<u64>, v_all: u64, mut term: impl FnMut(u64) -> f64) -> f64 {
    let mut total = 0.0;
    let mut l = lo.max(1);
    const CAP: u64 = 1_000_000;
    loop {
        if let Some(h) = hi {
            if l > h {
                break;
            }
        } else if l > v_all && (w.mass_from(l) < 1e-40 || l > v_all + CAP) {
            break;
        }
        if w.ln_prob(l) > f64::NEG_INFINITY {
            total += term(l);
        }
        l += 1;
    }
    total
}

fn outside_mass_discrete(p: &DiscretePmf, lo: u64, hi: u64) -> f64 {
    let below = 1.0 - p.mass_from(lo);
    below.max(0.0) + p.mass_from(hi + 1)
}

/// Left-hand sides of the six neighborhood conditions, maximized over
/// state indices. They do not depend on the radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
}

impl Measured {
    /// Compares the measured sides with the radius `eps_tilde`.
    pub fn evaluate(&self, eps_tilde: f64, u_n: f64) -> NeighborhoodReport {
        let e2 = eps_tilde * eps_tilde;
        let entries = [
            ("A.1", self.a1, e2 / u_n),
            ("A.2", self.a2, e2 / u_n),
            ("A.3", self.a3, e2),
            ("A.4", self.a4, e2 / u_n),
            ("A.5", self.a5, e2),
            ("A.6", self.a6, e2),
        ];
        let conditions: Vec<ConditionResult> = entries
            .iter()
            .map(|&(label, lhs, rhs)| ConditionResult { label: label.into(), lhs, rhs, pass: lhs.is_finite() && lhs <= rhs })
            .collect();
        let all_pass = conditions.iter().all(|c| c.pass);
        NeighborhoodReport { conditions, all_pass }
    }
}

fn measure_discrete(fs: &[&DiscretePmf], f: &[&DiscretePmf], ft: &[&DiscretePmf], lo: u64, hi: u64) -> Measured {
    let k = fs.len();
    let v_all = fs.iter().chain(f).chain(ft).map(|p| p.v_max()).max().unwrap_or(1);
    let mut m = Measured { a1: 0.0, a2: 0.0, a3: 0.0, a4: 0.0, a5: 0.0, a6: 0.0 };
    for i in 0..k {
        for j in 0..k {
            let s = weighted_sum(fs[i], 1, None, v_all, |l| {
                let r = ln_ratio(fs[j].ln_prob(l), f[j].ln_prob(l));
                fs[i].prob(l) * r * r
            });
            m.a1 = m.a1.max(s);
        }
        let a5 = weighted_sum(fs[i], lo, Some(hi), v_all, |l| {
            let worst = (0..k).map(|j| ln_ratio(ft[j].ln_prob(l), f[j].ln_prob(l))).fold(f64::NEG_INFINITY, f64::max);
            fs[i].prob(l) * worst
        });
        m.a5 = m.a5.max(a5);
    }
    for j in 0..k {
        let a2: f64 = (lo..=hi).map(|l| chi_term(fs[j].ln_prob(l), f[j].ln_prob(l))).sum();
        let a6: f64 = (lo..=hi).map(|l| chi_term(ft[j].ln_prob(l), fs[j].ln_prob(l))).sum();
        m.a2 = m.a2.max(a2);
        m.a6 = m.a6.max(a6);
        m.a3 = m.a3.max(outside_mass_discrete(ft[j], lo, hi));
        m.a4 = m.a4.max(outside_mass_discrete(fs[j], lo, hi));
    }
    m
}

fn gm(g: &EmissionDensity) -> &crate::emission::GaussianMixtureDensity {
    g.as_gmix().expect("continuous density")
}

fn discrete_refs(v: &[EmissionDensity]) -> Vec<&DiscretePmf> {
    v.iter().filter_map(|x| x.as_discrete()).collect()
}

fn measure_continuous(fs: &[&EmissionDensity], f: &[&EmissionDensity], ft: &[&EmissionDensity], lo: f64, hi: f64) -> Measured {
    let k = fs.len();
    let ln = |g: &EmissionDensity, y: f64| g.ln_density(y).unwrap_or(f64::NEG_INFINITY);
    let dens = |g: &EmissionDensity, y: f64| g.density(y).unwrap_or(0.0);
    let mut locs: Vec<f64> = Vec::new();
    for g in fs.iter().chain(f).chain(ft) {
        locs.extend(gm(g).active_locations());
    }
    let tol = 1e-12;
    let mut m = Measured { a1: 0.0, a2: 0.0, a3: 0.0, a4: 0.0, a5: 0.0, a6: 0.0 };
    for i in 0..k {
        let (a, b) = gm(fs[i]).range();
        for j in 0..k {
            let s = integrate(
                &|y| {
                    let r = ln_ratio(ln(fs[j], y), ln(f[j], y));
                    let w = dens(fs[i], y);
                    if w == 0.0 {
                        0.0
                    } else {
                        w * r * r
                    }
                },
                a,
                b,
                &locs,
                tol,
            );
            m.a1 = m.a1.max(s);
        }
        let a5 = integrate(
            &|y| {
                let w = dens(fs[i], y);
                if w == 0.0 {
                    return 0.0;
                }
                w * (0..k).map(|j| ln_ratio(ln(ft[j], y), ln(f[j], y))).fold(f64::NEG_INFINITY, f64::max)
            },
            lo,
            hi,
            &locs,
            tol,
        );
        m.a5 = m.a5.max(a5);
    }
    let outside = |g: &EmissionDensity| {
        let (a, b) = gm(g).range();
        let left = if a < lo { integrate(&|y| dens(g, y), a, lo, &locs, 1e-16) } else { 0.0 };
        let right = if b > hi { integrate(&|y| dens(g, y), hi, b, &locs, 1e-16) } else { 0.0 };
        left + right
    };
    for j in 0..k {
        let a2 = integrate(&|y| chi_term(ln(fs[j], y), ln(f[j], y)), lo, hi, &locs, tol);
        let a6 = integrate(&|y| chi_term(ln(ft[j], y), ln(fs[j], y)), lo, hi, &locs, tol);
        m.a2 = m.a2.max(a2);
        m.a6 = m.a6.max(a6);
        m.a3 = m.a3.max(outside(ft[j]));
        m.a4 = m.a4.max(outside(fs[j]));
    }
    m
}

/// Measures the six neighborhood conditions for candidate emissions `f`
/// with approximants `ftilde` around the truths `fstar` on the set `s`.
pub fn kl_neighborhood_measure(
    fstar: &[EmissionDensity],
    f: &[EmissionDensity],
    ftilde: &[EmissionDensity],
    s: &Subset,
) -> Result<Measured> {
    let k = fstar.len();
    if k == 0 || f.len() != k || ftilde.len() != k {
        return Err(Error::InvalidParameter("truths, candidates and approximants must have equal length".into()));
    }
    let mut all = fstar.to_vec();
    all.extend_from_slice(f);
    all.extend_from_slice(ftilde);
    let space = common_space(&all)?;
    match (space, *s) {
        (ObsSpace::Discrete, Subset::Counts { lo, hi }) => {
            Ok(measure_discrete(&discrete_refs(fstar), &discrete_refs(f), &discrete_refs(ftilde), lo.max(1), hi))
        }
        (ObsSpace::Continuous, Subset::Interval { lo, hi }) => {
            let (a, b, c): (Vec<_>, Vec<_>, Vec<_>) = (fstar.iter().collect(), f.iter().collect(), ftilde.iter().collect());
            Ok(measure_continuous(&a, &b, &c, lo, hi))
        }
        _ => Err(Error::MixedSpace),
    }
}

/// Evaluates the six neighborhood conditions at radius `eps_tilde`. Left-hand
/// sides are maxima over the state indices; infinite values fail.
pub fn kl_neighborhood_check(
    fstar: &[EmissionDensity],
    f: &[EmissionDensity],
    ftilde: &[EmissionDensity],
    s: &Subset,
    eps_tilde: f64,
    u_n: f64,
) -> Result<NeighborhoodReport> {
    Ok(kl_neighborhood_measure(fstar, f, ftilde, s)?.evaluate(eps_tilde, u_n))
}
