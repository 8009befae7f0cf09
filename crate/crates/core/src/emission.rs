//! Emission densities for the two observation regimes and the L1 geometry
//! between them.
//!
//! Discrete emissions live on `{1, 2, ...}`. They are stored as an explicit
//! vector over `{1, ..., V_max}` plus a residual tail mass spread over
//! `l > V_max` by a geometric continuation `tail_mass (1 - r) r^(l - V_max - 1)`,
//! so every stored pmf is exactly normalized on all of the integers.
//! Continuous emissions are location mixtures of Gaussians sharing one
//! bandwidth.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{integrate, ln_normal_pdf, log_sum_exp};

const NORM_TOL: f64 = 1e-12;

/// Observation space of an emission family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsSpace {
    Discrete,
    Continuous,
}

/// Probability mass function on `{1, 2, ...}` with a geometric tail beyond
/// the stored support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPmf", into = "RawPmf")]
pub struct DiscretePmf {
    probs: Vec<f64>,
    ln_probs: Vec<f64>,
    tail_mass: f64,
    ln_tail: f64,
    tail_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPmf {
    probs: Vec<f64>,
    tail_mass: f64,
    #[serde(default)]
    tail_rate: f64,
}

impl TryFrom<RawPmf> for DiscretePmf {
    type Error = Error;
    fn try_from(raw: RawPmf) -> Result<Self> {
        DiscretePmf::new(raw.probs, raw.tail_mass, raw.tail_rate)
    }
}

impl From<DiscretePmf> for RawPmf {
    fn from(p: DiscretePmf) -> Self {
        RawPmf { probs: p.probs, tail_mass: p.tail_mass, tail_rate: p.tail_rate }
    }
}

impl DiscretePmf {
    /// Validates nonnegativity and `sum(probs) + tail_mass = 1` within 1e-12.
    pub fn new(probs: Vec<f64>, tail_mass: f64, tail_rate: f64) -> Result<Self> {
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || !(tail_mass >= 0.0) {
            return Err(Error::InvalidParameter("pmf entries must be finite and nonnegative".into()));
        }
        if !(0.0..1.0).contains(&tail_rate) {
            return Err(Error::InvalidParameter(format!("tail rate {tail_rate} outside [0, 1)")));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("pmf sums to {total}, not 1")));
        }
        let ln_probs = probs.iter().map(|p| p.ln()).collect();
        Ok(DiscretePmf { probs, ln_probs, tail_mass, ln_tail: tail_mass.ln(), tail_rate })
    }

    /// Builds a pmf from unnormalized log weights over `{1..V}` and the tail
    /// cell, normalizing in log space. Entries too small for `f64` keep
    /// their exact logarithm, so log-density evaluations never see a
    /// spurious zero.
    pub fn from_ln_weights(ln_w: &[f64], ln_tail: f64, tail_rate: f64) -> Result<Self> {
        let mut all = ln_w.to_vec();
        all.push(ln_tail);
        let ln_z = log_sum_exp(&all);
        if !ln_z.is_finite() {
            return Err(Error::InvalidParameter("pmf weights are all zero".into()));
        }
        let ln_probs: Vec<f64> = ln_w.iter().map(|w| w - ln_z).collect();
        let probs: Vec<f64> = ln_probs.iter().map(|l| l.exp()).collect();
        let tail_mass = (1.0 - probs.iter().sum::<f64>()).max(0.0).min((ln_tail - ln_z).exp());
        if !(0.0..1.0).contains(&tail_rate) {
            return Err(Error::InvalidParameter(format!("tail rate {tail_rate} outside [0, 1)")));
        }
        let mut pmf = DiscretePmf { probs, ln_probs, tail_mass, ln_tail: ln_tail - ln_z, tail_rate };
        pmf.renormalize();
        Ok(pmf)
    }

    /// Normalizes nonnegative weights; the tail keeps rate `tail_rate`.
    pub fn from_weights(weights: &[f64], tail_weight: f64, tail_rate: f64) -> Result<Self> {
        let ln_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::from_ln_weights(&ln_w, tail_weight.ln(), tail_rate)
    }

    // Absorbs rounding drift into the largest cell so the sum is exactly 1
    // up to one ulp.
    fn renormalize(&mut self) {
        let total: f64 = self.probs.iter().sum::<f64>() + self.tail_mass;
        let drift = 1.0 - total;
        if drift != 0.0 {
            let (idx, _) = self
                .probs
                .iter()
                .enumerate()
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
            if idx != usize::MAX && self.probs[idx] >= self.tail_mass {
                self.probs[idx] += drift;
                self.ln_probs[idx] = self.probs[idx].ln();
            } else {
                self.tail_mass += drift;
                self.ln_tail = self.tail_mass.ln();
            }
        }
    }

    pub fn v_max(&self) -> u64 {
        self.probs.len() as u64
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn ln_probs(&self) -> &[f64] {
        &self.ln_probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn tail_rate(&self) -> f64 {
        self.tail_rate
    }

    /// Exact logarithm of the tail mass, finite even when the mass underflows.
    pub fn ln_tail_mass(&self) -> f64 {
        self.ln_tail
    }

    pub fn prob(&self, l: u64) -> f64 {
        if l == 0 {
            0.0
        } else if l <= self.v_max() {
            self.probs[(l - 1) as usize]
        } else {
            self.ln_prob(l).exp()
        }
    }

    pub fn ln_prob(&self, l: u64) -> f64 {
        if l == 0 {
            return f64::NEG_INFINITY;
        }
        if l <= self.v_max() {
            return self.ln_probs[(l - 1) as usize];
        }
        if self.ln_tail == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let j = l - self.v_max() - 1;
        if self.tail_rate == 0.0 {
            return if j == 0 { self.ln_tail } else { f64::NEG_INFINITY };
        }
        self.ln_tail + (1.0 - self.tail_rate).ln() + j as f64 * self.tail_rate.ln()
    }

    /// Mass of `{l >= from}`.
    pub fn mass_from(&self, from: u64) -> f64 {
        let from = from.max(1);
        let v = self.v_max();
        if from <= v {
            self.probs[(from - 1) as usize..].iter().sum::<f64>() + self.tail_mass
        } else {
            self.tail_mass * self.tail_rate.powf((from - v - 1) as f64)
        }
    }

    /// Smallest `L` with mass beyond `L` below `eps`.
    pub fn effective_upper(&self, eps: f64) -> u64 {
        let v = self.v_max();
        if self.tail_mass <= eps {
            let mut rem = self.tail_mass;
            let mut l = v;
            while l > 0 && rem + self.probs[(l - 1) as usize] <= eps {
                rem += self.probs[(l - 1) as usize];
                l -= 1;
            }
            return l;
        }
        if self.tail_rate == 0.0 {
            return v + 1;
        }
        let extra = ((eps / self.tail_mass).ln() / self.tail_rate.ln()).ceil().max(1.0);
        v + extra as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u64 + 1;
            }
        }
        if self.tail_mass == 0.0 {
            // Rounding: fall back on the last positive cell.
            let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            return last as u64 + 1;
        }
        let v = self.v_max();
        if self.tail_rate == 0.0 {
            return v + 1;
        }
        let w: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        v + 1 + (w.ln() / self.tail_rate.ln()).floor() as u64
    }
}

/// Location mixture of Gaussians with a shared bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGmix", into = "RawGmix")]
pub struct GaussianMixtureDensity {
    weights: Vec<f64>,
    locations: Vec<f64>,
    sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawGmix {
    weights: Vec<f64>,
    locations: Vec<f64>,
    sigma: f64,
}

impl TryFrom<RawGmix> for GaussianMixtureDensity {
    type Error = Error;
    fn try_from(raw: RawGmix) -> Result<Self> {
        GaussianMixtureDensity::new(raw.weights, raw.locations, raw.sigma)
    }
}

impl From<GaussianMixtureDensity> for RawGmix {
    fn from(g: GaussianMixtureDensity) -> Self {
        RawGmix { weights: g.weights, locations: g.locations, sigma: g.sigma }
    }
}

impl GaussianMixtureDensity {
    pub fn new(weights: Vec<f64>, locations: Vec<f64>, sigma: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != locations.len() {
            return Err(Error::InvalidParameter("mixture weights and locations must match and be nonempty".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || locations.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative, locations finite".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidParameter(format!("mixture weights sum to {total}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth {sigma} must be positive")));
        }
        Ok(GaussianMixtureDensity { weights, locations, sigma })
    }

    /// Normalizes the weights before validating.
    pub fn normalized(mut weights: Vec<f64>, locations: Vec<f64>, sigma: f64) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("mixture weights are all zero".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Self::new(weights, locations, sigma)
    }

    pub fn single(location: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![location], sigma)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.locations).map(|(w, z)| w * z).sum()
    }

    pub fn density(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.locations)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, z)| w * ln_normal_pdf(y, *z, self.sigma).exp())
            .sum()
    }

    pub fn ln_density(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.locations)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, z)| w.ln() + ln_normal_pdf(y, *z, self.sigma))
            .collect();
        log_sum_exp(&terms)
    }

    /// Interval holding all but a negligible (< 1e-14) fraction of the mass.
    pub fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.active_locations().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), z| (a.min(z), b.max(z)));
        (lo - 8.0 * self.sigma, hi + 8.0 * self.sigma)
    }

    pub fn active_locations(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights.iter().zip(&self.locations).filter(|(w, _)| **w > 0.0).map(|(_, z)| *z)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        let noise = Normal::new(0.0, self.sigma).expect("sigma validated");
        self.locations[idx] + noise.sample(rng)
    }
}

/// An emission density `f_i` of either regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum EmissionDensity {
    #[serde(rename = "discrete")]
    Discrete(DiscretePmf),
    #[serde(rename = "gmix")]
    Gmix(GaussianMixtureDensity),
}

impl EmissionDensity {
    pub fn space(&self) -> ObsSpace {
        match self {
            EmissionDensity::Discrete(_) => ObsSpace::Discrete,
            EmissionDensity::Gmix(_) => ObsSpace::Continuous,
        }
    }

    /// Density at `y`; discrete emissions reject non-integer `y`.
    pub fn density(&self, y: f64) -> Result<f64> {
        match self {
            EmissionDensity::Discrete(p) => Ok(p.prob(as_count(y)?)),
            EmissionDensity::Gmix(g) => Ok(g.density(y)),
        }
    }

    pub fn ln_density(&self, y: f64) -> Result<f64> {
        match self {
            EmissionDensity::Discrete(p) => Ok(p.ln_prob(as_count(y)?)),
            EmissionDensity::Gmix(g) => Ok(g.ln_density(y)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EmissionDensity::Discrete(p) => p.sample(rng) as f64,
            EmissionDensity::Gmix(g) => g.sample(rng),
        }
    }

    pub fn as_discrete(&self) -> Option<&DiscretePmf> {
        match self {
            EmissionDensity::Discrete(p) => Some(p),
            _ => None,
        }
    }

    pub fn as_gmix(&self) -> Option<&GaussianMixtureDensity> {
        match self {
            EmissionDensity::Gmix(g) => Some(g),
            _ => None,
        }
    }
}

/// Evaluates `f(y)`.
pub fn density_eval(f: &EmissionDensity, y: f64) -> Result<f64> {
    f.density(y)
}

pub(crate) fn as_count(y: f64) -> Result<u64> {
    if !y.is_finite() || y.fract() != 0.0 {
        return Err(Error::Domain(y));
    }
    Ok(if y < 1.0 { 0 } else { y as u64 })
}

/// Common observation space of a list of emissions.
pub fn common_space(fs: &[EmissionDensity]) -> Result<ObsSpace> {
    let first = fs.first().ok_or_else(|| Error::InvalidParameter("empty emission list".into()))?.space();
    if fs.iter().any(|f| f.space() != first) {
        return Err(Error::MixedSpace);
    }
    Ok(first)
}

/// Sum of `|A a^j - B b^j|` over `j >= 0`, for `a, b` in `[0, 1)`.
fn geometric_abs_diff(a_coef: f64, a: f64, b_coef: f64, b: f64) -> f64 {
    let total = |c: f64, r: f64, from: f64, to: Option<f64>| -> f64 {
        // c * sum_{j=from}^{to-1} r^j
        if c == 0.0 {
            return 0.0;
        }
        let start = if from == 0.0 { 1.0 } else { r.powf(from) };
        let end = to.map_or(0.0, |t| if t == 0.0 { 1.0 } else { r.powf(t) });
        c * (start - end) / (1.0 - r)
    };
    if a_coef == 0.0 || b_coef == 0.0 || a == b {
        return (total(a_coef, a, 0.0, None) - total(b_coef, b, 0.0, None)).abs();
    }
    // A a^j - B b^j changes sign once, at j* = ln(A/B) / ln(b/a).
    let jstar = if a == 0.0 || b == 0.0 { 1.0 } else { (a_coef / b_coef).ln() / (b / a).ln() };
    let jc = if jstar.is_finite() { jstar.ceil().max(0.0) } else { 0.0 };
    let head = (total(a_coef, a, 0.0, Some(jc)) - total(b_coef, b, 0.0, Some(jc))).abs();
    let rest = (total(a_coef, a, jc, None) - total(b_coef, b, jc, None)).abs();
    head + rest
}

fn l1_discrete(f: &DiscretePmf, g: &DiscretePmf) -> f64 {
    let w = f.v_max().max(g.v_max());
    let head: f64 = (1..=w).map(|l| (f.prob(l) - g.prob(l)).abs()).sum();
    // Beyond w both are geometric sequences c r^(l - w - 1).
    let coef = |p: &DiscretePmf| {
        if p.tail_mass == 0.0 {
            (0.0, 0.0)
        } else {
            (p.prob(w + 1), p.tail_rate)
        }
    };
    let (ca, a) = coef(f);
    let (cb, b) = coef(g);
    head + geometric_abs_diff(ca, a, cb, b)
}

fn l1_continuous(f: &GaussianMixtureDensity, g: &GaussianMixtureDensity) -> f64 {
    let (a1, b1) = f.range();
    let (a2, b2) = g.range();
    let breaks: Vec<f64> = f.active_locations().chain(g.active_locations()).collect();
    let integrand = |y: f64| (f.density(y) - g.density(y)).abs();
    integrate(&integrand, a1.min(a2), b1.max(b2), &breaks, 1e-8).clamp(0.0, 2.0)
}

/// `||f - g||_1`: exact for discrete pmfs (tails included), adaptive
/// quadrature with absolute tolerance 1e-6 for Gaussian mixtures.
pub fn l1_density_distance(f: &EmissionDensity, g: &EmissionDensity) -> Result<f64> {
    match (f, g) {
        (EmissionDensity::Discrete(a), EmissionDensity::Discrete(b)) => Ok(l1_discrete(a, b)),
        (EmissionDensity::Gmix(a), EmissionDensity::Gmix(b)) => Ok(l1_continuous(a, b)),
        _ => Err(Error::MixedSpace),
    }
}

/// Emission metric `d(f, g) = max_i ||f_i - g_i||_1`.
pub fn emission_metric(f: &[EmissionDensity], g: &[EmissionDensity]) -> Result<f64> {
    if f.len() != g.len() {
        return Err(Error::InvalidParameter("emission lists differ in length".into()));
    }
    f.iter().zip(g).try_fold(0.0f64, |acc, (a, b)| Ok(acc.max(l1_density_distance(a, b)?)))
}

// ---------------------------------------------------------------------------
// Envelope class for discrete emissions
// ---------------------------------------------------------------------------

/// Parameters of the envelope class `f(l) <= d exp(-c l^m)` with
/// `sum_{l<=N} -log f(l) / l = O(N^K)`, plus the tail-link slack `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeClassSpec {
    pub m: f64,
    pub c: f64,
    #[serde(rename = "K")]
    pub k_exp: f64,
    pub d_env: f64,
    pub delta: f64,
}

impl EnvelopeClassSpec {
    pub fn new(m: f64, c: f64, k_exp: f64, d_env: f64, delta: f64) -> Result<Self> {
        let s = EnvelopeClassSpec { m, c, k_exp, d_env, delta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.m, self.c, self.k_exp, self.d_env, self.delta].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("envelope parameters must all be positive".into()))
        }
    }

    pub fn envelope(&self, l: u64) -> f64 {
        self.d_env * (-self.c * (l as f64).powf(self.m)).exp()
    }
}

/// Named pmf shapes on `{1, 2, ...}`, given up to normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PmfFamily {
    /// `f(l) ∝ exp(-rate l)`.
    Geometric { rate: f64 },
    /// `f(l) ∝ exp(-scale l^2)`.
    SquaredExponential { scale: f64 },
    /// Uniform on `{1, ..., upper}`.
    Uniform { upper: u64 },
    /// `f(l) ∝ l^(-exponent)`, exponent > 1.
    PowerLaw { exponent: f64 },
}

impl PmfFamily {
    fn ln_weight(&self, l: u64) -> f64 {
        let x = l as f64;
        match *self {
            PmfFamily::Geometric { rate } => -rate * x,
            PmfFamily::SquaredExponential { scale } => -scale * x * x,
            PmfFamily::Uniform { upper } => {
                if l <= upper {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            PmfFamily::PowerLaw { exponent } => -exponent * x.ln(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PmfFamily::Geometric { rate } => rate > 0.0,
            PmfFamily::SquaredExponential { scale } => scale > 0.0,
            PmfFamily::Uniform { upper } => upper >= 1,
            PmfFamily::PowerLaw { exponent } => exponent > 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid family parameters {self:?}")))
        }
    }

    /// Exact pmf values on `{1..v_max}` and the exact tail mass.
    fn table(&self, v_max: u64) -> (Vec<f64>, f64) {
        match *self {
            PmfFamily::Geometric { rate } => {
                // f(l) = (e^rate - 1) e^(-rate l), tail beyond V is e^(-rate V).
                let c = rate.exp_m1();
                let probs = (1..=v_max).map(|l| c * (-rate * l as f64).exp()).collect();
                (probs, (-rate * v_max as f64).exp())
            }
            PmfFamily::Uniform { upper } => {
                let probs = (1..=v_max).map(|l| if l <= upper { 1.0 / upper as f64 } else { 0.0 }).collect();
                let tail = upper.saturating_sub(v_max) as f64 / upper as f64;
                (probs, tail)
            }
            PmfFamily::PowerLaw { exponent } => {
                let z = crate::numeric::zeta(exponent);
                let probs: Vec<f64> = (1..=v_max).map(|l| (l as f64).powf(-exponent) / z).collect();
                let head: f64 = (1..=v_max).map(|l| (l as f64).powf(-exponent)).sum();
                (probs, ((z - head) / z).max(0.0))
            }
            PmfFamily::SquaredExponential { .. } => {
                let ln_w: Vec<f64> = (1..=v_max + 64).map(|l| self.ln_weight(l)).collect();
                let ln_z = log_sum_exp(&ln_w);
                let probs = ln_w[..v_max as usize].iter().map(|w| (w - ln_z).exp()).collect();
                let tail = ln_w[v_max as usize..].iter().map(|w| (w - ln_z).exp()).sum();
                (probs, tail)
            }
        }
    }
}

/// Builds the pmf of `family` truncated at `v_max` with its tail folded into
/// a geometric continuation fitted at `v_max`, and checks the pointwise
/// envelope of `spec` on every stored point.
pub fn make_envelope_pmf(spec: &EnvelopeClassSpec, family: PmfFamily, v_max: u64) -> Result<DiscretePmf> {
    spec.validate()?;
    family.validate()?;
    if v_max == 0 {
        return Err(Error::InvalidParameter("v_max must be at least 1".into()));
    }
    let (probs, tail) = family.table(v_max);
    for (i, &p) in probs.iter().enumerate() {
        let l = i as u64 + 1;
        let bound = spec.envelope(l);
        if p > bound * (1.0 + 1e-12) {
            return Err(Error::EnvelopeViolation { index: l, value: p, bound });
        }
    }
    // Geometric continuation: first tail cell matches the family exactly.
    let tail_rate = if tail > 0.0 {
        let (next, _) = family.table(v_max + 1);
        let first = next[v_max as usize];
        (1.0 - first / tail).clamp(0.0, 1.0 - 1e-15)
    } else {
        0.0
    };
    let total: f64 = probs.iter().sum::<f64>() + tail;
    let probs: Vec<f64> = probs.into_iter().map(|p| p / total).collect();
    let tail = tail / total;
    let mut pmf = DiscretePmf::new(probs.clone(), tail, tail_rate).or_else(|_| {
        let t = (1.0 - probs.iter().sum::<f64>()).max(0.0);
        DiscretePmf::new(probs, t, tail_rate)
    })?;
    pmf.renormalize();
    // Cells that underflowed keep their exact logarithm.
    if let Some((i, _)) = pmf.probs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        let offset = pmf.ln_probs[i] - family.ln_weight(i as u64 + 1);
        for (j, lp) in pmf.ln_probs.iter_mut().enumerate() {
            if *lp == f64::NEG_INFINITY {
                *lp = family.ln_weight(j as u64 + 1) + offset;
            }
        }
    }
    Ok(pmf)
}

/// Outcome of an envelope-class membership test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub member: bool,
    pub pointwise_ok: bool,
    pub first_violation: Option<u64>,
    pub violations: usize,
    pub log_sum_ok: bool,
    /// Smallest `C` with `S(N) <= C N^K` on the grid.
    pub fitted_constant: f64,
    /// Log-log slope of `S(N)` over the upper half of the grid.
    pub growth_exponent: f64,
}

const GROWTH_SLACK: f64 = 0.25;

/// Checks the pointwise envelope on every stored point and the log-sum
/// growth `S(N) = sum_{l<=N} -log f(l)/l = O(N^K)` on `N in {10..V_max}`.
/// The growth clause passes when the log-log slope of `S` over the upper
/// half of the grid is at most `K + 0.25`.
pub fn check_envelope_membership(pmf: &DiscretePmf, spec: &EnvelopeClassSpec) -> EnvelopeReport {
    let mut first_violation = None;
    let mut violations = 0;
    for l in 1..=pmf.v_max() {
        if pmf.prob(l) > spec.envelope(l) * (1.0 + 1e-12) {
            violations += 1;
            first_violation.get_or_insert(l);
        }
    }
    let v = pmf.v_max();
    let (log_sum_ok, fitted_constant, growth_exponent) = if v < 10 {
        (true, f64::NAN, f64::NAN)
    } else {
        let mut partial = Vec::with_capacity(v as usize);
        let mut s = 0.0;
        for l in 1..=v {
            s += -pmf.ln_prob(l) / l as f64;
            partial.push(s);
        }
        let grid: Vec<u64> = (10..=v).collect();
        let c = grid.iter().map(|&n| partial[(n - 1) as usize] / (n as f64).powf(spec.k_exp)).fold(0.0f64, f64::max);
        let upper = &grid[grid.len() / 2..];
        let xs: Vec<f64> = upper.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = upper.iter().map(|&n| partial[(n - 1) as usize].max(f64::MIN_POSITIVE).ln()).collect();
        let slope = if xs.len() >= 2 && ys.iter().all(|y| y.is_finite()) {
            crate::numeric::ols(&xs, &ys).0
        } else if ys.iter().all(|y| y.is_finite()) {
            0.0
        } else {
            f64::INFINITY
        };
        let ok = c.is_finite() && slope <= spec.k_exp + GROWTH_SLACK;
        (ok, c, slope)
    };
    EnvelopeReport {
        member: violations == 0 && log_sum_ok,
        pointwise_ok: violations == 0,
        first_violation,
        violations,
        log_sum_ok,
        fitted_constant,
        growth_exponent,
    }
}

/// Sums `term(l)` over `l >= from` until every pmf's remaining mass beyond
/// its stored support is negligible.
pub(crate) fn sum_over_counts<F: FnMut(u64) -> f64>(pmfs: &[&DiscretePmf], from: u64, mut term: F) -> f64 {
    let v = pmfs.iter().map(|p| p.v_max()).max().unwrap_or(0);
    let mut total = 0.0;
    let mut l = from.max(1);
    const CAP: u64 = 20_000_000;
    loop {
        if l > v {
            let rem = pmfs.iter().map(|p| p.mass_from(l)).fold(0.0f64, f64::max);
            if rem < 1e-22 || l > v + CAP {
                break;
            }
        }
        let t = term(l);
        if t.is_nan() {
            // 0 * inf conventions are handled by the caller; NaN here means
            // both factors vanished.
        } else {
            total += t;
        }
        l += 1;
    }
    total
}

/// One entry of a tail-link report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailLinkEntry {
    pub i: usize,
    pub j: usize,
    pub n: u64,
    pub lhs: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailLinkReport {
    pub entries: Vec<TailLinkEntry>,
    pub max_ratio: f64,
    /// The ratio at the largest N does not exceed the largest ratio seen on
    /// the first half of the grid, for every pair.
    pub bounded: bool,
}

/// Discrete tail link: `sum_{l>=N} f_i(l) log^2 f_j(l)` against
/// `exp(-N^m (c - delta))` for every ordered pair and every `N`.
pub fn tail_link_discrete(fstar: &[DiscretePmf], spec: &EnvelopeClassSpec, n_grid: &[u64]) -> Result<TailLinkReport> {
    spec.validate()?;
    if n_grid.is_empty() {
        return Err(Error::DegenerateGrid("empty N grid".into()));
    }
    let mut entries = Vec::new();
    let mut bounded = true;
    for (i, fi) in fstar.iter().enumerate() {
        for (j, fj) in fstar.iter().enumerate() {
            let mut ratios = Vec::with_capacity(n_grid.len());
            for &n in n_grid {
                let lhs = sum_over_counts(&[fi, fj], n, |l| {
                    let p = fi.prob(l);
                    if p == 0.0 {
                        0.0
                    } else {
                        p * fj.ln_prob(l).powi(2)
                    }
                });
                let bound = (-(n as f64).powf(spec.m) * (spec.c - spec.delta)).exp();
                let ratio = lhs / bound;
                ratios.push(ratio);
                entries.push(TailLinkEntry { i, j, n, lhs, bound, ratio });
            }
            let half = ratios.len().div_ceil(2);
            let early = ratios[..half].iter().copied().fold(0.0f64, f64::max);
            if !(ratios[ratios.len() - 1] <= early) {
                bounded = false;
            }
        }
    }
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0f64, f64::max);
    Ok(TailLinkReport { entries, max_ratio, bounded })
}

// ---------------------------------------------------------------------------
// Hölder-type class and tail conditions for continuous emissions
// ---------------------------------------------------------------------------

/// Constants of the pairwise tail link `f_i(y) <= f_j(y) M exp(tau |y|^gamma)`
/// for `|y| >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairTail {
    pub threshold: f64,
    pub m: f64,
    pub tau: f64,
    pub gamma: f64,
}

/// Monotone tails and central floor of one emission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotoneWindow {
    pub y_lo: f64,
    pub y_hi: f64,
    pub floor: f64,
}

/// Configuration of the Hölder-type class and its tail conditions. The
/// local Hölder polynomial is kept as metadata and never checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderSpec {
    pub beta: f64,
    #[serde(default)]
    pub l_poly: Vec<f64>,
    pub m0: f64,
    pub tau0: f64,
    pub gamma0: f64,
    /// `pairs[i][j]` links the tail of emission i to emission j.
    pub pairs: Vec<Vec<PairTail>>,
    pub windows: Vec<MonotoneWindow>,
}

impl HolderSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.m0 > 0.0 && self.tau0 > 0.0 && self.gamma0 > 0.0) {
            return Err(Error::InvalidParameter("Hölder and tail constants must be positive".into()));
        }
        for row in &self.pairs {
            for p in row {
                if !(p.gamma < self.gamma0) {
                    return Err(Error::InvalidParameter(format!(
                        "pairwise tail exponent {} must be below {}",
                        p.gamma, self.gamma0
                    )));
                }
            }
        }
        for w in &self.windows {
            if !(w.y_lo < w.y_hi && w.floor > 0.0) {
                return Err(Error::InvalidParameter("monotone window needs y_lo < y_hi and a positive floor".into()));
            }
        }
        Ok(())
    }
}

/// Grid-based check of the three tail conditions. Margins are on the log
/// scale; a nonnegative margin means the condition holds on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderTailReport {
    /// `min_y [log(M0) - tau0 |y|^gamma0 - log f_i(y)]` over all i.
    pub envelope_margin: f64,
    /// `pair_margins[i][j] = min_{|y| >= T_ij} [log f_j + log M_ij + tau_ij |y|^gamma_ij - log f_i]`.
    pub pair_margins: Vec<Vec<f64>>,
    pub monotone_ok: Vec<bool>,
    pub holds: bool,
}

/// Checks the tail envelope, pairwise tail links and monotone tails of
/// Gaussian-mixture truths on a grid of step `sigma / 10` over `[-y_max, y_max]`.
pub fn holder_tail_check(fstar: &[GaussianMixtureDensity], spec: &HolderSpec, y_max: f64) -> Result<HolderTailReport> {
    spec.validate()?;
    let k = fstar.len();
    if spec.pairs.len() != k || spec.pairs.iter().any(|r| r.len() != k) || spec.windows.len() != k {
        return Err(Error::InvalidParameter("tail constants must be given for every state".into()));
    }
    let step = fstar.iter().map(|f| f.sigma()).fold(f64::INFINITY, f64::min) / 10.0;
    let n = (2.0 * y_max / step).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| -y_max + i as f64 * step).collect();
    let ln_f: Vec<Vec<f64>> = fstar.iter().map(|f| grid.iter().map(|&y| f.ln_density(y)).collect()).collect();

    let mut envelope_margin = f64::INFINITY;
    for lf in &ln_f {
        for (y, v) in grid.iter().zip(lf) {
            envelope_margin = envelope_margin.min(spec.m0.ln() - spec.tau0 * y.abs().powf(spec.gamma0) - v);
        }
    }
    let mut pair_margins = vec![vec![f64::INFINITY; k]; k];
    for i in 0..k {
        for j in 0..k {
            let p = spec.pairs[i][j];
            for (g, y) in grid.iter().enumerate() {
                if y.abs() >= p.threshold {
                    let m = ln_f[j][g] + p.m.ln() + p.tau * y.abs().powf(p.gamma) - ln_f[i][g];
                    pair_margins[i][j] = pair_margins[i][j].min(m);
                }
            }
        }
    }
    let monotone_ok: Vec<bool> = (0..k)
        .map(|i| {
            let w = spec.windows[i];
            let lf = &ln_f[i];
            let mut ok = true;
            for g in 1..grid.len() {
                let (y0, y1) = (grid[g - 1], grid[g]);
                if y1 <= w.y_lo && lf[g] < lf[g - 1] - 1e-12 {
                    ok = false;
                }
                if y0 >= w.y_hi && lf[g] > lf[g - 1] + 1e-12 {
                    ok = false;
                }
                if y1 > w.y_lo && y1 < w.y_hi && lf[g] < w.floor.ln() {
                    ok = false;
                }
            }
            ok
        })
        .collect();
    let holds = envelope_margin >= 0.0
        && pair_margins.iter().flatten().all(|m| *m >= -1e-12)
        && monotone_ok.iter().all(|b| *b);
    Ok(HolderTailReport { envelope_margin, pair_margins, monotone_ok, holds })
}

/// Tail-link check dispatching on the observation regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "lowercase")]
pub enum TailLinkOutcome {
    Discrete(TailLinkReport),
    Continuous(HolderTailReport),
}

/// Class specification accepted by [`tail_link_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum TailClass<'a> {
    Envelope(&'a EnvelopeClassSpec),
    Holder(&'a HolderSpec),
}

/// Checks the link between the tails of the true emissions: the discrete
/// log-square tail sums for an envelope class, the grid tail conditions for
/// a Hölder class. `n_grid` holds the N values (discrete) or the single
/// `y_max` bound (continuous, first element).
pub fn tail_link_check(fstar: &[EmissionDensity], class: TailClass<'_>, n_grid: &[u64]) -> Result<TailLinkOutcome> {
    match class {
        TailClass::Envelope(spec) => {
            let pmfs: Vec<DiscretePmf> =
                fstar.iter().map(|f| f.as_discrete().cloned().ok_or(Error::MixedSpace)).collect::<Result<_>>()?;
            Ok(TailLinkOutcome::Discrete(tail_link_discrete(&pmfs, spec, n_grid)?))
        }
        TailClass::Holder(spec) => {
            let gm: Vec<GaussianMixtureDensity> =
                fstar.iter().map(|f| f.as_gmix().cloned().ok_or(Error::MixedSpace)).collect::<Result<_>>()?;
            let y_max = *n_grid.first().ok_or_else(|| Error::DegenerateGrid("missing y_max".into()))? as f64;
            Ok(TailLinkOutcome::Continuous(holder_tail_check(&gm, spec, y_max)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn geometric_spec() -> EnvelopeClassSpec {
        EnvelopeClassSpec::new(1.0, 1.0, 1.0, std::f64::consts::E - 1.0, 0.1).unwrap()
    }

    #[test]
    fn density_eval_examples() {
        let g = EmissionDensity::Gmix(GaussianMixtureDensity::single(0.0, 1.0).unwrap());
        assert!((density_eval(&g, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let p = EmissionDensity::Discrete(DiscretePmf::new(vec![0.5, 0.3, 0.2], 0.0, 0.0).unwrap());
        assert_eq!(density_eval(&p, 2.0).unwrap(), 0.3);
        assert_eq!(density_eval(&p, 4.0).unwrap(), 0.0);
        let two = EmissionDensity::Gmix(GaussianMixtureDensity::new(vec![0.5, 0.5], vec![-1.0, 1.0], 1.0).unwrap());
        let expected = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((density_eval(&two, 0.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.24197).abs() < 1e-5);
    }

    #[test]
    fn non_integer_against_discrete_is_a_domain_error() {
        let p = EmissionDensity::Discrete(DiscretePmf::new(vec![1.0], 0.0, 0.0).unwrap());
        assert_eq!(density_eval(&p, 1.5), Err(Error::Domain(1.5)));
        assert!(density_eval(&p, f64::NAN).is_err());
    }

    #[test]
    fn pmf_rejects_bad_normalization() {
        assert!(DiscretePmf::new(vec![0.5, 0.4], 0.0, 0.0).is_err());
        assert!(DiscretePmf::new(vec![0.5, -0.1], 0.6, 0.0).is_err());
        assert!(DiscretePmf::new(vec![0.5], 0.5, 1.0).is_err());
    }

    #[test]
    fn geometric_tail_is_exact() {
        let pmf = make_envelope_pmf(&geometric_spec(), PmfFamily::Geometric { rate: 1.0 }, 20).unwrap();
        // Beyond V_max the continuation reproduces (e-1) e^{-l}.
        for l in [21u64, 22, 30, 60] {
            let exact = (std::f64::consts::E - 1.0) * (-(l as f64)).exp();
            assert!((pmf.prob(l) / exact - 1.0).abs() < 1e-9, "l={l}");
        }
        assert!((pmf.mass_from(25) - (-24.0f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn geometric_is_a_member() {
        let pmf = make_envelope_pmf(&geometric_spec(), PmfFamily::Geometric { rate: 1.0 }, 200).unwrap();
        let r = check_envelope_membership(&pmf, &geometric_spec());
        assert!(r.member, "{r:?}");
    }

    #[test]
    fn squared_exponential_needs_a_quadratic_log_sum() {
        let spec = EnvelopeClassSpec::new(1.0, 1.0, 2.0, std::f64::consts::E, 0.1).unwrap();
        let pmf = make_envelope_pmf(&spec, PmfFamily::SquaredExponential { scale: 1.0 }, 30).unwrap();
        assert!(check_envelope_membership(&pmf, &spec).member);
        // With K = 1 the log-sum grows like N^2 and the clause fails.
        let k1 = EnvelopeClassSpec { k_exp: 1.0, ..spec };
        let r = check_envelope_membership(&pmf, &k1);
        assert!(r.pointwise_ok && !r.log_sum_ok);
    }

    #[test]
    fn uniform_violates_the_envelope() {
        let spec = EnvelopeClassSpec::new(1.0, 1.0, 1.0, 1.0, 0.1).unwrap();
        assert!(matches!(
            make_envelope_pmf(&spec, PmfFamily::Uniform { upper: 100 }, 100),
            Err(Error::EnvelopeViolation { index: 5, .. })
        ));
        let pmf = DiscretePmf::new(vec![0.01; 100], 0.0, 0.0).unwrap();
        let r = check_envelope_membership(&pmf, &spec);
        assert!(!r.member);
        // Every point from l = 5 up to and including l = 100 violates it.
        assert_eq!(r.first_violation, Some(5));
        assert_eq!(r.violations, 96);
    }

    #[test]
    fn zero_entry_fails_the_log_sum() {
        let spec = geometric_spec();
        let mut probs: Vec<f64> =
            (1..=20).map(|l| (std::f64::consts::E - 1.0) * (-(l as f64)).exp()).collect();
        let moved = probs[11];
        probs[11] = 0.0;
        let tail = 1.0 - probs.iter().sum::<f64>();
        let pmf = DiscretePmf::new(probs, tail, 0.5).unwrap();
        assert!(moved > 0.0);
        let r = check_envelope_membership(&pmf, &spec);
        assert!(!r.log_sum_ok && !r.member);
    }

    #[test]
    fn heavy_tail_fails_pointwise_at_large_l() {
        let spec = EnvelopeClassSpec::new(1.0, 1.0, 1.0, 10.0, 0.1).unwrap();
        let z = crate::numeric::zeta(3.0);
        let probs: Vec<f64> = (1..=50).map(|l| (l as f64).powi(-3) / z).collect();
        let tail = 1.0 - probs.iter().sum::<f64>();
        let pmf = DiscretePmf::new(probs, tail, 0.9).unwrap();
        let r = check_envelope_membership(&pmf, &spec);
        assert!(!r.pointwise_ok);
        // l^-3 against 10 e^-l: the last stored point is far above the envelope.
        assert!(pmf.prob(50) > spec.envelope(50));
    }

    #[test]
    fn l1_examples() {
        let a = EmissionDensity::Discrete(DiscretePmf::new(vec![0.5, 0.5], 0.0, 0.0).unwrap());
        let b = EmissionDensity::Discrete(DiscretePmf::new(vec![0.0, 0.0, 0.5, 0.5], 0.0, 0.0).unwrap());
        assert_eq!(l1_density_distance(&a, &a).unwrap(), 0.0);
        assert!((l1_density_distance(&a, &b).unwrap() - 2.0).abs() < 1e-15);
        let g0 = EmissionDensity::Gmix(GaussianMixtureDensity::single(0.0, 1.0).unwrap());
        let g1 = EmissionDensity::Gmix(GaussianMixtureDensity::single(0.5, 1.0).unwrap());
        // 2 (2 Phi(0.25) - 1)
        let phi = 0.5 * (1.0 + statrs::function::erf::erf(0.25 / std::f64::consts::SQRT_2));
        let exact = 2.0 * (2.0 * phi - 1.0);
        assert!((l1_density_distance(&g0, &g1).unwrap() - exact).abs() < 1e-6);
        // Half the L1 distance is the total variation 2 Phi(0.25) - 1.
        assert!((exact / 2.0 - 0.19741).abs() < 1e-5);
        assert_eq!(l1_density_distance(&a, &g0), Err(Error::MixedSpace));
    }

    #[test]
    fn l1_of_geometric_tails_matches_brute_force() {
        let spec = geometric_spec();
        let f = make_envelope_pmf(&spec, PmfFamily::Geometric { rate: 1.0 }, 5).unwrap();
        let g = make_envelope_pmf(&EnvelopeClassSpec { c: 0.5, ..spec }, PmfFamily::Geometric { rate: 0.7 }, 9)
            .unwrap();
        let brute: f64 = (1..5000u64).map(|l| (f.prob(l) - g.prob(l)).abs()).sum();
        let fast = l1_density_distance(&EmissionDensity::Discrete(f), &EmissionDensity::Discrete(g)).unwrap();
        assert!((brute - fast).abs() < 1e-13, "{brute} vs {fast}");
    }

    #[test]
    fn mixture_integrates_to_one() {
        let g = GaussianMixtureDensity::new(vec![0.2, 0.3, 0.5], vec![-3.0, 0.1, 4.0], 0.4).unwrap();
        let (a, b) = g.range();
        let locs: Vec<f64> = g.locations().to_vec();
        let total = integrate(&|y| g.density(y), a, b, &locs, 1e-9);
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sampling_a_pmf_reaches_the_tail() {
        let pmf = DiscretePmf::new(vec![0.5], 0.5, 0.5).unwrap();
        let mut rng = stream(3);
        let n = 40_000;
        let draws: Vec<u64> = (0..n).map(|_| pmf.sample(&mut rng)).collect();
        for l in 1..=4u64 {
            let freq = draws.iter().filter(|&&d| d == l).count() as f64 / n as f64;
            let p = pmf.prob(l);
            assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "l={l} {freq} vs {p}");
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let f = EmissionDensity::Discrete(DiscretePmf::new(vec![0.25, 0.5], 0.25, 0.5).unwrap());
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"type":"discrete","probs":[0.25,0.5],"tail_mass":0.25,"tail_rate":0.5}"#);
        assert_eq!(serde_json::from_str::<EmissionDensity>(&s).unwrap(), f);
        let g = EmissionDensity::Gmix(GaussianMixtureDensity::new(vec![1.0], vec![2.0], 0.5).unwrap());
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"type":"gmix","weights":[1.0],"locations":[2.0],"sigma":0.5}"#);
        assert!(serde_json::from_str::<EmissionDensity>(r#"{"type":"gmix","weights":[0.5],"locations":[0],"sigma":1}"#)
            .is_err());
    }

    #[test]
    fn tail_link_identical_geometrics_is_bounded() {
        let spec = geometric_spec();
        let f = make_envelope_pmf(&spec, PmfFamily::Geometric { rate: 1.0 }, 60).unwrap();
        let grid: Vec<u64> = (5..=50).collect();
        let r = tail_link_discrete(&[f.clone(), f], &spec, &grid).unwrap();
        assert!(r.bounded, "{}", r.max_ratio);
        // Independent partial-sum oracle at N = 10.
        let oracle: f64 = (10..400u64)
            .map(|l| {
                let p = (std::f64::consts::E - 1.0) * (-(l as f64)).exp();
                p * p.ln().powi(2)
            })
            .sum();
        let e = r.entries.iter().find(|e| e.i == 0 && e.j == 1 && e.n == 10).unwrap();
        assert!((e.lhs / oracle - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tail_link_depends_on_the_slower_tail() {
        let loose = EnvelopeClassSpec::new(1.0, 1.0, 1.0, 10.0, 0.1).unwrap();
        let f1 = make_envelope_pmf(&loose, PmfFamily::Geometric { rate: 1.0 }, 60).unwrap();
        let f2 = make_envelope_pmf(&loose, PmfFamily::Geometric { rate: 2.0 }, 60).unwrap();
        let grid: Vec<u64> = (5..=50).collect();
        let slow = tail_link_discrete(&[f1.clone(), f2.clone()], &loose, &grid).unwrap();
        assert!(slow.bounded);
        let fast = EnvelopeClassSpec { c: 2.0, ..loose };
        let r = tail_link_discrete(&[f1, f2], &fast, &grid).unwrap();
        assert!(!r.bounded);
    }

    #[test]
    fn gaussian_truths_satisfy_the_tail_conditions() {
        let f0 = GaussianMixtureDensity::single(0.0, 1.0).unwrap();
        let f1 = GaussianMixtureDensity::single(1.0, 1.0).unwrap();
        let pair = PairTail { threshold: 0.0, m: 0.5f64.exp(), tau: 1.0, gamma: 1.0 };
        let spec = HolderSpec {
            beta: 2.0,
            l_poly: vec![],
            m0: 1.0,
            tau0: 0.25,
            gamma0: 2.0,
            pairs: vec![vec![pair; 2]; 2],
            windows: vec![
                MonotoneWindow { y_lo: -0.01, y_hi: 0.01, floor: 0.39 },
                MonotoneWindow { y_lo: 0.99, y_hi: 1.01, floor: 0.39 },
            ],
        };
        let r = holder_tail_check(&[f0.clone(), f1.clone()], &spec, 12.0).unwrap();
        assert!(r.holds, "{r:?}");
        // The log-density difference is linear, so the pair margin is tight at
        // y = 0: log(e^{1/2}) + (y - 1)^2/2 - y^2/2 + |y| >= 0 with equality at 0.
        assert!(r.pair_margins[0][1].abs() < 1e-9);
        // A smaller constant breaks the link.
        let mut tight = spec.clone();
        tight.pairs[0][1].m = 1.0;
        assert!(!holder_tail_check(&[f0, f1], &tight, 12.0).unwrap().holds);
    }

    #[test]
    fn holder_spec_requires_lighter_pair_tails() {
        let pair = PairTail { threshold: 0.0, m: 1.0, tau: 1.0, gamma: 2.0 };
        let spec = HolderSpec {
            beta: 1.0,
            l_poly: vec![],
            m0: 1.0,
            tau0: 1.0,
            gamma0: 2.0,
            pairs: vec![vec![pair]],
            windows: vec![MonotoneWindow { y_lo: 0.0, y_hi: 1.0, floor: 0.1 }],
        };
        assert!(spec.validate().is_err());
    }
}
