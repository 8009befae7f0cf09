//! Posterior concentration experiments over a grid of sample sizes, CSV
//! records, and log-log slope fits.

use std::io::{Read, Write};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emission::{make_envelope_pmf, EmissionDensity, EnvelopeClassSpec, GaussianMixtureDensity, PmfFamily};
use crate::error::{Error, Result};
use crate::hmm::{simulate, HmmParams, TransitionMatrix};
use crate::numeric::{median, ols, quantile};
use crate::priors::{QPriorSpec, RateSchedule};
use crate::rng::{derive_seed, stream};
use crate::sampler::{posterior_distance_summary, run_chain, GibbsConfig};

/// How the true parameter is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TruthSpec {
    /// Geometric emissions `f(l) ∝ exp(-rate l)` checked against an
    /// envelope class.
    DiscreteEnvelope { transition: Vec<Vec<f64>>, rates: Vec<f64>, class: EnvelopeClassSpec, v_max: u64 },
    /// `Y_t = m_{X_t} + noise_sd * N(0, 1)`.
    Translation { transition: Vec<Vec<f64>>, means: Vec<f64>, noise_sd: f64 },
    Explicit { params: HmmParams },
}

const DEFAULT_Q: [[f64; 2]; 2] = [[0.7, 0.3], [0.4, 0.6]];

impl TruthSpec {
    /// `Q* = [[0.7, 0.3], [0.4, 0.6]]`, geometric emissions with rates 0.5
    /// and 1.5 in the class with `m = 1, c = 0.4, K = 1`.
    pub fn default_discrete() -> Self {
        TruthSpec::DiscreteEnvelope {
            transition: DEFAULT_Q.iter().map(|r| r.to_vec()).collect(),
            rates: vec![0.5, 1.5],
            class: EnvelopeClassSpec { m: 1.0, c: 0.4, k_exp: 1.0, d_env: 2.0, delta: 0.1 },
            v_max: 80,
        }
    }

    /// Same `Q*`, means `(-2, 2)` and standard Gaussian noise.
    pub fn default_continuous() -> Self {
        TruthSpec::Translation {
            transition: DEFAULT_Q.iter().map(|r| r.to_vec()).collect(),
            means: vec![-2.0, 2.0],
            noise_sd: 1.0,
        }
    }

    pub fn build(&self) -> Result<HmmParams> {
        match self {
            TruthSpec::DiscreteEnvelope { transition, rates, class, v_max } => {
                let f = rates
                    .iter()
                    .map(|&rate| make_envelope_pmf(class, PmfFamily::Geometric { rate }, *v_max).map(EmissionDensity::Discrete))
                    .collect::<Result<_>>()?;
                HmmParams::new(TransitionMatrix::from_rows(transition.clone())?, f)
            }
            TruthSpec::Translation { transition, means, noise_sd } => {
                let f = means
                    .iter()
                    .map(|&m| GaussianMixtureDensity::single(m, *noise_sd).map(EmissionDensity::Gmix))
                    .collect::<Result<_>>()?;
                HmmParams::new(TransitionMatrix::from_rows(transition.clone())?, f)
            }
            TruthSpec::Explicit { params } => Ok(params.clone()),
        }
    }
}

/// One concentration experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub truth: TruthSpec,
    /// Sampler settings; the seed is replaced per cell.
    pub gibbs: GibbsConfig,
    pub n_grid: Vec<u64>,
    pub replicates: usize,
    pub ell: usize,
    /// Rates and the radius multiplier `M`.
    pub rate: RateSchedule,
    /// `q_n` in the radius `M eps_n / q_n`. Defaults to the floor of a
    /// floored-uniform transition prior; required otherwise.
    #[serde(default)]
    pub q_n: Option<f64>,
    pub seed: u64,
    /// Wall time is the only nondeterministic column; leave it out for
    /// byte-identical replays.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// Discrete default: `n in {500, ..., 8000}`, 10 replicates, `D_2`.
    pub fn default_discrete(seed: u64) -> Self {
        ExperimentConfig {
            truth: TruthSpec::default_discrete(),
            gibbs: GibbsConfig::discrete(2, 0),
            n_grid: vec![500, 1000, 2000, 4000, 8000],
            replicates: 10,
            ell: 2,
            rate: RateSchedule::discrete(1.0, 1.5, 0.05),
            q_n: None,
            seed,
            record_wall_time: true,
        }
    }

    /// Continuous default: translation truth, `n in {250, ..., 2000}`,
    /// 5 replicates, `D_2`. The smoothness index of the rate is nominal
    /// (`beta = 2`); the Gaussian truth is smoother than any finite index.
    pub fn default_continuous(seed: u64) -> Self {
        ExperimentConfig {
            truth: TruthSpec::default_continuous(),
            gibbs: GibbsConfig::continuous(2, 0),
            n_grid: vec![250, 500, 1000, 2000],
            replicates: 5,
            ell: 2,
            rate: RateSchedule::holder(2.0, 1.0, 1.5, 0.05),
            q_n: None,
            seed,
            record_wall_time: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::DegenerateGrid("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.replicates == 0 || self.ell == 0 {
            return Err(Error::InvalidParameter("need at least one replicate and ell >= 1".into()));
        }
        self.q_n()?;
        self.gibbs.validate()?;
        let truth = self.truth.build()?;
        if truth.space() != self.gibbs.prior.emission.space() || truth.k() != self.gibbs.k {
            return Err(Error::InvalidParameter("truth and sampler disagree on space or k".into()));
        }
        Ok(())
    }

    pub fn q_n(&self) -> Result<f64> {
        match (self.q_n, &self.gibbs.prior.transition) {
            (Some(q), _) if q > 0.0 => Ok(q),
            (Some(q), _) => Err(Error::Domain(q)),
            (None, QPriorSpec::Q3 { floor }) if *floor > 0.0 => Ok(*floor),
            _ => Err(Error::InvalidParameter("q_n must be given for this transition prior".into())),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRecord {
    pub n: u64,
    pub replicate: usize,
    #[serde(rename = "median_D")]
    pub median_d: f64,
    #[serde(rename = "q90_D")]
    pub q90_d: f64,
    #[serde(rename = "exceedance_at_M")]
    pub exceedance_at_m: f64,
    pub wall_time_s: Option<f64>,
    pub seed_lineage: String,
    pub errors: String,
}

/// Header of the CSV output.
pub const CSV_HEADER: &str = "n,replicate,median_D,q90_D,exceedance_at_M,wall_time_s,seed_lineage,errors";

/// Seeds of one cell. Replicate `r` draws one sequence of length
/// `max(n_grid)` and every cell of that replicate uses its first `n`
/// observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub master: u64,
    pub n: u64,
    pub replicate: usize,
    pub data: u64,
    pub chain: u64,
}

impl CellSeeds {
    pub fn new(master: u64, n: u64, replicate: usize) -> Self {
        let data = derive_seed(derive_seed(master, 0), replicate as u64);
        let chain = derive_seed(derive_seed(derive_seed(master, 1), n), replicate as u64);
        CellSeeds { master, n, replicate, data, chain }
    }

    pub fn lineage(&self) -> String {
        format!("master={};n={};replicate={};data={};chain={}", self.master, self.n, self.replicate, self.data, self.chain)
    }

    pub fn parse(lineage: &str) -> Result<Self> {
        let mut vals = [0u64; 5];
        let keys = ["master", "n", "replicate", "data", "chain"];
        for (slot, part) in vals.iter_mut().zip(lineage.split(';')) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::InvalidParameter(format!("bad lineage {lineage}")))?;
            if !keys.contains(&k) {
                return Err(Error::InvalidParameter(format!("bad lineage key {k}")));
            }
            *slot = v.parse().map_err(|_| Error::InvalidParameter(format!("bad lineage value {v}")))?;
        }
        let s = CellSeeds::new(vals[0], vals[1], vals[2] as usize);
        if (s.data, s.chain) != (vals[3], vals[4]) {
            return Err(Error::InvalidParameter("lineage seeds do not derive from its master seed".into()));
        }
        Ok(s)
    }
}

fn replicate_data(truth: &HmmParams, len: u64, seed: u64) -> Result<Vec<f64>> {
    Ok(simulate(truth, len as usize, &mut stream(seed))?.1)
}

fn cell_stats(config: &ExperimentConfig, truth: &HmmParams, data: &[f64], seeds: CellSeeds) -> Result<(f64, f64, f64)> {
    let gibbs = GibbsConfig { seed: seeds.chain, ..config.gibbs.clone() };
    let sample = run_chain(&gibbs, &data[..seeds.n as usize])?;
    let s = posterior_distance_summary(&sample, truth, config.ell, config.rate.m_const, &config.rate, seeds.n, config.q_n()?)?;
    Ok((s.median, s.q90, s.exceedance))
}

fn record(config: &ExperimentConfig, truth: &HmmParams, data: &[f64], seeds: CellSeeds) -> RateRecord {
    let start = Instant::now();
    let out = cell_stats(config, truth, data, seeds);
    let wall = config.record_wall_time.then(|| start.elapsed().as_secs_f64());
    let (median_d, q90_d, exceedance_at_m, errors) = match out {
        Ok((m, q, e)) => (m, q, e, String::new()),
        Err(e) => (f64::NAN, f64::NAN, f64::NAN, e.to_string()),
    };
    RateRecord { n: seeds.n, replicate: seeds.replicate, median_d, q90_d, exceedance_at_m, wall_time_s: wall, seed_lineage: seeds.lineage(), errors }
}

/// Runs every `(n, replicate)` cell; rows come back in `(n, replicate)`
/// order. Failures land in the `errors` column.
pub fn run_rate_experiment(config: &ExperimentConfig) -> Result<Vec<RateRecord>> {
    config.validate()?;
    let truth = config.truth.build()?;
    let longest = *config.n_grid.last().expect("validated");
    let data: Vec<Result<Vec<f64>>> = (0..config.replicates)
        .map(|r| replicate_data(&truth, longest, CellSeeds::new(config.seed, longest, r).data))
        .collect();
    let cells: Vec<(u64, usize)> =
        config.n_grid.iter().flat_map(|&n| (0..config.replicates).map(move |r| (n, r))).collect();
    Ok(cells
        .par_iter()
        .map(|&(n, r)| {
            let seeds = CellSeeds::new(config.seed, n, r);
            match &data[r] {
                Ok(d) => record(config, &truth, d, seeds),
                Err(e) => RateRecord {
                    n,
                    replicate: r,
                    median_d: f64::NAN,
                    q90_d: f64::NAN,
                    exceedance_at_m: f64::NAN,
                    wall_time_s: None,
                    seed_lineage: seeds.lineage(),
                    errors: e.to_string(),
                },
            }
        })
        .collect())
}

/// Re-runs one cell from its lineage string.
pub fn rerun_cell(config: &ExperimentConfig, lineage: &str) -> Result<RateRecord> {
    config.validate()?;
    let seeds = CellSeeds::parse(lineage)?;
    let longest = *config.n_grid.last().expect("validated");
    if seeds.n > longest {
        return Err(Error::InvalidParameter("cell lies outside the grid".into()));
    }
    let truth = config.truth.build()?;
    let data = replicate_data(&truth, longest, seeds.data)?;
    Ok(record(config, &truth, &data, seeds))
}

pub fn write_csv<W: Write>(records: &[RateRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RateRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(Error::InvalidParameter(format!("unexpected CSV header {header}")));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    #[serde(rename = "median_D")]
    MedianD,
    #[serde(rename = "q90_D")]
    Q90D,
}

impl std::str::FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "median_D" => Ok(Statistic::MedianD),
            "q90_D" => Ok(Statistic::Q90D),
            _ => Err(Error::InvalidParameter(format!("unknown statistic {s}"))),
        }
    }
}

/// Log-log fit of a statistic against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% percentile bootstrap interval for the slope.
    pub ci: (f64, f64),
    /// Per-n median of the statistic over replicates.
    pub per_n: Vec<(u64, f64)>,
    pub strictly_decreasing: bool,
}

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

fn grouped(records: &[RateRecord], stat: Statistic) -> Vec<(u64, Vec<f64>)> {
    let mut out: Vec<(u64, Vec<f64>)> = Vec::new();
    let mut sorted: Vec<&RateRecord> = records.iter().filter(|r| r.errors.is_empty()).collect();
    sorted.sort_by_key(|r| (r.n, r.replicate));
    for r in sorted {
        let v = match stat {
            Statistic::MedianD => r.median_d,
            Statistic::Q90D => r.q90_d,
        };
        if !v.is_finite() {
            continue;
        }
        match out.last_mut() {
            Some((n, vs)) if *n == r.n => vs.push(v),
            _ => out.push((r.n, vec![v])),
        }
    }
    out
}

fn fit(per_n: &[(u64, f64)]) -> Result<(f64, f64)> {
    if per_n.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::DegenerateGrid("statistic must be positive to take logs".into()));
    }
    let xs: Vec<f64> = per_n.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = per_n.iter().map(|p| p.1.ln()).collect();
    Ok(ols(&xs, &ys))
}

/// Least squares of `ln(median over replicates)` on `ln n`, with a
/// bootstrap over replicates within each `n`.
pub fn fit_rate_slope(records: &[RateRecord], stat: Statistic, seed: u64) -> Result<SlopeFit> {
    let groups = grouped(records, stat);
    if groups.len() < 3 {
        return Err(Error::DegenerateGrid(format!("{} distinct n values, need 3", groups.len())));
    }
    let per_n: Vec<(u64, f64)> = groups.iter().map(|(n, v)| (*n, median(v))).collect();
    let (slope, intercept) = fit(&per_n)?;
    let mut rng = stream(seed);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled: Vec<(u64, f64)> = groups
            .iter()
            .map(|(n, v)| {
                let draw: Vec<f64> = (0..v.len()).map(|_| v[rng.random_range(0..v.len())]).collect();
                (*n, median(&draw))
            })
            .collect();
        if let Ok((s, _)) = fit(&resampled) {
            boot.push(s);
        }
    }
    boot.sort_by(f64::total_cmp);
    let ci = if boot.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (quantile(&boot, 0.025), quantile(&boot, 0.975))
    };
    let strictly_decreasing = per_n.windows(2).all(|w| w[1].1 < w[0].1);
    Ok(SlopeFit { slope, intercept, ci, per_n, strictly_decreasing })
}
