use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nphmm::checks::{run_suite, Suite};
use nphmm::distance::{
    conditional_drift, d_ell, d_ell_lipschitz_bound, kl_neighborhood_check, kl_path, llr_variance, DEllMethod,
    PathMethod, Subset,
};
use nphmm::harness::{fit_rate_slope, read_csv, rerun_cell, run_rate_experiment, write_csv, ExperimentConfig, Statistic, TruthSpec};
use nphmm::priors::{prior_mass_kl_neighborhood, EmissionPrior, ProbeRegion};
use nphmm::sampler::{run_chain, GibbsConfig, PosteriorSample};
use nphmm::{EmissionDensity, HmmParams};

#[derive(Parser)]
#[command(name = "nphmm", version, about = "Nonparametric Bayesian hidden Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a distance or information quantity described by a JSON request.
    Distance {
        #[arg(long)]
        request: PathBuf,
    },
    /// Run a fuzz suite and print its bound report.
    Check {
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the Gibbs sampler on a data file.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a concentration experiment over a grid of sample sizes.
    Rate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Re-run a single cell from its seed lineage instead of the grid.
        #[arg(long)]
        cell: Option<String>,
    },
    /// Fit the log-log slope of a statistic in a rate CSV.
    Slope {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "median_D")]
        stat: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Estimate prior mass of Kullback-Leibler neighborhoods.
    PriorMass {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SuiteArg {
    Forgetting,
    Ratio,
    Kl,
    Variance,
    Mixing,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Forgetting => Suite::Forgetting,
            SuiteArg::Ratio => Suite::Ratio,
            SuiteArg::Kl => Suite::Kl,
            SuiteArg::Variance => Suite::Variance,
            SuiteArg::Mixing => Suite::Mixing,
        }
    }
}

fn default_method() -> DEllMethod {
    DEllMethod::Auto
}

fn default_path_method() -> PathMethod {
    PathMethod::Exact
}

#[derive(Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case", deny_unknown_fields)]
enum DistanceRequest {
    DEll {
        theta: HmmParams,
        theta2: HmmParams,
        ell: usize,
        #[serde(default = "default_method")]
        method: DEllMethod,
    },
    Lipschitz {
        theta: HmmParams,
        theta2: HmmParams,
        ell: usize,
    },
    Kl {
        theta_star: HmmParams,
        theta: HmmParams,
        n: usize,
        #[serde(default = "default_path_method")]
        method: PathMethod,
    },
    Variance {
        theta_star: HmmParams,
        theta: HmmParams,
        n: usize,
        #[serde(default = "default_path_method")]
        method: PathMethod,
    },
    Drift {
        theta_star: HmmParams,
        theta: HmmParams,
        n: usize,
    },
    Neighborhood {
        fstar: Vec<EmissionDensity>,
        f: Vec<EmissionDensity>,
        ftilde: Option<Vec<EmissionDensity>>,
        subset: Subset,
        eps_tilde: f64,
        u_n: f64,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProbeConfig {
    prior: EmissionPrior,
    truth: TruthSpec,
    eps_tilde: Vec<f64>,
    u_n: f64,
    region: ProbeRegion,
    n_mc: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum DataFile {
    Plain(Vec<f64>),
    Wrapped { obs: Vec<f64> },
}

#[derive(Serialize)]
struct SampleFile<'a> {
    config_hash: String,
    seed_lineage: String,
    config: &'a GibbsConfig,
    data_file: String,
    n_obs: usize,
    sample: PosteriorSample,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Hex SHA-256 of the config's canonical JSON.
fn config_hash(config: &GibbsConfig) -> Result<String> {
    let canonical = serde_json::to_vec(&serde_json::to_value(config)?)?;
    Ok(format!("{:x}", Sha256::digest(canonical)))
}

/// Returns whether every hard invariant held.
fn distance(request: DistanceRequest) -> Result<bool> {
    match request {
        DistanceRequest::DEll { theta, theta2, ell, method } => print_json(&d_ell(&theta, &theta2, ell, method)?)?,
        DistanceRequest::Lipschitz { theta, theta2, ell } => {
            let r = d_ell_lipschitz_bound(&theta, &theta2, ell)?;
            print_json(&r)?;
            return Ok(r.holds);
        }
        DistanceRequest::Kl { theta_star, theta, n, method } => print_json(&kl_path(&theta_star, &theta, n, method)?)?,
        DistanceRequest::Variance { theta_star, theta, n, method } => {
            print_json(&llr_variance(&theta_star, &theta, n, method)?)?
        }
        DistanceRequest::Drift { theta_star, theta, n } => print_json(&conditional_drift(&theta_star, &theta, n)?)?,
        DistanceRequest::Neighborhood { fstar, f, ftilde, subset, eps_tilde, u_n } => {
            let ftilde = ftilde.unwrap_or_else(|| f.clone());
            print_json(&kl_neighborhood_check(&fstar, &f, &ftilde, &subset, eps_tilde, u_n)?)?
        }
    }
    Ok(true)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Distance { request } => distance(read_json(&request)?),
        Command::Check { suite, trials, seed } => {
            let report = run_suite(suite.into(), trials, seed)?;
            print_json(&report)?;
            Ok(report.holds)
        }
        Command::Sample { config, data, out } => {
            let cfg: GibbsConfig = read_json(&config)?;
            let obs = match read_json::<DataFile>(&data)? {
                DataFile::Plain(v) | DataFile::Wrapped { obs: v } => v,
            };
            let sample = run_chain(&cfg, &obs)?;
            let file = SampleFile {
                config_hash: config_hash(&cfg)?,
                seed_lineage: format!("chain={}", cfg.seed),
                config: &cfg,
                data_file: data.display().to_string(),
                n_obs: obs.len(),
                sample,
            };
            let w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            serde_json::to_writer(w, &file)?;
            Ok(true)
        }
        Command::Rate { config, out, cell } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let records = match cell {
                Some(lineage) => vec![rerun_cell(&cfg, &lineage)?],
                None => run_rate_experiment(&cfg)?,
            };
            let w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            write_csv(&records, w)?;
            for r in records.iter().filter(|r| !r.errors.is_empty()) {
                eprintln!("cell n={} replicate={}: {}", r.n, r.replicate, r.errors);
            }
            Ok(true)
        }
        Command::Slope { input, stat, seed } => {
            let stat: Statistic = stat.parse()?;
            let records = read_csv(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            print_json(&fit_rate_slope(&records, stat, seed)?)?;
            Ok(true)
        }
        Command::PriorMass { config } => {
            let p: ProbeConfig = read_json(&config)?;
            let truth = p.truth.build()?;
            let est = prior_mass_kl_neighborhood(&p.prior, truth.emissions(), &p.eps_tilde, p.u_n, &p.region, p.n_mc, p.seed)?;
            print_json(&est)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hard invariant failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
