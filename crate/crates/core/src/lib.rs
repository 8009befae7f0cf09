//! Bayesian estimation of finite-state hidden Markov models with
//! nonparametric emissions.

pub mod checks;
pub mod distance;
pub mod emission;
pub mod error;
pub mod hmm;
pub mod numeric;
pub mod priors;
pub mod rng;
pub mod harness;
pub mod sampler;

pub use emission::{DiscretePmf, EmissionDensity, GaussianMixtureDensity, ObsSpace};
pub use error::{Error, Result};
pub use hmm::{FilterTrace, HmmParams, InitialDistribution, TransitionMatrix};
