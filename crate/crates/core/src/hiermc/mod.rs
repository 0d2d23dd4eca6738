//! Hierarchical Bayesian model of a structural population, sampled with NUTS.

pub mod chains;
pub mod diagnostics;
pub mod math;
pub mod model;
pub mod nuts;

use thiserror::Error;

pub use chains::{PosteriorChains, SampleReport};
pub use diagnostics::{ess_bulk, split_rhat, ParamSummary};
pub use model::{GammaPrior, Group, HierModel, HyperPriorConfig, Pooling};
pub use nuts::{run_chains, SamplerConfig, Target};

use crate::popgen::PopulationDataset;
use crate::surrogate::Surrogate;

#[derive(Debug, Error)]
pub enum HierError {
    #[error("invalid hyper-priors: {0}")]
    InvalidPriors(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("no such structure: {0}")]
    NoSuchStructure(String),
    #[error("no such parameter: {0}")]
    NoSuchParameter(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {0}: no initial point with finite log density")]
    InitFailed(usize),
    #[error("step size search diverged (reached {0})")]
    StepSize(f64),
    #[error("need at least 4 draws per chain, got {0}")]
    TooFewDraws(usize),
    #[error("draws are not finite")]
    NonFiniteDraws,
    #[error("all draws are identical; R-hat is undefined")]
    ConstantChain,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Run NUTS on any target.
pub fn sample<T: Target>(target: &T, cfg: &SamplerConfig) -> Result<PosteriorChains, HierError> {
    let chains = run_chains(target, cfg)?;
    Ok(PosteriorChains { names: target.param_names(), chains, config: *cfg })
}

/// Partially pooled fit over every structure in `data`.
pub fn fit_partial(
    data: &PopulationDataset,
    surrogate: &Surrogate,
    priors: HyperPriorConfig,
    cfg: &SamplerConfig,
) -> Result<PosteriorChains, HierError> {
    sample(&HierModel::partial(data, surrogate.clone(), priors)?, cfg)
}

/// Independent fit of structure `k` (zero based) alone.
pub fn fit_no_pooling(
    data: &PopulationDataset,
    k: usize,
    surrogate: &Surrogate,
    priors: HyperPriorConfig,
    cfg: &SamplerConfig,
) -> Result<PosteriorChains, HierError> {
    sample(&HierModel::no_pooling(data, k, surrogate.clone(), priors)?, cfg)
}
