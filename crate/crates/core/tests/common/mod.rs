#![allow(dead_code)]

use std::sync::OnceLock;

use shm_core::fem;
use shm_core::hiermc::{fit_no_pooling, fit_partial, HyperPriorConfig, PosteriorChains, SamplerConfig};
use shm_core::popgen::{generate, Generated, GroundTruth};
use shm_core::surrogate::{FeModel, Surrogate, NREL_DOMAIN};

pub fn nrel_surrogate() -> &'static Surrogate {
    static S: OnceLock<Surrogate> = OnceLock::new();
    S.get_or_init(|| FeModel::new(fem::nrel5mw(), NREL_DOMAIN).fit_surrogate(30, 5).unwrap())
}

pub struct Synthetic {
    pub data: Generated,
    pub partial: PosteriorChains,
    pub nopool: PosteriorChains,
}

/// K = 5 structures with 20, 20, 20, 20 and 2 observations.
pub fn synthetic() -> &'static Synthetic {
    static S: OnceLock<Synthetic> = OnceLock::new();
    S.get_or_init(|| {
        let sur = nrel_surrogate();
        let data = generate(&GroundTruth::nrel_default(), &[20, 20, 20, 20, 2], sur, 7).unwrap();
        let cfg = SamplerConfig { seed: 1, ..Default::default() };
        let partial = fit_partial(&data.dataset, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap();
        let nopool = fit_no_pooling(&data.dataset, 4, sur, HyperPriorConfig::nrel_default(), &cfg).unwrap();
        Synthetic { data, partial, nopool }
    })
}
