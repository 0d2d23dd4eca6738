//! Posterior-predictive frequency distributions and left-tail scoring of new
//! observations.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::hiermc::{split_rhat, HierError, Pooling, PosteriorChains};
use crate::meta::Metadata;
use crate::popgen::Candidate;
use crate::surrogate::{Surrogate, SurrogateError};

pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Chains with a larger R-hat on any predictive input produce a warning.
pub const RHAT_WARNING: f64 = 1.05;

#[derive(Debug, Error)]
pub enum AnomalyError {
    #[error("structure '{0}' is not in the posterior")]
    NoSuchStructure(String),
    #[error("empty predictive distribution")]
    Empty,
    #[error("expected {expected:?} chains, got {got:?}")]
    RegimeMismatch { expected: Pooling, got: Pooling },
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Hier(#[from] HierError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Pooling regime a set of chains was fitted under.
pub fn regime_of(chains: &PosteriorChains) -> Pooling {
    if chains.names.iter().any(|n| n == "E_mu") {
        Pooling::Partial
    } else {
        Pooling::None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDistribution {
    pub structure_id: String,
    pub regime: Pooling,
    pub samples: Vec<f64>,
    pub warnings: Vec<String>,
}

impl PredictiveDistribution {
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (self.samples.len() as f64 - 1.0)
    }
}

/// Draw from Normal(mean, sd^2) truncated to [lo, hi] by inverting the CDF on
/// whichever tail keeps precision.
fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    if !(sd > 0.0) {
        return mean.clamp(lo, hi);
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    let z = if a >= 0.0 {
        let (pa, pb) = (n.sf(a), n.sf(b));
        if pa <= pb {
            a
        } else {
            -n.inverse_cdf(rng.random_range(pb..pa))
        }
    } else {
        let (pa, pb) = (n.cdf(a), n.cdf(b));
        if pb <= pa {
            b
        } else {
            n.inverse_cdf(rng.random_range(pa..pb))
        }
    };
    (mean + sd * z).clamp(lo, hi)
}

/// One predictive frequency per posterior draw: a stiffness from the
/// structure's truncated stiffness distribution, pushed through the surrogate,
/// plus measurement noise.
pub fn posterior_predictive(
    chains: &PosteriorChains,
    surrogate: &Surrogate,
    structure_id: &str,
    seed: u64,
) -> Result<PredictiveDistribution, AnomalyError> {
    let names = [format!("E_s.{structure_id}"), format!("V_s.{structure_id}"), "gamma".to_string()];
    let [e_s, v_s, gam] = names.each_ref().map(|n| chains.param(n));
    let (e_s, v_s, gam) = match (e_s, v_s, gam) {
        (Ok(e), Ok(v), Ok(g)) => (e, v, g),
        _ => return Err(AnomalyError::NoSuchStructure(structure_id.to_string())),
    };

    let mut warnings = Vec::new();
    for (name, draws) in names.iter().zip([&e_s, &v_s, &gam]) {
        if let Ok(r) = split_rhat(draws) {
            if r > RHAT_WARNING {
                warnings.push(format!("{name}: R-hat {r:.3} > {RHAT_WARNING}"));
            }
        }
    }

    let [lo, hi] = surrogate.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(chains.n_draws());
    for ((e, v), g) in e_s.iter().flatten().zip(v_s.iter().flatten()).zip(gam.iter().flatten()) {
        let s = truncated_normal(&mut rng, *e, v.sqrt(), lo, hi);
        let noise: f64 = StandardNormal.sample(&mut rng);
        samples.push(surrogate.eval(s)? + g * noise);
    }
    if samples.is_empty() {
        return Err(AnomalyError::Empty);
    }
    Ok(PredictiveDistribution { structure_id: structure_id.to_string(), regime: regime_of(chains), samples, warnings })
}

/// Monte Carlo estimate of P(omega <= omega_obs).
pub fn tail_probability(pred: &PredictiveDistribution, omega_obs: f64) -> Result<f64, AnomalyError> {
    if pred.samples.is_empty() {
        return Err(AnomalyError::Empty);
    }
    let below = pred.samples.iter().filter(|&&w| w <= omega_obs).count();
    Ok(below as f64 / pred.samples.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    /// 1-based row number.
    pub obs: usize,
    pub structure_id: String,
    pub frequency_hz: f64,
    pub scour_depth_mm: Option<f64>,
    pub p_no_pooling: f64,
    pub p_partial: f64,
    /// `p_partial / p_no_pooling`; `None` when the denominator is zero.
    pub ratio: Option<f64>,
    pub flag_no_pooling: bool,
    pub flag_partial: bool,
}

/// Score each observation under both regimes. An observation is flagged when
/// its tail probability is strictly below `threshold`.
pub fn compare_pooling(
    partial: &PosteriorChains,
    no_pooling: &PosteriorChains,
    surrogate: &Surrogate,
    observations: &[Candidate],
    threshold: f64,
    seed: u64,
) -> Result<Vec<AnomalyScore>, AnomalyError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(AnomalyError::InvalidThreshold(threshold));
    }
    let got = regime_of(partial);
    if got != Pooling::Partial {
        return Err(AnomalyError::RegimeMismatch { expected: Pooling::Partial, got });
    }
    let mut cache: BTreeMap<String, (PredictiveDistribution, PredictiveDistribution)> = BTreeMap::new();
    let mut out = Vec::with_capacity(observations.len());
    for (i, c) in observations.iter().enumerate() {
        if !cache.contains_key(&c.structure_id) {
            let pp = posterior_predictive(partial, surrogate, &c.structure_id, seed)?;
            let np = posterior_predictive(no_pooling, surrogate, &c.structure_id, seed)?;
            cache.insert(c.structure_id.clone(), (pp, np));
        }
        let (pp, np) = &cache[&c.structure_id];
        let w = c.observation.frequency_hz;
        let p_partial = tail_probability(pp, w)?;
        let p_no_pooling = tail_probability(np, w)?;
        out.push(AnomalyScore {
            obs: i + 1,
            structure_id: c.structure_id.clone(),
            frequency_hz: w,
            scour_depth_mm: c.observation.scour_mm,
            p_no_pooling,
            p_partial,
            ratio: (p_no_pooling > 0.0).then(|| p_partial / p_no_pooling),
            flag_no_pooling: p_no_pooling < threshold,
            flag_partial: p_partial < threshold,
        });
    }
    Ok(out)
}

/// Comparison table; the first five columns follow the published layout.
pub fn write_scores_csv<W: Write>(
    mut w: W,
    scores: &[AnomalyScore],
    meta: Option<&Metadata>,
) -> Result<(), AnomalyError> {
    if let Some(m) = meta {
        m.write_comment(&mut w)?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "obs",
        "scour_depth_mm",
        "nat_freq_hz",
        "prob_no_pooling",
        "prob_partial_pooled",
        "structure_id",
        "ratio",
        "flag_no_pooling",
        "flag_partial_pooled",
    ])?;
    for s in scores {
        out.write_record([
            s.obs.to_string(),
            s.scour_depth_mm.map(|v| v.to_string()).unwrap_or_default(),
            s.frequency_hz.to_string(),
            s.p_no_pooling.to_string(),
            s.p_partial.to_string(),
            s.structure_id.clone(),
            s.ratio.map(|v| v.to_string()).unwrap_or_default(),
            s.flag_no_pooling.to_string(),
            s.flag_partial.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hiermc::nuts::{ChainOutput, IterStats, SamplerConfig};
    use crate::popgen::Observation;

    fn surrogate() -> Surrogate {
        let samples: Vec<(f64, f64)> =
            (0..30).map(|i| 1e6 + 1e6 * i as f64 / 29.0).map(|s| (s, 0.1 + 0.05 * (s - 1e6) / 1e6)).collect();
        Surrogate::fit(&samples, 5).unwrap()
    }

    /// Chains holding fixed values of `gamma, E_s.1, V_s.1`.
    fn fixed(values: [f64; 3], partial: bool) -> PosteriorChains {
        let stats =
            IterStats { lp: 0.0, accept_stat: 1.0, stepsize: 1.0, treedepth: 1, n_leapfrog: 1, divergent: false };
        let mut names: Vec<String> = vec!["gamma".into(), "E_s.1".into(), "V_s.1".into()];
        let mut draw = values.to_vec();
        if partial {
            names.insert(0, "E_mu".into());
            draw.insert(0, values[1]);
        }
        let chain = ChainOutput { draws: vec![draw; 500], stats: vec![stats; 500], stepsize: 1.0, inv_metric: vec![] };
        PosteriorChains { names, chains: vec![chain; 4], config: SamplerConfig::default() }
    }

    fn candidate(w: f64) -> Candidate {
        Candidate {
            structure_id: "1".into(),
            observation: Observation { frequency_hz: w, top_mass_kg: None, scour_mm: Some(15.0) },
        }
    }

    #[test]
    fn degenerate_posterior_collapses_to_surrogate_value() {
        let pred = posterior_predictive(&fixed([0.0, 1.5e6, 0.0], false), &surrogate(), "1", 1).unwrap();
        assert_eq!(pred.samples.len(), 2000);
        let f = surrogate().eval(1.5e6).unwrap();
        assert!(pred.samples.iter().all(|&w| (w - f).abs() < 1e-12));
        assert_eq!(pred.regime, Pooling::None);
    }

    #[test]
    fn truncation_keeps_draws_in_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, sd) in [(0.0, 1.0), (100.0, 1.0), (-100.0, 1.0), (0.5, 0.01), (5.0, 3.0)] {
            for _ in 0..200 {
                let x = truncated_normal(&mut rng, m, sd, 0.0, 1.0);
                assert!((0.0..=1.0).contains(&x), "{m} {sd} {x}");
            }
        }
        // Far below the interval the draw hugs the lower bound.
        assert!(truncated_normal(&mut rng, -100.0, 1.0, 0.0, 1.0) < 0.05);
    }

    #[test]
    fn tail_probability_extremes_and_median() {
        let pred = posterior_predictive(&fixed([1e-3, 1.5e6, 1e10], false), &surrogate(), "1", 3).unwrap();
        let lo = pred.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = pred.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(tail_probability(&pred, lo - 1.0).unwrap(), 0.0);
        assert_eq!(tail_probability(&pred, hi).unwrap(), 1.0);
        let mut sorted = pred.samples.clone();
        sorted.sort_by(f64::total_cmp);
        let med = sorted[sorted.len() / 2];
        let p = tail_probability(&pred, med).unwrap();
        assert!((p - 0.5).abs() <= 2.0 / (sorted.len() as f64).sqrt());
        let empty = PredictiveDistribution { samples: vec![], ..pred };
        assert!(tail_probability(&empty, 0.1).is_err());
    }

    #[test]
    fn identical_chains_give_identical_scores() {
        let p = fixed([1e-3, 1.5e6, 1e10], true);
        let obs = [candidate(0.12), candidate(0.125)];
        let scores = compare_pooling(&p, &p, &surrogate(), &obs, 0.05, 9).unwrap();
        for s in &scores {
            assert_eq!(s.p_partial, s.p_no_pooling);
        }
        let none = compare_pooling(&p, &p, &surrogate(), &obs, 0.0, 9).unwrap();
        assert!(none.iter().all(|s| !s.flag_partial && !s.flag_no_pooling));
        let mut buf = Vec::new();
        write_scores_csv(&mut buf, &scores, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("obs,scour_depth_mm,nat_freq_hz,prob_no_pooling,prob_partial_pooled"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn regime_and_structure_errors() {
        let np = fixed([1e-3, 1.5e6, 1e10], false);
        assert!(matches!(
            compare_pooling(&np, &np, &surrogate(), &[candidate(0.1)], 0.05, 1),
            Err(AnomalyError::RegimeMismatch { .. })
        ));
        assert!(matches!(posterior_predictive(&np, &surrogate(), "7", 1), Err(AnomalyError::NoSuchStructure(_))));
    }
}
