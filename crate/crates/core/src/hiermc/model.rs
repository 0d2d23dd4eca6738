//! Partially pooled and unpooled stiffness models.
//!
//! Partial pooling:
//!
//! ```text
//! omega_ik ~ Normal(f(s_ik), gamma^2)
//! s_ik     ~ Normal(E_sk, V_sk)            truncated to the surrogate domain
//! E_sk     ~ Normal(E_mu, V_mu)
//! V_sk     ~ Normal(E_sigma, V_sigma)      truncated to (0, inf)
//! E_mu, V_mu, E_sigma, V_sigma, gamma ~ Gamma(shape, rate)
//! ```
//!
//! The second argument of every Normal is a variance, so `gamma` is the
//! noise standard deviation. Without pooling, `E_sk` and `V_sk` take the
//! `E_mu` and `E_sigma` gamma priors directly.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::math::{gamma_lpdf, normal_lpdf, truncated_normal_lpdf};
use super::nuts::Target;
use super::HierError;
use crate::popgen::PopulationDataset;
use crate::surrogate::Surrogate;

/// Gamma shape/rate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    /// Prior with the given mean and shape.
    pub fn with_mean(shape: f64, mean: f64) -> Self {
        Self { shape, rate: shape / mean }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriorConfig {
    pub e_mu: GammaPrior,
    pub v_mu: GammaPrior,
    pub e_sigma: GammaPrior,
    pub v_sigma: GammaPrior,
    pub gamma: GammaPrior,
}

impl HyperPriorConfig {
    /// Defaults for the NREL template around a 4e6 N/m^2 population mean.
    pub fn nrel_default() -> Self {
        Self {
            e_mu: GammaPrior::with_mean(16.0, 4e6),
            v_mu: GammaPrior::with_mean(2.0, 5e5f64.powi(2)),
            e_sigma: GammaPrior::with_mean(2.0, 1.5e5f64.powi(2)),
            v_sigma: GammaPrior::with_mean(2.0, 5e9f64.powi(2)),
            gamma: GammaPrior::with_mean(100.0, 1e-4),
        }
    }

    /// Defaults for the wave-tank template around 8e5 N/m^2.
    pub fn wavetank_default() -> Self {
        Self {
            e_mu: GammaPrior::with_mean(16.0, 8e5),
            v_mu: GammaPrior::with_mean(2.0, 2e5f64.powi(2)),
            e_sigma: GammaPrior::with_mean(2.0, 1e5f64.powi(2)),
            v_sigma: GammaPrior::with_mean(2.0, 1e10f64.powi(2)),
            gamma: GammaPrior::with_mean(100.0, 2e-3),
        }
    }

    pub fn validate(&self) -> Result<(), HierError> {
        let all = [self.e_mu, self.v_mu, self.e_sigma, self.v_sigma, self.gamma];
        if all.iter().all(|g| g.shape > 0.0 && g.rate > 0.0 && g.shape.is_finite() && g.rate.is_finite()) {
            Ok(())
        } else {
            Err(HierError::InvalidPriors(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Partial,
    #[serde(rename = "nopool")]
    None,
}

/// Observations for one structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub id: String,
    pub frequencies: Vec<f64>,
}

/// Log posterior over the unconstrained parameter vector.
///
/// Partial-pooling layout: `ln E_mu, ln V_mu, ln E_sigma, ln V_sigma,
/// ln gamma, E_s[K] / scale, ln V_s[K], ln s[N]`.
/// No-pooling layout (one structure): `ln gamma, ln E_s, ln V_s, ln s[N]`.
#[derive(Debug, Clone)]
pub struct HierModel {
    pub groups: Vec<Group>,
    pub surrogate: Surrogate,
    pub priors: HyperPriorConfig,
    pub pooling: Pooling,
    /// Unit of the unconstrained `E_s` coordinates in the pooled model.
    pub stiffness_scale: f64,
    /// Group index of each latent stiffness, in layout order.
    owner: Vec<usize>,
    observations: Vec<f64>,
}

const N_POP: usize = 5;

impl HierModel {
    pub fn partial(
        data: &PopulationDataset,
        surrogate: Surrogate,
        priors: HyperPriorConfig,
    ) -> Result<Self, HierError> {
        let groups = data.structures.iter().map(|s| Group { id: s.id.clone(), frequencies: s.frequencies() }).collect();
        Self::from_groups(groups, surrogate, priors, Pooling::Partial)
    }

    /// Independent model of structure `k` (0-based).
    pub fn no_pooling(
        data: &PopulationDataset,
        k: usize,
        surrogate: Surrogate,
        priors: HyperPriorConfig,
    ) -> Result<Self, HierError> {
        let s = data
            .structures
            .get(k)
            .ok_or(HierError::NoSuchStructure(format!("index {k} of {}", data.structures.len())))?;
        let groups = vec![Group { id: s.id.clone(), frequencies: s.frequencies() }];
        Self::from_groups(groups, surrogate, priors, Pooling::None)
    }

    /// Groups may be empty, in which case the structure only contributes priors.
    pub fn from_groups(
        groups: Vec<Group>,
        surrogate: Surrogate,
        priors: HyperPriorConfig,
        pooling: Pooling,
    ) -> Result<Self, HierError> {
        priors.validate()?;
        if groups.is_empty() {
            return Err(HierError::InvalidData("no structures".into()));
        }
        if pooling == Pooling::None && groups.len() != 1 {
            return Err(HierError::InvalidData("no-pooling model takes exactly one structure".into()));
        }
        let mut owner = Vec::new();
        let mut observations = Vec::new();
        for (k, g) in groups.iter().enumerate() {
            for &w in &g.frequencies {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(HierError::InvalidData(format!("structure {} frequency {w}", g.id)));
                }
                owner.push(k);
                observations.push(w);
            }
        }
        let stiffness_scale = priors.e_mu.mean();
        Ok(Self { groups, surrogate, priors, pooling, stiffness_scale, owner, observations })
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    fn latent_offset(&self) -> usize {
        match self.pooling {
            Pooling::Partial => N_POP + 2 * self.n_groups(),
            Pooling::None => 3,
        }
    }

    fn log_density_partial(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let k_n = self.n_groups();
        let p = &self.priors;
        let [e_mu, v_mu, e_sig, v_sig, gam] = [0, 1, 2, 3, 4].map(|i| x[i].exp());
        let c = self.stiffness_scale;
        let (lo, hi) = (self.surrogate.domain[0], self.surrogate.domain[1]);
        let off_v = N_POP + k_n;
        let off_s = self.latent_offset();

        let mut d_pop = [0.0; N_POP];
        let mut lp = 0.0;
        for (i, (prior, val)) in
            [p.e_mu, p.v_mu, p.e_sigma, p.v_sigma, p.gamma].iter().zip([e_mu, v_mu, e_sig, v_sig, gam]).enumerate()
        {
            let (v, d) = gamma_lpdf(val, prior.shape, prior.rate);
            lp += v;
            d_pop[i] += d;
        }

        let mut d_e = vec![0.0; k_n];
        let mut d_v = vec![0.0; k_n];
        for k in 0..k_n {
            let e_k = c * x[N_POP + k];
            let v_k = x[off_v + k].exp();
            let n = normal_lpdf(e_k, e_mu, v_mu);
            lp += n.value;
            d_e[k] += n.d_x;
            d_pop[0] += n.d_mean;
            d_pop[1] += n.d_var;
            let t = truncated_normal_lpdf(v_k, e_sig, v_sig, 0.0, f64::INFINITY);
            lp += t.value;
            d_v[k] += t.d_x;
            d_pop[2] += t.d_mean;
            d_pop[3] += t.d_var;
        }

        for (i, (&k, &w)) in self.owner.iter().zip(&self.observations).enumerate() {
            let s = x[off_s + i].exp();
            let e_k = c * x[N_POP + k];
            let v_k = x[off_v + k].exp();
            let t = truncated_normal_lpdf(s, e_k, v_k, lo, hi);
            let Some((f, df)) = self.surrogate.value_and_slope(s) else {
                grad.iter_mut().for_each(|g| *g = 0.0);
                return f64::NEG_INFINITY;
            };
            let l = normal_lpdf(w, f, gam * gam);
            lp += t.value + l.value;
            d_e[k] += t.d_mean;
            d_v[k] += t.d_var;
            d_pop[4] += l.d_var * 2.0 * gam;
            // Chain rule through s = exp(x) plus the log-Jacobian.
            grad[off_s + i] = (t.d_x + l.d_mean * df) * s + 1.0;
            lp += x[off_s + i];
        }

        for k in 0..k_n {
            let v_k = x[off_v + k].exp();
            grad[N_POP + k] = d_e[k] * c;
            grad[off_v + k] = d_v[k] * v_k + 1.0;
            lp += x[off_v + k];
        }
        for i in 0..N_POP {
            grad[i] = d_pop[i] * x[i].exp() + 1.0;
            lp += x[i];
        }
        lp + k_n as f64 * c.ln()
    }

    fn log_density_single(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let p = &self.priors;
        let (gam, e, v) = (x[0].exp(), x[1].exp(), x[2].exp());
        let (lo, hi) = (self.surrogate.domain[0], self.surrogate.domain[1]);
        let (mut lp, mut d_g) = gamma_lpdf(gam, p.gamma.shape, p.gamma.rate);
        let (le, mut d_e) = gamma_lpdf(e, p.e_mu.shape, p.e_mu.rate);
        let (lv, mut d_v) = gamma_lpdf(v, p.e_sigma.shape, p.e_sigma.rate);
        lp += le + lv;
        for (i, &w) in self.observations.iter().enumerate() {
            let s = x[3 + i].exp();
            let t = truncated_normal_lpdf(s, e, v, lo, hi);
            let Some((f, df)) = self.surrogate.value_and_slope(s) else {
                grad.iter_mut().for_each(|g| *g = 0.0);
                return f64::NEG_INFINITY;
            };
            let l = normal_lpdf(w, f, gam * gam);
            lp += t.value + l.value + x[3 + i];
            d_e += t.d_mean;
            d_v += t.d_var;
            d_g += l.d_var * 2.0 * gam;
            grad[3 + i] = (t.d_x + l.d_mean * df) * s + 1.0;
        }
        grad[0] = d_g * gam + 1.0;
        grad[1] = d_e * e + 1.0;
        grad[2] = d_v * v + 1.0;
        lp + x[0] + x[1] + x[2]
    }

    /// Unconstrained point for constrained values `(pop, e_s, v_s, s)`.
    /// `pop` is `[E_mu, V_mu, E_sigma, V_sigma, gamma]`; only gamma is used
    /// without pooling.
    pub fn unconstrain(&self, pop: [f64; 5], e_s: &[f64], v_s: &[f64], s: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        match self.pooling {
            Pooling::Partial => {
                x.extend(pop.iter().map(|v| v.ln()));
                x.extend(e_s.iter().map(|e| e / self.stiffness_scale));
                x.extend(v_s.iter().map(|v| v.ln()));
            }
            Pooling::None => {
                x.push(pop[4].ln());
                x.push(e_s[0].ln());
                x.push(v_s[0].ln());
            }
        }
        x.extend(s.iter().map(|v| v.ln()));
        x
    }
}

impl Target for HierModel {
    fn dim(&self) -> usize {
        self.latent_offset() + self.observations.len()
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let lp = match self.pooling {
            Pooling::Partial => self.log_density_partial(x, grad),
            Pooling::None => self.log_density_single(x, grad),
        };
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim());
        if self.pooling == Pooling::Partial {
            names.extend(["E_mu", "V_mu", "E_sigma", "V_sigma", "gamma"].map(String::from));
            names.extend(self.groups.iter().map(|g| format!("E_s.{}", g.id)));
            names.extend(self.groups.iter().map(|g| format!("V_s.{}", g.id)));
        } else {
            let id = &self.groups[0].id;
            names.extend(["gamma".to_string(), format!("E_s.{id}"), format!("V_s.{id}")]);
        }
        for g in &self.groups {
            names.extend((1..=g.frequencies.len()).map(|i| format!("s.{}.{i}", g.id)));
        }
        names
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        let k_n = self.n_groups();
        x.iter()
            .enumerate()
            .map(|(i, &v)| match self.pooling {
                Pooling::Partial if (N_POP..N_POP + k_n).contains(&i) => v * self.stiffness_scale,
                _ => v.exp(),
            })
            .collect()
    }

    /// Hyper-prior means, `E_s` at the population mean, `s` at the surrogate
    /// inverse of each observation; jittered.
    fn initial_point(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let p = &self.priors;
        let pop = [p.e_mu.mean(), p.v_mu.mean(), p.e_sigma.mean(), p.v_sigma.mean(), p.gamma.mean()];
        let k_n = self.n_groups();
        let (lo, hi) = (self.surrogate.domain[0], self.surrogate.domain[1]);
        let margin = 1e-6 * (hi - lo);
        let s: Vec<f64> =
            self.observations.iter().map(|&w| self.surrogate.invert(w).clamp(lo + margin, hi - margin)).collect();
        let mut x = self.unconstrain(pop, &vec![pop[0]; k_n], &vec![pop[2]; k_n], &s);
        let off_s = self.latent_offset();
        let e_range = match self.pooling {
            Pooling::Partial => N_POP..N_POP + k_n,
            Pooling::None => 0..0,
        };
        for (i, v) in x.iter_mut().enumerate() {
            if e_range.contains(&i) {
                *v *= 1.0 + rng.random_range(-0.02..0.02);
            } else if i < off_s {
                *v += rng.random_range(-0.1..0.1);
            } else {
                *v = (*v + rng.random_range(-1e-3..1e-3)).exp().clamp(lo + margin, hi - margin).ln();
            }
        }
        x
    }
}
