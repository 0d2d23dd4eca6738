//! Convergence diagnostics: rank-normalised split R-hat and bulk ESS.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::HierError;

fn check(chains: &[Vec<f64>]) -> Result<(), HierError> {
    let n = chains.first().map_or(0, Vec::len);
    if chains.is_empty() || n < 4 || chains.iter().any(|c| c.len() != n) {
        return Err(HierError::TooFewDraws(n));
    }
    if chains.iter().flatten().any(|v| !v.is_finite()) {
        return Err(HierError::NonFiniteDraws);
    }
    let first = chains[0][0];
    if chains.iter().flatten().all(|&v| v == first) {
        return Err(HierError::ConstantChain);
    }
    Ok(())
}

/// Split each chain into halves, dropping the middle draw of odd chains.
pub fn split_chains(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    out
}

/// Replace draws by normal scores of their pooled average ranks.
pub fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let flat: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = flat.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| flat[a].total_cmp(&flat[b]));
    let mut rank = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && flat[order[j + 1]] == flat[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            rank[o] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut it = rank.into_iter().map(|r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25)));
    chains.iter().map(|c| c.iter().map(|_| it.next().expect("rank")).collect()).collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn rhat_basic(chains: &[Vec<f64>]) -> f64 {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let b = n * var(&means);
    let w = mean(&chains.iter().map(|c| var(c)).collect::<Vec<_>>());
    let var_hat = (n - 1.0) / n * w + b / n;
    (var_hat / w).sqrt()
}

fn median(x: &mut [f64]) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len();
    if n % 2 == 1 {
        x[n / 2]
    } else {
        0.5 * (x[n / 2 - 1] + x[n / 2])
    }
}

/// max(bulk, folded) rank-normalised split R-hat.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<f64, HierError> {
    check(chains)?;
    let split = split_chains(chains);
    let bulk = rhat_basic(&rank_normalize(&split));
    let mut flat: Vec<f64> = split.iter().flatten().copied().collect();
    let med = median(&mut flat);
    let folded: Vec<Vec<f64>> = split.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = rhat_basic(&rank_normalize(&folded));
    Ok(bulk.max(tail))
}

/// Biased autocovariance for lags 0..n.
fn autocovariance(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let m = mean(x);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(v - m, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    buf[..n].iter().map(|c| c.re / (size as f64 * n as f64)).collect()
}

/// Effective sample size with Geyer's initial monotone sequence.
fn ess_raw(chains: &[Vec<f64>]) -> f64 {
    let m = chains.len();
    let n = chains[0].len();
    let acov: Vec<Vec<f64>> = chains.iter().map(|c| autocovariance(c)).collect();
    let acov_mean = |t: usize| acov.iter().map(|a| a[t]).sum::<f64>() / m as f64;
    let nf = n as f64;
    let chain_var: Vec<f64> = acov.iter().map(|a| a[0] * nf / (nf - 1.0)).collect();
    let mean_var = mean(&chain_var);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += var(&chains.iter().map(|c| mean(c)).collect::<Vec<_>>());
    }

    let mut rho = vec![0.0; n];
    let mut t = 0;
    let mut even = 1.0;
    let mut odd = 1.0 - (mean_var - acov_mean(1)) / var_plus;
    rho[0] = even;
    rho[1] = odd;
    while t + 5 < n && even + odd > 0.0 {
        t += 2;
        even = 1.0 - (mean_var - acov_mean(t)) / var_plus;
        odd = 1.0 - (mean_var - acov_mean(t + 1)) / var_plus;
        if even + odd >= 0.0 {
            rho[t] = even;
            rho[t + 1] = odd;
        }
    }
    let max_t = t;
    if even > 0.0 {
        rho[max_t] = even;
    }
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        if rho[t] + rho[t + 1] > rho[t - 2] + rho[t - 1] {
            rho[t] = 0.5 * (rho[t - 2] + rho[t - 1]);
            rho[t + 1] = rho[t];
        }
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho[..max_t].iter().sum::<f64>() + rho[max_t]).max(1.0 / total.log10());
    total / tau
}

/// Bulk effective sample size on rank-normalised split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<f64, HierError> {
    check(chains)?;
    Ok(ess_raw(&rank_normalize(&split_chains(chains))))
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q2_5: f64,
    pub median: f64,
    pub q97_5: f64,
    /// `None` for constant parameters.
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
}

pub fn summarize(name: &str, chains: &[Vec<f64>]) -> ParamSummary {
    let mut flat: Vec<f64> = chains.iter().flatten().copied().collect();
    flat.sort_by(f64::total_cmp);
    let sd = if flat.len() > 1 { var(&flat).sqrt() } else { 0.0 };
    ParamSummary {
        name: name.to_string(),
        mean: mean(&flat),
        sd,
        q2_5: quantile(&flat, 0.025),
        median: quantile(&flat, 0.5),
        q97_5: quantile(&flat, 0.975),
        rhat: split_rhat(chains).ok(),
        ess_bulk: ess_bulk(chains).ok(),
    }
}
