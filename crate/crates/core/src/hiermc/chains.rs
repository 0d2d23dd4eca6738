//! Posterior draws from several chains, with CSV and JSON persistence.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::diagnostics::{summarize, ParamSummary};
use super::nuts::{ChainOutput, IterStats, SamplerConfig};
use super::HierError;
use crate::meta::Metadata;

const STAT_COLUMNS: [&str; 9] = [
    "chain",
    "iteration",
    "warmup",
    "lp__",
    "accept_stat__",
    "stepsize__",
    "treedepth__",
    "n_leapfrog__",
    "divergent__",
];

/// Fraction of divergent transitions above which a warning is raised.
pub const DIVERGENCE_WARNING_RATE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChains {
    pub names: Vec<String>,
    pub chains: Vec<ChainOutput>,
    pub config: SamplerConfig,
}

/// Sidecar written next to the draws CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub config: SamplerConfig,
    pub stepsizes: Vec<f64>,
    pub inv_metrics: Vec<Vec<f64>>,
    pub divergences: usize,
    pub max_rhat: Option<f64>,
    pub min_ess_bulk: Option<f64>,
    pub summaries: Vec<ParamSummary>,
    pub warnings: Vec<String>,
}

impl PosteriorChains {
    pub fn index(&self, name: &str) -> Result<usize, HierError> {
        self.names.iter().position(|n| n == name).ok_or_else(|| HierError::NoSuchParameter(name.to_string()))
    }

    /// Draws of one parameter, one vector per chain.
    pub fn param(&self, name: &str) -> Result<Vec<Vec<f64>>, HierError> {
        let i = self.index(name)?;
        Ok(self.chains.iter().map(|c| c.draws.iter().map(|d| d[i]).collect()).collect())
    }

    /// Draws of one parameter with all chains concatenated.
    pub fn pooled(&self, name: &str) -> Result<Vec<f64>, HierError> {
        Ok(self.param(name)?.into_iter().flatten().collect())
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.draws.len()).sum()
    }

    pub fn divergences(&self) -> usize {
        self.chains.iter().flat_map(|c| &c.stats).filter(|s| s.divergent).count()
    }

    pub fn summaries(&self) -> Vec<ParamSummary> {
        self.names.iter().map(|n| summarize(n, &self.param(n).expect("known name"))).collect()
    }

    pub fn summary(&self, name: &str) -> Result<ParamSummary, HierError> {
        Ok(summarize(name, &self.param(name)?))
    }

    pub fn report(&self) -> SampleReport {
        let summaries = self.summaries();
        let max_rhat = summaries.iter().filter_map(|s| s.rhat).reduce(f64::max);
        let min_ess_bulk = summaries.iter().filter_map(|s| s.ess_bulk).reduce(f64::min);
        let divergences = self.divergences();
        let mut warnings = Vec::new();
        let rate = divergences as f64 / self.n_draws().max(1) as f64;
        if rate > DIVERGENCE_WARNING_RATE {
            warnings.push(format!("{divergences} of {} transitions diverged ({:.2}%)", self.n_draws(), 100.0 * rate));
        }
        if let Some(r) = max_rhat.filter(|&r| r > 1.01) {
            warnings.push(format!("max R-hat {r:.4} exceeds 1.01"));
        }
        SampleReport {
            config: self.config,
            stepsizes: self.chains.iter().map(|c| c.stepsize).collect(),
            inv_metrics: self.chains.iter().map(|c| c.inv_metric.clone()).collect(),
            divergences,
            max_rhat,
            min_ess_bulk,
            summaries,
            warnings,
        }
    }

    pub fn write_csv<W: Write>(&self, w: W, meta: Option<&Metadata>) -> Result<(), HierError> {
        let mut w = std::io::BufWriter::new(w);
        if let Some(m) = meta {
            m.write_comment(&mut w)?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(STAT_COLUMNS.iter().copied().chain(self.names.iter().map(String::as_str)))?;
        for (c, chain) in self.chains.iter().enumerate() {
            for (i, (d, s)) in chain.draws.iter().zip(&chain.stats).enumerate() {
                let mut row = vec![
                    (c + 1).to_string(),
                    (i + 1).to_string(),
                    "0".to_string(),
                    s.lp.to_string(),
                    s.accept_stat.to_string(),
                    s.stepsize.to_string(),
                    s.treedepth.to_string(),
                    s.n_leapfrog.to_string(),
                    u8::from(s.divergent).to_string(),
                ];
                row.extend(d.iter().map(f64::to_string));
                out.write_record(&row)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv). The sampler settings other
    /// than chain and draw counts are not stored in the CSV and come back as
    /// defaults; per-chain step sizes are taken from the last draw.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, HierError> {
        let mut text = String::new();
        for line in BufReader::new(r).lines() {
            let line = line?;
            if !line.trim_start().starts_with('#') {
                text.push_str(&line);
                text.push('\n');
            }
        }
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        let n_stat = STAT_COLUMNS.len();
        if header.len() < n_stat || header.iter().take(n_stat).ne(STAT_COLUMNS) {
            return Err(HierError::InvalidData("draws CSV header".into()));
        }
        let names: Vec<String> = header.iter().skip(n_stat).map(String::from).collect();
        let mut chains: Vec<ChainOutput> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| HierError::InvalidData(format!("draws CSV row {}: {what}", line + 1));
            let num = |i: usize| rec[i].trim().parse::<f64>().map_err(|_| bad(&STAT_COLUMNS[i.min(n_stat - 1)]));
            let chain = rec[0].trim().parse::<usize>().map_err(|_| bad("chain"))?;
            if chain == 0 || chain > chains.len() + 1 {
                return Err(bad("chain index"));
            }
            if chain == chains.len() + 1 {
                chains.push(ChainOutput {
                    draws: Vec::new(),
                    stats: Vec::new(),
                    stepsize: 0.0,
                    inv_metric: Vec::new(),
                });
            }
            let stats = IterStats {
                lp: num(3)?,
                accept_stat: num(4)?,
                stepsize: num(5)?,
                treedepth: rec[6].trim().parse().map_err(|_| bad("treedepth__"))?,
                n_leapfrog: rec[7].trim().parse().map_err(|_| bad("n_leapfrog__"))?,
                divergent: rec[8].trim() == "1",
            };
            let draw = rec
                .iter()
                .skip(n_stat)
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| bad("parameter value"))?;
            let c = &mut chains[chain - 1];
            c.stepsize = stats.stepsize;
            c.draws.push(draw);
            c.stats.push(stats);
        }
        if chains.is_empty() {
            return Err(HierError::InvalidData("draws CSV has no rows".into()));
        }
        let config = SamplerConfig { chains: chains.len(), draws: chains[0].draws.len(), ..SamplerConfig::default() };
        Ok(Self { names, chains, config })
    }
}
