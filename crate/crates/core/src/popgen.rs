//! Population datasets: synthetic generation from a hierarchical ground
//! truth, and CSV ingestion/writing.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::meta::Metadata;
use crate::surrogate::FrequencyModel;

/// Largest tolerated probability that any rejection step throws a draw away.
pub const MAX_REJECTION_RATE: f64 = 0.01;
const MAX_ATTEMPTS: usize = 100_000;

pub const CSV_HEADER: [&str; 4] = ["structure_id", "frequency_hz", "top_mass_kg", "scour_mm"];

#[derive(Debug, Error)]
pub enum PopgenError {
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
    #[error("need {0} observation counts, got {1}")]
    CountMismatch(usize, usize),
    #[error("{stage} rejection probability {rate:.4} exceeds {max} for structure {structure}")]
    RejectionRate { stage: &'static str, structure: usize, rate: f64, max: f64 },
    #[error("frequency model failed: {0}")]
    Model(String),
    #[error("generated frequency {0} is not positive and finite")]
    BadFrequency(f64),
    #[error("line {line}: {msg}")]
    Malformed { line: u64, msg: String },
    #[error("file contains no observations")]
    Empty,
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frequency_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scour_mm: Option<f64>,
}

impl Observation {
    pub fn new(frequency_hz: f64) -> Self {
        Self { frequency_hz, top_mass_kg: None, scour_mm: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureData {
    pub id: String,
    pub observations: Vec<Observation>,
}

impl StructureData {
    pub fn frequencies(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.frequency_hz).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PopulationDataset {
    pub structures: Vec<StructureData>,
}

impl PopulationDataset {
    pub fn from_frequencies(groups: &[Vec<f64>]) -> Self {
        Self {
            structures: groups
                .iter()
                .enumerate()
                .map(|(k, g)| StructureData {
                    id: (k + 1).to_string(),
                    observations: g.iter().map(|&f| Observation::new(f)).collect(),
                })
                .collect(),
        }
    }

    pub fn n_structures(&self) -> usize {
        self.structures.len()
    }

    pub fn n_observations(&self) -> usize {
        self.structures.iter().map(|s| s.observations.len()).sum()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.structures.iter().position(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), PopgenError> {
        if self.structures.is_empty() {
            return Err(PopgenError::Invalid("no structures".into()));
        }
        for s in &self.structures {
            if s.observations.is_empty() {
                return Err(PopgenError::Invalid(format!("structure {} has no observations", s.id)));
            }
            if let Some(o) = s.observations.iter().find(|o| !(o.frequency_hz > 0.0 && o.frequency_hz.is_finite())) {
                return Err(PopgenError::Invalid(format!("structure {} has frequency {}", s.id, o.frequency_hz)));
            }
        }
        Ok(())
    }

    /// Observation table with an optional provenance header.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: Option<&Metadata>) -> Result<(), PopgenError> {
        if let Some(m) = meta {
            m.write_comment(&mut w)?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        for s in &self.structures {
            for o in &s.observations {
                out.write_record([
                    s.id.clone(),
                    o.frequency_hz.to_string(),
                    o.top_mass_kg.map(|v| v.to_string()).unwrap_or_default(),
                    o.scour_mm.map(|v| v.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// A scoured observation held out of the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub structure_id: String,
    pub observation: Observation,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ingested {
    /// Scour-free observations grouped by structure in order of first appearance.
    pub dataset: PopulationDataset,
    /// Rows with `scour_mm > 0`, in file order.
    pub candidates: Vec<Candidate>,
}

pub fn ingest_csv(path: &Path) -> Result<Ingested, PopgenError> {
    ingest_reader(std::fs::File::open(path)?)
}

/// Every row of an observation CSV, in file order. Lines starting with `#`
/// are ignored.
pub fn read_observations<R: Read>(r: R) -> Result<Vec<Candidate>, PopgenError> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(f_col)) = (col("structure_id"), col("frequency_hz")) else {
        return Err(PopgenError::Malformed {
            line: 1,
            msg: "header must contain structure_id and frequency_hz".into(),
        });
    };
    let mass_col = col("top_mass_kg");
    let scour_col = col("scour_mm");

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| rec.get(c).unwrap_or("");
        let number = |c: usize, name: &str| -> Result<Option<f64>, PopgenError> {
            let v = field(c);
            if v.is_empty() {
                return Ok(None);
            }
            v.parse::<f64>()
                .map(Some)
                .map_err(|_| PopgenError::Malformed { line, msg: format!("{name} '{v}' is not a number") })
        };
        let id = field(id_col).to_string();
        if id.is_empty() {
            return Err(PopgenError::Malformed { line, msg: "empty structure_id".into() });
        }
        let frequency_hz = number(f_col, "frequency_hz")?
            .ok_or_else(|| PopgenError::Malformed { line, msg: "missing frequency_hz".into() })?;
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(PopgenError::Malformed { line, msg: format!("frequency {frequency_hz} must be positive") });
        }
        let obs = Observation {
            frequency_hz,
            top_mass_kg: mass_col.map(|c| number(c, "top_mass_kg")).transpose()?.flatten(),
            scour_mm: scour_col.map(|c| number(c, "scour_mm")).transpose()?.flatten(),
        };
        out.push(Candidate { structure_id: id, observation: obs });
    }
    if out.is_empty() {
        return Err(PopgenError::Empty);
    }
    Ok(out)
}

/// Parse the observation CSV, setting rows with `scour_mm > 0` aside as
/// candidates.
pub fn ingest_reader<R: Read>(r: R) -> Result<Ingested, PopgenError> {
    let mut out = Ingested::default();
    for row in read_observations(r)? {
        let Candidate { structure_id: id, observation: obs } = row;
        if obs.scour_mm.is_some_and(|s| s > 0.0) {
            out.candidates.push(Candidate { structure_id: id, observation: obs });
            continue;
        }
        match out.dataset.index_of(&id) {
            Some(k) => out.dataset.structures[k].observations.push(obs),
            None => out.dataset.structures.push(StructureData { id, observations: vec![obs] }),
        }
    }
    Ok(out)
}

/// Population-level truth. The second argument of every Normal is a variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub e_mu: f64,
    pub v_mu: f64,
    pub e_sigma: f64,
    pub v_sigma: f64,
    /// Standard deviation of the additive frequency noise, Hz.
    pub noise_sd: f64,
}

impl GroundTruth {
    /// Default truth for the NREL template's stiffness domain.
    pub fn nrel_default() -> Self {
        Self { e_mu: 4e6, v_mu: 5e5f64.powi(2), e_sigma: 1.5e5f64.powi(2), v_sigma: 5e9f64.powi(2), noise_sd: 1e-4 }
    }

    pub fn validate(&self) -> Result<(), PopgenError> {
        let ok = [self.e_mu, self.v_mu, self.e_sigma, self.v_sigma, self.noise_sd].iter().all(|v| v.is_finite())
            && self.e_mu > 0.0
            && self.e_sigma > 0.0
            && self.v_mu >= 0.0
            && self.v_sigma >= 0.0
            && self.noise_sd >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(PopgenError::InvalidTruth(format!("{self:?}")))
        }
    }
}

/// Per-structure values actually drawn during generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureTruth {
    pub e_s: f64,
    pub v_s: f64,
    pub stiffness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: PopulationDataset,
    pub truth: Vec<StructureTruth>,
}

fn normal_draw(rng: &mut ChaCha8Rng, mean: f64, variance: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + variance.sqrt() * z
}

fn std_cdf(x: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}

/// Probability that Normal(mean, variance) falls outside [lo, hi].
fn outside_probability(mean: f64, variance: f64, lo: f64, hi: f64) -> f64 {
    if variance == 0.0 {
        return if (lo..=hi).contains(&mean) { 0.0 } else { 1.0 };
    }
    let sd = variance.sqrt();
    std_cdf((lo - mean) / sd) + std_cdf((mean - hi) / sd)
}

/// Draw a synthetic population: `n_per[k]` observations for each structure.
pub fn generate(
    truth: &GroundTruth,
    n_per: &[usize],
    model: &dyn FrequencyModel,
    seed: u64,
) -> Result<Generated, PopgenError> {
    truth.validate()?;
    if n_per.is_empty() || n_per.contains(&0) {
        return Err(PopgenError::InvalidTruth("every structure needs at least one observation".into()));
    }
    let (lo, hi) = model.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let v_reject = if truth.v_sigma == 0.0 { 0.0 } else { std_cdf(-truth.e_sigma / truth.v_sigma.sqrt()) };
    if v_reject > MAX_REJECTION_RATE {
        return Err(PopgenError::RejectionRate {
            stage: "V_s positivity",
            structure: 1,
            rate: v_reject,
            max: MAX_REJECTION_RATE,
        });
    }

    let mut dataset = PopulationDataset::default();
    let mut truths = Vec::with_capacity(n_per.len());
    for (k, &n) in n_per.iter().enumerate() {
        let e_s = normal_draw(&mut rng, truth.e_mu, truth.v_mu);
        let v_s = draw_until(&mut rng, |r| normal_draw(r, truth.e_sigma, truth.v_sigma), |v| v > 0.0).ok_or(
            PopgenError::RejectionRate {
                stage: "V_s positivity",
                structure: k + 1,
                rate: 1.0,
                max: MAX_REJECTION_RATE,
            },
        )?;
        let rate = outside_probability(e_s, v_s, lo, hi);
        if rate > MAX_REJECTION_RATE {
            return Err(PopgenError::RejectionRate {
                stage: "stiffness domain",
                structure: k + 1,
                rate,
                max: MAX_REJECTION_RATE,
            });
        }
        let mut stiffness = Vec::with_capacity(n);
        let mut observations = Vec::with_capacity(n);
        for _ in 0..n {
            let s = draw_until(&mut rng, |r| normal_draw(r, e_s, v_s), |s| (lo..=hi).contains(&s)).ok_or(
                PopgenError::RejectionRate {
                    stage: "stiffness domain",
                    structure: k + 1,
                    rate: 1.0,
                    max: MAX_REJECTION_RATE,
                },
            )?;
            let f = model.frequency(s).map_err(|e| PopgenError::Model(e.to_string()))?;
            let w = normal_draw(&mut rng, f, truth.noise_sd * truth.noise_sd);
            if !(w > 0.0 && w.is_finite()) {
                return Err(PopgenError::BadFrequency(w));
            }
            stiffness.push(s);
            observations.push(Observation::new(w));
        }
        dataset.structures.push(StructureData { id: (k + 1).to_string(), observations });
        truths.push(StructureTruth { e_s, v_s, stiffness });
    }
    Ok(Generated { dataset, truth: truths })
}

fn draw_until(
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> f64,
    accept: impl Fn(f64) -> bool,
) -> Option<f64> {
    (0..MAX_ATTEMPTS).map(|_| draw(rng)).find(|&v| accept(v))
}
