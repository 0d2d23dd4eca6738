//! JSON run configuration shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fem::{ScourModel, SpringLayout, StructureTemplate, DEFAULT_ELEMENTS};
use crate::hiermc::{HyperPriorConfig, Pooling, SamplerConfig};
use crate::popgen::GroundTruth;
use crate::signals::{JonswapConfig, PsdConfig, SeriesFormat, DEFAULT_DAMPING, DEFAULT_DURATION, DEFAULT_SAMPLE_RATE};
use crate::surrogate::{DEFAULT_DEGREE, DEFAULT_TRAINING_POINTS, NREL_DOMAIN, WAVETANK_DOMAIN};

use super::CliError;

/// A built-in template name, a path to a template JSON file, or an inline
/// template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateRef {
    Named(String),
    Inline(Box<StructureTemplate>),
}

impl Default for TemplateRef {
    fn default() -> Self {
        Self::Named("nrel5mw".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoundationSettings {
    pub springs: SpringLayout,
    pub scour: ScourModel,
    pub n_elements: usize,
    /// Defaults to fresh water for the tank template and seawater otherwise.
    pub water_density: Option<f64>,
}

impl Default for FoundationSettings {
    fn default() -> Self {
        Self {
            springs: SpringLayout::default(),
            scour: ScourModel::default(),
            n_elements: DEFAULT_ELEMENTS,
            water_density: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateSettings {
    /// Stiffness domain in N/m^2; built-in templates have defaults.
    pub domain: Option<[f64; 2]>,
    pub grid: usize,
    pub degree: usize,
    pub holdout: usize,
    /// Largest acceptable relative hold-out error.
    pub max_holdout_error: f64,
    /// Surrogate read by downstream commands; defaults to `{out}/surrogate.json`.
    pub path: Option<String>,
}

impl Default for SurrogateSettings {
    fn default() -> Self {
        Self {
            domain: None,
            grid: DEFAULT_TRAINING_POINTS,
            degree: DEFAULT_DEGREE,
            holdout: 200,
            max_holdout_error: 1e-3,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSettings {
    pub n_per: Vec<usize>,
    #[serde(default = "GroundTruth::nrel_default")]
    pub truth: GroundTruth,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSettings {
    pub seed: u64,
    /// Synthesise one record per observation of this dataset; defaults to
    /// `{out}/dataset.csv`. Ignored when `frequencies` is given.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default)]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default)]
    pub jonswap: JonswapConfig,
    #[serde(default)]
    pub psd: PsdConfig,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default)]
    pub save_series: bool,
    #[serde(default)]
    pub format: SeriesFormat,
}

fn default_sample_rate() -> f64 {
    DEFAULT_SAMPLE_RATE
}
fn default_duration() -> f64 {
    DEFAULT_DURATION
}
fn default_damping() -> f64 {
    DEFAULT_DAMPING
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSettings {
    pub seed: u64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_iterations")]
    pub warmup: usize,
    #[serde(default = "default_iterations")]
    pub draws: usize,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_accept")]
    pub target_accept: f64,
    #[serde(default = "default_regimes")]
    pub regimes: Vec<Pooling>,
    /// Structures fitted without pooling; all of them by default.
    #[serde(default)]
    pub structures: Option<Vec<String>>,
    /// Defaults to `{out}/dataset.csv`.
    #[serde(default)]
    pub dataset: Option<String>,
    /// Hyper-prior JSON file; defaults to the template's built-in constants.
    #[serde(default)]
    pub hyper_priors: Option<String>,
}

fn default_chains() -> usize {
    4
}
fn default_iterations() -> usize {
    2000
}
fn default_depth() -> usize {
    10
}
fn default_accept() -> f64 {
    0.8
}
fn default_regimes() -> Vec<Pooling> {
    vec![Pooling::Partial, Pooling::None]
}

impl SamplerSettings {
    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            chains: self.chains,
            warmup: self.warmup,
            draws: self.draws,
            seed: self.seed,
            max_depth: self.max_depth,
            target_accept: self.target_accept,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalySettings {
    pub seed: u64,
    pub observations: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Directory holding the chain files; defaults to `{out}`.
    #[serde(default)]
    pub chains_dir: Option<String>,
}

fn default_threshold() -> f64 {
    crate::anomaly::DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationSettings {
    /// Replaces the material density of every segment.
    pub density: Option<f64>,
    pub tolerance_pct: f64,
    pub tuned_tolerance_pct: f64,
    pub tuned_second_mode_tolerance_pct: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self { density: None, tolerance_pct: 2.0, tuned_tolerance_pct: 1.0, tuned_second_mode_tolerance_pct: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlotSettings {
    pub bins: usize,
    pub curve_points: usize,
}

impl Default for PlotSettings {
    fn default() -> Self {
        Self { bins: 60, curve_points: 200 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub template: TemplateRef,
    pub foundation: FoundationSettings,
    pub surrogate: SurrogateSettings,
    pub generation: Option<GenerationSettings>,
    pub signals: Option<SignalSettings>,
    pub sampler: Option<SamplerSettings>,
    pub anomaly: Option<AnomalySettings>,
    pub validation: ValidationSettings,
    pub plot: PlotSettings,
}

/// A parsed configuration together with what is needed to resolve paths and
/// stamp outputs.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Loaded {
    pub fn from_file(path: &Path, out_dir: &Path) -> Result<Self, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, bytes, base_dir, out_dir: out_dir.to_path_buf() })
    }

    /// `{out}` expands to the output directory; other relative paths are
    /// taken relative to the config file.
    pub fn resolve(&self, p: &str) -> PathBuf {
        if let Some(rest) = p.strip_prefix("{out}") {
            return self.out_dir.join(rest.trim_start_matches(['/', '\\']));
        }
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn resolve_or(&self, p: &Option<String>, default: &str) -> PathBuf {
        match p {
            Some(p) => self.resolve(p),
            None => self.out_dir.join(default),
        }
    }

    pub fn template(&self) -> Result<StructureTemplate, CliError> {
        let t = match &self.config.template {
            TemplateRef::Inline(t) => (**t).clone(),
            TemplateRef::Named(name) => match StructureTemplate::builtin(name) {
                Ok(t) => t,
                Err(_) => {
                    let path = self.resolve(name);
                    let text = std::fs::read_to_string(&path).map_err(|e| {
                        CliError::Usage(format!(
                            "template '{name}' is not built in and {} is unreadable: {e}",
                            path.display()
                        ))
                    })?;
                    serde_json::from_str(&text)
                        .map_err(|e| CliError::Usage(format!("invalid template {}: {e}", path.display())))?
                }
            },
        };
        t.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(t)
    }

    fn is_tank(&self) -> bool {
        matches!(&self.config.template, TemplateRef::Named(n) if n.starts_with("wavetank"))
    }

    pub fn domain(&self) -> Result<(f64, f64), CliError> {
        if let Some([lo, hi]) = self.config.surrogate.domain {
            if !(lo > 0.0 && hi > lo && hi.is_finite()) {
                return Err(CliError::Usage(format!("surrogate domain [{lo}, {hi}]")));
            }
            return Ok((lo, hi));
        }
        match &self.config.template {
            TemplateRef::Named(n) if n.starts_with("nrel5mw") => Ok(NREL_DOMAIN),
            TemplateRef::Named(n) if n.starts_with("wavetank") => Ok(WAVETANK_DOMAIN),
            _ => Err(CliError::Usage("surrogate.domain is required for custom templates".into())),
        }
    }

    pub fn hyper_priors(&self, sampler: &SamplerSettings) -> Result<HyperPriorConfig, CliError> {
        let priors = match &sampler.hyper_priors {
            Some(p) => {
                let path = self.resolve(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Usage(format!("cannot read hyper-priors {}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid hyper-priors {}: {e}", path.display())))?
            }
            None if self.is_tank() => HyperPriorConfig::wavetank_default(),
            None => HyperPriorConfig::nrel_default(),
        };
        priors.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(priors)
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        section.as_ref().ok_or_else(|| CliError::Usage(format!("config has no '{name}' section")))
    }
}
