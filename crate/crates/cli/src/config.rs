use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tlsjump::conditioning::{ErrorModel, SelectionPattern};
use tlsjump::spectroscopy::LinkOptions;
use tlsjump::traceio::DiscriminatorOptions;
use tlsjump::{FitSpec, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub sim: SimConfig,
    #[serde(default = "one")]
    pub n_traces: usize,
    #[serde(default)]
    pub f_q_hz: Option<f64>,
    #[serde(default)]
    pub field_v_per_m: Option<f64>,
}

fn one() -> usize {
    1
}

/// How raw IQ inputs are turned into states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discrimination {
    #[serde(default)]
    pub options: DiscriminatorOptions,
    #[serde(default)]
    pub majority_filter: bool,
    /// The discriminator is fitted on at most this many points, taken from
    /// the inputs in order.
    #[serde(default = "default_fit_points")]
    pub max_fit_points: usize,
}

fn default_fit_points() -> usize {
    200_000
}

impl Default for Discrimination {
    fn default() -> Self {
        Discrimination { options: DiscriminatorOptions::default(), majority_filter: false, max_fit_points: default_fit_points() }
    }
}

fn default_patterns() -> Vec<SelectionPattern> {
    vec![SelectionPattern::ground(), SelectionPattern::post_jump()]
}

fn default_horizon() -> f64 {
    5e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default)]
    pub inputs: Vec<PathBuf>,
    #[serde(default = "default_patterns")]
    pub patterns: Vec<SelectionPattern>,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    /// Negative lags reported before each selection instant, s.
    #[serde(default)]
    pub include_pre_s: f64,
    /// g₂ lag range; defaults to the horizon.
    #[serde(default)]
    pub max_lag_s: Option<f64>,
    #[serde(default)]
    pub error_model: ErrorModel,
    #[serde(default)]
    pub discrimination: Discrimination,
    #[serde(default)]
    pub format: Format,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        AnalyzeConfig {
            inputs: vec![],
            patterns: default_patterns(),
            horizon_s: default_horizon(),
            include_pre_s: 0.0,
            max_lag_s: None,
            error_model: ErrorModel::default(),
            discrimination: Discrimination::default(),
            format: Format::default(),
        }
    }
}

fn default_spec() -> FitSpec {
    FitSpec::new(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub ground: PathBuf,
    pub post_jump: PathBuf,
    #[serde(default = "default_spec")]
    pub spec: FitSpec,
    /// Further specs to rank against `spec`.
    #[serde(default)]
    pub compare: Vec<FitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_spec")]
    pub spec: FitSpec,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default)]
    pub link: LinkOptions,
    #[serde(default)]
    pub discrimination: Discrimination,
    #[serde(default)]
    pub format: Format,
}

/// One sweep point: a trace or IQ file, or a directory of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub f_q_hz: f64,
    #[serde(default)]
    pub field_v_per_m: f64,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(tlsjump::traceio::read_json(path)?)
}

/// Relative paths in a config are taken relative to the config file.
pub fn resolve(base: Option<&Path>, p: &Path) -> PathBuf {
    let joined = match base.and_then(Path::parent) {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    };
    std::path::absolute(&joined).unwrap_or(joined)
}

pub fn write_resolved<T: Serialize>(out: &Path, cfg: &T) -> Result<()> {
    tlsjump::traceio::write_json(&out.join("resolved_config.json"), cfg).context("writing resolved config")?;
    Ok(())
}
