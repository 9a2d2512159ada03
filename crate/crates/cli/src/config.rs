//! Optional TOML config file. Flags override config values, config values
//! override built-in defaults.

use std::path::Path;

use contagion_core::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    pub synth: SynthSection,
    pub estimate: EstimateSection,
    pub experiment: ExperimentSection,
    pub stress: StressSection,
    pub losses: LossesSection,
    pub var: VarSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct SynthSection {
    pub n: Option<usize>,
    pub seed: Option<u64>,
    pub pareto_shape: Option<f64>,
    pub pareto_scale: Option<f64>,
    pub cap_frac_min: Option<f64>,
    pub cap_frac_max: Option<f64>,
    pub ib_asset_frac_min: Option<f64>,
    pub ib_asset_frac_max: Option<f64>,
    pub ib_liab_frac_min: Option<f64>,
    pub ib_liab_frac_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct EstimateSection {
    pub edges: Option<f64>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub tol_rel: Option<f64>,
    pub increment: Option<f64>,
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    pub steps: Option<usize>,
    pub factor: Option<f64>,
    pub nodes: Option<String>,
    pub algorithms: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct StressSection {
    pub node: Option<usize>,
    pub levels: Option<usize>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub step: Option<usize>,
    pub factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct LossesSection {
    pub dist_mean: Option<f64>,
    pub dist_sd: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub scope: Option<String>,
    pub step: Option<usize>,
    pub factor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct VarSection {
    pub alpha: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))
            }
        }
    }
}

/// Flag > config > default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Flag > config; errors when neither supplies the parameter.
pub fn pick_required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| Error::Config(format!("missing required parameter --{name}")))
}
