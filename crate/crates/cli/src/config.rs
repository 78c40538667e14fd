//! Experiment configuration files.

use anyhow::{bail, Context, Result};
use h22lab::graph::GraphDescriptor;
use h22lab::oracle::QuadratureSpec;
use h22lab::sampler::{ObservableSpec, SamplerParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeParams {
    pub alpha: f64,
    #[serde(default)]
    pub gamma: f64,
    pub kappa: f64,
    pub wbar: f64,
}

/// ```json
/// {
///   "graph": {"family": "chain", "length": 6, "alpha": 4.0, "wbar": 271.0, "pinning": "P2"},
///   "observables": [{"kind": "cosh_u_diff_pow", "a": 0, "b": "rho", "m": 2.0}],
///   "regime": {"alpha": 4.0, "gamma": 0.0, "kappa": 1.0, "wbar": 271.0},
///   "sampler": {"n_steps": 20000, "burn_in": 2000},
///   "seed": 7,
///   "output": "chain.csv"
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphDescriptor,
    pub observables: Vec<ObservableSpec>,
    pub regime: RegimeParams,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A parsed config with the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let raw = std::fs::read(path).with_context(|| format!("reading config {}", path.display()))?;
    let config: ExperimentConfig =
        serde_json::from_slice(&raw).with_context(|| format!("parsing config {}", path.display()))?;
    if config.observables.is_empty() {
        bail!("config lists no observables");
    }
    Ok(LoadedConfig { config, raw })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "graph": {"family": "chain", "length": 6, "alpha": 4.0, "wbar": 271.0, "pinning": "P2"},
        "observables": [{"kind": "cosh_u_diff_pow", "a": 0, "b": "rho", "m": 2.0}],
        "regime": {"alpha": 4.0, "gamma": 0.0, "kappa": 1.0, "wbar": 271.0},
        "sampler": {"n_steps": 20000, "burn_in": 2000},
        "seed": 7
    }"#;

    #[test]
    fn parses_example() {
        let c: ExperimentConfig = serde_json::from_str(EXAMPLE).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.sampler.chains, 4);
        assert!(c.output.is_none());
        assert_eq!(c.graph.build().unwrap().n(), 5);
    }

    #[test]
    fn seed_is_mandatory() {
        let s = EXAMPLE.replace("\"seed\": 7", "\"output\": \"x.csv\"");
        assert!(serde_json::from_str::<ExperimentConfig>(&s).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let s = EXAMPLE.replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        assert!(serde_json::from_str::<ExperimentConfig>(&s).is_err());
    }
}
