//! Top-level simulation configuration and TOML loading.
//!
//! Every radio and learning default lives here (or in the per-module
//! `Default` impls it delegates to); nothing is hard-coded at use sites.
//! A config file only needs the sections it overrides, but an overridden
//! section must be complete.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::RadioParams;
use crate::env::TrafficConfig;
use crate::geometry::NetworkConfig;
use crate::learner::HyperParams;
use crate::policy::PolicyConfig;
use crate::{Error, Result};

/// Evaluation-suite knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Random deployments averaged per evaluation point.
    pub deployments: usize,
    /// Steps simulated per evaluation deployment.
    pub horizon: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            deployments: 500,
            horizon: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Fairness parameter of the network utility (0 = sum rate,
    /// 1 = proportional fairness).
    #[serde(default)]
    pub alpha: f64,
    /// Training-time UE count K0.
    #[serde(default = "default_k0")]
    pub k0: usize,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default = "RadioParams::mbs_default")]
    pub mbs: RadioParams,
    #[serde(default = "RadioParams::sbs_default")]
    pub sbs: RadioParams,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default)]
    pub learning: HyperParams,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_k0() -> usize {
    15
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            alpha: 0.0,
            k0: default_k0(),
            network: NetworkConfig::default(),
            mbs: RadioParams::mbs_default(),
            sbs: RadioParams::sbs_default(),
            traffic: TrafficConfig::default(),
            policy: PolicyConfig::default(),
            learning: HyperParams::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validated(mut self) -> Result<Self> {
        if self.alpha < 0.0 {
            return Err(Error::Config("alpha must be >= 0".into()));
        }
        if self.k0 < 1 {
            return Err(Error::Config("k0 must be >= 1".into()));
        }
        self.network = self.network.validated()?;
        self.mbs = self.mbs.validated()?;
        self.sbs = self.sbs.validated()?;
        self.traffic = self.traffic.validated()?;
        self.learning = self.learning.validated()?;
        self.policy = self.policy.validated()?;
        if self.eval.deployments == 0 || self.eval.horizon == 0 {
            return Err(Error::Config("eval.deployments and eval.horizon must be >= 1".into()));
        }
        Ok(self)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Loads and validates a TOML config file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let cfg: SimConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
    cfg.validated()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = SimConfig::default().validated().unwrap();
        let text = cfg.to_toml();
        let back: SimConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.network.n_sbs, 3);
        assert_eq!(back.k0, 15);
        assert_eq!(back.learning.eps_neg, 0.01);
        assert_eq!(back.learning.eps_pos, 0.5);
        assert_eq!(back.policy.n, 128);
    }

    #[test]
    fn partial_toml_applies_section_defaults() {
        let cfg: SimConfig = toml::from_str("alpha = 1.0\n[network]\nn_sbs = 2\ncoverage_radius_m = 50.0\ninter_cell_distance_m = 60.0\nneighbor_k = 5\n[network.region]\nwidth_m = 200.0\nheight_m = 200.0\n").unwrap();
        let cfg = cfg.validated().unwrap();
        assert_eq!(cfg.alpha, 1.0);
        assert_eq!(cfg.network.n_sbs, 2);
        assert_eq!(cfg.network.beam_budget, vec![3, 3]);
        // Untouched sections fall back to defaults.
        assert_eq!(cfg.mbs.noise_figure_db, 5.0);
        assert_eq!(cfg.sbs.pathloss_exp, 2.5);
    }

    #[test]
    fn missing_config_file_is_a_config_error() {
        let err = load_config(Path::new("/nonexistent/cfg.toml")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
