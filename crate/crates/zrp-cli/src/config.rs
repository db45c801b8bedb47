//! Experiment configuration: one JSON document drives every subcommand.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use zrp_core::walk::WalkSpec;
use zrp_core::zrp::ZrpModel;
use zrp_core::{CoreError, Result};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_M_MAX: u32 = 256;
pub const DEFAULT_STATE_CAP: u64 = 2_000_000;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_seed() -> u64 {
    1
}
fn default_replicas() -> u32 {
    8
}
fn default_t_max() -> f64 {
    10.0
}
fn default_m_max() -> u32 {
    DEFAULT_M_MAX
}
fn default_lambda() -> f64 {
    0.0
}

/// Fully resolved experiment description.  Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub walk: WalkSpec,
    /// System sizes to sweep, in the given order.
    pub n_list: Vec<u32>,
    /// Well exponent overrides; model defaults apply when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Ramp half-width for the capacity test function.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u32,
    /// Simulation horizon per replica, in `n^2 log n` units.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    /// Reference site for wells, gaps, and certificates.
    #[serde(default)]
    pub x0: usize,
    /// Site function for the Poisson sweep; defaults to +1 on the first
    /// site, -1 on the last.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    /// Mass term of the Poisson equation.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Largest dyadic scale tried by the certificate scan.
    #[serde(default = "default_m_max")]
    pub m_max: u32,
    /// State-count ceiling for exact assemblies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_states: Option<u64>,
    /// Worker cap; 0 or absent leaves the pool at its default size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Artifact directory; flag and environment can override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CoreError::argument(format!("config {}: {e}", path.display()))
        })?;
        Self::from_json(&text).map_err(|e| match e {
            CoreError::Argument(msg) => {
                CoreError::argument(format!("config {}: {msg}", path.display()))
            }
            other => other,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CoreError::argument(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(CoreError::argument("config: n_list must be nonempty"));
        }
        if let Some(f) = &self.f {
            if f.len() != self.walk.kappa() {
                return Err(CoreError::argument(format!(
                    "config: f has {} entries, walk has {} sites",
                    f.len(),
                    self.walk.kappa()
                )));
            }
        }
        if self.x0 >= self.walk.kappa() {
            return Err(CoreError::argument(format!(
                "config: x0 = {} out of range for {} sites",
                self.x0,
                self.walk.kappa()
            )));
        }
        if self.replicas == 0 {
            return Err(CoreError::argument("config: replicas must be >= 1"));
        }
        if self.t_max <= 0.0 {
            return Err(CoreError::argument("config: t_max must be positive"));
        }
        Ok(())
    }

    /// Content hash of the resolved configuration (the serialized form,
    /// so every default that applied is part of the digest).
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn model(&self, n: u32) -> Result<ZrpModel> {
        if self.gamma.is_none() && self.beta.is_none() {
            return ZrpModel::new(n, self.walk.clone());
        }
        let k = self.walk.kappa() as f64;
        let gamma = self.gamma.unwrap_or_else(|| 0.4f64.min(1.0 / k));
        let beta = self.beta.unwrap_or(0.5);
        ZrpModel::with_params(n, self.walk.clone(), gamma, beta)
    }

    pub fn state_cap(&self) -> u64 {
        self.cap_states.unwrap_or(DEFAULT_STATE_CAP)
    }

    /// Default Poisson site function: +1 on the first site, -1 on the
    /// last, zero in between.
    pub fn site_function(&self) -> Vec<f64> {
        match &self.f {
            Some(f) => f.clone(),
            None => {
                let k = self.walk.kappa();
                let mut f = vec![0.0; k];
                f[0] = 1.0;
                f[k - 1] = -1.0;
                f
            }
        }
    }
}
