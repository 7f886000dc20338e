//! Experiment configuration: a flat-key TOML document with defaults filled
//! in at parse time, so a serialized config doubles as a complete,
//! re-runnable manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use fedadp_core::adaptive::{NoiseMode, TierPolicy};
use fedadp_core::data::{synth_gaussian_blobs, BlobSpec, Dataset};
use fedadp_core::dp::{uplink_sigma, PrivacyParams};
use fedadp_core::federation::ClientPrivacy;
use fedadp_core::importance::{FiMethod, TierEnd};
use fedadp_core::nn::HyperParams;

use crate::idx::load_mnist;
use crate::{AppError, Result};

fn d_name() -> String {
    String::from("experiment")
}
fn d_test_fraction() -> f64 {
    0.2
}
fn d_clients() -> usize {
    30
}
fn d_rounds() -> usize {
    25
}
fn d_learning_rate() -> f64 {
    0.02
}
fn d_clip() -> f64 {
    5.0
}
fn d_local_epochs() -> usize {
    1
}
fn d_batch_size() -> usize {
    32
}
fn d_hidden() -> usize {
    256
}
fn d_privacy() -> String {
    String::from("off")
}
fn d_delta() -> f64 {
    0.01
}
fn d_exposures() -> u32 {
    1
}
fn d_seed() -> u64 {
    42
}
fn d_features() -> usize {
    16
}
fn d_classes() -> usize {
    3
}
fn d_informative() -> usize {
    4
}
fn d_samples() -> usize {
    3000
}
fn d_separation() -> f64 {
    4.0
}
fn d_heatmap_rounds() -> Vec<usize> {
    vec![1, 8, 16, 25]
}

/// One experiment, fully specified. Every key is flat; unknown keys are
/// rejected. `parse` fills defaults, so serializing the parsed value yields
/// a manifest that re-runs bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "d_name")]
    pub name: String,

    /// "mnist" or "synthetic".
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_images: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_labels: Option<PathBuf>,
    /// Rows kept after the deterministic shuffle; defaults to the whole set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub take: Option<usize>,
    #[serde(default = "d_test_fraction")]
    pub test_fraction: f64,

    // synthetic generator (used when dataset = "synthetic")
    #[serde(default = "d_features")]
    pub features: usize,
    #[serde(default = "d_classes")]
    pub classes: usize,
    #[serde(default = "d_informative")]
    pub informative: usize,
    #[serde(default = "d_samples")]
    pub samples: usize,
    #[serde(default = "d_separation")]
    pub separation: f64,

    #[serde(default = "d_clients")]
    pub clients: usize,
    #[serde(default = "d_rounds")]
    pub rounds: usize,

    #[serde(default = "d_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "d_clip")]
    pub clip: f64,
    #[serde(default = "d_local_epochs")]
    pub local_epochs: usize,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_hidden")]
    pub hidden: usize,

    /// "off", "uniform", or "adaptive".
    #[serde(default = "d_privacy")]
    pub privacy: String,
    #[serde(default = "d_delta")]
    pub delta: f64,
    /// Maximum exposures of local parameters per uplink, `L`.
    #[serde(default = "d_exposures")]
    pub exposures: u32,
    /// Uniform mode: calibrated noise level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Uniform mode: direct noise std (mutually exclusive with `epsilon`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub downlink_noise: bool,

    // adaptive policy
    /// "variance" or "sensitivity".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fi_method: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_fraction: Option<f64>,
    /// "lowest" or "highest".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_end: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_strong: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_weak: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_strong: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_weak: Option<f64>,

    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Which client's importance map gets CSV + heatmap artifacts.
    #[serde(default)]
    pub heatmap_client: usize,
    #[serde(default = "d_heatmap_rounds")]
    pub heatmap_rounds: Vec<usize>,
}

fn cfg_err(msg: impl Into<String>) -> AppError {
    AppError::Config(msg.into())
}

impl ExperimentConfig {
    /// Parse and validate a TOML config document.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serialize back to TOML; the result parses to an identical config.
    pub fn to_manifest(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| AppError::Runtime(anyhow::anyhow!("manifest serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        match self.dataset.as_str() {
            "mnist" => {
                let images = self
                    .mnist_images
                    .as_ref()
                    .ok_or_else(|| cfg_err("dataset = \"mnist\" requires mnist_images"))?;
                let labels = self
                    .mnist_labels
                    .as_ref()
                    .ok_or_else(|| cfg_err("dataset = \"mnist\" requires mnist_labels"))?;
                for path in [images, labels] {
                    if !path.exists() {
                        return Err(cfg_err(format!("missing data file {}", path.display())));
                    }
                }
            }
            "synthetic" => {}
            other => {
                return Err(cfg_err(format!(
                    "dataset must be \"mnist\" or \"synthetic\", got \"{other}\""
                )))
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(cfg_err("test_fraction must be in (0,1)"));
        }
        if self.clients == 0 {
            return Err(cfg_err("clients must be >= 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(cfg_err("delta must be in (0,1)"));
        }
        match self.privacy.as_str() {
            "off" => {}
            "uniform" => match (self.epsilon, self.sigma) {
                (Some(_), None) | (None, Some(_)) => {}
                _ => {
                    return Err(cfg_err(
                        "privacy = \"uniform\" requires exactly one of epsilon or sigma",
                    ))
                }
            },
            "adaptive" => {
                let eps_pair = self.epsilon_strong.is_some() && self.epsilon_weak.is_some();
                let sigma_pair = self.sigma_strong.is_some() && self.sigma_weak.is_some();
                if self.fi_method.is_none()
                    || self.tier_fraction.is_none()
                    || self.tier_end.is_none()
                    || !(eps_pair || sigma_pair)
                {
                    return Err(cfg_err(
                        "privacy = \"adaptive\" requires a complete policy: fi_method, \
                         tier_fraction, tier_end, and either epsilon_strong/epsilon_weak \
                         or sigma_strong/sigma_weak",
                    ));
                }
                self.fi_method_value()?;
                self.tier_end_value()?;
            }
            other => {
                return Err(cfg_err(format!(
                    "privacy must be \"off\", \"uniform\", or \"adaptive\", got \"{other}\""
                )))
            }
        }
        self.hyper().validate().map_err(|e| cfg_err(e.to_string()))?;
        Ok(())
    }

    pub fn hyper(&self) -> HyperParams {
        HyperParams {
            learning_rate: self.learning_rate,
            clip_norm: self.clip,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
            hidden_width: self.hidden,
        }
    }

    pub fn fi_method_value(&self) -> Result<FiMethod> {
        match self.fi_method.as_deref() {
            Some("variance") => Ok(FiMethod::Variance),
            Some("sensitivity") => Ok(FiMethod::Sensitivity),
            Some(other) => Err(cfg_err(format!(
                "fi_method must be \"variance\" or \"sensitivity\", got \"{other}\""
            ))),
            None => Err(cfg_err("fi_method is required for adaptive privacy")),
        }
    }

    pub fn tier_end_value(&self) -> Result<TierEnd> {
        match self.tier_end.as_deref() {
            Some("lowest") => Ok(TierEnd::Lowest),
            Some("highest") => Ok(TierEnd::Highest),
            Some(other) => Err(cfg_err(format!(
                "tier_end must be \"lowest\" or \"highest\", got \"{other}\""
            ))),
            None => Err(cfg_err("tier_end is required for adaptive privacy")),
        }
    }

    /// Load (or generate) the full dataset before splitting.
    pub fn load_dataset(&self) -> Result<Dataset> {
        match self.dataset.as_str() {
            "mnist" => load_mnist(
                self.mnist_images.as_ref().unwrap(),
                self.mnist_labels.as_ref().unwrap(),
            ),
            "synthetic" => {
                let spec = BlobSpec {
                    features: self.features,
                    classes: self.classes,
                    informative: self.informative,
                    samples: self.samples,
                    separation: self.separation,
                };
                let (ds, _) = synth_gaussian_blobs(&spec, self.seed)?;
                Ok(ds)
            }
            _ => unreachable!("validated"),
        }
    }

    /// Calibration inputs; `epsilon` is a per-use placeholder replaced by
    /// each noise level's own value.
    pub fn privacy_params(&self, min_shard: usize) -> PrivacyParams {
        PrivacyParams {
            epsilon: 1.0,
            delta: self.delta,
            exposures: self.exposures,
            rounds: self.rounds.max(1) as u32,
            clients: self.clients as u32,
            clip: self.clip,
            min_shard,
        }
    }

    /// Translate the privacy keys into the per-client pipeline mode.
    pub fn client_privacy(&self, min_shard: usize) -> Result<ClientPrivacy> {
        let pp = self.privacy_params(min_shard);
        match self.privacy.as_str() {
            "off" => Ok(ClientPrivacy::None),
            "uniform" => {
                let sigma = match (self.epsilon, self.sigma) {
                    (Some(eps), None) => uplink_sigma(&pp.with_epsilon(eps))?,
                    (None, Some(sigma)) => sigma,
                    _ => unreachable!("validated"),
                };
                Ok(ClientPrivacy::Uniform { sigma })
            }
            "adaptive" => {
                let (mode, eps_strong, eps_weak) =
                    if let (Some(s), Some(w)) = (self.sigma_strong, self.sigma_weak) {
                        // direct stds; the epsilons only label the tiers
                        let es = self.epsilon_strong.unwrap_or(1.0);
                        let ew = self.epsilon_weak.unwrap_or(es);
                        (NoiseMode::Direct { sigma_strong: s, sigma_weak: w }, es, ew)
                    } else {
                        (
                            NoiseMode::Calibrated,
                            self.epsilon_strong.unwrap(),
                            self.epsilon_weak.unwrap(),
                        )
                    };
                let policy = TierPolicy {
                    fraction: self.tier_fraction.unwrap(),
                    end: self.tier_end_value()?,
                    epsilon_strong: eps_strong,
                    epsilon_weak: eps_weak,
                    mode,
                };
                policy.validate()?;
                Ok(ClientPrivacy::Adaptive {
                    policy,
                    method: self.fi_method_value()?,
                    privacy: pp,
                })
            }
            _ => unreachable!("validated"),
        }
    }
}
