//! Gaussian-mechanism calibration and seeded noise injection.
//!
//! Calibration follows the uplink/downlink scheme for clipped local model
//! vectors: sensitivity `2C/m`, uplink std `c·L·Δs/ε`, and a downlink std
//! that is zero until the round count exceeds `L·sqrt(N)`.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::error::{usage_err, Result};
use crate::nn::ModelParams;
use crate::rng::normal_at;

/// Inputs to noise calibration for one privacy level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Maximum exposures of the local parameters per uplink, `L`.
    pub exposures: u32,
    /// Global rounds, `T`.
    pub rounds: u32,
    /// Number of clients, `N`.
    pub clients: u32,
    /// L2 clipping bound on the transmitted parameter vector.
    pub clip: f64,
    /// Minimum local shard size, `m`.
    pub min_shard: usize,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return usage_err("epsilon must be > 0");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return usage_err("delta must be in (0,1)");
        }
        if self.exposures == 0 || self.rounds == 0 || self.clients == 0 {
            return usage_err("exposures, rounds, and clients must be >= 1");
        }
        if !(self.clip > 0.0) {
            return usage_err("clip must be > 0");
        }
        if self.min_shard == 0 {
            return usage_err("min_shard must be >= 1");
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }
}

/// Minimal admissible Gaussian-mechanism constant `sqrt(2 ln(1.25/delta))`.
pub fn gauss_c(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return usage_err(format!("delta must be in (0,1), got {delta}"));
    }
    Ok(libm::sqrt(2.0 * libm::log(1.25 / delta)))
}

/// Uplink sensitivity of a clipped local parameter vector: `2C/m`.
pub fn uplink_sensitivity(clip: f64, min_shard: usize) -> Result<f64> {
    if !(clip > 0.0) {
        return usage_err("clip must be > 0");
    }
    if min_shard == 0 {
        return usage_err("min_shard must be >= 1");
    }
    Ok(2.0 * clip / min_shard as f64)
}

/// Uplink noise std: `c · L · (2C/m) / ε`.
pub fn uplink_sigma(p: &PrivacyParams) -> Result<f64> {
    p.validate()?;
    let c = gauss_c(p.delta)?;
    let ds = uplink_sensitivity(p.clip, p.min_shard)?;
    Ok(c * p.exposures as f64 * ds / p.epsilon)
}

/// Downlink noise std: `2cC·sqrt(T² − L²N) / (mNε)` when `T > L·sqrt(N)`,
/// else exactly zero.
pub fn downlink_sigma(p: &PrivacyParams) -> Result<f64> {
    p.validate()?;
    let t = p.rounds as f64;
    let l = p.exposures as f64;
    let n = p.clients as f64;
    if t <= l * libm::sqrt(n) {
        return Ok(0.0);
    }
    let c = gauss_c(p.delta)?;
    Ok(2.0 * c * p.clip * libm::sqrt(t * t - l * l * n) / (p.min_shard as f64 * n * p.epsilon))
}

/// Addresses one scalar parameter inside a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Coord {
    pub layer: usize,
    pub site: Site,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Site {
    Weight { row: usize, col: usize },
    Bias { index: usize },
}

/// Per-coordinate noise standard deviations: a default plus sparse overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePlan {
    default_sigma: f64,
    overrides: BTreeMap<Coord, f64>,
}

impl NoisePlan {
    pub fn uniform(sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) {
            return usage_err("sigma must be >= 0");
        }
        Ok(NoisePlan {
            default_sigma: sigma,
            overrides: BTreeMap::new(),
        })
    }

    pub fn set_override(&mut self, coord: Coord, sigma: f64) -> Result<()> {
        if !(sigma >= 0.0) {
            return usage_err("sigma must be >= 0");
        }
        self.overrides.insert(coord, sigma);
        Ok(())
    }

    pub fn default_sigma(&self) -> f64 {
        self.default_sigma
    }

    pub fn overrides(&self) -> &BTreeMap<Coord, f64> {
        &self.overrides
    }

    #[inline]
    pub fn sigma_at(&self, coord: &Coord) -> f64 {
        *self.overrides.get(coord).unwrap_or(&self.default_sigma)
    }

    /// Every override must address a real coordinate of `shapes`.
    pub fn validate_for(&self, shapes: &[(usize, usize)]) -> Result<()> {
        for coord in self.overrides.keys() {
            let Some(&(rows, cols)) = shapes.get(coord.layer) else {
                return usage_err("noise plan override layer out of range");
            };
            let ok = match coord.site {
                Site::Weight { row, col } => row < rows && col < cols,
                Site::Bias { index } => index < cols,
            };
            if !ok {
                return usage_err("noise plan override coordinate out of range");
            }
        }
        Ok(())
    }
}

/// Adds an independent `N(0, σ²)` draw to every parameter, with σ taken per
/// coordinate from the plan. Coordinates with σ = 0 are left bit-unchanged.
///
/// The noise for flat coordinate `k` (layer-major, weights row-major then
/// biases) is `normal_at(seed, k)`, so any execution order gives identical
/// results.
pub fn perturb(params: &ModelParams, plan: &NoisePlan, seed: u64) -> Result<ModelParams> {
    plan.validate_for(&params.shapes())?;
    let mut out = params.clone();
    let mut flat: u64 = 0;
    for (layer_idx, layer) in out.layers.iter_mut().enumerate() {
        let cols = layer.weights.cols();
        let rows = layer.weights.rows();
        let uniform_layer = plan
            .overrides
            .range(
                Coord { layer: layer_idx, site: Site::Weight { row: 0, col: 0 } }
                    ..=Coord { layer: layer_idx, site: Site::Bias { index: usize::MAX } },
            )
            .next()
            .is_none();
        if uniform_layer {
            // Fast path: one sigma for the whole layer.
            let sigma = plan.default_sigma;
            if sigma > 0.0 {
                for v in layer.weights.as_mut_slice() {
                    *v += sigma * normal_at(seed, flat);
                    flat += 1;
                }
                for v in layer.bias.iter_mut() {
                    *v += sigma * normal_at(seed, flat);
                    flat += 1;
                }
            } else {
                flat += (rows * cols + layer.bias.len()) as u64;
            }
            continue;
        }
        for row in 0..rows {
            let w_row = layer.weights.row_mut(row);
            for (col, v) in w_row.iter_mut().enumerate() {
                let sigma = plan.sigma_at(&Coord {
                    layer: layer_idx,
                    site: Site::Weight { row, col },
                });
                if sigma > 0.0 {
                    *v += sigma * normal_at(seed, flat);
                }
                flat += 1;
            }
        }
        for (index, v) in layer.bias.iter_mut().enumerate() {
            let sigma = plan.sigma_at(&Coord {
                layer: layer_idx,
                site: Site::Bias { index },
            });
            if sigma > 0.0 {
                *v += sigma * normal_at(seed, flat);
            }
            flat += 1;
        }
    }
    Ok(out)
}
