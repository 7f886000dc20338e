//! Importance-tiered noise plans: a strong privacy level (more noise) on one
//! importance tier of first-layer weights, a weak level everywhere else.

use crate::dp::{self, Coord, NoisePlan, PrivacyParams, Site};
use crate::error::{dim_err, usage_err, Result};
use crate::importance::{select_tiers, ImportanceMap, TierEnd};
use crate::nn::ModelParams;

/// How tier epsilons translate into noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseMode {
    /// Uplink calibration: `sigma(eps) = c·L·(2C/m)/eps`.
    Calibrated,
    /// Stds given verbatim; the epsilons only label the tiers.
    Direct { sigma_strong: f64, sigma_weak: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierPolicy {
    /// Fraction of features in the strongly-protected tier, in `(0, 1]`.
    pub fraction: f64,
    pub end: TierEnd,
    pub epsilon_strong: f64,
    pub epsilon_weak: f64,
    pub mode: NoiseMode,
}

impl TierPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return usage_err("tier fraction must be in (0,1]");
        }
        if !(self.epsilon_strong > 0.0 && self.epsilon_weak > 0.0) {
            return usage_err("tier epsilons must be > 0");
        }
        if self.epsilon_strong > self.epsilon_weak {
            return usage_err("epsilon_strong must not exceed epsilon_weak");
        }
        if let NoiseMode::Direct { sigma_strong, sigma_weak } = self.mode {
            if !(sigma_strong >= 0.0 && sigma_weak >= 0.0) {
                return usage_err("direct sigmas must be >= 0");
            }
        }
        Ok(())
    }

    /// `(sigma_strong, sigma_weak)` under this policy.
    pub fn sigmas(&self, privacy: &PrivacyParams) -> Result<(f64, f64)> {
        match self.mode {
            NoiseMode::Direct { sigma_strong, sigma_weak } => Ok((sigma_strong, sigma_weak)),
            NoiseMode::Calibrated => {
                let strong = dp::uplink_sigma(&privacy.with_epsilon(self.epsilon_strong))?;
                let weak = dp::uplink_sigma(&privacy.with_epsilon(self.epsilon_weak))?;
                Ok((strong, weak))
            }
        }
    }
}

/// Turn an importance map into a noise plan: default sigma at the weak
/// level; every first-layer weight in a selected feature's row overridden to
/// the strong level. Second-layer weights and all biases keep the default.
pub fn build_plan(
    fi: &ImportanceMap,
    policy: &TierPolicy,
    privacy: &PrivacyParams,
    shapes: &[(usize, usize)],
) -> Result<NoisePlan> {
    policy.validate()?;
    let Some(&(fan_in, fan_out)) = shapes.first() else {
        return dim_err("model has no layers");
    };
    if fi.len() != fan_in {
        return dim_err("importance map length does not match first-layer fan_in");
    }
    let (sigma_strong, sigma_weak) = policy.sigmas(privacy)?;
    let mut plan = NoisePlan::uniform(sigma_weak)?;
    for row in select_tiers(fi, policy.fraction, policy.end) {
        for col in 0..fan_out {
            plan.set_override(
                Coord { layer: 0, site: Site::Weight { row, col } },
                sigma_strong,
            )?;
        }
    }
    Ok(plan)
}

/// Client-side entry point: perturb a trained local model under a plan.
pub fn apply_adaptive(params: &ModelParams, plan: &NoisePlan, seed: u64) -> Result<ModelParams> {
    dp::perturb(params, plan, seed)
}
