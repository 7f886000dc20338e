//! Client-side update pipeline and server-side weighted aggregation.
//!
//! One round is: broadcast -> local train (clipped) -> feature importance ->
//! noise plan -> perturb -> upload -> weighted average. Everything here is a
//! pure function; the `fedadp` crate owns the round loop and the worker pool.

use alloc::vec::Vec;

use crate::adaptive::{build_plan, TierPolicy};
use crate::data::Dataset;
use crate::dp::{perturb, NoisePlan, PrivacyParams};
use crate::error::{dim_err, usage_err, Result};
use crate::importance::{probe_magnitude, sensitivity_fi, variance_fi, FiMethod, ImportanceMap};
use crate::nn::{local_train, HyperParams, ModelParams};
use crate::rng::derive2;

/// A client's identity, shard (indices into the training set), and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub shard: Vec<usize>,
    pub seed: u64,
}

impl ClientState {
    pub fn num_samples(&self) -> usize {
        self.shard.len()
    }
}

/// What a client does to its update before uploading.
#[derive(Debug, Clone, PartialEq)]
pub enum ClientPrivacy {
    /// Upload the clipped update as-is.
    None,
    /// One Gaussian std for every parameter.
    Uniform { sigma: f64 },
    /// Importance-tiered noise, re-planned every round.
    Adaptive {
        policy: TierPolicy,
        method: FiMethod,
        privacy: PrivacyParams,
    },
}

/// What one client uploads, plus per-round diagnostics.
#[derive(Debug, Clone)]
pub struct ClientUpdate {
    pub params: ModelParams,
    pub num_samples: usize,
    pub fi: Option<ImportanceMap>,
    pub plan: Option<NoisePlan>,
    pub tier_size: usize,
}

/// Run one client for one round: local training from the broadcast global,
/// then privacy processing per `privacy`. Deterministic in
/// `(state.seed, round_seed)`.
pub fn client_update(
    global: &ModelParams,
    ds: &Dataset,
    state: &ClientState,
    hp: &HyperParams,
    privacy: &ClientPrivacy,
    round: usize,
    round_seed: u64,
) -> Result<ClientUpdate> {
    let train_seed = derive2(state.seed, round_seed, STREAM_TRAIN);
    let noise_seed = derive2(state.seed, round_seed, STREAM_NOISE);
    let trained = local_train(global, ds, &state.shard, hp, train_seed)?;

    match privacy {
        ClientPrivacy::None => Ok(ClientUpdate {
            params: trained,
            num_samples: state.shard.len(),
            fi: None,
            plan: None,
            tier_size: 0,
        }),
        ClientPrivacy::Uniform { sigma } => {
            let plan = NoisePlan::uniform(*sigma)?;
            let params = perturb(&trained, &plan, noise_seed)?;
            Ok(ClientUpdate {
                params,
                num_samples: state.shard.len(),
                fi: None,
                plan: Some(plan),
                tier_size: 0,
            })
        }
        ClientPrivacy::Adaptive { policy, method, privacy } => {
            // Importance comes from the post-training, pre-perturbation
            // weights: the only point where it can still guide the plan.
            let fi = match method {
                FiMethod::Variance => variance_fi(&trained, global, round, state.id)?,
                FiMethod::Sensitivity => {
                    let (sigma_strong, _) = policy.sigmas(privacy)?;
                    let probe = probe_magnitude(sigma_strong);
                    sensitivity_fi(&trained, ds, &state.shard, probe, round, state.id)?
                }
            };
            let plan = build_plan(&fi, policy, privacy, &trained.shapes())?;
            let params = perturb(&trained, &plan, noise_seed)?;
            let fan_out = trained.shapes()[0].1;
            let tier_size = plan.overrides().len() / fan_out.max(1);
            Ok(ClientUpdate {
                params,
                num_samples: state.shard.len(),
                fi: Some(fi),
                plan: Some(plan),
                tier_size,
            })
        }
    }
}

/// Weighted average with `p_i = n_i / sum(n)`, summed in slice order. The
/// round loop presents updates in ascending client id, which fixes the
/// floating-point summation order and makes aggregation reproducible.
pub fn aggregate(updates: &[(ModelParams, usize)]) -> Result<ModelParams> {
    let Some((first, _)) = updates.first() else {
        return usage_err("cannot aggregate an empty update list");
    };
    let shapes = first.shapes();
    let total: usize = updates.iter().map(|(_, n)| n).sum();
    if total == 0 {
        return usage_err("total sample count is zero");
    }
    let mut out = ModelParams {
        layers: first
            .layers
            .iter()
            .map(|l| crate::nn::Layer {
                weights: crate::matrix::Matrix::zeros(l.weights.rows(), l.weights.cols()),
                bias: alloc::vec![0.0; l.bias.len()],
            })
            .collect(),
    };
    for (params, n) in updates {
        if params.shapes() != shapes {
            return dim_err("inconsistent shapes in aggregation");
        }
        let p = *n as f64 / total as f64;
        for (acc, l) in out.layers.iter_mut().zip(&params.layers) {
            for (o, &v) in acc.weights.as_mut_slice().iter_mut().zip(l.weights.as_slice()) {
                *o += p * v;
            }
            for (o, &v) in acc.bias.iter_mut().zip(&l.bias) {
                *o += p * v;
            }
        }
    }
    Ok(out)
}

const STREAM_TRAIN: u64 = 0x54_52_41_4E;
const STREAM_NOISE: u64 = 0x4E_4F_49_53;
