//! The round loop: split and partition data, run clients in parallel below
//! the federation barrier, aggregate, evaluate, and emit artifacts
//! (metrics CSV, importance CSV/PGM, re-runnable manifest).

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use fedadp_core::data::{partition_iid, subset_split};
use fedadp_core::dp::{downlink_sigma, perturb, NoisePlan};
use fedadp_core::federation::{aggregate, client_update, ClientPrivacy, ClientState};
use fedadp_core::nn::{evaluate, ModelParams};
use fedadp_core::rng::{derive, derive2};

use crate::config::ExperimentConfig;
use crate::heatmap::{square_side, write_fi_csv, write_pgm};
use crate::{AppError, Result};

const STREAM_MODEL: u64 = 0x4D_4F_44_4C;
const STREAM_CLIENT: u64 = 0x43_4C_4E_54;
const STREAM_ROUND: u64 = 0x52_4F_55_4E;
const STREAM_DOWNLINK: u64 = 0x44_4F_57_4E;

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub test_accuracy: f64,
    /// Noise std on non-tier parameters (0 when privacy is off).
    pub sigma_default: f64,
    /// Noise std on the selected tier; `None` outside adaptive mode.
    pub sigma_override: Option<f64>,
    /// Number of per-coordinate overrides in each client's plan.
    pub tier_overrides: usize,
}

pub const METRICS_HEADER: &str = "round,test_accuracy,sigma_default,sigma_override,tier_overrides";

pub fn metrics_csv(rows: &[RoundMetrics]) -> String {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for r in rows {
        let over = r.sigma_override.map(|s| s.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.round, r.test_accuracy, r.sigma_default, over, r.tier_overrides
        ));
    }
    text
}

/// Everything a finished run reports back to the caller.
#[derive(Debug)]
pub struct RunOutput {
    pub final_accuracy: f64,
    pub metrics: Vec<RoundMetrics>,
    pub metrics_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// Execute one configured experiment, writing artifacts under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;

    let full = cfg.load_dataset()?;
    let take = cfg.take.unwrap_or(full.len());
    if take > full.len() {
        return Err(AppError::Config(format!(
            "take = {take} exceeds dataset size {}",
            full.len()
        )));
    }
    let (train, test) = subset_split(&full, take, cfg.test_fraction, cfg.seed)?;
    let partition = partition_iid(&train, cfg.clients, cfg.seed)?;
    let privacy = cfg.client_privacy(partition.min_shard())?;

    let states: Vec<ClientState> = partition
        .shards
        .iter()
        .enumerate()
        .map(|(id, shard)| ClientState {
            id,
            shard: shard.clone(),
            seed: derive2(cfg.seed, STREAM_CLIENT, id as u64),
        })
        .collect();

    let hp = cfg.hyper();
    let sizes = [full.num_features(), cfg.hidden, full.num_classes()];
    let mut global = ModelParams::init_glorot(&sizes, derive(cfg.seed, STREAM_MODEL))?;

    let mut metrics = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let round_seed = derive2(cfg.seed, STREAM_ROUND, round as u64);
        let updates = states
            .par_iter()
            .map(|s| client_update(&global, &train, s, &hp, &privacy, round, round_seed))
            .collect::<std::result::Result<Vec<_>, _>>()?;

        emit_fi_artifacts(cfg, out_dir, round, &updates)?;

        // ascending client id fixes the floating-point summation order
        let weighted: Vec<(ModelParams, usize)> = updates
            .iter()
            .map(|u| (u.params.clone(), u.num_samples))
            .collect();
        global = aggregate(&weighted)?;

        if cfg.downlink_noise {
            if let Some(eps) = downlink_epsilon(cfg) {
                let pp = cfg.privacy_params(partition.min_shard()).with_epsilon(eps);
                let sigma = downlink_sigma(&pp)?;
                if sigma > 0.0 {
                    let plan = NoisePlan::uniform(sigma)?;
                    let seed = derive2(cfg.seed, STREAM_DOWNLINK, round as u64);
                    global = perturb(&global, &plan, seed)?;
                }
            }
        }

        let accuracy = evaluate(&global, &test)?;
        metrics.push(round_row(round, accuracy, &privacy, &updates));
    }

    let final_accuracy = match metrics.last() {
        Some(m) => m.test_accuracy,
        None => evaluate(&global, &test)?,
    };

    let metrics_path = out_dir.join("metrics.csv");
    fs::write(&metrics_path, metrics_csv(&metrics))?;
    let manifest_path = out_dir.join("manifest.toml");
    fs::write(&manifest_path, cfg.to_manifest()?)?;

    Ok(RunOutput { final_accuracy, metrics, metrics_path, manifest_path })
}

/// The experiment-wide privacy level used for downlink calibration: the
/// uniform epsilon, or the weak tier's epsilon under an adaptive policy.
fn downlink_epsilon(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.privacy.as_str() {
        "uniform" => cfg.epsilon,
        "adaptive" => cfg.epsilon_weak,
        _ => None,
    }
}

fn round_row(
    round: usize,
    accuracy: f64,
    privacy: &ClientPrivacy,
    updates: &[fedadp_core::federation::ClientUpdate],
) -> RoundMetrics {
    let plan = updates.first().and_then(|u| u.plan.as_ref());
    let (sigma_default, sigma_override) = match (privacy, plan) {
        (ClientPrivacy::None, _) => (0.0, None),
        (_, Some(p)) => {
            let over = p.overrides().values().next().copied();
            (p.default_sigma(), over)
        }
        (_, None) => (0.0, None),
    };
    let tier_overrides = plan.map(|p| p.overrides().len()).unwrap_or(0);
    RoundMetrics { round, test_accuracy: accuracy, sigma_default, sigma_override, tier_overrides }
}

/// At designated rounds, write the designated client's importance map as
/// CSV, plus a PGM heatmap when the feature count is a perfect square.
fn emit_fi_artifacts(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    round: usize,
    updates: &[fedadp_core::federation::ClientUpdate],
) -> Result<()> {
    if !cfg.heatmap_rounds.contains(&round) {
        return Ok(());
    }
    let Some(update) = updates.get(cfg.heatmap_client) else {
        return Ok(());
    };
    let Some(fi) = update.fi.as_ref() else {
        return Ok(());
    };
    let stem = format!("fi-client{}-round{}", cfg.heatmap_client, round);
    write_fi_csv(&out_dir.join(format!("{stem}.csv")), &fi.scores)?;
    if let Some(side) = square_side(fi.scores.len()) {
        write_pgm(&out_dir.join(format!("{stem}.pgm")), &fi.scores, side, side)?;
    }
    Ok(())
}
