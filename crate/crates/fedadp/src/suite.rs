//! Named experiment presets: the uniform-noise sweep and the adaptive tier
//! comparisons, each a family of curves sharing a dataset and seed.

use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::experiment::run_experiment;
use crate::{AppError, Result};

pub const PRESETS: [&str; 4] = [
    "fig3-uniform-sweep",
    "fig5-tier20",
    "fig6-tier50-80",
    "fig7-sensitivity-method",
];

fn mnist_images() -> PathBuf {
    std::env::var_os("FEDADP_MNIST_IMAGES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist-images-idx3-ubyte"))
}

fn mnist_labels() -> PathBuf {
    std::env::var_os("FEDADP_MNIST_LABELS")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data/mnist-labels-idx1-ubyte"))
}

/// The shared MNIST base every preset curve starts from.
fn base(name: &str) -> ExperimentConfig {
    let text = format!(
        "name = \"{name}\"\ndataset = \"mnist\"\nmnist_images = {:?}\nmnist_labels = {:?}\n",
        mnist_images(),
        mnist_labels()
    );
    ExperimentConfig::parse(&text).expect("preset base must be valid")
}

fn adaptive(name: &str, method: &str, fraction: f64, end: &str) -> ExperimentConfig {
    let mut cfg = base(name);
    cfg.privacy = String::from("adaptive");
    cfg.fi_method = Some(String::from(method));
    cfg.tier_fraction = Some(fraction);
    cfg.tier_end = Some(String::from(end));
    cfg.epsilon_strong = Some(0.5);
    cfg.epsilon_weak = Some(10.0);
    cfg
}

/// The curves of one preset, in plot order.
pub fn preset(name: &str) -> Result<Vec<ExperimentConfig>> {
    match name {
        "fig3-uniform-sweep" => {
            let mut curves = vec![base("non-private")];
            for eps in [10.0, 5.0, 1.0, 0.5] {
                let mut cfg = base(&format!("eps{eps}"));
                cfg.privacy = String::from("uniform");
                cfg.sigma = Some(0.01 / eps);
                curves.push(cfg);
            }
            Ok(curves)
        }
        "fig5-tier20" => Ok(vec![
            adaptive("low20", "variance", 0.2, "lowest"),
            adaptive("low40", "variance", 0.4, "lowest"),
            adaptive("high20", "variance", 0.2, "highest"),
        ]),
        "fig6-tier50-80" => Ok(vec![
            adaptive("low50", "variance", 0.5, "lowest"),
            adaptive("low80", "variance", 0.8, "lowest"),
            adaptive("high50", "variance", 0.5, "highest"),
            adaptive("high80", "variance", 0.8, "highest"),
        ]),
        "fig7-sensitivity-method" => Ok(vec![
            adaptive("low20", "sensitivity", 0.2, "lowest"),
            adaptive("low40", "sensitivity", 0.4, "lowest"),
            adaptive("high20", "sensitivity", 0.2, "highest"),
        ]),
        other => Err(AppError::Usage(format!(
            "unknown preset \"{other}\"; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

/// Run each named preset: one subdirectory per curve, plus a combined
/// summary CSV per preset.
pub fn run_suite(names: &[String], out_dir: &Path, seed: Option<u64>) -> Result<()> {
    // reject unknown names before any work starts
    let plans: Vec<(String, Vec<ExperimentConfig>)> = names
        .iter()
        .map(|n| preset(n).map(|curves| (n.clone(), curves)))
        .collect::<Result<_>>()?;

    for (preset_name, curves) in plans {
        let preset_dir = out_dir.join(&preset_name);
        let mut summary = String::from("curve,round,test_accuracy\n");
        for mut cfg in curves {
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let curve_dir = preset_dir.join(&cfg.name);
            let out = run_experiment(&cfg, &curve_dir)?;
            for row in &out.metrics {
                summary.push_str(&format!(
                    "{},{},{}\n",
                    cfg.name, row.round, row.test_accuracy
                ));
            }
            println!(
                "{preset_name}/{}: final accuracy {:.4}",
                cfg.name, out.final_accuracy
            );
        }
        fs::create_dir_all(&preset_dir)?;
        fs::write(preset_dir.join("summary.csv"), summary)?;
    }
    Ok(())
}
