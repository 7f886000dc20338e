//! Both feature-importance methods against the synthetic generator's
//! ground-truth informative mask, across several seeds.

use fedadp_core::data::{synth_gaussian_blobs, BlobSpec};
use fedadp_core::importance::{sensitivity_fi, variance_fi, ImportanceMap};
use fedadp_core::nn::{local_train, HyperParams, ModelParams};

fn mean(scores: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64
}

fn informative_beats_noise(fi: &ImportanceMap, informative: &[usize]) -> bool {
    let noise: Vec<usize> = (0..fi.len()).filter(|i| !informative.contains(i)).collect();
    mean(&fi.scores, informative) > mean(&fi.scores, &noise)
}

fn trained_on_blobs(seed: u64) -> (fedadp_core::data::Dataset, Vec<usize>, ModelParams, ModelParams) {
    let spec = BlobSpec {
        features: 8,
        classes: 2,
        informative: 2,
        samples: 240,
        separation: 6.0,
    };
    let (ds, informative) = synth_gaussian_blobs(&spec, seed).unwrap();
    let shard: Vec<usize> = (0..ds.len()).collect();
    let global = ModelParams::init_glorot(&[8, 16, 2], seed ^ 0xF00D).unwrap();
    let hp = HyperParams {
        local_epochs: 5,
        learning_rate: 0.3,
        batch_size: 16,
        hidden_width: 16,
        clip_norm: 50.0,
    };
    let trained = local_train(&global, &ds, &shard, &hp, seed ^ 0xBEEF).unwrap();
    (ds, informative, global, trained)
}

#[test]
fn variance_fi_ranks_informative_features_higher() {
    let mut wins = 0;
    for seed in 1..=5u64 {
        let (_, informative, global, trained) = trained_on_blobs(seed);
        let fi = variance_fi(&trained, &global, 0, 0).unwrap();
        if informative_beats_noise(&fi, &informative) {
            wins += 1;
        }
    }
    assert!(wins >= 4, "variance FI won on {wins}/5 seeds");
}

#[test]
fn sensitivity_fi_ranks_informative_features_higher() {
    let mut wins = 0;
    for seed in 1..=5u64 {
        let (ds, informative, _, trained) = trained_on_blobs(seed);
        let shard: Vec<usize> = (0..ds.len()).collect();
        // probe at an expected-|N(0, sigma)| magnitude large enough to move a
        // trained model's decisions
        let probe = fedadp_core::importance::probe_magnitude(3.0);
        let fi = sensitivity_fi(&trained, &ds, &shard, probe, 0, 0).unwrap();
        if informative_beats_noise(&fi, &informative) {
            wins += 1;
        }
    }
    assert!(wins >= 4, "sensitivity FI won on {wins}/5 seeds");
}

#[test]
fn blob_classifier_reaches_high_accuracy_at_wide_separation() {
    let spec = BlobSpec {
        features: 2,
        classes: 2,
        informative: 2,
        samples: 200,
        separation: 10.0,
    };
    let (ds, _) = synth_gaussian_blobs(&spec, 3).unwrap();
    let shard: Vec<usize> = (0..ds.len()).collect();
    let global = ModelParams::init_glorot(&[2, 8, 2], 4).unwrap();
    let hp = HyperParams {
        local_epochs: 40,
        learning_rate: 0.5,
        batch_size: 16,
        hidden_width: 8,
        clip_norm: 50.0,
    };
    let trained = local_train(&global, &ds, &shard, &hp, 5).unwrap();
    assert!(fedadp_core::nn::evaluate(&trained, &ds).unwrap() >= 0.99);
}
