//! Datasets, deterministic splits, IID partitioning, and a synthetic
//! blob generator with a ground-truth informative-feature mask.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{usage_err, Result};
use crate::matrix::Matrix;
use crate::rng::{derive, SeqRng};

/// Feature matrix (`n x m`, values in `[0,1]`) plus class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub name: String,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, name: String) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return usage_err("inputs and labels differ in length");
        }
        Ok(Dataset { inputs, labels, name })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.inputs.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map(|&m| m + 1).unwrap_or(0)
    }

    /// Row-copy of the given indices, as a new dataset.
    pub fn select(&self, indices: &[usize], name: String) -> Result<Dataset> {
        let mut inputs = Matrix::zeros(indices.len(), self.inputs.cols());
        let mut labels = Vec::with_capacity(indices.len());
        for (r, &i) in indices.iter().enumerate() {
            if i >= self.len() {
                return usage_err("selection index out of range");
            }
            inputs.row_mut(r).copy_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(inputs, labels, name)
    }
}

/// Disjoint, exhaustive index shards over a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub shards: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.shards.len()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        self.shards.iter().map(|s| s.len()).collect()
    }

    pub fn total(&self) -> usize {
        self.shards.iter().map(|s| s.len()).sum()
    }

    /// `m`: the minimum shard size, used by the DP sensitivity bound.
    pub fn min_shard(&self) -> usize {
        self.shards.iter().map(|s| s.len()).min().unwrap_or(0)
    }
}

/// Deterministic shuffle of the whole dataset, keep the first `take` rows,
/// split off `round(take * test_fraction)` of them for testing.
pub fn subset_split(
    ds: &Dataset,
    take: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if take > ds.len() {
        return usage_err("take exceeds dataset size");
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return usage_err("test_fraction must be in (0,1)");
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    SeqRng::new(derive(seed, STREAM_SPLIT)).shuffle(&mut order);
    let taken = &order[..take];
    let n_test = libm::round(take as f64 * test_fraction) as usize;
    let test = ds.select(&taken[..n_test], String::from("test"))?;
    let train = ds.select(&taken[n_test..], String::from("train"))?;
    Ok((train, test))
}

/// IID partition: shuffled indices dealt round-robin to `n_clients` shards,
/// so shard sizes differ by at most one.
pub fn partition_iid(train: &Dataset, n_clients: usize, seed: u64) -> Result<Partition> {
    if n_clients == 0 {
        return usage_err("cannot partition across zero clients");
    }
    if n_clients > train.len() {
        return usage_err("more clients than training samples");
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    SeqRng::new(derive(seed, STREAM_PARTITION)).shuffle(&mut order);
    let mut shards = vec![Vec::new(); n_clients];
    for (k, idx) in order.into_iter().enumerate() {
        shards[k % n_clients].push(idx);
    }
    Ok(Partition { shards })
}

/// Synthetic class-conditional Gaussian blobs.
///
/// Only the first `informative` coordinates carry class signal; the rest are
/// identically distributed low-magnitude noise for every class, mirroring
/// the near-zero irrelevant pixels of image data. The informative set
/// `{0, .., informative-1}` is the ground-truth oracle the importance tests
/// rank against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobSpec {
    pub features: usize,
    pub classes: usize,
    pub informative: usize,
    pub samples: usize,
    /// Distance between class centers in units of the within-cluster std.
    pub separation: f64,
}

pub fn synth_gaussian_blobs(spec: &BlobSpec, seed: u64) -> Result<(Dataset, Vec<usize>)> {
    if spec.features == 0 || spec.classes < 2 || spec.samples == 0 {
        return usage_err("blob spec needs features >= 1, classes >= 2, samples >= 1");
    }
    if spec.informative == 0 || spec.informative > spec.features {
        return usage_err("informative count out of range");
    }
    if !(spec.separation > 0.0) {
        return usage_err("separation must be > 0");
    }

    // Class centers: evenly spaced on a line (one informative coordinate) or
    // on a circle traced through all informative coordinates with distinct
    // phases, which keeps every pair of centers apart and every informative
    // coordinate class-dependent.
    let radius = 0.35;
    let mut centers = vec![vec![0.5; spec.informative]; spec.classes];
    for (c, center) in centers.iter_mut().enumerate() {
        if spec.informative == 1 {
            center[0] = 0.5 - radius + 2.0 * radius * c as f64 / (spec.classes - 1) as f64;
        } else {
            let angle = 2.0 * core::f64::consts::PI * c as f64 / spec.classes as f64;
            for (j, v) in center.iter_mut().enumerate() {
                let phase = core::f64::consts::PI * j as f64 / spec.informative as f64;
                *v = 0.5 + radius * libm::cos(angle + phase);
            }
        }
    }
    let mut min_dist = f64::INFINITY;
    for a in 0..spec.classes {
        for b in (a + 1)..spec.classes {
            let mut sq = 0.0;
            for j in 0..spec.informative {
                let d = centers[a][j] - centers[b][j];
                sq += d * d;
            }
            min_dist = min_dist.min(libm::sqrt(sq));
        }
    }
    let sigma = (min_dist / spec.separation).min(0.25);

    let mut rng = SeqRng::new(derive(seed, STREAM_BLOBS));
    let mut inputs = Matrix::zeros(spec.samples, spec.features);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let c = i % spec.classes;
        let row = inputs.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            let mean = if j < spec.informative { centers[c][j] } else { 0.05 };
            *v = (mean + sigma * rng.next_normal()).clamp(0.0, 1.0);
        }
        labels.push(c);
    }
    let ds = Dataset::new(inputs, labels, String::from("synthetic-blobs"))?;
    Ok((ds, (0..spec.informative).collect()))
}

const STREAM_SPLIT: u64 = 0x53_50_4C_54;
const STREAM_PARTITION: u64 = 0x50_41_52_54;
const STREAM_BLOBS: u64 = 0x42_4C_4F_42;

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::string::ToString;

    fn toy(n: usize) -> Dataset {
        let mut inputs = Matrix::zeros(n, 3);
        for i in 0..n {
            inputs.row_mut(i).copy_from_slice(&[i as f64 / n as f64, 0.5, 0.0]);
        }
        Dataset::new(inputs, (0..n).map(|i| i % 2).collect(), "toy".to_string()).unwrap()
    }

    #[test]
    fn subset_split_sizes() {
        let ds = toy(10);
        let (train, test) = subset_split(&ds, 10, 0.2, 1).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn subset_split_is_seed_deterministic() {
        let ds = toy(50);
        let (a1, b1) = subset_split(&ds, 30, 0.2, 9).unwrap();
        let (a2, b2) = subset_split(&ds, 30, 0.2, 9).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
    }

    #[test]
    fn subset_split_rejects_oversized_take() {
        let ds = toy(5);
        assert!(subset_split(&ds, 6, 0.2, 0).is_err());
    }

    #[test]
    fn partition_sizes_differ_by_at_most_one() {
        let ds = toy(10);
        let p = partition_iid(&ds, 3, 0).unwrap();
        let mut sizes = p.shard_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        assert_eq!(p.min_shard(), 3);
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let ds = toy(53);
        let p = partition_iid(&ds, 7, 3).unwrap();
        let mut all: Vec<usize> = p.shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..53).collect::<Vec<_>>());
        let set: BTreeSet<usize> = all.into_iter().collect();
        assert_eq!(set.len(), 53);
    }

    #[test]
    fn partition_rejects_zero_clients() {
        let ds = toy(4);
        assert!(partition_iid(&ds, 0, 0).is_err());
    }

    #[test]
    fn blobs_are_seed_deterministic_and_in_range() {
        let spec = BlobSpec {
            features: 8,
            classes: 2,
            informative: 2,
            samples: 64,
            separation: 10.0,
        };
        let (a, inf) = synth_gaussian_blobs(&spec, 11).unwrap();
        let (b, _) = synth_gaussian_blobs(&spec, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(inf, vec![0, 1]);
        assert!(a.inputs.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn noise_features_are_class_independent() {
        let spec = BlobSpec {
            features: 8,
            classes: 2,
            informative: 2,
            samples: 2000,
            separation: 10.0,
        };
        let (ds, _) = synth_gaussian_blobs(&spec, 4).unwrap();
        // Per-class means of a noise feature should coincide.
        for feat in 2..8 {
            let mut sums = [0.0f64; 2];
            let mut counts = [0usize; 2];
            for i in 0..ds.len() {
                sums[ds.labels[i]] += ds.inputs.get(i, feat);
                counts[ds.labels[i]] += 1;
            }
            let diff = (sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64).abs();
            assert!(diff < 0.02, "feature {feat} class-mean gap {diff}");
        }
    }
}
