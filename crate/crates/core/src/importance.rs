//! Per-input-feature relative importance.
//!
//! Two methods: a probing method that measures how much local accuracy moves
//! when a constant is added to all first-layer weights of one feature, and a
//! variance method that scores each feature by how much its first-layer
//! weights changed between the last global model and the new local one.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{dim_err, usage_err, Result};
use crate::matrix::Matrix;
use crate::nn::{argmax_row, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiMethod {
    Sensitivity,
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierEnd {
    Lowest,
    Highest,
}

/// Nonnegative relative importance scores, one per input feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceMap {
    pub scores: Vec<f64>,
    pub method: FiMethod,
    pub round: usize,
    pub client: usize,
}

impl ImportanceMap {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Probe magnitude matching the expected absolute value of a centered
/// Gaussian with std `sigma`: `sigma * sqrt(2/pi)`.
pub fn probe_magnitude(sigma: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    sigma * libm::sqrt(2.0 / core::f64::consts::PI)
}

/// Sensitivity-based importance: for each feature `p`, add `probe_r` to all
/// first-layer weights in row `p`, re-evaluate accuracy on the client's own
/// shard, and score the feature by `|acc_plus - acc_ref|`. The input model
/// is not modified.
///
/// Probing row `p` perturbs only the first layer's pre-activations, and by
/// the same amount `probe_r * x[p]` for every hidden unit, so the shard's
/// first-layer pre-activations are computed once and each probe re-runs only
/// the layers above. Predictions agree with rebuilding the probed model up
/// to floating-point roundoff.
pub fn sensitivity_fi(
    local: &ModelParams,
    shard: &Dataset,
    shard_indices: &[usize],
    probe_r: f64,
    round: usize,
    client: usize,
) -> Result<ImportanceMap> {
    if !(probe_r > 0.0) {
        return usage_err("probe_r must be > 0");
    }
    if shard_indices.is_empty() {
        return usage_err("shard is empty");
    }
    local.validate()?;
    let m = local.num_features();
    if shard.num_features() != m {
        return dim_err("shard feature count does not match model");
    }

    let n = shard_indices.len();
    let inputs = {
        let mut x = Matrix::zeros(n, m);
        for (r, &i) in shard_indices.iter().enumerate() {
            x.row_mut(r).copy_from_slice(shard.inputs.row(i));
        }
        x
    };
    let labels: Vec<usize> = shard_indices.iter().map(|&i| shard.labels[i]).collect();

    // First-layer pre-activations, shared by the reference pass and probes.
    let first = &local.layers[0];
    let mut z1 = inputs.matmul(&first.weights)?;
    for r in 0..n {
        for (v, &b) in z1.row_mut(r).iter_mut().zip(&first.bias) {
            *v += b;
        }
    }

    let predict_from_z1 = |z1_probe: &Matrix| -> Result<usize> {
        let mut act = z1_probe.clone();
        for v in act.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        for (k, layer) in local.layers.iter().enumerate().skip(1) {
            let mut z = act.matmul(&layer.weights)?;
            for r in 0..z.rows() {
                for (v, &b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            if k + 1 < local.layers.len() {
                for v in z.as_mut_slice() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            act = z;
        }
        let mut correct = 0usize;
        for (r, &label) in labels.iter().enumerate() {
            if argmax_row(act.row(r)) == label {
                correct += 1;
            }
        }
        Ok(correct)
    };

    let correct_ref = predict_from_z1(&z1)?;
    let acc_ref = correct_ref as f64 / n as f64;

    let q = first.weights.cols();
    let mut scores = vec![0.0; m];
    let mut z1_probe = Matrix::zeros(n, q);
    for (p, score) in scores.iter_mut().enumerate() {
        z1_probe.as_mut_slice().copy_from_slice(z1.as_slice());
        for r in 0..n {
            let shift = probe_r * inputs.get(r, p);
            if shift != 0.0 {
                for v in z1_probe.row_mut(r) {
                    *v += shift;
                }
            }
        }
        let correct_plus = predict_from_z1(&z1_probe)?;
        *score = (correct_plus as f64 / n as f64 - acc_ref).abs();
    }

    Ok(ImportanceMap {
        scores,
        method: FiMethod::Sensitivity,
        round,
        client,
    })
}

/// Two-point population variance of `{a, b}`: `(a-b)^2 / 4`.
#[inline]
fn var2(a: f64, b: f64) -> f64 {
    let d = a - b;
    d * d / 4.0
}

/// Variance-based importance over first-layer weights:
/// `score_i = sum_j var2(local_ij, global_ij) * |local_ij|`.
///
/// The variance of the two-point history {last global, new local} is
/// `(a-b)^2/4`; any positive multiple of `(a-b)^2` yields identical
/// rankings, so the constant is a documented convention, not a tunable.
/// `|w|` uses the new local weight, the quantity about to be transmitted.
pub fn variance_fi(
    local: &ModelParams,
    global_prev: &ModelParams,
    round: usize,
    client: usize,
) -> Result<ImportanceMap> {
    if local.shapes() != global_prev.shapes() {
        return dim_err("local and global model shapes differ");
    }
    let lw = &local.layers[0].weights;
    let gw = &global_prev.layers[0].weights;
    let m = lw.rows();
    let mut scores = Vec::with_capacity(m);
    for i in 0..m {
        let mut acc = 0.0;
        for (&l, &g) in lw.row(i).iter().zip(gw.row(i)) {
            acc += var2(l, g) * libm::fabs(l);
        }
        scores.push(acc);
    }
    Ok(ImportanceMap {
        scores,
        method: FiMethod::Variance,
        round,
        client,
    })
}

/// The `floor(fraction * m)` feature indices with the smallest (`Lowest`) or
/// largest (`Highest`) scores. Ties break toward the lower feature index.
/// The returned indices are sorted ascending.
pub fn select_tiers(fi: &ImportanceMap, fraction: f64, end: TierEnd) -> Vec<usize> {
    debug_assert!(fraction > 0.0 && fraction <= 1.0);
    let m = fi.scores.len();
    let k = ((fraction * m as f64) as usize).min(m);
    let mut order: Vec<usize> = (0..m).collect();
    match end {
        TierEnd::Lowest => order.sort_by(|&a, &b| {
            fi.scores[a]
                .partial_cmp(&fi.scores[b])
                .expect("importance scores are finite")
                .then(a.cmp(&b))
        }),
        TierEnd::Highest => order.sort_by(|&a, &b| {
            fi.scores[b]
                .partial_cmp(&fi.scores[a])
                .expect("importance scores are finite")
                .then(a.cmp(&b))
        }),
    }
    let mut selected: Vec<usize> = order.into_iter().take(k).collect();
    selected.sort_unstable();
    selected
}
