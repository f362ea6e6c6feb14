//! Supervision arithmetic: focal heatmap loss, L1 count loss, weighted
//! partition count loss, and a finite-difference gradient checker.

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;
use crate::partition::partition_weights;

/// Probability clamp guarding log(0).
pub const PROB_EPS: f64 = 1e-6;

/// Focal loss value with its analytic gradient.
#[derive(Debug, Clone)]
pub struct FocalLoss {
    pub loss: f64,
    /// d(loss)/d(pred) per cell, same layout as the prediction values.
    pub grad: Vec<f64>,
    /// Number of positive cells (target exactly 1.0) used for normalization.
    pub n_pos: usize,
}

/// Combined per-frame supervision report.
#[derive(Debug, Clone, Copy)]
pub struct LossReport {
    pub l_hm: f64,
    pub l_count: f64,
    pub total: f64,
    pub n_pos: usize,
}

impl LossReport {
    pub fn new(l_hm: f64, l_count: f64, n_pos: usize) -> Self {
        Self {
            l_hm,
            l_count,
            total: l_hm + l_count,
            n_pos,
        }
    }
}

/// Focal loss over raw value slices.
///
/// Positive cells (target exactly 1) contribute -(1-p)^alpha * ln p; every
/// other cell contributes -(1-t)^alpha * ln(1-p), where p is the prediction
/// clamped to [eps, 1-eps]. The sum is normalized by max(#positives, 1).
/// The gradient is taken w.r.t. the clamped prediction, so it is exact away
/// from the clamp boundary.
pub fn focal_loss_values(pred: &[f64], target: &[f64], alpha: f64) -> Result<FocalLoss> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch {
            expected: (1, 1, target.len()),
            got: (1, 1, pred.len()),
        });
    }
    let n_pos = target.iter().filter(|&&t| t == 1.0).count();
    let norm = n_pos.max(1) as f64;
    let mut sum = 0.0;
    let mut grad = vec![0.0; pred.len()];
    for (i, (&p_raw, &t)) in pred.iter().zip(target).enumerate() {
        let p = p_raw.clamp(PROB_EPS, 1.0 - PROB_EPS);
        if t == 1.0 {
            let one_minus_p = 1.0 - p;
            sum -= one_minus_p.powf(alpha) * p.ln();
            grad[i] = (alpha * one_minus_p.powf(alpha - 1.0) * p.ln()
                - one_minus_p.powf(alpha) / p)
                / norm;
        } else {
            let weight = (1.0 - t).powf(alpha);
            sum -= weight * (1.0 - p).ln();
            grad[i] = weight / (1.0 - p) / norm;
        }
    }
    Ok(FocalLoss {
        loss: sum / norm,
        grad,
        n_pos,
    })
}

/// Focal loss between two heatmaps of identical shape.
pub fn focal_loss(pred: &Heatmap, target: &Heatmap, alpha: f64) -> Result<FocalLoss> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            expected: target.shape(),
            got: pred.shape(),
        });
    }
    focal_loss_values(pred.values(), target.values(), alpha)
}

/// Mean absolute count error over classes and frames. Both slices hold one
/// per-class count vector per frame.
pub fn count_l1(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: (truth.len(), 0, 0),
            got: (pred.len(), 0, 0),
        });
    }
    let classes = truth[0].len();
    let mut sum = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if p.len() != classes || t.len() != classes {
            return Err(Error::ShapeMismatch {
                expected: (truth.len(), classes, 0),
                got: (pred.len(), p.len(), 0),
            });
        }
        for (&a, &b) in p.iter().zip(t) {
            sum += (a as f64 - b as f64).abs();
        }
    }
    Ok(sum / (classes as f64 * pred.len() as f64))
}

/// Weighted partition count loss: dot product of the per-region weights with
/// the per-region losses.
pub fn weighted_count_loss(per_region_losses: &[f64], per_region_counts: &[usize]) -> Result<f64> {
    if per_region_losses.len() != per_region_counts.len() {
        return Err(Error::ShapeMismatch {
            expected: (per_region_counts.len(), 0, 0),
            got: (per_region_losses.len(), 0, 0),
        });
    }
    let weights = partition_weights(per_region_counts);
    Ok(weights
        .iter()
        .zip(per_region_losses)
        .map(|(w, l)| w * l)
        .sum())
}

/// Max relative error between an analytic gradient and central finite
/// differences of `f` at `point`.
pub fn grad_check<F>(f: F, point: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut worst = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + h;
        let up = f(&probe);
        probe[i] = point[i] - h;
        let down = f(&probe);
        probe[i] = point[i];
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(1e-8);
        worst = worst.max(rel);
    }
    worst
}
