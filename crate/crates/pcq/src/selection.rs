//! Per-frame dynamic model selection: assign training frames to their best
//! counter configuration, estimate each model's descriptor center with a
//! concentration-bound confidence, and pick a counter for new frames by
//! confidence-adjusted distance.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;
use crate::partition::{infer_with_overlap, CounterConfig};
use crate::peaks::{count_from_heatmap, ThresholdPolicy};

/// Activation level at which a cell counts as occupied for the descriptor.
pub const OCCUPANCY_LEVEL: f64 = 0.1;

/// Cheap deterministic frame descriptor: per-class counts from the reference
/// counter (single region, fixed threshold), then total peak count, occupied
/// cell fraction of the max-over-channels map at 0.1, and mean activation.
/// Length is K + 3.
pub fn frame_descriptor(hm: &Heatmap, fixed_t: f64) -> Result<Vec<f64>> {
    let (counts, _) = count_from_heatmap(hm, &ThresholdPolicy::fixed(fixed_t))?;
    let mut f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    f.push(counts.iter().sum::<usize>() as f64);
    let occupancy = hm
        .max_over_channels()
        .iter()
        .filter(|&&v| v >= OCCUPANCY_LEVEL)
        .count() as f64
        / (hm.width() * hm.height()) as f64;
    f.push(occupancy);
    let mean = hm.values().iter().sum::<f64>() / hm.values().len() as f64;
    f.push(mean);
    Ok(f)
}

/// Componentwise emphasis; weights longer than the descriptor are an error,
/// shorter ones leave the tail unscaled.
pub fn apply_emphasis(descriptor: &mut [f64], weights: &[f64]) -> Result<()> {
    if weights.len() > descriptor.len() {
        return Err(Error::InvalidConfig(format!(
            "{} emphasis weights for a {}-component descriptor",
            weights.len(),
            descriptor.len()
        )));
    }
    for (d, w) in descriptor.iter_mut().zip(weights) {
        *d *= w;
    }
    Ok(())
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Assign each frame to the model with the best counting score on it.
///
/// Score is the negated L1 count error summed over classes; ties go to the
/// earlier model in the list. Returns per-model frame index sets (a partition
/// of 0..frames).
pub fn assign_frames(
    predictions: &[Heatmap],
    truth_counts: &[Vec<usize>],
    models: &[CounterConfig],
) -> Result<Vec<Vec<usize>>> {
    if predictions.len() != truth_counts.len() {
        return Err(Error::ShapeMismatch {
            expected: (truth_counts.len(), 0, 0),
            got: (predictions.len(), 0, 0),
        });
    }
    if models.is_empty() {
        return Err(Error::NoEligibleModel);
    }
    let winners: Vec<usize> = predictions
        .par_iter()
        .zip(truth_counts.par_iter())
        .map(|(hm, truth)| {
            let mut best_model = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for (j, cfg) in models.iter().enumerate() {
                let (counts, _) = infer_with_overlap(hm, cfg)?;
                let err: f64 = counts
                    .iter()
                    .zip(truth)
                    .map(|(&p, &t)| (p as f64 - t as f64).abs())
                    .sum();
                let score = -err;
                if score > best_score {
                    best_score = score;
                    best_model = j;
                }
            }
            Ok(best_model)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sets = vec![Vec::new(); models.len()];
    for (frame, model) in winners.into_iter().enumerate() {
        sets[model].push(frame);
    }
    Ok(sets)
}

/// Mean descriptor, scalar sample variance (mean squared Euclidean deviation),
/// and sample count of an assigned set.
pub fn estimate_center(descriptors: &[Vec<f64>]) -> Result<(Vec<f64>, f64, usize)> {
    let n = descriptors.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let dim = descriptors[0].len();
    let mut mean = vec![0.0; dim];
    for d in descriptors {
        for (m, v) in mean.iter_mut().zip(d) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let variance = descriptors
        .iter()
        .map(|d| {
            d.iter()
                .zip(&mean)
                .map(|(v, m)| (v - m) * (v - m))
                .sum::<f64>()
        })
        .sum::<f64>()
        / n as f64;
    Ok((mean, variance, n))
}

/// Concentration confidence exp(-n eps^2 / (2 xi^2)).
///
/// Zero variance is the perfect-concentration limit and maps to 0, which in
/// turn makes the adjusted distance of that model 0.
pub fn chernoff_confidence(n: usize, variance: f64, epsilon: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if epsilon <= 0.0 || epsilon.is_nan() {
        return Err(Error::InvalidConfig("epsilon must be > 0".into()));
    }
    if variance == 0.0 {
        return Ok(0.0);
    }
    Ok((-(n as f64) * epsilon * epsilon / (2.0 * variance)).exp())
}

/// One trained counter with its estimated descriptor center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCenter {
    pub config: CounterConfig,
    pub center: Vec<f64>,
    pub variance: f64,
    pub n: usize,
    pub confidence: f64,
}

/// Offline-built model registry used at serving time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub epsilon: f64,
    pub models: Vec<ModelCenter>,
    /// Configurations flagged out of selection because no frame chose them.
    #[serde(default)]
    pub excluded: Vec<CounterConfig>,
}

impl Registry {
    /// Run assignment and center estimation over a training set.
    pub fn build(
        predictions: &[Heatmap],
        truth_counts: &[Vec<usize>],
        models: &[CounterConfig],
        epsilon: f64,
        emphasis: Option<&[f64]>,
        fixed_t: f64,
    ) -> Result<Self> {
        let sets = assign_frames(predictions, truth_counts, models)?;
        let descriptors: Vec<Vec<f64>> = predictions
            .par_iter()
            .map(|hm| {
                let mut d = frame_descriptor(hm, fixed_t)?;
                if let Some(w) = emphasis {
                    apply_emphasis(&mut d, w)?;
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut centers = Vec::new();
        let mut excluded = Vec::new();
        for (cfg, set) in models.iter().zip(&sets) {
            if set.is_empty() {
                excluded.push(cfg.clone());
                continue;
            }
            let assigned: Vec<Vec<f64>> = set.iter().map(|&i| descriptors[i].clone()).collect();
            let (center, variance, n) = estimate_center(&assigned)?;
            let confidence = chernoff_confidence(n, variance, epsilon)?;
            centers.push(ModelCenter {
                config: cfg.clone(),
                center,
                variance,
                n,
                confidence,
            });
        }
        if centers.is_empty() {
            return Err(Error::NoEligibleModel);
        }
        Ok(Self {
            epsilon,
            models: centers,
            excluded,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Pick the model minimizing distance-to-center times confidence; ties go to
/// the earlier entry.
pub fn select_model<'a>(descriptor: &[f64], centers: &'a [ModelCenter]) -> Result<&'a ModelCenter> {
    if centers.is_empty() {
        return Err(Error::NoEligibleModel);
    }
    let mut best = &centers[0];
    let mut best_adjusted = f64::INFINITY;
    for m in centers {
        let adjusted = euclidean(descriptor, &m.center) * m.confidence;
        if adjusted < best_adjusted {
            best_adjusted = adjusted;
            best = m;
        }
    }
    Ok(best)
}
