//! Simulated prediction error: a seeded stand-in for a trained network.
//!
//! Stage order is fixed so that seeded runs are reproducible:
//! drop -> inject -> blur -> seam perturbation -> additive -> clamp.
//! Each stage draws from its own derived sub-seed, so changing one stage's
//! parameters never shifts another stage's random stream.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::heatmap::{ClassCatalog, FrameAnnotation, Heatmap, ObjectCenter};
use crate::partition::partition_regions;
use crate::rng::{derive_seed, SplitMix64};

/// Vertical/horizontal grid lines near which activations are attenuated,
/// mimicking the seam artifacts of a partition-trained model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeamLines {
    /// x coordinates of vertical seams.
    pub xs: Vec<usize>,
    /// y coordinates of horizontal seams.
    pub ys: Vec<usize>,
    /// Attenuation reaches this many cells to each side of a seam.
    pub halfwidth: usize,
}

impl SeamLines {
    /// Interior boundaries of the `pt`-way partition of a width x height grid.
    pub fn for_partition(width: usize, height: usize, pt: usize) -> Result<Self> {
        let regions = partition_regions(width, height, pt)?;
        let mut xs: Vec<usize> = regions
            .iter()
            .map(|r| r.x_start)
            .filter(|&x| x > 0)
            .collect();
        let mut ys: Vec<usize> = regions
            .iter()
            .map(|r| r.y_start)
            .filter(|&y| y > 0)
            .collect();
        xs.sort_unstable();
        xs.dedup();
        ys.sort_unstable();
        ys.dedup();
        Ok(Self {
            xs,
            ys,
            halfwidth: 2,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty() && self.ys.is_empty()
    }

    /// 1.0 on a seam, falling linearly to 0.0 just past `halfwidth`.
    fn falloff(&self, x: usize, y: usize) -> f64 {
        let hw = self.halfwidth as f64;
        let mut best = 0.0f64;
        for &sx in &self.xs {
            let d = (x as f64 - sx as f64).abs();
            if d <= hw {
                best = best.max(1.0 - d / (hw + 1.0));
            }
        }
        for &sy in &self.ys {
            let d = (y as f64 - sy as f64).abs();
            if d <= hw {
                best = best.max(1.0 - d / (hw + 1.0));
            }
        }
        best
    }
}

/// Share of the seam bias spent on attenuation vs band-local jitter.
const SEAM_ATTEN_SHARE: f64 = 0.25;
const SEAM_JITTER_SHARE: f64 = 0.5;

/// Error model for one simulated prediction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseProfile {
    /// Gaussian blur sigma in cells; 0 disables.
    pub blur_sigma: f64,
    /// Per-cell uniform noise amplitude in [0, 1]; 0 disables.
    pub additive_noise: f64,
    /// Probability that an annotated center produces no response.
    pub drop_rate: f64,
    /// Probability, per class and frame, of one spurious peak.
    pub false_positive_rate: f64,
    /// Perturbation strength `b` near `seams`: band cells are attenuated by
    /// (1 - 0.25 b f) and jittered by a uniform +/- 0.5 b f term, where f is
    /// the seam falloff. This mimics the unstable partial responses of a
    /// partition-trained model where objects straddle its seams; 0 disables.
    pub boundary_split_bias: f64,
    pub seams: SeamLines,
    pub seed: u64,
}

impl NoiseProfile {
    /// All rates and amplitudes zero: `simulate_prediction` becomes identity.
    pub fn zero(seed: u64) -> Self {
        Self {
            blur_sigma: 0.0,
            additive_noise: 0.0,
            drop_rate: 0.0,
            false_positive_rate: 0.0,
            boundary_split_bias: 0.0,
            seams: SeamLines::default(),
            seed,
        }
    }
}

// Sub-seed streams, one per stage.
const STREAM_DROP: u64 = 1;
const STREAM_INJECT: u64 = 2;
const STREAM_ADDITIVE: u64 = 3;
const STREAM_SEAM: u64 = 4;

/// Piecewise-linear noise in [-1, 1] with knots every 8 cells.
fn smooth_profile(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    const KNOT_STEP: usize = 8;
    let knots: Vec<f64> = (0..=len / KNOT_STEP + 1)
        .map(|_| 2.0 * rng.next_f64() - 1.0)
        .collect();
    (0..len)
        .map(|i| {
            let pos = i as f64 / KNOT_STEP as f64;
            let k = pos.floor() as usize;
            let t = pos - k as f64;
            knots[k] * (1.0 - t) + knots[k + 1] * t
        })
        .collect()
}

fn splat_max(hm: &mut Heatmap, center: &ObjectCenter, amplitude: f64) {
    let sigma = center.extent / 3.0;
    let radius = (7.5 * sigma).ceil() as i64;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let x_lo = ((center.x.floor() as i64) - radius).max(0) as usize;
    let x_hi = ((center.x.ceil() as i64) + radius).min(hm.width() as i64 - 1) as usize;
    let y_lo = ((center.y.floor() as i64) - radius).max(0) as usize;
    let y_hi = ((center.y.ceil() as i64) + radius).min(hm.height() as i64 - 1) as usize;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let dx = x as f64 - center.x;
            let dy = y as f64 - center.y;
            let v = amplitude * (-(dx * dx + dy * dy) * inv).exp();
            if v > hm.get(center.class_index, x, y) {
                hm.set(center.class_index, x, y, v);
            }
        }
    }
}

/// Separable Gaussian blur of each channel. Kernel is normalized, radius 3 sigma.
fn blur_channels(hm: &mut Heatmap, sigma: f64) {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for d in -radius..=radius {
        kernel.push((-(d * d) as f64 * inv).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let (w, h) = (hm.width() as i64, hm.height() as i64);
    let mut scratch = vec![0.0f64; (w * h) as usize];
    for c in 0..hm.channels() {
        {
            let plane = hm.channel(c);
            // Horizontal pass; out-of-grid samples read as 0.
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0.0;
                    for (ki, d) in (-radius..=radius).enumerate() {
                        let sx = x + d;
                        if sx >= 0 && sx < w {
                            acc += kernel[ki] * plane[(y * w + sx) as usize];
                        }
                    }
                    scratch[(y * w + x) as usize] = acc;
                }
            }
        }
        let plane = hm.channel_mut(c);
        // Vertical pass.
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (ki, d) in (-radius..=radius).enumerate() {
                    let sy = y + d;
                    if sy >= 0 && sy < h {
                        acc += kernel[ki] * scratch[(sy * w + x) as usize];
                    }
                }
                plane[(y * w + x) as usize] = acc;
            }
        }
    }
}

/// Perturb a target heatmap into an imperfect prediction.
///
/// Deterministic under a fixed `profile.seed`. With the zero profile the
/// output equals the input. Dropping any center of a class re-synthesizes
/// that class channel from the surviving centers, so a fully dropped class
/// goes dark.
pub fn simulate_prediction(
    target: &Heatmap,
    ann: &FrameAnnotation,
    catalog: &ClassCatalog,
    profile: &NoiseProfile,
) -> Heatmap {
    let mut out = target.clone();

    // Drop stage.
    if profile.drop_rate > 0.0 {
        let mut rng = SplitMix64::new(derive_seed(profile.seed, STREAM_DROP));
        let mut kept: Vec<&ObjectCenter> = Vec::with_capacity(ann.centers.len());
        let mut dropped_classes = vec![false; catalog.len()];
        for center in &ann.centers {
            if rng.next_bool(profile.drop_rate) {
                dropped_classes[center.class_index] = true;
            } else {
                kept.push(center);
            }
        }
        for (class, &dropped) in dropped_classes.iter().enumerate() {
            if !dropped {
                continue;
            }
            out.channel_mut(class).fill(0.0);
            for center in kept.iter().filter(|c| c.class_index == class) {
                splat_max(&mut out, center, 1.0);
            }
            for center in kept.iter().filter(|c| c.class_index == class) {
                let (x, y) = center.cell();
                out.set(class, x.min(out.width() - 1), y.min(out.height() - 1), 1.0);
            }
        }
    }

    // Inject stage: at most one spurious peak per class and frame.
    if profile.false_positive_rate > 0.0 {
        let mut rng = SplitMix64::new(derive_seed(profile.seed, STREAM_INJECT));
        for class in 0..catalog.len() {
            if !rng.next_bool(profile.false_positive_rate) {
                continue;
            }
            let extents: Vec<f64> = ann
                .centers
                .iter()
                .filter(|c| c.class_index == class)
                .map(|c| c.extent)
                .collect();
            let extent = if extents.is_empty() {
                2.0
            } else {
                extents.iter().sum::<f64>() / extents.len() as f64
            };
            let fake = ObjectCenter {
                class_index: class,
                x: rng.next_range(0.0, out.width() as f64),
                y: rng.next_range(0.0, out.height() as f64),
                extent,
            };
            let amplitude = rng.next_range(0.55, 0.95);
            splat_max(&mut out, &fake, amplitude);
        }
    }

    if profile.blur_sigma > 0.0 {
        blur_channels(&mut out, profile.blur_sigma);
    }

    if profile.boundary_split_bias > 0.0 && !profile.seams.is_empty() {
        let mut rng = SplitMix64::new(derive_seed(profile.seed, STREAM_SEAM));
        let bias = profile.boundary_split_bias;
        let (w, h) = (out.width(), out.height());
        let hw = profile.seams.halfwidth as f64;
        for c in 0..out.channels() {
            // One smooth profile per seam line and channel: the artifact
            // varies along a seam, not cell by cell.
            let x_profiles: Vec<Vec<f64>> = profile
                .seams
                .xs
                .iter()
                .map(|_| smooth_profile(&mut rng, h))
                .collect();
            let y_profiles: Vec<Vec<f64>> = profile
                .seams
                .ys
                .iter()
                .map(|_| smooth_profile(&mut rng, w))
                .collect();
            let plane = out.channel_mut(c);
            for y in 0..h {
                for x in 0..w {
                    let f = profile.seams.falloff(x, y);
                    if f <= 0.0 {
                        continue;
                    }
                    let mut jitter = 0.0;
                    for (sx, g) in profile.seams.xs.iter().zip(&x_profiles) {
                        let d = (x as f64 - *sx as f64).abs();
                        if d <= hw {
                            jitter += SEAM_JITTER_SHARE * bias * (1.0 - d / (hw + 1.0)) * g[y];
                        }
                    }
                    for (sy, g) in profile.seams.ys.iter().zip(&y_profiles) {
                        let d = (y as f64 - *sy as f64).abs();
                        if d <= hw {
                            jitter += SEAM_JITTER_SHARE * bias * (1.0 - d / (hw + 1.0)) * g[x];
                        }
                    }
                    let atten = (1.0 - SEAM_ATTEN_SHARE * bias * f).max(0.0);
                    plane[y * w + x] = plane[y * w + x] * atten + jitter;
                }
            }
        }
    }

    if profile.additive_noise > 0.0 {
        let mut rng = SplitMix64::new(derive_seed(profile.seed, STREAM_ADDITIVE));
        let amp = profile.additive_noise;
        for v in out.values_mut() {
            *v += amp * (2.0 * rng.next_f64() - 1.0);
        }
    }

    for v in out.values_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}
