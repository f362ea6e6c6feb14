//! Thresholded 2D local-maxima peak detection and Otsu dynamic thresholding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;

/// Number of bins the dynamic threshold search is discretized to.
pub const OTSU_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed,
    DynamicOtsu,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub mode: ThresholdMode,
    /// Floor threshold; also the dynamic policy's fallback. In (0, 1).
    pub fixed_t: f64,
}

impl ThresholdPolicy {
    pub fn fixed(t: f64) -> Self {
        Self {
            mode: ThresholdMode::Fixed,
            fixed_t: t,
        }
    }

    pub fn dynamic(t: f64) -> Self {
        Self {
            mode: ThresholdMode::DynamicOtsu,
            fixed_t: t,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_t > 0.0 && self.fixed_t < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "fixed_t must be in (0, 1), got {}",
                self.fixed_t
            )));
        }
        Ok(())
    }
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        Self::dynamic(0.5)
    }
}

/// One detected object center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub x: usize,
    pub y: usize,
    pub value: f64,
}

/// Detected peaks, one list per class channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub per_channel: Vec<Vec<Peak>>,
}

impl PeakSet {
    pub fn counts(&self) -> Vec<usize> {
        self.per_channel.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.per_channel.iter().map(Vec::len).sum()
    }
}

/// Strict 8-neighborhood local maxima of a row-major grid, at or above
/// `threshold`. Out-of-grid neighbors count as -inf. A plateau (connected
/// run of equal values that dominates every bordering cell) yields exactly
/// one peak at the cell nearest its centroid.
pub fn local_maxima_2d(
    values: &[f64],
    width: usize,
    height: usize,
    threshold: f64,
) -> Result<Vec<Peak>> {
    if width == 0 || height == 0 || values.len() != width * height {
        return Err(Error::EmptyGrid);
    }
    let mut visited = vec![false; values.len()];
    let mut peaks = Vec::new();
    let mut component = Vec::new();
    let mut stack = Vec::new();

    for start in 0..values.len() {
        if visited[start] {
            continue;
        }
        let level = values[start];
        if level < threshold {
            visited[start] = true;
            continue;
        }
        // Flood the 8-connected plateau of cells equal to `level`.
        component.clear();
        stack.clear();
        stack.push(start);
        visited[start] = true;
        let mut dominated = true;
        while let Some(idx) = stack.pop() {
            component.push(idx);
            let x = (idx % width) as i64;
            let y = (idx / width) as i64;
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = x + dx;
                    let ny = y + dy;
                    if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                        continue;
                    }
                    let nidx = (ny as usize) * width + nx as usize;
                    let nv = values[nidx];
                    if nv == level {
                        if !visited[nidx] {
                            visited[nidx] = true;
                            stack.push(nidx);
                        }
                    } else if nv > level {
                        dominated = false;
                    }
                }
            }
        }
        if !dominated {
            continue;
        }
        // Representative cell: plateau member nearest the centroid,
        // row-major order breaking ties.
        let n = component.len() as f64;
        let cx = component.iter().map(|i| (i % width) as f64).sum::<f64>() / n;
        let cy = component.iter().map(|i| (i / width) as f64).sum::<f64>() / n;
        let mut best = component[0];
        let mut best_d = f64::INFINITY;
        let mut ordered = component.clone();
        ordered.sort_unstable();
        for &idx in &ordered {
            let dx = (idx % width) as f64 - cx;
            let dy = (idx / width) as f64 - cy;
            let d = dx * dx + dy * dy;
            if d < best_d {
                best_d = d;
                best = idx;
            }
        }
        peaks.push(Peak {
            x: best % width,
            y: best / width,
            value: level,
        });
    }
    peaks.sort_unstable_by_key(|p| (p.y, p.x));
    Ok(peaks)
}

/// Otsu's threshold over 256 evenly spaced bins on [0, 1].
///
/// Returns the bin edge k = i/256 maximizing the between-class variance
/// w0(k) * w1(k) * (mean0(k) - mean1(k))^2, where class 0 holds values < k
/// and class 1 values >= k; ties break toward the smaller k. `None` signals
/// a degenerate grid (every split has zero variance); callers fall back to
/// the fixed threshold.
pub fn otsu_threshold(values: &[f64]) -> Result<Option<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut counts = [0u64; OTSU_BINS];
    let mut sums = [0f64; OTSU_BINS];
    for &v in values {
        let bin = ((v * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1);
        counts[bin] += 1;
        sums[bin] += v;
    }
    let total = values.len() as f64;
    let total_sum: f64 = sums.iter().sum();

    let mut below_count = 0u64;
    let mut below_sum = 0.0f64;
    let mut best_var = 0.0f64;
    let mut best_bin: Option<usize> = None;
    for i in 1..OTSU_BINS {
        below_count += counts[i - 1];
        below_sum += sums[i - 1];
        let above_count = values.len() as u64 - below_count;
        if below_count == 0 || above_count == 0 {
            continue;
        }
        let w0 = below_count as f64 / total;
        let w1 = above_count as f64 / total;
        let mean0 = below_sum / below_count as f64;
        let mean1 = (total_sum - below_sum) / above_count as f64;
        let var = w0 * w1 * (mean0 - mean1) * (mean0 - mean1);
        if var > best_var {
            best_var = var;
            best_bin = Some(i);
        }
    }
    Ok(best_bin.map(|i| i as f64 / OTSU_BINS as f64))
}

/// Adopt the dynamic threshold only when it is at least the fixed one.
pub fn effective_threshold(k: f64, t: f64) -> f64 {
    if k >= t {
        k
    } else {
        t
    }
}

/// Threshold for one channel under a policy; degenerate Otsu falls back to
/// the fixed threshold.
pub fn channel_threshold(values: &[f64], policy: &ThresholdPolicy) -> Result<f64> {
    match policy.mode {
        ThresholdMode::Fixed => Ok(policy.fixed_t),
        ThresholdMode::DynamicOtsu => Ok(match otsu_threshold(values)? {
            Some(k) => effective_threshold(k, policy.fixed_t),
            None => policy.fixed_t,
        }),
    }
}

/// Count objects per class by thresholded local maxima over each channel.
pub fn count_from_heatmap(hm: &Heatmap, policy: &ThresholdPolicy) -> Result<(Vec<usize>, PeakSet)> {
    policy.validate()?;
    let mut per_channel = Vec::with_capacity(hm.channels());
    for c in 0..hm.channels() {
        let values = hm.channel(c);
        let threshold = channel_threshold(values, policy)?;
        per_channel.push(local_maxima_2d(values, hm.width(), hm.height(), threshold)?);
    }
    let set = PeakSet { per_channel };
    Ok((set.counts(), set))
}
