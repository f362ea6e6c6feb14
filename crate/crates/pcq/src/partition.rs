//! Grid partitioning, region expansion, overlap inference, duplicate merging,
//! and per-region count-loss weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::Heatmap;
use crate::peaks::{
    channel_threshold, count_from_heatmap, local_maxima_2d, Peak, PeakSet, ThresholdPolicy,
};

/// Half-open cell rectangle: x in [x_start, x_end), y in [y_start, y_end).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub x_start: usize,
    pub y_start: usize,
    pub x_end: usize,
    pub y_end: usize,
}

impl Region {
    pub fn width(&self) -> usize {
        self.x_end - self.x_start
    }

    pub fn height(&self) -> usize {
        self.y_end - self.y_start
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x_start && x < self.x_end && y >= self.y_start && y < self.y_end
    }
}

/// One counting-model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterConfig {
    /// Number of equal regions the grid is split into.
    pub pt: usize,
    /// Expansion ratio applied to every region side.
    pub overlap: f64,
    /// Duplicate-merge radius in cells.
    pub merge_radius: f64,
    pub threshold: ThresholdPolicy,
}

impl CounterConfig {
    pub fn new(pt: usize, overlap: f64, merge_radius: f64, threshold: ThresholdPolicy) -> Self {
        Self {
            pt,
            overlap,
            merge_radius,
            threshold,
        }
    }

    /// Merge radius convention for a corpus: twice the largest object extent.
    pub fn default_merge_radius(max_extent: f64) -> f64 {
        2.0 * max_extent
    }

    pub fn validate(&self) -> Result<()> {
        if self.pt < 1 {
            return Err(Error::InvalidConfig("pt must be >= 1".into()));
        }
        if self.overlap < 0.0 {
            return Err(Error::InvalidConfig("overlap must be >= 0".into()));
        }
        if self.merge_radius <= 0.0 || self.merge_radius.is_nan() {
            return Err(Error::InvalidConfig("merge_radius must be > 0".into()));
        }
        self.threshold.validate()
    }

    /// Short form like `pt4-o0.2` used in logs and registries.
    pub fn label(&self) -> String {
        format!("pt{}-o{}", self.pt, self.overlap)
    }
}

impl Default for CounterConfig {
    fn default() -> Self {
        Self {
            pt: 4,
            overlap: 0.2,
            merge_radius: 4.0,
            threshold: ThresholdPolicy::default(),
        }
    }
}

/// Most-square factorization a x b of pt with a <= b (rows x columns).
fn factorize(pt: usize) -> (usize, usize) {
    let mut best = (1, pt);
    let mut d = 1;
    while d * d <= pt {
        if pt.is_multiple_of(d) {
            best = (d, pt / d);
        }
        d += 1;
    }
    best
}

/// Split the grid into pt equal regions, row-major order; division remainders
/// are absorbed by the last row/column of regions.
pub fn partition_regions(width: usize, height: usize, pt: usize) -> Result<Vec<Region>> {
    let (rows, cols) = factorize(pt);
    if pt < 1 || cols > width || rows > height {
        return Err(Error::InvalidPartition { pt, width, height });
    }
    let base_w = width / cols;
    let base_h = height / rows;
    let mut regions = Vec::with_capacity(pt);
    for row in 0..rows {
        for col in 0..cols {
            let x_start = col * base_w;
            let y_start = row * base_h;
            let x_end = if col + 1 == cols {
                width
            } else {
                x_start + base_w
            };
            let y_end = if row + 1 == rows {
                height
            } else {
                y_start + base_h
            };
            regions.push(Region {
                x_start,
                y_start,
                x_end,
                y_end,
            });
        }
    }
    Ok(regions)
}

/// Grow a region by floor(side * ratio) cells on each side, clamped to the grid.
pub fn expand_region(r: &Region, ratio: f64, width: usize, height: usize) -> Region {
    let expand_w = (r.width() as f64 * ratio).floor() as usize;
    let expand_h = (r.height() as f64 * ratio).floor() as usize;
    Region {
        x_start: r.x_start.saturating_sub(expand_w),
        y_start: r.y_start.saturating_sub(expand_h),
        x_end: (r.x_end + expand_w).min(width),
        y_end: (r.y_end + expand_h).min(height),
    }
}

fn merge_by_radius<T>(items: Vec<T>, gamma: f64, pos: impl Fn(&T) -> (f64, f64)) -> Vec<T> {
    let mut queue: std::collections::VecDeque<T> = items.into();
    let mut kept = Vec::with_capacity(queue.len());
    while let Some(current) = queue.pop_front() {
        let (cx, cy) = pos(&current);
        queue.retain(|other| {
            let (ox, oy) = pos(other);
            ((ox - cx).powi(2) + (oy - cy).powi(2)).sqrt() > gamma
        });
        kept.push(current);
    }
    kept
}

/// FIFO duplicate removal: keep the front center, drop everything within
/// Euclidean distance gamma of it, repeat.
pub fn merge_duplicate_centers(centers: Vec<(f64, f64)>, gamma: f64) -> Vec<(f64, f64)> {
    merge_by_radius(centers, gamma, |&(x, y)| (x, y))
}

pub fn merge_duplicate_peaks(peaks: Vec<Peak>, gamma: f64) -> Vec<Peak> {
    merge_by_radius(peaks, gamma, |p| (p.x as f64, p.y as f64))
}

fn extract_region(hm: &Heatmap, channel: usize, r: &Region) -> Vec<f64> {
    let mut out = Vec::with_capacity(r.width() * r.height());
    let plane = hm.channel(channel);
    for y in r.y_start..r.y_end {
        out.extend_from_slice(&plane[y * hm.width() + r.x_start..y * hm.width() + r.x_end]);
    }
    out
}

/// Partitioned counting with overlap: expand each region, detect peaks per
/// region slice (threshold chosen per partition), map region coordinates back
/// to the global grid, then merge duplicates within `merge_radius` per class.
///
/// A single-region configuration is plain whole-grid counting: there are no
/// seams and therefore no duplicates, so the merge pass is skipped and the
/// result is identical to [`count_from_heatmap`].
pub fn infer_with_overlap(hm: &Heatmap, cfg: &CounterConfig) -> Result<(Vec<usize>, PeakSet)> {
    cfg.validate()?;
    let regions = partition_regions(hm.width(), hm.height(), cfg.pt)?;
    if regions.len() == 1 {
        return count_from_heatmap(hm, &cfg.threshold);
    }

    let expanded: Vec<Region> = regions
        .iter()
        .map(|r| expand_region(r, cfg.overlap, hm.width(), hm.height()))
        .collect();

    let mut per_channel = Vec::with_capacity(hm.channels());
    for c in 0..hm.channels() {
        let mut collected: Vec<Peak> = Vec::new();
        for region in &expanded {
            let slice = extract_region(hm, c, region);
            let threshold = channel_threshold(&slice, &cfg.threshold)?;
            for p in local_maxima_2d(&slice, region.width(), region.height(), threshold)? {
                collected.push(Peak {
                    x: p.x + region.x_start,
                    y: p.y + region.y_start,
                    value: p.value,
                });
            }
        }
        per_channel.push(merge_duplicate_peaks(collected, cfg.merge_radius));
    }
    let set = PeakSet { per_channel };
    Ok((set.counts(), set))
}

/// Per-region count-loss weights: a uniform base share 1/|R| plus each
/// region's share of the total object count (zero when nothing is present).
pub fn partition_weights(counts_per_region: &[usize]) -> Vec<f64> {
    let n = counts_per_region.len();
    if n == 0 {
        return Vec::new();
    }
    let base = 1.0 / n as f64;
    let total: usize = counts_per_region.iter().sum();
    counts_per_region
        .iter()
        .map(|&c| {
            if total == 0 {
                base
            } else {
                base + c as f64 / total as f64
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatmap::{render_target_heatmap, ClassCatalog, FrameAnnotation, ObjectCenter};
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn equal_splits_for_supported_partition_counts() {
        let r = partition_regions(128, 128, 4).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|r| r.width() == 64 && r.height() == 64));

        let r = partition_regions(128, 128, 2).unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|r| r.width() == 64 && r.height() == 128));

        let r = partition_regions(120, 120, 9).unwrap();
        assert_eq!(r.len(), 9);
        assert!(r.iter().all(|r| r.width() == 40 && r.height() == 40));

        let r = partition_regions(50, 50, 1).unwrap();
        assert_eq!(
            r,
            vec![Region {
                x_start: 0,
                y_start: 0,
                x_end: 50,
                y_end: 50
            }]
        );
    }

    #[test]
    fn remainders_go_to_last_row_and_column() {
        let r = partition_regions(101, 70, 4).unwrap();
        assert_eq!(r[0].width(), 50);
        assert_eq!(r[1].width(), 51);
        assert_eq!(r[0].height(), 35);
        assert_eq!(r[2].height(), 35);
    }

    #[test]
    fn oversized_partition_count_is_rejected() {
        assert!(partition_regions(2, 2, 9).is_err());
        assert!(partition_regions(10, 10, 0).is_err());
    }

    #[test]
    fn expansion_follows_floor_rule_and_clamps() {
        let interior = Region {
            x_start: 64,
            y_start: 64,
            x_end: 128,
            y_end: 128,
        };
        let e = expand_region(&interior, 0.2, 256, 256);
        // floor(64 * 0.2) = 12 cells each side.
        assert_eq!(
            e,
            Region {
                x_start: 52,
                y_start: 52,
                x_end: 140,
                y_end: 140
            }
        );

        assert_eq!(expand_region(&interior, 0.0, 256, 256), interior);

        let corner = Region {
            x_start: 0,
            y_start: 0,
            x_end: 64,
            y_end: 64,
        };
        let e = expand_region(&corner, 0.2, 128, 128);
        assert_eq!(
            e,
            Region {
                x_start: 0,
                y_start: 0,
                x_end: 76,
                y_end: 76
            }
        );
    }

    #[test]
    fn merge_keeps_first_and_drops_near_duplicates() {
        assert!(merge_duplicate_centers(vec![], 2.0).is_empty());
        assert_eq!(
            merge_duplicate_centers(vec![(10.0, 10.0), (11.0, 10.0)], 2.0),
            vec![(10.0, 10.0)]
        );
        assert_eq!(
            merge_duplicate_centers(vec![(10.0, 10.0), (20.0, 20.0)], 2.0),
            vec![(10.0, 10.0), (20.0, 20.0)]
        );
    }

    #[test]
    fn weights_follow_base_plus_share() {
        assert_eq!(partition_weights(&[0, 0, 0, 0]), vec![0.25; 4]);
        assert_eq!(partition_weights(&[3, 1, 0, 0]), vec![1.0, 0.5, 0.25, 0.25]);
        assert_eq!(partition_weights(&[7]), vec![2.0]);
    }

    fn random_heatmap(rng: &mut SplitMix64, channels: usize, h: usize, w: usize) -> Heatmap {
        let mut hm = Heatmap::zeros(channels, h, w);
        for v in hm.values_mut() {
            *v = rng.next_f64();
        }
        hm
    }

    #[test]
    fn single_region_equals_plain_counting() {
        let mut rng = SplitMix64::new(31);
        for _ in 0..25 {
            let hm = random_heatmap(&mut rng, 2, 20, 20);
            let cfg = CounterConfig::new(1, 0.2, 3.0, ThresholdPolicy::fixed(0.5));
            let (counts, peaks) = infer_with_overlap(&hm, &cfg).unwrap();
            let (plain_counts, plain_peaks) = count_from_heatmap(&hm, &cfg.threshold).unwrap();
            assert_eq!(counts, plain_counts);
            assert_eq!(peaks, plain_peaks);
        }
    }

    #[test]
    fn zero_overlap_tiny_gamma_equals_per_region_counting() {
        let mut rng = SplitMix64::new(41);
        for pt in [2usize, 4, 9] {
            let hm = random_heatmap(&mut rng, 2, 24, 24);
            let policy = ThresholdPolicy::fixed(0.5);
            let cfg = CounterConfig::new(pt, 0.0, 1e-9, policy);
            let (counts, _) = infer_with_overlap(&hm, &cfg).unwrap();
            // Independent tally: count every region slice separately.
            let mut expected = vec![0usize; 2];
            for region in partition_regions(24, 24, pt).unwrap() {
                for (c, total) in expected.iter_mut().enumerate() {
                    let slice = extract_region(&hm, c, &region);
                    *total += local_maxima_2d(&slice, region.width(), region.height(), 0.5)
                        .unwrap()
                        .len();
                }
            }
            assert_eq!(counts, expected);
        }
    }

    #[test]
    fn seam_straddling_object_counted_once() {
        // Center one cell left of the pt=4 vertical seam of a 64x64 grid.
        let catalog = ClassCatalog::new(["car"]).unwrap();
        let ann = FrameAnnotation {
            frame_id: "f0".into(),
            width: 64,
            height: 64,
            centers: vec![ObjectCenter {
                class_index: 0,
                x: 31.0,
                y: 20.0,
                extent: 3.0,
            }],
        };
        let hm = render_target_heatmap(&ann, &catalog).unwrap();
        let cfg = CounterConfig::new(4, 0.2, 3.0, ThresholdPolicy::fixed(0.5));
        let (counts, peaks) = infer_with_overlap(&hm, &cfg).unwrap();
        assert_eq!(counts, vec![1]);
        assert_eq!(
            (peaks.per_channel[0][0].x, peaks.per_channel[0][0].y),
            (31, 20)
        );
    }

    #[test]
    fn dense_small_objects_match_annotation_oracle() {
        let catalog = ClassCatalog::new(["cone"]).unwrap();
        let mut rng = SplitMix64::new(13);
        let mut centers: Vec<ObjectCenter> = Vec::new();
        while centers.len() < 20 {
            let x = rng.next_range(1.0, 95.0);
            let y = rng.next_range(1.0, 95.0);
            if centers
                .iter()
                .all(|c| ((c.x - x).powi(2) + (c.y - y).powi(2)).sqrt() > 7.0)
            {
                centers.push(ObjectCenter {
                    class_index: 0,
                    x,
                    y,
                    extent: 1.5,
                });
            }
        }
        let ann = FrameAnnotation {
            frame_id: "f0".into(),
            width: 96,
            height: 96,
            centers,
        };
        let hm = render_target_heatmap(&ann, &catalog).unwrap();
        let cfg = CounterConfig::new(9, 0.2, 3.0, ThresholdPolicy::dynamic(0.5));
        let (counts, _) = infer_with_overlap(&hm, &cfg).unwrap();
        assert_eq!(counts, vec![20]);
    }

    proptest! {
        #[test]
        fn regions_tile_the_grid(width in 4usize..96, height in 4usize..96, pt in 1usize..10) {
            prop_assume!(pt <= width.min(height));
            let regions = partition_regions(width, height, pt).unwrap();
            prop_assert_eq!(regions.len(), pt);
            let mut covered = vec![0u8; width * height];
            for r in &regions {
                for y in r.y_start..r.y_end {
                    for x in r.x_start..r.x_end {
                        covered[y * width + x] += 1;
                    }
                }
            }
            prop_assert!(covered.iter().all(|&c| c == 1));
        }

        #[test]
        fn expansion_is_monotone(
            width in 8usize..128,
            height in 8usize..128,
            ratio in 0.0f64..0.5,
        ) {
            let regions = partition_regions(width, height, 4).unwrap();
            for r in regions {
                let e = expand_region(&r, ratio, width, height);
                prop_assert!(e.x_start <= r.x_start && e.y_start <= r.y_start);
                prop_assert!(e.x_end >= r.x_end && e.y_end >= r.y_end);
                prop_assert!(e.x_end <= width && e.y_end <= height);
            }
        }

        #[test]
        fn merged_centers_are_pairwise_separated(
            seed in 0u64..10_000,
            n in 0usize..40,
            gamma in 0.5f64..6.0,
        ) {
            let mut rng = SplitMix64::new(seed);
            let centers: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.next_range(0.0, 30.0), rng.next_range(0.0, 30.0)))
                .collect();
            let merged = merge_duplicate_centers(centers.clone(), gamma);
            prop_assert!(merged.len() <= centers.len());
            for (i, a) in merged.iter().enumerate() {
                for b in &merged[i + 1..] {
                    let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
                    prop_assert!(d > gamma);
                }
            }
            // Idempotent.
            prop_assert_eq!(merge_duplicate_centers(merged.clone(), gamma), merged);
        }

        #[test]
        fn weights_sum_to_two_or_one(seed in 0u64..10_000, n in 1usize..12) {
            let mut rng = SplitMix64::new(seed);
            let counts: Vec<usize> = (0..n).map(|_| rng.next_below(20) as usize).collect();
            let sum: f64 = partition_weights(&counts).iter().sum();
            let expected = if counts.iter().sum::<usize>() == 0 { 1.0 } else { 2.0 };
            prop_assert!((sum - expected).abs() < 1e-12);
        }
    }
}
