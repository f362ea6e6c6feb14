//! Seeded synthetic frame streams and a naive query oracle for differential
//! testing.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::{ClassCatalog, FrameAnnotation, ObjectCenter};
use crate::query::{QueryAnswer, QueryKind, QuerySpec};
use crate::rng::{derive_seed, SplitMix64};

/// Placement retries per object before the count is reduced.
const PLACEMENT_RETRIES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementRule {
    /// Rejection-sample until the center is at least `min_sep` cells from
    /// every previously placed center of the same class.
    MinSeparation,
    /// Centers scatter around one seeded anchor per frame and class.
    Clustered { spread: f64 },
}

/// How often each object count occurs for one class, plus its geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassProfile {
    /// Inclusive [lo, hi] count buckets.
    pub buckets: Vec<[u32; 2]>,
    /// Relative mass of each bucket; need not be normalized.
    pub masses: Vec<f64>,
    /// Uniform extent range [lo, hi] in cells.
    pub extent: [f64; 2],
    /// Same-class minimum separation in cells.
    pub min_sep: f64,
    #[serde(default = "default_placement")]
    pub placement: PlacementRule,
}

fn default_placement() -> PlacementRule {
    PlacementRule::MinSeparation
}

impl ClassProfile {
    fn validate(&self, class: &str) -> Result<()> {
        if self.buckets.is_empty() || self.buckets.len() != self.masses.len() {
            return Err(Error::InvalidConfig(format!(
                "class {class}: buckets and masses must be non-empty and equal length"
            )));
        }
        if self.masses.iter().any(|&m| m < 0.0) || self.masses.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "class {class}: masses must be nonnegative with positive total"
            )));
        }
        if self.buckets.iter().any(|b| b[0] > b[1]) {
            return Err(Error::InvalidConfig(format!(
                "class {class}: bucket lo > hi"
            )));
        }
        if !(self.extent[0] > 0.0 && self.extent[1] >= self.extent[0]) {
            return Err(Error::InvalidConfig(format!(
                "class {class}: bad extent range"
            )));
        }
        Ok(())
    }

    fn draw_count(&self, rng: &mut SplitMix64) -> u32 {
        let total: f64 = self.masses.iter().sum();
        let mut u = rng.next_f64() * total;
        let mut chosen = self.buckets.len() - 1;
        for (i, &m) in self.masses.iter().enumerate() {
            if u < m {
                chosen = i;
                break;
            }
            u -= m;
        }
        let [lo, hi] = self.buckets[chosen];
        lo + rng.next_below((hi - lo + 1) as u64) as u32
    }

    /// Probability mass of each bucket after normalization.
    pub fn normalized_masses(&self) -> Vec<f64> {
        let total: f64 = self.masses.iter().sum();
        self.masses.iter().map(|m| m / total).collect()
    }
}

/// Per-class frequency and geometry profile for a synthetic stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SceneProfile {
    pub classes: BTreeMap<String, ClassProfile>,
}

impl SceneProfile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let profile: SceneProfile = serde_json::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        for (class, p) in &self.classes {
            p.validate(class)?;
        }
        Ok(())
    }

    /// Catalog holding this profile's classes in iteration (sorted) order.
    pub fn catalog(&self) -> ClassCatalog {
        ClassCatalog::new(self.classes.keys().cloned()).expect("map keys are unique")
    }

    /// Bundled default profile shaped like a front-loaded AV count
    /// distribution: many frames with few objects, few with many.
    pub fn builtin_nuscenes_like() -> Self {
        let profile: SceneProfile =
            serde_json::from_str(include_str!("../profiles/nuscenes_like.json"))
                .expect("bundled profile parses");
        profile.validate().expect("bundled profile is valid");
        profile
    }
}

/// Generated stream plus placement bookkeeping.
#[derive(Debug, Clone)]
pub struct SynthStream {
    pub frames: Vec<FrameAnnotation>,
    /// Objects abandoned after bounded placement retries.
    pub dropped_objects: u64,
}

fn place_class(
    rng: &mut SplitMix64,
    frame: &mut Vec<ObjectCenter>,
    dropped: &mut u64,
    class_index: usize,
    profile: &ClassProfile,
    width: usize,
    height: usize,
) {
    let requested = profile.draw_count(rng);
    let anchor = match profile.placement {
        PlacementRule::Clustered { .. } => (
            rng.next_range(0.0, width as f64),
            rng.next_range(0.0, height as f64),
        ),
        PlacementRule::MinSeparation => (0.0, 0.0),
    };
    for _ in 0..requested {
        let extent = rng.next_range(profile.extent[0], profile.extent[1].max(profile.extent[0]));
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let (x, y) = match profile.placement {
                PlacementRule::MinSeparation => (
                    rng.next_range(0.0, width as f64),
                    rng.next_range(0.0, height as f64),
                ),
                PlacementRule::Clustered { spread } => {
                    let angle = rng.next_range(0.0, std::f64::consts::TAU);
                    let radius = spread * rng.next_f64();
                    (
                        (anchor.0 + radius * angle.cos()).clamp(0.0, width as f64 - 1e-9),
                        (anchor.1 + radius * angle.sin()).clamp(0.0, height as f64 - 1e-9),
                    )
                }
            };
            let clear = frame
                .iter()
                .filter(|c| c.class_index == class_index)
                .all(|c| ((c.x - x).powi(2) + (c.y - y).powi(2)).sqrt() >= profile.min_sep);
            if clear {
                frame.push(ObjectCenter {
                    class_index,
                    x,
                    y,
                    extent,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            *dropped += 1;
        }
    }
}

/// Generate a seeded stream of annotations. Frames are independent given the
/// profile; each frame draws from its own derived seed, so generation order
/// (and parallelism) cannot change the result.
pub fn generate_stream(
    profile: &SceneProfile,
    catalog: &ClassCatalog,
    n_frames: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<SynthStream> {
    profile.validate()?;
    if width == 0 || height == 0 {
        return Err(Error::EmptyGrid);
    }
    for (class, p) in &profile.classes {
        if catalog.index_of(class).is_none() {
            return Err(Error::UnknownClass(class.clone()));
        }
        let needs = p.min_sep.max(2.0 * p.extent[1]);
        if needs > (width.min(height)) as f64 {
            return Err(Error::InvalidConfig(format!(
                "grid {width}x{height} too small for class {class} (needs {needs:.1} cells)"
            )));
        }
    }

    // Classes in catalog order; classes missing from the profile stay empty.
    let per_class: Vec<(usize, &ClassProfile)> = catalog
        .names()
        .enumerate()
        .filter_map(|(i, name)| profile.classes.get(name).map(|p| (i, p)))
        .collect();

    let results: Vec<(FrameAnnotation, u64)> = (0..n_frames)
        .into_par_iter()
        .map(|frame_index| {
            let mut rng = SplitMix64::new(derive_seed(seed, frame_index as u64));
            let mut centers = Vec::new();
            let mut dropped = 0u64;
            for &(class_index, class_profile) in &per_class {
                place_class(
                    &mut rng,
                    &mut centers,
                    &mut dropped,
                    class_index,
                    class_profile,
                    width,
                    height,
                );
            }
            (
                FrameAnnotation {
                    frame_id: format!("frame_{frame_index:06}"),
                    width,
                    height,
                    centers,
                },
                dropped,
            )
        })
        .collect();

    let mut frames = Vec::with_capacity(n_frames);
    let mut dropped_objects = 0;
    for (frame, dropped) in results {
        frames.push(frame);
        dropped_objects += dropped;
    }
    Ok(SynthStream {
        frames,
        dropped_objects,
    })
}

/// Naive single-pass query evaluator over raw annotations.
///
/// Deliberately written without the query engine or the document store so it
/// can serve as independent ground truth in differential tests.
#[allow(clippy::needless_range_loop)] // plain indexed scans are the point here
pub fn oracle_answer(
    truth: &[FrameAnnotation],
    catalog: &ClassCatalog,
    spec: &QuerySpec,
) -> Result<QueryAnswer> {
    spec.validate()?;
    let (start, end) = match spec.range {
        Some((s, e)) => (s.min(truth.len()), e.min(truth.len())),
        None => (0, truth.len()),
    };
    let tally = |frame: &FrameAnnotation, class: &str| -> u64 {
        let mut n = 0;
        for c in &frame.centers {
            if catalog.name(c.class_index) == Some(class) {
                n += 1;
            }
        }
        n
    };
    match spec.kind {
        QueryKind::Retrieval => {
            let mut hits = Vec::new();
            for i in start..end {
                let mut ok = true;
                for cond in &spec.conditions {
                    if !cond.op.eval(tally(&truth[i], &cond.class), cond.count) {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    hits.push(i);
                }
            }
            Ok(QueryAnswer::Frames(hits))
        }
        QueryKind::Count => {
            let cond = &spec.conditions[0];
            let mut n = 0;
            for i in start..end {
                if cond.op.eval(tally(&truth[i], &cond.class), cond.count) {
                    n += 1;
                }
            }
            Ok(QueryAnswer::Count(n))
        }
        QueryKind::AggSum => {
            let class = &spec.conditions[0].class;
            let mut sum = 0;
            for i in start..end {
                sum += tally(&truth[i], class);
            }
            Ok(QueryAnswer::Sum(sum))
        }
        QueryKind::AggAvg => {
            if start >= end {
                return Err(Error::EmptyCorpus);
            }
            let class = &spec.conditions[0].class;
            let mut sum = 0u64;
            for i in start..end {
                sum += tally(&truth[i], class);
            }
            Ok(QueryAnswer::Avg(sum as f64 / (end - start) as f64))
        }
    }
}

// --- annotation stream files -------------------------------------------------

/// JSONL line format for annotation streams, with class names instead of
/// indices so files stay readable without a catalog.
#[derive(Debug, Serialize, Deserialize)]
struct AnnotationLine {
    frame_id: String,
    width: usize,
    height: usize,
    centers: Vec<CenterLine>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CenterLine {
    class: String,
    x: f64,
    y: f64,
    extent: f64,
}

pub fn save_annotations(
    path: &Path,
    frames: &[FrameAnnotation],
    catalog: &ClassCatalog,
) -> Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ann in frames {
        let line = AnnotationLine {
            frame_id: ann.frame_id.clone(),
            width: ann.width,
            height: ann.height,
            centers: ann
                .centers
                .iter()
                .map(|c| {
                    Ok(CenterLine {
                        class: catalog
                            .name(c.class_index)
                            .ok_or(Error::UnknownClassIndex {
                                class_index: c.class_index,
                                class_count: catalog.len(),
                            })?
                            .to_string(),
                        x: c.x,
                        y: c.y,
                        extent: c.extent,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_annotations(path: &Path, catalog: &ClassCatalog) -> Result<Vec<FrameAnnotation>> {
    use std::io::BufRead;
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: AnnotationLine =
            serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        let centers = parsed
            .centers
            .into_iter()
            .map(|c| {
                Ok(ObjectCenter {
                    class_index: catalog
                        .index_of(&c.class)
                        .ok_or_else(|| Error::UnknownClass(c.class.clone()))?,
                    x: c.x,
                    y: c.y,
                    extent: c.extent,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(FrameAnnotation {
            frame_id: parsed.frame_id,
            width: parsed.width,
            height: parsed.height,
            centers,
        });
    }
    Ok(frames)
}
