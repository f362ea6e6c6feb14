//! Per-frame count documents and the JSONL corpus they live in.
//!
//! Document schema (field names are part of the on-disk contract):
//!
//! ```json
//! { "frame_id": "frame123",
//!   "timestamp": "2024-04-07 15:43:02.8924030000",
//!   "vehicle_id": "vehicle_00000000",
//!   "objects": [ { "type": "car", "count": 10,
//!                  "position": [{"x": 1.5, "y": 2.1}] } ] }
//! ```
//!
//! Counts are written as JSON numbers; the reader also accepts legacy
//! string-encoded counts like `"10"`. Classes with zero count are omitted.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::{annotation_counts, ClassCatalog, FrameAnnotation};
use crate::peaks::PeakSet;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntry {
    #[serde(rename = "type")]
    pub class: String,
    #[serde(deserialize_with = "count_lenient")]
    pub count: u64,
    #[serde(default)]
    pub position: Vec<Position>,
}

fn count_lenient<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    struct V;
    impl de::Visitor<'_> for V {
        type Value = u64;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a count as a number or numeric string")
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<u64, E> {
            Ok(v)
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<u64, E> {
            u64::try_from(v).map_err(|_| E::custom("negative count"))
        }
        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<u64, E> {
            v.parse().map_err(E::custom)
        }
    }
    d.deserialize_any(V)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDocument {
    pub frame_id: String,
    pub timestamp: String,
    pub vehicle_id: String,
    pub objects: Vec<ObjectEntry>,
}

impl FrameDocument {
    /// Count of a class; absent classes read as zero.
    pub fn count_of(&self, class: &str) -> u64 {
        self.objects
            .iter()
            .find(|o| o.class == class)
            .map(|o| o.count)
            .unwrap_or(0)
    }

    /// Ground-truth document from an annotation.
    pub fn from_annotation(
        ann: &FrameAnnotation,
        catalog: &ClassCatalog,
        timestamp: String,
        vehicle_id: String,
    ) -> Self {
        let counts = annotation_counts(ann, catalog);
        let mut objects = Vec::new();
        for (class_index, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let position = ann
                .centers
                .iter()
                .filter(|c| c.class_index == class_index)
                .map(|c| Position { x: c.x, y: c.y })
                .collect();
            objects.push(ObjectEntry {
                class: catalog.name(class_index).unwrap().to_string(),
                count: count as u64,
                position,
            });
        }
        Self {
            frame_id: ann.frame_id.clone(),
            timestamp,
            vehicle_id,
            objects,
        }
    }

    /// Predicted document from detected peaks.
    pub fn from_peaks(
        frame_id: String,
        peaks: &PeakSet,
        catalog: &ClassCatalog,
        timestamp: String,
        vehicle_id: String,
    ) -> Self {
        let mut objects = Vec::new();
        for (class_index, channel) in peaks.per_channel.iter().enumerate() {
            if channel.is_empty() {
                continue;
            }
            objects.push(ObjectEntry {
                class: catalog.name(class_index).unwrap_or("unknown").to_string(),
                count: channel.len() as u64,
                position: channel
                    .iter()
                    .map(|p| Position {
                        x: p.x as f64,
                        y: p.y as f64,
                    })
                    .collect(),
            });
        }
        Self {
            frame_id,
            timestamp,
            vehicle_id,
            objects,
        }
    }

    /// Counts must equal the number of listed positions when positions exist.
    pub fn validate(&self) -> Result<()> {
        for o in &self.objects {
            if !o.position.is_empty() && o.position.len() as u64 != o.count {
                return Err(Error::InvalidConfig(format!(
                    "frame {}: class {} count {} != {} positions",
                    self.frame_id,
                    o.class,
                    o.count,
                    o.position.len()
                )));
            }
        }
        Ok(())
    }
}

/// Deterministic placeholder timestamp for synthesized frames, with the
/// 10-fractional-digit precision the schema carries.
pub fn synthetic_timestamp(frame_index: usize) -> String {
    format!("2024-04-07 15:43:02.{:010}", frame_index)
}

pub const DEFAULT_VEHICLE_ID: &str = "vehicle_00000000";

/// Ordered sequence of frame documents; order is temporal order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameCorpus {
    docs: Vec<FrameDocument>,
}

impl FrameCorpus {
    pub fn new(docs: Vec<FrameDocument>) -> Self {
        Self { docs }
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&FrameDocument> {
        self.docs.get(index)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FrameDocument> {
        self.docs.iter()
    }

    pub fn docs(&self) -> &[FrameDocument] {
        &self.docs
    }

    /// Class names in first-appearance order across the corpus.
    pub fn class_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for doc in &self.docs {
            for o in &doc.objects {
                if !names.contains(&o.class) {
                    names.push(o.class.clone());
                }
            }
        }
        names
    }

    /// One document per line, UTF-8 JSON.
    pub fn persist(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for doc in &self.docs {
            serde_json::to_writer(&mut w, doc)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Load a JSONL corpus; a malformed line reports its 1-based line number.
    pub fn load(path: &Path) -> Result<Self> {
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut docs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: FrameDocument =
                serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            doc.validate().map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(doc);
        }
        Ok(Self { docs })
    }
}

impl std::ops::Index<usize> for FrameCorpus {
    type Output = FrameDocument;
    fn index(&self, index: usize) -> &FrameDocument {
        &self.docs[index]
    }
}

/// Seeded sample of `n_groups` consecutive-frame ranges with lengths uniform
/// in [len_min, len_max]. The corpus must be at least `len_max` long.
pub fn consecutive_groups(
    corpus_len: usize,
    n_groups: usize,
    len_min: usize,
    len_max: usize,
    seed: u64,
) -> Result<Vec<std::ops::Range<usize>>> {
    if len_min == 0 || len_min > len_max {
        return Err(Error::InvalidConfig(format!(
            "bad group length bounds [{len_min}, {len_max}]"
        )));
    }
    if corpus_len < len_max {
        return Err(Error::CorpusTooShort {
            len: corpus_len,
            len_max,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut groups = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let len = len_min + rng.next_below((len_max - len_min + 1) as u64) as usize;
        let start = rng.next_below((corpus_len - len + 1) as u64) as usize;
        groups.push(start..start + len);
    }
    Ok(groups)
}
