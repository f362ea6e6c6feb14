//! Counting and querying engine for autonomous-vehicle frame streams.
//!
//! The pipeline: per-class center heatmaps are rendered from frame
//! annotations (or simulated as imperfect predictions), objects are counted
//! by thresholded local maxima — optionally over overlapping grid partitions
//! with duplicate merging — and the per-frame counts are stored as JSONL
//! documents that RETRIEVAL / COUNT / AGGREGATION queries run against,
//! with an evaluation harness comparing predicted corpora to ground truth.
//!
//! Start with the `examples/` directory: each example exercises one
//! capability end to end. The `pcq` binary wires the same library calls
//! into a batch command-line pipeline.

pub mod cli;
pub mod error;
pub mod eval;
pub mod heatmap;
pub mod loss;
pub mod noise;
pub mod partition;
pub mod peaks;
pub mod query;
pub mod rng;
pub mod selection;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use heatmap::{ClassCatalog, FrameAnnotation, Heatmap, ObjectCenter};
pub use noise::NoiseProfile;
pub use partition::CounterConfig;
pub use peaks::{PeakSet, ThresholdPolicy};
