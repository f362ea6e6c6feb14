//! The whole pipeline at desk scale: synthesize a stream, render noisy
//! predictions, count with an overlap partition, ingest both corpora, and
//! print the evaluation table.
//!
//! ```bash
//! cargo run -p pcq --example evaluate_stream
//! ```

use pcq::eval::{evaluate_corpora, render_table, EvalConfig, GroupSpec};
use pcq::heatmap::render_target_heatmap;
use pcq::noise::{simulate_prediction, NoiseProfile, SeamLines};
use pcq::partition::{infer_with_overlap, CounterConfig};
use pcq::peaks::ThresholdPolicy;
use pcq::rng::derive_seed;
use pcq::store::{synthetic_timestamp, FrameCorpus, FrameDocument, DEFAULT_VEHICLE_ID};
use pcq::synth::{generate_stream, SceneProfile};

fn main() {
    let profile = SceneProfile::builtin_nuscenes_like();
    let catalog = profile.catalog();
    let n_frames = 400;
    let stream = generate_stream(&profile, &catalog, n_frames, 128, 128, 2024).unwrap();
    println!(
        "synthesized {} frames, {} objects total",
        stream.frames.len(),
        stream.frames.iter().map(|f| f.centers.len()).sum::<usize>()
    );

    let cfg = CounterConfig::new(4, 0.2, 4.0, ThresholdPolicy::dynamic(0.5));
    let seams = SeamLines::for_partition(128, 128, 4).unwrap();
    let mut truth_docs = Vec::with_capacity(n_frames);
    let mut pred_docs = Vec::with_capacity(n_frames);
    for (i, ann) in stream.frames.iter().enumerate() {
        let target = render_target_heatmap(ann, &catalog).unwrap();
        let noise = NoiseProfile {
            drop_rate: 0.04,
            false_positive_rate: 0.05,
            blur_sigma: 0.5,
            additive_noise: 0.03,
            boundary_split_bias: 0.3,
            seams: seams.clone(),
            seed: derive_seed(77, i as u64),
        };
        let pred = simulate_prediction(&target, ann, &catalog, &noise);
        let (_, peaks) = infer_with_overlap(&pred, &cfg).unwrap();
        truth_docs.push(FrameDocument::from_annotation(
            ann,
            &catalog,
            synthetic_timestamp(i),
            DEFAULT_VEHICLE_ID.into(),
        ));
        pred_docs.push(FrameDocument::from_peaks(
            ann.frame_id.clone(),
            &peaks,
            &catalog,
            synthetic_timestamp(i),
            DEFAULT_VEHICLE_ID.into(),
        ));
    }
    let truth = FrameCorpus::new(truth_docs);
    let pred = FrameCorpus::new(pred_docs);

    let config = EvalConfig {
        tolerance_rate: 0.1,
        retrieval_queries_per_class: 150,
        count_queries_per_class: 1000,
        groups: GroupSpec {
            n_groups: 300,
            len_min: 50,
            len_max: 200,
        },
        seed: 5,
    };
    let report = evaluate_corpora(&pred, &truth, &config).unwrap();
    println!("\ncounting with {} against ground truth:\n", cfg.label());
    print!("{}", render_table(&report));
}
