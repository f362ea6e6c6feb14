//! Per-frame model selection: assign training frames to the counter
//! configuration that counts them best, estimate descriptor centers with a
//! concentration confidence, and route new frames by adjusted distance.
//!
//! ```bash
//! cargo run -p pcq --example model_selection
//! ```

use pcq::heatmap::{annotation_counts, render_target_heatmap};
use pcq::noise::{simulate_prediction, NoiseProfile, SeamLines};
use pcq::partition::CounterConfig;
use pcq::peaks::ThresholdPolicy;
use pcq::rng::derive_seed;
use pcq::selection::{chernoff_confidence, frame_descriptor, select_model, Registry};
use pcq::synth::{generate_stream, SceneProfile};

fn main() {
    println!("confidence exp(-n eps^2 / 2 xi^2):");
    for (n, var, eps) in [(100usize, 0.5, 0.1), (50, 1.0, 0.2), (10, 0.0, 0.15)] {
        let p = chernoff_confidence(n, var, eps).unwrap();
        println!("  n = {n:>3}, variance = {var}, eps = {eps} -> {p:.5}");
    }

    // A small training corpus with seam-corrupted predictions.
    let profile = SceneProfile::builtin_nuscenes_like();
    let catalog = profile.catalog();
    let stream = generate_stream(&profile, &catalog, 60, 96, 96, 17).unwrap();
    let seams = SeamLines::for_partition(96, 96, 4).unwrap();
    let mut predictions = Vec::new();
    let mut truth_counts = Vec::new();
    for (i, ann) in stream.frames.iter().enumerate() {
        let target = render_target_heatmap(ann, &catalog).unwrap();
        // Spurious peaks that land near real objects are absorbed by the
        // merge radius of partitioned counters but not by plain counting,
        // so busy frames prefer different configurations than sparse ones.
        let noise = NoiseProfile {
            drop_rate: 0.05,
            false_positive_rate: 0.9,
            blur_sigma: 0.4,
            additive_noise: 0.03,
            boundary_split_bias: 0.5,
            seams: seams.clone(),
            seed: derive_seed(23, i as u64),
        };
        predictions.push(simulate_prediction(&target, ann, &catalog, &noise));
        truth_counts.push(annotation_counts(ann, &catalog));
    }

    let policy = ThresholdPolicy::dynamic(0.5);
    let models = vec![
        CounterConfig::new(1, 0.0, 4.0, policy),
        CounterConfig::new(2, 0.1, 4.0, policy),
        CounterConfig::new(4, 0.2, 4.0, policy),
        CounterConfig::new(9, 0.2, 4.0, policy),
    ];
    let registry = Registry::build(&predictions, &truth_counts, &models, 0.15, None, 0.5).unwrap();

    println!(
        "\nregistry built from 60 frames (eps = {}):",
        registry.epsilon
    );
    for m in &registry.models {
        println!(
            "  {:<10} n = {:>2}  variance = {:>8.2}  confidence = {:.4}",
            m.config.label(),
            m.n,
            m.variance,
            m.confidence
        );
    }
    for cfg in &registry.excluded {
        println!("  {:<10} excluded: no frame preferred it", cfg.label());
    }

    println!("\nrouting five fresh frames:");
    let fresh = generate_stream(&profile, &catalog, 5, 96, 96, 99).unwrap();
    for ann in &fresh.frames {
        let target = render_target_heatmap(ann, &catalog).unwrap();
        let descriptor = frame_descriptor(&target, 0.5).unwrap();
        let chosen = select_model(&descriptor, &registry.models).unwrap();
        println!(
            "  {} ({} objects) -> {}",
            ann.frame_id,
            ann.centers.len(),
            chosen.config.label()
        );
    }
}
