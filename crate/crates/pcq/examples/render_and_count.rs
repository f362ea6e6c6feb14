//! Render a ground-truth heatmap from annotated centers and count the
//! objects back out of it.
//!
//! ```bash
//! cargo run -p pcq --example render_and_count
//! ```

use pcq::heatmap::{
    annotation_counts, render_target_heatmap, ClassCatalog, FrameAnnotation, ObjectCenter,
};
use pcq::peaks::{count_from_heatmap, ThresholdPolicy};

fn main() {
    let catalog = ClassCatalog::new(["car", "pedestrian"]).unwrap();
    let ann = FrameAnnotation {
        frame_id: "demo".into(),
        width: 32,
        height: 32,
        centers: vec![
            ObjectCenter {
                class_index: 0,
                x: 8.0,
                y: 8.0,
                extent: 3.0,
            },
            ObjectCenter {
                class_index: 0,
                x: 22.5,
                y: 9.5,
                extent: 2.5,
            },
            ObjectCenter {
                class_index: 1,
                x: 15.0,
                y: 24.0,
                extent: 1.5,
            },
        ],
    };

    let heatmap = render_target_heatmap(&ann, &catalog).unwrap();
    println!(
        "rendered {}x{} heatmap with {} channels",
        heatmap.width(),
        heatmap.height(),
        heatmap.channels()
    );
    println!("value at the first car center: {}", heatmap.get(0, 8, 8));
    println!("one cell to the right:         {:.6}", heatmap.get(0, 9, 8));

    // ASCII view of the car channel.
    println!("\ncar channel (. < 0.25 < - < 0.5 < + < 0.75 < #):");
    for y in 0..32 {
        let row: String = (0..32)
            .map(|x| match heatmap.get(0, x, y) {
                v if v >= 0.75 => '#',
                v if v >= 0.5 => '+',
                v if v >= 0.25 => '-',
                v if v > 0.01 => '.',
                _ => ' ',
            })
            .collect();
        println!("  {row}");
    }

    let (counts, peaks) = count_from_heatmap(&heatmap, &ThresholdPolicy::fixed(0.5)).unwrap();
    println!("\ncounts from peaks: {counts:?}");
    println!("ground truth:      {:?}", annotation_counts(&ann, &catalog));
    for (class, channel) in peaks.per_channel.iter().enumerate() {
        for p in channel {
            println!(
                "  {} at ({}, {}) value {:.3}",
                catalog.name(class).unwrap(),
                p.x,
                p.y,
                p.value
            );
        }
    }
}
