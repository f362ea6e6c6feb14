//! Otsu dynamic thresholding per partition: dense regions run hotter than
//! sparse ones, and one fixed threshold cannot serve both.
//!
//! ```bash
//! cargo run -p pcq --example dynamic_threshold
//! ```

use pcq::peaks::{effective_threshold, otsu_threshold};
use pcq::rng::SplitMix64;

fn describe(label: &str, values: &[f64]) {
    match otsu_threshold(values).unwrap() {
        Some(k) => {
            let t = effective_threshold(k, 0.5);
            println!("{label:<28} otsu k = {k:.4}, effective threshold = {t:.4}");
        }
        None => println!("{label:<28} degenerate (constant); falls back to fixed t = 0.5"),
    }
}

fn main() {
    let mut rng = SplitMix64::new(42);

    // A sparse partition: background plus two faint blobs.
    let mut sparse = vec![0.0f64; 256];
    for (i, cell) in sparse.iter_mut().take(12).enumerate() {
        *cell = 0.3 + 0.02 * i as f64;
    }
    describe("sparse partition", &sparse);

    // A dense partition: lots of near-saturated activation.
    let dense: Vec<f64> = (0..256)
        .map(|i| {
            if i % 3 == 0 {
                rng.next_range(0.7, 1.0)
            } else {
                rng.next_range(0.0, 0.2)
            }
        })
        .collect();
    describe("dense partition", &dense);

    // Bimodal halves: the threshold lands right between the modes.
    let mut bimodal = vec![0.2; 128];
    bimodal.extend(std::iter::repeat_n(0.8, 128));
    describe("bimodal 0.2 / 0.8", &bimodal);

    // Empty partitions are routine when a grid is split nine ways.
    describe("constant (empty region)", &vec![0.0; 256]);

    println!("\nrule: adopt k when k >= t, else keep the fixed floor t");
    for (k, t) in [(0.6, 0.5), (0.3, 0.5), (0.5, 0.5)] {
        println!("  k = {k:.1}, t = {t:.1} -> {}", effective_threshold(k, t));
    }
}
