//! The supervision arithmetic: focal heatmap loss with its analytic
//! gradient, the L1 count loss, and density-weighted partition losses.
//!
//! ```bash
//! cargo run -p pcq --example training_losses
//! ```

use pcq::loss::{count_l1, focal_loss_values, grad_check, weighted_count_loss, LossReport};
use pcq::partition::partition_weights;
use pcq::rng::SplitMix64;

fn main() {
    // One positive cell predicted at 0.5.
    let out = focal_loss_values(&[0.5], &[1.0], 2.0).unwrap();
    println!("focal loss, single positive at p=0.5:  {:.5}", out.loss);
    println!("analytic dL/dp:                        {:.5}", out.grad[0]);

    // Check the gradient against central finite differences.
    let mut rng = SplitMix64::new(7);
    let target: Vec<f64> = (0..36)
        .map(|_| {
            if rng.next_bool(0.15) {
                1.0
            } else {
                rng.next_range(0.0, 0.9)
            }
        })
        .collect();
    let pred: Vec<f64> = (0..36).map(|_| rng.next_range(0.02, 0.98)).collect();
    let full = focal_loss_values(&pred, &target, 2.0).unwrap();
    let err = grad_check(
        |x| focal_loss_values(x, &target, 2.0).unwrap().loss,
        &pred,
        &full.grad,
        1e-5,
    );
    println!("max relative error vs finite differences on a 6x6 grid: {err:.2e}");

    // Count loss over two frames and two classes.
    let truth = vec![vec![3, 5], vec![1, 0]];
    let pred_counts = vec![vec![4, 5], vec![1, 2]];
    let l_count = count_l1(&pred_counts, &truth).unwrap();
    println!("\nmean absolute count error: {l_count}");

    // Density-aware weights concentrate the count loss on busy regions.
    let counts = [3usize, 1, 0, 0];
    println!(
        "region counts {counts:?} -> weights {:?}",
        partition_weights(&counts)
    );
    let weighted = weighted_count_loss(&[1.0, 1.0, 1.0, 1.0], &counts).unwrap();
    println!("weighted count loss over uniform region losses: {weighted}");

    let report = LossReport::new(full.loss, l_count, full.n_pos);
    println!(
        "\ncombined report: heatmap {:.4} + count {:.4} = {:.4} ({} positives)",
        report.l_hm, report.l_count, report.total, report.n_pos
    );
}
