//! Draws trees from the data-dependent prior and tabulates their
//! shapes. The split probability alpha_split / (1 + depth)^beta_split
//! controls size: larger beta_split decays faster and yields shallower
//! trees.
//!
//! Run with: cargo run --release --example prior_trees

use treesmc::model::{prior_tree_stats, DmLikelihood, Hyperparams};
use treesmc::synthetic::gaussian_blobs;

fn main() -> treesmc::Result<()> {
    let data = gaussian_blobs(250, 2, 4, 2.0, 1.0, 13)?;
    let lik = DmLikelihood::new(5.0, data.num_classes(), data.n_rows())?;
    let draws = 10_000;

    println!(
        "{:>12} {:>11} {:>12} {:>11} {:>11} {:>12}",
        "alpha_split", "beta_split", "mean_depth", "sd_depth", "mean_nodes", "mean_leaves"
    );
    for (alpha_split, beta_split) in [
        (0.5, 0.5),
        (0.95, 2.0),
        (0.95, 1.0),
        (0.95, 0.5),
    ] {
        let hyper = Hyperparams::new(5.0, alpha_split, beta_split)?;
        let stats = prior_tree_stats(&data, &lik, &hyper, draws, 1)?;
        println!(
            "{:>12} {:>11} {:>12.3} {:>11.3} {:>11.3} {:>12.3}",
            alpha_split,
            beta_split,
            stats.mean_depth,
            stats.sd_depth,
            stats.mean_nodes,
            stats.mean_leaves
        );
    }
    Ok(())
}
