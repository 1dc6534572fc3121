//! Checks the particle filter against exact enumeration on an
//! instance small enough to sum over every tree. The filter's mean
//! marginal estimate (averaged on the linear scale) is unbiased, so
//! it should land within a few standard errors of the exact value for
//! every proposal kernel.
//!
//! Run with: cargo run --release --example exact_vs_smc

use treesmc::data::Dataset;
use treesmc::model::Hyperparams;
use treesmc::oracle::enumerate_posterior;
use treesmc::smc::{islands_run, ProposalKind, SmcConfig};

fn main() -> treesmc::Result<()> {
    let data = Dataset::from_rows(
        vec![vec![0.5], vec![1.5], vec![2.5], vec![3.5]],
        vec![0, 0, 1, 1],
        2,
    )?;
    let hyper = Hyperparams::new(2.0, 0.95, 0.5)?;

    let exact = enumerate_posterior(&data, &hyper, 1_000_000)?;
    println!(
        "exact: {} trees, log marginal = {:.6}, mean nodes = {:.4}",
        exact.trees.len(),
        exact.log_marginal,
        exact.mean_nodes()
    );

    let seeds = 20;
    let particles = 1000;
    println!(
        "\n{:>9} {:>14} {:>14} {:>10}",
        "proposal", "mean_estimate", "exact", "rel_err"
    );
    for proposal in [
        ProposalKind::Prior,
        ProposalKind::Empirical,
        ProposalKind::Optimal,
    ] {
        let mut mean = 0.0;
        for seed in 0..seeds {
            let config = SmcConfig {
                num_particles: particles,
                proposal,
                seed,
                ..SmcConfig::default()
            };
            let run = islands_run(&data, &hyper, &config)?;
            mean += run.log_marginal.exp() / seeds as f64;
        }
        let exact_lin = exact.log_marginal.exp();
        println!(
            "{:>9} {:>14.8} {:>14.8} {:>10.5}",
            proposal.to_string(),
            mean,
            exact_lin,
            (mean - exact_lin).abs() / exact_lin
        );
    }
    Ok(())
}
