//! Runs the three proposal kernels at several particle counts on the
//! same data. The lookahead kernel costs more per stage but stays
//! accurate with far fewer particles than sampling from the prior.
//!
//! Run with: cargo run --release --example compare_proposals

use std::time::Instant;

use treesmc::data::split;
use treesmc::eval::evaluate;
use treesmc::model::Hyperparams;
use treesmc::smc::{islands_run, ProposalKind, SmcConfig};
use treesmc::synthetic::gaussian_blobs;

fn main() -> treesmc::Result<()> {
    let data = gaussian_blobs(100, 2, 3, 3.0, 1.0, 5)?;
    let (train, test) = split(&data, 0.7, 1)?;
    let hyper = Hyperparams::default();

    println!(
        "{:>9} {:>6} {:>14} {:>12} {:>9}",
        "proposal", "M", "log_marginal", "mean_log_p", "secs"
    );
    for proposal in [
        ProposalKind::Prior,
        ProposalKind::Empirical,
        ProposalKind::Optimal,
    ] {
        for particles in [10, 100, 1000] {
            let config = SmcConfig {
                num_particles: particles,
                proposal,
                seed: 42,
                ..SmcConfig::default()
            };
            let start = Instant::now();
            let run = islands_run(&train, &hyper, &config)?;
            let secs = start.elapsed().as_secs_f64();
            let metrics = evaluate(&run.predictor(&hyper)?, &test)?;
            println!(
                "{:>9} {:>6} {:>14.3} {:>12.4} {:>9.3}",
                proposal.to_string(),
                particles,
                run.log_marginal,
                metrics.mean_log_prob,
                secs
            );
        }
    }
    Ok(())
}
