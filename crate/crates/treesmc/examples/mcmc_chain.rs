//! Runs the grow/prune/change/swap Metropolis-Hastings chain and
//! compares its burn-in-averaged predictive with the particle
//! filter's on the same train/test split.
//!
//! Run with: cargo run --release --example mcmc_chain

use treesmc::data::split;
use treesmc::eval::{evaluate, evaluate_probs};
use treesmc::mcmc::{mcmc_run, McmcConfig, MoveKind};
use treesmc::model::Hyperparams;
use treesmc::smc::{islands_run, ProposalKind, SmcConfig};
use treesmc::synthetic::gaussian_blobs;

fn main() -> treesmc::Result<()> {
    let data = gaussian_blobs(120, 2, 2, 3.0, 1.0, 21)?;
    let (train, test) = split(&data, 0.7, 1)?;
    let hyper = Hyperparams::default();

    let config = McmcConfig {
        iterations: 20_000,
        burn_in: 2_000,
        seed: 4,
        trace_every: 100,
    };
    let run = mcmc_run(&train, &hyper, &config, Some(&test))?;

    println!("chain of {} iterations, burn-in {}", config.iterations, config.burn_in);
    for kind in MoveKind::ALL {
        let i = kind.index();
        let rate = run.accepted[i] as f64 / run.attempted[i].max(1) as f64;
        println!(
            "  {kind:<6} accepted {:6} / {:6}  ({:.1}%)",
            run.accepted[i],
            run.attempted[i],
            100.0 * rate
        );
    }
    println!(
        "final state: {} nodes, log posterior = {:.3}",
        run.final_state.num_nodes(),
        run.final_state.log_prior() + run.final_state.log_lik()
    );

    let probs = run.mean_probs.as_ref().expect("test set provided");
    let mcmc_metrics = evaluate_probs(probs, &test)?;
    println!(
        "mcmc predictive: mean log p = {:.4}, accuracy = {:.4}",
        mcmc_metrics.mean_log_prob, mcmc_metrics.accuracy
    );

    // Same data through the particle filter, for scale.
    let smc = islands_run(
        &train,
        &hyper,
        &SmcConfig {
            num_particles: 2000,
            proposal: ProposalKind::Optimal,
            seed: 4,
            ..SmcConfig::default()
        },
    )?;
    let smc_metrics = evaluate(&smc.predictor(&hyper)?, &test)?;
    println!(
        "smc  predictive: mean log p = {:.4}, accuracy = {:.4}",
        smc_metrics.mean_log_prob, smc_metrics.accuracy
    );
    Ok(())
}
