//! Splits one particle budget across independent filters ("islands")
//! whose predictions are pooled. Islands run in parallel and their
//! pooled predictive is often more stable than one big filter's, at
//! the price of a noisier per-island marginal.
//!
//! Run with: cargo run --release --example islands

use treesmc::data::split;
use treesmc::eval::evaluate;
use treesmc::model::Hyperparams;
use treesmc::smc::{islands_run, SmcConfig};
use treesmc::synthetic::gaussian_blobs;

fn main() -> treesmc::Result<()> {
    let data = gaussian_blobs(200, 2, 2, 3.5, 1.0, 3)?;
    let (train, test) = split(&data, 0.7, 1)?;
    let hyper = Hyperparams::default();

    println!(
        "{:>8} {:>10} {:>14} {:>18} {:>12}",
        "islands", "per_island", "log_marginal", "island_range", "mean_log_p"
    );
    for islands in [1, 5, 20] {
        let config = SmcConfig {
            num_particles: 2000,
            num_islands: islands,
            seed: 17,
            ..SmcConfig::default()
        };
        let run = islands_run(&train, &hyper, &config)?;
        let metrics = evaluate(&run.predictor(&hyper)?, &test)?;
        let lo = run
            .islands
            .iter()
            .map(|i| i.log_marginal)
            .fold(f64::INFINITY, f64::min);
        let hi = run
            .islands
            .iter()
            .map(|i| i.log_marginal)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:>8} {:>10} {:>14.3} {:>8.2}..{:<8.2} {:>12.4}",
            islands,
            2000 / islands,
            run.log_marginal,
            lo,
            hi,
            metrics.mean_log_prob
        );
    }
    Ok(())
}
