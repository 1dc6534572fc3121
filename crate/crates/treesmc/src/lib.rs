//! Bayesian decision-tree learning by sequential Monte Carlo.
//!
//! Trees are grown top-down: each particle is a partially built tree,
//! each stage expands eligible leaves with a proposal kernel (prior,
//! empirical, or one-step lookahead), and importance weights keep the
//! population distributed according to the exact posterior over trees.
//! A grow/prune/change/swap Metropolis-Hastings sampler and an exact
//! enumeration of small posteriors are included for comparison and
//! verification.
//!
//! Start with the `examples/` directory: each file is a runnable tour
//! of one capability (single SMC runs, proposal comparisons, islands,
//! exact-posterior checks, MCMC chains, prior simulation).
//!
//! ```
//! use treesmc::eval::evaluate;
//! use treesmc::model::Hyperparams;
//! use treesmc::smc::{islands_run, ProposalKind, SmcConfig};
//! use treesmc::synthetic::gaussian_blobs;
//!
//! let data = gaussian_blobs(50, 2, 2, 4.0, 1.0, 1)?;
//! let (train, test) = treesmc::data::split(&data, 0.7, 1)?;
//! let config = SmcConfig {
//!     num_particles: 500,
//!     proposal: ProposalKind::Optimal,
//!     ..SmcConfig::default()
//! };
//! let hyper = Hyperparams::default();
//! let run = islands_run(&train, &hyper, &config)?;
//! let metrics = evaluate(&run.predictor(&hyper)?, &test)?;
//! assert!(run.log_marginal.is_finite());
//! assert!(metrics.accuracy > 0.9);
//! # Ok::<(), treesmc::Error>(())
//! ```

pub mod data;
pub mod error;
pub mod eval;
pub mod math;
pub mod mcmc;
pub mod model;
pub mod oracle;
pub mod run;
pub mod smc;
pub mod synthetic;

pub use error::{Error, Result};
