//! Sequential Monte Carlo over partial decision trees: particles grow
//! trees top-down, one expansion stage at a time, with importance
//! weights tracking the posterior and adaptive resampling.

mod candidates;
mod engine;
mod propose;
mod resample;
pub mod predict;

pub use candidates::select_candidates;
pub use engine::{
    islands_run, smc_run, weight_update, IslandsRun, ParticlePopulation, SmcRun,
    StageDiagnostics,
};
pub use propose::{propose_empirical, propose_optimal, propose_prior, ProposalOutcome};
pub use resample::{
    ess, resample_multinomial, resample_systematic, systematic_ancestors_with,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which proposal kernel expands candidate nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalKind {
    /// Sample expansions from the prior; weights absorb only the
    /// likelihood change.
    Prior,
    /// Prior stop/dimension choices, but cut locations drawn between
    /// adjacent observed values within the block.
    Empirical,
    /// One-step-lookahead kernel proportional to prior times the
    /// resulting leaf likelihoods.
    Optimal,
}

/// Whether a stage expands one node or a whole eligible frontier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expansion {
    #[serde(rename = "node")]
    NodeWise,
    #[serde(rename = "layer")]
    LayerWise,
}

/// Node-wise candidate priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priority {
    /// Oldest eligible node first, path order breaking ties.
    #[serde(rename = "breadth")]
    BreadthFirst,
    /// Lowest block log likelihood first, path order breaking ties.
    #[serde(rename = "marginal")]
    MarginalLik,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleScheme {
    Multinomial,
    Systematic,
}

macro_rules! text_enum {
    ($ty:ty, $(($variant:path, $text:literal)),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let s = match self {
                    $($variant => $text),+
                };
                f.write_str(s)
            }
        }
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::invalid_parameter(format!(
                        "unknown value {other:?} for {}, expected one of: {}",
                        stringify!($ty),
                        [$($text),+].join("|"),
                    ))),
                }
            }
        }
    };
}

text_enum!(
    ProposalKind,
    (ProposalKind::Prior, "prior"),
    (ProposalKind::Empirical, "empirical"),
    (ProposalKind::Optimal, "optimal")
);
text_enum!(
    Expansion,
    (Expansion::NodeWise, "node"),
    (Expansion::LayerWise, "layer")
);
text_enum!(
    Priority,
    (Priority::BreadthFirst, "breadth"),
    (Priority::MarginalLik, "marginal")
);
text_enum!(
    ResampleScheme,
    (ResampleScheme::Multinomial, "multinomial"),
    (ResampleScheme::Systematic, "systematic")
);

/// Configuration of one SMC run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmcConfig {
    /// Total particle budget, shared evenly across islands.
    pub num_particles: usize,
    pub num_islands: usize,
    pub proposal: ProposalKind,
    pub expansion: Expansion,
    pub priority: Priority,
    pub resampler: ResampleScheme,
    /// Resample when ESS drops strictly below this fraction of the
    /// per-island particle count.
    pub ess_threshold_fraction: f64,
    pub max_stages: usize,
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            num_particles: 1000,
            num_islands: 1,
            proposal: ProposalKind::Prior,
            expansion: Expansion::NodeWise,
            priority: Priority::BreadthFirst,
            resampler: ResampleScheme::Multinomial,
            ess_threshold_fraction: 0.1,
            max_stages: 5000,
            seed: 1,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_particles == 0 {
            return Err(Error::invalid_parameter("need at least one particle"));
        }
        if self.num_islands == 0 {
            return Err(Error::invalid_parameter("need at least one island"));
        }
        if self.num_particles % self.num_islands != 0 {
            return Err(Error::invalid_parameter(format!(
                "num_particles {} must be a multiple of num_islands {}",
                self.num_particles, self.num_islands
            )));
        }
        if !(0.0..=1.0).contains(&self.ess_threshold_fraction) {
            return Err(Error::invalid_parameter(format!(
                "ess_threshold_fraction must lie in [0, 1], got {}",
                self.ess_threshold_fraction
            )));
        }
        if self.max_stages == 0 {
            return Err(Error::invalid_parameter("max_stages must be positive"));
        }
        Ok(())
    }
}
