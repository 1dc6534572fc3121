use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Model hyperparameters: the symmetric Dirichlet concentration for
/// class probabilities at leaves, and the depth-decaying split
/// probability parameters of the tree prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Total Dirichlet concentration, shared evenly across classes.
    pub alpha: f64,
    /// Split probability at the root; must lie in (0, 1).
    pub alpha_split: f64,
    /// Depth-decay exponent of the split probability; non-negative.
    pub beta_split: f64,
}

impl Hyperparams {
    pub fn new(alpha: f64, alpha_split: f64, beta_split: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        if !(alpha_split > 0.0 && alpha_split < 1.0) {
            return Err(Error::invalid_parameter(format!(
                "alpha_split must lie strictly inside (0, 1), got {alpha_split}"
            )));
        }
        if !(beta_split >= 0.0) || !beta_split.is_finite() {
            return Err(Error::invalid_parameter(format!(
                "beta_split must be non-negative and finite, got {beta_split}"
            )));
        }
        Ok(Hyperparams {
            alpha,
            alpha_split,
            beta_split,
        })
    }

    /// Probability that a node at `depth` splits rather than stops,
    /// before accounting for whether any split is possible.
    #[inline]
    pub fn split_prob(&self, depth: u32) -> f64 {
        self.alpha_split / (1.0 + depth as f64).powf(self.beta_split)
    }
}

impl Default for Hyperparams {
    /// Defaults used throughout the experiments: alpha 5.0, root split
    /// probability 0.95 decaying with exponent 0.5.
    fn default() -> Self {
        Hyperparams {
            alpha: 5.0,
            alpha_split: 0.95,
            beta_split: 0.5,
        }
    }
}

/// Split probability as a free function with parameter validation.
pub fn split_prob(depth: u32, alpha_split: f64, beta_split: f64) -> Result<f64> {
    let h = Hyperparams::new(1.0, alpha_split, beta_split)?;
    Ok(h.split_prob(depth))
}
