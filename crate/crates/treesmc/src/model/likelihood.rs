//! Dirichlet-multinomial marginal likelihood of class counts within a
//! block, with a table-backed fast path for repeated evaluation.

use crate::error::{Error, Result};
use crate::math::ln_gamma;

fn validate(counts: &[u64], alpha: f64) -> Result<()> {
    if counts.is_empty() {
        return Err(Error::invalid_parameter("class counts must be non-empty"));
    }
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid_parameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

/// Log marginal likelihood of the labels in a block under a symmetric
/// Dirichlet prior with total concentration `alpha` over
/// `counts.len()` classes. An empty block has log likelihood 0.
pub fn dm_log_lik(counts: &[u64], alpha: f64) -> Result<f64> {
    validate(counts, alpha)?;
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Ok(0.0);
    }
    let k = counts.len() as f64;
    let per_class = alpha / k;
    let mut acc = ln_gamma(alpha) - k * ln_gamma(per_class);
    for &m in counts {
        acc += ln_gamma(m as f64 + per_class);
    }
    Ok(acc - ln_gamma(total as f64 + alpha))
}

/// Posterior predictive class distribution at a leaf with the given
/// counts: `(m_k + alpha/K) / (total + alpha)`.
pub fn leaf_predictive(counts: &[u64], alpha: f64) -> Result<Vec<f64>> {
    validate(counts, alpha)?;
    let k = counts.len() as f64;
    let per_class = alpha / k;
    let total: u64 = counts.iter().sum();
    let denom = total as f64 + alpha;
    Ok(counts
        .iter()
        .map(|&m| (m as f64 + per_class) / denom)
        .collect())
}

/// Precomputed log-gamma tables for a fixed `(alpha, K)` and count
/// range, so block likelihoods reduce to lookups and additions.
#[derive(Debug, Clone)]
pub struct DmLikelihood {
    alpha: f64,
    num_classes: usize,
    base: f64,
    /// `ln Gamma(m + alpha/K)` for m = 0..=max_count.
    count_term: Vec<f64>,
    /// `ln Gamma(n + alpha)` for n = 0..=max_count.
    total_term: Vec<f64>,
}

impl DmLikelihood {
    pub fn new(alpha: f64, num_classes: usize, max_count: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid_parameter(
                "need at least two classes for a likelihood table",
            ));
        }
        validate(&vec![0; num_classes], alpha)?;
        let k = num_classes as f64;
        let per_class = alpha / k;
        let count_term = (0..=max_count)
            .map(|m| ln_gamma(m as f64 + per_class))
            .collect();
        let total_term = (0..=max_count)
            .map(|n| ln_gamma(n as f64 + alpha))
            .collect();
        Ok(DmLikelihood {
            alpha,
            num_classes,
            base: ln_gamma(alpha) - k * ln_gamma(per_class),
            count_term,
            total_term,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Table-backed equivalent of [`dm_log_lik`].
    #[inline]
    pub fn log_lik(&self, counts: &[u64]) -> f64 {
        debug_assert_eq!(counts.len(), self.num_classes);
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return 0.0;
        }
        let mut acc = self.base;
        for &m in counts {
            acc += self.count_term[m as usize];
        }
        acc - self.total_term[total as usize]
    }

    /// Predictive distribution at a leaf; see [`leaf_predictive`].
    #[inline]
    pub fn predictive(&self, counts: &[u64]) -> Vec<f64> {
        let per_class = self.alpha / self.num_classes as f64;
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + self.alpha;
        counts
            .iter()
            .map(|&m| (m as f64 + per_class) / denom)
            .collect()
    }
}
