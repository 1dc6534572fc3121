//! Effective sample size and ancestor selection schemes.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Effective sample size `1 / sum(normalized_weights^2)` computed in
/// log space: `exp(2 * lse(lw) - lse(2 * lw))`.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_weights);
    if !lse.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    Ok((2.0 * lse - log_sum_exp(&doubled)).exp())
}

/// Draws ancestor indices i.i.d. proportional to `weights`.
pub fn resample_multinomial(weights: &[f64], rng: &mut impl Rng) -> Result<Vec<usize>> {
    let dist = WeightedIndex::new(weights).map_err(|_| Error::DegenerateWeights)?;
    Ok((0..weights.len()).map(|_| dist.sample(rng)).collect())
}

/// Systematic ancestors for a given uniform offset `u in [0, 1)`:
/// particle `m` selects the ancestor whose cumulative weight bracket
/// contains `(u + m) / M`.
pub fn systematic_ancestors_with(weights: &[f64], u: f64) -> Vec<usize> {
    let m = weights.len();
    let total: f64 = weights.iter().sum();
    let mut ancestors = Vec::with_capacity(m);
    let mut cum = 0.0;
    let mut j = 0usize;
    for i in 0..m {
        let pos = (u + i as f64) / m as f64 * total;
        while j < m - 1 && cum + weights[j] <= pos {
            cum += weights[j];
            j += 1;
        }
        ancestors.push(j);
    }
    ancestors
}

/// Systematic resampling: one shared uniform determines every ancestor,
/// giving lower variance than multinomial at the same cost.
pub fn resample_systematic(weights: &[f64], rng: &mut impl Rng) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let u: f64 = rng.random();
    Ok(systematic_ancestors_with(weights, u))
}
