//! Posterior predictive distributions from particle populations.

use crate::error::{Error, Result};
use crate::eval::Predictor;
use crate::math::normalized_weights;
use crate::model::{leaf_predictive, DecisionTreeState, Hyperparams, ROOT};
use crate::smc::engine::{IslandsRun, SmcRun};

/// Weighted mixture of per-class probability vectors.
pub fn mixture_probs(pairs: &[(f64, Vec<f64>)]) -> Vec<f64> {
    let k = pairs.first().map_or(0, |(_, p)| p.len());
    let mut out = vec![0.0; k];
    for (w, probs) in pairs {
        for (o, p) in out.iter_mut().zip(probs) {
            *o += w * p;
        }
    }
    out
}

/// Self-normalized importance-sampling predictor: a weighted mixture
/// over the particles' trees, each tree predicting with the smoothed
/// class frequencies of the leaf the point routes to.
#[derive(Debug, Clone)]
pub struct WeightedTrees<'a> {
    particles: &'a [DecisionTreeState],
    weights: Vec<f64>,
    alpha: f64,
    num_classes: usize,
}

impl<'a> WeightedTrees<'a> {
    pub fn new(
        particles: &'a [DecisionTreeState],
        log_weights: &[f64],
        alpha: f64,
    ) -> Result<Self> {
        if particles.is_empty() || particles.len() != log_weights.len() {
            return Err(Error::invalid_parameter(
                "need equal, nonzero numbers of particles and weights",
            ));
        }
        let weights = normalized_weights(log_weights).ok_or(Error::DegenerateWeights)?;
        let num_classes = particles[0].node(ROOT).class_counts().len();
        Ok(WeightedTrees {
            particles,
            weights,
            alpha,
            num_classes,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Predictor for WeightedTrees<'_> {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn predict_probs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes];
        for (state, &w) in self.particles.iter().zip(&self.weights) {
            let leaf = state.route_idx(x);
            let probs = leaf_predictive(state.node(leaf).class_counts(), self.alpha)
                .expect("cached counts have the right shape");
            for (o, p) in out.iter_mut().zip(&probs) {
                *o += w * p;
            }
        }
        out
    }
}

/// Equal-weight average of independent island predictors.
#[derive(Debug, Clone)]
pub struct PooledIslands<'a> {
    islands: Vec<WeightedTrees<'a>>,
}

impl Predictor for PooledIslands<'_> {
    fn num_classes(&self) -> usize {
        self.islands[0].num_classes()
    }

    fn predict_probs(&self, x: &[f64]) -> Vec<f64> {
        let share = 1.0 / self.islands.len() as f64;
        let pairs: Vec<(f64, Vec<f64>)> = self
            .islands
            .iter()
            .map(|i| (share, i.predict_probs(x)))
            .collect();
        mixture_probs(&pairs)
    }
}

impl SmcRun {
    pub fn predictor(&self, hyper: &Hyperparams) -> Result<WeightedTrees<'_>> {
        WeightedTrees::new(
            &self.population.particles,
            &self.population.log_weights,
            hyper.alpha,
        )
    }
}

impl IslandsRun {
    pub fn predictor(&self, hyper: &Hyperparams) -> Result<PooledIslands<'_>> {
        let islands = self
            .islands
            .iter()
            .map(|run| run.predictor(hyper))
            .collect::<Result<Vec<_>>>()?;
        if islands.is_empty() {
            return Err(Error::invalid_state("no islands to pool"));
        }
        Ok(PooledIslands { islands })
    }
}
