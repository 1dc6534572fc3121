//! Metropolis-Hastings over complete decision trees with the classic
//! grow / prune / change / swap move family, as a baseline and
//! verification target for the particle filter.

mod moves;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::derive_rng;
use crate::model::{leaf_predictive, Decision, DecisionTreeState, DmLikelihood, Hyperparams, ROOT};
use moves::{
    change_proposal_at, grow_proposal_at, growable_leaves, internal_nodes, prunable_internals,
    prune_proposal_at, swap_pairs, swap_proposal_at, MoveProposal,
};

/// The four move types, attempted with equal probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
    Swap,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [
        MoveKind::Grow,
        MoveKind::Prune,
        MoveKind::Change,
        MoveKind::Swap,
    ];

    pub fn index(self) -> usize {
        match self {
            MoveKind::Grow => 0,
            MoveKind::Prune => 1,
            MoveKind::Change => 2,
            MoveKind::Swap => 3,
        }
    }
}

impl std::fmt::Display for MoveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MoveKind::Grow => "grow",
            MoveKind::Prune => "prune",
            MoveKind::Change => "change",
            MoveKind::Swap => "swap",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: u64,
    /// Iterations discarded before prediction averaging begins. The
    /// chain is valid from the start, so the default keeps everything.
    pub burn_in: u64,
    pub seed: u64,
    /// Record every n-th iteration in the trace; 0 disables the trace.
    pub trace_every: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 1000,
            burn_in: 0,
            seed: 1,
            trace_every: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in > self.iterations {
            return Err(Error::invalid_parameter(format!(
                "burn_in {} exceeds iterations {}",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub move_kind: MoveKind,
    pub accepted: bool,
}

/// One chain over complete trees, started at the all-stopped root.
pub struct McmcSampler<'a> {
    data: &'a Dataset,
    lik: DmLikelihood,
    hyper: Hyperparams,
    state: DecisionTreeState,
    rng: ChaCha8Rng,
}

impl<'a> McmcSampler<'a> {
    pub fn new(data: &'a Dataset, hyper: &Hyperparams, seed: u64) -> Result<Self> {
        let lik = DmLikelihood::new(hyper.alpha, data.num_classes(), data.n_rows())?;
        let mut state = DecisionTreeState::new_root(data, &lik)?;
        let stats = state.leaf_stats(data, ROOT)?;
        state.apply_decision(data, &lik, hyper, ROOT, &stats, Decision::Stop, 0)?;
        Ok(McmcSampler {
            data,
            lik,
            hyper: *hyper,
            state,
            rng: derive_rng(seed, &[2]),
        })
    }

    pub fn state(&self) -> &DecisionTreeState {
        &self.state
    }

    /// Attempts one move. Draw order: move type, target, cut (grow and
    /// change only), acceptance uniform (skipped when the ratio is
    /// nonnegative or the proposal is rejected outright).
    pub fn step(&mut self) -> Result<StepInfo> {
        let move_kind = MoveKind::ALL[self.rng.random_range(0..4usize)];
        let proposal: Option<MoveProposal> = match move_kind {
            MoveKind::Grow => {
                let targets = growable_leaves(&self.state, self.data)?;
                if targets.is_empty() {
                    None
                } else {
                    let idx = targets[self.rng.random_range(0..targets.len())];
                    let stats = self.state.leaf_stats(self.data, idx)?;
                    let dim = stats.valid_dims[self.rng.random_range(0..stats.valid_dims.len())];
                    let (lo, hi) = stats.extents[dim];
                    let loc = self.rng.random_range(lo..hi);
                    Some(grow_proposal_at(
                        &self.state,
                        self.data,
                        &self.lik,
                        &self.hyper,
                        idx,
                        dim,
                        loc,
                        targets.len(),
                    )?)
                }
            }
            MoveKind::Prune => {
                let targets = prunable_internals(&self.state);
                if targets.is_empty() {
                    None
                } else {
                    let idx = targets[self.rng.random_range(0..targets.len())];
                    Some(prune_proposal_at(
                        &self.state,
                        self.data,
                        &self.lik,
                        &self.hyper,
                        idx,
                        targets.len(),
                    )?)
                }
            }
            MoveKind::Change => {
                let targets = internal_nodes(&self.state);
                if targets.is_empty() {
                    None
                } else {
                    let idx = targets[self.rng.random_range(0..targets.len())];
                    let indices = self.state.subtree_indices(idx);
                    let stats = crate::model::block_stats(self.data, &indices)?;
                    let dim = stats.valid_dims[self.rng.random_range(0..stats.valid_dims.len())];
                    let (lo, hi) = stats.extents[dim];
                    let loc = self.rng.random_range(lo..hi);
                    change_proposal_at(
                        &self.state,
                        self.data,
                        &self.lik,
                        &self.hyper,
                        idx,
                        dim,
                        loc,
                    )?
                }
            }
            MoveKind::Swap => {
                let pairs = swap_pairs(&self.state);
                if pairs.is_empty() {
                    None
                } else {
                    let (parent, child) = pairs[self.rng.random_range(0..pairs.len())];
                    swap_proposal_at(
                        &self.state,
                        self.data,
                        &self.lik,
                        &self.hyper,
                        parent,
                        child,
                    )?
                }
            }
        };
        let accepted = match proposal {
            None => false,
            Some(p) => {
                let accept =
                    p.log_ratio >= 0.0 || self.rng.random::<f64>() < p.log_ratio.exp();
                if accept {
                    self.state = p.state;
                }
                accept
            }
        };
        Ok(StepInfo {
            move_kind,
            accepted,
        })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub move_kind: MoveKind,
    pub accepted: bool,
    pub log_posterior: f64,
    pub num_nodes: usize,
}

/// Result of a full chain run.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub final_state: DecisionTreeState,
    pub trace: Vec<TraceRecord>,
    /// Attempt and acceptance counts indexed by [`MoveKind::index`].
    pub attempted: [u64; 4],
    pub accepted: [u64; 4],
    /// Predictive distributions for the test rows, averaged over every
    /// state from `burn_in` to the last iteration inclusive.
    pub mean_probs: Option<Vec<Vec<f64>>>,
}

fn state_probs(state: &DecisionTreeState, test: &Dataset, alpha: f64) -> Result<Vec<Vec<f64>>> {
    (0..test.n_rows())
        .map(|row| {
            let leaf = state.route_idx(test.row(row));
            leaf_predictive(state.node(leaf).class_counts(), alpha)
        })
        .collect()
}

/// Runs a chain, optionally accumulating averaged predictions for
/// `test`. With zero iterations the prediction is the initial root
/// state's.
pub fn mcmc_run(
    data: &Dataset,
    hyper: &Hyperparams,
    config: &McmcConfig,
    test: Option<&Dataset>,
) -> Result<McmcRun> {
    config.validate()?;
    let mut sampler = McmcSampler::new(data, hyper, config.seed)?;
    let mut trace = Vec::new();
    let mut attempted = [0u64; 4];
    let mut accepted = [0u64; 4];

    let mut current = match test {
        Some(t) => Some(state_probs(&sampler.state, t, hyper.alpha)?),
        None => None,
    };
    let mut sums: Option<Vec<Vec<f64>>> = current.as_ref().map(|c| {
        if config.burn_in == 0 {
            c.clone()
        } else {
            vec![vec![0.0; c[0].len()]; c.len()]
        }
    });

    for iteration in 1..=config.iterations {
        let info = sampler.step()?;
        attempted[info.move_kind.index()] += 1;
        if info.accepted {
            accepted[info.move_kind.index()] += 1;
            if let Some(t) = test {
                current = Some(state_probs(&sampler.state, t, hyper.alpha)?);
            }
        }
        if iteration >= config.burn_in.max(1) {
            if let (Some(s), Some(c)) = (sums.as_mut(), current.as_ref()) {
                for (srow, crow) in s.iter_mut().zip(c) {
                    for (a, b) in srow.iter_mut().zip(crow) {
                        *a += b;
                    }
                }
            }
        }
        if config.trace_every > 0 && iteration % config.trace_every == 0 {
            trace.push(TraceRecord {
                iteration,
                move_kind: info.move_kind,
                accepted: info.accepted,
                log_posterior: sampler.state.log_posterior(),
                num_nodes: sampler.state.num_nodes(),
            });
        }
    }

    let mean_probs = sums.map(|s| {
        let denom = (config.iterations - config.burn_in + 1) as f64;
        s.into_iter()
            .map(|row| row.into_iter().map(|v| v / denom).collect())
            .collect()
    });
    Ok(McmcRun {
        final_state: sampler.state,
        trace,
        attempted,
        accepted,
        mean_probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::NodeKind;
    use crate::oracle::{enumerate_posterior, shape_of_state, TreeShape};
    use std::collections::HashMap;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn line_data() -> Dataset {
        Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap()
    }

    #[test]
    fn chains_are_deterministic() {
        let data = line_data();
        let hyper = Hyperparams::default();
        let config = McmcConfig {
            iterations: 500,
            seed: 11,
            ..Default::default()
        };
        let a = mcmc_run(&data, &hyper, &config, None).unwrap();
        let b = mcmc_run(&data, &hyper, &config, None).unwrap();
        assert_eq!(a.final_state.canonical(), b.final_state.canonical());
        assert_eq!(a.attempted, b.attempted);
        assert_eq!(a.accepted, b.accepted);
        assert_eq!(a.trace.len(), 500);
        let attempts: u64 = a.attempted.iter().sum();
        assert_eq!(attempts, 500);
    }

    #[test]
    fn incremental_posterior_matches_scratch_recomputation() {
        let data = Dataset::from_rows(
            vec![
                vec![0.0, 2.0],
                vec![0.5, 1.0],
                vec![1.0, 3.0],
                vec![1.5, 0.0],
                vec![2.0, 2.5],
                vec![2.5, 0.5],
            ],
            vec![0, 1, 0, 1, 0, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::new(2.0, 0.9, 0.5).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 6).unwrap();
        let mut sampler = McmcSampler::new(&data, &hyper, 37).unwrap();
        for i in 0..2000 {
            sampler.step().unwrap();
            if i % 200 == 0 {
                let (prior, ll) = sampler
                    .state()
                    .recompute_from_root(&data, &lik, &hyper)
                    .unwrap();
                assert_close(sampler.state().log_prior(), prior, 1e-9);
                assert_close(sampler.state().log_lik(), ll, 1e-9);
            }
        }
    }

    #[test]
    fn arena_stays_bounded_across_many_moves() {
        let data = line_data();
        let hyper = Hyperparams::new(2.0, 0.9, 0.5).unwrap();
        let mut sampler = McmcSampler::new(&data, &hyper, 5).unwrap();
        for _ in 0..30_000 {
            sampler.step().unwrap();
            // Four rows allow at most 7 active nodes; recycling keeps
            // the arena from creeping past that.
            assert!(sampler.state().arena_len() <= 7);
        }
    }

    #[test]
    fn zero_iterations_predict_with_the_root() {
        let data = line_data();
        let hyper = Hyperparams::default();
        let config = McmcConfig {
            iterations: 0,
            ..Default::default()
        };
        let run = mcmc_run(&data, &hyper, &config, Some(&data)).unwrap();
        let probs = run.mean_probs.unwrap();
        let expect = leaf_predictive(&[2, 2], hyper.alpha).unwrap();
        for row in &probs {
            assert_close(row[0], expect[0], 1e-12);
            assert_close(row[1], expect[1], 1e-12);
        }
        assert_eq!(run.final_state.num_nodes(), 1);
    }

    #[test]
    fn unsplittable_root_never_grows() {
        let data = Dataset::from_rows(vec![vec![1.0]; 4], vec![0, 1, 0, 1], 2).unwrap();
        let hyper = Hyperparams::default();
        let config = McmcConfig {
            iterations: 200,
            seed: 9,
            ..Default::default()
        };
        let run = mcmc_run(&data, &hyper, &config, None).unwrap();
        assert_eq!(run.final_state.num_nodes(), 1);
        assert_eq!(run.accepted, [0, 0, 0, 0]);
        assert_eq!(*run.final_state.node(ROOT).kind(), NodeKind::Stopped);
    }

    #[test]
    fn burn_in_is_respected_in_the_average() {
        let data = line_data();
        let hyper = Hyperparams::default();
        let config = McmcConfig {
            iterations: 50,
            burn_in: 50,
            seed: 3,
            ..Default::default()
        };
        // Averaging only the final state: probs equal its predictive.
        let run = mcmc_run(&data, &hyper, &config, Some(&data)).unwrap();
        let probs = run.mean_probs.unwrap();
        let direct = state_probs(&run.final_state, &data, hyper.alpha).unwrap();
        for (a, b) in probs.iter().zip(&direct) {
            assert_close(a[0], b[0], 1e-12);
        }
    }

    #[test]
    fn chain_visits_shapes_with_posterior_frequencies() {
        // Three points, eleven reachable shapes: a long chain's visit
        // frequencies should approach the enumerated posterior.
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![0, 1, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::new(2.0, 0.7, 0.8).unwrap();
        let exact = enumerate_posterior(&data, &hyper, 100_000).unwrap();
        let target = exact.probs_by_shape();

        let mut sampler = McmcSampler::new(&data, &hyper, 2024).unwrap();
        let iters = 60_000u64;
        let mut counts: HashMap<TreeShape, u64> = HashMap::new();
        for _ in 0..iters {
            sampler.step().unwrap();
            *counts
                .entry(shape_of_state(sampler.state(), &data))
                .or_insert(0) += 1;
        }
        let mut tv = 0.0;
        for (shape, &p) in &target {
            let freq = *counts.get(shape).unwrap_or(&0) as f64 / iters as f64;
            tv += 0.5 * (freq - p).abs();
        }
        for (shape, &c) in &counts {
            if !target.contains_key(shape) {
                panic!("chain visited an impossible shape {shape:?} ({c} times)");
            }
        }
        assert!(tv < 0.1, "total variation {tv} too large");
    }
}
