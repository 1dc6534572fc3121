//! Exact posterior over trees by exhaustive enumeration. Only viable
//! for small datasets, where it serves as ground truth for the
//! samplers.
//!
//! Trees are identified by shape: cut locations are collapsed to the
//! index of the gap between adjacent distinct feature values they fall
//! in, since the posterior is piecewise constant across each gap.

use std::collections::HashMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{
    block_stats, distinct_values, DecisionTreeState, DmLikelihood, Hyperparams, NodeKind, ROOT,
};

/// A tree up to cut-location equivalence. `gap` indexes the gaps
/// between adjacent distinct values of the node's own block along
/// `cut_dim`, in ascending order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TreeShape {
    Leaf,
    Split {
        cut_dim: usize,
        gap: usize,
        left: Box<TreeShape>,
        right: Box<TreeShape>,
    },
}

impl TreeShape {
    /// Total number of nodes, leaves included.
    pub fn num_nodes(&self) -> usize {
        match self {
            TreeShape::Leaf => 1,
            TreeShape::Split { left, right, .. } => 1 + left.num_nodes() + right.num_nodes(),
        }
    }

    pub fn num_leaves(&self) -> usize {
        match self {
            TreeShape::Leaf => 1,
            TreeShape::Split { left, right, .. } => left.num_leaves() + right.num_leaves(),
        }
    }
}

/// One fully grown tree with its exact prior and likelihood masses.
/// The prior mass integrates the cut-location density over the tree's
/// gaps, so masses over all shapes sum to one.
#[derive(Debug, Clone)]
pub struct EnumeratedTree {
    pub shape: TreeShape,
    pub log_prior: f64,
    pub log_lik: f64,
}

#[derive(Debug, Clone)]
pub struct EnumeratedPosterior {
    pub trees: Vec<EnumeratedTree>,
    /// Exact log marginal likelihood.
    pub log_marginal: f64,
}

impl EnumeratedPosterior {
    /// Posterior probability of each tree, aligned with `trees`.
    pub fn posterior_probs(&self) -> Vec<f64> {
        self.trees
            .iter()
            .map(|t| (t.log_prior + t.log_lik - self.log_marginal).exp())
            .collect()
    }

    /// Total prior mass, which must be one for a correct enumeration.
    pub fn prior_total(&self) -> f64 {
        self.trees.iter().map(|t| t.log_prior.exp()).sum()
    }

    pub fn mean_nodes(&self) -> f64 {
        self.trees
            .iter()
            .zip(self.posterior_probs())
            .map(|(t, p)| p * t.shape.num_nodes() as f64)
            .sum()
    }

    /// Posterior probability mass per shape.
    pub fn probs_by_shape(&self) -> HashMap<TreeShape, f64> {
        let mut map = HashMap::new();
        for (t, p) in self.trees.iter().zip(self.posterior_probs()) {
            *map.entry(t.shape.clone()).or_insert(0.0) += p;
        }
        map
    }
}

fn enumerate_block(
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    indices: &[u32],
    depth: u32,
    produced: &mut u64,
    budget: u64,
) -> Result<Vec<EnumeratedTree>> {
    let stats = block_stats(data, indices)?;
    let block_lik = lik.log_lik(&stats.class_counts);
    let split_prob = hyper.split_prob(depth);
    let charge = |produced: &mut u64| -> Result<()> {
        *produced += 1;
        if *produced > budget {
            Err(Error::InstanceTooLarge { limit: budget })
        } else {
            Ok(())
        }
    };
    charge(produced)?;
    let stop_prior = if stats.is_unsplittable() {
        0.0
    } else {
        (1.0 - split_prob).ln()
    };
    let mut out = vec![EnumeratedTree {
        shape: TreeShape::Leaf,
        log_prior: stop_prior,
        log_lik: block_lik,
    }];
    if stats.is_unsplittable() {
        return Ok(out);
    }
    let shared = split_prob.ln() - (stats.valid_dims.len() as f64).ln();
    for &dim in &stats.valid_dims {
        let vals = distinct_values(data, indices, dim);
        let extent_log = stats.extent_len(dim).ln();
        for gap in 0..vals.len() - 1 {
            // Any cut in the open gap produces this partition; its
            // prior mass is the density integrated over the gap.
            let mass = shared - extent_log + (vals[gap + 1] - vals[gap]).ln();
            let (li, ri, _, _) = DecisionTreeState::partition(data, indices, dim, vals[gap]);
            let left = enumerate_block(data, lik, hyper, &li, depth + 1, produced, budget)?;
            let right = enumerate_block(data, lik, hyper, &ri, depth + 1, produced, budget)?;
            for l in &left {
                for r in &right {
                    charge(produced)?;
                    out.push(EnumeratedTree {
                        shape: TreeShape::Split {
                            cut_dim: dim,
                            gap,
                            left: Box::new(l.shape.clone()),
                            right: Box::new(r.shape.clone()),
                        },
                        log_prior: mass + l.log_prior + r.log_prior,
                        log_lik: l.log_lik + r.log_lik,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Enumerates every tree shape the prior supports on `data`, with its
/// exact prior mass and likelihood. Fails with
/// [`Error::InstanceTooLarge`] once more than `budget` subtrees have
/// been generated.
pub fn enumerate_posterior(
    data: &Dataset,
    hyper: &Hyperparams,
    budget: u64,
) -> Result<EnumeratedPosterior> {
    let lik = DmLikelihood::new(hyper.alpha, data.num_classes(), data.n_rows())?;
    let indices: Vec<u32> = (0..data.n_rows() as u32).collect();
    let mut produced = 0;
    let trees = enumerate_block(data, &lik, hyper, &indices, 0, &mut produced, budget)?;
    let joint: Vec<f64> = trees.iter().map(|t| t.log_prior + t.log_lik).collect();
    let log_marginal = log_sum_exp(&joint);
    Ok(EnumeratedPosterior {
        trees,
        log_marginal,
    })
}

fn shape_of_node(state: &DecisionTreeState, data: &Dataset, idx: usize, indices: &[u32]) -> TreeShape {
    match *state.node(idx).kind() {
        NodeKind::Internal {
            cut_dim,
            cut_loc,
            left,
            right,
        } => {
            let vals = distinct_values(data, indices, cut_dim);
            // Gap index: how many of the block's distinct values sit at
            // or left of the cut.
            let gap = vals.iter().filter(|&&v| v <= cut_loc).count() - 1;
            let (li, ri, _, _) = DecisionTreeState::partition(data, indices, cut_dim, cut_loc);
            TreeShape::Split {
                cut_dim,
                gap,
                left: Box::new(shape_of_node(state, data, left, &li)),
                right: Box::new(shape_of_node(state, data, right, &ri)),
            }
        }
        _ => TreeShape::Leaf,
    }
}

/// Collapses a sampled tree to its shape, mapping each continuous cut
/// location to the gap of its node's block it falls in.
pub fn shape_of_state(state: &DecisionTreeState, data: &Dataset) -> TreeShape {
    let indices: Vec<u32> = (0..data.n_rows() as u32).collect();
    shape_of_node(state, data, ROOT, &indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Decision;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn hyper_flat() -> Hyperparams {
        // Depth-independent split probability keeps hand sums short.
        Hyperparams::new(2.0, 0.95, 0.0).unwrap()
    }

    #[test]
    fn unsplittable_instance_has_one_tree() {
        let data = Dataset::from_rows(vec![vec![1.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let post = enumerate_posterior(&data, &hyper_flat(), 1000).unwrap();
        assert_eq!(post.trees.len(), 1);
        assert_eq!(post.trees[0].shape, TreeShape::Leaf);
        assert_close(post.trees[0].log_prior, 0.0, 1e-12);
        // Marginal = dm likelihood of counts (1,1) = 1/6.
        assert_close(post.log_marginal, (1.0f64 / 6.0).ln(), 1e-12);
        assert_close(post.prior_total(), 1.0, 1e-12);
    }

    #[test]
    fn two_point_marginals_hand_summed() {
        // Two 1-D points at 0 and 1. Trees: stop at the root, or split
        // once (both children are then single points, forced leaves).
        let hyper = hyper_flat();

        // Different labels: 0.05 * (1/6) + 0.95 * (1/2)^2.
        let diff = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let post = enumerate_posterior(&diff, &hyper, 1000).unwrap();
        assert_eq!(post.trees.len(), 2);
        assert_close(post.log_marginal, (0.05f64 / 6.0 + 0.95 / 4.0).ln(), 1e-12);
        assert_close(post.log_marginal.exp(), 0.2458333333333333, 1e-12);

        // Same label: 0.05 * (1/3) + 0.95 * (1/2)^2 = 61/240.
        let same = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![0, 0], 2).unwrap();
        let post = enumerate_posterior(&same, &hyper, 1000).unwrap();
        assert_close(post.log_marginal.exp(), 61.0 / 240.0, 1e-12);
        assert_close(post.log_marginal.exp(), 0.2541666666666667, 1e-12);

        assert_close(post.prior_total(), 1.0, 1e-12);
    }

    #[test]
    fn prior_masses_sum_to_one() {
        let data = Dataset::from_rows(
            vec![vec![0.0, 3.0], vec![1.0, 1.0], vec![2.0, 4.0], vec![3.0, 0.0]],
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap();
        for beta in [0.0, 0.5, 1.5] {
            let hyper = Hyperparams::new(2.0, 0.9, beta).unwrap();
            let post = enumerate_posterior(&data, &hyper, 1_000_000).unwrap();
            assert!(post.trees.len() > 10);
            assert_close(post.prior_total(), 1.0, 1e-9);
            let probs = post.posterior_probs();
            assert_close(probs.iter().sum::<f64>(), 1.0, 1e-9);
            assert!(probs.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn budget_overflow_is_reported() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        match enumerate_posterior(&data, &hyper_flat(), 3) {
            Err(Error::InstanceTooLarge { limit }) => assert_eq!(limit, 3),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn mean_nodes_hand_computed() {
        let data = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let post = enumerate_posterior(&data, &hyper_flat(), 1000).unwrap();
        let z = 0.05 / 6.0 + 0.95 / 4.0;
        let expect = ((0.05 / 6.0) * 1.0 + (0.95 / 4.0) * 3.0) / z;
        assert_close(post.mean_nodes(), expect, 1e-12);
    }

    #[test]
    fn shapes_collapse_cut_locations_to_gaps() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![3.0]],
            vec![0, 1, 1],
            2,
        )
        .unwrap();
        let hyper = hyper_flat();
        let lik = DmLikelihood::new(2.0, 2, 3).unwrap();

        // Cuts at 1.0 and 2.9 both live in the second gap (1, 3).
        let mut shapes = Vec::new();
        for loc in [1.0, 2.9] {
            let mut state = DecisionTreeState::new_root(&data, &lik).unwrap();
            let stats = state.leaf_stats(&data, ROOT).unwrap();
            state
                .apply_decision(
                    &data,
                    &lik,
                    &hyper,
                    ROOT,
                    &stats,
                    Decision::Split {
                        cut_dim: 0,
                        cut_loc: loc,
                    },
                    1,
                )
                .unwrap();
            // Finish the splittable left child by stopping it.
            let eligible: Vec<usize> = state.eligible().to_vec();
            for idx in eligible {
                let s = state.leaf_stats(&data, idx).unwrap();
                state
                    .apply_decision(&data, &lik, &hyper, idx, &s, Decision::Stop, 2)
                    .unwrap();
            }
            shapes.push(shape_of_state(&state, &data));
        }
        assert_eq!(shapes[0], shapes[1]);
        match &shapes[0] {
            TreeShape::Split { cut_dim, gap, left, right } => {
                assert_eq!(*cut_dim, 0);
                assert_eq!(*gap, 1);
                assert_eq!(**left, TreeShape::Leaf);
                assert_eq!(**right, TreeShape::Leaf);
            }
            other => panic!("expected a split, got {other:?}"),
        }

        // A cut in the first gap is a different shape.
        let mut state = DecisionTreeState::new_root(&data, &lik).unwrap();
        let stats = state.leaf_stats(&data, ROOT).unwrap();
        state
            .apply_decision(
                &data,
                &lik,
                &hyper,
                ROOT,
                &stats,
                Decision::Split {
                    cut_dim: 0,
                    cut_loc: 0.4,
                },
                1,
            )
            .unwrap();
        let shape = shape_of_state(&state, &data);
        assert_ne!(shape, shapes[0]);
    }

    #[test]
    fn enumeration_agrees_with_sampled_prior_statistics() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::new(2.0, 0.5, 0.5).unwrap();
        let post = enumerate_posterior(&data, &hyper, 1_000_000).unwrap();
        let prior_mean_nodes: f64 = post
            .trees
            .iter()
            .map(|t| t.log_prior.exp() * t.shape.num_nodes() as f64)
            .sum();
        let prior_var_nodes: f64 = post
            .trees
            .iter()
            .map(|t| {
                t.log_prior.exp()
                    * (t.shape.num_nodes() as f64 - prior_mean_nodes).powi(2)
            })
            .sum();
        let draws = 20_000;
        let stats = crate::model::prior_tree_stats(
            &data,
            &DmLikelihood::new(2.0, 2, 4).unwrap(),
            &hyper,
            draws,
            71,
        )
        .unwrap();
        let se = (prior_var_nodes / draws as f64).sqrt();
        assert_close(stats.mean_nodes, prior_mean_nodes, 4.0 * se);
    }

    #[test]
    fn smc_marginal_estimate_approaches_exact_value() {
        let data = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let hyper = hyper_flat();
        let exact = enumerate_posterior(&data, &hyper, 1000)
            .unwrap()
            .log_marginal
            .exp();
        let config = crate::smc::SmcConfig {
            num_particles: 5000,
            seed: 12,
            ..Default::default()
        };
        let run = crate::smc::smc_run(&data, &hyper, &config).unwrap();
        assert_close(run.log_marginal.exp(), exact, 0.01);
    }
}
