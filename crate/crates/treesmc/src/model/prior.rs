//! The data-dependent tree prior: density evaluation and forward
//! sampling of the generative chain.

use rand::Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::Result;
use crate::math::derive_rng;
use crate::model::block::{block_stats, BlockStats};
use crate::model::hyper::Hyperparams;
use crate::model::likelihood::DmLikelihood;
use crate::model::node::NodeId;
use crate::model::tree::{Decision, DecisionTreeState, NodeKind, ROOT};

/// Log prior density of the decisions in `state`, recomputed from the
/// dataset without consulting any cached term. Eligible leaves carry
/// no decision yet and contribute nothing.
pub fn prior_log_density(
    state: &DecisionTreeState,
    data: &Dataset,
    hyper: &Hyperparams,
) -> Result<f64> {
    let indices: Vec<u32> = (0..data.n_rows() as u32).collect();
    density_rec(state, data, hyper, ROOT, indices)
}

fn density_rec(
    state: &DecisionTreeState,
    data: &Dataset,
    hyper: &Hyperparams,
    idx: usize,
    indices: Vec<u32>,
) -> Result<f64> {
    use crate::error::Error;
    let stats = block_stats(data, &indices)?;
    let node = state.node(idx);
    match *node.kind() {
        NodeKind::Eligible => Ok(0.0),
        NodeKind::Stopped => {
            if stats.is_unsplittable() {
                Ok(0.0)
            } else {
                Ok((1.0 - hyper.split_prob(node.depth())).ln())
            }
        }
        NodeKind::Internal {
            cut_dim,
            cut_loc,
            left,
            right,
        } => {
            if !stats.valid_dims.contains(&cut_dim) {
                return Err(Error::invalid_state(format!(
                    "internal node {idx} cuts non-varying dimension {cut_dim}"
                )));
            }
            let term = hyper.split_prob(node.depth()).ln()
                - (stats.valid_dims.len() as f64).ln()
                - stats.extent_len(cut_dim).ln();
            let (li, ri, _, _) = DecisionTreeState::partition(data, &indices, cut_dim, cut_loc);
            Ok(term
                + density_rec(state, data, hyper, left, li)?
                + density_rec(state, data, hyper, right, ri)?)
        }
        NodeKind::Free => Err(Error::invalid_state("reached a recycled arena slot")),
    }
}

/// Samples the prior's expansion decision for one leaf and returns it
/// with its log density. Blocks with no varying dimension stop with
/// probability one (density term 0). The stream consumes draws in a
/// fixed order: stop/split coin, then dimension, then location.
pub fn sample_prior_decision(
    stats: &BlockStats,
    depth: u32,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> (Decision, f64) {
    if stats.is_unsplittable() {
        return (Decision::Stop, 0.0);
    }
    let split_prob = hyper.split_prob(depth);
    if rng.random::<f64>() >= split_prob {
        return (Decision::Stop, (1.0 - split_prob).ln());
    }
    let cut_dim = stats.valid_dims[rng.random_range(0..stats.valid_dims.len())];
    let (lo, hi) = stats.extents[cut_dim];
    let cut_loc = rng.random_range(lo..hi);
    let log_density =
        split_prob.ln() - (stats.valid_dims.len() as f64).ln() - (hi - lo).ln();
    (
        Decision::Split { cut_dim, cut_loc },
        log_density,
    )
}

/// Draws one complete tree from the data-dependent prior by expanding
/// eligible leaves first-created-first until none remain.
pub fn sample_from_prior(
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> Result<DecisionTreeState> {
    let mut state = DecisionTreeState::new_root(data, lik)?;
    let mut stage = 0;
    while let Some(&idx) = state.eligible().first() {
        stage += 1;
        let stats = state.leaf_stats(data, idx)?;
        let depth = state.node(idx).depth();
        let (decision, _) = sample_prior_decision(&stats, depth, hyper, rng);
        state.apply_decision(data, lik, hyper, idx, &stats, decision, stage)?;
    }
    Ok(state)
}

/// Summary of tree shapes under the prior. Depth of a tree is the
/// depth of its deepest node; node count includes internals and leaves.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PriorTreeStats {
    pub draws: usize,
    pub mean_depth: f64,
    pub sd_depth: f64,
    pub mean_nodes: f64,
    pub sd_nodes: f64,
    pub mean_leaves: f64,
}

/// Monte Carlo estimate of prior tree-shape statistics; draw `i` uses
/// the RNG stream derived from `(seed, i)`, so results do not depend
/// on thread scheduling.
pub fn prior_tree_stats(
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    draws: usize,
    seed: u64,
) -> Result<PriorTreeStats> {
    use crate::error::Error;
    if draws == 0 {
        return Err(Error::invalid_parameter("need at least one prior draw"));
    }
    let shapes: Vec<(f64, f64, f64)> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = derive_rng(seed, &[i as u64]);
            let tree = sample_from_prior(data, lik, hyper, &mut rng)?;
            Ok((
                tree.max_depth() as f64,
                tree.num_nodes() as f64,
                tree.num_leaves() as f64,
            ))
        })
        .collect::<Result<_>>()?;
    let n = draws as f64;
    let mean = |f: fn(&(f64, f64, f64)) -> f64| shapes.iter().map(f).sum::<f64>() / n;
    let mean_depth = mean(|s| s.0);
    let mean_nodes = mean(|s| s.1);
    let mean_leaves = mean(|s| s.2);
    let var = |f: fn(&(f64, f64, f64)) -> f64, m: f64| {
        shapes.iter().map(|s| (f(s) - m).powi(2)).sum::<f64>() / n
    };
    Ok(PriorTreeStats {
        draws,
        mean_depth,
        sd_depth: var(|s| s.0, mean_depth).sqrt(),
        mean_nodes,
        sd_nodes: var(|s| s.1, mean_nodes).sqrt(),
        mean_leaves,
    })
}

/// Replays the generative chain that produced a complete state,
/// summing per-decision log transition densities. Equals
/// [`prior_log_density`] on complete states; used as an independent
/// cross-check of the per-node product form.
pub fn prior_log_density_by_replay(
    state: &DecisionTreeState,
    data: &Dataset,
    hyper: &Hyperparams,
) -> Result<f64> {
    use crate::error::Error;
    // Walk the chain the way sampling does: a queue of (path, rows).
    let mut queue: std::collections::VecDeque<(NodeId, Vec<u32>)> = std::collections::VecDeque::new();
    queue.push_back((NodeId::root(), (0..data.n_rows() as u32).collect()));
    let mut total = 0.0;
    while let Some((path, indices)) = queue.pop_front() {
        let stats = block_stats(data, &indices)?;
        // Locate this path in the finished tree.
        let mut idx = ROOT;
        for &b in path.bits() {
            match *state.node(idx).kind() {
                NodeKind::Internal { left, right, .. } => {
                    idx = if b == 0 { left } else { right };
                }
                _ => return Err(Error::invalid_state("path leaves the tree")),
            }
        }
        let depth = path.depth();
        match *state.node(idx).kind() {
            NodeKind::Stopped => {
                if !stats.is_unsplittable() {
                    total += (1.0 - hyper.split_prob(depth)).ln();
                }
            }
            NodeKind::Internal {
                cut_dim, cut_loc, ..
            } => {
                total += hyper.split_prob(depth).ln()
                    - (stats.valid_dims.len() as f64).ln()
                    - stats.extent_len(cut_dim).ln();
                let (li, ri, _, _) =
                    DecisionTreeState::partition(data, &indices, cut_dim, cut_loc);
                queue.push_back((path.child(crate::model::node::Side::Left), li));
                queue.push_back((path.child(crate::model::node::Side::Right), ri));
            }
            NodeKind::Eligible => {
                return Err(Error::invalid_state("replay requires a complete state"))
            }
            NodeKind::Free => return Err(Error::invalid_state("reached a recycled slot")),
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tree::ROOT;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn grid4() -> (Dataset, DmLikelihood, Hyperparams) {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        let data = Dataset::from_rows(rows, vec![0, 1, 1, 0], 2).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 4).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.5).unwrap();
        (data, lik, hyper)
    }

    #[test]
    fn stopped_root_density() {
        let (data, lik, hyper) = grid4();
        let mut s = DecisionTreeState::new_root(&data, &lik).unwrap();
        let stats = s.leaf_stats(&data, ROOT).unwrap();
        s.apply_decision(&data, &lik, &hyper, ROOT, &stats, Decision::Stop, 1)
            .unwrap();
        let lp = prior_log_density(&s, &data, &hyper).unwrap();
        assert_close(lp, 0.05f64.ln(), 1e-12);
        assert_close(lp, -2.99573, 1e-5);
    }

    #[test]
    fn unsplittable_root_density_is_zero() {
        let data = Dataset::from_rows(vec![vec![1.0], vec![1.0]], vec![0, 1], 2).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 2).unwrap();
        let hyper = Hyperparams::default();
        let mut s = DecisionTreeState::new_root(&data, &lik).unwrap();
        let stats = s.leaf_stats(&data, ROOT).unwrap();
        s.apply_decision(&data, &lik, &hyper, ROOT, &stats, Decision::Stop, 1)
            .unwrap();
        assert_eq!(prior_log_density(&s, &data, &hyper).unwrap(), 0.0);
    }

    #[test]
    fn split_with_stopped_children_density() {
        let (data, lik, hyper) = grid4();
        let mut s = DecisionTreeState::new_root(&data, &lik).unwrap();
        let stats = s.leaf_stats(&data, ROOT).unwrap();
        let out = s
            .apply_decision(
                &data,
                &lik,
                &hyper,
                ROOT,
                &stats,
                Decision::Split {
                    cut_dim: 0,
                    cut_loc: 0.5,
                },
                1,
            )
            .unwrap();
        let (l, r) = out.children.unwrap();
        for child in [l, r] {
            let cs = s.leaf_stats(&data, child).unwrap();
            assert!(!cs.is_unsplittable());
            s.apply_decision(&data, &lik, &hyper, child, &cs, Decision::Stop, 2)
                .unwrap();
        }
        let expect = 0.95f64.ln() - 2.0f64.ln() - 1.0f64.ln()
            + 2.0 * (1.0 - 0.95 / 2.0f64.sqrt()).ln();
        let lp = prior_log_density(&s, &data, &hyper).unwrap();
        assert_close(lp, expect, 1e-12);
        // Replay of the generative chain agrees.
        let replay = prior_log_density_by_replay(&s, &data, &hyper).unwrap();
        assert_close(replay, lp, 1e-12);
        // Incremental cache agrees too.
        assert_close(s.log_prior(), lp, 1e-12);
    }

    #[test]
    fn sampled_trees_satisfy_density_identities() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i % 4) as f64, (i / 4) as f64 * 0.5, ((i * 7) % 5) as f64])
            .collect();
        let labels: Vec<usize> = (0..12).map(|i| (i % 3 == 0) as usize).collect();
        let data = Dataset::from_rows(rows, labels, 2).unwrap();
        let lik = DmLikelihood::new(3.0, 2, 12).unwrap();
        let hyper = Hyperparams::new(3.0, 0.8, 0.6).unwrap();
        for seed in 0..30u64 {
            let mut rng = derive_rng(seed, &[]);
            let tree = sample_from_prior(&data, &lik, &hyper, &mut rng).unwrap();
            assert!(tree.is_complete());
            assert!(tree.num_nodes() < 2 * data.n_rows());
            let direct = prior_log_density(&tree, &data, &hyper).unwrap();
            let replay = prior_log_density_by_replay(&tree, &data, &hyper).unwrap();
            assert_close(direct, replay, 1e-9);
            assert_close(direct, tree.log_prior(), 1e-9);
            let (lp, ll) = tree.recompute_from_root(&data, &lik, &hyper).unwrap();
            assert_close(lp, direct, 1e-9);
            assert_close(ll, tree.log_lik(), 1e-9);
        }
    }

    #[test]
    fn degenerate_dataset_yields_single_leaf() {
        let data =
            Dataset::from_rows(vec![vec![2.0, 2.0]; 5], vec![0, 1, 0, 1, 0], 2).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 5).unwrap();
        let hyper = Hyperparams::default();
        let mut rng = derive_rng(0, &[]);
        let tree = sample_from_prior(&data, &lik, &hyper, &mut rng).unwrap();
        assert_eq!(tree.num_nodes(), 1);
        assert_eq!(prior_log_density(&tree, &data, &hyper).unwrap(), 0.0);
    }

    #[test]
    fn prior_stats_reflect_split_probability() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let data = Dataset::from_rows(rows, labels, 2).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 40).unwrap();
        // Tiny split probability: trees are mostly lone roots.
        let hyper = Hyperparams::new(2.0, 0.05, 0.0).unwrap();
        let stats = prior_tree_stats(&data, &lik, &hyper, 4000, 7).unwrap();
        assert!(stats.mean_nodes < 1.5, "mean nodes {}", stats.mean_nodes);
        assert!(stats.mean_depth < 0.3, "mean depth {}", stats.mean_depth);
        // Determinism across calls.
        let again = prior_tree_stats(&data, &lik, &hyper, 4000, 7).unwrap();
        assert_eq!(stats.mean_nodes, again.mean_nodes);
        assert_eq!(stats.mean_depth, again.mean_depth);
    }
}
