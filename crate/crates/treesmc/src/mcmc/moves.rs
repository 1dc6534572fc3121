//! The four Metropolis-Hastings moves. Each proposal function builds
//! the candidate state and the full log acceptance ratio, including
//! every target-selection and cut-density term.

use crate::data::Dataset;
use crate::error::Result;
use crate::model::{block_stats, DecisionTreeState, DmLikelihood, Hyperparams, NodeKind};

#[derive(Debug, Clone)]
pub(crate) struct MoveProposal {
    pub state: DecisionTreeState,
    /// `log [pi(next) q(next -> cur)] - log [pi(cur) q(cur -> next)]`.
    pub log_ratio: f64,
}

/// Stopped leaves whose block still varies along some dimension.
pub(crate) fn growable_leaves(state: &DecisionTreeState, data: &Dataset) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for idx in state.active_nodes() {
        if *state.node(idx).kind() != NodeKind::Stopped {
            continue;
        }
        if !state.leaf_stats(data, idx)?.is_unsplittable() {
            out.push(idx);
        }
    }
    Ok(out)
}

/// Internal nodes whose children are both stopped leaves.
pub(crate) fn prunable_internals(state: &DecisionTreeState) -> Vec<usize> {
    state
        .active_nodes()
        .filter(|&idx| match *state.node(idx).kind() {
            NodeKind::Internal { left, right, .. } => {
                *state.node(left).kind() == NodeKind::Stopped
                    && *state.node(right).kind() == NodeKind::Stopped
            }
            _ => false,
        })
        .collect()
}

pub(crate) fn internal_nodes(state: &DecisionTreeState) -> Vec<usize> {
    state
        .active_nodes()
        .filter(|&idx| matches!(state.node(idx).kind(), NodeKind::Internal { .. }))
        .collect()
}

/// `(parent, child)` pairs where both are internal.
pub(crate) fn swap_pairs(state: &DecisionTreeState) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for idx in internal_nodes(state) {
        if let NodeKind::Internal { left, right, .. } = *state.node(idx).kind() {
            for child in [left, right] {
                if matches!(state.node(child).kind(), NodeKind::Internal { .. }) {
                    out.push((idx, child));
                }
            }
        }
    }
    out
}

/// Grow at a known leaf with a known cut. Acceptance ratio:
/// posterior change, times the reverse prune selection `1/p(next)`,
/// over the forward density `1/(g * |dims| * extent)`.
pub(crate) fn grow_proposal_at(
    state: &DecisionTreeState,
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    idx: usize,
    cut_dim: usize,
    cut_loc: f64,
    growable_count: usize,
) -> Result<MoveProposal> {
    let stats = state.leaf_stats(data, idx)?;
    let mut next = state.clone();
    next.grow_stopped_leaf(data, lik, hyper, idx, cut_dim, cut_loc)?;
    let prunable_after = prunable_internals(&next).len();
    let log_ratio = next.log_posterior() - state.log_posterior()
        + (growable_count as f64).ln()
        + (stats.valid_dims.len() as f64).ln()
        + stats.extent_len(cut_dim).ln()
        - (prunable_after as f64).ln();
    Ok(MoveProposal { state: next, log_ratio })
}

/// Prune a known internal node with two stopped-leaf children.
pub(crate) fn prune_proposal_at(
    state: &DecisionTreeState,
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    idx: usize,
    prunable_count: usize,
) -> Result<MoveProposal> {
    let cut_dim = match *state.node(idx).kind() {
        NodeKind::Internal { cut_dim, .. } => cut_dim,
        _ => unreachable!("prune target must be internal"),
    };
    let mut next = state.clone();
    next.prune_to_leaf(lik, hyper, idx)?;
    let growable_after = growable_leaves(&next, data)?.len();
    // Reverse move: grow the merged leaf with the removed cut.
    let stats = next.leaf_stats(data, idx)?;
    let log_ratio = next.log_posterior() - state.log_posterior()
        + (prunable_count as f64).ln()
        - (growable_after as f64).ln()
        - (stats.valid_dims.len() as f64).ln()
        - stats.extent_len(cut_dim).ln();
    Ok(MoveProposal { state: next, log_ratio })
}

/// Replace the cut of a known internal node and rebuild its subtree.
/// Returns `None` when the new partition drives any descendant cut out
/// of support. Selection terms cancel except the cut-location density,
/// whose extent depends on the dimension.
pub(crate) fn change_proposal_at(
    state: &DecisionTreeState,
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    idx: usize,
    new_dim: usize,
    new_loc: f64,
) -> Result<Option<MoveProposal>> {
    let (old_dim, left, right) = match *state.node(idx).kind() {
        NodeKind::Internal {
            cut_dim,
            left,
            right,
            ..
        } => (cut_dim, left, right),
        _ => unreachable!("change target must be internal"),
    };
    let indices = state.subtree_indices(idx);
    let stats = block_stats(data, &indices)?;
    let mut next = state.clone();
    next.nodes[idx].kind = NodeKind::Internal {
        cut_dim: new_dim,
        cut_loc: new_loc,
        left,
        right,
    };
    if !next.rebuild_subtree(data, lik, hyper, idx, indices)? {
        return Ok(None);
    }
    let log_ratio = next.log_posterior() - state.log_posterior()
        + stats.extent_len(new_dim).ln()
        - stats.extent_len(old_dim).ln();
    Ok(Some(MoveProposal { state: next, log_ratio }))
}

/// Swap the cut rules of an internal parent-child pair and rebuild
/// below the parent. The pair set is preserved, so selection cancels
/// and the ratio is the posterior change alone.
pub(crate) fn swap_proposal_at(
    state: &DecisionTreeState,
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    parent: usize,
    child: usize,
) -> Result<Option<MoveProposal>> {
    let (p_dim, p_loc, p_left, p_right) = match *state.node(parent).kind() {
        NodeKind::Internal {
            cut_dim,
            cut_loc,
            left,
            right,
        } => (cut_dim, cut_loc, left, right),
        _ => unreachable!("swap parent must be internal"),
    };
    let (c_dim, c_loc, c_left, c_right) = match *state.node(child).kind() {
        NodeKind::Internal {
            cut_dim,
            cut_loc,
            left,
            right,
        } => (cut_dim, cut_loc, left, right),
        _ => unreachable!("swap child must be internal"),
    };
    let indices = state.subtree_indices(parent);
    let mut next = state.clone();
    next.nodes[parent].kind = NodeKind::Internal {
        cut_dim: c_dim,
        cut_loc: c_loc,
        left: p_left,
        right: p_right,
    };
    next.nodes[child].kind = NodeKind::Internal {
        cut_dim: p_dim,
        cut_loc: p_loc,
        left: c_left,
        right: c_right,
    };
    if !next.rebuild_subtree(data, lik, hyper, parent, indices)? {
        return Ok(None);
    }
    let log_ratio = next.log_posterior() - state.log_posterior();
    Ok(Some(MoveProposal { state: next, log_ratio }))
}
