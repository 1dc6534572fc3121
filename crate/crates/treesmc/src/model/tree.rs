//! Partial and complete decision-tree states over a fixed dataset.
//!
//! Nodes live in an arena indexed by `usize`; every node caches the
//! class histogram and log likelihood of its block, and decided nodes
//! cache their contribution to the log prior density. Leaves also keep
//! the row indices of their block so they can be expanded later. The
//! arena uses a free list so MCMC moves that delete nodes do not grow
//! it without bound.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::block::{block_stats, BlockStats};
use crate::model::hyper::Hyperparams;
use crate::model::likelihood::DmLikelihood;
use crate::model::node::{NodeId, Side};

/// Role of an arena slot.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Leaf that has not been considered for expansion yet.
    Eligible,
    /// Leaf whose expansion decision was "stop".
    Stopped,
    Internal {
        cut_dim: usize,
        cut_loc: f64,
        left: usize,
        right: usize,
    },
    /// Recycled slot; unreachable from the root.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub(crate) parent: Option<usize>,
    pub(crate) side: Option<Side>,
    pub(crate) depth: u32,
    pub(crate) created_stage: u32,
    pub(crate) decided_stage: Option<u32>,
    pub(crate) kind: NodeKind,
    pub(crate) class_counts: Vec<u64>,
    /// Log likelihood of this node's block.
    pub(crate) log_lik: f64,
    /// This node's term in the log prior density; zero while eligible.
    pub(crate) log_prior_term: f64,
    /// Rows routed here; populated for leaves, empty for internals.
    pub(crate) indices: Vec<u32>,
}

impl Node {
    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn created_stage(&self) -> u32 {
        self.created_stage
    }

    pub fn decided_stage(&self) -> Option<u32> {
        self.decided_stage
    }

    pub fn class_counts(&self) -> &[u64] {
        &self.class_counts
    }

    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn count(&self) -> u64 {
        self.class_counts.iter().sum()
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Eligible | NodeKind::Stopped)
    }
}

/// Expansion decision for an eligible leaf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Stop,
    Split { cut_dim: usize, cut_loc: f64 },
}

/// Effect of applying a decision.
#[derive(Debug, Clone, Copy)]
pub struct ApplyOutcome {
    /// Change in the summed leaf log likelihood.
    pub lik_delta: f64,
    /// Arena indices of the children created by a split.
    pub children: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTreeState {
    pub(crate) nodes: Vec<Node>,
    free: Vec<usize>,
    /// Eligible leaves in creation order.
    eligible: Vec<usize>,
    log_prior: f64,
    log_lik: f64,
    stage: u32,
}

pub const ROOT: usize = 0;

impl DecisionTreeState {
    /// Fresh state holding the whole dataset in one eligible root leaf.
    pub fn new_root(data: &Dataset, lik: &DmLikelihood) -> Result<Self> {
        if data.n_rows() > u32::MAX as usize {
            return Err(Error::invalid_parameter("dataset too large for u32 rows"));
        }
        let indices: Vec<u32> = (0..data.n_rows() as u32).collect();
        let class_counts = data.class_counts();
        let log_lik = lik.log_lik(&class_counts);
        let root = Node {
            parent: None,
            side: None,
            depth: 0,
            created_stage: 0,
            decided_stage: None,
            kind: NodeKind::Eligible,
            class_counts,
            log_lik,
            log_prior_term: 0.0,
            indices,
        };
        Ok(DecisionTreeState {
            nodes: vec![root],
            free: Vec::new(),
            eligible: vec![ROOT],
            log_prior: 0.0,
            log_lik,
            stage: 0,
        })
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    /// Eligible leaves in creation order (stage created, left before
    /// right within a stage).
    pub fn eligible(&self) -> &[usize] {
        &self.eligible
    }

    pub fn is_complete(&self) -> bool {
        self.eligible.is_empty()
    }

    /// Log prior density of all decisions made so far.
    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    /// Summed log likelihood over current leaves (eligible included).
    pub fn log_lik(&self) -> f64 {
        self.log_lik
    }

    /// Unnormalized log posterior of a complete state.
    pub fn log_posterior(&self) -> f64 {
        self.log_prior + self.log_lik
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    /// Left/right path of an arena node.
    pub fn path(&self, idx: usize) -> NodeId {
        let mut bits = Vec::with_capacity(self.nodes[idx].depth as usize);
        let mut cur = idx;
        while let Some(p) = self.nodes[cur].parent {
            bits.push(match self.nodes[cur].side {
                Some(Side::Left) => 0,
                Some(Side::Right) => 1,
                None => unreachable!("non-root node lacks a side"),
            });
            cur = p;
        }
        bits.reverse();
        NodeId::from_bits(bits)
    }

    /// Arena indices of live nodes (skips recycled slots).
    pub fn active_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.kind != NodeKind::Free)
            .map(|(i, _)| i)
    }

    pub fn leaf_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.is_leaf())
            .map(|(i, _)| i)
    }

    pub fn num_nodes(&self) -> usize {
        self.active_nodes().count()
    }

    pub fn num_leaves(&self) -> usize {
        self.leaf_nodes().count()
    }

    pub fn max_depth(&self) -> u32 {
        self.active_nodes()
            .map(|i| self.nodes[i].depth)
            .max()
            .unwrap_or(0)
    }

    /// Block statistics of a leaf, recomputed from its stored rows.
    pub fn leaf_stats(&self, data: &Dataset, idx: usize) -> Result<BlockStats> {
        if !self.nodes[idx].is_leaf() {
            return Err(Error::invalid_state(format!(
                "node {idx} is not a leaf"
            )));
        }
        block_stats(data, &self.nodes[idx].indices)
    }

    /// Leaf reached by routing `x` from the root; points at a cut go
    /// left. Eligible leaves terminate routing like stopped ones.
    pub fn route_idx(&self, x: &[f64]) -> usize {
        let mut cur = ROOT;
        loop {
            match self.nodes[cur].kind {
                NodeKind::Internal {
                    cut_dim,
                    cut_loc,
                    left,
                    right,
                } => {
                    cur = if x[cut_dim] <= cut_loc { left } else { right };
                }
                _ => return cur,
            }
        }
    }

    pub fn route(&self, x: &[f64]) -> NodeId {
        self.path(self.route_idx(x))
    }

    fn remove_eligible(&mut self, idx: usize) -> Result<()> {
        let pos = self
            .eligible
            .iter()
            .position(|&e| e == idx)
            .ok_or_else(|| Error::invalid_state(format!("node {idx} is not eligible")))?;
        self.eligible.remove(pos);
        Ok(())
    }

    pub(crate) fn alloc(&mut self, node: Node) -> usize {
        match self.free.pop() {
            Some(slot) => {
                self.nodes[slot] = node;
                slot
            }
            None => {
                self.nodes.push(node);
                self.nodes.len() - 1
            }
        }
    }

    pub(crate) fn release(&mut self, idx: usize) {
        self.nodes[idx].kind = NodeKind::Free;
        self.nodes[idx].indices = Vec::new();
        self.nodes[idx].class_counts = Vec::new();
        self.nodes[idx].log_prior_term = 0.0;
        self.free.push(idx);
    }

    /// Splits the rows of `parent_indices` on `x[cut_dim] <= cut_loc`,
    /// preserving order, and tallies class counts per side.
    pub(crate) fn partition(
        data: &Dataset,
        parent_indices: &[u32],
        cut_dim: usize,
        cut_loc: f64,
    ) -> (Vec<u32>, Vec<u32>, Vec<u64>, Vec<u64>) {
        let k = data.num_classes();
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut left_counts = vec![0u64; k];
        let mut right_counts = vec![0u64; k];
        for &r in parent_indices {
            if data.x(r as usize, cut_dim) <= cut_loc {
                left_counts[data.label(r as usize)] += 1;
                left.push(r);
            } else {
                right_counts[data.label(r as usize)] += 1;
                right.push(r);
            }
        }
        (left, right, left_counts, right_counts)
    }

    /// Applies an expansion decision to an eligible leaf during
    /// `stage`, maintaining the prior and likelihood caches.
    pub fn apply_decision(
        &mut self,
        data: &Dataset,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
        idx: usize,
        stats: &BlockStats,
        decision: Decision,
        stage: u32,
    ) -> Result<ApplyOutcome> {
        if self.nodes[idx].kind != NodeKind::Eligible {
            return Err(Error::invalid_state(format!(
                "node {idx} is not eligible for expansion"
            )));
        }
        let depth = self.nodes[idx].depth;
        let split_prob = hyper.split_prob(depth);
        self.remove_eligible(idx)?;
        self.nodes[idx].decided_stage = Some(stage);
        self.stage = self.stage.max(stage);
        match decision {
            Decision::Stop => {
                // Unsplittable leaves stop with probability one and
                // contribute nothing to the prior density.
                let term = if stats.is_unsplittable() {
                    0.0
                } else {
                    (1.0 - split_prob).ln()
                };
                self.nodes[idx].kind = NodeKind::Stopped;
                self.nodes[idx].log_prior_term = term;
                self.log_prior += term;
                Ok(ApplyOutcome {
                    lik_delta: 0.0,
                    children: None,
                })
            }
            Decision::Split { cut_dim, cut_loc } => {
                if !stats.valid_dims.contains(&cut_dim) {
                    return Err(Error::invalid_state(format!(
                        "cut dimension {cut_dim} does not vary within the block"
                    )));
                }
                let (lo, hi) = stats.extents[cut_dim];
                if !(cut_loc >= lo && cut_loc < hi) {
                    return Err(Error::invalid_state(format!(
                        "cut location {cut_loc} outside [{lo}, {hi})"
                    )));
                }
                let parent_indices = std::mem::take(&mut self.nodes[idx].indices);
                let (li, ri, lc, rc) = Self::partition(data, &parent_indices, cut_dim, cut_loc);
                debug_assert!(!li.is_empty() && !ri.is_empty());
                let parent_log_lik = self.nodes[idx].log_lik;
                let left_log_lik = lik.log_lik(&lc);
                let right_log_lik = lik.log_lik(&rc);
                let make_child = |side, indices: Vec<u32>, counts: Vec<u64>, ll| Node {
                    parent: Some(idx),
                    side: Some(side),
                    depth: depth + 1,
                    created_stage: stage,
                    decided_stage: None,
                    kind: NodeKind::Eligible,
                    class_counts: counts,
                    log_lik: ll,
                    log_prior_term: 0.0,
                    indices,
                };
                let left = self.alloc(make_child(Side::Left, li, lc, left_log_lik));
                let right = self.alloc(make_child(Side::Right, ri, rc, right_log_lik));
                let term = split_prob.ln()
                    - (stats.valid_dims.len() as f64).ln()
                    - stats.extent_len(cut_dim).ln();
                self.nodes[idx].kind = NodeKind::Internal {
                    cut_dim,
                    cut_loc,
                    left,
                    right,
                };
                self.nodes[idx].log_prior_term = term;
                self.log_prior += term;
                self.eligible.push(left);
                self.eligible.push(right);
                let lik_delta = left_log_lik + right_log_lik - parent_log_lik;
                self.log_lik += lik_delta;
                Ok(ApplyOutcome {
                    lik_delta,
                    children: Some((left, right)),
                })
            }
        }
    }

    /// Recomputes the log prior density and summed leaf log likelihood
    /// by re-partitioning the dataset from the root, ignoring every
    /// cached quantity. Serves as an independent cross-check of the
    /// incremental bookkeeping.
    pub fn recompute_from_root(
        &self,
        data: &Dataset,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
    ) -> Result<(f64, f64)> {
        let indices: Vec<u32> = (0..data.n_rows() as u32).collect();
        let mut log_prior = 0.0;
        let mut log_lik = 0.0;
        self.recompute_rec(data, lik, hyper, ROOT, indices, &mut log_prior, &mut log_lik)?;
        Ok((log_prior, log_lik))
    }

    fn recompute_rec(
        &self,
        data: &Dataset,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
        idx: usize,
        indices: Vec<u32>,
        log_prior: &mut f64,
        log_lik: &mut f64,
    ) -> Result<()> {
        let stats = block_stats(data, &indices)?;
        let node = &self.nodes[idx];
        match node.kind {
            NodeKind::Eligible => {
                *log_lik += lik.log_lik(&stats.class_counts);
            }
            NodeKind::Stopped => {
                *log_lik += lik.log_lik(&stats.class_counts);
                if !stats.is_unsplittable() {
                    *log_prior += (1.0 - hyper.split_prob(node.depth)).ln();
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
                        "internal node {idx} cuts a non-varying dimension"
                    )));
                }
                let (lo, hi) = stats.extents[cut_dim];
                if !(cut_loc >= lo && cut_loc < hi) {
                    return Err(Error::invalid_state(format!(
                        "internal node {idx} cut {cut_loc} outside [{lo}, {hi})"
                    )));
                }
                *log_prior += hyper.split_prob(node.depth).ln()
                    - (stats.valid_dims.len() as f64).ln()
                    - stats.extent_len(cut_dim).ln();
                let (li, ri, _, _) = Self::partition(data, &indices, cut_dim, cut_loc);
                self.recompute_rec(data, lik, hyper, left, li, log_prior, log_lik)?;
                self.recompute_rec(data, lik, hyper, right, ri, log_prior, log_lik)?;
            }
            NodeKind::Free => {
                return Err(Error::invalid_state("reached a recycled arena slot"));
            }
        }
        Ok(())
    }

    /// Ascending row indices covered by the subtree rooted at `idx`,
    /// gathered from its leaves.
    pub fn subtree_indices(&self, idx: usize) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            match self.nodes[i].kind {
                NodeKind::Internal { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
                NodeKind::Free => unreachable!("free slot linked from {idx}"),
                _ => out.extend_from_slice(&self.nodes[i].indices),
            }
        }
        // Partitioning preserves the ascending order of the root rows,
        // so sorting the gathered leaves restores the block exactly.
        out.sort_unstable();
        out
    }

    /// Arena capacity including recycled slots; bounded over long
    /// grow/prune sequences because slots are reused.
    pub fn arena_len(&self) -> usize {
        self.nodes.len()
    }

    /// Turns a stopped leaf into an internal node with two stopped
    /// children; the reverse of [`Self::prune_to_leaf`]. Returns the
    /// child arena indices.
    pub fn grow_stopped_leaf(
        &mut self,
        data: &Dataset,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
        idx: usize,
        cut_dim: usize,
        cut_loc: f64,
    ) -> Result<(usize, usize)> {
        if self.nodes[idx].kind != NodeKind::Stopped {
            return Err(Error::invalid_state(format!(
                "node {idx} is not a stopped leaf"
            )));
        }
        let stats = block_stats(data, &self.nodes[idx].indices)?;
        if !stats.valid_dims.contains(&cut_dim) {
            return Err(Error::invalid_state(format!(
                "cut dimension {cut_dim} does not vary within the block"
            )));
        }
        let (lo, hi) = stats.extents[cut_dim];
        if !(cut_loc >= lo && cut_loc < hi) {
            return Err(Error::invalid_state(format!(
                "cut location {cut_loc} outside [{lo}, {hi})"
            )));
        }
        let depth = self.nodes[idx].depth;
        let split_prob = hyper.split_prob(depth);
        let stage = self.stage;
        let parent_indices = std::mem::take(&mut self.nodes[idx].indices);
        let (li, ri, lc, rc) = Self::partition(data, &parent_indices, cut_dim, cut_loc);
        let parent_log_lik = self.nodes[idx].log_lik;
        let old_term = self.nodes[idx].log_prior_term;

        let child_split_prob = hyper.split_prob(depth + 1);
        let mut make_child = |side, indices: Vec<u32>, counts: Vec<u64>| -> Result<usize> {
            let child_stats = block_stats(data, &indices)?;
            let term = if child_stats.is_unsplittable() {
                0.0
            } else {
                (1.0 - child_split_prob).ln()
            };
            let log_lik = lik.log_lik(&counts);
            self.log_prior += term;
            self.log_lik += log_lik;
            Ok(self.alloc(Node {
                parent: Some(idx),
                side: Some(side),
                depth: depth + 1,
                created_stage: stage,
                decided_stage: Some(stage),
                kind: NodeKind::Stopped,
                class_counts: counts,
                log_lik,
                log_prior_term: term,
                indices,
            }))
        };
        let left = make_child(Side::Left, li, lc)?;
        let right = make_child(Side::Right, ri, rc)?;

        let term = split_prob.ln()
            - (stats.valid_dims.len() as f64).ln()
            - stats.extent_len(cut_dim).ln();
        self.nodes[idx].kind = NodeKind::Internal {
            cut_dim,
            cut_loc,
            left,
            right,
        };
        self.nodes[idx].log_prior_term = term;
        self.log_prior += term - old_term;
        self.log_lik -= parent_log_lik;
        Ok((left, right))
    }

    /// Collapses an internal node whose children are both stopped
    /// leaves back into a stopped leaf; the reverse of
    /// [`Self::grow_stopped_leaf`].
    pub fn prune_to_leaf(
        &mut self,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
        idx: usize,
    ) -> Result<()> {
        let (left, right) = match self.nodes[idx].kind {
            NodeKind::Internal { left, right, .. } => (left, right),
            _ => {
                return Err(Error::invalid_state(format!(
                    "node {idx} is not an internal node"
                )))
            }
        };
        if self.nodes[left].kind != NodeKind::Stopped
            || self.nodes[right].kind != NodeKind::Stopped
        {
            return Err(Error::invalid_state(format!(
                "children of node {idx} are not stopped leaves"
            )));
        }
        let mut indices = self.nodes[left].indices.clone();
        indices.extend_from_slice(&self.nodes[right].indices);
        indices.sort_unstable();
        let counts: Vec<u64> = self.nodes[left]
            .class_counts
            .iter()
            .zip(&self.nodes[right].class_counts)
            .map(|(a, b)| a + b)
            .collect();
        let leaf_log_lik = lik.log_lik(&counts);
        // The node was split before, so its block must be splittable.
        let term = (1.0 - hyper.split_prob(self.nodes[idx].depth)).ln();
        self.log_prior += term
            - self.nodes[idx].log_prior_term
            - self.nodes[left].log_prior_term
            - self.nodes[right].log_prior_term;
        self.log_lik += leaf_log_lik - self.nodes[left].log_lik - self.nodes[right].log_lik;
        self.release(left);
        self.release(right);
        let node = &mut self.nodes[idx];
        node.kind = NodeKind::Stopped;
        node.class_counts = counts;
        node.log_lik = leaf_log_lik;
        node.log_prior_term = term;
        node.indices = indices;
        Ok(())
    }

    /// Re-partitions the decided subtree rooted at `idx` over a new set
    /// of rows, keeping its decision structure but refreshing every
    /// block, density term, and likelihood. Returns `Ok(false)` if a
    /// cut falls outside its new block or stops separating it, in
    /// which case the state is left partially updated and must be
    /// discarded by the caller.
    pub fn rebuild_subtree(
        &mut self,
        data: &Dataset,
        lik: &DmLikelihood,
        hyper: &Hyperparams,
        idx: usize,
        indices: Vec<u32>,
    ) -> Result<bool> {
        let stats = block_stats(data, &indices)?;
        let depth = self.nodes[idx].depth;
        match self.nodes[idx].kind {
            NodeKind::Eligible => Err(Error::invalid_state(
                "cannot rebuild an undecided subtree",
            )),
            NodeKind::Free => Err(Error::invalid_state("reached a recycled arena slot")),
            NodeKind::Stopped => {
                let term = if stats.is_unsplittable() {
                    0.0
                } else {
                    (1.0 - hyper.split_prob(depth)).ln()
                };
                let log_lik = lik.log_lik(&stats.class_counts);
                self.log_prior += term - self.nodes[idx].log_prior_term;
                self.log_lik += log_lik - self.nodes[idx].log_lik;
                let node = &mut self.nodes[idx];
                node.log_prior_term = term;
                node.log_lik = log_lik;
                node.class_counts = stats.class_counts;
                node.indices = indices;
                Ok(true)
            }
            NodeKind::Internal {
                cut_dim,
                cut_loc,
                left,
                right,
            } => {
                if !stats.valid_dims.contains(&cut_dim) {
                    return Ok(false);
                }
                let (lo, hi) = stats.extents[cut_dim];
                if !(cut_loc >= lo && cut_loc < hi) {
                    return Ok(false);
                }
                let term = hyper.split_prob(depth).ln()
                    - (stats.valid_dims.len() as f64).ln()
                    - stats.extent_len(cut_dim).ln();
                self.log_prior += term - self.nodes[idx].log_prior_term;
                let node = &mut self.nodes[idx];
                node.log_prior_term = term;
                node.log_lik = lik.log_lik(&stats.class_counts);
                node.class_counts = stats.class_counts;
                let (li, ri, _, _) = Self::partition(data, &indices, cut_dim, cut_loc);
                Ok(self.rebuild_subtree(data, lik, hyper, left, li)?
                    && self.rebuild_subtree(data, lik, hyper, right, ri)?)
            }
        }
    }

    /// Canonical structural description: pre-order `(path, cut)` pairs.
    /// Two states describe the same tree function iff these are equal.
    pub fn canonical(&self) -> Vec<(NodeId, Option<(usize, f64)>)> {
        let mut out = Vec::with_capacity(self.num_nodes());
        let mut stack = vec![ROOT];
        while let Some(idx) = stack.pop() {
            match self.nodes[idx].kind {
                NodeKind::Internal {
                    cut_dim,
                    cut_loc,
                    left,
                    right,
                } => {
                    out.push((self.path(idx), Some((cut_dim, cut_loc))));
                    stack.push(right);
                    stack.push(left);
                }
                NodeKind::Free => unreachable!("free slot linked from root"),
                _ => out.push((self.path(idx), None)),
            }
        }
        out
    }
}
