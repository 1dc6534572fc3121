//! Model core: dataset blocks, the decision-tree state, the
//! depth-decaying tree prior, and the Dirichlet-multinomial leaf
//! likelihood.

mod block;
mod hyper;
mod likelihood;
mod node;
mod prior;
mod tree;

pub use block::{block_stats, distinct_values, BlockStats};
pub use hyper::{split_prob, Hyperparams};
pub use likelihood::{dm_log_lik, leaf_predictive, DmLikelihood};
pub use node::{NodeId, Side};
pub use prior::{
    prior_log_density, prior_log_density_by_replay, prior_tree_stats, sample_from_prior,
    sample_prior_decision, PriorTreeStats,
};
pub use tree::{ApplyOutcome, Decision, DecisionTreeState, Node, NodeKind, ROOT};
