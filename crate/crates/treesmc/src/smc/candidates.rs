use crate::model::DecisionTreeState;
use crate::smc::{Expansion, Priority};

/// Deterministic choice of the nodes a stage will expand.
///
/// Layer-wise expansion returns the whole eligible frontier in path
/// order. Node-wise expansion returns a single node: the oldest one
/// (breadth-first) or the one with the lowest block log likelihood
/// (marginal priority), with the smaller path breaking ties. The rule
/// consults only the current state, so replaying a finished particle's
/// decisions reproduces its stage history.
pub fn select_candidates(
    state: &DecisionTreeState,
    expansion: Expansion,
    priority: Priority,
) -> Vec<usize> {
    let eligible = state.eligible();
    if eligible.is_empty() {
        return Vec::new();
    }
    match expansion {
        Expansion::LayerWise => {
            let mut all = eligible.to_vec();
            all.sort_by(|&a, &b| state.path(a).cmp(&state.path(b)));
            all
        }
        Expansion::NodeWise => {
            let best = match priority {
                Priority::BreadthFirst => eligible.iter().copied().min_by(|&a, &b| {
                    (state.node(a).created_stage(), state.path(a))
                        .cmp(&(state.node(b).created_stage(), state.path(b)))
                }),
                Priority::MarginalLik => eligible.iter().copied().min_by(|&a, &b| {
                    state
                        .node(a)
                        .log_lik()
                        .partial_cmp(&state.node(b).log_lik())
                        .expect("finite block log likelihoods")
                        .then_with(|| state.path(a).cmp(&state.path(b)))
                }),
            };
            vec![best.expect("non-empty eligible set")]
        }
    }
}
