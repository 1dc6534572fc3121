//! Proposal kernels for expanding one eligible leaf. Each returns the
//! sampled decision together with its log density under the proposal
//! and under the prior, which is all the weight update needs.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{
    distinct_values, sample_prior_decision, BlockStats, Decision, DmLikelihood, Hyperparams,
};

/// One proposed expansion decision with its densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOutcome {
    pub decision: Decision,
    /// Log density of the decision under the proposal kernel.
    pub log_proposal: f64,
    /// Log density of the decision under the prior.
    pub log_prior: f64,
    /// Log normalizer of the one-step-lookahead kernel; `None` for the
    /// prior and empirical kernels.
    pub log_normalizer: Option<f64>,
}

/// Proposes from the prior itself, so the prior and proposal densities
/// coincide and the weight update reduces to the likelihood change.
pub fn propose_prior(
    stats: &BlockStats,
    depth: u32,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> ProposalOutcome {
    let (decision, log_density) = sample_prior_decision(stats, depth, hyper, rng);
    ProposalOutcome {
        decision,
        log_proposal: log_density,
        log_prior: log_density,
        log_normalizer: None,
    }
}

/// Like the prior, but the cut location is drawn by first picking one
/// of the gaps between adjacent distinct values uniformly, then a
/// uniform location inside it. Puts proposal mass where cuts actually
/// change the partition.
pub fn propose_empirical(
    data: &Dataset,
    stats: &BlockStats,
    depth: u32,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> ProposalOutcome {
    if stats.is_unsplittable() {
        return ProposalOutcome {
            decision: Decision::Stop,
            log_proposal: 0.0,
            log_prior: 0.0,
            log_normalizer: None,
        };
    }
    let split_prob = hyper.split_prob(depth);
    if rng.random::<f64>() >= split_prob {
        let ld = (1.0 - split_prob).ln();
        return ProposalOutcome {
            decision: Decision::Stop,
            log_proposal: ld,
            log_prior: ld,
            log_normalizer: None,
        };
    }
    let num_dims = stats.valid_dims.len() as f64;
    let cut_dim = stats.valid_dims[rng.random_range(0..stats.valid_dims.len())];
    let vals = distinct_values(data, &stats.indices, cut_dim);
    debug_assert!(vals.len() >= 2, "valid dimension must vary");
    let num_gaps = vals.len() - 1;
    let gap = rng.random_range(0..num_gaps);
    let (lo, hi) = (vals[gap], vals[gap + 1]);
    let cut_loc = rng.random_range(lo..hi);
    let shared = split_prob.ln() - num_dims.ln();
    ProposalOutcome {
        decision: Decision::Split { cut_dim, cut_loc },
        log_proposal: shared - (num_gaps as f64).ln() - (hi - lo).ln(),
        log_prior: shared - stats.extent_len(cut_dim).ln(),
        log_normalizer: None,
    }
}

/// One-step-lookahead kernel: stopping carries weight
/// `(1 - split_prob) * lik(block)` and each (dimension, gap) carries
/// `split_prob / (|D| * |I_d|) * gap_len * lik(left) * lik(right)`,
/// the likelihood being constant for cuts inside one gap. The sampled
/// decision's densities and the kernel's log normalizer are returned.
pub fn propose_optimal(
    data: &Dataset,
    lik: &DmLikelihood,
    stats: &BlockStats,
    depth: u32,
    hyper: &Hyperparams,
    rng: &mut impl Rng,
) -> Result<ProposalOutcome> {
    let block_log_lik = lik.log_lik(&stats.class_counts);
    if stats.is_unsplittable() {
        // Forced stop: the kernel has a single atom of weight lik(block).
        return Ok(ProposalOutcome {
            decision: Decision::Stop,
            log_proposal: 0.0,
            log_prior: 0.0,
            log_normalizer: Some(block_log_lik),
        });
    }
    let split_prob = hyper.split_prob(depth);
    let num_dims = stats.valid_dims.len() as f64;

    struct GapChoice {
        cut_dim: usize,
        lo: f64,
        hi: f64,
        log_weight: f64,
        /// Prior density of a split landing in this gap's dimension.
        log_prior_split: f64,
    }

    let stop_log_weight = (1.0 - split_prob).ln() + block_log_lik;
    let mut gaps: Vec<GapChoice> = Vec::new();
    let k = data.num_classes();
    let mut left_counts = vec![0u64; k];
    let mut right_counts = vec![0u64; k];
    for &dim in &stats.valid_dims {
        let mut pts: Vec<(f64, usize)> = stats
            .indices
            .iter()
            .map(|&r| (data.x(r as usize, dim), data.label(r as usize)))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
        let extent_len = stats.extent_len(dim);
        let log_prior_split = split_prob.ln() - num_dims.ln() - extent_len.ln();
        left_counts.iter_mut().for_each(|c| *c = 0);
        let mut i = 0;
        while i < pts.len() {
            let v = pts[i].0;
            while i < pts.len() && pts[i].0 == v {
                left_counts[pts[i].1] += 1;
                i += 1;
            }
            if i == pts.len() {
                break;
            }
            let next = pts[i].0;
            for c in 0..k {
                right_counts[c] = stats.class_counts[c] - left_counts[c];
            }
            let log_weight = log_prior_split
                + (next - v).ln()
                + lik.log_lik(&left_counts)
                + lik.log_lik(&right_counts);
            gaps.push(GapChoice {
                cut_dim: dim,
                lo: v,
                hi: next,
                log_weight,
                log_prior_split,
            });
        }
    }

    let mut all_log_weights = Vec::with_capacity(gaps.len() + 1);
    all_log_weights.push(stop_log_weight);
    all_log_weights.extend(gaps.iter().map(|g| g.log_weight));
    let log_norm = log_sum_exp(&all_log_weights);
    if !log_norm.is_finite() {
        return Err(Error::NumericalUnderflow);
    }

    // Inverse-CDF draw over {stop} followed by gaps in scan order.
    let u: f64 = rng.random();
    let mut acc = (stop_log_weight - log_norm).exp();
    let mut picked: Option<&GapChoice> = None;
    if u >= acc {
        for g in &gaps {
            acc += (g.log_weight - log_norm).exp();
            if u < acc {
                picked = Some(g);
                break;
            }
        }
        // Rounding can leave u marginally above the accumulated mass.
        if picked.is_none() {
            picked = gaps.last();
        }
    }

    match picked {
        None => Ok(ProposalOutcome {
            decision: Decision::Stop,
            log_proposal: stop_log_weight - log_norm,
            log_prior: (1.0 - split_prob).ln(),
            log_normalizer: Some(log_norm),
        }),
        Some(g) => {
            let cut_loc = rng.random_range(g.lo..g.hi);
            Ok(ProposalOutcome {
                decision: Decision::Split {
                    cut_dim: g.cut_dim,
                    cut_loc,
                },
                // Density over locations: gap mass spread uniformly.
                log_proposal: g.log_weight - log_norm - (g.hi - g.lo).ln(),
                log_prior: g.log_prior_split,
                log_normalizer: Some(log_norm),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::derive_rng;
    use crate::model::block_stats;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Dataset {
        Dataset::from_rows(rows, labels, 2).unwrap()
    }

    #[test]
    fn unsplittable_blocks_force_stop_with_zero_density() {
        let data = dataset(vec![vec![1.0], vec![1.0]], vec![0, 1]);
        let stats = block_stats(&data, &[0, 1]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 2).unwrap();
        let mut rng = derive_rng(0, &[]);
        let p = propose_prior(&stats, 0, &hyper, &mut rng);
        assert_eq!(p.decision, Decision::Stop);
        assert_eq!(p.log_proposal, 0.0);
        assert_eq!(p.log_prior, 0.0);
        let e = propose_empirical(&data, &stats, 0, &hyper, &mut rng);
        assert_eq!(e.decision, Decision::Stop);
        assert_eq!(e.log_proposal, 0.0);
        let o = propose_optimal(&data, &lik, &stats, 0, &hyper, &mut rng).unwrap();
        assert_eq!(o.decision, Decision::Stop);
        assert_eq!(o.log_proposal, 0.0);
        // Kernel normalizer collapses to the block likelihood.
        assert_close(
            o.log_normalizer.unwrap(),
            lik.log_lik(&stats.class_counts),
            1e-12,
        );
    }

    #[test]
    fn prior_proposal_frequencies_and_densities() {
        let data = dataset(
            vec![vec![0.0, 10.0], vec![4.0, 14.0], vec![2.0, 12.0]],
            vec![0, 1, 0],
        );
        let stats = block_stats(&data, &[0, 1, 2]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let mut rng = derive_rng(11, &[]);
        let mut splits = 0usize;
        let draws = 20_000;
        for _ in 0..draws {
            let p = propose_prior(&stats, 0, &hyper, &mut rng);
            match p.decision {
                Decision::Stop => {
                    assert_close(p.log_proposal, 0.05f64.ln(), 1e-12);
                }
                Decision::Split { cut_dim, cut_loc } => {
                    splits += 1;
                    // Both dims have extent length 4: density
                    // 0.95 * (1/2) * (1/4).
                    assert_close(p.log_proposal, (0.95f64 / 8.0).ln(), 1e-12);
                    assert_eq!(p.log_proposal, p.log_prior);
                    let (lo, hi) = stats.extents[cut_dim];
                    assert!(cut_loc >= lo && cut_loc < hi);
                }
            }
        }
        let freq = splits as f64 / draws as f64;
        // 3 sigma of a Bernoulli(0.95) over 20k draws is ~0.0046.
        assert_close(freq, 0.95, 0.006);
    }

    #[test]
    fn empirical_matches_prior_on_two_value_blocks() {
        let data = dataset(vec![vec![0.0], vec![4.0]], vec![0, 1]);
        let stats = block_stats(&data, &[0, 1]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let mut rng = derive_rng(3, &[]);
        for _ in 0..200 {
            let e = propose_empirical(&data, &stats, 0, &hyper, &mut rng);
            // One gap spanning the whole extent: densities coincide.
            assert_close(e.log_proposal, e.log_prior, 1e-12);
        }
    }

    #[test]
    fn empirical_gap_frequencies_and_ratio() {
        // Distinct values 0, 1, 10: two gaps of very different length.
        let data = dataset(vec![vec![0.0], vec![1.0], vec![10.0]], vec![0, 1, 0]);
        let stats = block_stats(&data, &[0, 1, 2]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let mut rng = derive_rng(5, &[]);
        let mut in_long_gap = 0usize;
        let mut splits = 0usize;
        for _ in 0..20_000 {
            let e = propose_empirical(&data, &stats, 0, &hyper, &mut rng);
            if let Decision::Split { cut_loc, .. } = e.decision {
                splits += 1;
                let gap_len: f64 = if cut_loc >= 1.0 {
                    in_long_gap += 1;
                    9.0
                } else {
                    1.0
                };
                // log p - log q = log(num_gaps * gap_len / extent).
                assert_close(
                    e.log_prior - e.log_proposal,
                    (2.0 * gap_len / 10.0).ln(),
                    1e-12,
                );
            }
        }
        let frac = in_long_gap as f64 / splits as f64;
        assert_close(frac, 0.5, 0.02);
    }

    #[test]
    fn optimal_kernel_hand_computed_stop_mass() {
        // Two points, one varying dim, same label, flat split prob.
        let data = dataset(vec![vec![0.0], vec![1.0]], vec![0, 0]);
        let stats = block_stats(&data, &[0, 1]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 2).unwrap();
        let mut rng = derive_rng(9, &[]);
        let o = propose_optimal(&data, &lik, &stats, 0, &hyper, &mut rng).unwrap();
        // Stop weight: 0.05 * lik(2,0) = 0.05/3.
        // Split weight: 0.95 * (1/1) * (1/1) * 1 * lik(1,0)^2 = 0.95/4.
        let stop_w: f64 = 0.05 / 3.0;
        let split_w: f64 = 0.95 / 4.0;
        let z = o.log_normalizer.unwrap();
        assert_close(z, (stop_w + split_w).ln(), 1e-12);
        let p_stop = stop_w / (stop_w + split_w);
        match o.decision {
            Decision::Stop => {
                assert_close(o.log_proposal, p_stop.ln(), 1e-12);
            }
            Decision::Split { .. } => {
                // Density: split mass over the unit gap length.
                assert_close(o.log_proposal, (1.0 - p_stop).ln(), 1e-12);
            }
        }
        // And the stop probability is 4/61, not something larger:
        assert_close(p_stop, 4.0 / 61.0, 1e-12);
    }

    #[test]
    fn optimal_kernel_normalization_and_stop_frequency() {
        let data = dataset(
            vec![vec![0.0, 5.0], vec![1.0, 7.0], vec![3.0, 6.0], vec![4.0, 5.5]],
            vec![0, 1, 1, 0],
        );
        let stats = block_stats(&data, &[0, 1, 2, 3]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.8, 0.5).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 4).unwrap();

        // Recompute the normalizer independently.
        let split_prob = hyper.split_prob(0);
        let mut weights = vec![(1.0 - split_prob).ln() + lik.log_lik(&stats.class_counts)];
        for &dim in &stats.valid_dims {
            let mut vals: Vec<f64> = stats
                .indices
                .iter()
                .map(|&r| data.x(r as usize, dim))
                .collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            for g in 0..vals.len() - 1 {
                let tau = 0.5 * (vals[g] + vals[g + 1]);
                let mut lc = vec![0u64; 2];
                let mut rc = vec![0u64; 2];
                for &r in &stats.indices {
                    if data.x(r as usize, dim) <= tau {
                        lc[data.label(r as usize)] += 1;
                    } else {
                        rc[data.label(r as usize)] += 1;
                    }
                }
                weights.push(
                    split_prob.ln() - (stats.valid_dims.len() as f64).ln()
                        - stats.extent_len(dim).ln()
                        + (vals[g + 1] - vals[g]).ln()
                        + lik.log_lik(&lc)
                        + lik.log_lik(&rc),
                );
            }
        }
        let z_independent = log_sum_exp(&weights);

        let mut rng = derive_rng(17, &[]);
        let o = propose_optimal(&data, &lik, &stats, 0, &hyper, &mut rng).unwrap();
        assert_close(o.log_normalizer.unwrap(), z_independent, 1e-9);

        // Per-decision densities integrate to one: sum of stop mass and
        // gap masses equals 1.
        let total: f64 = weights
            .iter()
            .map(|w| (w - z_independent).exp())
            .sum();
        assert_close(total, 1.0, 1e-9);
    }

    #[test]
    fn optimal_cut_likelihood_constant_within_gap() {
        let data = dataset(
            vec![vec![0.0], vec![2.0], vec![6.0], vec![7.0]],
            vec![0, 0, 1, 1],
        );
        // Cuts anywhere in (2, 6) produce the same partition.
        for tau in [2.0, 3.5, 5.9] {
            let (l, r, lc, rc) =
                crate::model::DecisionTreeState::partition(&data, &[0, 1, 2, 3], 0, tau);
            assert_eq!(l, vec![0, 1]);
            assert_eq!(r, vec![2, 3]);
            assert_eq!(lc, vec![2, 0]);
            assert_eq!(rc, vec![0, 2]);
        }
    }

    #[test]
    fn optimal_prefers_informative_splits() {
        // Perfectly separable along dim 0 at the long middle gap.
        let data = dataset(
            vec![vec![0.0], vec![1.0], vec![9.0], vec![10.0]],
            vec![0, 0, 1, 1],
        );
        let stats = block_stats(&data, &[0, 1, 2, 3]).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.0).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 4).unwrap();
        let mut rng = derive_rng(23, &[]);
        let mut middle = 0usize;
        let draws = 2000;
        for _ in 0..draws {
            let o = propose_optimal(&data, &lik, &stats, 0, &hyper, &mut rng).unwrap();
            if let Decision::Split { cut_loc, .. } = o.decision {
                if (1.0..9.0).contains(&cut_loc) {
                    middle += 1;
                }
            }
        }
        // Exact kernel mass of the separating gap: weights are
        // stop 1/600, outer gaps 19/4800 each, middle 19/225,
        // so p = (19/225) / (1354/14400) = 1216/1354.
        let expect = 1216.0 / 1354.0;
        assert_close(middle as f64 / draws as f64, expect, 0.025);
    }
}
