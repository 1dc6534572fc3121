//! The particle filter itself: initialization, staged expansion,
//! weighting, adaptive resampling, and the island wrapper.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::math::{derive_rng, derive_seed, log_sum_exp, normalized_weights};
use crate::model::{DecisionTreeState, DmLikelihood, Hyperparams};
use crate::smc::{
    propose_empirical, propose_optimal, propose_prior, select_candidates, ProposalKind,
    ProposalOutcome, ResampleScheme, SmcConfig,
};
use crate::smc::resample::{ess, resample_multinomial, resample_systematic};

/// Particles with their unnormalized log weights.
#[derive(Debug, Clone)]
pub struct ParticlePopulation {
    pub particles: Vec<DecisionTreeState>,
    pub log_weights: Vec<f64>,
}

/// Per-stage telemetry recorded before any resampling at that stage.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageDiagnostics {
    pub stage: u32,
    /// Effective sample size after the stage's weight update.
    pub ess: f64,
    /// Running marginal-likelihood estimate `lse(lw) - ln M`.
    pub log_normalizer: f64,
    /// Particles that still had eligible leaves entering the stage.
    pub live_particles: usize,
    pub resampled: bool,
}

/// Result of a single-island SMC run.
#[derive(Debug, Clone)]
pub struct SmcRun {
    pub population: ParticlePopulation,
    /// Log marginal likelihood estimate.
    pub log_marginal: f64,
    pub diagnostics: Vec<StageDiagnostics>,
    /// Whether every particle finished before the stage cap.
    pub completed: bool,
    /// Number of stages actually executed.
    pub stages: u32,
}

/// One candidate's weight update: `prev + log(prior/proposal) + lik_delta`.
///
/// When proposing from the prior the density terms are the same float,
/// so the update is the likelihood change exactly, with no rounding.
pub fn weight_update(prev: f64, outcome: &ProposalOutcome, lik_delta: f64) -> f64 {
    prev + (outcome.log_prior - outcome.log_proposal) + lik_delta
}

fn expand_particle(
    state: &mut DecisionTreeState,
    log_weight: &mut f64,
    data: &Dataset,
    lik: &DmLikelihood,
    hyper: &Hyperparams,
    config: &SmcConfig,
    particle: u64,
    stage: u32,
) -> Result<()> {
    if state.is_complete() {
        return Ok(());
    }
    let mut rng = derive_rng(config.seed, &[0, particle, stage as u64]);
    // Snapshot: children created during this stage wait for the next.
    let candidates = select_candidates(state, config.expansion, config.priority);
    for idx in candidates {
        let stats = state.leaf_stats(data, idx)?;
        let depth = state.node(idx).depth();
        let outcome = match config.proposal {
            ProposalKind::Prior => propose_prior(&stats, depth, hyper, &mut rng),
            ProposalKind::Empirical => propose_empirical(data, &stats, depth, hyper, &mut rng),
            ProposalKind::Optimal => propose_optimal(data, lik, &stats, depth, hyper, &mut rng)?,
        };
        let applied = state.apply_decision(data, lik, hyper, idx, &stats, outcome.decision, stage)?;
        *log_weight = weight_update(*log_weight, &outcome, applied.lik_delta);
    }
    Ok(())
}

/// Runs the particle filter with `config.num_particles` particles on a
/// single island, ignoring `num_islands`. Deterministic given the
/// seed: every particle and the resampler draw from independent
/// counter-derived streams, so thread scheduling cannot change results.
pub fn smc_run(data: &Dataset, hyper: &Hyperparams, config: &SmcConfig) -> Result<SmcRun> {
    config.validate()?;
    let lik = DmLikelihood::new(hyper.alpha, data.num_classes(), data.n_rows())?;
    let root = DecisionTreeState::new_root(data, &lik)?;
    let m = config.num_particles;
    let root_log_lik = root.log_lik();
    let mut particles = vec![root; m];
    let mut log_weights = vec![root_log_lik; m];
    let ess_threshold = config.ess_threshold_fraction * m as f64;
    let mut diagnostics = Vec::new();
    let mut completed = false;
    let mut stages = 0u32;

    for stage in 1..=config.max_stages as u32 {
        let live = particles.iter().filter(|p| !p.is_complete()).count();
        if live == 0 {
            completed = true;
            break;
        }
        stages = stage;
        particles
            .par_iter_mut()
            .zip(log_weights.par_iter_mut())
            .enumerate()
            .try_for_each(|(i, (state, lw))| {
                expand_particle(state, lw, data, &lik, hyper, config, i as u64, stage)
            })?;

        let lse = log_sum_exp(&log_weights);
        if !lse.is_finite() {
            return Err(Error::DegenerateWeights);
        }
        let stage_ess = ess(&log_weights)?;
        let resample = stage_ess < ess_threshold;
        diagnostics.push(StageDiagnostics {
            stage,
            ess: stage_ess,
            log_normalizer: lse - (m as f64).ln(),
            live_particles: live,
            resampled: resample,
        });
        if resample {
            let weights = normalized_weights(&log_weights).ok_or(Error::DegenerateWeights)?;
            let mut rng = derive_rng(config.seed, &[1, stage as u64]);
            let ancestors = match config.resampler {
                ResampleScheme::Multinomial => resample_multinomial(&weights, &mut rng)?,
                ResampleScheme::Systematic => resample_systematic(&weights, &mut rng)?,
            };
            particles = ancestors.iter().map(|&a| particles[a].clone()).collect();
            // Equal weights carrying the same total mass, so the
            // running normalizer estimate is untouched.
            let reset = lse - (m as f64).ln();
            log_weights.iter_mut().for_each(|w| *w = reset);
            debug_assert!((log_sum_exp(&log_weights) - lse).abs() <= 1e-9);
        }
    }
    if !completed {
        completed = particles.iter().all(|p| p.is_complete());
    }

    let log_marginal = log_sum_exp(&log_weights) - (m as f64).ln();
    Ok(SmcRun {
        population: ParticlePopulation {
            particles,
            log_weights,
        },
        log_marginal,
        diagnostics,
        completed,
        stages,
    })
}

/// Result of running independent islands and pooling them.
#[derive(Debug, Clone)]
pub struct IslandsRun {
    pub islands: Vec<SmcRun>,
    /// Pooled estimate: the mean of the per-island marginal-likelihood
    /// estimates, computed in log space.
    pub log_marginal: f64,
}

/// Splits the particle budget evenly over independent islands, each
/// with its own derived seed, and pools their estimates.
pub fn islands_run(data: &Dataset, hyper: &Hyperparams, config: &SmcConfig) -> Result<IslandsRun> {
    config.validate()?;
    let per_island = config.num_particles / config.num_islands;
    let islands: Vec<SmcRun> = (0..config.num_islands)
        .into_par_iter()
        .map(|i| {
            let island_config = SmcConfig {
                num_particles: per_island,
                num_islands: 1,
                seed: derive_seed(config.seed, &[i as u64]),
                ..*config
            };
            smc_run(data, hyper, &island_config)
        })
        .collect::<Result<_>>()?;
    let marginals: Vec<f64> = islands.iter().map(|r| r.log_marginal).collect();
    let log_marginal = log_sum_exp(&marginals) - (config.num_islands as f64).ln();
    Ok(IslandsRun {
        islands,
        log_marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Decision, NodeKind, ROOT};
    use crate::smc::{Expansion, Priority};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn tiny_config(m: usize, seed: u64) -> SmcConfig {
        SmcConfig {
            num_particles: m,
            seed,
            ..SmcConfig::default()
        }
    }

    #[test]
    fn weight_update_arithmetic() {
        let outcome = ProposalOutcome {
            decision: Decision::Stop,
            log_proposal: -0.5,
            log_prior: -2.0,
            log_normalizer: None,
        };
        assert_close(weight_update(-1.0, &outcome, 0.3), -2.2, 1e-12);
    }

    #[test]
    fn single_row_dataset_finishes_in_one_stage() {
        let data = Dataset::from_rows(vec![vec![3.0, 7.0]], vec![0], 2).unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.5).unwrap();
        let run = smc_run(&data, &hyper, &tiny_config(16, 7)).unwrap();
        assert!(run.completed);
        assert_eq!(run.stages, 1);
        // Single point, two classes: marginal is exactly 1/2.
        assert_close(run.log_marginal, 0.5f64.ln(), 1e-12);
        assert_eq!(run.diagnostics.len(), 1);
        assert_eq!(run.diagnostics[0].live_particles, 16);
        assert!(!run.diagnostics[0].resampled);
        for p in &run.population.particles {
            assert_eq!(p.num_nodes(), 1);
            assert_eq!(*p.node(ROOT).kind(), NodeKind::Stopped);
        }
    }

    #[test]
    fn constant_features_give_exact_zero_variance_marginal() {
        // Features never vary, so the root is unsplittable and every
        // proposal kernel is forced to stop with density terms zero.
        let data = Dataset::from_rows(
            vec![vec![1.0, 2.0]; 4],
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::new(2.0, 0.95, 0.5).unwrap();
        let lik = DmLikelihood::new(2.0, 2, 4).unwrap();
        let expected = lik.log_lik(&[2, 2]);
        for proposal in [ProposalKind::Prior, ProposalKind::Empirical, ProposalKind::Optimal] {
            for seed in [1, 2, 3] {
                let config = SmcConfig {
                    proposal,
                    ..tiny_config(8, seed)
                };
                let run = smc_run(&data, &hyper, &config).unwrap();
                assert_close(run.log_marginal, expected, 1e-12);
                assert!(run.completed);
            }
        }
    }

    #[test]
    fn runs_are_deterministic_given_seed() {
        let data = Dataset::from_rows(
            vec![
                vec![0.0, 0.0],
                vec![1.0, 0.2],
                vec![0.2, 1.0],
                vec![0.9, 0.8],
                vec![0.4, 0.6],
            ],
            vec![0, 1, 1, 0, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        for proposal in [ProposalKind::Prior, ProposalKind::Empirical, ProposalKind::Optimal] {
            let config = SmcConfig {
                proposal,
                ess_threshold_fraction: 0.9,
                ..tiny_config(64, 13)
            };
            let a = smc_run(&data, &hyper, &config).unwrap();
            let b = smc_run(&data, &hyper, &config).unwrap();
            assert_eq!(a.log_marginal.to_bits(), b.log_marginal.to_bits());
            assert_eq!(a.population.log_weights, b.population.log_weights);
            assert_eq!(a.population.particles, b.population.particles);
        }
    }

    #[test]
    fn one_island_matches_plain_run_with_derived_seed() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.4], vec![0.7], vec![1.0]],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        let master = 99;
        let islands_config = SmcConfig {
            num_islands: 1,
            ..tiny_config(32, master)
        };
        let pooled = islands_run(&data, &hyper, &islands_config).unwrap();
        let direct = smc_run(
            &data,
            &hyper,
            &tiny_config(32, derive_seed(master, &[0])),
        )
        .unwrap();
        assert_eq!(pooled.islands.len(), 1);
        assert_eq!(
            pooled.log_marginal.to_bits(),
            direct.log_marginal.to_bits()
        );
        assert_eq!(
            pooled.islands[0].population.log_weights,
            direct.population.log_weights
        );
    }

    #[test]
    fn islands_are_deterministic_and_pool_the_mean() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.4], vec![0.7], vec![1.0]],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        let config = SmcConfig {
            num_particles: 40,
            num_islands: 4,
            ..tiny_config(40, 5)
        };
        let a = islands_run(&data, &hyper, &config).unwrap();
        let b = islands_run(&data, &hyper, &config).unwrap();
        assert_eq!(a.log_marginal.to_bits(), b.log_marginal.to_bits());
        let lm: Vec<f64> = a.islands.iter().map(|r| r.log_marginal).collect();
        assert_close(
            a.log_marginal,
            log_sum_exp(&lm) - (4.0f64).ln(),
            1e-12,
        );
        // Distinct islands really used distinct streams.
        assert!(lm.iter().any(|&x| x != lm[0]));
    }

    #[test]
    fn stage_cap_leaves_run_incomplete() {
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.3], vec![0.6], vec![1.0]],
            vec![0, 1, 0, 1],
            2,
        )
        .unwrap();
        // Always split: the frontier can never empty in one stage.
        let hyper = Hyperparams::new(2.0, 0.999, 0.0).unwrap();
        let config = SmcConfig {
            max_stages: 1,
            ..tiny_config(16, 3)
        };
        let run = smc_run(&data, &hyper, &config).unwrap();
        assert_eq!(run.stages, 1);
        assert!(!run.completed);
        assert!(run
            .population
            .particles
            .iter()
            .any(|p| !p.is_complete()));
        assert!(run.log_marginal.is_finite());
    }

    #[test]
    fn resampling_resets_weights_but_keeps_the_estimate_stream_sane() {
        let data = Dataset::from_rows(
            vec![
                vec![0.0],
                vec![0.1],
                vec![0.45],
                vec![0.55],
                vec![0.9],
                vec![1.0],
            ],
            vec![0, 0, 1, 1, 0, 0],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        let always = SmcConfig {
            ess_threshold_fraction: 1.0,
            ..tiny_config(4000, 21)
        };
        let never = SmcConfig {
            ess_threshold_fraction: 0.0,
            ..tiny_config(4000, 21)
        };
        let a = smc_run(&data, &hyper, &always).unwrap();
        let b = smc_run(&data, &hyper, &never).unwrap();
        assert!(a.diagnostics.iter().any(|d| d.resampled));
        assert!(b.diagnostics.iter().all(|d| !d.resampled));
        // After resampling all weights are equal and carry the mass.
        let first = a
            .diagnostics
            .iter()
            .find(|d| d.resampled)
            .unwrap()
            .stage;
        if a.stages == first {
            let w = a.population.log_weights[0];
            assert!(a.population.log_weights.iter().all(|&x| x == w));
        }
        // Both are estimates of the same marginal.
        assert_close(a.log_marginal, b.log_marginal, 0.2);
    }

    #[test]
    fn layer_wise_expansion_decides_whole_frontiers() {
        let data = Dataset::from_rows(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        let config = SmcConfig {
            expansion: Expansion::LayerWise,
            priority: Priority::BreadthFirst,
            ..tiny_config(32, 17)
        };
        let run = smc_run(&data, &hyper, &config).unwrap();
        assert!(run.completed);
        // Layer-wise: a node created at stage s is decided at s + 1.
        for p in &run.population.particles {
            for idx in p.active_nodes() {
                let n = p.node(idx);
                assert_eq!(n.decided_stage().unwrap(), n.created_stage() + 1);
            }
        }
    }

    #[test]
    fn optimal_weight_increment_equals_normalizer_shortcut() {
        // For the lookahead kernel the general-form weight update
        // telescopes to log Z(block) - log lik(block), whichever
        // decision is drawn.
        let data = Dataset::from_rows(
            vec![vec![0.0], vec![0.2], vec![0.5], vec![0.8], vec![1.0]],
            vec![0, 0, 1, 1, 0],
            2,
        )
        .unwrap();
        let hyper = Hyperparams::default();
        let lik = DmLikelihood::new(hyper.alpha, 2, 5).unwrap();
        let root = DecisionTreeState::new_root(&data, &lik).unwrap();
        for seed in 0..50u64 {
            let mut state = root.clone();
            let stats = state.leaf_stats(&data, ROOT).unwrap();
            let block_lik = state.node(ROOT).log_lik();
            let mut rng = derive_rng(seed, &[]);
            let outcome = propose_optimal(&data, &lik, &stats, 0, &hyper, &mut rng).unwrap();
            let z = outcome.log_normalizer.unwrap();
            let applied = state
                .apply_decision(&data, &lik, &hyper, ROOT, &stats, outcome.decision, 1)
                .unwrap();
            let increment = weight_update(0.0, &outcome, applied.lik_delta);
            assert_close(increment, z - block_lik, 1e-9);
        }
    }
}
