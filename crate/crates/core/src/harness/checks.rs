//! Self-check routines: the tiny-instance oracle sandwich and the
//! finite-difference check of the full policy loss. Both back CLI
//! subcommands and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{centralized_heuristic, max_snr_result};
use crate::channel::{self, ChannelRateEvaluator};
use crate::config::SimConfig;
use crate::env::{self, TrafficMode, TrafficModel};
use crate::geometry;
use crate::learner::{self, derive_seed, HyperParams};
use crate::nn::{gradient_check, GradCheckReport};
use crate::policy::PolicyNetwork;
use crate::utility::{exact_oracle, Constraints};
use crate::Result;

#[derive(Debug, Clone)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub sandwich_failures: usize,
    /// Instances where the heuristic reached >= 95% of the oracle.
    pub ratio_ge_95: usize,
    pub min_ratio: f64,
    pub mean_ratio: f64,
}

impl OracleCheckReport {
    pub fn pass(&self) -> bool {
        self.sandwich_failures == 0
    }
}

impl std::fmt::Display for OracleCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{} sandwich ok; heuristic >= 95% of oracle on {}/{} (min {:.4}, mean {:.4})",
            self.instances - self.sandwich_failures,
            self.instances,
            self.ratio_ge_95,
            self.instances,
            self.min_ratio,
            self.mean_ratio
        )
    }
}

/// Random tiny instances (K <= 6, two SBSs with two beams each, alpha
/// alternating over {0, 1}) where every association can be enumerated:
/// asserts max_snr <= heuristic <= oracle under one shared evaluator.
pub fn oracle_check(instances: usize, seed: u64) -> Result<OracleCheckReport> {
    let mut cfg = SimConfig::default();
    cfg.network.n_sbs = 2;
    cfg.network.beam_budget = vec![2, 2];
    let cfg = cfg.validated()?;

    let outcomes: Vec<Result<(bool, f64)>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst_seed = derive_seed(seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(inst_seed);
            let k = rng.random_range(2..=6usize);
            let alpha = if i % 2 == 0 { 0.0 } else { 1.0 };
            let mut inst_cfg = cfg.clone();
            inst_cfg.alpha = alpha;
            inst_cfg.traffic.mode = if i % 4 < 2 {
                TrafficMode::Poisson
            } else {
                TrafficMode::Infinite
            };

            let deployment = geometry::generate_deployment(&inst_cfg.network, k, &mut rng);
            let active = vec![true; k];
            let topology = geometry::build_topology(&inst_cfg.network, &deployment, &active)?;
            let n_bs = inst_cfg.network.n_bs();

            // Freeze one channel realization as the instance.
            let reset = env::draw_reset(
                &mut rng,
                k,
                n_bs,
                &active,
                &inst_cfg.mbs,
                &inst_cfg.sbs,
                &inst_cfg.traffic,
            );
            let traffic = TrafficModel {
                mode: inst_cfg.traffic.mode,
                mean_demands_mbps: reset.class_mbps,
                current_demands_bps: vec![],
            };
            let draws = env::draw_step(
                &mut rng,
                k,
                n_bs,
                &active,
                &inst_cfg.mbs,
                &inst_cfg.sbs,
                &traffic,
            );

            let evaluator = ChannelRateEvaluator::new(
                &deployment,
                &topology,
                &inst_cfg.mbs,
                &inst_cfg.sbs,
                &draws.fading,
                &reset.shadowing,
                &active,
            );
            let snr = channel::snr_matrix(
                &deployment,
                &topology,
                &inst_cfg.mbs,
                &inst_cfg.sbs,
                &reset.shadowing,
                Some(&draws.fading),
                &active,
            );
            let constraints = Constraints {
                candidate_sets: &topology.candidate_sets,
                beam_budget: &inst_cfg.network.beam_budget,
                active: &active,
            };

            let seed_result =
                max_snr_result(&snr, &evaluator, &draws.demands_bps, alpha, &constraints);
            let heur = centralized_heuristic(
                &evaluator,
                &snr,
                &draws.demands_bps,
                alpha,
                &constraints,
            );
            let (_, oracle) =
                exact_oracle(&evaluator, &draws.demands_bps, alpha, &constraints)?;

            let tol = 1e-9 * oracle.total.abs().max(1.0);
            let sandwich = seed_result.utility.total <= heur.utility.total + tol
                && heur.utility.total <= oracle.total + tol;
            let ratio = if oracle.total > 0.0 {
                heur.utility.total / oracle.total
            } else {
                1.0
            };
            Ok((sandwich, ratio))
        })
        .collect();

    let mut sandwich_failures = 0;
    let mut ratio_ge_95 = 0;
    let mut min_ratio = f64::INFINITY;
    let mut ratio_sum = 0.0;
    for outcome in outcomes {
        let (ok, ratio) = outcome?;
        if !ok {
            sandwich_failures += 1;
        }
        if ratio >= 0.95 {
            ratio_ge_95 += 1;
        }
        min_ratio = min_ratio.min(ratio);
        ratio_sum += ratio;
    }
    Ok(OracleCheckReport {
        instances,
        sandwich_failures,
        ratio_ge_95,
        min_ratio,
        mean_ratio: ratio_sum / instances.max(1) as f64,
    })
}

/// Finite-difference verification of the complete training loss (actor
/// surrogate plus critic regression, through attention, combiner and
/// both heads) on a 3-UE toy batch.
pub fn policy_gradcheck(n_coords: usize, tolerance: f64, seed: u64) -> Result<GradCheckReport> {
    let mut cfg = SimConfig::default();
    cfg.network.n_sbs = 2;
    cfg.network.beam_budget = vec![2, 2];
    cfg.policy.n = 10;
    cfg.k0 = 3;
    cfg.traffic.mode = TrafficMode::Infinite;
    cfg.learning = HyperParams {
        horizon: 3,
        ..HyperParams::default()
    };
    let cfg = cfg.validated()?;

    let policy = PolicyNetwork::init(&cfg, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 10)));
    let deployment = geometry::generate_deployment(
        &cfg.network,
        cfg.k0,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 11)),
    );
    let (buffer, _) = learner::rollout_episode(
        &cfg,
        &policy,
        deployment,
        vec![true; cfg.k0],
        derive_seed(seed, 12),
        derive_seed(seed, 13),
    )?;
    assert!(!buffer.samples.is_empty());

    let samples: Vec<&learner::Sample> = buffer.samples.iter().collect();
    let advantages: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    let batch = learner::loss_and_gradient(&policy, &samples, &advantages, &cfg.learning)?;
    let analytic = batch.grads.flatten();

    let norm = *policy.norm();
    let swap = cfg.policy.swap_query_key;
    let hyper = cfg.learning.clone();
    let loss_samples = buffer.samples.clone();
    let loss = move |store: &crate::nn::ParameterStore| {
        let probe = PolicyNetwork::from_store(store.clone(), swap, norm);
        let refs: Vec<&learner::Sample> = loss_samples.iter().collect();
        let advs: Vec<f64> = refs.iter().map(|s| s.advantage).collect();
        let out = learner::loss_and_gradient(&probe, &refs, &advs, &hyper)
            .expect("loss evaluates on the toy batch");
        out.actor_loss + out.critic_loss
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 14));
    Ok(gradient_check(
        loss,
        policy.store(),
        &analytic,
        n_coords,
        tolerance,
        &mut rng,
    ))
}
