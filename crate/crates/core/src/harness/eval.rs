//! Evaluation suites: shared-randomness scoring of the learned policy
//! against both baselines, and the zero-shot transfer sweeps over the
//! UE count and the beam budget.
//!
//! For each deployment index all methods see identical UE positions,
//! shadowing, traffic and fading streams; deployments fan out over a
//! worker pool and are reduced in index order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::config::SimConfig;
use crate::env::{Env, TrafficMode};
use crate::geometry::{self, BsId, Deployment};
use crate::learner::derive_seed;
use crate::policy::PolicyNetwork;
use crate::{Error, Result};

/// One (method, scenario) aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalPoint {
    pub method: String,
    pub k: usize,
    pub n_i: usize,
    pub alpha: f64,
    pub traffic_mode: String,
    pub mean_utility_bps: f64,
    /// 95% confidence half-width over deployments.
    pub ci95: f64,
    pub deployments: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub points: Vec<EvalPoint>,
    pub manifest_hash: String,
}

fn traffic_mode_name(mode: TrafficMode) -> &'static str {
    match mode {
        TrafficMode::Poisson => "poisson",
        TrafficMode::Infinite => "infinite",
    }
}

/// Mean per-step utility of one frozen-policy episode (no dropout, no
/// learning).
pub fn run_policy_episode(
    cfg: &SimConfig,
    policy: &PolicyNetwork,
    deployment: Deployment,
    env_seed: u64,
    action_seed: u64,
    horizon: usize,
) -> Result<f64> {
    let k = deployment.n_ues();
    let active = vec![true; k];
    let (mut env, mut obs) = Env::reset(
        cfg,
        deployment,
        active,
        ChaCha8Rng::seed_from_u64(env_seed),
    )?;
    let mut action_rng = ChaCha8Rng::seed_from_u64(action_seed);
    let mut sum = 0.0;
    for _ in 0..horizon {
        let mut requests: Vec<Option<BsId>> = vec![None; k];
        let mut probs: Vec<Option<Vec<f64>>> = vec![None; k];
        for ue in 0..k {
            let Some(o) = &obs[ue] else { continue };
            let out = policy.forward(o)?;
            requests[ue] = Some(out.dist.sample(&mut action_rng));
            probs[ue] = Some(out.dist.probs);
        }
        let outcome = env.step(&requests, &probs)?;
        sum += outcome.reward;
        obs = outcome.observations;
    }
    Ok(sum / horizon.max(1) as f64)
}

struct DeploymentScores {
    policy: Option<f64>,
    max_snr: f64,
    heuristic: f64,
}

/// Scores the policy (when given) and both baselines on `deployments`
/// shared-randomness deployments of `k` UEs.
pub fn evaluate_methods(
    cfg: &SimConfig,
    policy: Option<&PolicyNetwork>,
    k: usize,
    deployments: usize,
    seed: u64,
) -> Result<Vec<EvalPoint>> {
    let horizon = cfg.eval.horizon;
    let scores: Vec<Result<DeploymentScores>> = (0..deployments)
        .into_par_iter()
        .map(|d| {
            let dep_seed = derive_seed(seed, d as u64);
            let deployment = geometry::generate_deployment(
                &cfg.network,
                k,
                &mut ChaCha8Rng::seed_from_u64(derive_seed(dep_seed, 1)),
            );
            let env_seed = derive_seed(dep_seed, 3);
            let action_seed = derive_seed(dep_seed, 4);
            let active = vec![true; k];
            let base =
                baselines::episode_baselines(cfg, &deployment, &active, env_seed, horizon)?;
            let policy_mean = policy
                .map(|p| {
                    run_policy_episode(cfg, p, deployment.clone(), env_seed, action_seed, horizon)
                })
                .transpose()?;
            Ok(DeploymentScores {
                policy: policy_mean,
                max_snr: base.maxsnr_mean,
                heuristic: base.heuristic_mean,
            })
        })
        .collect();
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;

    let aggregate = |values: Vec<f64>, method: &str| -> EvalPoint {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        EvalPoint {
            method: method.to_string(),
            k,
            n_i: cfg.network.beam_budget.first().copied().unwrap_or(0),
            alpha: cfg.alpha,
            traffic_mode: traffic_mode_name(cfg.traffic.mode).to_string(),
            mean_utility_bps: mean,
            ci95: 1.96 * (var / n).sqrt(),
            deployments,
            seed,
        }
    };

    let mut points = Vec::new();
    if policy.is_some() {
        points.push(aggregate(
            scores.iter().map(|s| s.policy.unwrap()).collect(),
            "policy",
        ));
    }
    points.push(aggregate(scores.iter().map(|s| s.max_snr).collect(), "max_snr"));
    points.push(aggregate(
        scores.iter().map(|s| s.heuristic).collect(),
        "heuristic",
    ));
    Ok(points)
}

/// Zero-shot transfer evaluation: loads a checkpoint once, scores it on
/// every requested UE count without any update, and verifies that the
/// parameter version never moved.
pub fn run_transfer_eval(
    checkpoint: &std::path::Path,
    k_values: &[usize],
    overrides: &EvalOverrides,
    manifest_hash: String,
) -> Result<EvalSummary> {
    let (policy, mut cfg, _meta) = PolicyNetwork::load(checkpoint)?;
    overrides.apply(&mut cfg)?;
    let cfg = cfg.validated()?;
    let version_before = policy.store().version();

    let mut points = Vec::new();
    for &k in k_values {
        points.extend(evaluate_methods(
            &cfg,
            Some(&policy),
            k,
            cfg.eval.deployments,
            overrides.seed,
        )?);
    }

    if policy.store().version() != version_before {
        return Err(Error::Checkpoint(
            "parameter version changed during evaluation".into(),
        ));
    }
    Ok(EvalSummary {
        points,
        manifest_hash,
    })
}

/// Scenario overrides applied on top of a checkpoint's embedded config.
#[derive(Debug, Clone, Default)]
pub struct EvalOverrides {
    pub beams: Option<usize>,
    pub alpha: Option<f64>,
    pub traffic: Option<TrafficMode>,
    pub deployments: Option<usize>,
    pub seed: u64,
}

impl EvalOverrides {
    pub fn apply(&self, cfg: &mut SimConfig) -> Result<()> {
        if let Some(n_i) = self.beams {
            cfg.network.beam_budget = vec![n_i; cfg.network.n_sbs];
        }
        if let Some(alpha) = self.alpha {
            cfg.alpha = alpha;
        }
        if let Some(mode) = self.traffic {
            cfg.traffic.mode = mode;
        }
        if let Some(d) = self.deployments {
            cfg.eval.deployments = d;
        }
        Ok(())
    }
}
