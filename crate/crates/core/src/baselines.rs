//! Centralized benchmarks: Max-SNR association, the greedy
//! utility-improving heuristic seeded from it, and the r_d reward gap.
//!
//! Both baselines decide under expected fading (h = 1); scoring against
//! the learned policy reuses the policy run's realized draws so the
//! comparison shares randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{self, ChannelRateEvaluator};
use crate::config::SimConfig;
use crate::env::{self, TrafficModel};
use crate::geometry::{self, BsId, Deployment, UeId, MBS_ID};
use crate::utility::{
    check_feasible, utility_terms, AssociationMatrix, Constraints, RateEvaluator, UtilityReport,
};
use crate::Result;

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub association: AssociationMatrix,
    pub utility: UtilityReport,
    /// Accepted improvement moves (0 for Max-SNR).
    pub iterations: usize,
}

/// Max-SNR association: every active UE requests its highest-SNR
/// candidate BS; over-budget SBSs keep the strongest requesters (ties
/// toward the lower UE id) and bounce the rest to the MBS.
pub fn max_snr(snr: &[Vec<f64>], constraints: &Constraints) -> AssociationMatrix {
    let k = constraints.candidate_sets.len();
    let n_bs = 1 + constraints.beam_budget.len();
    let mut serving: Vec<Option<BsId>> = vec![None; k];
    for ue in 0..k {
        if !constraints.active[ue] {
            continue;
        }
        let best = constraints.candidate_sets[ue]
            .iter()
            .copied()
            .max_by(|&a, &b| {
                snr[ue][a]
                    .partial_cmp(&snr[ue][b])
                    .unwrap()
                    .then(b.cmp(&a)) // prefer the lower BS id on ties
            })
            .expect("candidate sets contain the MBS");
        serving[ue] = Some(best);
    }
    // Capacity rule mirrors the environment's collision resolution with
    // SNR in place of the association probability.
    for bs in 1..n_bs {
        let mut requesters: Vec<UeId> = (0..k)
            .filter(|&ue| serving[ue] == Some(bs))
            .collect();
        let budget = constraints.beam_budget[bs - 1];
        if requesters.len() > budget {
            requesters.sort_by(|&a, &b| {
                snr[b][bs].partial_cmp(&snr[a][bs]).unwrap().then(a.cmp(&b))
            });
            for &loser in &requesters[budget..] {
                serving[loser] = Some(MBS_ID);
            }
        }
    }
    AssociationMatrix::new(n_bs, serving)
}

/// Max-SNR association scored under `evaluator`.
pub fn max_snr_result(
    snr: &[Vec<f64>],
    evaluator: &dyn RateEvaluator,
    demands_bps: &[f64],
    alpha: f64,
    constraints: &Constraints,
) -> BaselineResult {
    let association = max_snr(snr, constraints);
    let rates = evaluator.rates(&association);
    let utility = utility_terms(&association, &rates, demands_bps, alpha, constraints.active);
    BaselineResult {
        association,
        utility,
        iterations: 0,
    }
}

/// Greedy heuristic: start from Max-SNR, then repeatedly apply the
/// single-UE reassignment with the largest utility increase (rates
/// recomputed per candidate association) until no move improves the
/// utility. Scan order is UE id then BS id, so results are
/// deterministic.
pub fn centralized_heuristic(
    evaluator: &dyn RateEvaluator,
    snr: &[Vec<f64>],
    demands_bps: &[f64],
    alpha: f64,
    constraints: &Constraints,
) -> BaselineResult {
    let mut assoc = max_snr(snr, constraints);
    debug_assert!(check_feasible(&assoc, constraints).is_ok());
    let k = assoc.n_ues();
    let mut current = utility_terms(
        &assoc,
        &evaluator.rates(&assoc),
        demands_bps,
        alpha,
        constraints.active,
    );
    let mut iterations = 0;

    loop {
        let mut best: Option<(UeId, BsId, UtilityReport)> = None;
        for ue in 0..k {
            if !constraints.active[ue] {
                continue;
            }
            let from = assoc.serving_of(ue).unwrap();
            for &to in &constraints.candidate_sets[ue] {
                if to == from {
                    continue;
                }
                if to != MBS_ID && assoc.load(to) >= constraints.beam_budget[to - 1] {
                    continue;
                }
                let mut serving = assoc.serving().to_vec();
                serving[ue] = Some(to);
                let candidate = AssociationMatrix::new(assoc.n_bs(), serving);
                let report = utility_terms(
                    &candidate,
                    &evaluator.rates(&candidate),
                    demands_bps,
                    alpha,
                    constraints.active,
                );
                if report.total > current.total
                    && best.as_ref().is_none_or(|(_, _, b)| report.total > b.total)
                {
                    best = Some((ue, to, report));
                }
            }
        }
        match best {
            Some((ue, to, report)) => {
                let mut serving = assoc.serving().to_vec();
                serving[ue] = Some(to);
                assoc = AssociationMatrix::new(assoc.n_bs(), serving);
                current = report;
                iterations += 1;
            }
            None => break,
        }
    }

    BaselineResult {
        association: assoc,
        utility: current,
        iterations,
    }
}

/// Reward gap r_d between the learned policy and the heuristic, signed
/// and (when defined) normalized by the heuristic mean.
#[derive(Debug, Clone, Copy)]
pub struct RewardGap {
    pub diff: f64,
    pub normalized: Option<f64>,
}

pub fn reward_gap(rl_mean: f64, heuristic_mean: f64) -> RewardGap {
    RewardGap {
        diff: rl_mean - heuristic_mean,
        normalized: (heuristic_mean != 0.0).then(|| (rl_mean - heuristic_mean) / heuristic_mean),
    }
}

/// Episode means scored by both baselines.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeBaselines {
    pub maxsnr_mean: f64,
    pub heuristic_mean: f64,
}

/// Replays an episode's channel randomness (same `env_seed` as the
/// policy's environment) and scores both baselines per step: decisions
/// on expected fading over the frozen shadowing, scoring on the step's
/// realized draws.
pub fn episode_baselines(
    cfg: &SimConfig,
    deployment: &Deployment,
    active: &[bool],
    env_seed: u64,
    horizon: usize,
) -> Result<EpisodeBaselines> {
    let k = deployment.n_ues();
    let n_bs = cfg.network.n_bs();
    let topology = geometry::build_topology(&cfg.network, deployment, active)?;
    let mut rng = ChaCha8Rng::seed_from_u64(env_seed);

    let reset_draws = env::draw_reset(&mut rng, k, n_bs, active, &cfg.mbs, &cfg.sbs, &cfg.traffic);
    let shadowing = reset_draws.shadowing;
    let traffic = TrafficModel {
        mode: cfg.traffic.mode,
        mean_demands_mbps: reset_draws.class_mbps,
        current_demands_bps: vec![],
    };
    // The environment consumes one draw for the initial measurement.
    let _ = env::draw_step(&mut rng, k, n_bs, active, &cfg.mbs, &cfg.sbs, &traffic);

    let constraints = Constraints {
        candidate_sets: &topology.candidate_sets,
        beam_budget: &cfg.network.beam_budget,
        active,
    };
    // Decision inputs are association-independent within the episode.
    let expected_fading = channel::unit_matrix(k, n_bs);
    let decision_eval = ChannelRateEvaluator::new(
        deployment,
        &topology,
        &cfg.mbs,
        &cfg.sbs,
        &expected_fading,
        &shadowing,
        active,
    );
    let snr = channel::snr_matrix(
        deployment,
        &topology,
        &cfg.mbs,
        &cfg.sbs,
        &shadowing,
        None,
        active,
    );

    let mut maxsnr_sum = 0.0;
    let mut heuristic_sum = 0.0;
    for _ in 0..horizon {
        let draws = env::draw_step(&mut rng, k, n_bs, active, &cfg.mbs, &cfg.sbs, &traffic);
        let scoring_eval = ChannelRateEvaluator::new(
            deployment,
            &topology,
            &cfg.mbs,
            &cfg.sbs,
            &draws.fading,
            &shadowing,
            active,
        );
        let maxsnr_assoc = max_snr(&snr, &constraints);
        maxsnr_sum += utility_terms(
            &maxsnr_assoc,
            &scoring_eval.rates(&maxsnr_assoc),
            &draws.demands_bps,
            cfg.alpha,
            active,
        )
        .total;

        let heur = centralized_heuristic(
            &decision_eval,
            &snr,
            &draws.demands_bps,
            cfg.alpha,
            &constraints,
        );
        heuristic_sum += utility_terms(
            &heur.association,
            &scoring_eval.rates(&heur.association),
            &draws.demands_bps,
            cfg.alpha,
            active,
        )
        .total;
    }

    Ok(EpisodeBaselines {
        maxsnr_mean: maxsnr_sum / horizon.max(1) as f64,
        heuristic_mean: heuristic_sum / horizon.max(1) as f64,
    })
}
