//! Cooperative multi-agent training with hysteretic clipped proximal
//! policy optimization.
//!
//! Every episode draws a fresh deployment, applies UE dropout, rolls the
//! shared policy for `horizon` steps (pooling all UEs' experiences into
//! one buffer), and runs a few epochs of clipped-surrogate updates. The
//! clip bounds are asymmetric: negative updates clip at 1 - eps_neg,
//! positive ones at 1 + eps_pos, which damps reactions to teammates'
//! bad steps in the shared-reward setting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::config::SimConfig;
use crate::env::{apply_dropout, Env, UeObservation};
use crate::geometry::{self, BsId, Deployment, UeId};
use crate::nn::{Adam, GradStore};
use crate::policy::{AssociationDistribution, PolicyNetwork};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    /// Learning rate mu.
    pub lr: f64,
    /// Discount factor gamma.
    pub gamma: f64,
    /// Clip width for negative updates (eps_1).
    pub eps_neg: f64,
    /// Clip width for positive updates (eps_2).
    pub eps_pos: f64,
    /// Episode horizon T_e in steps.
    pub horizon: usize,
    /// UE dropout parameter p0.
    pub dropout_p0: f64,
    /// Direction of p0: keep-probability (default) or mask-probability.
    pub dropout_p0_is_keep: bool,
    pub epochs_per_batch: usize,
    pub minibatch_size: usize,
    pub episodes_per_batch: usize,
    /// Critic regression coefficient c_v.
    pub critic_coef: f64,
    /// Global gradient-norm clip; `None` disables.
    pub grad_clip: Option<f64>,
    /// Normalize advantages per minibatch.
    pub advantage_norm: bool,
    /// Multiplies rewards before they enter advantages and critic
    /// targets; reported metrics stay in physical units.
    pub reward_scale: f64,
    /// Initial uniform exploration floor mixed into the behavior policy
    /// during training rollouts (0 disables). The behavior probability
    /// enters the ratio denominator, so the surrogate stays exact.
    pub explore_floor: f64,
    /// Fraction of the episode budget over which the floor anneals
    /// linearly to zero.
    pub explore_floor_frac: f64,
    /// Linearly decay the learning rate to this fraction of `lr` over
    /// the episode budget (1 = constant).
    pub lr_final_frac: f64,
    pub optimizer: String,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            gamma: 0.6,
            eps_neg: 0.01,
            eps_pos: 0.5,
            horizon: 250,
            dropout_p0: 0.95,
            dropout_p0_is_keep: true,
            epochs_per_batch: 4,
            minibatch_size: 64,
            episodes_per_batch: 1,
            critic_coef: 0.5,
            grad_clip: Some(10.0),
            advantage_norm: false,
            reward_scale: 1e-9,
            explore_floor: 0.0,
            explore_floor_frac: 0.5,
            lr_final_frac: 1.0,
            optimizer: "adam".into(),
        }
    }
}

impl HyperParams {
    pub fn validated(self) -> Result<Self> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config("gamma must be in (0, 1)".into()));
        }
        if !(self.eps_neg > 0.0 && self.eps_neg <= self.eps_pos) {
            return Err(Error::Config(
                "hysteretic constraint: 0 < eps_neg <= eps_pos".into(),
            ));
        }
        if self.horizon < 1 {
            return Err(Error::Config("horizon must be >= 1".into()));
        }
        if self.lr <= 0.0 || self.reward_scale <= 0.0 {
            return Err(Error::Config("lr and reward_scale must be > 0".into()));
        }
        if self.minibatch_size < 1 || self.epochs_per_batch < 1 || self.episodes_per_batch < 1 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dropout_p0) {
            return Err(Error::Config("dropout_p0 must be in [0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.explore_floor) || !(0.0..=1.0).contains(&self.explore_floor_frac) {
            return Err(Error::Config(
                "explore_floor must be in [0, 1) and explore_floor_frac in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lr_final_frac) {
            return Err(Error::Config("lr_final_frac must be in [0, 1]".into()));
        }
        if self.optimizer != "adam" {
            return Err(Error::Config(format!(
                "unsupported optimizer '{}'",
                self.optimizer
            )));
        }
        Ok(self)
    }
}

/// Splitmix-style seed derivation for independent sub-streams.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(stream.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(0x94d049bb133111eb);
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58476d1ce4e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// One-step TD advantage and return target.
pub fn compute_advantage(r: f64, v_s: f64, v_next: f64, gamma: f64, done: bool) -> (f64, f64) {
    let bootstrap = if done { 0.0 } else { gamma * v_next };
    let ret = r + bootstrap;
    (ret - v_s, ret)
}

/// Probability ratio between current and snapshot policies.
pub fn ppo_ratio(p_new: f64, p_old: f64) -> f64 {
    debug_assert!(p_old > 0.0);
    p_new / p_old
}

/// clip(x, a, b) = min(max(x, a), b).
pub fn clip(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

/// Per-sample hysteretic clipped surrogate (to be maximized).
pub fn hysteretic_ppo_loss(zeta: f64, advantage: f64, eps_neg: f64, eps_pos: f64) -> f64 {
    let clipped = clip(zeta, 1.0 - eps_neg, 1.0 + eps_pos);
    (zeta * advantage).min(clipped * advantage)
}

/// Gradient of the (negated, mean-reduced elsewhere) surrogate with
/// respect to the actor logits, plus the surrogate value. The gradient
/// flows only through the new policy's probability and vanishes on the
/// clipped branch.
pub fn actor_logit_gradient(
    probs: &[f64],
    action: BsId,
    p_old: f64,
    advantage: f64,
    eps_neg: f64,
    eps_pos: f64,
) -> (f64, Vec<f64>) {
    let zeta = ppo_ratio(probs[action], p_old);
    let unclipped = zeta * advantage;
    let clipped = clip(zeta, 1.0 - eps_neg, 1.0 + eps_pos) * advantage;
    let surrogate = unclipped.min(clipped);
    let coeff = if unclipped <= clipped { advantage } else { 0.0 };
    let p_a = probs[action];
    let grad = probs
        .iter()
        .enumerate()
        .map(|(i, &p_i)| {
            let indicator = if i == action { 1.0 } else { 0.0 };
            coeff * p_a * (indicator - p_i) / p_old
        })
        .collect();
    (surrogate, grad)
}

/// One pooled experience of a single UE at a single step.
#[derive(Debug, Clone)]
pub struct Sample {
    pub obs: UeObservation,
    pub action: BsId,
    pub p_old: f64,
    pub reward: f64,
    pub value: f64,
    pub advantage: f64,
    pub ret: f64,
    pub ue_id: UeId,
    pub step: usize,
}

/// Experiences of one rollout batch, all under one parameter version.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub samples: Vec<Sample>,
    pub param_version: u64,
}

/// Rollout diagnostics in physical units.
#[derive(Debug, Clone)]
pub struct EpisodeStats {
    pub mean_reward: f64,
    pub mean_entropy: f64,
    pub collisions: usize,
    pub k_active: usize,
}

/// Rolls one episode under the current policy snapshot and pools all
/// active UEs' experiences, including the episode-start step (its
/// zero-history observation recurs every episode, so the policy must
/// learn it).
pub fn rollout_episode(
    cfg: &SimConfig,
    policy: &PolicyNetwork,
    deployment: Deployment,
    active: Vec<bool>,
    env_seed: u64,
    action_seed: u64,
) -> Result<(RolloutBuffer, EpisodeStats)> {
    rollout_episode_floored(cfg, policy, deployment, active, env_seed, action_seed, 0.0)
}

/// Rollout with a uniform exploration floor mixed into the behavior
/// policy: b = (1 - floor) pi + floor / |A|. Actions are sampled from b
/// and b(a) is recorded as the behavior probability, so the importance
/// ratio in the update stays exact.
#[allow(clippy::too_many_arguments)]
pub fn rollout_episode_floored(
    cfg: &SimConfig,
    policy: &PolicyNetwork,
    deployment: Deployment,
    active: Vec<bool>,
    env_seed: u64,
    action_seed: u64,
    explore_floor: f64,
) -> Result<(RolloutBuffer, EpisodeStats)> {
    let hyper = &cfg.learning;
    let k = deployment.n_ues();
    let (mut env, mut obs) = Env::reset(
        cfg,
        deployment,
        active.clone(),
        ChaCha8Rng::seed_from_u64(env_seed),
    )?;
    let mut action_rng = ChaCha8Rng::seed_from_u64(action_seed);

    struct StepRecord {
        obs: Vec<Option<UeObservation>>,
        actions: Vec<Option<BsId>>,
        p_old: Vec<f64>,
        values: Vec<f64>,
        reward_scaled: f64,
    }
    let mut records: Vec<StepRecord> = Vec::with_capacity(hyper.horizon);
    let mut reward_sum = 0.0;
    let mut entropy_sum = 0.0;
    let mut entropy_count = 0usize;
    let mut collisions = 0usize;

    for _ in 0..hyper.horizon {
        let mut requests: Vec<Option<BsId>> = vec![None; k];
        let mut probs: Vec<Option<Vec<f64>>> = vec![None; k];
        let mut p_old = vec![0.0; k];
        let mut values = vec![0.0; k];
        for ue in 0..k {
            let Some(o) = &obs[ue] else { continue };
            let out = policy.forward(o)?;
            let behavior = if explore_floor > 0.0 {
                let u = explore_floor / out.dist.probs.len() as f64;
                AssociationDistribution {
                    probs: out
                        .dist
                        .probs
                        .iter()
                        .map(|p| (1.0 - explore_floor) * p + u)
                        .collect(),
                }
            } else {
                out.dist.clone()
            };
            let action = behavior.sample(&mut action_rng);
            p_old[ue] = behavior.probs[action];
            values[ue] = out.value;
            entropy_sum += out.dist.entropy();
            entropy_count += 1;
            requests[ue] = Some(action);
            probs[ue] = Some(out.dist.probs);
        }
        let outcome = env.step(&requests, &probs)?;
        reward_sum += outcome.reward;
        collisions += outcome.info.collisions;
        records.push(StepRecord {
            obs: std::mem::replace(&mut obs, outcome.observations),
            actions: requests,
            p_old,
            values,
            reward_scaled: outcome.reward * hyper.reward_scale,
        });
    }

    let total = records.len();
    let mut buffer = RolloutBuffer {
        samples: Vec::new(),
        param_version: policy.store().version(),
    };
    for t in 0..total {
        let done = t == total - 1;
        for ue in 0..k {
            let Some(o) = &records[t].obs[ue] else { continue };
            let v_next = if done { 0.0 } else { records[t + 1].values[ue] };
            let (advantage, ret) = compute_advantage(
                records[t].reward_scaled,
                records[t].values[ue],
                v_next,
                hyper.gamma,
                done,
            );
            buffer.samples.push(Sample {
                obs: o.clone(),
                action: records[t].actions[ue].unwrap(),
                p_old: records[t].p_old[ue],
                reward: records[t].reward_scaled,
                value: records[t].values[ue],
                advantage,
                ret,
                ue_id: ue,
                step: t,
            });
        }
    }

    let stats = EpisodeStats {
        mean_reward: reward_sum / total.max(1) as f64,
        mean_entropy: entropy_sum / entropy_count.max(1) as f64,
        collisions,
        k_active: active.iter().filter(|&&a| a).count(),
    };
    Ok((buffer, stats))
}

#[derive(Debug, Clone)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    /// Mean total loss per epoch over the frozen buffer.
    pub per_epoch_loss: Vec<f64>,
    /// Samples skipped for a non-positive behavior probability.
    pub excluded: usize,
}

/// Loss pieces and accumulated parameter gradient of one sample batch.
pub struct BatchLossGrad {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub grads: GradStore,
    pub excluded: usize,
}

/// Mean hysteretic-PPO loss, critic regression and exact gradient over
/// `samples`; `advantages[i]` overrides the stored advantage (the update
/// loop passes normalized values). This is the single loss definition
/// shared by the optimizer and the gradient checker.
pub fn loss_and_gradient(
    policy: &PolicyNetwork,
    samples: &[&Sample],
    advantages: &[f64],
    hyper: &HyperParams,
) -> Result<BatchLossGrad> {
    assert_eq!(samples.len(), advantages.len());
    let mut grads = GradStore::zeros_like(policy.store());
    let m = samples.len() as f64;
    let mut actor_loss = 0.0;
    let mut critic_loss = 0.0;
    let mut excluded = 0;
    for (sample, &advantage) in samples.iter().zip(advantages) {
        if sample.p_old <= 0.0 {
            excluded += 1;
            continue;
        }
        let (out, tape) = policy.forward_traced(&sample.obs)?;
        let (surrogate, dsurr_dlogits) = actor_logit_gradient(
            &out.dist.probs,
            sample.action,
            sample.p_old,
            advantage,
            hyper.eps_neg,
            hyper.eps_pos,
        );
        actor_loss -= surrogate;
        let vdiff = out.value - sample.ret;
        critic_loss += hyper.critic_coef * vdiff * vdiff;
        // Loss = -mean(surrogate) + c_v mean((V - G)^2).
        let dlogits: Vec<f64> = dsurr_dlogits.iter().map(|g| -g / m).collect();
        let dvalue = 2.0 * hyper.critic_coef * vdiff / m;
        policy.backward(tape, &dlogits, dvalue, &mut grads);
    }
    Ok(BatchLossGrad {
        actor_loss: actor_loss / m,
        critic_loss: critic_loss / m,
        grads,
        excluded,
    })
}

/// Minibatch epochs of hysteretic PPO plus critic regression on a
/// frozen rollout buffer.
pub fn update(
    buffer: &RolloutBuffer,
    policy: &mut PolicyNetwork,
    adam: &mut Adam,
    hyper: &HyperParams,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    if buffer.samples.is_empty() {
        return Ok(UpdateStats {
            actor_loss: 0.0,
            critic_loss: 0.0,
            per_epoch_loss: vec![],
            excluded: 0,
        });
    }
    let mut indices: Vec<usize> = (0..buffer.samples.len()).collect();
    let mut actor_loss_sum = 0.0;
    let mut critic_loss_sum = 0.0;
    let mut batches = 0usize;
    let mut excluded = 0usize;
    let mut per_epoch_loss = Vec::with_capacity(hyper.epochs_per_batch);

    for _ in 0..hyper.epochs_per_batch {
        indices.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0usize;
        for chunk in indices.chunks(hyper.minibatch_size) {
            let samples: Vec<&Sample> = chunk.iter().map(|&i| &buffer.samples[i]).collect();
            let m = samples.len() as f64;
            let mut advantages: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
            if hyper.advantage_norm {
                let mean = advantages.iter().sum::<f64>() / m;
                let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / m;
                let std = var.sqrt().max(1e-8);
                advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
            }

            let batch = loss_and_gradient(policy, &samples, &advantages, hyper)?;
            excluded += batch.excluded;
            let (actor_loss, critic_loss) = (batch.actor_loss, batch.critic_loss);
            let total_loss = actor_loss + critic_loss;
            if !total_loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!(
                    "actor {actor_loss}, critic {critic_loss}, batch of {} at version {}",
                    samples.len(),
                    policy.store().version()
                )));
            }

            let mut flat_grad = batch.grads.flatten();
            if let Some(max_norm) = hyper.grad_clip {
                let norm = flat_grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let scale = max_norm / norm;
                    flat_grad.iter_mut().for_each(|g| *g *= scale);
                }
            }
            let mut params = policy.store().flatten();
            adam.step(&mut params, &flat_grad);
            policy.store_mut().set_from_flat(&params);
            policy.store_mut().bump_version();

            actor_loss_sum += actor_loss;
            critic_loss_sum += critic_loss;
            epoch_loss += total_loss;
            batches += 1;
            epoch_batches += 1;
        }
        per_epoch_loss.push(epoch_loss / epoch_batches.max(1) as f64);
    }

    Ok(UpdateStats {
        actor_loss: actor_loss_sum / batches.max(1) as f64,
        critic_loss: critic_loss_sum / batches.max(1) as f64,
        per_epoch_loss,
        excluded,
    })
}

/// One CSV row of the training metrics stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub seed: u64,
    pub k: usize,
    pub mean_reward: f64,
    pub heuristic_reward: f64,
    pub r_d: f64,
    pub maxsnr_reward: f64,
    pub policy_entropy: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub collisions: usize,
    pub wall_ms: f64,
}

pub struct TrainOutcome {
    pub policy: PolicyNetwork,
    pub metrics: Vec<MetricsRow>,
}

/// Full training run: per episode a fresh deployment, dropout mask,
/// rollout, baseline replay on identical draws, and a PPO update.
/// `on_episode` sees every metrics row as it is produced.
pub fn train<F>(
    cfg: &SimConfig,
    episodes: usize,
    seed: u64,
    mut on_episode: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&MetricsRow, &PolicyNetwork) -> Result<()>,
{
    let mut policy = PolicyNetwork::init(
        cfg,
        &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xa11c)),
    );
    let mut adam = Adam::new(cfg.learning.lr, policy.store().param_count());
    let mut metrics = Vec::with_capacity(episodes);
    // Rollouts pool across `episodes_per_batch` episodes under one
    // parameter snapshot before each update.
    let mut batch = RolloutBuffer {
        samples: Vec::new(),
        param_version: policy.store().version(),
    };
    let mut last_update = UpdateStats {
        actor_loss: 0.0,
        critic_loss: 0.0,
        per_epoch_loss: vec![],
        excluded: 0,
    };

    for episode in 0..episodes {
        let t0 = std::time::Instant::now();
        let ep_seed = derive_seed(seed, episode as u64);
        let deployment = geometry::generate_deployment(
            &cfg.network,
            cfg.k0,
            &mut ChaCha8Rng::seed_from_u64(derive_seed(ep_seed, 1)),
        );
        let active = apply_dropout(
            &vec![true; cfg.k0],
            cfg.learning.dropout_p0,
            cfg.learning.dropout_p0_is_keep,
            &mut ChaCha8Rng::seed_from_u64(derive_seed(ep_seed, 2)),
        );
        let env_seed = derive_seed(ep_seed, 3);
        let action_seed = derive_seed(ep_seed, 4);

        let progress = episode as f64 / episodes.max(1) as f64;
        let floor = {
            let anneal_end = (episodes as f64 * cfg.learning.explore_floor_frac).max(1.0);
            let remain = (1.0 - episode as f64 / anneal_end).max(0.0);
            cfg.learning.explore_floor * remain
        };
        adam.lr = cfg.learning.lr
            * (1.0 - progress * (1.0 - cfg.learning.lr_final_frac));
        let (buffer, stats) = rollout_episode_floored(
            cfg,
            &policy,
            deployment.clone(),
            active.clone(),
            env_seed,
            action_seed,
            floor,
        )?;
        let base = baselines::episode_baselines(
            cfg,
            &deployment,
            &active,
            env_seed,
            cfg.learning.horizon,
        )?;
        batch.samples.extend(buffer.samples);
        if (episode + 1) % cfg.learning.episodes_per_batch == 0 || episode + 1 == episodes {
            last_update = update(
                &batch,
                &mut policy,
                &mut adam,
                &cfg.learning,
                &mut ChaCha8Rng::seed_from_u64(derive_seed(ep_seed, 5)),
            )?;
            batch = RolloutBuffer {
                samples: Vec::new(),
                param_version: policy.store().version(),
            };
        }

        let row = MetricsRow {
            episode,
            seed,
            k: stats.k_active,
            mean_reward: stats.mean_reward,
            heuristic_reward: base.heuristic_mean,
            r_d: stats.mean_reward - base.heuristic_mean,
            maxsnr_reward: base.maxsnr_mean,
            policy_entropy: stats.mean_entropy,
            actor_loss: last_update.actor_loss,
            critic_loss: last_update.critic_loss,
            collisions: stats.collisions,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        };
        on_episode(&row, &policy)?;
        metrics.push(row);
    }

    Ok(TrainOutcome { policy, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advantage_arithmetic() {
        assert_eq!(compute_advantage(1.0, 0.0, 0.0, 0.6, false), (1.0, 1.0));
        let (adv, ret) = compute_advantage(0.0, 2.0, 2.0, 0.6, false);
        assert!((adv - -0.8).abs() < 1e-15);
        assert!((ret - 1.2).abs() < 1e-15);
        // Terminal step ignores the bootstrap.
        assert_eq!(compute_advantage(0.5, 2.0, 9.0, 0.6, true), (-1.5, 0.5));
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(ppo_ratio(0.3, 0.3), 1.0);
        assert_eq!(ppo_ratio(0.6, 0.3), 2.0);
    }

    #[test]
    fn clip_matches_min_max_composition() {
        for x in [-2.0, 0.0, 0.5, 0.99, 1.0, 1.2, 1.5, 3.0] {
            assert_eq!(clip(x, 0.99, 1.5), x.max(0.99).min(1.5));
        }
    }

    #[test]
    fn hysteretic_loss_hand_values() {
        // Paper operating point (eps_1, eps_2) = (0.01, 0.5).
        assert_eq!(hysteretic_ppo_loss(2.0, 1.0, 0.01, 0.5), 1.5);
        assert_eq!(hysteretic_ppo_loss(0.5, -1.0, 0.01, 0.5), -0.99);
        for adv in [-1.0, 0.0, 1.0] {
            assert_eq!(hysteretic_ppo_loss(1.0, adv, 0.01, 0.5), adv);
        }
    }

    #[test]
    fn vanilla_recovery_at_equal_eps() {
        for zeta in [0.5f64, 0.7, 0.99, 1.0, 1.1, 1.5, 2.0] {
            for adv in [-2.0f64, -0.5, 0.0, 0.7, 3.0] {
                let vanilla = (zeta * adv).min(clip(zeta, 0.8, 1.2) * adv);
                assert_eq!(hysteretic_ppo_loss(zeta, adv, 0.2, 0.2), vanilla);
            }
        }
    }

    #[test]
    fn negative_updates_clip_sooner() {
        let (e1, e2) = (0.01, 0.5);
        for zeta in [0.1, 0.5, 0.9, 0.98] {
            let s = hysteretic_ppo_loss(zeta, -1.0, e1, e2);
            assert_eq!(s, -(1.0 - e1));
            assert!(s.abs() <= (1.0 - e1));
        }
    }

    #[test]
    fn actor_gradient_matches_vanilla_pg_at_ratio_one() {
        // Two-action toy: at p_new = p_old the surrogate gradient must
        // equal the policy-gradient term A * (indicator - p).
        let probs = vec![0.7, 0.3];
        let adv = 1.7;
        let (s, g) = actor_logit_gradient(&probs, 1, 0.3, adv, 0.01, 0.5);
        assert!((s - adv).abs() < 1e-15);
        assert!((g[0] - adv * (0.0 - 0.7)).abs() < 1e-12);
        assert!((g[1] - adv * (1.0 - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn gradient_vanishes_on_the_clipped_branch() {
        // zeta = 2 with positive advantage: clip(2, 0.99, 1.5) wins the
        // min, so no gradient flows.
        let probs = vec![0.8, 0.2];
        let (s, g) = actor_logit_gradient(&probs, 0, 0.4, 1.0, 0.01, 0.5);
        assert_eq!(s, 1.5);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn derive_seed_is_stable_and_spread() {
        assert_eq!(derive_seed(1, 2), derive_seed(1, 2));
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
        assert_ne!(derive_seed(1, 2), derive_seed(2, 2));
    }
}
