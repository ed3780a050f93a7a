//! Multi-agent user-association environment.
//!
//! Each step every active UE requests one BS; SBSs over budget keep the
//! requesters with the highest association probability (ties toward the
//! lower UE id) and bounce the rest to the MBS with ACK = 0. Fading and
//! traffic are redrawn per step, shadowing is frozen per episode, and
//! all UEs share the network utility as a common reward.
//!
//! Randomness is consumed in a canonical order that skips masked UEs
//! entirely, so an episode with UE m masked is draw-for-draw identical
//! to one on the deployment with UE m deleted.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::channel::{self, RadioParams};
use crate::config::SimConfig;
use crate::geometry::{self, BsId, Deployment, Topology, UeId, MBS_ID};
use crate::utility::{self, AssociationMatrix, Constraints, UtilityReport};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrafficMode {
    /// Per-step demands drawn from Poisson(mean class) in Mbps.
    Poisson,
    /// No-traffic mode: every demand is the infinity sentinel, so the
    /// utility argument is the raw rate.
    Infinite,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficConfig {
    pub mode: TrafficMode,
    /// Service classes assigned uniformly per UE at episode start.
    pub mean_demands_mbps: Vec<f64>,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            mode: TrafficMode::Poisson,
            mean_demands_mbps: vec![5.0, 200.0, 1500.0],
        }
    }
}

impl TrafficConfig {
    pub fn validated(self) -> Result<Self> {
        if self.mean_demands_mbps.is_empty() || self.mean_demands_mbps.iter().any(|&d| d <= 0.0) {
            return Err(Error::Config("traffic classes must be positive".into()));
        }
        Ok(self)
    }
}

/// Episode-scoped traffic state.
#[derive(Debug, Clone)]
pub struct TrafficModel {
    pub mode: TrafficMode,
    /// Mean demand per UE in Mbps (the UE's service class).
    pub mean_demands_mbps: Vec<f64>,
    /// Demand of the current step, in bps.
    pub current_demands_bps: Vec<f64>,
}

/// Per-step demand draw: Poisson(mean Mbps) clamped to >= 1 Mbps and
/// expressed in bps; the infinity sentinel in no-traffic mode. Entries
/// for inactive UEs are 0 and consume no randomness.
pub fn sample_traffic<R: Rng>(traffic: &TrafficModel, active: &[bool], rng: &mut R) -> Vec<f64> {
    let k = traffic.mean_demands_mbps.len();
    let mut out = vec![0.0; k];
    for ue in 0..k {
        if !active[ue] {
            continue;
        }
        out[ue] = match traffic.mode {
            TrafficMode::Infinite => f64::INFINITY,
            TrafficMode::Poisson => {
                let lambda = traffic.mean_demands_mbps[ue];
                let draw: f64 = Poisson::new(lambda).expect("positive class mean").sample(rng);
                draw.max(1.0) * 1e6
            }
        };
    }
    out
}

/// Local observation of one UE; fixed layout indexed by BS id with
/// zeros outside the candidate set, so its size never depends on the
/// number of UEs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalObservation {
    /// Effective connection request of the previous step.
    pub prev_action: BsId,
    /// Rate achieved on the previous step's realized link.
    pub prev_rate_bps: f64,
    /// Network utility of the previous step, broadcast by the
    /// controller.
    pub prev_network_utility: f64,
    pub ack: u8,
    pub rss_w: Vec<f64>,
    pub aoa_rad: Vec<f64>,
}

/// Neighbor descriptor: position and previously achieved rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborInfo {
    pub x_m: f64,
    pub y_m: f64,
    pub prev_rate_bps: f64,
}

/// Variable-length neighborhood view, ordered by UE id, plus the UE's
/// own descriptor (the attention key side).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalObservation {
    pub self_info: NeighborInfo,
    pub neighbors: Vec<NeighborInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeObservation {
    pub local: LocalObservation,
    pub global: GlobalObservation,
}

/// One (s, a, r, s') tuple of a single UE.
#[derive(Debug, Clone)]
pub struct Experience {
    pub obs: UeObservation,
    pub action: BsId,
    pub reward: f64,
    pub next_obs: UeObservation,
    pub done: bool,
    pub ue_id: UeId,
}

/// Episode-start randomness: per-link shadowing and per-UE service
/// classes.
#[derive(Debug, Clone)]
pub struct ResetDraws {
    pub shadowing: Vec<Vec<f64>>,
    pub class_mbps: Vec<f64>,
}

/// Per-step randomness: demands, per-link fading, AoA measurement
/// noise.
#[derive(Debug, Clone)]
pub struct StepDraws {
    pub demands_bps: Vec<f64>,
    pub fading: Vec<Vec<f64>>,
    pub aoa_noise: Vec<Vec<f64>>,
}

/// Draws episode-start randomness in canonical order (active UEs
/// ascending, BS ids ascending). Baseline replays call this with a clone
/// of the environment rng to see identical channels.
pub fn draw_reset<R: Rng>(
    rng: &mut R,
    k: usize,
    n_bs: usize,
    active: &[bool],
    mbs: &RadioParams,
    sbs: &RadioParams,
    traffic_cfg: &TrafficConfig,
) -> ResetDraws {
    let mut shadowing = vec![vec![1.0; n_bs]; k];
    for ue in 0..k {
        if !active[ue] {
            continue;
        }
        for bs in 0..n_bs {
            let params = if bs == MBS_ID { mbs } else { sbs };
            shadowing[ue][bs] = channel::sample_shadowing(params, rng);
        }
    }
    let mut class_mbps = vec![f64::INFINITY; k];
    if traffic_cfg.mode == TrafficMode::Poisson {
        for ue in 0..k {
            if active[ue] {
                let idx = rng.random_range(0..traffic_cfg.mean_demands_mbps.len());
                class_mbps[ue] = traffic_cfg.mean_demands_mbps[idx];
            }
        }
    }
    ResetDraws {
        shadowing,
        class_mbps,
    }
}

/// Draws one step's randomness in canonical order.
pub fn draw_step<R: Rng>(
    rng: &mut R,
    k: usize,
    n_bs: usize,
    active: &[bool],
    mbs: &RadioParams,
    sbs: &RadioParams,
    traffic: &TrafficModel,
) -> StepDraws {
    let demands_bps = sample_traffic(traffic, active, rng);
    let mut fading = vec![vec![0.0; n_bs]; k];
    let mut aoa_noise = vec![vec![0.0; n_bs]; k];
    for ue in 0..k {
        if !active[ue] {
            continue;
        }
        for bs in 0..n_bs {
            let params = if bs == MBS_ID { mbs } else { sbs };
            fading[ue][bs] = channel::sample_fading(params, rng);
        }
    }
    for ue in 0..k {
        if !active[ue] {
            continue;
        }
        for bs in 0..n_bs {
            let params = if bs == MBS_ID { mbs } else { sbs };
            if params.aoa_noise_std_rad > 0.0 {
                aoa_noise[ue][bs] = rng
                    .sample(rand_distr::Normal::new(0.0, params.aoa_noise_std_rad).unwrap());
            }
        }
    }
    StepDraws {
        demands_bps,
        fading,
        aoa_noise,
    }
}

/// Masks each base-active UE out with the configured Bernoulli
/// probability, resampling until at least one UE survives. `p0` follows
/// the configured direction: keep-probability by default.
pub fn apply_dropout<R: Rng>(
    base: &[bool],
    p0: f64,
    p0_is_keep: bool,
    rng: &mut R,
) -> Vec<bool> {
    let mask_p = if p0_is_keep { 1.0 - p0 } else { p0 };
    if mask_p <= 0.0 {
        return base.to_vec();
    }
    loop {
        let mask: Vec<bool> = base
            .iter()
            .map(|&a| a && rng.random::<f64>() >= mask_p)
            .collect();
        if mask.iter().any(|&m| m) {
            return mask;
        }
        if mask_p >= 1.0 {
            // Resampling cannot help; keep one base-active UE.
            let candidates: Vec<usize> = (0..base.len()).filter(|&j| base[j]).collect();
            let mut mask = vec![false; base.len()];
            mask[candidates[rng.random_range(0..candidates.len())]] = true;
            return mask;
        }
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Option<UeObservation>>,
    /// Shared cooperative reward: the step's network utility.
    pub reward: f64,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub association: AssociationMatrix,
    pub link_states: Vec<Option<channel::LinkState>>,
    pub utility: UtilityReport,
    /// UEs displaced to the MBS by the capacity rule this step.
    pub collisions: usize,
    pub demands_bps: Vec<f64>,
}

pub struct Env {
    network: geometry::NetworkConfig,
    mbs: RadioParams,
    sbs: RadioParams,
    alpha: f64,
    traffic: TrafficModel,
    deployment: Deployment,
    topology: Topology,
    active: Vec<bool>,
    shadowing: Vec<Vec<f64>>,
    prev_action: Vec<BsId>,
    prev_rate: Vec<f64>,
    prev_ack: Vec<u8>,
    prev_utility: f64,
    rng: ChaCha8Rng,
    t: u64,
}

impl Env {
    /// Starts an episode: fresh topology, shadowing and service classes;
    /// everyone initialized on the MBS with zero history.
    pub fn reset(
        cfg: &SimConfig,
        deployment: Deployment,
        active: Vec<bool>,
        rng: ChaCha8Rng,
    ) -> Result<(Env, Vec<Option<UeObservation>>)> {
        let k = deployment.n_ues();
        if k == 0 {
            return Err(Error::Config("deployment has no UEs".into()));
        }
        if active.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: active.len(),
            });
        }
        if !active.iter().any(|&a| a) {
            return Err(Error::Config("no active UE in the episode".into()));
        }
        let topology = geometry::build_topology(&cfg.network, &deployment, &active)?;
        let mut env = Env {
            network: cfg.network.clone(),
            mbs: cfg.mbs.clone(),
            sbs: cfg.sbs.clone(),
            alpha: cfg.alpha,
            traffic: TrafficModel {
                mode: cfg.traffic.mode,
                mean_demands_mbps: vec![],
                current_demands_bps: vec![],
            },
            deployment,
            topology,
            active,
            shadowing: vec![],
            prev_action: vec![MBS_ID; k],
            prev_rate: vec![0.0; k],
            prev_ack: vec![1; k],
            prev_utility: 0.0,
            rng,
            t: 0,
        };
        let n_bs = env.network.n_bs();
        let reset_draws = draw_reset(
            &mut env.rng,
            k,
            n_bs,
            &env.active,
            &env.mbs,
            &env.sbs,
            &cfg.traffic,
        );
        env.shadowing = reset_draws.shadowing;
        env.traffic.mean_demands_mbps = reset_draws.class_mbps;
        // Initial measurement uses its own channel draw.
        let draws = draw_step(
            &mut env.rng,
            k,
            n_bs,
            &env.active,
            &env.mbs,
            &env.sbs,
            &env.traffic,
        );
        env.traffic.current_demands_bps = draws.demands_bps;
        let obs = env.build_observations(&draws.fading, &draws.aoa_noise);
        Ok((env, obs))
    }

    pub fn n_ues(&self) -> usize {
        self.deployment.n_ues()
    }

    pub fn n_bs(&self) -> usize {
        self.network.n_bs()
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn deployment(&self) -> &Deployment {
        &self.deployment
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn traffic(&self) -> &TrafficModel {
        &self.traffic
    }

    pub fn shadowing(&self) -> &[Vec<f64>] {
        &self.shadowing
    }

    /// Applies per-UE connection requests and advances the dynamics.
    ///
    /// `requests[j]` and `probs[j]` must be present exactly for active
    /// UEs; `probs[j][i]` is the association probability the policy put
    /// on BS i, used to rank colliding requesters.
    pub fn step(
        &mut self,
        requests: &[Option<BsId>],
        probs: &[Option<Vec<f64>>],
    ) -> Result<StepOutcome> {
        let k = self.n_ues();
        let n_bs = self.n_bs();
        if requests.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: requests.len(),
            });
        }
        if probs.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: probs.len(),
            });
        }

        // Redirect unauthorized requests to the MBS.
        let mut effective = vec![MBS_ID; k];
        for ue in 0..k {
            if !self.active[ue] {
                continue;
            }
            let req = requests[ue].ok_or_else(|| {
                Error::Config(format!("active UE {ue} has no request"))
            })?;
            effective[ue] = if self.topology.candidate_sets[ue].contains(&req) {
                req
            } else {
                MBS_ID
            };
        }

        // Capacity rule: each over-budget SBS keeps the requesters with
        // the highest association probability, ties toward lower id.
        let mut serving: Vec<Option<BsId>> = (0..k)
            .map(|ue| self.active[ue].then_some(effective[ue]))
            .collect();
        let mut ack = vec![1u8; k];
        let mut collisions = 0;
        for bs in 1..n_bs {
            let mut requesters: Vec<UeId> = (0..k)
                .filter(|&ue| self.active[ue] && effective[ue] == bs)
                .collect();
            let budget = self.network.budget_of(bs);
            if requesters.len() <= budget {
                continue;
            }
            requesters.sort_by(|&a, &b| {
                let pa = probs[a].as_ref().map_or(0.0, |p| p[bs]);
                let pb = probs[b].as_ref().map_or(0.0, |p| p[bs]);
                pb.partial_cmp(&pa).unwrap().then(a.cmp(&b))
            });
            for &loser in &requesters[budget..] {
                serving[loser] = Some(MBS_ID);
                ack[loser] = 0;
                collisions += 1;
            }
        }

        // Channel and traffic dynamics for this step.
        let draws = draw_step(
            &mut self.rng,
            k,
            n_bs,
            &self.active,
            &self.mbs,
            &self.sbs,
            &self.traffic,
        );
        self.traffic.current_demands_bps = draws.demands_bps.clone();

        let assoc = AssociationMatrix::new(n_bs, serving);
        debug_assert!(utility::check_feasible(
            &assoc,
            &Constraints {
                candidate_sets: &self.topology.candidate_sets,
                beam_budget: &self.network.beam_budget,
                active: &self.active,
            }
        )
        .is_ok());

        let link_states = channel::compute_sinr_and_rates(
            &assoc,
            &self.deployment,
            &self.topology,
            &self.mbs,
            &self.sbs,
            &draws.fading,
            &self.shadowing,
            &self.active,
        )?;
        let rates: Vec<f64> = link_states
            .iter()
            .map(|ls| ls.map_or(0.0, |l| l.rate_bps))
            .collect();
        let utility = utility::utility_terms(
            &assoc,
            &rates,
            &draws.demands_bps,
            self.alpha,
            &self.active,
        );
        let reward = utility.total;

        self.t += 1;
        for ue in 0..k {
            if !self.active[ue] {
                continue;
            }
            self.prev_action[ue] = effective[ue];
            self.prev_rate[ue] = rates[ue];
            self.prev_ack[ue] = ack[ue];
        }
        self.prev_utility = reward;

        let observations = self.build_observations(&draws.fading, &draws.aoa_noise);
        Ok(StepOutcome {
            observations,
            reward,
            info: StepInfo {
                association: assoc,
                link_states,
                utility,
                collisions,
                demands_bps: draws.demands_bps,
            },
        })
    }

    fn build_observations(
        &self,
        fading: &[Vec<f64>],
        aoa_noise: &[Vec<f64>],
    ) -> Vec<Option<UeObservation>> {
        (0..self.n_ues())
            .map(|ue| {
                if !self.active[ue] {
                    return None;
                }
                let (rss_w, aoa_rad) = channel::measure(
                    ue,
                    &self.deployment,
                    &self.topology,
                    &self.mbs,
                    &self.sbs,
                    &fading[ue],
                    &self.shadowing[ue],
                    &aoa_noise[ue],
                );
                let descriptor = |l: UeId| NeighborInfo {
                    x_m: self.deployment.positions[l].x,
                    y_m: self.deployment.positions[l].y,
                    prev_rate_bps: self.prev_rate[l],
                };
                Some(UeObservation {
                    local: LocalObservation {
                        prev_action: self.prev_action[ue],
                        prev_rate_bps: self.prev_rate[ue],
                        prev_network_utility: self.prev_utility,
                        ack: self.prev_ack[ue],
                        rss_w,
                        aoa_rad,
                    },
                    global: GlobalObservation {
                        self_info: descriptor(ue),
                        neighbors: self.topology.neighbor_sets[ue]
                            .iter()
                            .map(|&l| descriptor(l))
                            .collect(),
                    },
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use rand::SeedableRng;

    fn desk_config(n_sbs: usize, budget: usize) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.network.n_sbs = n_sbs;
        cfg.network.beam_budget = vec![budget; n_sbs];
        cfg.traffic.mode = TrafficMode::Infinite;
        cfg.validated().unwrap()
    }

    fn cluster_deployment(k: usize) -> Deployment {
        // All UEs inside the single SBS's coverage (region center).
        Deployment {
            positions: (0..k)
                .map(|i| Point::new(95.0 + i as f64 * 2.0, 100.0))
                .collect(),
            timestamp: 0,
        }
    }

    fn uniform_probs(k: usize, n_bs: usize) -> Vec<Option<Vec<f64>>> {
        vec![Some(vec![1.0 / n_bs as f64; n_bs]); k]
    }

    #[test]
    fn reset_initializes_on_the_mbs() {
        let cfg = desk_config(3, 3);
        let dep = cluster_deployment(5);
        let rng = ChaCha8Rng::seed_from_u64(1);
        let (_, obs) = Env::reset(&cfg, dep, vec![true; 5], rng).unwrap();
        for o in obs.iter().flatten() {
            assert_eq!(o.local.prev_action, MBS_ID);
            assert_eq!(o.local.prev_rate_bps, 0.0);
            assert_eq!(o.local.prev_network_utility, 0.0);
            assert_eq!(o.local.ack, 1);
            assert!(o.global.neighbors.len() <= cfg.network.neighbor_k);
            assert_eq!(o.local.rss_w.len(), 4);
        }
    }

    #[test]
    fn reset_is_deterministic_per_seed() {
        let cfg = desk_config(3, 3);
        let dep = cluster_deployment(5);
        let (_, a) = Env::reset(&cfg, dep.clone(), vec![true; 5], ChaCha8Rng::seed_from_u64(9))
            .unwrap();
        let (_, b) =
            Env::reset(&cfg, dep, vec![true; 5], ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn collision_keeps_highest_probability_requesters() {
        let cfg = desk_config(1, 3);
        let dep = cluster_deployment(4);
        let (mut env, _) =
            Env::reset(&cfg, dep, vec![true; 4], ChaCha8Rng::seed_from_u64(2)).unwrap();
        // All four request SBS 1 with descending probabilities.
        let requests = vec![Some(1); 4];
        let probs: Vec<Option<Vec<f64>>> = [0.9, 0.8, 0.7, 0.6]
            .iter()
            .map(|&p| Some(vec![1.0 - p, p]))
            .collect();
        let out = env.step(&requests, &probs).unwrap();
        let assoc = &out.info.association;
        assert_eq!(assoc.serving_of(0), Some(1));
        assert_eq!(assoc.serving_of(1), Some(1));
        assert_eq!(assoc.serving_of(2), Some(1));
        assert_eq!(assoc.serving_of(3), Some(MBS_ID));
        assert_eq!(out.info.collisions, 1);
        let next = out.observations[3].as_ref().unwrap();
        assert_eq!(next.local.ack, 0);
        assert_eq!(out.observations[0].as_ref().unwrap().local.ack, 1);
    }

    #[test]
    fn mbs_accepts_everyone() {
        let cfg = desk_config(2, 1);
        let dep = cluster_deployment(6);
        let (mut env, _) =
            Env::reset(&cfg, dep, vec![true; 6], ChaCha8Rng::seed_from_u64(3)).unwrap();
        let out = env
            .step(&vec![Some(MBS_ID); 6], &uniform_probs(6, 3))
            .unwrap();
        assert_eq!(out.info.collisions, 0);
        for o in out.observations.iter().flatten() {
            assert_eq!(o.local.ack, 1);
        }
        assert_eq!(out.info.association.load(MBS_ID), 6);
    }

    #[test]
    fn unauthorized_requests_land_on_the_mbs() {
        let cfg = desk_config(3, 3);
        // UE out of every SBS's range.
        let dep = Deployment {
            positions: vec![Point::new(1.0, 1.0)],
            timestamp: 0,
        };
        let (mut env, _) =
            Env::reset(&cfg, dep, vec![true], ChaCha8Rng::seed_from_u64(4)).unwrap();
        let out = env.step(&[Some(2)], &uniform_probs(1, 4)).unwrap();
        assert_eq!(out.info.association.serving_of(0), Some(MBS_ID));
        // A redirected request is not a collision.
        assert_eq!(out.observations[0].as_ref().unwrap().local.ack, 1);
    }

    #[test]
    fn request_length_mismatch_is_an_error() {
        let cfg = desk_config(1, 1);
        let dep = cluster_deployment(2);
        let (mut env, _) =
            Env::reset(&cfg, dep, vec![true; 2], ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(env.step(&[Some(0)], &uniform_probs(2, 2)).is_err());
    }

    #[test]
    fn reward_matches_independent_utility_recomputation() {
        let cfg = desk_config(2, 2);
        let dep = cluster_deployment(4);
        let (mut env, _) =
            Env::reset(&cfg, dep, vec![true; 4], ChaCha8Rng::seed_from_u64(6)).unwrap();
        let out = env
            .step(&vec![Some(1); 4], &uniform_probs(4, 3))
            .unwrap();
        // Recompute the utility from the link states by hand.
        let mut total = 0.0;
        for (ue, ls) in out.info.link_states.iter().enumerate() {
            let rate = ls.unwrap().rate_bps;
            let demand = out.info.demands_bps[ue];
            total += crate::utility::alpha_fair(rate.min(demand), 0.0);
        }
        assert_eq!(out.reward, total);
        assert_eq!(out.reward, out.info.utility.total);
    }

    #[test]
    fn traffic_draws_match_the_class_mean() {
        let traffic = TrafficModel {
            mode: TrafficMode::Poisson,
            mean_demands_mbps: vec![200.0],
            current_demands_bps: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += sample_traffic(&traffic, &[true], &mut rng)[0] / 1e6;
        }
        let mean = sum / n as f64;
        assert!((198.0..=202.0).contains(&mean), "mean {mean}");
    }

    #[test]
    fn traffic_draws_are_positive_integer_mbps() {
        let traffic = TrafficModel {
            mode: TrafficMode::Poisson,
            mean_demands_mbps: vec![5.0],
            current_demands_bps: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10_000 {
            let d = sample_traffic(&traffic, &[true], &mut rng)[0] / 1e6;
            assert!(d >= 1.0 && d.fract() == 0.0, "draw {d}");
        }
    }

    #[test]
    fn infinite_mode_returns_the_sentinel() {
        let traffic = TrafficModel {
            mode: TrafficMode::Infinite,
            mean_demands_mbps: vec![5.0, 5.0],
            current_demands_bps: vec![],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            sample_traffic(&traffic, &[true, true], &mut rng),
            vec![f64::INFINITY, f64::INFINITY]
        );
    }

    #[test]
    fn dropout_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let base = vec![true; 8];
        // Keep-probability 1: nobody masked.
        assert_eq!(apply_dropout(&base, 1.0, true, &mut rng), base);
        // Keep-probability 0: the guard keeps exactly one UE.
        let mask = apply_dropout(&base, 0.0, true, &mut rng);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
    }

    #[test]
    fn dropout_rate_is_calibrated() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let base = vec![true; 10];
        let episodes = 10_000;
        let mut total = 0usize;
        for _ in 0..episodes {
            total += apply_dropout(&base, 0.5, true, &mut rng)
                .iter()
                .filter(|&&m| m)
                .count();
        }
        let mean = total as f64 / episodes as f64;
        assert!((mean - 5.0).abs() < 0.2, "mean active {mean}");
    }

    #[test]
    fn masked_ue_is_invisible() {
        // Run A: 5 UEs with UE 2 masked. Run B: UE 2 deleted.
        let cfg = desk_config(2, 2);
        let dep_a = Deployment {
            positions: vec![
                Point::new(60.0, 100.0),
                Point::new(80.0, 100.0),
                Point::new(100.0, 100.0),
                Point::new(120.0, 100.0),
                Point::new(140.0, 100.0),
            ],
            timestamp: 0,
        };
        let mut positions_b = dep_a.positions.clone();
        positions_b.remove(2);
        let dep_b = Deployment {
            positions: positions_b,
            timestamp: 0,
        };
        let mut active_a = vec![true; 5];
        active_a[2] = false;

        let (mut env_a, obs_a) =
            Env::reset(&cfg, dep_a, active_a, ChaCha8Rng::seed_from_u64(12)).unwrap();
        let (mut env_b, obs_b) =
            Env::reset(&cfg, dep_b, vec![true; 4], ChaCha8Rng::seed_from_u64(12)).unwrap();

        // Index map: A's UE j corresponds to B's UE (j if j < 2 else j-1).
        let map = [0usize, 1, 3, 4];
        for (b_id, &a_id) in map.iter().enumerate() {
            let oa = obs_a[a_id].as_ref().unwrap();
            let ob = obs_b[b_id].as_ref().unwrap();
            assert_eq!(oa.local, ob.local);
            assert_eq!(oa.global.self_info, ob.global.self_info);
            assert_eq!(oa.global.neighbors, ob.global.neighbors);
        }

        let req_a = vec![Some(1), Some(1), None, Some(2), Some(2)];
        let req_b = vec![Some(1), Some(1), Some(2), Some(2)];
        let mut probs_a = uniform_probs(5, 3);
        probs_a[2] = None;
        let out_a = env_a.step(&req_a, &probs_a).unwrap();
        let out_b = env_b.step(&req_b, &uniform_probs(4, 3)).unwrap();
        assert_eq!(out_a.reward, out_b.reward);
        for (b_id, &a_id) in map.iter().enumerate() {
            assert_eq!(
                out_a.info.link_states[a_id].unwrap().sinr,
                out_b.info.link_states[b_id].unwrap().sinr
            );
            assert_eq!(
                out_a.observations[a_id].as_ref().unwrap().local,
                out_b.observations[b_id].as_ref().unwrap().local
            );
        }
    }
}
