//! Shared association policy network.
//!
//! One parameter set serves every UE: a local encoder over the
//! fixed-size measurement vector, key/query/value encoders over 3-entry
//! neighbor descriptors, a scaled dot-product attention aggregate over
//! the (variable-size) neighborhood, a combiner, and actor/critic heads.
//! Nothing in the architecture depends on the number of UEs, which is
//! what makes a trained checkpoint transferable across deployment sizes.

use ndarray::Array1;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel;
use crate::config::SimConfig;
use crate::env::{LocalObservation, NeighborInfo, UeObservation};
use crate::geometry::BsId;
use crate::nn::{
    load_checkpoint, save_checkpoint, softmax, CheckpointMeta, GradStore, Mlp, MlpTape,
    ParameterStore,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    /// Encoding width n.
    pub n: usize,
    /// Swap the attention convention: by default the neighbor supplies
    /// the query and the UE itself the key; swapping uses a self-query
    /// against neighbor keys (ablation knob).
    pub swap_query_key: bool,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            n: 128,
            swap_query_key: false,
        }
    }
}

impl PolicyConfig {
    pub fn validated(self) -> Result<Self> {
        if self.n < 1 {
            return Err(Error::Config("policy.n must be >= 1".into()));
        }
        Ok(self)
    }
}

/// Input normalization context.
#[derive(Debug, Clone, Copy)]
pub struct ObsNorm {
    pub region_w: f64,
    pub region_h: f64,
    pub n_bs: usize,
}

impl ObsNorm {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            region_w: cfg.network.region.width_m,
            region_h: cfg.network.region.height_m,
            n_bs: cfg.network.n_bs(),
        }
    }
}

fn rate_feature(bps: f64) -> f64 {
    ((1.0 + bps).log10() / 10.0).clamp(-2.0, 2.0)
}

fn utility_feature(x: f64) -> f64 {
    (x.signum() * (1.0 + x.abs()).log10() / 10.0).clamp(-2.0, 2.0)
}

fn rss_feature(watts: f64) -> f64 {
    if watts > 0.0 {
        channel::watts_to_dbm(watts) / 100.0
    } else {
        0.0
    }
}

/// Fixed-size flattening of the local observation; length is
/// 4 + 2 * n_bs regardless of the number of UEs.
pub fn local_features(obs: &LocalObservation, norm: &ObsNorm) -> Vec<f64> {
    let mut x = Vec::with_capacity(4 + 2 * norm.n_bs);
    x.push(obs.prev_action as f64 / norm.n_bs as f64);
    x.push(rate_feature(obs.prev_rate_bps));
    x.push(utility_feature(obs.prev_network_utility));
    x.push(obs.ack as f64);
    x.extend(obs.rss_w.iter().map(|&w| rss_feature(w)));
    x.extend(
        obs.aoa_rad
            .iter()
            .map(|&a| channel::wrap_angle(a) / std::f64::consts::PI),
    );
    x
}

/// Normalized 3-entry neighbor descriptor (position, previous rate).
pub fn descriptor_features(info: &NeighborInfo, norm: &ObsNorm) -> Array1<f64> {
    Array1::from_vec(vec![
        info.x_m / norm.region_w,
        info.y_m / norm.region_h,
        rate_feature(info.prev_rate_bps),
    ])
}

/// Association probability vector over all BS ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationDistribution {
    pub probs: Vec<f64>,
}

impl AssociationDistribution {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> BsId {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.ln())
            .sum::<f64>()
    }
}

/// Output of one policy evaluation.
#[derive(Debug, Clone)]
pub struct PolicyOut {
    pub dist: AssociationDistribution,
    pub logits: Vec<f64>,
    pub value: f64,
}

/// Cached intermediates of one traced forward pass; consumed by
/// `PolicyNetwork::backward`.
pub struct PolicyTape {
    f_tape: MlpTape,
    attention: Option<AttentionTape>,
    h_tape: MlpTape,
    actor_tape: MlpTape,
    critic_tape: MlpTape,
}

struct AttentionTape {
    self_tape: MlpTape,
    self_vec: Array1<f64>,
    neighbor_tapes: Vec<MlpTape>,
    neighbor_vecs: Vec<Array1<f64>>,
    value_tapes: Vec<MlpTape>,
    values: Vec<Array1<f64>>,
    alphas: Vec<f64>,
}

/// The shared policy: parameter store plus architecture metadata.
pub struct PolicyNetwork {
    store: ParameterStore,
    n: usize,
    n_actions: usize,
    local_dim: usize,
    swap_query_key: bool,
    norm: ObsNorm,
    idx: Indices,
}

#[derive(Debug, Clone, Copy)]
struct Indices {
    f: usize,
    gk: usize,
    gq: usize,
    gv: usize,
    h: usize,
    actor: usize,
    critic: usize,
}

impl PolicyNetwork {
    /// Fresh network for the config's cell layout.
    pub fn init<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Self {
        let n = cfg.policy.n;
        let norm = ObsNorm::from_config(cfg);
        let n_actions = norm.n_bs;
        let local_dim = 4 + 2 * norm.n_bs;
        let store = ParameterStore::new(vec![
            ("f".into(), Mlp::new(&[local_dim, n, n], rng)),
            ("gk".into(), Mlp::new(&[3, n, n], rng)),
            ("gq".into(), Mlp::new(&[3, n, n], rng)),
            ("gv".into(), Mlp::new(&[3, n, n], rng)),
            ("h".into(), Mlp::new(&[2 * n, n, n], rng)),
            ("actor".into(), Mlp::new(&[n, 2 * n, n_actions], rng)),
            ("critic".into(), Mlp::new(&[n, 2 * n, 1], rng)),
        ]);
        Self::from_store(store, cfg.policy.swap_query_key, norm)
    }

    pub fn from_store(store: ParameterStore, swap_query_key: bool, norm: ObsNorm) -> Self {
        let idx = Indices {
            f: store.index_of("f"),
            gk: store.index_of("gk"),
            gq: store.index_of("gq"),
            gv: store.index_of("gv"),
            h: store.index_of("h"),
            actor: store.index_of("actor"),
            critic: store.index_of("critic"),
        };
        let n = store.mlp("f").out_dim();
        let n_actions = store.mlp("actor").out_dim();
        let local_dim = store.mlp("f").in_dim();
        Self {
            store,
            n,
            n_actions,
            local_dim,
            swap_query_key,
            norm,
            idx,
        }
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn norm(&self) -> &ObsNorm {
        &self.norm
    }

    /// u_j = f(flattened local observation).
    pub fn encode_local(&self, obs: &LocalObservation) -> Result<Array1<f64>> {
        let x = Array1::from_vec(local_features(obs, &self.norm));
        self.store.mlp("f").forward(&x)
    }

    /// Attention weights of a neighborhood: softmax of scaled dot
    /// products between each neighbor's query and the UE's own key
    /// (roles swap under the ablation flag).
    pub fn attention_scores(
        &self,
        self_info: &NeighborInfo,
        neighbors: &[NeighborInfo],
    ) -> Vec<f64> {
        assert!(!neighbors.is_empty(), "scores need a nonempty neighborhood");
        let (self_enc, nb_enc) = if self.swap_query_key {
            ("gq", "gk")
        } else {
            ("gk", "gq")
        };
        let self_vec = self
            .store
            .mlp(self_enc)
            .forward(&descriptor_features(self_info, &self.norm))
            .expect("descriptor is 3-dimensional");
        let scale = 1.0 / (self.n as f64).sqrt();
        let scores: Vec<f64> = neighbors
            .iter()
            .map(|nb| {
                let q = self
                    .store
                    .mlp(nb_enc)
                    .forward(&descriptor_features(nb, &self.norm))
                    .expect("descriptor is 3-dimensional");
                q.dot(&self_vec) * scale
            })
            .collect();
        softmax(&scores)
    }

    /// v_j = sum_k alpha_k nu_k; the zero vector for an empty
    /// neighborhood.
    pub fn attention_aggregate(&self, weights: &[f64], values: &[Array1<f64>]) -> Array1<f64> {
        assert_eq!(weights.len(), values.len());
        let mut v = Array1::zeros(self.n);
        for (w, val) in weights.iter().zip(values) {
            v.scaled_add(*w, val);
        }
        v
    }

    /// Neighbor value vectors nu_k = g_v(descriptor).
    pub fn neighbor_values(&self, neighbors: &[NeighborInfo]) -> Vec<Array1<f64>> {
        neighbors
            .iter()
            .map(|nb| {
                self.store
                    .mlp("gv")
                    .forward(&descriptor_features(nb, &self.norm))
                    .expect("descriptor is 3-dimensional")
            })
            .collect()
    }

    /// c_j = h(u_j concatenated with v_j).
    pub fn combine_context(&self, u: &Array1<f64>, v: &Array1<f64>) -> Result<Array1<f64>> {
        let mut z = Array1::zeros(2 * self.n);
        z.slice_mut(ndarray::s![..self.n]).assign(u);
        z.slice_mut(ndarray::s![self.n..]).assign(v);
        self.store.mlp("h").forward(&z)
    }

    /// Softmax over the actor logits for every BS; no candidate masking
    /// (the environment redirects unauthorized requests).
    pub fn action_distribution(&self, context: &Array1<f64>) -> Result<AssociationDistribution> {
        let logits = self.store.mlp("actor").forward(context)?;
        Ok(AssociationDistribution {
            probs: softmax(logits.as_slice().unwrap()),
        })
    }

    /// Critic state-value estimate for a context vector.
    pub fn value(&self, context: &Array1<f64>) -> Result<f64> {
        Ok(self.store.mlp("critic").forward(context)?[0])
    }

    /// Full evaluation of one UE observation.
    pub fn forward(&self, obs: &UeObservation) -> Result<PolicyOut> {
        let u = self.encode_local(&obs.local)?;
        let v = if obs.global.neighbors.is_empty() {
            Array1::zeros(self.n)
        } else {
            let weights = self.attention_scores(&obs.global.self_info, &obs.global.neighbors);
            let values = self.neighbor_values(&obs.global.neighbors);
            self.attention_aggregate(&weights, &values)
        };
        let c = self.combine_context(&u, &v)?;
        let logits = self.store.mlp("actor").forward(&c)?;
        let value = self.store.mlp("critic").forward(&c)?[0];
        Ok(PolicyOut {
            dist: AssociationDistribution {
                probs: softmax(logits.as_slice().unwrap()),
            },
            logits: logits.to_vec(),
            value,
        })
    }

    /// Like `forward` but caches every intermediate for `backward`.
    pub fn forward_traced(&self, obs: &UeObservation) -> Result<(PolicyOut, PolicyTape)> {
        let x = Array1::from_vec(local_features(&obs.local, &self.norm));
        let (u, f_tape) = self.store.entries()[self.idx.f].1.forward_traced(x)?;

        let (v, attention) = if obs.global.neighbors.is_empty() {
            (Array1::zeros(self.n), None)
        } else {
            let (self_idx, nb_idx) = if self.swap_query_key {
                (self.idx.gq, self.idx.gk)
            } else {
                (self.idx.gk, self.idx.gq)
            };
            let self_desc = descriptor_features(&obs.global.self_info, &self.norm);
            let (self_vec, self_tape) =
                self.store.entries()[self_idx].1.forward_traced(self_desc)?;
            let scale = 1.0 / (self.n as f64).sqrt();
            let mut neighbor_tapes = Vec::new();
            let mut neighbor_vecs = Vec::new();
            let mut value_tapes = Vec::new();
            let mut values = Vec::new();
            let mut scores = Vec::new();
            for nb in &obs.global.neighbors {
                let desc = descriptor_features(nb, &self.norm);
                let (q, qt) = self.store.entries()[nb_idx].1.forward_traced(desc.clone())?;
                let (val, vt) = self.store.entries()[self.idx.gv].1.forward_traced(desc)?;
                scores.push(q.dot(&self_vec) * scale);
                neighbor_vecs.push(q);
                neighbor_tapes.push(qt);
                values.push(val);
                value_tapes.push(vt);
            }
            let alphas = softmax(&scores);
            let mut v = Array1::zeros(self.n);
            for (a, val) in alphas.iter().zip(&values) {
                v.scaled_add(*a, val);
            }
            (
                v,
                Some(AttentionTape {
                    self_tape,
                    self_vec,
                    neighbor_tapes,
                    neighbor_vecs,
                    value_tapes,
                    values,
                    alphas,
                }),
            )
        };

        let mut z = Array1::zeros(2 * self.n);
        z.slice_mut(ndarray::s![..self.n]).assign(&u);
        z.slice_mut(ndarray::s![self.n..]).assign(&v);
        let (c, h_tape) = self.store.entries()[self.idx.h].1.forward_traced(z)?;
        let (logits, actor_tape) =
            self.store.entries()[self.idx.actor].1.forward_traced(c.clone())?;
        let (value_out, critic_tape) = self.store.entries()[self.idx.critic].1.forward_traced(c)?;

        let out = PolicyOut {
            dist: AssociationDistribution {
                probs: softmax(logits.as_slice().unwrap()),
            },
            logits: logits.to_vec(),
            value: value_out[0],
        };
        let tape = PolicyTape {
            f_tape,
            attention,
            h_tape,
            actor_tape,
            critic_tape,
        };
        Ok((out, tape))
    }

    /// Exact reverse pass from logits/value gradients into `grads`,
    /// consuming the tape.
    pub fn backward(
        &self,
        tape: PolicyTape,
        dlogits: &[f64],
        dvalue: f64,
        grads: &mut GradStore,
    ) {
        let entries = self.store.entries();
        let dlogits = Array1::from_vec(dlogits.to_vec());
        let dc_actor =
            entries[self.idx.actor]
                .1
                .backward(tape.actor_tape, &dlogits, &mut grads.grads[self.idx.actor]);
        let dc_critic = entries[self.idx.critic].1.backward(
            tape.critic_tape,
            &Array1::from_vec(vec![dvalue]),
            &mut grads.grads[self.idx.critic],
        );
        let dc = dc_actor + dc_critic;
        let dz = entries[self.idx.h]
            .1
            .backward(tape.h_tape, &dc, &mut grads.grads[self.idx.h]);
        let du = dz.slice(ndarray::s![..self.n]).to_owned();
        let dv = dz.slice(ndarray::s![self.n..]).to_owned();

        if let Some(att) = tape.attention {
            let (self_idx, nb_idx) = if self.swap_query_key {
                (self.idx.gq, self.idx.gk)
            } else {
                (self.idx.gk, self.idx.gq)
            };
            let scale = 1.0 / (self.n as f64).sqrt();

            // d alpha_k = nu_k . dv, then back through the softmax.
            let dalpha: Vec<f64> = att.values.iter().map(|val| val.dot(&dv)).collect();
            let weighted: f64 = att
                .alphas
                .iter()
                .zip(&dalpha)
                .map(|(a, d)| a * d)
                .sum();
            let dscores: Vec<f64> = att
                .alphas
                .iter()
                .zip(&dalpha)
                .map(|(a, d)| a * (d - weighted))
                .collect();

            let mut dself = Array1::zeros(self.n);
            for (((qt, q), vt), (ds, a)) in att
                .neighbor_tapes
                .into_iter()
                .zip(&att.neighbor_vecs)
                .zip(att.value_tapes)
                .zip(dscores.iter().zip(&att.alphas))
            {
                // d nu_k = alpha_k dv ; d q_k = ds_k * self_vec * scale
                let dval = &dv * *a;
                entries[self.idx.gv]
                    .1
                    .backward(vt, &dval, &mut grads.grads[self.idx.gv]);
                let dq = &att.self_vec * (*ds * scale);
                entries[nb_idx].1.backward(qt, &dq, &mut grads.grads[nb_idx]);
                dself.scaled_add(*ds * scale, q);
            }
            entries[self_idx]
                .1
                .backward(att.self_tape, &dself, &mut grads.grads[self_idx]);
        }

        entries[self.idx.f]
            .1
            .backward(tape.f_tape, &du, &mut grads.grads[self.idx.f]);
    }

    /// Writes the parameters plus the full config needed to rebuild the
    /// network.
    pub fn save(
        &self,
        path: &std::path::Path,
        cfg: &SimConfig,
        seed_lineage: Vec<u64>,
        manifest_hash: Option<String>,
    ) -> Result<CheckpointMeta> {
        let hyper = serde_json::json!({ "config": cfg });
        save_checkpoint(path, &self.store, hyper, seed_lineage, manifest_hash)
    }

    /// Rebuilds a policy from a checkpoint; the embedded config supplies
    /// the normalization context and attention convention.
    pub fn load(path: &std::path::Path) -> Result<(Self, SimConfig, CheckpointMeta)> {
        let (store, meta) = load_checkpoint(path)?;
        let cfg: SimConfig = serde_json::from_value(
            meta.hyper
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("checkpoint lacks embedded config".into()))?,
        )
        .map_err(|e| Error::Checkpoint(format!("embedded config decode: {e}")))?;
        let norm = ObsNorm::from_config(&cfg);
        let policy = Self::from_store(store, cfg.policy.swap_query_key, norm);
        if policy.n != cfg.policy.n {
            return Err(Error::Checkpoint(format!(
                "architecture width {} disagrees with embedded config {}",
                policy.n, cfg.policy.n
            )));
        }
        Ok((policy, cfg, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_config(n: usize) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.policy.n = n;
        cfg.validated().unwrap()
    }

    fn policy(n: usize, seed: u64) -> PolicyNetwork {
        PolicyNetwork::init(&test_config(n), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn local_obs(n_bs: usize) -> LocalObservation {
        LocalObservation {
            prev_action: 1,
            prev_rate_bps: 12.5e6,
            prev_network_utility: 80.0e6,
            ack: 1,
            rss_w: vec![1e-9; n_bs],
            aoa_rad: vec![0.3; n_bs],
        }
    }

    fn nb(x: f64, y: f64, r: f64) -> NeighborInfo {
        NeighborInfo {
            x_m: x,
            y_m: y,
            prev_rate_bps: r,
        }
    }

    fn obs_with_neighbors(neighbors: Vec<NeighborInfo>) -> UeObservation {
        UeObservation {
            local: local_obs(4),
            global: crate::env::GlobalObservation {
                self_info: nb(100.0, 100.0, 5e6),
                neighbors,
            },
        }
    }

    #[test]
    fn identical_observations_encode_identically() {
        let p = policy(16, 1);
        let o = local_obs(4);
        assert_eq!(p.encode_local(&o).unwrap(), p.encode_local(&o).unwrap());
        assert_eq!(p.encode_local(&o).unwrap().len(), 16);
    }

    #[test]
    fn zero_network_gives_zero_encoding_and_value() {
        let mut p = policy(8, 2);
        let zeros: Vec<f64> = vec![0.0; p.store.param_count()];
        p.store_mut().set_from_flat(&zeros);
        let o = local_obs(4);
        assert!(p.encode_local(&o).unwrap().iter().all(|v| *v == 0.0));
        let c = Array1::zeros(8);
        assert_eq!(p.value(&c).unwrap(), 0.0);
        let ctx = p
            .combine_context(&Array1::zeros(8), &Array1::zeros(8))
            .unwrap();
        assert!(ctx.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn singleton_neighborhood_gets_weight_one() {
        let p = policy(16, 3);
        let w = p.attention_scores(&nb(100.0, 100.0, 1e6), &[nb(90.0, 80.0, 2e6)]);
        assert_eq!(w, vec![1.0]);
        let values = p.neighbor_values(&[nb(90.0, 80.0, 2e6)]);
        let v = p.attention_aggregate(&w, &values);
        assert_eq!(v, values[0]);
    }

    #[test]
    fn duplicated_neighbors_share_weight() {
        let p = policy(16, 4);
        let twin = nb(120.0, 60.0, 3e6);
        let w = p.attention_scores(&nb(100.0, 100.0, 1e6), &[twin, twin]);
        assert!((w[0] - 0.5).abs() < 1e-15);
        assert!((w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn permuting_the_neighborhood_permutes_weights() {
        let p = policy(16, 5);
        let a = nb(10.0, 20.0, 1e6);
        let b = nb(150.0, 90.0, 9e6);
        let c = nb(60.0, 170.0, 2e5);
        let me = nb(100.0, 100.0, 4e6);
        let w1 = p.attention_scores(&me, &[a, b, c]);
        let w2 = p.attention_scores(&me, &[c, a, b]);
        assert!((w1[0] - w2[1]).abs() < 1e-15);
        assert!((w1[1] - w2[2]).abs() < 1e-15);
        assert!((w1[2] - w2[0]).abs() < 1e-15);
    }

    #[test]
    fn aggregate_of_equal_values_ignores_weights() {
        let p = policy(8, 6);
        let val = Array1::from_vec((0..8).map(|i| i as f64).collect());
        let v = p.attention_aggregate(&[0.2, 0.5, 0.3], &[val.clone(), val.clone(), val.clone()]);
        for (x, y) in v.iter().zip(val.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn full_forward_is_permutation_invariant() {
        let p = policy(32, 7);
        let neighbors = vec![
            nb(10.0, 20.0, 1e6),
            nb(150.0, 90.0, 9e6),
            nb(60.0, 170.0, 2e5),
            nb(44.0, 12.0, 7e7),
        ];
        let mut permuted = neighbors.clone();
        permuted.rotate_left(2);
        permuted.swap(0, 1);
        let a = p.forward(&obs_with_neighbors(neighbors)).unwrap();
        let b = p.forward(&obs_with_neighbors(permuted)).unwrap();
        for (x, y) in a.dist.probs.iter().zip(&b.dist.probs) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn empty_neighborhood_falls_back_to_zero_aggregate() {
        let p = policy(16, 8);
        let out = p.forward(&obs_with_neighbors(vec![])).unwrap();
        assert_eq!(out.dist.probs.len(), 4);
        assert!((out.dist.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn size_transfer_across_neighborhoods() {
        let p = policy(16, 9);
        for k in [1usize, 2, 8, 31, 64] {
            let neighbors: Vec<NeighborInfo> = (0..k.saturating_sub(1))
                .map(|i| nb(3.0 * i as f64, 2.0 * i as f64, 1e6 * i as f64))
                .collect();
            let out = p.forward(&obs_with_neighbors(neighbors)).unwrap();
            assert_eq!(out.dist.probs.len(), 4);
            assert!(out.value.is_finite());
        }
    }

    #[test]
    fn shared_parameters_mean_shared_outputs() {
        let p = policy(16, 10);
        let o = obs_with_neighbors(vec![nb(1.0, 2.0, 3.0)]);
        let a = p.forward(&o).unwrap();
        let b = p.forward(&o).unwrap();
        assert_eq!(a.dist.probs, b.dist.probs);
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn equal_logits_give_uniform_distribution() {
        let mut p = policy(8, 11);
        let zeros: Vec<f64> = vec![0.0; p.store.param_count()];
        p.store_mut().set_from_flat(&zeros);
        let out = p.forward(&obs_with_neighbors(vec![nb(5.0, 5.0, 1e6)])).unwrap();
        for prob in &out.dist.probs {
            assert!((prob - 0.25).abs() < 1e-15);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            assert!(out.dist.sample(&mut rng) < 4);
        }
    }

    #[test]
    fn attention_convention_follows_the_swap_flag() {
        // Hand-built n = 1 encoders with an asymmetry the convention
        // exposes: gk(d) = 2*sum(d) + 1, gq(d) = 3*sum(d). Per-MLP flat
        // layout: w1 (1x3), b1, w2 (1x1), b2.
        let cfg = test_config(1);
        let mut p = PolicyNetwork::init(&cfg, &mut ChaCha8Rng::seed_from_u64(12));
        let mut flat = vec![0.0; p.store.param_count()];
        let gk_off = param_offset(&p, "gk");
        let gq_off = param_offset(&p, "gq");
        for i in 0..3 {
            flat[gk_off + i] = 2.0;
            flat[gq_off + i] = 3.0;
        }
        flat[gk_off + 4] = 1.0; // gk w2
        flat[gk_off + 5] = 1.0; // gk b2
        flat[gq_off + 4] = 1.0; // gq w2
        p.store_mut().set_from_flat(&flat);

        // Descriptor feature sums: self 0.5, neighbors 1.0 and 0.2.
        let me = nb(100.0, 0.0, 0.0);
        let neighbors = [nb(200.0, 0.0, 0.0), nb(40.0, 0.0, 0.0)];
        let w_default = p.attention_scores(&me, &neighbors);

        let mut cfg_swap = test_config(1);
        cfg_swap.policy.swap_query_key = true;
        let mut p_swap = PolicyNetwork::init(&cfg_swap, &mut ChaCha8Rng::seed_from_u64(12));
        p_swap.store_mut().set_from_flat(&flat);
        let w_swapped = p_swap.attention_scores(&me, &neighbors);

        // Default: neighbor query against the self key,
        // score_k = gq(s_k) * gk(0.5) = 3 s_k * 2.
        let expect = softmax(&[6.0, 1.2]);
        // Swapped: self query against neighbor keys,
        // score_k = gk(s_k) * gq(0.5) = (2 s_k + 1) * 1.5.
        let expect_swap = softmax(&[4.5, 2.1]);
        for (w, e) in w_default.iter().zip(&expect) {
            assert!((w - e).abs() < 1e-12, "{w_default:?} vs {expect:?}");
        }
        for (w, e) in w_swapped.iter().zip(&expect_swap) {
            assert!((w - e).abs() < 1e-12, "{w_swapped:?} vs {expect_swap:?}");
        }
        assert!((w_default[0] - w_swapped[0]).abs() > 1e-3);
    }

    fn param_offset(p: &PolicyNetwork, name: &str) -> usize {
        let mut off = 0;
        for (n, mlp) in p.store().entries() {
            if n == name {
                return off;
            }
            off += mlp.param_count();
        }
        panic!("no mlp {name}");
    }

    #[test]
    fn checkpoint_roundtrip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.ckpt");
        let cfg = test_config(16);
        let p = PolicyNetwork::init(&cfg, &mut ChaCha8Rng::seed_from_u64(13));
        p.save(&path, &cfg, vec![13], None).unwrap();
        let (loaded, cfg2, _) = PolicyNetwork::load(&path).unwrap();
        assert_eq!(cfg2.policy.n, 16);
        let o = obs_with_neighbors(vec![nb(9.0, 9.0, 1e6)]);
        assert_eq!(
            p.forward(&o).unwrap().dist.probs,
            loaded.forward(&o).unwrap().dist.probs
        );
    }
}
