//! Radio layer: received power, fading, antenna patterns, RSS/AoA
//! measurements, SINR with intra- and inter-cell interference, and
//! Shannon achievable rates.
//!
//! mmWave SBSs transmit one directional beam per served UE over the full
//! band; every active beam interferes with every SBS-served victim
//! through an ideal cone pattern (main lobe plus a back-lobe floor). The
//! sub-6 GHz MBS runs on its own carrier, splits its band equally across
//! its UEs and sees no interference.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::geometry::{Deployment, Topology, UeId, MBS_ID};
use crate::utility::{AssociationMatrix, RateEvaluator, Violation};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;

/// Friis singularity guard: propagation distances are clamped below.
pub const MIN_DISTANCE_M: f64 = 1.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1e3).log10()
}

/// Path-loss constant (c / 4 pi f)^2.
pub fn friis_constant(carrier_hz: f64) -> f64 {
    let x = SPEED_OF_LIGHT_M_S / (4.0 * std::f64::consts::PI * carrier_hz);
    x * x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Mbs,
    Sbs,
}

/// Per-tier radio parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadioParams {
    pub tier: Tier,
    pub carrier_hz: f64,
    /// (c / 4 pi f)^2; kept explicit so it can be overridden.
    pub pathloss_const: f64,
    pub bandwidth_hz: f64,
    pub tx_power_w: f64,
    pub noise_psd_w_per_hz: f64,
    pub noise_figure_db: f64,
    /// Log-normal shadowing standard deviation in dB.
    pub shadowing_std_db: f64,
    pub pathloss_exp: f64,
    /// Nakagami shape for power-domain fading; 1 = Rayleigh.
    pub nakagami_m: f64,
    /// Peak transmit gain (linear).
    pub tx_gain_max: f64,
    /// Peak receive gain at the UE (linear).
    pub rx_gain_max: f64,
    /// Transmit cone floor outside the main lobe (linear, SBS only).
    pub backlobe_gain: f64,
    /// Receive cone floor at the UE (linear, SBS only).
    pub rx_backlobe_gain: f64,
    /// Main-lobe width (SBS only).
    pub beamwidth_rad: f64,
    pub aoa_noise_std_rad: f64,
    /// Antenna pattern model; only the ideal cone is implemented.
    pub pattern: String,
}

impl RadioParams {
    pub fn mbs_default() -> Self {
        let carrier = 2.0e9;
        Self {
            tier: Tier::Mbs,
            carrier_hz: carrier,
            pathloss_const: friis_constant(carrier),
            bandwidth_hz: 10.0e6,
            tx_power_w: dbm_to_watts(46.0),
            noise_psd_w_per_hz: dbm_to_watts(-174.0),
            noise_figure_db: 5.0,
            shadowing_std_db: 3.0,
            pathloss_exp: 3.76,
            nakagami_m: 1.0,
            tx_gain_max: db_to_linear(17.0),
            rx_gain_max: 1.0,
            backlobe_gain: db_to_linear(17.0) * 0.01,
            rx_backlobe_gain: 0.01,
            beamwidth_rad: std::f64::consts::PI,
            aoa_noise_std_rad: 2.0f64.to_radians(),
            pattern: "cone".into(),
        }
    }

    pub fn sbs_default() -> Self {
        let carrier = 28.0e9;
        let tx_gain_max = db_to_linear(18.0);
        let rx_gain_max = db_to_linear(10.0);
        Self {
            tier: Tier::Sbs,
            carrier_hz: carrier,
            pathloss_const: friis_constant(carrier),
            bandwidth_hz: 200.0e6,
            tx_power_w: dbm_to_watts(20.0),
            noise_psd_w_per_hz: dbm_to_watts(-174.0),
            noise_figure_db: 0.0,
            shadowing_std_db: 12.0f64.sqrt(),
            pathloss_exp: 2.5,
            nakagami_m: 3.0,
            tx_gain_max,
            rx_gain_max,
            backlobe_gain: tx_gain_max * 0.01,
            rx_backlobe_gain: rx_gain_max * 0.01,
            beamwidth_rad: 12.0f64.to_radians(),
            aoa_noise_std_rad: 2.0f64.to_radians(),
            pattern: "cone".into(),
        }
    }

    pub fn validated(self) -> Result<Self> {
        if self.tx_power_w <= 0.0
            || self.tx_gain_max <= 0.0
            || self.rx_gain_max <= 0.0
            || self.noise_psd_w_per_hz <= 0.0
            || self.bandwidth_hz <= 0.0
            || self.pathloss_const <= 0.0
        {
            return Err(Error::Config("powers, gains and bands must be > 0".into()));
        }
        if self.nakagami_m < 0.5 {
            return Err(Error::Config("nakagami_m must be >= 0.5".into()));
        }
        if self.tier == Tier::Sbs
            && !(self.beamwidth_rad > 0.0 && self.beamwidth_rad < 2.0 * std::f64::consts::PI)
        {
            return Err(Error::Config("beamwidth_rad must be in (0, 2\u{3c0})".into()));
        }
        if self.pattern != "cone" {
            return Err(Error::Config(format!(
                "unsupported antenna pattern '{}'",
                self.pattern
            )));
        }
        Ok(self)
    }

    /// Thermal noise power over `bandwidth_hz`, noise figure included.
    pub fn noise_w(&self, bandwidth_hz: f64) -> f64 {
        self.noise_psd_w_per_hz * bandwidth_hz * db_to_linear(self.noise_figure_db)
    }
}

/// Realized state of one serving link.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinkState {
    pub distance_m: f64,
    pub fading: f64,
    pub shadowing: f64,
    pub rss_w: f64,
    pub aoa_rad: f64,
    pub sinr: f64,
    pub rate_bps: f64,
}

/// Friis received power with fading and shadowing.
pub fn received_power(
    d_m: f64,
    params: &RadioParams,
    fading: f64,
    shadowing: f64,
    tx_gain: f64,
    rx_gain: f64,
) -> f64 {
    let d = d_m.max(MIN_DISTANCE_M);
    fading
        * params.tx_power_w
        * tx_gain
        * rx_gain
        * params.pathloss_const
        * d.powf(-params.pathloss_exp)
        * shadowing
}

/// Power-domain fading draw: Gamma(m, 1/m), so E[h] = 1 and the MBS tier
/// (m = 1) reduces to Rayleigh power fading.
pub fn sample_fading<R: Rng>(params: &RadioParams, rng: &mut R) -> f64 {
    let gamma = Gamma::new(params.nakagami_m, 1.0 / params.nakagami_m)
        .expect("nakagami_m validated >= 0.5");
    gamma.sample(rng)
}

/// Log-normal shadowing multiplier, frozen per link for an episode.
pub fn sample_shadowing<R: Rng>(params: &RadioParams, rng: &mut R) -> f64 {
    if params.shadowing_std_db == 0.0 {
        return 1.0;
    }
    let db: f64 = rng.sample(rand_distr::Normal::new(0.0, params.shadowing_std_db).unwrap());
    db_to_linear(db)
}

/// Wraps an angle to [-pi, pi]. Values already in range pass through
/// unchanged so the inclusive main-lobe boundary stays exact.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..=PI).contains(&a) {
        return a;
    }
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Ideal cone pattern: peak gain inside the main lobe (inclusive
/// boundary), floor outside.
pub fn cone_gain(offset_rad: f64, g_max: f64, floor: f64, beamwidth_rad: f64) -> f64 {
    if wrap_angle(offset_rad).abs() <= beamwidth_rad / 2.0 {
        g_max
    } else {
        floor
    }
}

/// Transmit-side gain at `offset_rad` from boresight. The MBS antenna is
/// treated as omnidirectional at peak gain.
pub fn antenna_gain(offset_rad: f64, params: &RadioParams) -> f64 {
    match params.tier {
        Tier::Mbs => params.tx_gain_max,
        Tier::Sbs => cone_gain(
            offset_rad,
            params.tx_gain_max,
            params.backlobe_gain,
            params.beamwidth_rad,
        ),
    }
}

fn tier_params<'a>(bs: usize, mbs: &'a RadioParams, sbs: &'a RadioParams) -> &'a RadioParams {
    if bs == MBS_ID {
        mbs
    } else {
        sbs
    }
}

/// Per-candidate-BS RSS and AoA measurement for UE `ue`.
///
/// RSS is the received power under aligned (peak) gains with the current
/// fading and shadowing. AoA is the true bearing from the BS to the UE
/// plus the supplied Gaussian error. Vectors are indexed by BS id with
/// zeros outside the candidate set.
#[allow(clippy::too_many_arguments)]
pub fn measure(
    ue: UeId,
    deployment: &Deployment,
    topology: &Topology,
    mbs: &RadioParams,
    sbs: &RadioParams,
    fading_row: &[f64],
    shadowing_row: &[f64],
    aoa_noise_row: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n_bs = topology.bs_positions.len();
    let mut rss = vec![0.0; n_bs];
    let mut aoa = vec![0.0; n_bs];
    let ue_pos = &deployment.positions[ue];
    for &bs in &topology.candidate_sets[ue] {
        let params = tier_params(bs, mbs, sbs);
        let bs_pos = &topology.bs_positions[bs];
        rss[bs] = received_power(
            ue_pos.distance(bs_pos),
            params,
            fading_row[bs],
            shadowing_row[bs],
            params.tx_gain_max,
            params.rx_gain_max,
        );
        aoa[bs] = bs_pos.bearing_to(ue_pos) + aoa_noise_row[bs];
    }
    (rss, aoa)
}

/// Interference-free SNR per (UE, candidate BS) under peak gains and the
/// full tier band; zeros outside the candidate sets. `fading = None`
/// evaluates at the expected fading h = 1.
pub fn snr_matrix(
    deployment: &Deployment,
    topology: &Topology,
    mbs: &RadioParams,
    sbs: &RadioParams,
    shadowing: &[Vec<f64>],
    fading: Option<&[Vec<f64>]>,
    active: &[bool],
) -> Vec<Vec<f64>> {
    let n_bs = topology.bs_positions.len();
    let mut out = vec![vec![0.0; n_bs]; deployment.n_ues()];
    for ue in 0..deployment.n_ues() {
        if !active[ue] {
            continue;
        }
        for &bs in &topology.candidate_sets[ue] {
            let params = tier_params(bs, mbs, sbs);
            let h = fading.map_or(1.0, |f| f[ue][bs]);
            let signal = received_power(
                deployment.positions[ue].distance(&topology.bs_positions[bs]),
                params,
                h,
                shadowing[ue][bs],
                params.tx_gain_max,
                params.rx_gain_max,
            );
            out[ue][bs] = signal / params.noise_w(params.bandwidth_hz);
        }
    }
    out
}

pub fn shannon_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * (1.0 + sinr).log2()
}

/// Per-pair link quantities frozen for one step: received-power base
/// (everything except the antenna gains) plus BS-to-UE bearings.
/// Association-dependent evaluation over a fixed step then reduces to
/// gain lookups, which keeps the greedy baselines cheap.
#[derive(Debug, Clone)]
pub struct LinkBudget {
    /// base\[ue\]\[bs\] = h * P_tx * C * d^-eta * shadowing.
    base: Vec<Vec<f64>>,
    /// bearing\[bs\]\[ue\] from the BS toward the UE.
    bearing: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
    fading: Vec<Vec<f64>>,
    shadowing: Vec<Vec<f64>>,
    active: Vec<bool>,
}

impl LinkBudget {
    pub fn new(
        deployment: &Deployment,
        topology: &Topology,
        mbs: &RadioParams,
        sbs: &RadioParams,
        fading: &[Vec<f64>],
        shadowing: &[Vec<f64>],
        active: &[bool],
    ) -> Self {
        let k = deployment.n_ues();
        let n_bs = topology.bs_positions.len();
        let mut base = vec![vec![0.0; n_bs]; k];
        let mut bearing = vec![vec![0.0; k]; n_bs];
        let mut dist = vec![vec![0.0; n_bs]; k];
        for ue in 0..k {
            let ue_pos = &deployment.positions[ue];
            for bs in 0..n_bs {
                let bs_pos = &topology.bs_positions[bs];
                let d = ue_pos.distance(bs_pos).max(MIN_DISTANCE_M);
                dist[ue][bs] = d;
                bearing[bs][ue] = bs_pos.bearing_to(ue_pos);
                if !active[ue] {
                    continue;
                }
                let params = tier_params(bs, mbs, sbs);
                base[ue][bs] = fading[ue][bs]
                    * params.tx_power_w
                    * params.pathloss_const
                    * d.powf(-params.pathloss_exp)
                    * shadowing[ue][bs];
            }
        }
        Self {
            base,
            bearing,
            dist,
            fading: fading.to_vec(),
            shadowing: shadowing.to_vec(),
            active: active.to_vec(),
        }
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    pub fn n_ues(&self) -> usize {
        self.base.len()
    }
}

/// Realized link states for every active UE under `assoc`.
///
/// SBS-served UEs get the full band and see every other active beam as
/// an interferer through the cone patterns on both ends; MBS-served UEs
/// split the MBS band equally and see no interference.
pub fn sinr_and_rates_from_budget(
    assoc: &AssociationMatrix,
    budget: &LinkBudget,
    mbs: &RadioParams,
    sbs: &RadioParams,
) -> Result<Vec<Option<LinkState>>> {
    let k = budget.n_ues();
    let active = &budget.active;
    if (0..k).all(|j| !active[j]) {
        return Err(Error::Config("empty association: no active UE".into()));
    }
    for ue in 0..k {
        if active[ue] && assoc.serving_of(ue).is_none() {
            return Err(Error::Infeasible(Violation::Unassigned { ue }));
        }
    }

    // Every (SBS, served UE) pair is an active beam.
    let beams: Vec<(usize, UeId)> = assoc
        .pairs()
        .filter(|&(bs, ue)| bs != MBS_ID && active[ue])
        .collect();
    let mbs_load = assoc
        .pairs()
        .filter(|&(bs, ue)| bs == MBS_ID && active[ue])
        .count();
    let sbs_noise = sbs.noise_w(sbs.bandwidth_hz);

    let mut out = Vec::with_capacity(k);
    for ue in 0..k {
        if !active[ue] {
            out.push(None);
            continue;
        }
        let bs = assoc.serving_of(ue).unwrap();
        let state = if bs == MBS_ID {
            let band = mbs.bandwidth_hz / mbs_load as f64;
            let signal = budget.base[ue][bs] * mbs.tx_gain_max * mbs.rx_gain_max;
            let sinr = signal / mbs.noise_w(band);
            LinkState {
                distance_m: budget.dist[ue][bs],
                fading: budget.fading[ue][bs],
                shadowing: budget.shadowing[ue][bs],
                rss_w: signal,
                aoa_rad: budget.bearing[bs][ue],
                sinr,
                rate_bps: shannon_rate(band, sinr),
            }
        } else {
            let signal = budget.base[ue][bs] * sbs.tx_gain_max * sbs.rx_gain_max;
            let mut interference = 0.0;
            for &(ibs, iue) in &beams {
                if iue == ue {
                    continue;
                }
                // Interferer-beam offset toward the victim, and the
                // victim-beam offset toward the interferer. The victim's
                // receive beam points at its serving BS.
                let phi = wrap_angle(budget.bearing[ibs][iue] - budget.bearing[ibs][ue]);
                let psi = wrap_angle(budget.bearing[bs][ue] - budget.bearing[ibs][ue]);
                let gt = cone_gain(phi, sbs.tx_gain_max, sbs.backlobe_gain, sbs.beamwidth_rad);
                let gr = cone_gain(
                    psi,
                    sbs.rx_gain_max,
                    sbs.rx_backlobe_gain,
                    sbs.beamwidth_rad,
                );
                interference += budget.base[ue][ibs] * gt * gr;
            }
            let sinr = signal / (interference + sbs_noise);
            LinkState {
                distance_m: budget.dist[ue][bs],
                fading: budget.fading[ue][bs],
                shadowing: budget.shadowing[ue][bs],
                rss_w: signal,
                aoa_rad: budget.bearing[bs][ue],
                sinr,
                rate_bps: shannon_rate(sbs.bandwidth_hz, sinr),
            }
        };
        out.push(Some(state));
    }
    Ok(out)
}

/// Convenience wrapper building the link budget on the fly.
#[allow(clippy::too_many_arguments)]
pub fn compute_sinr_and_rates(
    assoc: &AssociationMatrix,
    deployment: &Deployment,
    topology: &Topology,
    mbs: &RadioParams,
    sbs: &RadioParams,
    fading: &[Vec<f64>],
    shadowing: &[Vec<f64>],
    active: &[bool],
) -> Result<Vec<Option<LinkState>>> {
    let budget = LinkBudget::new(deployment, topology, mbs, sbs, fading, shadowing, active);
    sinr_and_rates_from_budget(assoc, &budget, mbs, sbs)
}

/// All-ones matrix sized for (UE, BS) pairs; the expected fading and the
/// no-shadowing baseline.
pub fn unit_matrix(n_ues: usize, n_bs: usize) -> Vec<Vec<f64>> {
    vec![vec![1.0; n_bs]; n_ues]
}

/// Rate evaluator backed by the full interference model, with frozen
/// fading and shadowing draws.
pub struct ChannelRateEvaluator<'a> {
    budget: LinkBudget,
    mbs: &'a RadioParams,
    sbs: &'a RadioParams,
}

impl<'a> ChannelRateEvaluator<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        deployment: &Deployment,
        topology: &Topology,
        mbs: &'a RadioParams,
        sbs: &'a RadioParams,
        fading: &[Vec<f64>],
        shadowing: &[Vec<f64>],
        active: &[bool],
    ) -> Self {
        Self {
            budget: LinkBudget::new(deployment, topology, mbs, sbs, fading, shadowing, active),
            mbs,
            sbs,
        }
    }

    pub fn link_states(&self, assoc: &AssociationMatrix) -> Result<Vec<Option<LinkState>>> {
        sinr_and_rates_from_budget(assoc, &self.budget, self.mbs, self.sbs)
    }
}

impl RateEvaluator for ChannelRateEvaluator<'_> {
    fn rates(&self, assoc: &AssociationMatrix) -> Vec<f64> {
        self.link_states(assoc)
            .expect("rate evaluator requires a feasible association")
            .into_iter()
            .map(|ls| ls.map_or(0.0, |l| l.rate_bps))
            .collect()
    }
}
