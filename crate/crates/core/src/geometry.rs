//! Network geometry: deployment sampling, base-station placement,
//! candidate-BS sets and k-nearest-neighbor sets.
//!
//! BS ids are `0..=n_sbs` with id 0 reserved for the macro cell (MBS).
//! UE ids are dense `0..k` indices into `Deployment::positions`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type UeId = usize;
pub type BsId = usize;

/// The macro base station always carries id 0.
pub const MBS_ID: BsId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Bearing of `other` as seen from `self`, in radians; due east is 0.
    pub fn bearing_to(&self, other: &Point) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Axis-aligned rectangle with origin (0, 0) containing all UEs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Region {
    pub width_m: f64,
    pub height_m: f64,
}

impl Region {
    pub fn center(&self) -> Point {
        Point::new(self.width_m / 2.0, self.height_m / 2.0)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= 0.0 && p.x <= self.width_m && p.y >= 0.0 && p.y <= self.height_m
    }
}

/// Static description of the cell layout and per-SBS beam budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of small base stations.
    pub n_sbs: usize,
    /// SBS coverage range R0 in meters.
    pub coverage_radius_m: f64,
    /// SBS lattice pitch in meters.
    pub inter_cell_distance_m: f64,
    pub region: Region,
    /// Max simultaneous UEs per SBS (indexed by SBS id - 1). A single
    /// entry is broadcast to all SBSs by `validated`.
    #[serde(default)]
    pub beam_budget: Vec<usize>,
    /// Max neighborhood size for the global observation.
    pub neighbor_k: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let r0 = 50.0;
        Self {
            n_sbs: 3,
            coverage_radius_m: r0,
            inter_cell_distance_m: 1.2 * r0,
            region: Region {
                width_m: 4.0 * r0,
                height_m: 4.0 * r0,
            },
            beam_budget: vec![3, 3, 3],
            neighbor_k: 15,
        }
    }
}

impl NetworkConfig {
    /// Normalizes the beam budget and checks invariants.
    pub fn validated(mut self) -> Result<Self> {
        if self.n_sbs < 1 {
            return Err(Error::Config("n_sbs must be >= 1".into()));
        }
        if self.coverage_radius_m <= 0.0 {
            return Err(Error::Config("coverage_radius_m must be > 0".into()));
        }
        if self.inter_cell_distance_m <= 0.0 {
            return Err(Error::Config("inter_cell_distance_m must be > 0".into()));
        }
        if self.region.width_m <= 0.0 || self.region.height_m <= 0.0 {
            return Err(Error::Config("region sides must be > 0".into()));
        }
        match self.beam_budget.len() {
            0 => self.beam_budget = vec![3; self.n_sbs],
            1 => self.beam_budget = vec![self.beam_budget[0]; self.n_sbs],
            n if n == self.n_sbs => {}
            n => {
                return Err(Error::Config(format!(
                    "beam_budget has {n} entries for {} SBSs",
                    self.n_sbs
                )))
            }
        }
        if self.beam_budget.iter().any(|&b| b < 1) {
            return Err(Error::Config("beam budgets must be >= 1".into()));
        }
        Ok(self)
    }

    /// Beam budget of SBS `i` (1-based BS id).
    pub fn budget_of(&self, bs: BsId) -> usize {
        debug_assert!(bs >= 1 && bs <= self.n_sbs);
        self.beam_budget[bs - 1]
    }

    pub fn n_bs(&self) -> usize {
        self.n_sbs + 1
    }

    pub fn with_uniform_beams(mut self, n_i: usize) -> Self {
        self.beam_budget = vec![n_i; self.n_sbs];
        self
    }
}

/// One episode's UE positions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Deployment {
    pub positions: Vec<Point>,
    /// Step index the deployment was observed at.
    pub timestamp: u64,
}

impl Deployment {
    pub fn n_ues(&self) -> usize {
        self.positions.len()
    }
}

/// Derived geometry for one deployment: BS positions, per-UE candidate
/// sets and per-UE neighbor sets.
#[derive(Debug, Clone)]
pub struct Topology {
    /// Indexed by BS id; entry 0 is the MBS.
    pub bs_positions: Vec<Point>,
    /// Per-UE sorted list of associable BS ids; always contains `MBS_ID`.
    pub candidate_sets: Vec<Vec<BsId>>,
    /// Per-UE sorted list of the nearest other UE ids.
    pub neighbor_sets: Vec<Vec<UeId>>,
}

/// Places the MBS at the region center and `n_sbs` SBSs on a regular
/// row-major lattice centered on the region. Pure function of the config.
pub fn place_base_stations(config: &NetworkConfig) -> Result<Vec<Point>> {
    let pitch = config.inter_cell_distance_m;
    let rows = (config.n_sbs as f64).sqrt().floor().max(1.0) as usize;
    let cols = config.n_sbs.div_ceil(rows);

    let span_x = (cols - 1) as f64 * pitch;
    let span_y = (rows - 1) as f64 * pitch;
    if span_x > config.region.width_m || span_y > config.region.height_m {
        return Err(Error::Config(format!(
            "region {}x{} m too small for a {rows}x{cols} SBS lattice at {pitch} m pitch",
            config.region.width_m, config.region.height_m
        )));
    }

    let center = config.region.center();
    let origin_x = center.x - span_x / 2.0;
    let origin_y = center.y - span_y / 2.0;

    let mut positions = Vec::with_capacity(config.n_sbs + 1);
    positions.push(center); // MBS
    for s in 0..config.n_sbs {
        let r = s / cols;
        let c = s % cols;
        positions.push(Point::new(
            origin_x + c as f64 * pitch,
            origin_y + r as f64 * pitch,
        ));
    }
    Ok(positions)
}

/// Draws `k` UE positions i.i.d. uniform over the region.
pub fn generate_deployment<R: Rng>(config: &NetworkConfig, k: usize, rng: &mut R) -> Deployment {
    assert!(k >= 1, "a deployment needs at least one UE");
    let positions = (0..k)
        .map(|_| {
            Point::new(
                rng.random_range(0.0..config.region.width_m),
                rng.random_range(0.0..config.region.height_m),
            )
        })
        .collect();
    Deployment {
        positions,
        timestamp: 0,
    }
}

/// Per-UE candidate sets: the MBS plus every SBS within coverage range
/// (inclusive boundary).
pub fn candidate_bs(
    deployment: &Deployment,
    bs_positions: &[Point],
    config: &NetworkConfig,
) -> Vec<Vec<BsId>> {
    deployment
        .positions
        .iter()
        .map(|ue| {
            let mut set = vec![MBS_ID];
            for (i, bs) in bs_positions.iter().enumerate().skip(1) {
                if ue.distance(bs) <= config.coverage_radius_m {
                    set.push(i);
                }
            }
            set
        })
        .collect()
}

/// The `min(k, K-1)` UEs nearest to `j`, ties broken by lower UE id.
pub fn k_nearest_neighbors(deployment: &Deployment, j: UeId, k: usize) -> Vec<UeId> {
    let all = vec![true; deployment.n_ues()];
    k_nearest_among(&deployment.positions, j, k, &all)
}

/// Neighbor search restricted to UEs flagged active; `j` itself is
/// always excluded.
pub fn k_nearest_among(positions: &[Point], j: UeId, k: usize, active: &[bool]) -> Vec<UeId> {
    let me = &positions[j];
    let mut others: Vec<(f64, UeId)> = positions
        .iter()
        .enumerate()
        .filter(|(l, _)| *l != j && active[*l])
        .map(|(l, p)| (me.distance(p), l))
        .collect();
    others.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    others.truncate(k);
    let mut ids: Vec<UeId> = others.into_iter().map(|(_, l)| l).collect();
    ids.sort_unstable();
    ids
}

/// Builds the full topology for a deployment, with neighbor sets
/// restricted to `active` UEs.
pub fn build_topology(
    config: &NetworkConfig,
    deployment: &Deployment,
    active: &[bool],
) -> Result<Topology> {
    let bs_positions = place_base_stations(config)?;
    let candidate_sets = candidate_bs(deployment, &bs_positions, config);
    let neighbor_sets = (0..deployment.n_ues())
        .map(|j| {
            if active[j] {
                k_nearest_among(&deployment.positions, j, config.neighbor_k, active)
            } else {
                Vec::new()
            }
        })
        .collect();
    Ok(Topology {
        bs_positions,
        candidate_sets,
        neighbor_sets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetworkConfig {
        NetworkConfig::default().validated().unwrap()
    }

    #[test]
    fn three_sbs_form_a_row_sixty_meters_apart() {
        let c = cfg();
        let bs = place_base_stations(&c).unwrap();
        assert_eq!(bs.len(), 4);
        assert_eq!(bs[0], Point::new(100.0, 100.0)); // MBS at center
        assert_eq!(bs[1], Point::new(40.0, 100.0));
        assert_eq!(bs[2], Point::new(100.0, 100.0));
        assert_eq!(bs[3], Point::new(160.0, 100.0));
        assert!((bs[2].x - bs[1].x - 60.0).abs() < 1e-12);
        for p in &bs {
            assert!(c.region.contains(p));
        }
    }

    #[test]
    fn single_sbs_sits_at_region_center() {
        let c = NetworkConfig {
            n_sbs: 1,
            beam_budget: vec![3],
            ..cfg()
        };
        let bs = place_base_stations(&c).unwrap();
        assert_eq!(bs[1], c.region.center());
    }

    #[test]
    fn lattice_that_does_not_fit_is_a_config_error() {
        let c = NetworkConfig {
            region: Region {
                width_m: 50.0,
                height_m: 50.0,
            },
            ..cfg()
        };
        assert!(matches!(place_base_stations(&c), Err(Error::Config(_))));
    }

    #[test]
    fn placement_is_pure() {
        let c = cfg();
        let a = place_base_stations(&c).unwrap();
        let b = place_base_stations(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deployment_is_reproducible_for_a_seed() {
        let c = cfg();
        let a = generate_deployment(&c, 15, &mut ChaCha8Rng::seed_from_u64(7));
        let b = generate_deployment(&c, 15, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a.positions, b.positions);
        assert!(a.positions.iter().all(|p| c.region.contains(p)));
    }

    #[test]
    fn single_ue_deployment_is_valid() {
        let c = cfg();
        let d = generate_deployment(&c, 1, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(d.n_ues(), 1);
    }

    #[test]
    fn empirical_mean_position_approaches_region_center() {
        let c = cfg();
        let d = generate_deployment(&c, 10_000, &mut ChaCha8Rng::seed_from_u64(42));
        let mx = d.positions.iter().map(|p| p.x).sum::<f64>() / 10_000.0;
        let my = d.positions.iter().map(|p| p.y).sum::<f64>() / 10_000.0;
        assert!((mx - 100.0).abs() < 5.0, "mean x {mx}");
        assert!((my - 100.0).abs() < 5.0, "mean y {my}");
    }

    #[test]
    fn candidate_sets_follow_coverage_threshold() {
        let c = cfg();
        let bs = place_base_stations(&c).unwrap();
        // 49 m from SBS 1 at (40, 100); far from SBSs 2 and 3.
        let near = Deployment {
            positions: vec![Point::new(40.0, 51.0)],
            timestamp: 0,
        };
        assert_eq!(candidate_bs(&near, &bs, &c)[0], vec![0, 1]);

        // Out of every SBS range.
        let far = Deployment {
            positions: vec![Point::new(0.0, 0.0)],
            timestamp: 0,
        };
        assert_eq!(candidate_bs(&far, &bs, &c)[0], vec![0]);

        // Exactly at R0 from SBS 2 at (100, 100): boundary is inclusive.
        let edge = Deployment {
            positions: vec![Point::new(100.0, 150.0)],
            timestamp: 0,
        };
        assert_eq!(candidate_bs(&edge, &bs, &c)[0], vec![0, 2]);
    }

    #[test]
    fn knn_collinear_and_capped() {
        let d = Deployment {
            positions: vec![
                Point::new(0.0, 0.0),
                Point::new(10.0, 0.0),
                Point::new(100.0, 0.0),
            ],
            timestamp: 0,
        };
        assert_eq!(k_nearest_neighbors(&d, 0, 1), vec![1]);
        assert_eq!(k_nearest_neighbors(&d, 0, 15), vec![1, 2]);

        let many = Deployment {
            positions: (0..10).map(|i| Point::new(i as f64, 0.0)).collect(),
            timestamp: 0,
        };
        assert_eq!(k_nearest_neighbors(&many, 0, 15).len(), 9);
    }

    #[test]
    fn knn_ties_break_toward_lower_id() {
        let d = Deployment {
            positions: vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 5.0),
                Point::new(0.0, -5.0),
            ],
            timestamp: 0,
        };
        assert_eq!(k_nearest_neighbors(&d, 0, 1), vec![1]);
    }

    #[test]
    fn neighbor_sets_commute_with_relabeling() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = generate_deployment(&c, 8, &mut rng);
        let base: Vec<_> = (0..8).map(|j| k_nearest_neighbors(&d, j, 3)).collect();

        // Reverse the UE labels and recompute.
        let perm: Vec<usize> = (0..8).rev().collect();
        let relabeled = Deployment {
            positions: perm.iter().map(|&p| d.positions[p]).collect(),
            timestamp: 0,
        };
        for j in 0..8 {
            let mut expect: Vec<usize> = base[perm[j]].iter().map(|&n| 7 - n).collect();
            expect.sort_unstable();
            assert_eq!(k_nearest_neighbors(&relabeled, j, 3), expect);
        }
    }
}
