//! Alpha-fair network utility, association feasibility checks, and an
//! exact brute-force oracle for tiny instances.

use serde::{Deserialize, Serialize};

use crate::geometry::{BsId, UeId, MBS_ID};
use crate::{Error, Result};

/// One-BS-per-UE assignment. Masked-out UEs carry `None` and are exempt
/// from every constraint; the representation is binary by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationMatrix {
    n_bs: usize,
    serving: Vec<Option<BsId>>,
}

impl AssociationMatrix {
    pub fn new(n_bs: usize, serving: Vec<Option<BsId>>) -> Self {
        Self { n_bs, serving }
    }

    pub fn n_bs(&self) -> usize {
        self.n_bs
    }

    pub fn n_ues(&self) -> usize {
        self.serving.len()
    }

    /// Binary indicator x_{i,j}.
    pub fn x(&self, bs: BsId, ue: UeId) -> u8 {
        u8::from(self.serving[ue] == Some(bs))
    }

    pub fn serving_of(&self, ue: UeId) -> Option<BsId> {
        self.serving[ue]
    }

    pub fn serving(&self) -> &[Option<BsId>] {
        &self.serving
    }

    /// Number of UEs served by `bs`.
    pub fn load(&self, bs: BsId) -> usize {
        self.serving.iter().filter(|s| **s == Some(bs)).count()
    }

    /// Served (bs, ue) pairs in UE order.
    pub fn pairs(&self) -> impl Iterator<Item = (BsId, UeId)> + '_ {
        self.serving
            .iter()
            .enumerate()
            .filter_map(|(j, s)| s.map(|i| (i, j)))
    }
}

/// First violated association constraint, with indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// An active UE has no serving BS (one-BS-per-UE rule).
    Unassigned { ue: UeId },
    /// Serving BS id outside `0..n_bs`.
    UnknownBs { ue: UeId, bs: BsId },
    /// Serving BS not in the UE's candidate set.
    OutsideCandidate { ue: UeId, bs: BsId },
    /// SBS load above its beam budget.
    CapacityExceeded { bs: BsId, load: usize, budget: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Unassigned { ue } => write!(f, "UE {ue} has no serving BS"),
            Violation::UnknownBs { ue, bs } => write!(f, "UE {ue} assigned to unknown BS {bs}"),
            Violation::OutsideCandidate { ue, bs } => {
                write!(f, "UE {ue} assigned to BS {bs} outside its candidate set")
            }
            Violation::CapacityExceeded { bs, load, budget } => {
                write!(f, "SBS {bs} serves {load} UEs, budget {budget}")
            }
        }
    }
}

/// Feasibility context for an association: candidate sets, per-SBS beam
/// budgets (indexed by SBS id - 1) and the active-UE mask.
#[derive(Debug, Clone, Copy)]
pub struct Constraints<'a> {
    pub candidate_sets: &'a [Vec<BsId>],
    pub beam_budget: &'a [usize],
    pub active: &'a [bool],
}

/// Verifies one-BS-per-UE over the candidate sets and the per-SBS beam
/// budgets. The MBS is uncapacitated.
pub fn check_feasible(
    assoc: &AssociationMatrix,
    constraints: &Constraints,
) -> std::result::Result<(), Violation> {
    let mut loads = vec![0usize; assoc.n_bs];
    for ue in 0..assoc.n_ues() {
        if !constraints.active[ue] {
            continue;
        }
        match assoc.serving_of(ue) {
            None => return Err(Violation::Unassigned { ue }),
            Some(bs) => {
                if bs >= assoc.n_bs {
                    return Err(Violation::UnknownBs { ue, bs });
                }
                if !constraints.candidate_sets[ue].contains(&bs) {
                    return Err(Violation::OutsideCandidate { ue, bs });
                }
                loads[bs] += 1;
            }
        }
    }
    for bs in 1..assoc.n_bs {
        let budget = constraints.beam_budget[bs - 1];
        if loads[bs] > budget {
            return Err(Violation::CapacityExceeded {
                bs,
                load: loads[bs],
                budget,
            });
        }
    }
    Ok(())
}

/// Alpha-fair utility U_alpha(x).
///
/// Sum-rate for alpha = 0, proportional fairness (natural log) for
/// alpha = 1. For alpha > 1 and x = 0 the value diverges to -inf.
pub fn alpha_fair(x: f64, alpha: f64) -> f64 {
    debug_assert!(x >= 0.0 && alpha >= 0.0);
    if alpha == 1.0 {
        (1.0 + x).ln()
    } else {
        x.powf(1.0 - alpha) / (1.0 - alpha)
    }
}

/// QoS satisfaction kappa = min(1, rate/demand). A zero demand counts as
/// fully satisfied; an infinite demand (no-traffic mode) yields 0.
pub fn qos_satisfaction(rate_bps: f64, demand_bps: f64) -> f64 {
    if demand_bps == 0.0 {
        1.0
    } else {
        (rate_bps / demand_bps).min(1.0)
    }
}

/// The utility argument min(R, D); with D = inf this is the raw rate.
pub fn utility_arg(rate_bps: f64, demand_bps: f64) -> f64 {
    rate_bps.min(demand_bps)
}

/// Network utility and its per-UE breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityReport {
    pub total: f64,
    /// U_alpha(min(R, D)) per UE; 0 for inactive UEs.
    pub per_ue_terms: Vec<f64>,
    pub kappas: Vec<f64>,
    pub alpha: f64,
}

/// Utility of a feasibility-checked association.
pub fn network_utility(
    assoc: &AssociationMatrix,
    rates_bps: &[f64],
    demands_bps: &[f64],
    alpha: f64,
    constraints: &Constraints,
) -> Result<UtilityReport> {
    check_feasible(assoc, constraints).map_err(Error::Infeasible)?;
    Ok(utility_terms(assoc, rates_bps, demands_bps, alpha, constraints.active))
}

/// Utility breakdown without the feasibility check; callers guarantee a
/// feasible association.
pub fn utility_terms(
    assoc: &AssociationMatrix,
    rates_bps: &[f64],
    demands_bps: &[f64],
    alpha: f64,
    active: &[bool],
) -> UtilityReport {
    let k = assoc.n_ues();
    let mut terms = vec![0.0; k];
    let mut kappas = vec![0.0; k];
    let mut total = 0.0;
    for ue in 0..k {
        if !active[ue] || assoc.serving_of(ue).is_none() {
            continue;
        }
        kappas[ue] = qos_satisfaction(rates_bps[ue], demands_bps[ue]);
        terms[ue] = alpha_fair(utility_arg(rates_bps[ue], demands_bps[ue]), alpha);
        total += terms[ue];
    }
    UtilityReport {
        total,
        per_ue_terms: terms,
        kappas,
        alpha,
    }
}

/// Per-UE achievable rates as a function of the full association. Rates
/// may depend on the association through interference and band sharing.
pub trait RateEvaluator {
    /// Rates in bps per UE; entries for unserved or inactive UEs are 0.
    fn rates(&self, assoc: &AssociationMatrix) -> Vec<f64>;
}

/// Association-independent rate table, mostly for tests and tiny
/// synthetic instances.
#[derive(Debug, Clone)]
pub struct FixedRateEvaluator {
    /// rate\[ue\]\[bs\] in bps.
    pub table: Vec<Vec<f64>>,
}

impl RateEvaluator for FixedRateEvaluator {
    fn rates(&self, assoc: &AssociationMatrix) -> Vec<f64> {
        (0..assoc.n_ues())
            .map(|ue| match assoc.serving_of(ue) {
                Some(bs) => self.table[ue][bs],
                None => 0.0,
            })
            .collect()
    }
}

const ORACLE_MAX_UES: usize = 8;
const ORACLE_MAX_CANDIDATES: usize = 4;

/// Exhaustive maximizer of the network utility over all feasible
/// associations. Guarded to tiny instances; ties break toward the
/// lexicographically smallest assignment vector.
pub fn exact_oracle(
    evaluator: &dyn RateEvaluator,
    demands_bps: &[f64],
    alpha: f64,
    constraints: &Constraints,
) -> Result<(AssociationMatrix, UtilityReport)> {
    let k = constraints.candidate_sets.len();
    let active_ues: Vec<UeId> = (0..k).filter(|&j| constraints.active[j]).collect();
    let max_candidates = active_ues
        .iter()
        .map(|&j| constraints.candidate_sets[j].len())
        .max()
        .unwrap_or(0);
    if active_ues.len() > ORACLE_MAX_UES || max_candidates > ORACLE_MAX_CANDIDATES {
        return Err(Error::OracleSize {
            n_ue: active_ues.len(),
            max_ue: ORACLE_MAX_UES,
            max_candidates,
            candidate_cap: ORACLE_MAX_CANDIDATES,
        });
    }
    let n_bs = 1 + constraints.beam_budget.len();

    let mut serving: Vec<Option<BsId>> = vec![None; k];
    let mut loads = vec![0usize; n_bs];
    let mut best: Option<(f64, Vec<Option<BsId>>)> = None;

    // Depth-first enumeration in candidate-set order; candidate sets are
    // sorted ascending, so the first maximizer found is lex-smallest.
    fn recurse(
        depth: usize,
        active_ues: &[UeId],
        constraints: &Constraints,
        n_bs: usize,
        serving: &mut Vec<Option<BsId>>,
        loads: &mut Vec<usize>,
        evaluator: &dyn RateEvaluator,
        demands: &[f64],
        alpha: f64,
        best: &mut Option<(f64, Vec<Option<BsId>>)>,
    ) {
        if depth == active_ues.len() {
            let assoc = AssociationMatrix::new(n_bs, serving.clone());
            let rates = evaluator.rates(&assoc);
            let total = utility_terms(&assoc, &rates, demands, alpha, constraints.active).total;
            let better = match best {
                None => true,
                Some((b, _)) => total > *b,
            };
            if better {
                *best = Some((total, serving.clone()));
            }
            return;
        }
        let ue = active_ues[depth];
        for &bs in &constraints.candidate_sets[ue] {
            if bs != MBS_ID && loads[bs] >= constraints.beam_budget[bs - 1] {
                continue;
            }
            serving[ue] = Some(bs);
            loads[bs] += 1;
            recurse(
                depth + 1,
                active_ues,
                constraints,
                n_bs,
                serving,
                loads,
                evaluator,
                demands,
                alpha,
                best,
            );
            loads[bs] -= 1;
            serving[ue] = None;
        }
    }

    recurse(
        0,
        &active_ues,
        constraints,
        n_bs,
        &mut serving,
        &mut loads,
        evaluator,
        demands_bps,
        alpha,
        &mut best,
    );

    let (_, serving) = best.expect("candidate sets always contain the MBS");
    let assoc = AssociationMatrix::new(n_bs, serving);
    let rates = evaluator.rates(&assoc);
    let report = network_utility(&assoc, &rates, demands_bps, alpha, constraints)?;
    Ok((assoc, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_active(k: usize) -> Vec<bool> {
        vec![true; k]
    }

    #[test]
    fn alpha_fair_branches() {
        assert_eq!(alpha_fair(5.0, 0.0), 5.0);
        assert_eq!(alpha_fair(0.0, 1.0), 0.0);
        assert_eq!(alpha_fair(2.0, 2.0), -0.5);
        assert!((alpha_fair(1.0, 1.0) - 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(alpha_fair(0.0, 2.0), f64::NEG_INFINITY);
    }

    #[test]
    fn qos_satisfaction_clamps() {
        assert_eq!(qos_satisfaction(100e6, 200e6), 0.5);
        assert_eq!(qos_satisfaction(250e6, 200e6), 1.0);
        assert_eq!(qos_satisfaction(0.0, 0.0), 1.0);
        // No-traffic mode: the utility argument is the raw rate.
        assert_eq!(utility_arg(3.0, f64::INFINITY), 3.0);
        assert_eq!(alpha_fair(utility_arg(3.0, f64::INFINITY), 0.0), 3.0);
    }

    #[test]
    fn network_utility_sums_terms() {
        let candidates = vec![vec![0, 1], vec![0, 1]];
        let budget = vec![2];
        let active = all_active(2);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };

        // One fully satisfied UE at alpha = 0.
        let assoc = AssociationMatrix::new(2, vec![Some(1), Some(0)]);
        let report =
            network_utility(&assoc, &[10e6, 0.0], &[5e6, 5e6], 0.0, &cons).unwrap();
        assert_eq!(report.per_ue_terms[0], 5e6);
        assert_eq!(report.total, 5e6);
        assert_eq!(report.kappas[0], 1.0);

        // Sum-rate with infinite demands.
        let inf = f64::INFINITY;
        let report =
            network_utility(&assoc, &[100.0, 50.0], &[inf, inf], 0.0, &cons).unwrap();
        assert_eq!(report.total, 150.0);

        // alpha = 1 with all-zero arguments.
        let report = network_utility(&assoc, &[0.0, 0.0], &[inf, inf], 1.0, &cons).unwrap();
        assert_eq!(report.total, 0.0);
    }

    #[test]
    fn feasibility_violations_carry_indices() {
        let candidates = vec![vec![0], vec![0, 1], vec![0, 1], vec![0, 1], vec![0, 1]];
        let budget = vec![3];
        let active = all_active(5);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };

        // UE 0 assigned outside its candidate set.
        let assoc = AssociationMatrix::new(2, vec![Some(1); 5]);
        assert_eq!(
            check_feasible(&assoc, &cons),
            Err(Violation::OutsideCandidate { ue: 0, bs: 1 })
        );

        // Budget 3, load 4.
        let assoc = AssociationMatrix::new(
            2,
            vec![Some(0), Some(1), Some(1), Some(1), Some(1)],
        );
        assert_eq!(
            check_feasible(&assoc, &cons),
            Err(Violation::CapacityExceeded {
                bs: 1,
                load: 4,
                budget: 3
            })
        );

        // Everyone on the MBS is always feasible.
        let assoc = AssociationMatrix::new(2, vec![Some(0); 5]);
        assert_eq!(check_feasible(&assoc, &cons), Ok(()));

        // Missing assignment.
        let assoc = AssociationMatrix::new(2, vec![Some(0), None, Some(0), Some(0), Some(0)]);
        assert_eq!(
            check_feasible(&assoc, &cons),
            Err(Violation::Unassigned { ue: 1 })
        );
    }

    #[test]
    fn oracle_splits_ues_when_capacity_forces_it() {
        // Two UEs, one SBS with budget 1, SBS rate far above MBS rate.
        let table = vec![vec![1.0e6, 100.0e6], vec![1.0e6, 100.0e6]];
        let eval = FixedRateEvaluator { table };
        let candidates = vec![vec![0, 1], vec![0, 1]];
        let budget = vec![1];
        let active = all_active(2);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };
        let inf = f64::INFINITY;
        let (assoc, report) = exact_oracle(&eval, &[inf, inf], 0.0, &cons).unwrap();
        assert_eq!(report.total, 101.0e6);
        // Both splits score 101e6; the lex tie-break keeps [0, 1].
        assert_eq!(assoc.serving(), &[Some(0), Some(1)]);
    }

    #[test]
    fn oracle_single_ue_picks_argmax() {
        let eval = FixedRateEvaluator {
            table: vec![vec![5.0, 2.0, 9.0]],
        };
        let candidates = vec![vec![0, 1, 2]];
        let budget = vec![1, 1];
        let active = all_active(1);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };
        let (assoc, report) = exact_oracle(&eval, &[f64::INFINITY], 0.0, &cons).unwrap();
        assert_eq!(assoc.serving_of(0), Some(2));
        assert_eq!(report.total, 9.0);
    }

    #[test]
    fn oracle_refuses_oversized_instances() {
        let k = 9;
        let eval = FixedRateEvaluator {
            table: vec![vec![1.0, 1.0]; k],
        };
        let candidates = vec![vec![0, 1]; k];
        let budget = vec![k];
        let active = all_active(k);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };
        let err = exact_oracle(&eval, &vec![f64::INFINITY; k], 0.0, &cons).unwrap_err();
        match err {
            Error::OracleSize { n_ue, max_ue, .. } => {
                assert_eq!(n_ue, 9);
                assert_eq!(max_ue, 8);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn oracle_argmax_invariant_under_rate_scaling() {
        let table = vec![
            vec![3.0, 7.0, 1.0],
            vec![2.0, 6.0, 6.5],
            vec![4.0, 1.0, 2.0],
        ];
        let candidates = vec![vec![0, 1, 2]; 3];
        let budget = vec![1, 2];
        let active = all_active(3);
        let cons = Constraints {
            candidate_sets: &candidates,
            beam_budget: &budget,
            active: &active,
        };
        let demands = vec![f64::INFINITY; 3];
        let (a1, _) = exact_oracle(&FixedRateEvaluator { table: table.clone() }, &demands, 0.0, &cons)
            .unwrap();
        let scaled = table
            .iter()
            .map(|row| row.iter().map(|r| r * 2.5).collect())
            .collect();
        let (a2, _) =
            exact_oracle(&FixedRateEvaluator { table: scaled }, &demands, 0.0, &cons).unwrap();
        assert_eq!(a1.serving(), a2.serving());
    }
}
