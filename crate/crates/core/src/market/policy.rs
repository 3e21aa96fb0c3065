use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{transfer_capacity, Line, DEFAULT_TOLERANCE_KW};

use super::MarketError;

/// Which activation combinations of accepted conditional matches must stay
/// line-feasible before a new match is admitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilityPolicy {
    /// The candidate alone on the baseline.
    Individual,
    /// The candidate on top of every accepted conditional match.
    Cumulative,
    IndividualAndCumulative,
    /// Every subset of accepted conditional matches.
    AllCombinations,
    /// The empty set plus the listed subsets, named by match id. Ids that do
    /// not (yet) name an accepted conditional match are ignored.
    Scenarios { scenarios: Vec<Vec<String>> },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterpartyOrder {
    /// Resting counterparties by arrival sequence.
    #[default]
    Fifo,
    /// Highest request price / lowest offer price first, then arrival.
    BestPrice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClearingConfig {
    pub policy: FeasibilityPolicy,
    pub order: CounterpartyOrder,
    /// Largest accepted conditional set the all-combinations policy enumerates.
    pub max_combinations: usize,
    pub tolerance_kw: f64,
    /// Fan combination checks out over the rayon pool.
    pub parallel: bool,
}

impl Default for ClearingConfig {
    fn default() -> Self {
        ClearingConfig {
            policy: FeasibilityPolicy::AllCombinations,
            order: CounterpartyOrder::Fifo,
            max_combinations: 20,
            tolerance_kw: DEFAULT_TOLERANCE_KW,
            parallel: true,
        }
    }
}

impl ClearingConfig {
    pub fn with_policy(policy: FeasibilityPolicy) -> Self {
        ClearingConfig {
            policy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if !self.tolerance_kw.is_finite() || self.tolerance_kw <= 0.0 {
            return Err(MarketError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance_kw
            )));
        }
        if self.max_combinations == 0 || self.max_combinations > 40 {
            return Err(MarketError::InvalidConfig(format!(
                "max_combinations must be in 1..=40, got {}",
                self.max_combinations
            )));
        }
        if let FeasibilityPolicy::Scenarios { scenarios } = &self.policy {
            if scenarios.is_empty() {
                return Err(MarketError::InvalidConfig("scenarios policy needs at least one scenario".into()));
            }
        }
        Ok(())
    }
}

/// The activation subsets one feasibility check has to cover, as indices into
/// the accepted conditional matches.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum CombinationSet {
    Listed(Vec<Vec<usize>>),
    AllSubsets(usize),
}

impl CombinationSet {
    pub(crate) fn for_policy(
        policy: &FeasibilityPolicy,
        conditional_ids: &[&str],
        max_combinations: usize,
    ) -> Result<Self, MarketError> {
        let count = conditional_ids.len();
        let all: Vec<usize> = (0..count).collect();
        Ok(match policy {
            FeasibilityPolicy::Individual => CombinationSet::Listed(vec![vec![]]),
            FeasibilityPolicy::Cumulative => CombinationSet::Listed(vec![all]),
            FeasibilityPolicy::IndividualAndCumulative if count == 0 => CombinationSet::Listed(vec![vec![]]),
            FeasibilityPolicy::IndividualAndCumulative => CombinationSet::Listed(vec![vec![], all]),
            FeasibilityPolicy::AllCombinations => {
                if count > max_combinations {
                    return Err(MarketError::TooManyCombinations {
                        accepted: count,
                        limit: max_combinations,
                    });
                }
                CombinationSet::AllSubsets(count)
            }
            FeasibilityPolicy::Scenarios { scenarios } => {
                let mut sets: Vec<Vec<usize>> = vec![vec![]];
                for scenario in scenarios {
                    let members: BTreeSet<usize> = scenario
                        .iter()
                        .filter_map(|id| conditional_ids.iter().position(|c| c == id))
                        .collect();
                    let members: Vec<usize> = members.into_iter().collect();
                    if !sets.contains(&members) {
                        sets.push(members);
                    }
                }
                CombinationSet::Listed(sets)
            }
        })
    }

    pub(crate) fn include_empty(&mut self) {
        if let CombinationSet::Listed(sets) = self {
            if !sets.iter().any(Vec::is_empty) {
                sets.insert(0, Vec::new());
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> u64 {
        match self {
            CombinationSet::Listed(sets) => sets.len() as u64,
            CombinationSet::AllSubsets(m) => 1u64 << m,
        }
    }
}

/// Smallest cap over the evaluated combinations, with the lines that bound it.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CombinedCap {
    pub quantity_kw: f64,
    pub binding_lines: BTreeSet<usize>,
}

impl CombinedCap {
    fn identity(requested: f64) -> Self {
        CombinedCap {
            quantity_kw: requested,
            binding_lines: BTreeSet::new(),
        }
    }

    // Exact comparison keeps the reduction associative, so parallel and
    // sequential evaluation agree bit for bit.
    fn combine(mut self, other: Self) -> Self {
        if other.quantity_kw < self.quantity_kw {
            other
        } else if self.quantity_kw < other.quantity_kw {
            self
        } else {
            self.binding_lines.extend(other.binding_lines);
            self
        }
    }
}

/// Inputs shared by every combination in one check.
pub(crate) struct CombinationCheck<'a> {
    pub lines: &'a [Line],
    pub base_flows: &'a [f64],
    /// Flow change of each accepted conditional match at full activation.
    pub member_deltas: &'a [Vec<f64>],
    /// Sensitivity of the candidate transfer.
    pub alpha: &'a [f64],
    pub requested_kw: f64,
    pub tolerance_kw: f64,
}

impl CombinationCheck<'_> {
    fn cap_at(&self, flows: &[f64]) -> CombinedCap {
        let cap = transfer_capacity(self.lines, flows, self.alpha, self.requested_kw, self.tolerance_kw);
        CombinedCap {
            quantity_kw: cap.quantity_kw,
            binding_lines: cap.binding_lines.into_iter().collect(),
        }
    }

    fn subset_flows(&self, members: &[usize]) -> Vec<f64> {
        let mut flows = self.base_flows.to_vec();
        for &m in members {
            for (f, d) in flows.iter_mut().zip(&self.member_deltas[m]) {
                *f += d;
            }
        }
        flows
    }

    /// Partial sums of member deltas for every subset of `members`, indexed by
    /// bit pattern.
    fn subset_sums(&self, members: std::ops::Range<usize>) -> Vec<Vec<f64>> {
        let width = members.len();
        let l = self.base_flows.len();
        let mut sums = vec![vec![0.0; l]; 1 << width];
        for mask in 1usize..1 << width {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            let delta = &self.member_deltas[members.start + low];
            let row: Vec<f64> = sums[rest].iter().zip(delta).map(|(a, b)| a + b).collect();
            sums[mask] = row;
        }
        sums
    }

    pub(crate) fn evaluate(&self, set: &CombinationSet, parallel: bool) -> CombinedCap {
        let identity = || CombinedCap::identity(self.requested_kw);
        match set {
            CombinationSet::Listed(sets) => {
                let eval = |s: &Vec<usize>| self.cap_at(&self.subset_flows(s));
                if parallel && sets.len() > 1 {
                    sets.par_iter().map(eval).reduce(identity, CombinedCap::combine)
                } else {
                    sets.iter().map(eval).fold(identity(), CombinedCap::combine)
                }
            }
            CombinationSet::AllSubsets(count) => {
                // Split the members in two halves and tabulate each half's
                // subset sums, so every subset costs one pass over the lines.
                let low_width = count / 2;
                let low = self.subset_sums(0..low_width);
                let high = self.subset_sums(low_width..*count);
                let eval_high = |h: &Vec<f64>| {
                    low.iter()
                        .map(|lo| {
                            let flows: Vec<f64> = self
                                .base_flows
                                .iter()
                                .zip(lo)
                                .zip(h)
                                .map(|((b, x), y)| b + x + y)
                                .collect();
                            self.cap_at(&flows)
                        })
                        .fold(identity(), CombinedCap::combine)
                };
                if parallel && high.len() > 1 {
                    high.par_iter().map(eval_high).reduce(identity, CombinedCap::combine)
                } else {
                    high.iter().map(eval_high).fold(identity(), CombinedCap::combine)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (1..=n).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn policy_combination_sets() {
        let owned = ids(3);
        let ids: Vec<&str> = owned.iter().map(String::as_str).collect();
        let set = |p| CombinationSet::for_policy(&p, &ids, 20).unwrap();
        assert_eq!(set(FeasibilityPolicy::Individual), CombinationSet::Listed(vec![vec![]]));
        assert_eq!(set(FeasibilityPolicy::Cumulative), CombinationSet::Listed(vec![vec![0, 1, 2]]));
        assert_eq!(
            set(FeasibilityPolicy::IndividualAndCumulative),
            CombinationSet::Listed(vec![vec![], vec![0, 1, 2]])
        );
        assert_eq!(set(FeasibilityPolicy::AllCombinations), CombinationSet::AllSubsets(3));
        assert_eq!(set(FeasibilityPolicy::AllCombinations).len(), 8);
        let scenarios = FeasibilityPolicy::Scenarios {
            scenarios: vec![vec!["m3".into(), "m1".into()], vec!["m9".into()], vec![]],
        };
        assert_eq!(set(scenarios), CombinationSet::Listed(vec![vec![], vec![0, 2]]));
    }

    #[test]
    fn all_combinations_guard() {
        let owned = ids(5);
        let ids: Vec<&str> = owned.iter().map(String::as_str).collect();
        assert!(matches!(
            CombinationSet::for_policy(&FeasibilityPolicy::AllCombinations, &ids, 4),
            Err(MarketError::TooManyCombinations { accepted: 5, limit: 4 })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(ClearingConfig::default().validate().is_ok());
        let bad = ClearingConfig {
            tolerance_kw: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let empty = ClearingConfig::with_policy(FeasibilityPolicy::Scenarios { scenarios: vec![] });
        assert!(empty.validate().is_err());
    }

    #[test]
    fn split_enumeration_matches_listed_subsets() {
        let lines: Vec<Line> = (0..3).map(|i| Line::new(i, i + 1, 0.1, 50.0)).collect();
        let deltas = vec![
            vec![5.0, -3.0, 0.0],
            vec![-8.0, 2.0, 4.0],
            vec![1.0, 1.0, -9.0],
            vec![6.0, 0.0, 3.0],
            vec![0.0, -7.0, 2.5],
        ];
        let check = CombinationCheck {
            lines: &lines,
            base_flows: &[30.0, -20.0, 10.0],
            member_deltas: &deltas,
            alpha: &[1.0, -1.0, 0.5],
            requested_kw: 40.0,
            tolerance_kw: 1e-6,
        };
        let listed: Vec<Vec<usize>> = (0u32..32)
            .map(|mask| (0..5).filter(|i| mask >> i & 1 == 1).collect())
            .collect();
        let a = check.evaluate(&CombinationSet::AllSubsets(5), false);
        let b = check.evaluate(&CombinationSet::Listed(listed), false);
        let c = check.evaluate(&CombinationSet::AllSubsets(5), true);
        assert!((a.quantity_kw - b.quantity_kw).abs() < 1e-9);
        assert_eq!(a, c);
        // worst case on line 0: 30 + 5 + 1 + 6 = 42 -> cap 8
        assert!((a.quantity_kw - 8.0).abs() < 1e-9);
        assert_eq!(a.binding_lines, BTreeSet::from([0]));
    }
}
