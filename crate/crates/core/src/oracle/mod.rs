//! Independent verification: a direct DC angle solve and an exhaustive check of
//! every activation subset of accepted matches. Shares no code with the PTDF
//! path in [`crate::grid`]; only the network data types are common.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{DispatchState, Network};
use crate::market::{Conditionality, MatchRecord, Outcome, TradeLogEntry};

/// Largest match set the exhaustive check accepts.
pub const MAX_EXHAUSTIVE_MATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("nodal system is singular (network disconnected?)")]
    Singular,
    #[error("dispatch has no entry for bus {0}")]
    MissingInjection(crate::grid::BusId),
    #[error("{0} matches exceed the exhaustive limit of {MAX_EXHAUSTIVE_MATCHES}")]
    TooManyMatches(usize),
    #[error("trade log entry {0} is a match without bus data")]
    IncompleteEntry(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineViolation {
    pub line: String,
    pub flow_kw: f64,
    pub limit_kw: f64,
    pub overload_kw: f64,
}

/// One activation subset that overloads at least one line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Bit `i` set means the `i`-th checked match is activated.
    pub mask: u64,
    pub subset: Vec<String>,
    pub flows_kw: Vec<f64>,
    pub violations: Vec<LineViolation>,
}

/// Solves `B * theta = P` with the slack angle fixed at zero and returns the
/// from->to flow `(theta_i - theta_j) / x` of every line.
pub fn dc_solve(network: &Network, dispatch: &DispatchState) -> Result<Vec<f64>, OracleError> {
    let buses = network.buses();
    let slack = network.slack_bus();
    let unknowns: Vec<_> = buses.iter().copied().filter(|&b| b != slack).collect();
    let pos = |b| unknowns.iter().position(|&u| u == b);
    let n = unknowns.len();

    let mut a = vec![vec![0.0; n + 1]; n];
    for line in network.lines() {
        let b = 1.0 / line.reactance;
        let (i, j) = (pos(line.from_bus), pos(line.to_bus));
        if let Some(i) = i {
            a[i][i] += b;
        }
        if let Some(j) = j {
            a[j][j] += b;
        }
        if let (Some(i), Some(j)) = (i, j) {
            a[i][j] -= b;
            a[j][i] -= b;
        }
    }
    for (row, &bus) in a.iter_mut().zip(&unknowns) {
        row[n] = dispatch.get(bus).ok_or(OracleError::MissingInjection(bus))?;
    }

    let theta_red = gauss_solve(a)?;
    let theta = |b| pos(b).map_or(0.0, |i| theta_red[i]);
    Ok(network
        .lines()
        .iter()
        .map(|l| (theta(l.from_bus) - theta(l.to_bus)) / l.reactance)
        .collect())
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>, OracleError> {
    let n = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-13 * scale.max(1.0) {
            return Err(OracleError::Singular);
        }
        a.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][n] - s) / a[row][row];
    }
    Ok(x)
}

/// Activates every subset of `matches` at full quantity on top of `baseline`
/// and reports each subset that overloads a line by more than `tolerance_kw`.
/// An empty result means any real-time activation pattern is line-feasible.
pub fn exhaustive_subset_check(
    network: &Network,
    baseline: &DispatchState,
    matches: &[MatchRecord],
    tolerance_kw: f64,
) -> Result<Vec<OracleReport>, OracleError> {
    if matches.len() > MAX_EXHAUSTIVE_MATCHES {
        return Err(OracleError::TooManyMatches(matches.len()));
    }
    let reports: Result<Vec<Option<OracleReport>>, OracleError> = (0..1u64 << matches.len())
        .into_par_iter()
        .map(|mask| {
            let mut dispatch = baseline.clone();
            let mut subset = Vec::new();
            for (i, m) in matches.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    dispatch.apply_transfer(m.inject_bus, m.withdraw_bus, m.quantity_kw);
                    subset.push(m.id.clone());
                }
            }
            let flows = dc_solve(network, &dispatch)?;
            let violations: Vec<LineViolation> = network
                .lines()
                .iter()
                .zip(&flows)
                .filter(|(l, f)| f.abs() > l.limit_kw + tolerance_kw)
                .map(|(l, &f)| LineViolation {
                    line: l.id.clone(),
                    flow_kw: f,
                    limit_kw: l.limit_kw,
                    overload_kw: f.abs() - l.limit_kw,
                })
                .collect();
            Ok((!violations.is_empty()).then_some(OracleReport {
                mask,
                subset,
                flows_kw: flows,
                violations,
            }))
        })
        .collect();
    Ok(reports?.into_iter().flatten().collect())
}

/// Rebuilds the post-clearing state from a trade log (unconditional matches
/// folded into `initial_baseline`, conditional ones collected) and runs the
/// exhaustive check on it.
pub fn audit_trade_log(
    network: &Network,
    initial_baseline: &DispatchState,
    log: &[TradeLogEntry],
    tolerance_kw: f64,
) -> Result<Vec<OracleReport>, OracleError> {
    let mut baseline = initial_baseline.clone();
    let mut conditional = Vec::new();
    for (i, entry) in log.iter().enumerate() {
        if !matches!(entry.outcome, Outcome::Matched | Outcome::PartialCongestion) {
            continue;
        }
        let record = entry.match_record().ok_or(OracleError::IncompleteEntry(i))?;
        match record.conditionality {
            Conditionality::Unconditional => {
                baseline.apply_transfer(record.inject_bus, record.withdraw_bus, record.quantity_kw)
            }
            Conditionality::Conditional => conditional.push(record),
        }
    }
    exhaustive_subset_check(network, &baseline, &conditional, tolerance_kw)
}
