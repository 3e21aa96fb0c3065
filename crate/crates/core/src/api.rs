//! Request and response bodies of the HTTP service. Shared by the server and
//! the client so both sides agree on the wire format.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::{BusId, Direction};
use crate::io::NetworkFile;
use crate::market::{Bid, ClearingConfig, FeasibleQuantity, MatchRecord, OrderBook, TradeLogEntry};
use crate::oracle::OracleReport;

/// Machine-readable error codes.
pub mod codes {
    pub const INVALID_INPUT: &str = "invalid_input";
    pub const INFEASIBLE_BASELINE: &str = "infeasible_baseline";
    pub const NOT_FOUND: &str = "not_found";
    pub const DUPLICATE_BID: &str = "duplicate_bid";
    pub const TOO_MANY_COMBINATIONS: &str = "too_many_combinations";
    pub const INTERNAL: &str = "internal";
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtdfResponse {
    pub buses: Vec<BusId>,
    pub slack_bus: BusId,
    pub line_ids: Vec<String>,
    /// One row per line, one column per bus.
    pub rows: Vec<Vec<f64>>,
    pub baseline_flows_kw: Vec<f64>,
}

/// Single-transfer capacity check against the network baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRequest {
    pub network: NetworkFile,
    pub request_bus: BusId,
    pub offer_bus: BusId,
    pub direction: Direction,
    pub quantity_kw: f64,
    #[serde(default)]
    pub tolerance_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResponse {
    pub inject_bus: BusId,
    pub withdraw_bus: BusId,
    pub quantity_kw: f64,
    pub binding_lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditRequest {
    pub network: NetworkFile,
    pub trades: Vec<TradeLogEntry>,
    #[serde(default)]
    pub tolerance_kw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditResponse {
    /// Conditional matches covered by the exhaustive check.
    pub conditional_matches: usize,
    /// Violating activation subsets; empty when every subset is safe.
    pub reports: Vec<OracleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub network: NetworkFile,
    #[serde(default)]
    pub config: ClearingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub baseline_flows_kw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub config: ClearingConfig,
    pub next_sequence: u64,
    pub book: OrderBook,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub sequence: u64,
    pub matches: Vec<MatchRecord>,
    pub log: Vec<TradeLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelResponse {
    pub bid: Bid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotRequest {
    pub match_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotResponse {
    pub injection_kw: BTreeMap<BusId, f64>,
    pub line_ids: Vec<String>,
    pub flows_kw: Vec<f64>,
}

/// Admissible quantity of a hypothetical transfer against the live book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeasibilityRequest {
    pub inject_bus: BusId,
    pub withdraw_bus: BusId,
    pub quantity_kw: f64,
}

pub type FeasibilityResponse = FeasibleQuantity;
