use serde::{Deserialize, Serialize};

use crate::grid::{BusId, Direction};

use super::bid::Conditionality;

/// A cleared offer/request pair. Activation injects `quantity_kw` at
/// `inject_bus` and withdraws it at `withdraw_bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub id: String,
    pub offer_id: String,
    pub request_id: String,
    pub direction: Direction,
    pub inject_bus: BusId,
    pub withdraw_bus: BusId,
    pub quantity_kw: f64,
    pub price_eur_per_kw: f64,
    pub conditionality: Conditionality,
    pub round: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "matched")]
    Matched,
    #[serde(rename = "partial(congestion)")]
    PartialCongestion,
    #[serde(rename = "rejected(congestion)")]
    RejectedCongestion,
    #[serde(rename = "rejected(price)")]
    RejectedPrice,
}

impl Outcome {
    pub fn is_match(self) -> bool {
        matches!(self, Outcome::Matched | Outcome::PartialCongestion)
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Matched => "matched",
            Outcome::PartialCongestion => "partial(congestion)",
            Outcome::RejectedCongestion => "rejected(congestion)",
            Outcome::RejectedPrice => "rejected(price)",
        })
    }
}

/// One evaluated offer/request pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeLogEntry {
    /// Arrival sequence of the bid whose submission triggered the evaluation.
    pub round: u64,
    /// Set when the pair was evaluated while re-checking the order book.
    pub reevaluation: bool,
    pub offer_id: String,
    pub request_id: String,
    pub direction: Direction,
    pub inject_bus: BusId,
    pub withdraw_bus: BusId,
    pub conditionality: Conditionality,
    /// min of both remaining quantities when the pair was evaluated.
    pub requested_kw: f64,
    /// Cleared quantity; zero for rejections.
    pub quantity_kw: f64,
    /// Trade price; absent when the prices do not cross.
    pub price_eur_per_kw: Option<f64>,
    pub outcome: Outcome,
    pub binding_lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_id: Option<String>,
}

impl TradeLogEntry {
    /// The match this entry committed, if any.
    pub fn match_record(&self) -> Option<MatchRecord> {
        if !self.outcome.is_match() {
            return None;
        }
        Some(MatchRecord {
            id: self.match_id.clone()?,
            offer_id: self.offer_id.clone(),
            request_id: self.request_id.clone(),
            direction: self.direction,
            inject_bus: self.inject_bus,
            withdraw_bus: self.withdraw_bus,
            quantity_kw: self.quantity_kw,
            price_eur_per_kw: self.price_eur_per_kw?,
            conditionality: self.conditionality,
            round: self.round,
        })
    }
}
