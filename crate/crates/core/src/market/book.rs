use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::grid::DispatchState;

use super::bid::{Bid, Conditionality, Side};
use super::records::MatchRecord;

/// Resting bids, committed matches and the baseline dispatch. Serializes to
/// the book dump format and reloads to an identical state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderBook {
    /// Live offers in arrival order.
    pub offers: Vec<Bid>,
    /// Live requests in arrival order.
    pub requests: Vec<Bid>,
    /// Every committed match, conditional or not, in commit order.
    pub matches: Vec<MatchRecord>,
    /// Initial dispatch plus every unconditional match.
    pub baseline: DispatchState,
    pub last_sequence: u64,
    /// Ids of every bid ever submitted, live or not.
    pub seen_bid_ids: BTreeSet<String>,
}

impl OrderBook {
    pub fn new(baseline: DispatchState) -> Self {
        OrderBook {
            offers: Vec::new(),
            requests: Vec::new(),
            matches: Vec::new(),
            baseline,
            last_sequence: 0,
            seen_bid_ids: BTreeSet::new(),
        }
    }

    pub fn side(&self, side: Side) -> &[Bid] {
        match side {
            Side::Offer => &self.offers,
            Side::Request => &self.requests,
        }
    }

    pub(crate) fn side_mut(&mut self, side: Side) -> &mut Vec<Bid> {
        match side {
            Side::Offer => &mut self.offers,
            Side::Request => &mut self.requests,
        }
    }

    pub fn bid(&self, side: Side, id: &str) -> Option<&Bid> {
        self.side(side).iter().find(|b| b.id == id)
    }

    pub(crate) fn bid_mut(&mut self, side: Side, id: &str) -> Option<&mut Bid> {
        self.side_mut(side).iter_mut().find(|b| b.id == id)
    }

    pub fn find_live(&self, id: &str) -> Option<&Bid> {
        self.offers.iter().chain(&self.requests).find(|b| b.id == id)
    }

    /// Accepted conditional matches: the members of every activation combination.
    pub fn conditional_matches(&self) -> impl Iterator<Item = &MatchRecord> {
        self.matches
            .iter()
            .filter(|m| m.conditionality == Conditionality::Conditional)
    }

    pub fn is_empty(&self) -> bool {
        self.offers.is_empty() && self.requests.is_empty()
    }

    /// Drops bids with nothing left to trade.
    pub(crate) fn purge_exhausted(&mut self) {
        self.offers.retain(|b| b.quantity_kw > 0.0);
        self.requests.retain(|b| b.quantity_kw > 0.0);
    }

    /// Total cleared quantity per bid id.
    pub fn cleared_kw(&self, bid_id: &str) -> f64 {
        self.matches
            .iter()
            .filter(|m| m.offer_id == bid_id || m.request_id == bid_id)
            .map(|m| m.quantity_kw)
            .sum()
    }
}
