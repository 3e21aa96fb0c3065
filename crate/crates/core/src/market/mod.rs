//! Continuous pay-as-bid clearing of flexibility offers and requests with a
//! network check on every price-compatible pair.

mod bid;
mod book;
mod engine;
mod policy;
mod records;

pub use bid::{price_match, Bid, BidRecord, Conditionality, Side};
pub use book::OrderBook;
pub use engine::{FeasibleQuantity, Market, SubmitReport};
pub use policy::{ClearingConfig, CounterpartyOrder, FeasibilityPolicy};
pub use records::{MatchRecord, Outcome, TradeLogEntry};

pub use crate::grid::Direction;

use crate::grid::{BusId, GridError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MarketError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid bid {id}: {reason}")]
    InvalidBid { id: String, reason: String },
    #[error("bid {id} has non-positive quantity {quantity_kw}")]
    NonPositiveQuantity { id: String, quantity_kw: f64 },
    #[error("duplicate bid id {0}")]
    DuplicateBid(String),
    #[error("bid {id} is located at unknown bus {bus}")]
    UnknownBus { id: String, bus: BusId },
    #[error("bid {id} has sequence {sequence}, not after {last}")]
    NonMonotoneSequence { id: String, sequence: u64, last: u64 },
    #[error("offer {offer} is priced above request {request}")]
    IncompatiblePrices { offer: String, request: String },
    #[error(
        "{accepted} accepted conditional matches exceed the all-combinations limit of {limit}; use the scenarios policy"
    )]
    TooManyCombinations { accepted: usize, limit: usize },
    #[error("invalid market configuration: {0}")]
    InvalidConfig(String),
    #[error("no live bid {0}")]
    UnknownBid(String),
    #[error("unknown match {0}")]
    UnknownMatch(String),
    #[error("match {0} is unconditional and already part of the baseline")]
    NotConditional(String),
    #[error("invalid order book: {0}")]
    InvalidBook(String),
}
