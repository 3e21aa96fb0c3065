//! File formats, configuration and batch replay.
//!
//! - network: TOML with `slack_bus`, `buses`, `[[lines]]` and an optional
//!   `[injection_kw]` table (the slack entry may be omitted).
//! - bids: JSON lines, one [`BidRecord`](crate::market::BidRecord) per line,
//!   arrival order = file order.
//! - trade log: JSON lines of [`TradeLogEntry`](crate::market::TradeLogEntry).
//! - book dump: pretty JSON of [`OrderBook`](crate::market::OrderBook).
//! - config: TOML [`MarketConfig`].

mod config;
mod files;
mod replay;

use std::path::PathBuf;

pub use config::{MarketConfig, PolicySelector, ScenarioFile};
pub use files::{
    load_bids, load_book, load_network, load_network_with, load_trade_log, network_from_toml, parse_bids,
    parse_trade_log, trade_log_to_string, write_book, write_trade_log, NetworkFile,
};
pub use replay::{replay, run_replay, ReplayReport};

use crate::grid::GridError;
use crate::market::MarketError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFEASIBLE_BASELINE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid network: {0}")]
    Network(GridError),
    #[error("baseline infeasible, line {line}: |{flow_kw}| kW exceeds limit {limit_kw} kW")]
    InfeasibleBaseline { line: String, flow_kw: f64, limit_kw: f64 },
    #[error("bid stream line {line}: {message}")]
    Bid { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Market(MarketError),
}

impl LoadError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            LoadError::InfeasibleBaseline { .. } => EXIT_INFEASIBLE_BASELINE,
            _ => EXIT_INPUT,
        }
    }
}

impl From<GridError> for LoadError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::InfeasibleBaseline { line, flow_kw, limit_kw } => {
                LoadError::InfeasibleBaseline { line, flow_kw, limit_kw }
            }
            other => LoadError::Network(other),
        }
    }
}

impl From<MarketError> for LoadError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Grid(g) => g.into(),
            other => LoadError::Market(other),
        }
    }
}
