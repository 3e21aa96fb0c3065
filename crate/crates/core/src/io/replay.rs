use std::path::Path;

use serde::Serialize;

use crate::grid::{DispatchState, Network};
use crate::market::{Bid, ClearingConfig, Market, OrderBook, TradeLogEntry};

use super::{load_bids, load_network_with, LoadError, MarketConfig, EXIT_OK};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub log: Vec<TradeLogEntry>,
    pub book: OrderBook,
    pub exit_code: i32,
}

/// Feeds `bids` through a fresh market in order.
pub fn replay(
    network: Network,
    baseline: DispatchState,
    bids: Vec<Bid>,
    config: ClearingConfig,
) -> Result<ReplayReport, LoadError> {
    let mut market = Market::new(network, baseline, config)?;
    for bid in bids {
        market.submit(bid)?;
    }
    Ok(ReplayReport {
        log: market.log().to_vec(),
        book: market.book().clone(),
        exit_code: EXIT_OK,
    })
}

/// Loads a network and a bid stream and replays the stream.
pub fn run_replay(
    network_path: impl AsRef<Path>,
    bids_path: impl AsRef<Path>,
    config: &MarketConfig,
) -> Result<ReplayReport, LoadError> {
    let clearing = config.to_clearing()?;
    let (network, baseline) = load_network_with(network_path, clearing.tolerance_kw)?;
    let bids = load_bids(bids_path)?;
    replay(network, baseline, bids, clearing)
}
