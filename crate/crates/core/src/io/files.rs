use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::{build_ptdf, check_feasible, line_flows, BusId, DispatchState, Line, Network, DEFAULT_TOLERANCE_KW};
use crate::market::{Bid, BidRecord, MarketError, OrderBook, TradeLogEntry};

use super::LoadError;

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub slack_bus: BusId,
    pub buses: Vec<BusId>,
    pub lines: Vec<Line>,
    /// Baseline net injections; omitted buses are zero, an omitted slack
    /// balances the rest.
    #[serde(default)]
    pub injection_kw: BTreeMap<BusId, f64>,
}

fn read(path: &Path) -> Result<String, LoadError> {
    fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_network(path: impl AsRef<Path>) -> Result<(Network, DispatchState), LoadError> {
    load_network_with(path, DEFAULT_TOLERANCE_KW)
}

/// Loads and validates a network and its slack-balanced baseline, refusing a
/// baseline that already overloads a line.
pub fn load_network_with(path: impl AsRef<Path>, tolerance_kw: f64) -> Result<(Network, DispatchState), LoadError> {
    let path = path.as_ref();
    network_from_toml(&read(path)?, tolerance_kw).map_err(|e| with_path(e, path))
}

pub fn network_from_toml(text: &str, tolerance_kw: f64) -> Result<(Network, DispatchState), LoadError> {
    NetworkFile::from_toml(text)?.build(tolerance_kw)
}

impl NetworkFile {
    pub fn from_toml(text: &str) -> Result<Self, LoadError> {
        toml::from_str(text).map_err(|e| LoadError::Parse {
            path: Default::default(),
            message: e.to_string(),
        })
    }

    /// Reads the file without validating the network.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, LoadError> {
        let path = path.as_ref();
        Self::from_toml(&read(path)?).map_err(|e| with_path(e, path))
    }

    /// Validates the network and balances and checks the baseline.
    pub fn build(self, tolerance_kw: f64) -> Result<(Network, DispatchState), LoadError> {
        let network = Network::new(self.buses, self.lines, self.slack_bus)?;
        let baseline = DispatchState::balanced(&network, self.injection_kw, tolerance_kw)?;
        let ptdf = build_ptdf(&network)?;
        let flows = line_flows(&ptdf, &baseline)?;
        check_feasible(&network, &flows, tolerance_kw)?;
        Ok((network, baseline))
    }
}

fn with_path(e: LoadError, path: &Path) -> LoadError {
    match e {
        LoadError::Parse { message, .. } => LoadError::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    }
}

/// Parses a JSON-lines bid stream. Sequences follow line order starting at 1;
/// blank lines are skipped.
pub fn parse_bids(text: &str) -> Result<Vec<Bid>, LoadError> {
    let mut bids = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let record: BidRecord = serde_json::from_str(raw).map_err(|e| LoadError::Bid {
            line,
            message: e.to_string(),
        })?;
        if !ids.insert(record.id.clone()) {
            return Err(LoadError::Bid {
                line,
                message: MarketError::DuplicateBid(record.id).to_string(),
            });
        }
        let bid = record.into_bid(bids.len() as u64 + 1).map_err(|e| LoadError::Bid {
            line,
            message: e.to_string(),
        })?;
        bids.push(bid);
    }
    Ok(bids)
}

pub fn load_bids(path: impl AsRef<Path>) -> Result<Vec<Bid>, LoadError> {
    let path = path.as_ref();
    parse_bids(&read(path)?)
}

pub fn trade_log_to_string(log: &[TradeLogEntry]) -> String {
    let mut out = String::new();
    for entry in log {
        out.push_str(&serde_json::to_string(entry).expect("trade log entries serialize"));
        out.push('\n');
    }
    out
}

pub fn write_trade_log(path: impl AsRef<Path>, log: &[TradeLogEntry]) -> std::io::Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(trade_log_to_string(log).as_bytes())
}

pub fn parse_trade_log(text: &str) -> Result<Vec<TradeLogEntry>, LoadError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| LoadError::Bid {
                line: i + 1,
                message: format!("trade log: {e}"),
            })
        })
        .collect()
}

pub fn load_trade_log(path: impl AsRef<Path>) -> Result<Vec<TradeLogEntry>, LoadError> {
    parse_trade_log(&read(path.as_ref())?)
}

pub fn write_book(path: impl AsRef<Path>, book: &OrderBook) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(book).expect("order book serializes");
    text.push('\n');
    fs::write(path, text)
}

pub fn load_book(path: impl AsRef<Path>) -> Result<OrderBook, LoadError> {
    let path = path.as_ref();
    serde_json::from_str(&read(path)?).map_err(|e| LoadError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
