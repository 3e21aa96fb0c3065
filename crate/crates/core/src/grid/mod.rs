//! DC network model: PTDF construction, line flows, headroom and the
//! maximum quantity a request/offer pair can exchange without congestion.

mod network;
mod ptdf;
mod transfer;

pub use network::{BusId, DispatchState, Line, Network};
pub use ptdf::{build_ptdf, exchange_sensitivity, line_flows, ExchangeSensitivity, PtdfMatrix, SENSITIVITY_EPS};
pub use transfer::{
    headroom, max_tradable_quantity, max_tradable_quantity_with, settle_quantity, transfer_capacity, Direction,
    FlowHeadroom, TransferCap, DEFAULT_TOLERANCE_KW,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("duplicate bus {0}")]
    DuplicateBus(BusId),
    #[error("slack bus {0} is not a network bus")]
    UnknownSlack(BusId),
    #[error("network has no lines")]
    NoLines,
    #[error("line {line} references unknown bus {bus}")]
    LineEndpoint { line: String, bus: BusId },
    #[error("line {0} connects a bus to itself")]
    SelfLoop(String),
    #[error("line {line} has non-positive reactance {value}")]
    InvalidReactance { line: String, value: f64 },
    #[error("line {line} has non-positive limit {value}")]
    InvalidLimit { line: String, value: f64 },
    #[error("duplicate line id {0}")]
    DuplicateLine(String),
    #[error("network is disconnected: bus {0} is unreachable from the slack")]
    Disconnected(BusId),
    #[error("reduced susceptance matrix is singular")]
    Singular,
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("dispatch has no entry for bus {0}")]
    MissingInjection(BusId),
    #[error("bus {bus} has a non-finite injection {value}")]
    InvalidInjection { bus: BusId, value: f64 },
    #[error("dispatch is unbalanced by {imbalance_kw} kW")]
    Unbalanced { imbalance_kw: f64 },
    #[error("quantity must be positive, got {0}")]
    NonPositiveQuantity(f64),
    #[error("baseline infeasible, line {line}: flow {flow_kw} kW exceeds limit {limit_kw} kW")]
    InfeasibleBaseline { line: String, flow_kw: f64, limit_kw: f64 },
}

/// Fails on the first line whose absolute flow exceeds its limit by more than
/// `tolerance_kw`.
pub fn check_feasible(network: &Network, flows: &[f64], tolerance_kw: f64) -> Result<(), GridError> {
    for (line, &flow) in network.lines().iter().zip(flows) {
        if flow.abs() > line.limit_kw + tolerance_kw {
            return Err(GridError::InfeasibleBaseline {
                line: line.id.clone(),
                flow_kw: flow,
                limit_kw: line.limit_kw,
            });
        }
    }
    Ok(())
}
