use serde::{Deserialize, Serialize};

use super::network::{BusId, DispatchState, Line, Network};
use super::ptdf::{exchange_sensitivity, line_flows, PtdfMatrix, SENSITIVITY_EPS};
use super::GridError;

/// Default congestion tolerance and quantity resolution, in kW.
pub const DEFAULT_TOLERANCE_KW: f64 = 1e-6;

/// Upward flexibility raises production or lowers consumption; downward is the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    /// Maps a request/offer pair onto the (inject, withdraw) buses of its
    /// activation. Up: the offer bus injects and the request bus withdraws.
    /// Down: the other way round.
    pub fn transfer(self, request_bus: BusId, offer_bus: BusId) -> (BusId, BusId) {
        match self {
            Direction::Up => (offer_bus, request_bus),
            Direction::Down => (request_bus, offer_bus),
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Up => "up",
            Direction::Down => "down",
        })
    }
}

/// Admissible flow variation on a line around its current flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowHeadroom {
    pub flow_kw: f64,
    /// Largest admissible increase of the from->to flow.
    pub up_margin_kw: f64,
    /// Largest admissible decrease, as a non-positive number on a feasible line.
    pub down_margin_kw: f64,
}

pub fn headroom(line: &Line, flow_kw: f64) -> FlowHeadroom {
    FlowHeadroom {
        flow_kw,
        up_margin_kw: line.limit_kw - flow_kw,
        down_margin_kw: -line.limit_kw - flow_kw,
    }
}

/// Result of capping a transfer against line headroom, before quantity rounding.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferCap {
    pub quantity_kw: f64,
    /// Indices of lines whose cap fell below the requested quantity and within
    /// tolerance of the returned one.
    pub binding_lines: Vec<usize>,
}

/// Caps `quantity_kw` so that `flows + alpha * q` respects every limit for all
/// `q` up to the cap. Lines with negligible sensitivity impose no cap; a line
/// already beyond its limit in the transfer's direction caps at zero.
pub fn transfer_capacity(lines: &[Line], flows: &[f64], alpha: &[f64], quantity_kw: f64, tolerance_kw: f64) -> TransferCap {
    debug_assert_eq!(lines.len(), flows.len());
    debug_assert_eq!(lines.len(), alpha.len());
    let caps: Vec<Option<f64>> = lines
        .iter()
        .zip(flows)
        .zip(alpha)
        .map(|((line, &flow), &a)| {
            if a.abs() <= SENSITIVITY_EPS {
                return None;
            }
            let h = headroom(line, flow);
            let cap = if a > 0.0 { h.up_margin_kw / a } else { h.down_margin_kw / a };
            Some(cap.max(0.0))
        })
        .collect();
    let quantity = caps.iter().flatten().fold(quantity_kw, |q, &c| q.min(c)).max(0.0);
    let binding_lines = caps
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .filter(|&(_, c)| c < quantity_kw - tolerance_kw && c <= quantity + tolerance_kw)
        .map(|(i, _)| i)
        .collect();
    TransferCap {
        quantity_kw: quantity,
        binding_lines,
    }
}

/// Rounds a capped quantity onto the tolerance grid; anything below one
/// tolerance step is zero, and a cap within half a step of the request is the
/// request. Never exceeds `requested_kw`.
pub fn settle_quantity(raw_kw: f64, requested_kw: f64, tolerance_kw: f64) -> f64 {
    if raw_kw < tolerance_kw {
        return 0.0;
    }
    if requested_kw - raw_kw <= 0.5 * tolerance_kw {
        return requested_kw;
    }
    let snapped = (raw_kw / tolerance_kw).round() * tolerance_kw;
    snapped.min(requested_kw)
}

/// Largest quantity that can be exchanged between a request bus and an offer
/// bus without overloading any line, for the given dispatch.
#[allow(clippy::too_many_arguments)]
pub fn max_tradable_quantity(
    network: &Network,
    ptdf: &PtdfMatrix,
    dispatch: &DispatchState,
    request_bus: BusId,
    offer_bus: BusId,
    direction: Direction,
    quantity_kw: f64,
) -> Result<f64, GridError> {
    max_tradable_quantity_with(
        network,
        ptdf,
        dispatch,
        request_bus,
        offer_bus,
        direction,
        quantity_kw,
        DEFAULT_TOLERANCE_KW,
    )
    .map(|cap| cap.quantity_kw)
}

#[allow(clippy::too_many_arguments)]
pub fn max_tradable_quantity_with(
    network: &Network,
    ptdf: &PtdfMatrix,
    dispatch: &DispatchState,
    request_bus: BusId,
    offer_bus: BusId,
    direction: Direction,
    quantity_kw: f64,
    tolerance_kw: f64,
) -> Result<TransferCap, GridError> {
    if !quantity_kw.is_finite() || quantity_kw <= 0.0 {
        return Err(GridError::NonPositiveQuantity(quantity_kw));
    }
    for bus in [request_bus, offer_bus] {
        if !network.contains(bus) {
            return Err(GridError::UnknownBus(bus));
        }
    }
    let (inject, withdraw) = direction.transfer(request_bus, offer_bus);
    let alpha = exchange_sensitivity(ptdf, inject, withdraw)?;
    let flows = line_flows(ptdf, dispatch)?;
    let cap = transfer_capacity(network.lines(), &flows, &alpha.alpha, quantity_kw, tolerance_kw);
    Ok(TransferCap {
        quantity_kw: settle_quantity(cap.quantity_kw, quantity_kw, tolerance_kw),
        binding_lines: cap.binding_lines,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ptdf::build_ptdf;
    use std::collections::BTreeMap;

    fn three_bus() -> (Network, PtdfMatrix, DispatchState) {
        let net = Network::new(
            vec![BusId(1), BusId(2), BusId(3)],
            vec![Line::new(1, 2, 0.1, 60.0), Line::new(2, 3, 0.1, 20.0)],
            BusId(1),
        )
        .unwrap();
        let ptdf = build_ptdf(&net).unwrap();
        let d = DispatchState::balanced(&net, BTreeMap::from([(BusId(2), -20.0), (BusId(3), -20.0)]), 1e-6).unwrap();
        (net, ptdf, d)
    }

    #[test]
    fn headroom_examples() {
        let line = Line::new(2, 3, 0.1, 20.0);
        let h = headroom(&line, 20.0);
        assert_eq!((h.up_margin_kw, h.down_margin_kw), (0.0, -40.0));
        let line = Line::new(1, 2, 0.1, 60.0);
        let h = headroom(&line, 0.0);
        assert_eq!((h.up_margin_kw, h.down_margin_kw), (60.0, -60.0));
        let h = headroom(&line, 40.0);
        assert_eq!((h.up_margin_kw, h.down_margin_kw), (20.0, -100.0));
    }

    #[test]
    fn overloaded_line_gives_negative_margin() {
        let line = Line::new(1, 2, 0.1, 10.0);
        let h = headroom(&line, 12.0);
        assert_eq!(h.up_margin_kw, -2.0);
        let cap = transfer_capacity(&[line], &[12.0], &[1.0], 5.0, 1e-6);
        assert_eq!(cap.quantity_kw, 0.0);
        assert_eq!(cap.binding_lines, vec![0]);
    }

    #[test]
    fn unconditional_first_round_congested() {
        let (net, ptdf, d) = three_bus();
        let cap = max_tradable_quantity_with(&net, &ptdf, &d, BusId(2), BusId(3), Direction::Down, 20.0, 1e-6).unwrap();
        assert_eq!(cap.quantity_kw, 0.0);
        assert_eq!(cap.binding_lines, vec![1]);
    }

    #[test]
    fn unconditional_second_round_full() {
        let (net, ptdf, d) = three_bus();
        let q = max_tradable_quantity(&net, &ptdf, &d, BusId(1), BusId(3), Direction::Up, 30.0).unwrap();
        assert_eq!(q, 30.0);
    }

    #[test]
    fn capped_by_line_1_2() {
        let (net, ptdf, d) = three_bus();
        let q = max_tradable_quantity(&net, &ptdf, &d, BusId(2), BusId(1), Direction::Up, 30.0).unwrap();
        assert_eq!(q, 20.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (net, ptdf, d) = three_bus();
        assert!(matches!(
            max_tradable_quantity(&net, &ptdf, &d, BusId(2), BusId(1), Direction::Up, 0.0),
            Err(GridError::NonPositiveQuantity(_))
        ));
        assert!(matches!(
            max_tradable_quantity(&net, &ptdf, &d, BusId(9), BusId(1), Direction::Up, 1.0),
            Err(GridError::UnknownBus(BusId(9)))
        ));
    }

    #[test]
    fn settle_snaps_and_floors() {
        assert_eq!(settle_quantity(9.999_999_999_999_98, 20.0, 1e-6), 10.0);
        assert_eq!(settle_quantity(4e-7, 20.0, 1e-6), 0.0);
        assert_eq!(settle_quantity(44.1, 44.1, 1e-6), 44.1);
        assert_eq!(settle_quantity(5.000_000_6, 5.000_000_3, 1e-6), 5.000_000_3);
        assert_eq!(settle_quantity(392.541_130_136_840_37, 392.541_130_136_840_37, 1e-6), 392.541_130_136_840_37);
        assert_eq!(settle_quantity(392.541_13, 392.541_130_136_840_37, 1e-6), 392.541_130_136_840_37);
        assert_eq!(settle_quantity(7.25, 392.5, 1e-6), 7.25);
    }
}
