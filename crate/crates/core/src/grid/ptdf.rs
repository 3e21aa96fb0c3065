use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::network::{BusId, DispatchState, Network};
use super::GridError;

/// Entries with a magnitude below this are treated as exactly zero when
/// deciding whether a line constrains a transfer.
pub const SENSITIVITY_EPS: f64 = 1e-9;

/// Power transfer distribution factors, one row per line and one column per bus.
///
/// `entry(l, m)` is the flow on line `l` (positive from `from_bus` to `to_bus`)
/// caused by injecting 1 kW at bus `m` and withdrawing it at the slack bus, so
/// that the flow vector of a dispatch is `PTDF * P`. The slack column is zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtdfMatrix {
    buses: Vec<BusId>,
    line_ids: Vec<String>,
    #[serde(serialize_with = "rows")]
    entries: DMatrix<f64>,
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().copied().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Reduced nodal susceptance matrix (slack row and column removed), inverted,
/// then mapped onto branch flows through the branch susceptances.
pub fn build_ptdf(network: &Network) -> Result<PtdfMatrix, GridError> {
    let buses = network.buses();
    let n = buses.len();
    let slack = network.bus_index(network.slack_bus()).expect("validated slack");

    // position in the reduced system, None for the slack
    let reduced: Vec<Option<usize>> = (0..n)
        .map(|i| match i.cmp(&slack) {
            std::cmp::Ordering::Less => Some(i),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(i - 1),
        })
        .collect();

    let mut b_red = DMatrix::<f64>::zeros(n - 1, n - 1);
    let endpoints: Vec<(usize, usize)> = network
        .lines()
        .iter()
        .map(|l| {
            (
                network.bus_index(l.from_bus).expect("validated endpoint"),
                network.bus_index(l.to_bus).expect("validated endpoint"),
            )
        })
        .collect();
    for (line, &(i, j)) in network.lines().iter().zip(&endpoints) {
        let b = 1.0 / line.reactance;
        if let Some(ri) = reduced[i] {
            b_red[(ri, ri)] += b;
        }
        if let Some(rj) = reduced[j] {
            b_red[(rj, rj)] += b;
        }
        if let (Some(ri), Some(rj)) = (reduced[i], reduced[j]) {
            b_red[(ri, rj)] -= b;
            b_red[(rj, ri)] -= b;
        }
    }

    let x = b_red.cholesky().ok_or(GridError::Singular)?.inverse();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GridError::Singular);
    }

    let mut entries = DMatrix::<f64>::zeros(endpoints.len(), n);
    for (l, (line, &(i, j))) in network.lines().iter().zip(&endpoints).enumerate() {
        for m in 0..n {
            let Some(rm) = reduced[m] else { continue };
            let theta_i = reduced[i].map_or(0.0, |ri| x[(ri, rm)]);
            let theta_j = reduced[j].map_or(0.0, |rj| x[(rj, rm)]);
            entries[(l, m)] = (theta_i - theta_j) / line.reactance;
        }
    }

    Ok(PtdfMatrix {
        buses: buses.to_vec(),
        line_ids: network.lines().iter().map(|l| l.id.clone()).collect(),
        entries,
    })
}

impl PtdfMatrix {
    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    pub fn line_ids(&self) -> &[String] {
        &self.line_ids
    }

    pub fn num_lines(&self) -> usize {
        self.entries.nrows()
    }

    pub fn bus_column(&self, bus: BusId) -> Option<usize> {
        self.buses.iter().position(|&b| b == bus)
    }

    /// Factor of line `line` for an injection at `bus` withdrawn at the slack.
    pub fn entry(&self, line: usize, bus: BusId) -> Option<f64> {
        let col = self.bus_column(bus)?;
        (line < self.num_lines()).then(|| self.entries[(line, col)])
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Line flows in kW for a dispatch, `P_l = sum_m PTDF(l, m) * P_m`.
pub fn line_flows(ptdf: &PtdfMatrix, dispatch: &DispatchState) -> Result<Vec<f64>, GridError> {
    let p: Vec<f64> = ptdf
        .buses
        .iter()
        .map(|&b| dispatch.get(b).ok_or(GridError::MissingInjection(b)))
        .collect::<Result<_, _>>()?;
    let flows = &ptdf.entries * DVector::from_vec(p);
    Ok(flows.iter().copied().collect())
}

/// Change in every line flow per kW injected at one bus and withdrawn at another.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeSensitivity {
    pub inject_bus: BusId,
    pub withdraw_bus: BusId,
    pub alpha: Vec<f64>,
}

impl ExchangeSensitivity {
    /// Flow change on every line for a transfer of `quantity_kw`.
    pub fn flow_delta(&self, quantity_kw: f64) -> Vec<f64> {
        self.alpha.iter().map(|a| a * quantity_kw).collect()
    }
}

/// `alpha(l) = entry(l, inject) - entry(l, withdraw)`; depends only on the
/// topology and reactances.
pub fn exchange_sensitivity(
    ptdf: &PtdfMatrix,
    inject_bus: BusId,
    withdraw_bus: BusId,
) -> Result<ExchangeSensitivity, GridError> {
    let m = ptdf.bus_column(inject_bus).ok_or(GridError::UnknownBus(inject_bus))?;
    let n = ptdf.bus_column(withdraw_bus).ok_or(GridError::UnknownBus(withdraw_bus))?;
    let alpha = if m == n {
        vec![0.0; ptdf.num_lines()]
    } else {
        (0..ptdf.num_lines())
            .map(|l| ptdf.entries[(l, m)] - ptdf.entries[(l, n)])
            .collect()
    };
    Ok(ExchangeSensitivity {
        inject_bus,
        withdraw_bus,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::network::Line;
    use std::collections::BTreeMap;

    fn three_bus() -> (Network, DispatchState) {
        let net = Network::new(
            vec![BusId(1), BusId(2), BusId(3)],
            vec![Line::new(1, 2, 0.1, 60.0), Line::new(2, 3, 0.1, 20.0)],
            BusId(1),
        )
        .unwrap();
        let d = DispatchState::balanced(&net, BTreeMap::from([(BusId(2), -20.0), (BusId(3), -20.0)]), 1e-6).unwrap();
        (net, d)
    }

    #[test]
    fn three_bus_rows_and_flows() {
        let (net, d) = three_bus();
        let ptdf = build_ptdf(&net).unwrap();
        let row: Vec<f64> = (1..=3).map(|b| ptdf.entry(0, BusId(b)).unwrap()).collect();
        for (got, want) in row.iter().zip([0.0, -1.0, -1.0]) {
            assert!((got - want).abs() < 1e-12, "{row:?}");
        }
        let flows = line_flows(&ptdf, &d).unwrap();
        assert!((flows[0] - 40.0).abs() < 1e-9);
        assert!((flows[1] - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zero_dispatch_zero_flows() {
        let (net, _) = three_bus();
        let ptdf = build_ptdf(&net).unwrap();
        let flows = line_flows(&ptdf, &DispatchState::zero(&net)).unwrap();
        assert!(flows.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn missing_injection_is_an_error() {
        let (net, _) = three_bus();
        let ptdf = build_ptdf(&net).unwrap();
        let partial = DispatchState {
            injection_kw: BTreeMap::from([(BusId(1), 0.0)]),
        };
        assert!(matches!(line_flows(&ptdf, &partial), Err(GridError::MissingInjection(BusId(2)))));
    }

    #[test]
    fn three_bus_exchange_sensitivities() {
        let (net, _) = three_bus();
        let ptdf = build_ptdf(&net).unwrap();
        let a = exchange_sensitivity(&ptdf, BusId(2), BusId(1)).unwrap().alpha;
        assert!((a[0] + 1.0).abs() < 1e-12 && a[1].abs() < 1e-12, "{a:?}");
        let a = exchange_sensitivity(&ptdf, BusId(3), BusId(1)).unwrap().alpha;
        assert!((a[0] + 1.0).abs() < 1e-12 && (a[1] + 1.0).abs() < 1e-12, "{a:?}");
        let a = exchange_sensitivity(&ptdf, BusId(2), BusId(2)).unwrap().alpha;
        assert_eq!(a, vec![0.0, 0.0]);
        assert!(matches!(
            exchange_sensitivity(&ptdf, BusId(7), BusId(1)),
            Err(GridError::UnknownBus(BusId(7)))
        ));
    }

    #[test]
    fn meshed_triangle_splits_by_reactance() {
        // equal reactances: injection at 2, withdrawal at slack 1 splits 2/3 direct, 1/3 via 3
        let net = Network::new(
            vec![BusId(1), BusId(2), BusId(3)],
            vec![Line::new(1, 2, 1.0, 10.0), Line::new(2, 3, 1.0, 10.0), Line::new(1, 3, 1.0, 10.0)],
            BusId(1),
        )
        .unwrap();
        let ptdf = build_ptdf(&net).unwrap();
        assert!((ptdf.entry(0, BusId(2)).unwrap() + 2.0 / 3.0).abs() < 1e-12);
        assert!((ptdf.entry(1, BusId(2)).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((ptdf.entry(2, BusId(2)).unwrap() + 1.0 / 3.0).abs() < 1e-12);
    }
}
