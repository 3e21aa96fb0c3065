use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use super::GridError;

/// Bus identifier. Accepts integers or numeric strings on input so that it can
/// be used as a map key in TOML and JSON documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for BusId {
    fn from(v: u32) -> Self {
        BusId(v)
    }
}

impl<'de> Deserialize<'de> for BusId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl serde::de::Visitor<'_> for Visitor {
            type Value = BusId;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer bus id")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<BusId, E> {
                u32::try_from(v)
                    .map(BusId)
                    .map_err(|_| E::custom(format!("bus id {v} out of range")))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<BusId, E> {
                u32::try_from(v)
                    .map(BusId)
                    .map_err(|_| E::custom(format!("bus id {v} out of range")))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<BusId, E> {
                v.trim()
                    .parse::<u32>()
                    .map(BusId)
                    .map_err(|_| E::custom(format!("invalid bus id {v:?}")))
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}

/// A branch of the DC network. Positive flow runs from `from_bus` to `to_bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Line {
    /// Defaults to `"{from}-{to}"` when left empty.
    #[serde(default)]
    pub id: String,
    pub from_bus: BusId,
    pub to_bus: BusId,
    /// Series reactance, per unit.
    pub reactance: f64,
    pub limit_kw: f64,
}

impl Line {
    pub fn new(from_bus: impl Into<BusId>, to_bus: impl Into<BusId>, reactance: f64, limit_kw: f64) -> Self {
        Line {
            id: String::new(),
            from_bus: from_bus.into(),
            to_bus: to_bus.into(),
            reactance,
            limit_kw,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkData {
    buses: Vec<BusId>,
    lines: Vec<Line>,
    slack_bus: BusId,
}

/// Validated DC network: connected, no self-loops, positive reactances and limits.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NetworkData", into = "NetworkData")]
pub struct Network {
    buses: Vec<BusId>,
    lines: Vec<Line>,
    slack_bus: BusId,
    index: HashMap<BusId, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses && self.lines == other.lines && self.slack_bus == other.slack_bus
    }
}

impl TryFrom<NetworkData> for Network {
    type Error = GridError;

    fn try_from(data: NetworkData) -> Result<Self, GridError> {
        Network::new(data.buses, data.lines, data.slack_bus)
    }
}

impl From<Network> for NetworkData {
    fn from(n: Network) -> Self {
        NetworkData {
            buses: n.buses,
            lines: n.lines,
            slack_bus: n.slack_bus,
        }
    }
}

impl Network {
    pub fn new(buses: Vec<BusId>, mut lines: Vec<Line>, slack_bus: BusId) -> Result<Self, GridError> {
        let mut index = HashMap::with_capacity(buses.len());
        for (i, &bus) in buses.iter().enumerate() {
            if index.insert(bus, i).is_some() {
                return Err(GridError::DuplicateBus(bus));
            }
        }
        if !index.contains_key(&slack_bus) {
            return Err(GridError::UnknownSlack(slack_bus));
        }
        if lines.is_empty() {
            return Err(GridError::NoLines);
        }

        let mut ids = HashSet::with_capacity(lines.len());
        for line in lines.iter_mut() {
            if line.id.is_empty() {
                line.id = format!("{}-{}", line.from_bus, line.to_bus);
            }
            for bus in [line.from_bus, line.to_bus] {
                if !index.contains_key(&bus) {
                    return Err(GridError::LineEndpoint {
                        line: line.id.clone(),
                        bus,
                    });
                }
            }
            if line.from_bus == line.to_bus {
                return Err(GridError::SelfLoop(line.id.clone()));
            }
            if !(line.reactance > 0.0 && line.reactance.is_finite()) {
                return Err(GridError::InvalidReactance {
                    line: line.id.clone(),
                    value: line.reactance,
                });
            }
            // Infinite limits are allowed: they model an unconstrained branch.
            if line.limit_kw.is_nan() || line.limit_kw <= 0.0 {
                return Err(GridError::InvalidLimit {
                    line: line.id.clone(),
                    value: line.limit_kw,
                });
            }
            if !ids.insert(line.id.clone()) {
                return Err(GridError::DuplicateLine(line.id.clone()));
            }
        }

        let network = Network {
            buses,
            lines,
            slack_bus,
            index,
        };
        network.check_connected()?;
        Ok(network)
    }

    fn check_connected(&self) -> Result<(), GridError> {
        let n = self.buses.len();
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            let (a, b) = (self.index[&line.from_bus], self.index[&line.to_bus]);
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut seen = vec![false; n];
        let start = self.index[&self.slack_bus];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(i) => Err(GridError::Disconnected(self.buses[i])),
            None => Ok(()),
        }
    }

    pub fn buses(&self) -> &[BusId] {
        &self.buses
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn slack_bus(&self) -> BusId {
        self.slack_bus
    }

    pub fn bus_index(&self, bus: BusId) -> Option<usize> {
        self.index.get(&bus).copied()
    }

    pub fn contains(&self, bus: BusId) -> bool {
        self.index.contains_key(&bus)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn is_radial(&self) -> bool {
        self.lines.len() + 1 == self.buses.len()
    }

    /// Copy of the network with every line limit replaced by `limit(line)`.
    pub fn with_limits(&self, mut limit: impl FnMut(&Line) -> f64) -> Result<Self, GridError> {
        let lines = self
            .lines
            .iter()
            .map(|l| Line {
                limit_kw: limit(l),
                ..l.clone()
            })
            .collect();
        Network::new(self.buses.clone(), lines, self.slack_bus)
    }
}

/// Net active-power injection per bus in kW (generation positive, load negative).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DispatchState {
    pub injection_kw: BTreeMap<BusId, f64>,
}

impl DispatchState {
    pub fn zero(network: &Network) -> Self {
        DispatchState {
            injection_kw: network.buses().iter().map(|&b| (b, 0.0)).collect(),
        }
    }

    /// Completes a partial injection map: buses not listed get zero, and the
    /// slack absorbs the imbalance when its own entry is omitted.
    pub fn balanced(network: &Network, partial: BTreeMap<BusId, f64>, tolerance_kw: f64) -> Result<Self, GridError> {
        for (&bus, &p) in &partial {
            if !network.contains(bus) {
                return Err(GridError::UnknownBus(bus));
            }
            if !p.is_finite() {
                return Err(GridError::InvalidInjection { bus, value: p });
            }
        }
        let slack = network.slack_bus();
        let mut injection_kw: BTreeMap<BusId, f64> = network
            .buses()
            .iter()
            .map(|&b| (b, partial.get(&b).copied().unwrap_or(0.0)))
            .collect();
        let others: f64 = injection_kw.iter().filter(|(&b, _)| b != slack).map(|(_, &p)| p).sum();
        match partial.get(&slack) {
            None => {
                injection_kw.insert(slack, -others);
            }
            Some(&p) => {
                let imbalance = p + others;
                if imbalance.abs() > tolerance_kw {
                    return Err(GridError::Unbalanced { imbalance_kw: imbalance });
                }
            }
        }
        Ok(DispatchState { injection_kw })
    }

    pub fn get(&self, bus: BusId) -> Option<f64> {
        self.injection_kw.get(&bus).copied()
    }

    pub fn total_kw(&self) -> f64 {
        self.injection_kw.values().sum()
    }

    /// Injection vector in the network's bus order.
    pub fn to_vector(&self, network: &Network) -> Result<Vec<f64>, GridError> {
        network
            .buses()
            .iter()
            .map(|&b| self.get(b).ok_or(GridError::MissingInjection(b)))
            .collect()
    }

    /// Adds `quantity_kw` of injection at `inject` withdrawn at `withdraw`.
    pub fn apply_transfer(&mut self, inject: BusId, withdraw: BusId, quantity_kw: f64) {
        *self.injection_kw.entry(inject).or_insert(0.0) += quantity_kw;
        *self.injection_kw.entry(withdraw).or_insert(0.0) -= quantity_kw;
    }
}
