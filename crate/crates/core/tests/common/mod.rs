#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use flexmarket_core::grid::{BusId, Direction, DispatchState, Line, Network};
use flexmarket_core::market::{Bid, Conditionality, MatchRecord, Side};
use flexmarket_core::oracle::dc_solve;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Random connected network with buses 1..=n, a random slack, a random
/// spanning tree and `extra` additional lines. Limits are infinite.
pub fn random_topology(rng: &mut ChaCha8Rng, n: usize, extra: usize) -> Network {
    let buses: Vec<BusId> = (1..=n as u32).map(BusId).collect();
    let mut order = buses.clone();
    order.shuffle(rng);
    let mut pairs: Vec<(BusId, BusId)> = Vec::new();
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        pairs.push(orient(rng, parent, order[i]));
    }
    let mut attempts = 0;
    while pairs.len() < n - 1 + extra && attempts < 50 {
        attempts += 1;
        let a = buses[rng.gen_range(0..n)];
        let b = buses[rng.gen_range(0..n)];
        if a == b || pairs.iter().any(|&(x, y)| (x, y) == (a, b) || (x, y) == (b, a)) {
            continue;
        }
        pairs.push(orient(rng, a, b));
    }
    let lines = pairs
        .into_iter()
        .map(|(a, b)| Line::new(a, b, rng.gen_range(0.05..1.5), f64::INFINITY))
        .collect();
    let slack = buses[rng.gen_range(0..n)];
    Network::new(buses, lines, slack).unwrap()
}

fn orient(rng: &mut ChaCha8Rng, a: BusId, b: BusId) -> (BusId, BusId) {
    if rng.gen_bool(0.5) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Random balanced dispatch with non-slack injections in [-60, 60] kW.
pub fn random_dispatch(rng: &mut ChaCha8Rng, net: &Network) -> DispatchState {
    let partial: BTreeMap<BusId, f64> = net
        .buses()
        .iter()
        .filter(|&&b| b != net.slack_bus())
        .map(|&b| (b, rng.gen_range(-60.0..60.0)))
        .collect();
    DispatchState::balanced(net, partial, 1e-6).unwrap()
}

/// Random network, baseline and limits that leave the baseline feasible with
/// some lines close to their limit.
pub fn random_instance(rng: &mut ChaCha8Rng, max_buses: usize) -> (Network, DispatchState) {
    let n = rng.gen_range(2..=max_buses);
    let extra = if rng.gen_bool(0.5) { rng.gen_range(0..=3) } else { 0 };
    let topo = random_topology(rng, n, extra);
    let baseline = random_dispatch(rng, &topo);
    let flows = dc_solve(&topo, &baseline).unwrap();
    let mut i = 0;
    let net = topo
        .with_limits(|_| {
            let f = flows[i].abs();
            i += 1;
            if rng.gen_bool(0.3) {
                f + rng.gen_range(0.0..5.0) + 1e-3
            } else {
                f * rng.gen_range(1.0..1.5) + rng.gen_range(1.0..40.0)
            }
        })
        .unwrap();
    (net, baseline)
}

/// Random bid stream; arrival order is the vector order.
pub fn random_bids(rng: &mut ChaCha8Rng, net: &Network, count: usize) -> Vec<Bid> {
    let buses = net.buses();
    (0..count)
        .map(|i| {
            let bus = buses[rng.gen_range(0..buses.len())].0;
            let direction = if rng.gen_bool(0.5) { Direction::Up } else { Direction::Down };
            let quantity = (rng.gen_range(1.0..60.0_f64) * 10.0).round() / 10.0;
            let bid = if rng.gen_bool(0.5) {
                let price = rng.gen_range(20..50) as f64 / 1000.0;
                Bid::offer(format!("o{i}"), direction, bus, quantity, price)
            } else {
                let price = rng.gen_range(30..60) as f64 / 1000.0;
                let cond = if rng.gen_bool(0.7) {
                    Conditionality::Conditional
                } else {
                    Conditionality::Unconditional
                };
                Bid::request(format!("r{i}"), direction, bus, quantity, price, cond)
            };
            bid.with_sequence(i as u64 + 1)
        })
        .collect()
}

pub fn violates(net: &Network, flows: &[f64], tol: f64) -> bool {
    net.lines().iter().zip(flows).any(|(l, f)| f.abs() > l.limit_kw + tol)
}

/// Largest q in [0, requested] such that the transfer inject -> withdraw of q
/// kW, on top of every subset of `members` activated in full, keeps all lines
/// within limits. Flows come from the angle-solve oracle; the cap is found by
/// bisection.
pub fn brute_force_cap(
    net: &Network,
    baseline: &DispatchState,
    members: &[(BusId, BusId, f64)],
    inject: BusId,
    withdraw: BusId,
    requested: f64,
) -> f64 {
    let mut subset_flows = Vec::new();
    for mask in 0..1u64 << members.len() {
        let mut d = baseline.clone();
        for (i, &(a, b, q)) in members.iter().enumerate() {
            if mask >> i & 1 == 1 {
                d.apply_transfer(a, b, q);
            }
        }
        subset_flows.push(dc_solve(net, &d).unwrap());
    }
    let mut unit = DispatchState::zero(net);
    unit.apply_transfer(inject, withdraw, 1.0);
    let unit = dc_solve(net, &unit).unwrap();
    // a line already past its limit by rounding dust may not get any worse
    let ok = |q: f64| {
        subset_flows.iter().all(|base| {
            net.lines()
                .iter()
                .zip(base.iter().zip(&unit))
                .all(|(l, (f, u))| (f + u * q).abs() <= l.limit_kw.max(f.abs()) + 1e-9)
        })
    };
    if ok(requested) {
        return requested;
    }
    let (mut lo, mut hi) = (0.0, requested);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[derive(Debug, Clone, PartialEq)]
pub enum RefEvent {
    Match {
        offer: String,
        request: String,
        quantity: f64,
        price: f64,
        reevaluation: bool,
    },
    Congested {
        offer: String,
        request: String,
        reevaluation: bool,
    },
}

/// Straightforward clearing under the all-combinations policy with FIFO
/// counterparty order: every candidate pair is capped by brute force over all
/// subsets of accepted conditional matches.
pub struct ReferenceMarket {
    pub net: Network,
    pub baseline: DispatchState,
    pub conditional: Vec<(BusId, BusId, f64)>,
    pub offers: Vec<Bid>,
    pub requests: Vec<Bid>,
    pub events: Vec<RefEvent>,
    pub tol: f64,
}

impl ReferenceMarket {
    pub fn new(net: Network, baseline: DispatchState) -> Self {
        ReferenceMarket {
            net,
            baseline,
            conditional: Vec::new(),
            offers: Vec::new(),
            requests: Vec::new(),
            events: Vec::new(),
            tol: 1e-6,
        }
    }

    pub fn run(net: Network, baseline: DispatchState, bids: &[Bid]) -> Self {
        let mut m = ReferenceMarket::new(net, baseline);
        for b in bids {
            m.submit(b.clone());
        }
        m
    }

    pub fn submit(&mut self, bid: Bid) {
        let side = bid.side;
        let id = bid.id.clone();
        match side {
            Side::Offer => self.offers.push(bid),
            Side::Request => self.requests.push(bid),
        }
        let mut unconditional = self.clear(side, &id, false);
        while unconditional {
            unconditional = false;
            let ids: Vec<String> = self.offers.iter().filter(|o| o.quantity_kw > 0.0).map(|o| o.id.clone()).collect();
            for id in ids {
                unconditional |= self.clear(Side::Offer, &id, true);
            }
        }
    }

    fn get(&self, side: Side, id: &str) -> Bid {
        let list = if side == Side::Offer { &self.offers } else { &self.requests };
        list.iter().find(|b| b.id == id).unwrap().clone()
    }

    fn get_mut(&mut self, side: Side, id: &str) -> &mut Bid {
        let list = if side == Side::Offer { &mut self.offers } else { &mut self.requests };
        list.iter_mut().find(|b| b.id == id).unwrap()
    }

    fn clear(&mut self, side: Side, id: &str, reevaluation: bool) -> bool {
        let other_side = if side == Side::Offer { Side::Request } else { Side::Offer };
        let me = self.get(side, id);
        let mut others: Vec<Bid> = if other_side == Side::Offer { &self.offers } else { &self.requests }
            .iter()
            .filter(|b| b.direction == me.direction && b.quantity_kw > 0.0)
            .cloned()
            .collect();
        others.sort_by_key(|b| b.sequence);
        let mut unconditional = false;
        for other in others {
            let me = self.get(side, id);
            if me.quantity_kw <= 0.0 {
                break;
            }
            let (offer, request) = if side == Side::Offer { (me, other) } else { (other, me) };
            if offer.price_eur_per_kw > request.price_eur_per_kw {
                continue;
            }
            let (inject, withdraw) = match offer.direction {
                Direction::Up => (offer.bus, request.bus),
                Direction::Down => (request.bus, offer.bus),
            };
            let requested = offer.quantity_kw.min(request.quantity_kw);
            let cap = brute_force_cap(&self.net, &self.baseline, &self.conditional, inject, withdraw, requested);
            if cap < self.tol {
                self.events.push(RefEvent::Congested {
                    offer: offer.id.clone(),
                    request: request.id.clone(),
                    reevaluation,
                });
                continue;
            }
            // traded quantities live on the tolerance grid
            let q = if requested - cap <= 0.5 * self.tol {
                requested
            } else {
                ((cap / self.tol).round() * self.tol).min(requested)
            };
            let price = if offer.sequence < request.sequence {
                offer.price_eur_per_kw
            } else {
                request.price_eur_per_kw
            };
            for (s, bid_id) in [(Side::Offer, &offer.id), (Side::Request, &request.id)] {
                let tol = self.tol;
                let b = self.get_mut(s, bid_id);
                b.quantity_kw -= q;
                if b.quantity_kw < tol {
                    b.quantity_kw = 0.0;
                }
            }
            if request.conditionality == Some(Conditionality::Unconditional) {
                self.baseline.apply_transfer(inject, withdraw, q);
                unconditional = true;
            } else {
                self.conditional.push((inject, withdraw, q));
            }
            self.events.push(RefEvent::Match {
                offer: offer.id.clone(),
                request: request.id.clone(),
                quantity: q,
                price,
                reevaluation,
            });
        }
        unconditional
    }
}

/// Matches and congestion rejections of an engine trade log in the same
/// shape as the reference events.
pub fn engine_events(log: &[flexmarket_core::market::TradeLogEntry]) -> Vec<RefEvent> {
    use flexmarket_core::market::Outcome;
    log.iter()
        .filter_map(|e| match e.outcome {
            Outcome::Matched | Outcome::PartialCongestion => Some(RefEvent::Match {
                offer: e.offer_id.clone(),
                request: e.request_id.clone(),
                quantity: e.quantity_kw,
                price: e.price_eur_per_kw.unwrap(),
                reevaluation: e.reevaluation,
            }),
            Outcome::RejectedCongestion => Some(RefEvent::Congested {
                offer: e.offer_id.clone(),
                request: e.request_id.clone(),
                reevaluation: e.reevaluation,
            }),
            Outcome::RejectedPrice => None,
        })
        .collect()
}

/// A match smaller than `tol` counts as a congestion rejection: whether a
/// pair lands just above or just below the zero threshold depends on rounding.
fn normalize(events: &[RefEvent], tol: f64) -> Vec<RefEvent> {
    events
        .iter()
        .map(|e| match e {
            RefEvent::Match {
                offer,
                request,
                quantity,
                reevaluation,
                ..
            } if *quantity < tol => RefEvent::Congested {
                offer: offer.clone(),
                request: request.clone(),
                reevaluation: *reevaluation,
            },
            other => other.clone(),
        })
        .collect()
}

/// Event lists agree up to `tol` on quantities.
pub fn events_agree(a: &[RefEvent], b: &[RefEvent], tol: f64) -> bool {
    let (a, b) = (normalize(a, tol), normalize(b, tol));
    a.len() == b.len()
        && a.iter().zip(&b).all(|(x, y)| match (x, y) {
            (
                RefEvent::Match {
                    offer: o1,
                    request: r1,
                    quantity: q1,
                    price: p1,
                    reevaluation: e1,
                },
                RefEvent::Match {
                    offer: o2,
                    request: r2,
                    quantity: q2,
                    price: p2,
                    reevaluation: e2,
                },
            ) => o1 == o2 && r1 == r2 && (q1 - q2).abs() <= tol && p1 == p2 && e1 == e2,
            _ => x == y,
        })
}

pub fn conditional_members(matches: &[MatchRecord]) -> Vec<(BusId, BusId, f64)> {
    matches
        .iter()
        .filter(|m| m.conditionality == Conditionality::Conditional)
        .map(|m| (m.inject_bus, m.withdraw_bus, m.quantity_kw))
        .collect()
}

/// The fifteen-bus replay outcome: (offer, request, kW, price) per match in
/// log order.
pub const FEEDER15_MATCHES: [(&str, &str, f64, f64); 7] = [
    ("offer1", "req1", 30.0, 0.042),
    ("offer2", "req2", 10.0, 0.044),
    ("offer2", "req3", 10.0, 0.041),
    ("offer4", "req4", 20.0, 0.041),
    ("offer5", "req3", 10.0, 0.041),
    ("offer5", "req5", 10.0, 0.040),
    ("offer6", "req6", 30.0, 0.037),
];

/// Offer/request pairs rejected for congestion, in log order.
pub const FEEDER15_CONGESTED: [(&str, &str); 3] = [("offer2", "req5"), ("offer3", "req3"), ("offer3", "req5")];

/// True when `events` show exactly the fifteen-bus outcome pattern.
pub fn feeder15_pattern(events: &[RefEvent]) -> bool {
    let matches: Vec<_> = events
        .iter()
        .filter_map(|e| match e {
            RefEvent::Match {
                offer,
                request,
                quantity,
                price,
                ..
            } => Some((offer.as_str(), request.as_str(), *quantity, *price)),
            _ => None,
        })
        .collect();
    let congested: Vec<_> = events
        .iter()
        .filter_map(|e| match e {
            RefEvent::Congested { offer, request, .. } => Some((offer.as_str(), request.as_str())),
            _ => None,
        })
        .collect();
    matches.len() == FEEDER15_MATCHES.len()
        && matches
            .iter()
            .zip(FEEDER15_MATCHES)
            .all(|(a, b)| a.0 == b.0 && a.1 == b.1 && (a.2 - b.2).abs() <= 1e-6 && a.3 == b.3)
        && congested == FEEDER15_CONGESTED
}
