use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::grid::{
    build_ptdf, check_feasible, exchange_sensitivity, line_flows, settle_quantity, BusId, DispatchState, Network,
    PtdfMatrix,
};

use super::bid::{price_match, Bid, Conditionality, Side};
use super::book::OrderBook;
use super::policy::{ClearingConfig, CombinationCheck, CombinationSet, CounterpartyOrder};
use super::records::{MatchRecord, Outcome, TradeLogEntry};
use super::MarketError;

/// Matches and log entries produced by one market event.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmitReport {
    pub matches: Vec<MatchRecord>,
    pub log: Vec<TradeLogEntry>,
}

/// Admissible quantity of a candidate transfer under the active policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleQuantity {
    pub quantity_kw: f64,
    /// Lines that cut the quantity below the requested one.
    pub binding_lines: Vec<String>,
}

/// Continuous clearing engine: a single-writer state machine over an
/// [`OrderBook`] on a fixed network.
#[derive(Debug, Clone)]
pub struct Market {
    network: Arc<Network>,
    ptdf: Arc<PtdfMatrix>,
    config: ClearingConfig,
    book: OrderBook,
    log: Vec<TradeLogEntry>,
}

impl Market {
    /// Opens an empty book on `baseline`, which must cover every bus and
    /// respect every line limit.
    pub fn new(network: Network, baseline: DispatchState, config: ClearingConfig) -> Result<Self, MarketError> {
        Self::from_book(network, OrderBook::new(baseline), config)
    }

    /// Resumes from a book dump.
    pub fn from_book(network: Network, book: OrderBook, config: ClearingConfig) -> Result<Self, MarketError> {
        config.validate()?;
        let ptdf = build_ptdf(&network)?;
        let flows = line_flows(&ptdf, &book.baseline)?;
        check_feasible(&network, &flows, config.tolerance_kw)?;

        for &bus in book.baseline.injection_kw.keys() {
            if !network.contains(bus) {
                return Err(MarketError::InvalidBook(format!("baseline names unknown bus {bus}")));
            }
        }
        for (side, bids) in [(Side::Offer, &book.offers), (Side::Request, &book.requests)] {
            for bid in bids {
                bid.validate()?;
                if bid.side != side {
                    return Err(MarketError::InvalidBook(format!("bid {} is filed on the wrong side", bid.id)));
                }
                if !network.contains(bid.bus) {
                    return Err(MarketError::UnknownBus {
                        id: bid.id.clone(),
                        bus: bid.bus,
                    });
                }
                if bid.sequence > book.last_sequence || !book.seen_bid_ids.contains(&bid.id) {
                    return Err(MarketError::InvalidBook(format!("bid {} is not accounted for", bid.id)));
                }
            }
        }

        Ok(Market {
            network: Arc::new(network),
            ptdf: Arc::new(ptdf),
            config,
            book,
            log: Vec::new(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn ptdf(&self) -> &PtdfMatrix {
        &self.ptdf
    }

    pub fn config(&self) -> &ClearingConfig {
        &self.config
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn log(&self) -> &[TradeLogEntry] {
        &self.log
    }

    pub fn next_sequence(&self) -> u64 {
        self.book.last_sequence + 1
    }

    /// Current baseline line flows.
    pub fn baseline_flows(&self) -> Vec<f64> {
        line_flows(&self.ptdf, &self.book.baseline).expect("baseline covers every bus")
    }

    /// Submits a bid and clears it against the resting counterparties. The
    /// book is left untouched when an error is returned.
    pub fn submit(&mut self, bid: Bid) -> Result<SubmitReport, MarketError> {
        bid.validate()?;
        if !self.network.contains(bid.bus) {
            return Err(MarketError::UnknownBus { id: bid.id, bus: bid.bus });
        }
        if self.book.seen_bid_ids.contains(&bid.id) {
            return Err(MarketError::DuplicateBid(bid.id));
        }
        if bid.sequence <= self.book.last_sequence {
            return Err(MarketError::NonMonotoneSequence {
                id: bid.id,
                sequence: bid.sequence,
                last: self.book.last_sequence,
            });
        }

        let (book, log_len) = (self.book.clone(), self.log.len());
        let result = self.submit_inner(bid);
        if result.is_err() {
            self.book = book;
            self.log.truncate(log_len);
        }
        result
    }

    fn submit_inner(&mut self, bid: Bid) -> Result<SubmitReport, MarketError> {
        let round = bid.sequence;
        let (side, id) = (bid.side, bid.id.clone());
        self.book.last_sequence = bid.sequence;
        self.book.seen_bid_ids.insert(bid.id.clone());
        self.book.side_mut(side).push(bid);

        let mut report = SubmitReport::default();
        let unconditional = self.match_bid(side, &id, round, false, &mut report)?;
        self.book.purge_exhausted();
        if unconditional {
            self.reevaluate_passes(round, &mut report)?;
        }
        Ok(report)
    }

    /// Re-tries every resting offer against the resting requests until a pass
    /// commits no unconditional match.
    pub fn reevaluate(&mut self) -> Result<SubmitReport, MarketError> {
        let (book, log_len) = (self.book.clone(), self.log.len());
        let mut report = SubmitReport::default();
        let result = self.reevaluate_passes(self.book.last_sequence, &mut report);
        match result {
            Ok(()) => Ok(report),
            Err(e) => {
                self.book = book;
                self.log.truncate(log_len);
                Err(e)
            }
        }
    }

    fn reevaluate_passes(&mut self, round: u64, report: &mut SubmitReport) -> Result<(), MarketError> {
        loop {
            let offers: Vec<String> = self.book.offers.iter().map(|b| b.id.clone()).collect();
            let mut unconditional = false;
            for id in offers {
                if self.book.bid(Side::Offer, &id).is_some_and(|b| b.quantity_kw > 0.0) {
                    unconditional |= self.match_bid(Side::Offer, &id, round, true, report)?;
                }
            }
            self.book.purge_exhausted();
            if !unconditional {
                return Ok(());
            }
        }
    }

    /// Withdraws the unmatched remainder of a live bid.
    pub fn cancel(&mut self, id: &str) -> Result<Bid, MarketError> {
        for side in [Side::Offer, Side::Request] {
            let bids = self.book.side_mut(side);
            if let Some(pos) = bids.iter().position(|b| b.id == id) {
                return Ok(bids.remove(pos));
            }
        }
        Err(MarketError::UnknownBid(id.to_string()))
    }

    /// Baseline plus full activation of the named conditional matches. No
    /// feasibility claim is made about the result.
    pub fn activation_snapshot<S: AsRef<str>>(&self, match_ids: &[S]) -> Result<DispatchState, MarketError> {
        let ids: BTreeSet<&str> = match_ids.iter().map(AsRef::as_ref).collect();
        let mut dispatch = self.book.baseline.clone();
        for id in ids {
            let record = self
                .book
                .matches
                .iter()
                .find(|m| m.id == id)
                .ok_or_else(|| MarketError::UnknownMatch(id.to_string()))?;
            if record.conditionality == Conditionality::Unconditional {
                return Err(MarketError::NotConditional(id.to_string()));
            }
            dispatch.apply_transfer(record.inject_bus, record.withdraw_bus, record.quantity_kw);
        }
        Ok(dispatch)
    }

    /// Largest quantity of an `inject -> withdraw` transfer that keeps every
    /// policy-mandated activation combination line-feasible.
    pub fn check_combination_feasibility(
        &self,
        inject_bus: BusId,
        withdraw_bus: BusId,
        quantity_kw: f64,
    ) -> Result<FeasibleQuantity, MarketError> {
        self.feasible_quantity(inject_bus, withdraw_bus, quantity_kw, false)
    }

    /// With `unconditional`, the transfer becomes part of the baseline, so the
    /// baseline alone is checked whatever the policy.
    fn feasible_quantity(
        &self,
        inject_bus: BusId,
        withdraw_bus: BusId,
        quantity_kw: f64,
        unconditional: bool,
    ) -> Result<FeasibleQuantity, MarketError> {
        let tol = self.config.tolerance_kw;
        let alpha = exchange_sensitivity(&self.ptdf, inject_bus, withdraw_bus)?;
        let base_flows = line_flows(&self.ptdf, &self.book.baseline)?;
        let conditional: Vec<&MatchRecord> = self.book.conditional_matches().collect();
        let member_deltas = conditional
            .iter()
            .map(|m| Ok(exchange_sensitivity(&self.ptdf, m.inject_bus, m.withdraw_bus)?.flow_delta(m.quantity_kw)))
            .collect::<Result<Vec<_>, MarketError>>()?;
        let ids: Vec<&str> = conditional.iter().map(|m| m.id.as_str()).collect();
        let mut set = CombinationSet::for_policy(&self.config.policy, &ids, self.config.max_combinations)?;
        if unconditional {
            set.include_empty();
        }

        let check = CombinationCheck {
            lines: self.network.lines(),
            base_flows: &base_flows,
            member_deltas: &member_deltas,
            alpha: &alpha.alpha,
            requested_kw: quantity_kw,
            tolerance_kw: tol,
        };
        let combined = check.evaluate(&set, self.config.parallel);
        let quantity = settle_quantity(combined.quantity_kw, quantity_kw, tol);
        let binding_lines = if quantity < quantity_kw - tol {
            combined
                .binding_lines
                .iter()
                .map(|&l| self.network.lines()[l].id.clone())
                .collect()
        } else {
            Vec::new()
        };
        Ok(FeasibleQuantity {
            quantity_kw: quantity,
            binding_lines,
        })
    }

    fn ordered_counterparties(&self, incoming: &Bid) -> Vec<String> {
        let mut candidates: Vec<&Bid> = self
            .book
            .side(incoming.side.opposite())
            .iter()
            .filter(|b| b.direction == incoming.direction && b.quantity_kw > 0.0)
            .collect();
        match self.config.order {
            CounterpartyOrder::Fifo => candidates.sort_by_key(|b| b.sequence),
            CounterpartyOrder::BestPrice => candidates.sort_by(|a, b| {
                let by_price = match incoming.side {
                    // an incoming offer wants the highest-paying request
                    Side::Offer => b.price_eur_per_kw.total_cmp(&a.price_eur_per_kw),
                    Side::Request => a.price_eur_per_kw.total_cmp(&b.price_eur_per_kw),
                };
                by_price.then(a.sequence.cmp(&b.sequence))
            }),
        }
        candidates.into_iter().map(|b| b.id.clone()).collect()
    }

    /// Clears one live bid against its counterparties; returns whether an
    /// unconditional request was matched.
    fn match_bid(
        &mut self,
        side: Side,
        id: &str,
        round: u64,
        reevaluation: bool,
        report: &mut SubmitReport,
    ) -> Result<bool, MarketError> {
        let incoming = match self.book.bid(side, id) {
            Some(b) => b.clone(),
            None => return Ok(false),
        };
        let mut unconditional = false;
        for counterparty in self.ordered_counterparties(&incoming) {
            let Some(own) = self.book.bid(side, id).filter(|b| b.quantity_kw > 0.0).cloned() else {
                break;
            };
            let Some(other) = self
                .book
                .bid(side.opposite(), &counterparty)
                .filter(|b| b.quantity_kw > 0.0)
                .cloned()
            else {
                continue;
            };
            let (offer, request) = match side {
                Side::Offer => (own, other),
                Side::Request => (other, own),
            };
            if self.try_pair(&offer, &request, round, reevaluation, report)? && request.is_unconditional_request() {
                unconditional = true;
            }
        }
        Ok(unconditional)
    }

    fn try_pair(
        &mut self,
        offer: &Bid,
        request: &Bid,
        round: u64,
        reevaluation: bool,
        report: &mut SubmitReport,
    ) -> Result<bool, MarketError> {
        let tol = self.config.tolerance_kw;
        let direction = offer.direction;
        let conditionality = request.conditionality.expect("validated request");
        let (inject_bus, withdraw_bus) = direction.transfer(request.bus, offer.bus);
        let requested_kw = offer.quantity_kw.min(request.quantity_kw);
        let mut entry = TradeLogEntry {
            round,
            reevaluation,
            offer_id: offer.id.clone(),
            request_id: request.id.clone(),
            direction,
            inject_bus,
            withdraw_bus,
            conditionality,
            requested_kw,
            quantity_kw: 0.0,
            price_eur_per_kw: None,
            outcome: Outcome::RejectedPrice,
            binding_lines: Vec::new(),
            match_id: None,
        };

        if offer.price_eur_per_kw > request.price_eur_per_kw {
            // prices never change, so re-evaluation does not repeat these
            if !reevaluation {
                self.push_log(entry, report);
            }
            return Ok(false);
        }

        let feasible = self.feasible_quantity(
            inject_bus,
            withdraw_bus,
            requested_kw,
            conditionality == Conditionality::Unconditional,
        )?;
        entry.binding_lines = feasible.binding_lines;
        if feasible.quantity_kw <= 0.0 {
            entry.outcome = Outcome::RejectedCongestion;
            self.push_log(entry, report);
            return Ok(false);
        }

        let quantity = feasible.quantity_kw;
        let price = price_match(offer, request)?;
        let record = MatchRecord {
            id: format!("m{}", self.book.matches.len() + 1),
            offer_id: offer.id.clone(),
            request_id: request.id.clone(),
            direction,
            inject_bus,
            withdraw_bus,
            quantity_kw: quantity,
            price_eur_per_kw: price,
            conditionality,
            round,
        };
        for (side, id) in [(Side::Offer, &offer.id), (Side::Request, &request.id)] {
            let bid = self.book.bid_mut(side, id).expect("live bid");
            bid.quantity_kw -= quantity;
            if bid.quantity_kw < tol {
                bid.quantity_kw = 0.0;
            }
        }
        if conditionality == Conditionality::Unconditional {
            self.book.baseline.apply_transfer(inject_bus, withdraw_bus, quantity);
        }

        entry.quantity_kw = quantity;
        entry.price_eur_per_kw = Some(price);
        entry.match_id = Some(record.id.clone());
        entry.outcome = if quantity >= requested_kw - tol {
            Outcome::Matched
        } else {
            Outcome::PartialCongestion
        };
        self.book.matches.push(record.clone());
        report.matches.push(record);
        self.push_log(entry, report);
        Ok(true)
    }

    fn push_log(&mut self, entry: TradeLogEntry, report: &mut SubmitReport) {
        self.log.push(entry.clone());
        report.log.push(entry);
    }
}
