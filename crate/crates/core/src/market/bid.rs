use serde::{Deserialize, Serialize};

use crate::grid::{BusId, Direction};

use super::MarketError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Offer,
    Request,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Offer => Side::Request,
            Side::Request => Side::Offer,
        }
    }
}

/// Whether a request is certain to be activated in real time. Unconditional
/// matches are folded into the baseline dispatch when they clear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Conditionality {
    Conditional,
    Unconditional,
}

/// A bid as submitted: one record of a bid stream or one API call. The
/// arrival sequence is assigned by whoever orders the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BidRecord {
    pub id: String,
    pub side: Side,
    pub direction: Direction,
    pub bus: BusId,
    pub quantity_kw: f64,
    pub price_eur_per_kw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditionality: Option<Conditionality>,
}

impl BidRecord {
    pub fn into_bid(self, sequence: u64) -> Result<Bid, MarketError> {
        let bid = Bid {
            id: self.id,
            side: self.side,
            direction: self.direction,
            bus: self.bus,
            quantity_kw: self.quantity_kw,
            price_eur_per_kw: self.price_eur_per_kw,
            conditionality: self.conditionality,
            sequence,
        };
        bid.validate()?;
        Ok(bid)
    }
}

impl From<Bid> for BidRecord {
    fn from(b: Bid) -> Self {
        BidRecord {
            id: b.id,
            side: b.side,
            direction: b.direction,
            bus: b.bus,
            quantity_kw: b.quantity_kw,
            price_eur_per_kw: b.price_eur_per_kw,
            conditionality: b.conditionality,
        }
    }
}

/// A live bid. `quantity_kw` is the remaining, not-yet-matched quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bid {
    pub id: String,
    pub side: Side,
    pub direction: Direction,
    pub bus: BusId,
    pub quantity_kw: f64,
    pub price_eur_per_kw: f64,
    /// Present on requests only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditionality: Option<Conditionality>,
    pub sequence: u64,
}

impl Bid {
    pub fn offer(id: impl Into<String>, direction: Direction, bus: u32, quantity_kw: f64, price: f64) -> Self {
        Bid {
            id: id.into(),
            side: Side::Offer,
            direction,
            bus: BusId(bus),
            quantity_kw,
            price_eur_per_kw: price,
            conditionality: None,
            sequence: 0,
        }
    }

    pub fn request(
        id: impl Into<String>,
        direction: Direction,
        bus: u32,
        quantity_kw: f64,
        price: f64,
        conditionality: Conditionality,
    ) -> Self {
        Bid {
            id: id.into(),
            side: Side::Request,
            direction,
            bus: BusId(bus),
            quantity_kw,
            price_eur_per_kw: price,
            conditionality: Some(conditionality),
            sequence: 0,
        }
    }

    pub fn with_sequence(mut self, sequence: u64) -> Self {
        self.sequence = sequence;
        self
    }

    pub fn validate(&self) -> Result<(), MarketError> {
        if self.id.trim().is_empty() {
            return Err(MarketError::InvalidBid {
                id: self.id.clone(),
                reason: "empty id".into(),
            });
        }
        if !self.quantity_kw.is_finite() || self.quantity_kw <= 0.0 {
            return Err(MarketError::NonPositiveQuantity {
                id: self.id.clone(),
                quantity_kw: self.quantity_kw,
            });
        }
        if !self.price_eur_per_kw.is_finite() || self.price_eur_per_kw < 0.0 {
            return Err(MarketError::InvalidBid {
                id: self.id.clone(),
                reason: format!("price {} must be a finite non-negative number", self.price_eur_per_kw),
            });
        }
        match (self.side, self.conditionality) {
            (Side::Request, None) => Err(MarketError::InvalidBid {
                id: self.id.clone(),
                reason: "requests must state conditionality".into(),
            }),
            (Side::Offer, Some(_)) => Err(MarketError::InvalidBid {
                id: self.id.clone(),
                reason: "offers carry no conditionality".into(),
            }),
            _ => Ok(()),
        }
    }

    pub fn is_unconditional_request(&self) -> bool {
        self.conditionality == Some(Conditionality::Unconditional)
    }
}

/// Pay-as-bid price of a matched pair: the price of whichever bid arrived
/// first. Fails unless one bid is an offer, the other a request, and the
/// request price covers the offer price.
pub fn price_match(a: &Bid, b: &Bid) -> Result<f64, MarketError> {
    let (offer, request) = match (a.side, b.side) {
        (Side::Offer, Side::Request) => (a, b),
        (Side::Request, Side::Offer) => (b, a),
        _ => {
            return Err(MarketError::InvalidBid {
                id: b.id.clone(),
                reason: format!("{} and {} are on the same side", a.id, b.id),
            })
        }
    };
    if offer.price_eur_per_kw > request.price_eur_per_kw {
        return Err(MarketError::IncompatiblePrices {
            offer: offer.id.clone(),
            request: request.id.clone(),
        });
    }
    let first = if a.sequence <= b.sequence { a } else { b };
    Ok(first.price_eur_per_kw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn earlier_request_sets_price() {
        let req1 = Bid::request("req1", Direction::Up, 13, 30.0, 0.042, Conditionality::Unconditional).with_sequence(1);
        let offer1 = Bid::offer("offer1", Direction::Up, 14, 30.0, 0.035).with_sequence(7);
        assert_eq!(price_match(&req1, &offer1).unwrap(), 0.042);
        assert_eq!(price_match(&offer1, &req1).unwrap(), 0.042);
    }

    #[test]
    fn earlier_offer_sets_price() {
        let offer = Bid::offer("o", Direction::Down, 8, 40.0, 0.033).with_sequence(1);
        let req = Bid::request("r", Direction::Down, 5, 10.0, 0.040, Conditionality::Conditional).with_sequence(2);
        assert_eq!(price_match(&offer, &req).unwrap(), 0.033);
    }

    #[test]
    fn equal_prices() {
        let offer = Bid::offer("o", Direction::Down, 8, 40.0, 0.04).with_sequence(2);
        let req = Bid::request("r", Direction::Down, 5, 10.0, 0.04, Conditionality::Conditional).with_sequence(1);
        assert_eq!(price_match(&offer, &req).unwrap(), 0.04);
    }

    #[test]
    fn incompatible_prices() {
        let offer = Bid::offer("o", Direction::Up, 1, 1.0, 0.05).with_sequence(1);
        let req = Bid::request("r", Direction::Up, 2, 1.0, 0.04, Conditionality::Conditional).with_sequence(2);
        assert!(matches!(price_match(&offer, &req), Err(MarketError::IncompatiblePrices { .. })));
    }

    #[test]
    fn validation() {
        let zero = Bid::offer("o", Direction::Up, 1, 0.0, 0.05);
        assert!(matches!(zero.validate(), Err(MarketError::NonPositiveQuantity { .. })));
        let mut req = Bid::request("r", Direction::Up, 2, 1.0, 0.04, Conditionality::Conditional);
        req.conditionality = None;
        assert!(req.validate().is_err());
        let mut offer = Bid::offer("o", Direction::Up, 1, 1.0, 0.05);
        offer.conditionality = Some(Conditionality::Conditional);
        assert!(offer.validate().is_err());
        let negative_price = Bid::offer("o", Direction::Up, 1, 1.0, -0.01);
        assert!(negative_price.validate().is_err());
    }
}
