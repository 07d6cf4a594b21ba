//! Peer-to-peer energy market: a discrete double auction with
//! price-time-renewable priority, midpoint clearing prices and partial
//! fills, backed by an append-only SHA-256 hash-chained ledger whose
//! canonical JSON payloads make any tampering detectable.
//!
//! Quantities are watt-hours, prices are currency units per watt-hour,
//! times are simulation ticks. This module is deliberately concrete over
//! `f64`: ledger payload bytes are part of its contract.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

/// Market or ledger failure.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MarketError {
    #[error("order field {name} invalid: {reason}")]
    InvalidOrder {
        name: &'static str,
        reason: &'static str,
    },
    #[error("order id {0} already used")]
    DuplicateOrderId(String),
    #[error("order {0} is already past its deadline")]
    ExpiredOnArrival(String),
    #[error("unknown contract {0}")]
    UnknownContract(String),
    #[error("contract {0} is not open")]
    ContractNotOpen(String),
    #[error("delivered energy must be finite and non-negative")]
    InvalidDelivery,
    #[error("ledger line {line} malformed: {reason}")]
    LedgerFormat { line: usize, reason: String },
}

/// Which side of the book an order rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bid,
    Offer,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Bid => "bid",
            Side::Offer => "offer",
        }
    }
}

/// One limit order for energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Order {
    pub id: String,
    pub agent_id: String,
    pub side: Side,
    /// Energy sought or offered, Wh (> 0).
    pub quantity_wh: f64,
    /// Price bound: maximum for bids, minimum for offers (>= 0).
    pub limit_price: f64,
    /// Last tick (inclusive) at which the order may rest or its contracts
    /// may deliver.
    pub deadline: u64,
    /// Offer is sourced from renewable generation (priority tie-break).
    pub renewable: bool,
    pub submitted_tick: u64,
}

impl Order {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        agent_id: impl Into<String>,
        side: Side,
        quantity_wh: f64,
        limit_price: f64,
        deadline: u64,
        renewable: bool,
        submitted_tick: u64,
    ) -> Result<Self, MarketError> {
        let id = id.into();
        let agent_id = agent_id.into();
        if id.is_empty() {
            return Err(MarketError::InvalidOrder {
                name: "id",
                reason: "must not be empty",
            });
        }
        if agent_id.is_empty() {
            return Err(MarketError::InvalidOrder {
                name: "agent_id",
                reason: "must not be empty",
            });
        }
        if !(quantity_wh.is_finite() && quantity_wh > 0.0) {
            return Err(MarketError::InvalidOrder {
                name: "quantity_wh",
                reason: "must be finite and positive",
            });
        }
        if !(limit_price.is_finite() && limit_price >= 0.0) {
            return Err(MarketError::InvalidOrder {
                name: "limit_price",
                reason: "must be finite and non-negative",
            });
        }
        if deadline < submitted_tick {
            return Err(MarketError::InvalidOrder {
                name: "deadline",
                reason: "must not precede the submission tick",
            });
        }
        Ok(Self {
            id,
            agent_id,
            side,
            quantity_wh,
            limit_price,
            deadline,
            renewable,
            submitted_tick,
        })
    }
}

/// Lifecycle state of a matched contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContractStatus {
    Open,
    Fulfilled,
    Expired,
}

impl ContractStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ContractStatus::Open => "open",
            ContractStatus::Fulfilled => "fulfilled",
            ContractStatus::Expired => "expired",
        }
    }
}

/// A matched bid/offer pair with delivery tracking.
#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub id: String,
    pub bid_id: String,
    pub offer_id: String,
    pub bid_agent: String,
    pub offer_agent: String,
    /// Contracted energy, Wh.
    pub quantity_wh: f64,
    /// Midpoint of the two limit prices.
    pub clearing_price: f64,
    pub matched_tick: u64,
    /// Energy credited so far, Wh; never exceeds `quantity_wh`.
    pub delivered_wh: f64,
    pub status: ContractStatus,
    /// Deadline of the buying order (availability accounting).
    pub bid_deadline: u64,
    /// Deadline of the selling order.
    pub offer_deadline: u64,
}

/// Result of crediting delivered energy to a contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeliveryOutcome {
    /// Energy actually credited, Wh.
    pub credited_wh: f64,
    /// Offered energy beyond the remaining contract quantity, Wh.
    pub excess_wh: f64,
    /// Whether this credit completed the contract.
    pub fulfilled: bool,
}

// ---------------------------------------------------------------------------
// Hash-chained ledger
// ---------------------------------------------------------------------------

/// One append-only ledger record. `hash = SHA-256(index as 8 big-endian
/// bytes || previous_hash || payload UTF-8)`; the genesis record has index 0
/// and an all-zero previous hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerRecord {
    pub index: u64,
    pub previous_hash: [u8; 32],
    /// Canonical JSON: keys sorted, no insignificant whitespace, shortest
    /// round-trip numbers.
    pub payload: String,
    pub hash: [u8; 32],
}

fn record_hash(index: u64, previous_hash: &[u8; 32], payload: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(index.to_be_bytes());
    hasher.update(previous_hash);
    hasher.update(payload.as_bytes());
    hasher.finalize().into()
}

/// Append-only hash chain of market events.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ledger {
    records: Vec<LedgerRecord>,
}

/// Serialized form of one ledger record (one JSON object per line).
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LedgerLine {
    hash: String,
    index: u64,
    payload: String,
    previous_hash: String,
}

impl Ledger {
    /// Creates a ledger holding only the genesis record.
    pub fn new() -> Self {
        let mut ledger = Ledger {
            records: Vec::new(),
        };
        ledger.append("{\"event\":\"genesis\"}".to_string());
        ledger
    }

    fn append(&mut self, payload: String) {
        let index = self.records.len() as u64;
        let previous_hash = match self.records.last() {
            Some(prev) => prev.hash,
            None => [0u8; 32],
        };
        let hash = record_hash(index, &previous_hash, &payload);
        self.records.push(LedgerRecord {
            index,
            previous_hash,
            payload,
            hash,
        });
    }

    fn append_event(&mut self, event: serde_json::Value) {
        self.append(serde_json::to_string(&event).expect("event serializes"));
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Renders the ledger as one JSON object per line with hex-encoded
    /// hashes. The output is byte-deterministic.
    pub fn export_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            let line = LedgerLine {
                hash: hex::encode(record.hash),
                index: record.index,
                payload: record.payload.clone(),
                previous_hash: hex::encode(record.previous_hash),
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses the line-delimited export format back into records.
    pub fn parse_jsonl(text: &str) -> Result<Vec<LedgerRecord>, MarketError> {
        let mut records = Vec::new();
        for (number, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let parsed: LedgerLine =
                serde_json::from_str(line).map_err(|e| MarketError::LedgerFormat {
                    line: number + 1,
                    reason: e.to_string(),
                })?;
            let decode = |field: &str, value: &str| -> Result<[u8; 32], MarketError> {
                // Only the canonical lowercase form is accepted: allowing
                // case-insensitive hex would give the same ledger many byte
                // representations, and a byte-level change that still
                // verifies defeats tamper evidence.
                if !value.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
                    return Err(MarketError::LedgerFormat {
                        line: number + 1,
                        reason: format!("{field} is not lowercase hex"),
                    });
                }
                let bytes = hex::decode(value).map_err(|_| MarketError::LedgerFormat {
                    line: number + 1,
                    reason: format!("{field} is not valid hex"),
                })?;
                bytes.try_into().map_err(|_| MarketError::LedgerFormat {
                    line: number + 1,
                    reason: format!("{field} must be 32 bytes"),
                })
            };
            records.push(LedgerRecord {
                hash: decode("hash", &parsed.hash)?,
                index: parsed.index,
                payload: parsed.payload,
                previous_hash: decode("previous_hash", &parsed.previous_hash)?,
            });
        }
        Ok(records)
    }
}

/// True iff every record's hash recomputes from its fields and the chain
/// links each record to its predecessor, starting from a genesis record with
/// index 0 and an all-zero previous hash.
pub fn verify_ledger(records: &[LedgerRecord]) -> bool {
    if records.is_empty() {
        return false;
    }
    let mut expected_prev = [0u8; 32];
    for (i, record) in records.iter().enumerate() {
        if record.index != i as u64
            || record.previous_hash != expected_prev
            || record.hash != record_hash(record.index, &record.previous_hash, &record.payload)
        {
            return false;
        }
        expected_prev = record.hash;
    }
    true
}

// ---------------------------------------------------------------------------
// Order book
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
struct RestingOrder {
    order: Order,
    remaining_wh: f64,
}

/// Orders expired out of the book and contracts expired past both parties'
/// deadlines during one expiry pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpiryOutcome {
    pub expired_orders: Vec<String>,
    pub expired_contracts: Vec<String>,
}

/// Double-auction book, contract registry and event ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    bids: Vec<RestingOrder>,
    offers: Vec<RestingOrder>,
    contracts: BTreeMap<String, Contract>,
    /// Contract ids in creation order (deterministic reporting).
    contract_sequence: Vec<String>,
    ledger: Ledger,
    used_order_ids: BTreeSet<String>,
    next_contract_seq: u64,
}

impl Default for Market {
    fn default() -> Self {
        Self::new()
    }
}

impl Market {
    pub fn new() -> Self {
        Market {
            bids: Vec::new(),
            offers: Vec::new(),
            contracts: BTreeMap::new(),
            contract_sequence: Vec::new(),
            ledger: Ledger::new(),
            used_order_ids: BTreeSet::new(),
            next_contract_seq: 0,
        }
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn contract(&self, id: &str) -> Option<&Contract> {
        self.contracts.get(id)
    }

    /// Contracts in creation order.
    pub fn contracts(&self) -> impl Iterator<Item = &Contract> {
        self.contract_sequence
            .iter()
            .map(|id| &self.contracts[id])
    }

    pub fn resting_bid_count(&self) -> usize {
        self.bids.len()
    }

    pub fn resting_offer_count(&self) -> usize {
        self.offers.len()
    }

    /// Remaining unfilled quantity of a resting order, if it still rests.
    pub fn resting_remaining(&self, order_id: &str) -> Option<f64> {
        self.bids
            .iter()
            .chain(self.offers.iter())
            .find(|r| r.order.id == order_id)
            .map(|r| r.remaining_wh)
    }

    /// Accepts an order into the book. Rejected (leaving the book unchanged)
    /// when the id was ever used before, the order is already past its
    /// deadline at `tick`, or a field is invalid.
    pub fn submit_order(&mut self, order: Order, tick: u64) -> Result<(), MarketError> {
        if self.used_order_ids.contains(&order.id) {
            return Err(MarketError::DuplicateOrderId(order.id));
        }
        if order.deadline < tick {
            return Err(MarketError::ExpiredOnArrival(order.id));
        }
        self.used_order_ids.insert(order.id.clone());
        self.ledger.append_event(serde_json::json!({
            "agent": order.agent_id,
            "deadline": order.deadline,
            "event": "order_submitted",
            "id": order.id,
            "limit_price": order.limit_price,
            "quantity_wh": order.quantity_wh,
            "renewable": order.renewable,
            "side": order.side.as_str(),
            "submitted_tick": order.submitted_tick,
        }));
        let resting = RestingOrder {
            remaining_wh: order.quantity_wh,
            order,
        };
        match resting.order.side {
            Side::Bid => self.bids.push(resting),
            Side::Offer => self.offers.push(resting),
        }
        Ok(())
    }

    fn sort_book(&mut self) {
        // Bids: highest price first, then earlier submission, then id.
        self.bids.sort_by(|a, b| {
            b.order
                .limit_price
                .total_cmp(&a.order.limit_price)
                .then_with(|| a.order.submitted_tick.cmp(&b.order.submitted_tick))
                .then_with(|| a.order.id.cmp(&b.order.id))
        });
        // Offers: lowest price first, then renewable first, then earlier
        // submission, then id.
        self.offers.sort_by(|a, b| {
            a.order
                .limit_price
                .total_cmp(&b.order.limit_price)
                .then_with(|| b.order.renewable.cmp(&a.order.renewable))
                .then_with(|| a.order.submitted_tick.cmp(&b.order.submitted_tick))
                .then_with(|| a.order.id.cmp(&b.order.id))
        });
    }

    /// Runs one clearing pass at `tick`: repeatedly matches the
    /// highest-price bid against the lowest-price feasible offer while the
    /// bid limit is at or above the offer limit. Contracts clear at the
    /// midpoint of the two limits; partially filled orders rest with their
    /// remainder. `feasible(bid_order, offer_order)` gates each candidate
    /// pair.
    pub fn clear<F>(&mut self, feasible: F, tick: u64) -> Vec<Contract>
    where
        F: Fn(&Order, &Order) -> bool,
    {
        self.sort_book();
        let mut contracts = Vec::new();
        for bid_idx in 0..self.bids.len() {
            loop {
                let bid = &self.bids[bid_idx];
                if bid.remaining_wh <= 0.0 {
                    break;
                }
                let candidate = self.offers.iter().position(|offer| {
                    offer.remaining_wh > 0.0
                        && offer.order.limit_price <= bid.order.limit_price
                        && feasible(&bid.order, &offer.order)
                });
                let Some(offer_idx) = candidate else { break };
                let quantity_wh = self.bids[bid_idx]
                    .remaining_wh
                    .min(self.offers[offer_idx].remaining_wh);
                let bid_order = self.bids[bid_idx].order.clone();
                let offer_order = self.offers[offer_idx].order.clone();
                let clearing_price = (bid_order.limit_price + offer_order.limit_price) / 2.0;
                let id = format!("c{}", self.next_contract_seq);
                self.next_contract_seq += 1;
                let contract = Contract {
                    id: id.clone(),
                    bid_id: bid_order.id.clone(),
                    offer_id: offer_order.id.clone(),
                    bid_agent: bid_order.agent_id.clone(),
                    offer_agent: offer_order.agent_id.clone(),
                    quantity_wh,
                    clearing_price,
                    matched_tick: tick,
                    delivered_wh: 0.0,
                    status: ContractStatus::Open,
                    bid_deadline: bid_order.deadline,
                    offer_deadline: offer_order.deadline,
                };
                self.ledger.append_event(serde_json::json!({
                    "bid_agent": contract.bid_agent,
                    "bid_id": contract.bid_id,
                    "clearing_price": contract.clearing_price,
                    "contract_id": contract.id,
                    "event": "contract_matched",
                    "matched_tick": tick,
                    "offer_agent": contract.offer_agent,
                    "offer_id": contract.offer_id,
                    "quantity_wh": contract.quantity_wh,
                }));
                self.bids[bid_idx].remaining_wh -= quantity_wh;
                self.offers[offer_idx].remaining_wh -= quantity_wh;
                self.contracts.insert(id.clone(), contract.clone());
                self.contract_sequence.push(id);
                contracts.push(contract);
            }
        }
        self.bids.retain(|r| r.remaining_wh > 0.0);
        self.offers.retain(|r| r.remaining_wh > 0.0);
        contracts
    }

    /// Removes resting orders whose deadline has passed and expires open
    /// contracts past both parties' deadlines.
    pub fn expire(&mut self, tick: u64) -> ExpiryOutcome {
        let mut outcome = ExpiryOutcome::default();
        let mut expired_events = Vec::new();
        let mut expire_side = |orders: &mut Vec<RestingOrder>| {
            orders.retain(|resting| {
                if resting.order.deadline < tick {
                    expired_events.push((resting.order.id.clone(), resting.remaining_wh));
                    false
                } else {
                    true
                }
            });
        };
        expire_side(&mut self.bids);
        expire_side(&mut self.offers);
        for (order_id, remaining_wh) in expired_events {
            self.ledger.append_event(serde_json::json!({
                "event": "order_expired",
                "order_id": order_id,
                "remaining_wh": remaining_wh,
                "tick": tick,
            }));
            outcome.expired_orders.push(order_id);
        }
        for id in &self.contract_sequence {
            let contract = self.contracts.get_mut(id).expect("sequenced contract");
            if contract.status == ContractStatus::Open
                && contract.bid_deadline.max(contract.offer_deadline) < tick
            {
                contract.status = ContractStatus::Expired;
                self.ledger.append_event(serde_json::json!({
                    "contract_id": contract.id,
                    "delivered_wh": contract.delivered_wh,
                    "event": "contract_expired",
                    "quantity_wh": contract.quantity_wh,
                    "tick": tick,
                }));
                outcome.expired_contracts.push(id.clone());
            }
        }
        outcome
    }

    /// Credits delivered energy to an open contract. Energy beyond the
    /// remaining quantity is reported back as excess; zero-energy deliveries
    /// change nothing and are not logged.
    pub fn record_delivery(
        &mut self,
        contract_id: &str,
        energy_wh: f64,
        tick: u64,
    ) -> Result<DeliveryOutcome, MarketError> {
        if !(energy_wh.is_finite() && energy_wh >= 0.0) {
            return Err(MarketError::InvalidDelivery);
        }
        let contract = self
            .contracts
            .get_mut(contract_id)
            .ok_or_else(|| MarketError::UnknownContract(contract_id.to_string()))?;
        if contract.status != ContractStatus::Open {
            return Err(MarketError::ContractNotOpen(contract_id.to_string()));
        }
        if energy_wh == 0.0 {
            return Ok(DeliveryOutcome {
                credited_wh: 0.0,
                excess_wh: 0.0,
                fulfilled: false,
            });
        }
        let remaining_wh = contract.quantity_wh - contract.delivered_wh;
        let (credited_wh, fulfilled) = if energy_wh >= remaining_wh {
            (remaining_wh, true)
        } else {
            (energy_wh, false)
        };
        if fulfilled {
            contract.delivered_wh = contract.quantity_wh;
            contract.status = ContractStatus::Fulfilled;
        } else {
            contract.delivered_wh += credited_wh;
        }
        let delivered_total = contract.delivered_wh;
        self.ledger.append_event(serde_json::json!({
            "contract_id": contract_id,
            "delivered_total_wh": delivered_total,
            "energy_wh": credited_wh,
            "event": "energy_delivered",
            "tick": tick,
        }));
        Ok(DeliveryOutcome {
            credited_wh,
            excess_wh: energy_wh - credited_wh,
            fulfilled,
        })
    }
}

/// Total surplus of a set of contracts given the limit prices of the orders
/// they matched: `sum((bid_limit - offer_limit) * quantity)`.
pub fn cleared_surplus(contracts: &[Contract], orders: &[Order]) -> f64 {
    let price_of = |id: &str| {
        orders
            .iter()
            .find(|o| o.id == id)
            .map(|o| o.limit_price)
            .unwrap_or(0.0)
    };
    contracts
        .iter()
        .map(|c| (price_of(&c.bid_id) - price_of(&c.offer_id)) * c.quantity_wh)
        .sum()
}
