// SPDX-License-Identifier: Apache-2.0

//! Per-slot builder auctions reconstructed from relay bid traces.

mod curve;

pub use curve::{
    binned_quantile_curve, binned_quantile_curve_by, Abscissa, BinnedCurve, CurveBin, CurveSpec, Ordinate,
};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{Fraction, SlotTimeMs, UnitsError, WeiAmount};

/// Execution-layer block gas limit.
pub const BLOCK_GAS_LIMIT: u64 = 30_000_000;

/// Bids made eligible after this point are left out of the R denominator.
pub const DEFAULT_R_CUTOFF: SlotTimeMs = SlotTimeMs::from_ms(2_000);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AuctionError {
    #[error("no bid eligible by {0}")]
    NoEligibleBids(SlotTimeMs),
    #[error("bid is not part of this auction")]
    BidNotInAuction,
    #[error("bid eligible at {eligible} is after the cutoff {cutoff}")]
    BidAfterCutoff { eligible: SlotTimeMs, cutoff: SlotTimeMs },
    #[error("bid for slot {found} in auction for slot {expected}")]
    SlotMismatch { expected: u64, found: u64 },
    #[error("invalid bid: {0}")]
    InvalidBid(String),
    #[error("empty input")]
    EmptyInput,
    #[error("bin width must be positive, got {0}")]
    InvalidBinWidth(i64),
    #[error(transparent)]
    Units(#[from] UnitsError),
}

/// One builder bid as logged by one relay.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BidTrace {
    pub slot: u64,
    pub relay_id: String,
    /// Builder public key, hex.
    pub builder_id: String,
    pub received_at: SlotTimeMs,
    pub eligible_at: SlotTimeMs,
    pub value: WeiAmount,
    pub gas_used: u64,
    pub tx_count: u64,
    pub block_hash: Option<String>,
}

impl BidTrace {
    pub fn validate(&self) -> Result<(), AuctionError> {
        if self.eligible_at < self.received_at {
            return Err(AuctionError::InvalidBid(format!(
                "eligible_at {} precedes received_at {}",
                self.eligible_at, self.received_at
            )));
        }
        if self.gas_used > BLOCK_GAS_LIMIT {
            return Err(AuctionError::InvalidBid(format!(
                "gas_used {} above block limit {BLOCK_GAS_LIMIT}",
                self.gas_used
            )));
        }
        Ok(())
    }
}

/// A bid whose eligibility time is not known yet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReceivedBid {
    pub slot: u64,
    pub relay_id: String,
    pub builder_id: String,
    pub received_at: SlotTimeMs,
    pub value: WeiAmount,
    pub gas_used: u64,
    pub tx_count: u64,
    pub block_hash: Option<String>,
}

impl ReceivedBid {
    pub fn with_eligibility(self, eligible_at: SlotTimeMs) -> BidTrace {
        BidTrace {
            slot: self.slot,
            relay_id: self.relay_id,
            builder_id: self.builder_id,
            received_at: self.received_at,
            eligible_at,
            value: self.value,
            gas_used: self.gas_used,
            tx_count: self.tx_count,
            block_hash: self.block_hash,
        }
    }
}

/// Groups bids into one auction per slot, ascending by slot.
pub fn group_by_slot(bids: impl IntoIterator<Item = BidTrace>) -> Result<Vec<SlotAuction>, AuctionError> {
    let mut by_slot: BTreeMap<u64, Vec<BidTrace>> = BTreeMap::new();
    for b in bids {
        by_slot.entry(b.slot).or_default().push(b);
    }
    by_slot
        .into_iter()
        .map(|(slot, bids)| SlotAuction::new(slot, bids))
        .collect()
}

// Auction storage order: eligibility ascending, then value descending, then
// builder. Relay and receive time only make the order total.
fn storage_order(a: &BidTrace, b: &BidTrace) -> Ordering {
    a.eligible_at
        .cmp(&b.eligible_at)
        .then_with(|| b.value.cmp(&a.value))
        .then_with(|| a.builder_id.cmp(&b.builder_id))
        .then_with(|| a.relay_id.cmp(&b.relay_id))
        .then_with(|| a.received_at.cmp(&b.received_at))
        .then_with(|| a.block_hash.cmp(&b.block_hash))
}

/// `Less` means `a` is the preferred winner: higher value, then earlier
/// eligibility, then lower builder id.
pub fn selection_order(a: &BidTrace, b: &BidTrace) -> Ordering {
    b.value
        .cmp(&a.value)
        .then_with(|| a.eligible_at.cmp(&b.eligible_at))
        .then_with(|| a.builder_id.cmp(&b.builder_id))
        .then_with(|| a.relay_id.cmp(&b.relay_id))
        .then_with(|| a.received_at.cmp(&b.received_at))
}

/// All bids for one slot, kept in storage order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAuction {
    slot: u64,
    bids: Vec<BidTrace>,
    supersede: bool,
}

impl SlotAuction {
    pub fn empty(slot: u64) -> Self {
        Self {
            slot,
            bids: Vec::new(),
            supersede: false,
        }
    }

    pub fn new(slot: u64, bids: Vec<BidTrace>) -> Result<Self, AuctionError> {
        for b in &bids {
            if b.slot != slot {
                return Err(AuctionError::SlotMismatch {
                    expected: slot,
                    found: b.slot,
                });
            }
            b.validate()?;
        }
        let mut bids = bids;
        bids.sort_by(storage_order);
        Ok(Self {
            slot,
            bids,
            supersede: false,
        })
    }

    /// Infers the slot from the first bid.
    pub fn from_bids(bids: Vec<BidTrace>) -> Result<Self, AuctionError> {
        let slot = bids.first().ok_or(AuctionError::EmptyInput)?.slot;
        Self::new(slot, bids)
    }

    pub fn insert(&mut self, bid: BidTrace) -> Result<(), AuctionError> {
        if bid.slot != self.slot {
            return Err(AuctionError::SlotMismatch {
                expected: self.slot,
                found: bid.slot,
            });
        }
        bid.validate()?;
        let at = self
            .bids
            .partition_point(|b| storage_order(b, &bid) != Ordering::Greater);
        self.bids.insert(at, bid);
        Ok(())
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn bids(&self) -> &[BidTrace] {
        &self.bids
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    pub fn supersede(&self) -> bool {
        self.supersede
    }

    pub fn with_supersede(mut self, on: bool) -> Self {
        self.supersede = on;
        self
    }

    pub fn contains(&self, bid: &BidTrace) -> bool {
        self.bids.binary_search_by(|b| storage_order(b, bid)).is_ok()
    }

    /// Bids eligible at or before `t`, in storage order.
    pub fn eligible_by(&self, t: SlotTimeMs) -> &[BidTrace] {
        let end = self.bids.partition_point(|b| b.eligible_at <= t);
        &self.bids[..end]
    }

    /// Largest value among bids eligible by `cutoff`.
    pub fn max_value_by(&self, cutoff: SlotTimeMs) -> Option<WeiAmount> {
        self.eligible_by(cutoff).iter().map(|b| b.value).max()
    }
}

/// Marks the auction so that selection only sees each builder's most recent
/// eligible bid per relay. Later bids cancel earlier ones even when lower.
pub fn supersede_by_builder(auction: &SlotAuction) -> SlotAuction {
    auction.clone().with_supersede(true)
}

/// Relays whose bids a query may see.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum RelayFilter {
    #[default]
    All,
    Only(BTreeSet<String>),
}

impl RelayFilter {
    pub fn only<I, S>(relays: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        RelayFilter::Only(relays.into_iter().map(Into::into).collect())
    }

    pub fn admits(&self, relay_id: &str) -> bool {
        match self {
            RelayFilter::All => true,
            RelayFilter::Only(set) => set.contains(relay_id),
        }
    }
}

/// The bid a proposer querying at `query_time` would receive: the highest
/// value among admitted bids eligible by then. Ties go to the earliest
/// eligibility, then the lowest builder id.
///
/// With the supersede flag on, only each (relay, builder) pair's latest
/// eligible bid is live.
pub fn best_eligible_bid<'a>(
    auction: &'a SlotAuction,
    relays: &RelayFilter,
    query_time: SlotTimeMs,
) -> Option<&'a BidTrace> {
    best_eligible_bid_with(auction, relays, query_time, auction.supersede)
}

/// [`best_eligible_bid`] with the supersede mode given explicitly rather
/// than read from the auction.
pub fn best_eligible_bid_with<'a>(
    auction: &'a SlotAuction,
    relays: &RelayFilter,
    query_time: SlotTimeMs,
    supersede: bool,
) -> Option<&'a BidTrace> {
    let candidates = auction
        .eligible_by(query_time)
        .iter()
        .filter(|b| relays.admits(&b.relay_id));
    if !supersede {
        return candidates.min_by(|a, b| selection_order(a, b));
    }
    let mut live: HashMap<(&str, &str), &BidTrace> = HashMap::new();
    for bid in candidates {
        live.entry((bid.relay_id.as_str(), bid.builder_id.as_str()))
            .and_modify(|cur| {
                if (bid.eligible_at, bid.received_at) >= (cur.eligible_at, cur.received_at) {
                    *cur = bid;
                }
            })
            .or_insert(bid);
    }
    live.into_values().min_by(|a, b| selection_order(a, b))
}

/// A bid's value relative to the best bid eligible by the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RValue(Ratio<u128>);

impl RValue {
    pub fn ratio(&self) -> Ratio<u128> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }

    pub fn to_fraction(&self) -> Result<Fraction, UnitsError> {
        let n = i128::try_from(*self.0.numer()).map_err(|_| UnitsError::Overflow)?;
        let d = i128::try_from(*self.0.denom()).map_err(|_| UnitsError::Overflow)?;
        Ok(Fraction::new(n, d))
    }
}

/// Normalised bid value: `bid.value / max { b.value : b.eligible_at <= cutoff }`.
///
/// The bid itself must be eligible by the cutoff, which keeps the ratio in
/// `[0, 1]`. If every eligible bid is worth zero the ratio is 1.
pub fn compute_r(bid: &BidTrace, auction: &SlotAuction, cutoff: SlotTimeMs) -> Result<RValue, AuctionError> {
    if !auction.contains(bid) {
        return Err(AuctionError::BidNotInAuction);
    }
    let max = auction
        .max_value_by(cutoff)
        .ok_or(AuctionError::NoEligibleBids(cutoff))?;
    if bid.eligible_at > cutoff {
        return Err(AuctionError::BidAfterCutoff {
            eligible: bid.eligible_at,
            cutoff,
        });
    }
    if max.is_zero() {
        return Ok(RValue(Ratio::from_integer(1)));
    }
    Ok(RValue(Ratio::new(bid.value.wei(), max.wei())))
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn bid(builder: &str, relay: &str, eligible_ms: i64, value_wei: u128) -> BidTrace {
        BidTrace {
            slot: 1,
            relay_id: relay.to_string(),
            builder_id: builder.to_string(),
            received_at: SlotTimeMs::new(eligible_ms).unwrap(),
            eligible_at: SlotTimeMs::new(eligible_ms).unwrap(),
            value: WeiAmount::from_wei(value_wei),
            gas_used: 15_000_000,
            tx_count: 100,
            block_hash: None,
        }
    }

    pub fn ms(v: i64) -> SlotTimeMs {
        SlotTimeMs::new(v).unwrap()
    }
}
