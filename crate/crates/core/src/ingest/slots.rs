// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{IngestError, TraceRecord};
use crate::auction::{
    best_eligible_bid_with, group_by_slot, BidTrace, ReceivedBid, RelayFilter, SlotAuction, DEFAULT_R_CUTOFF,
};
use crate::distributions::EmpiricalDistribution;
use crate::timing::{resolve_eligibility, LagModel};
use crate::units::{SlotTimeMs, WeiAmount};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub genesis_time_s: u64,
    pub seconds_per_slot: u64,
}

impl Default for ChainConfig {
    /// Ethereum mainnet.
    fn default() -> Self {
        Self {
            genesis_time_s: 1_606_824_023,
            seconds_per_slot: 12,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.seconds_per_slot == 0 {
            return Err(IngestError::MalformedRecord {
                line: 0,
                reason: "seconds_per_slot must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn slot_start_ms(&self, slot: u64) -> i128 {
        (self.genesis_time_s as i128 + slot as i128 * self.seconds_per_slot as i128) * 1_000
    }

    /// Slot-relative time, or `None` outside [-12000, 12000] ms.
    pub fn relative(&self, slot: u64, epoch_ms: u64) -> Option<SlotTimeMs> {
        let rel = epoch_ms as i128 - self.slot_start_ms(slot);
        i64::try_from(rel).ok().and_then(|ms| SlotTimeMs::new(ms).ok())
    }
}

/// Result of grouping trace records by slot.
///
/// `bids + unresolved.len() + dropped + duplicates` equals the number of
/// input records.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    /// Auctions built from records that carry an eligibility time.
    pub auctions: Vec<SlotAuction>,
    /// Records without an eligibility time, slot-relative.
    pub unresolved: Vec<ReceivedBid>,
    /// Out of the slot window, or failing bid validation.
    pub dropped: usize,
    pub duplicates: usize,
}

impl IngestOutcome {
    pub fn resolved_bids(&self) -> usize {
        self.auctions.iter().map(|a| a.len()).sum()
    }

    pub fn total(&self) -> usize {
        self.resolved_bids() + self.unresolved.len() + self.dropped + self.duplicates
    }
}

// slot, relay, builder, received ms, eligible ms, value, hash
type DedupeKey<'a> = (u64, &'a str, &'a str, u64, Option<u64>, WeiAmount, Option<&'a str>);

/// Groups records into per-slot auctions. Times are truncated to whole ms
/// relative to the slot start.
pub fn to_auctions(records: &[TraceRecord], chain: &ChainConfig) -> Result<IngestOutcome, IngestError> {
    chain.validate()?;
    let mut seen: HashSet<DedupeKey> = HashSet::new();
    let mut resolved = Vec::new();
    let mut unresolved = Vec::new();
    let (mut dropped, mut duplicates) = (0, 0);
    for r in records {
        let Some(received_at) = chain.relative(r.slot, r.timestamp_ms) else {
            dropped += 1;
            continue;
        };
        let eligible_at = match r.eligible_ms {
            None => None,
            Some(e) => match chain.relative(r.slot, e) {
                Some(t) => Some(t),
                None => {
                    dropped += 1;
                    continue;
                }
            },
        };
        let key = (
            r.slot,
            r.relay.as_str(),
            r.builder_pubkey.as_str(),
            r.timestamp_ms,
            r.eligible_ms,
            r.value,
            r.block_hash.as_deref(),
        );
        if !seen.insert(key) {
            duplicates += 1;
            continue;
        }
        let received = ReceivedBid {
            slot: r.slot,
            relay_id: r.relay.clone(),
            builder_id: r.builder_pubkey.clone(),
            received_at,
            value: r.value,
            gas_used: r.gas_used,
            tx_count: r.num_tx as u64,
            block_hash: r.block_hash.clone(),
        };
        match eligible_at {
            Some(t) => {
                let bid = received.with_eligibility(t);
                if bid.validate().is_ok() {
                    resolved.push(bid);
                } else {
                    dropped += 1;
                }
            }
            None => unresolved.push(received),
        }
    }
    let auctions = group_by_slot(resolved).expect("bids validated and grouped by slot");
    Ok(IngestOutcome {
        auctions,
        unresolved,
        dropped,
        duplicates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedAuctions {
    pub auctions: Vec<SlotAuction>,
    /// Bids whose eligibility came from the lag model.
    pub synthesized: usize,
    pub dropped: usize,
    pub duplicates: usize,
}

/// Gives unresolved bids an eligibility time from `lags` and merges them
/// into the auctions. Bids whose synthesized time fails validation are
/// counted as dropped.
pub fn build_auctions(outcome: IngestOutcome, lags: &LagModel, seed: u64) -> Result<LoadedAuctions, IngestError> {
    let IngestOutcome {
        auctions,
        unresolved,
        mut dropped,
        duplicates,
    } = outcome;
    if unresolved.is_empty() {
        return Ok(LoadedAuctions {
            auctions,
            synthesized: 0,
            dropped,
            duplicates,
        });
    }
    let synthesized = resolve_eligibility(unresolved, lags, seed)?;
    let mut bids: Vec<BidTrace> = auctions.into_iter().flat_map(|a| a.bids().to_vec()).collect();
    let mut added = 0;
    for b in synthesized {
        if b.validate().is_ok() {
            bids.push(b);
            added += 1;
        } else {
            dropped += 1;
        }
    }
    let auctions = group_by_slot(bids).expect("bids validated and grouped by slot");
    Ok(LoadedAuctions {
        auctions,
        synthesized: added,
        dropped,
        duplicates,
    })
}

/// The bid that won each slot. With a delivered hash for the slot, the
/// earliest-eligible trace carrying that hash; otherwise, or when no trace
/// matches, the highest bid eligible by 2000 ms. Slots with neither are
/// left out.
pub fn winning_bids<'a>(auctions: &'a [SlotAuction], delivered: Option<&BTreeMap<u64, String>>) -> Vec<&'a BidTrace> {
    auctions
        .iter()
        .filter_map(|a| {
            let by_hash = delivered.and_then(|d| d.get(&a.slot())).and_then(|hash| {
                a.bids()
                    .iter()
                    .find(|b| b.block_hash.as_deref().is_some_and(|h| h.eq_ignore_ascii_case(hash)))
            });
            by_hash.or_else(|| best_eligible_bid_with(a, &RelayFilter::All, DEFAULT_R_CUTOFF, false))
        })
        .collect()
}

/// ECDF of winners' eligibility times, in ms.
pub fn winning_bid_eligibility_ecdf(
    auctions: &[SlotAuction],
    delivered: Option<&BTreeMap<u64, String>>,
) -> Result<EmpiricalDistribution, IngestError> {
    let samples: Vec<f64> = winning_bids(auctions, delivered)
        .iter()
        .map(|b| b.eligible_at.ms() as f64)
        .collect();
    EmpiricalDistribution::new(samples).map_err(|_| IngestError::EmptyInput)
}

/// ECDF of winners' values, in wei.
pub fn winning_value_ecdf(
    auctions: &[SlotAuction],
    delivered: Option<&BTreeMap<u64, String>>,
) -> Result<EmpiricalDistribution, IngestError> {
    let samples: Vec<f64> = winning_bids(auctions, delivered)
        .iter()
        .map(|b| b.value.wei() as f64)
        .collect();
    EmpiricalDistribution::new(samples).map_err(|_| IngestError::EmptyInput)
}
