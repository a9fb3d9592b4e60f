// SPDX-License-Identifier: Apache-2.0

//! Synthetic bid-trace corpora with realistic timing structure.
//!
//! Each slot has a base value, a growth amplitude and a gas level drawn from
//! lognormals. Builders bid repeatedly from about three seconds before the
//! slot boundary; a bid received at `t` ms is worth
//! `V * q * exp(-A * exp(-t / tau))`, which rises quickly before the slot
//! starts and flattens during the first second. Gas and transaction count
//! follow the same shape with their own amplitude. The delivered payload of
//! each slot is the last bid made eligible by a time drawn from a quantile
//! sketch of winner eligibility, so delivered winners follow that sketch.

use std::collections::BTreeMap;

use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::auction::{best_eligible_bid_with, selection_order, BidTrace, RelayFilter, SlotAuction};
use crate::distributions::{DistributionError, EmpiricalDistribution, SeededRng};
use crate::ingest::{ChainConfig, DeliveredPayload, TraceRecord};
use crate::units::{SlotTimeMs, WeiAmount, WEI_PER_ETH};

/// A distribution given by a few `(probability, value)` knots. Between knots
/// the quantile function is interpolated geometrically when both values are
/// positive and linearly otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSketch {
    knots: Vec<(f64, f64)>,
}

impl QuantileSketch {
    /// Knots must start at probability 0, end at 1, and increase in both
    /// coordinates.
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, String> {
        if knots.len() < 2 || knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err("knots must span probabilities 0 to 1".into());
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) {
            return Err("knots must increase".into());
        }
        if knots.iter().any(|k| !k.1.is_finite()) {
            return Err("knot values must be finite".into());
        }
        Ok(Self { knots })
    }

    /// Winner eligibility in ms: quartile 74, median 240.5, 95th percentile
    /// 1410, bounded by -100 and 2000.
    pub fn winner_eligibility() -> Self {
        Self::new(vec![
            (0.0, -100.0),
            (0.25, 74.0),
            (0.5, 240.5),
            (0.95, 1_410.0),
            (1.0, 2_000.0),
        ])
        .expect("valid")
    }

    /// Per-block uplift at a 950 ms delay: quartile 0.07%, median 1.28%, 95th
    /// percentile 23.99%, capped at 50%.
    pub fn per_block_uplift() -> Self {
        Self::new(vec![
            (0.0, 0.0),
            (0.25, 0.0007),
            (0.5, 0.0128),
            (0.95, 0.2399),
            (1.0, 0.5),
        ])
        .expect("valid")
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.knots.partition_point(|k| k.0 < p).clamp(1, self.knots.len() - 1);
        let (p0, v0) = self.knots[i - 1];
        let (p1, v1) = self.knots[i];
        let f = (p - p0) / (p1 - p0);
        if v0 > 0.0 && v1 > 0.0 {
            v0 * (v1 / v0).powf(f)
        } else {
            v0 + f * (v1 - v0)
        }
    }

    pub fn sample(&self, rng: &mut SeededRng) -> f64 {
        self.quantile(rng.uniform())
    }

    /// `n` equally spaced quantiles, at probabilities `(i + 0.5) / n`.
    pub fn to_distribution(&self, n: usize) -> Result<EmpiricalDistribution, DistributionError> {
        EmpiricalDistribution::new((0..n).map(|i| self.quantile((i as f64 + 0.5) / n as f64)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRelay {
    pub id: String,
    pub optimistic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusParams {
    pub n_slots: u64,
    pub first_slot: u64,
    pub seed: u64,
    pub chain: ChainConfig,
    pub relays: Vec<SyntheticRelay>,
    pub builders: usize,
    /// Gap between one builder's consecutive bids, uniform over this range.
    pub bid_gap_ms: (i64, i64),
    /// First bids arrive uniformly over this range.
    pub first_bid_ms: (i64, i64),
    pub last_bid_ms: i64,
    pub median_block_value_eth: f64,
    pub block_value_sigma: f64,
    /// Median growth amplitude `A` and its lognormal spread across slots.
    pub growth_amplitude: f64,
    pub growth_sigma: f64,
    pub growth_tau_ms: f64,
    pub gas_amplitude: f64,
    pub median_gas: f64,
    /// Share of records written without an eligibility time.
    pub omit_eligibility: f64,
    pub winner_query: QuantileSketch,
}

impl Default for CorpusParams {
    fn default() -> Self {
        let relay = |id: &str, optimistic| SyntheticRelay {
            id: id.into(),
            optimistic,
        };
        Self {
            n_slots: 500,
            first_slot: 8_000_000,
            seed: 0,
            chain: ChainConfig::default(),
            relays: vec![
                relay("ultrasound", true),
                relay("flashbots", false),
                relay("bloxroute", false),
                relay("agnostic", true),
            ],
            builders: 8,
            bid_gap_ms: (80, 320),
            first_bid_ms: (-3_000, -2_000),
            last_bid_ms: 2_500,
            median_block_value_eth: 0.05,
            block_value_sigma: 0.9,
            growth_amplitude: 0.0987,
            growth_sigma: 0.6,
            growth_tau_ms: 1_300.0,
            gas_amplitude: 0.11,
            median_gas: 14_000_000.0,
            omit_eligibility: 0.0,
            winner_query: QuantileSketch::winner_eligibility(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<TraceRecord>,
    pub delivered: Vec<DeliveredPayload>,
}

impl SyntheticCorpus {
    pub fn delivered_hashes(&self) -> BTreeMap<u64, String> {
        self.delivered.iter().map(|d| (d.slot, d.block_hash.clone())).collect()
    }
}

fn hex_id(parts: &[&[u8]], len: usize) -> String {
    let mut out = String::from("0x");
    let mut counter = 0u8;
    while out.len() < len + 2 {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        h.update([counter]);
        out.push_str(&hex::encode(h.finalize()));
        counter += 1;
    }
    out.truncate(len + 2);
    out
}

fn uniform_ms(rng: &mut SeededRng, (lo, hi): (i64, i64)) -> i64 {
    lo + rng.below((hi - lo + 1).max(1) as usize) as i64
}

/// Generates a corpus. Slot `i` draws from stream `i` of `params.seed`.
pub fn generate_corpus(params: &CorpusParams) -> Result<SyntheticCorpus, String> {
    if params.relays.is_empty() || params.builders == 0 {
        return Err("need at least one relay and one builder".into());
    }
    if !(0.0..=1.0).contains(&params.omit_eligibility) {
        return Err("omit_eligibility must lie in [0, 1]".into());
    }
    let builder_ids: Vec<String> = (0..params.builders)
        .map(|b| hex_id(&[b"builder", &b.to_le_bytes()], 96))
        .collect();
    let per_slot: Vec<(Vec<TraceRecord>, Option<DeliveredPayload>)> = (0..params.n_slots)
        .into_par_iter()
        .map(|i| generate_slot(params, &builder_ids, i))
        .collect::<Result<_, String>>()?;
    let mut records = Vec::new();
    let mut delivered = Vec::new();
    for (r, d) in per_slot {
        records.extend(r);
        delivered.extend(d);
    }
    Ok(SyntheticCorpus { records, delivered })
}

fn generate_slot(
    p: &CorpusParams,
    builder_ids: &[String],
    index: u64,
) -> Result<(Vec<TraceRecord>, Option<DeliveredPayload>), String> {
    let slot = p.first_slot + index;
    let mut rng = SeededRng::new(p.seed, index);
    let normal = |sigma: f64| Normal::new(0.0, sigma).map_err(|e| e.to_string());
    let value_dist = LogNormal::new(
        (p.median_block_value_eth * WEI_PER_ETH as f64).ln(),
        p.block_value_sigma,
    )
    .map_err(|e| e.to_string())?;
    let block_value = value_dist.sample(&mut rng);
    let amp = (p.growth_amplitude * normal(p.growth_sigma)?.sample(&mut rng).exp()).min(3.0);
    let gas_amp = (p.gas_amplitude * normal(0.8)?.sample(&mut rng).exp()).min(0.6);
    let gas_level = (p.median_gas * normal(0.15)?.sample(&mut rng).exp()).clamp(1_000_000.0, 29_000_000.0);
    let tx_level = 150.0 * normal(0.3)?.sample(&mut rng).exp();
    let quality = normal(0.004)?;
    let jitter = normal(0.001)?;
    let tau = p.growth_tau_ms;
    let slot_start = p.chain.slot_start_ms(slot);

    let mut bids: Vec<BidTrace> = Vec::new();
    let mut records = Vec::new();
    for (b, builder) in builder_ids.iter().enumerate() {
        let q = quality.sample(&mut rng).exp();
        let mut t = uniform_ms(&mut rng, p.first_bid_ms);
        let mut n = 0u32;
        while t <= p.last_bid_ms {
            let r = rng.below(p.relays.len());
            let relay = &p.relays[r];
            let lag = if relay.optimistic {
                uniform_ms(&mut rng, (20, 80))
            } else {
                uniform_ms(&mut rng, (100, 200))
            };
            let shape = (-(t as f64) / tau).exp();
            let value = block_value * q * (-amp * shape).exp() * jitter.sample(&mut rng).exp();
            let gas = (gas_level * (-gas_amp * shape).exp()).min(29_999_999.0);
            let txs = (tx_level * (-gas_amp * shape).exp()).round().max(1.0);
            let hash = hex_id(
                &[
                    b"block",
                    &slot.to_le_bytes(),
                    &(b as u64).to_le_bytes(),
                    &n.to_le_bytes(),
                ],
                64,
            );
            let omit = p.omit_eligibility > 0.0 && rng.uniform() < p.omit_eligibility;
            let received = slot_start + t as i128;
            let eligible = received + lag as i128;
            let bid = BidTrace {
                slot,
                relay_id: relay.id.clone(),
                builder_id: builder.clone(),
                received_at: SlotTimeMs::saturating(t),
                eligible_at: SlotTimeMs::saturating(t + lag),
                value: WeiAmount::from_wei(value as u128),
                gas_used: gas as u64,
                tx_count: txs as u64,
                block_hash: Some(hash.clone()),
            };
            records.push(TraceRecord {
                slot,
                relay: relay.id.clone(),
                builder_pubkey: builder.clone(),
                timestamp_ms: received as u64,
                eligible_ms: (!omit).then_some(eligible as u64),
                value: bid.value,
                gas_used: bid.gas_used,
                num_tx: bid.tx_count as u32,
                block_hash: Some(hash),
            });
            bids.push(bid);
            t += uniform_ms(&mut rng, p.bid_gap_ms);
            n += 1;
        }
    }
    let auction = SlotAuction::new(slot, bids).map_err(|e| e.to_string())?;
    let target = SlotTimeMs::saturating(p.winner_query.sample(&mut rng).round() as i64);
    let latest = auction
        .eligible_by(target)
        .iter()
        .max_by(|a, b| a.eligible_at.cmp(&b.eligible_at).then_with(|| selection_order(b, a)));
    let fallback = || {
        let first = auction.bids().first().map_or(target, |b| b.eligible_at.max(target));
        best_eligible_bid_with(&auction, &RelayFilter::All, first, false)
    };
    let delivered = latest.or_else(fallback).map(|w| DeliveredPayload {
        slot,
        block_hash: w.block_hash.clone().expect("synthetic bids carry hashes"),
        value: w.value,
    });
    Ok((records, delivered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::DEFAULT_R_CUTOFF;
    use crate::ingest::{to_auctions, winning_bid_eligibility_ecdf};
    use crate::timing::median_r_gain;

    fn small(n: u64, seed: u64) -> CorpusParams {
        CorpusParams {
            n_slots: n,
            seed,
            ..CorpusParams::default()
        }
    }

    #[test]
    fn sketch_hits_its_knots() {
        let s = QuantileSketch::winner_eligibility();
        assert_eq!(s.quantile(0.0), -100.0);
        assert_eq!(s.quantile(0.25), 74.0);
        assert_eq!(s.quantile(0.5), 240.5);
        assert!((s.quantile(0.95) - 1_410.0).abs() < 1e-9);
        assert_eq!(s.quantile(1.0), 2_000.0);
        let d = s.to_distribution(2_000).unwrap();
        assert!((d.quantile(0.5).unwrap() - 240.5).abs() < 2.0);
        assert!(QuantileSketch::new(vec![(0.0, 1.0), (0.5, 0.0), (1.0, 2.0)]).is_err());
        assert!(QuantileSketch::new(vec![(0.1, 1.0), (1.0, 2.0)]).is_err());
    }

    #[test]
    fn uplift_sketch_mean() {
        let d = QuantileSketch::per_block_uplift().to_distribution(10_000).unwrap();
        let mean = d.mean();
        assert!((0.05..0.06).contains(&mean), "{mean}");
    }

    #[test]
    fn corpus_is_deterministic_and_valid() {
        let a = generate_corpus(&small(20, 4)).unwrap();
        let b = generate_corpus(&small(20, 4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.delivered.len(), 20);
        for r in &a.records {
            r.validate().unwrap();
        }
        let out = to_auctions(&a.records, &ChainConfig::default()).unwrap();
        assert_eq!((out.dropped, out.duplicates), (0, 0));
        assert_eq!(out.auctions.len(), 20);
    }

    #[test]
    fn omitted_eligibility_share() {
        let p = CorpusParams {
            omit_eligibility: 0.3,
            ..small(10, 1)
        };
        let c = generate_corpus(&p).unwrap();
        let share = c.records.iter().filter(|r| r.eligible_ms.is_none()).count() as f64 / c.records.len() as f64;
        assert!((share - 0.3).abs() < 0.05, "{share}");
    }

    #[test]
    fn winner_eligibility_tracks_sketch() {
        let c = generate_corpus(&small(600, 2)).unwrap();
        let out = to_auctions(&c.records, &ChainConfig::default()).unwrap();
        let d = winning_bid_eligibility_ecdf(&out.auctions, Some(&c.delivered_hashes())).unwrap();
        let s = d.summarize();
        assert!((s.q25 - 74.0).abs() < 60.0, "{s:?}");
        assert!((s.q50 - 240.5).abs() < 60.0, "{s:?}");
        assert!((s.q95 - 1_410.0).abs() < 120.0, "{s:?}");
    }

    #[test]
    fn median_r_flattens() {
        let c = generate_corpus(&small(400, 3)).unwrap();
        let out = to_auctions(&c.records, &ChainConfig::default()).unwrap();
        let ms = |v| SlotTimeMs::new(v).unwrap();
        let early = median_r_gain(&out.auctions, ms(250), ms(950), DEFAULT_R_CUTOFF, false).unwrap();
        let late = median_r_gain(&out.auctions, ms(950), ms(1_000), DEFAULT_R_CUTOFF, false).unwrap();
        assert!(early.gain > 0.0);
        assert!(early.gain > 10.0 * late.gain, "{} vs {}", early.gain, late.gain);
    }
}
