// SPDX-License-Identifier: Apache-2.0

//! Brute-force references for bid selection, written without the crate's
//! ordering helpers.

use proptest::prelude::*;
use timing_games_core::auction::{best_eligible_bid, BidTrace, RelayFilter, SlotAuction};
use timing_games_core::timing::uplift_per_block;
use timing_games_core::units::{Fraction, SlotTimeMs, WeiAmount};

fn bid(builder: u8, relay: u8, eligible: i64, received_back: i64, value: u128) -> BidTrace {
    BidTrace {
        slot: 3,
        relay_id: format!("relay{relay}"),
        builder_id: format!("0x{builder:02x}"),
        received_at: SlotTimeMs::new(eligible - received_back).unwrap(),
        eligible_at: SlotTimeMs::new(eligible).unwrap(),
        value: WeiAmount::from_wei(value),
        gas_used: 1,
        tx_count: 1,
        block_hash: None,
    }
}

// Highest value among the visible bids at `t`; with supersede, only each
// (relay, builder) pair's latest visible bid counts.
fn reference_best_value(bids: &[BidTrace], t: SlotTimeMs, supersede: bool) -> Option<u128> {
    let visible: Vec<&BidTrace> = bids.iter().filter(|b| b.eligible_at <= t).collect();
    let live: Vec<&BidTrace> = if supersede {
        visible
            .iter()
            .filter(|b| {
                !visible.iter().any(|o| {
                    o.relay_id == b.relay_id
                        && o.builder_id == b.builder_id
                        && (o.eligible_at, o.received_at) > (b.eligible_at, b.received_at)
                })
            })
            .copied()
            .collect()
    } else {
        visible
    };
    live.iter().map(|b| b.value.wei()).max()
}

fn arb_bids() -> impl Strategy<Value = Vec<BidTrace>> {
    prop::collection::vec((0u8..6, 0u8..3, -1_000i64..3_000, 0i64..200, 1u128..10_000), 1..=50).prop_map(|v| {
        v.into_iter()
            .map(|(b, r, t, back, val)| bid(b, r, t, back, val))
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn selection_matches_reference(bids in arb_bids(), t in -1_000i64..3_000, supersede in any::<bool>()) {
        let t = SlotTimeMs::new(t).unwrap();
        let auction = SlotAuction::from_bids(bids.clone()).unwrap().with_supersede(supersede);
        let got = best_eligible_bid(&auction, &RelayFilter::All, t).map(|b| b.value.wei());
        prop_assert_eq!(got, reference_best_value(&bids, t, supersede));
    }

    #[test]
    fn uplift_matches_reference(bids in arb_bids(), t in -1_000i64..2_000, d in 0i64..1_000, supersede in any::<bool>()) {
        let base = SlotTimeMs::new(t).unwrap();
        let delay = SlotTimeMs::new(t + d).unwrap();
        let auction = SlotAuction::from_bids(bids.clone()).unwrap();
        let got = uplift_per_block(&auction, base, delay, supersede).ok();
        let expected = reference_best_value(&bids, base, supersede).map(|vb| {
            let vd = reference_best_value(&bids, delay, supersede).unwrap();
            Fraction::new(vd as i128 - vb as i128, vb as i128)
        });
        prop_assert_eq!(got, expected);
    }
}
