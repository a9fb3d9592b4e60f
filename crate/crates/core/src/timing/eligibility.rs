// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::strategy::{uniform_lag, MAX_LAG_MS};
use super::SimError;
use crate::auction::{BidTrace, ReceivedBid};
use crate::distributions::{EmpiricalDistribution, SeededRng};

/// Eligibility lag per relay, used for traces that only carry receive times.
#[derive(Debug, Clone, PartialEq)]
pub struct LagModel {
    pub default: EmpiricalDistribution,
    pub per_relay: BTreeMap<String, EmpiricalDistribution>,
}

impl Default for LagModel {
    /// Uniform over 100..=200 ms for every relay.
    fn default() -> Self {
        Self {
            default: uniform_lag(100, 200),
            per_relay: BTreeMap::new(),
        }
    }
}

impl LagModel {
    pub fn for_relay(&self, relay_id: &str) -> &EmpiricalDistribution {
        self.per_relay.get(relay_id).unwrap_or(&self.default)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        for (name, d) in
            std::iter::once(("default", &self.default)).chain(self.per_relay.iter().map(|(k, v)| (k.as_str(), v)))
        {
            if d.min() < 0.0 || d.max() > MAX_LAG_MS {
                return Err(SimError::InvalidConfig(format!(
                    "lag model {name}: samples must lie in [0, 2000] ms"
                )));
            }
        }
        Ok(())
    }
}

/// Eligibility = receive time + a lag draw, truncated to whole ms. Bid `i`
/// draws from stream `i`, so the result depends only on input order.
pub fn resolve_eligibility(bids: Vec<ReceivedBid>, lags: &LagModel, seed: u64) -> Result<Vec<BidTrace>, SimError> {
    lags.validate()?;
    Ok(bids
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let mut rng = SeededRng::new(seed, i as u64);
            let lag = lags.for_relay(&b.relay_id).sample(&mut rng).trunc() as i64;
            let eligible = b.received_at.saturating_add_ms(lag);
            b.with_eligibility(eligible)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{SlotTimeMs, WeiAmount};

    fn received(relay: &str, t: i64) -> ReceivedBid {
        ReceivedBid {
            slot: 1,
            relay_id: relay.into(),
            builder_id: "b".into(),
            received_at: SlotTimeMs::new(t).unwrap(),
            value: WeiAmount::from_wei(1),
            gas_used: 1,
            tx_count: 1,
            block_hash: None,
        }
    }

    #[test]
    fn default_lag_bounds() {
        let bids: Vec<_> = (0..500).map(|i| received("r", i)).collect();
        let out = resolve_eligibility(bids, &LagModel::default(), 3).unwrap();
        for (i, b) in out.iter().enumerate() {
            let lag = b.eligible_at.ms() - i as i64;
            assert!((100..=200).contains(&lag), "{lag}");
        }
    }

    #[test]
    fn per_relay_override_and_determinism() {
        let mut lags = LagModel::default();
        lags.per_relay
            .insert("fast".into(), EmpiricalDistribution::point_mass(10.0).unwrap());
        let bids = vec![received("fast", 0), received("slow", 0)];
        let a = resolve_eligibility(bids.clone(), &lags, 9).unwrap();
        assert_eq!(a[0].eligible_at.ms(), 10);
        assert!(a[1].eligible_at.ms() >= 100);
        assert_eq!(a, resolve_eligibility(bids, &lags, 9).unwrap());
    }

    #[test]
    fn rejects_out_of_range_lags() {
        let lags = LagModel {
            default: EmpiricalDistribution::point_mass(-1.0).unwrap(),
            per_relay: BTreeMap::new(),
        };
        assert!(resolve_eligibility(vec![], &lags, 0).is_err());
    }
}
