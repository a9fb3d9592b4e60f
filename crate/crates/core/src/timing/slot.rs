// SPDX-License-Identifier: Apache-2.0

use std::cmp::Ordering;

use rayon::prelude::*;

use super::{HazardModel, ProposerStrategy, SimConfig, SimError};
use crate::auction::{best_eligible_bid, selection_order, BidTrace, SlotAuction};
use crate::distributions::{EmpiricalDistribution, QuantileSummary, SeededRng};
use crate::units::{fraction_to_f64, Fraction, SlotTimeMs, WeiAmount};

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub winning_bid: Option<BidTrace>,
    pub missed: bool,
    /// Latest per-relay query time.
    pub effective_query_time: SlotTimeMs,
    /// Against the same relays and lag draws with no artificial delay.
    pub uplift_vs_baseline: Option<Fraction>,
}

impl SlotOutcome {
    /// Zero when the slot was missed or nothing was eligible.
    pub fn reward(&self) -> WeiAmount {
        self.winning_bid.as_ref().map_or(WeiAmount::ZERO, |b| b.value)
    }
}

fn better<'a>(cur: Option<&'a BidTrace>, cand: Option<&'a BidTrace>) -> Option<&'a BidTrace> {
    match (cur, cand) {
        (Some(a), Some(b)) => Some(if selection_order(b, a) == Ordering::Less { b } else { a }),
        (a, b) => a.or(b),
    }
}

/// One slot under one strategy. Each relay is queried at its delay plus a
/// lag draw (truncated to whole ms); the proposer keeps the best bid across
/// relays. The miss draw is always taken so that rng consumption does not
/// depend on the auction.
pub fn simulate_slot(
    auction: &SlotAuction,
    strategy: &ProposerStrategy,
    hazard: &HazardModel,
    rng: &mut SeededRng,
) -> SlotOutcome {
    let mut best = None;
    let mut baseline_best = None;
    let mut latest: Option<SlotTimeMs> = None;
    for relay in &strategy.relays {
        let lag = relay.eligibility_lag.sample(rng).trunc() as i64;
        let query = relay.artificial_delay.saturating_add_ms(lag);
        latest = Some(latest.map_or(query, |l| l.max(query)));
        let filter = relay.filter();
        best = better(best, best_eligible_bid(auction, &filter, query));
        baseline_best = better(
            baseline_best,
            best_eligible_bid(auction, &filter, SlotTimeMs::saturating(lag)),
        );
    }
    let effective_query_time = latest.unwrap_or(SlotTimeMs::ZERO);
    let miss_draw = rng.bernoulli(hazard.at(effective_query_time));
    let missed = best.is_some() && miss_draw;
    let uplift_vs_baseline = match (missed, best, baseline_best) {
        (false, Some(w), Some(b)) if !b.value.is_zero() => {
            let (vw, vb) = (w.value.wei() as i128, b.value.wei() as i128);
            Some(Fraction::new(vw - vb, vb))
        }
        _ => None,
    };
    SlotOutcome {
        slot: auction.slot(),
        winning_bid: if missed { None } else { best.cloned() },
        missed,
        effective_query_time,
        uplift_vs_baseline,
    }
}

/// Aggregate behaviour of one strategy in [`compare_strategies`].
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyReport {
    pub name: String,
    pub runs: u64,
    pub missed: u64,
    /// Runs where nothing was eligible at the strategy's query times.
    pub no_bid: u64,
    /// `eligible_at` of delivered winners, in ms.
    pub winning_eligibility: Option<EmpiricalDistribution>,
    /// Delivered winner values, in wei.
    pub winning_value: Option<EmpiricalDistribution>,
    /// Realized reward over the reference strategy's realized reward, minus
    /// one. A missed slot realizes zero. Runs where the reference realized
    /// nothing are left out.
    pub uplift_vs_reference: Option<EmpiricalDistribution>,
    pub mean_query_time_ms: f64,
}

impl StrategyReport {
    pub fn missed_rate(&self) -> f64 {
        self.missed as f64 / self.runs as f64
    }

    pub fn eligibility_summary(&self) -> Option<QuantileSummary> {
        self.winning_eligibility.as_ref().map(|d| d.summarize())
    }

    pub fn uplift_summary(&self) -> Option<QuantileSummary> {
        self.uplift_vs_reference.as_ref().map(|d| d.summarize())
    }

    pub fn value_summary(&self) -> Option<QuantileSummary> {
        self.winning_value.as_ref().map(|d| d.summarize())
    }
}

struct Realized {
    eligible_at: Option<SlotTimeMs>,
    value: u128,
    missed: bool,
    query: SlotTimeMs,
}

/// Paired comparison of strategies. Run `i` draws one auction uniformly
/// from stream `i`; every strategy then simulates that auction from an
/// identical derived stream. The first strategy is the reference for uplift.
pub fn compare_strategies(
    auctions: &[SlotAuction],
    strategies: &[ProposerStrategy],
    hazard: &HazardModel,
    config: &SimConfig,
) -> Result<Vec<StrategyReport>, SimError> {
    config.validate()?;
    if auctions.is_empty() || strategies.is_empty() {
        return Err(SimError::EmptyInput);
    }
    for s in strategies {
        s.validate()?;
    }
    let runs: Vec<Vec<Realized>> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut pick = SeededRng::new(config.seed, run);
            let auction = &auctions[pick.below(auctions.len())];
            let slot_rng = pick.derive(1);
            strategies
                .iter()
                .map(|s| {
                    let out = simulate_slot(auction, s, hazard, &mut slot_rng.clone());
                    Realized {
                        eligible_at: out.winning_bid.as_ref().map(|b| b.eligible_at),
                        value: out.reward().wei(),
                        missed: out.missed,
                        query: out.effective_query_time,
                    }
                })
                .collect()
        })
        .collect();

    let dist = |v: Vec<f64>| -> Result<Option<EmpiricalDistribution>, SimError> {
        if v.is_empty() {
            Ok(None)
        } else {
            Ok(Some(EmpiricalDistribution::new(v)?))
        }
    };
    let mut reports = Vec::with_capacity(strategies.len());
    for (k, s) in strategies.iter().enumerate() {
        let (mut elig, mut values, mut uplift) = (Vec::new(), Vec::new(), Vec::new());
        let (mut missed, mut no_bid, mut query_sum) = (0u64, 0u64, 0f64);
        for run in &runs {
            let r = &run[k];
            query_sum += r.query.ms() as f64;
            if r.missed {
                missed += 1;
            }
            match r.eligible_at {
                Some(t) => {
                    elig.push(t.ms() as f64);
                    values.push(r.value as f64);
                }
                None if !r.missed => no_bid += 1,
                None => {}
            }
            let reference = run[0].value;
            if reference > 0 {
                let u = Fraction::new(r.value as i128 - reference as i128, reference as i128);
                uplift.push(fraction_to_f64(&u));
            }
        }
        reports.push(StrategyReport {
            name: s.name.clone(),
            runs: config.n_runs,
            missed,
            no_bid,
            winning_eligibility: dist(elig)?,
            winning_value: dist(values)?,
            uplift_vs_reference: dist(uplift)?,
            mean_query_time_ms: query_sum / config.n_runs as f64,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::test_support::{bid, ms};
    use crate::auction::RelayFilter;
    use crate::timing::{uniform_lag, PresetLags, RelayConfig};
    use proptest::prelude::*;

    const ETH: u128 = 1_000_000_000_000_000_000;

    fn relay(id: &str, delay: i64, lag: EmpiricalDistribution) -> RelayConfig {
        RelayConfig {
            relay_id: id.into(),
            optimistic: false,
            eligibility_lag: lag,
            artificial_delay: ms(delay),
        }
    }

    fn zero_lag() -> EmpiricalDistribution {
        EmpiricalDistribution::point_mass(0.0).unwrap()
    }

    #[test]
    fn two_relay_example() {
        let a = SlotAuction::from_bids(vec![bid("a", "fast", 100, ETH), bid("b", "slow", 850, ETH * 12 / 10)]).unwrap();
        let s = ProposerStrategy::new("x", vec![relay("fast", 0, zero_lag()), relay("slow", 900, zero_lag())]).unwrap();
        let out = simulate_slot(&a, &s, &HazardModel::zero(), &mut SeededRng::new(1, 0));
        let w = out.winning_bid.unwrap();
        assert_eq!((w.value.wei(), w.relay_id.as_str()), (ETH * 12 / 10, "slow"));
        assert_eq!(out.effective_query_time, ms(900));
        assert!(!out.missed);
        assert_eq!(out.uplift_vs_baseline, None); // nothing eligible at 0 ms
    }

    #[test]
    fn certain_miss() {
        let a = SlotAuction::from_bids(vec![bid("a", "r", 0, ETH)]).unwrap();
        let s = ProposerStrategy::new("x", vec![relay("*", 300, zero_lag())]).unwrap();
        let hazard = HazardModel::new(vec![(ms(0), 0.0), (ms(1), 1.0)]).unwrap();
        let out = simulate_slot(&a, &s, &hazard, &mut SeededRng::new(1, 0));
        assert!(out.missed);
        assert!(out.winning_bid.is_none());
        assert_eq!(out.reward(), WeiAmount::ZERO);
    }

    #[test]
    fn empty_auction_is_not_missed() {
        let s = ProposerStrategy::new("x", vec![relay("*", 300, zero_lag())]).unwrap();
        let hazard = HazardModel::new(vec![(ms(0), 1.0)]).unwrap();
        let out = simulate_slot(&SlotAuction::empty(4), &s, &hazard, &mut SeededRng::new(1, 0));
        assert!(!out.missed && out.winning_bid.is_none());
        assert_eq!(out.slot, 4);
    }

    #[test]
    fn miss_rate_tracks_hazard() {
        let a = SlotAuction::from_bids(vec![bid("a", "r", 0, ETH)]).unwrap();
        let s = ProposerStrategy::new("x", vec![relay("*", 1_000, uniform_lag(0, 400))]).unwrap();
        let hazard = HazardModel::ramp(ms(950), ms(2_000), 0.5).unwrap();
        let mut cfg = SimConfig::new(17);
        cfg.n_runs = 10_000;
        let report = &compare_strategies(&[a], &[s], &hazard, &cfg).unwrap()[0];
        // expected hazard over query times 1000..=1400 ms
        let expected: f64 = (1_000..=1_400).map(|t| hazard.at(ms(t))).sum::<f64>() / 401.0;
        let se = (expected * (1.0 - expected) / 10_000.0).sqrt();
        assert!(
            (report.missed_rate() - expected).abs() < 4.0 * se,
            "{} vs {expected}",
            report.missed_rate()
        );
    }

    fn corpus() -> Vec<SlotAuction> {
        (0..25u64)
            .map(|s| {
                let bids = (0..30)
                    .map(|i| {
                        let t = -500 + (i * 97 + s as i64 * 13) % 2_400;
                        let mut b = bid(
                            &format!("b{}", i % 5),
                            &format!("r{}", i % 2),
                            t,
                            1_000 + (t + 500) as u128 * (s as u128 + 1),
                        );
                        b.slot = s;
                        b
                    })
                    .collect();
                SlotAuction::new(s, bids).unwrap()
            })
            .collect()
    }

    #[test]
    fn self_comparison_is_zero() {
        let lags = PresetLags::default();
        let bench = ProposerStrategy::pilot_presets(ms(950), &lags).unwrap().remove(0);
        let reports = compare_strategies(
            &corpus(),
            &[bench.clone(), bench],
            &HazardModel::default(),
            &SimConfig::new(4),
        )
        .unwrap();
        for r in &reports {
            let u = r.uplift_vs_reference.as_ref().unwrap();
            assert_eq!((u.min(), u.max()), (0.0, 0.0));
        }
        assert_eq!(reports[0].winning_eligibility, reports[1].winning_eligibility);
    }

    #[test]
    fn presets_compare_deterministically() {
        let lags = PresetLags::default();
        let presets = ProposerStrategy::pilot_presets(ms(950), &lags).unwrap();
        let cfg = SimConfig::new(8);
        let a = compare_strategies(&corpus(), &presets, &HazardModel::default(), &cfg).unwrap();
        let b = compare_strategies(&corpus(), &presets, &HazardModel::default(), &cfg).unwrap();
        assert_eq!(a, b);
        let names: Vec<_> = a.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["benchmark", "aggressive", "normal", "moderate"]);
        let med = |r: &StrategyReport| r.eligibility_summary().unwrap().q50;
        assert!(med(&a[1]) > med(&a[0]));
        assert!(compare_strategies(&corpus(), &[], &HazardModel::default(), &cfg).is_err());
    }

    proptest! {
        #[test]
        fn zero_delay_zero_lag_is_undelayed_winner(seed in any::<u64>(), s in 0usize..25) {
            let a = &corpus()[s];
            let strat = ProposerStrategy::new("z", vec![relay("*", 0, zero_lag())]).unwrap();
            let out = simulate_slot(a, &strat, &HazardModel::zero(), &mut SeededRng::new(seed, 0));
            prop_assert_eq!(out.winning_bid.as_ref(), best_eligible_bid(a, &RelayFilter::All, ms(0)));
        }

        #[test]
        fn dominated_strategy_has_lower_median_value(seed in any::<u64>(), d_lo in 0i64..600, extra in 0i64..600) {
            let lag = uniform_lag(0, 150);
            let lo = ProposerStrategy::new("lo", vec![relay("r0", d_lo, lag.clone()), relay("r1", d_lo, lag.clone())]).unwrap();
            let hi = ProposerStrategy::new("hi", vec![relay("r0", d_lo + extra, lag.clone()), relay("r1", d_lo + extra, lag)]).unwrap();
            let mut cfg = SimConfig::new(seed);
            cfg.n_runs = 200;
            let reports = compare_strategies(&corpus(), &[lo, hi], &HazardModel::zero(), &cfg).unwrap();
            let med = |r: &StrategyReport| r.value_summary().map_or(0.0, |q| q.q50);
            prop_assert!(med(&reports[0]) <= med(&reports[1]));
            let u = reports[1].uplift_vs_reference.as_ref().unwrap();
            prop_assert!(u.min() >= 0.0);
        }
    }
}
