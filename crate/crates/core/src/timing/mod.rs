// SPDX-License-Identifier: Apache-2.0

//! Proposer latency strategies simulated against reconstructed auctions.
//!
//! The per-block question is how much more value the proposer gets by asking
//! for the header at a later time than it otherwise would have. Runs are
//! addressed by `(seed, run index)` and executed in parallel; results are
//! collected in run order so the output does not depend on scheduling.

mod eligibility;
mod slot;
mod strategy;

pub use eligibility::{resolve_eligibility, LagModel};
pub use slot::{compare_strategies, simulate_slot, SlotOutcome, StrategyReport};
pub use strategy::{
    uniform_lag, HazardModel, Preset, PresetLags, ProposerStrategy, RelayConfig, ANY_RELAY, DEFAULT_MAX_DELAY,
};

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{best_eligible_bid_with, AuctionError, RelayFilter, SlotAuction, DEFAULT_R_CUTOFF};
use crate::distributions::{nearest_rank, DistributionError, EmpiricalDistribution, SeededRng};
use crate::fee_market::{burn_increase_for_delay, FeeMarketError, FeeMarketState};
use crate::units::{fraction_to_f64, Fraction, SlotTimeMs, UnitsError};

pub const DEFAULT_DELAY_THRESHOLD: SlotTimeMs = SlotTimeMs::from_ms(950);
pub const DEFAULT_RUNS: u64 = 1_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("empty input")]
    EmptyInput,
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("no bid eligible at baseline {0}")]
    NoBaselineBid(SlotTimeMs),
    #[error("delay {delay} precedes baseline {baseline}")]
    DelayBeforeBaseline { baseline: SlotTimeMs, delay: SlotTimeMs },
    #[error("baseline winner has zero value")]
    ZeroBaselineValue,
    #[error("all {runs} draws were skipped")]
    AllDrawsSkipped { runs: u64 },
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid hazard model: {0}")]
    InvalidHazard(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    FeeMarket(#[from] FeeMarketError),
    #[error(transparent)]
    Units(#[from] UnitsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_runs: u64,
    pub delay_threshold: SlotTimeMs,
    pub seed: u64,
    pub supersede: bool,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            n_runs: DEFAULT_RUNS,
            delay_threshold: DEFAULT_DELAY_THRESHOLD,
            seed,
            supersede: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_runs == 0 {
            return Err(SimError::InvalidConfig("n_runs must be at least 1".into()));
        }
        if self.delay_threshold < SlotTimeMs::ZERO || self.delay_threshold > DEFAULT_R_CUTOFF {
            return Err(SimError::InvalidConfig(format!(
                "delay threshold {} outside [0, 2000] ms",
                self.delay_threshold
            )));
        }
        Ok(())
    }
}

/// `value(best at delay) / value(best at baseline) - 1` over all relays.
pub fn uplift_per_block(
    auction: &SlotAuction,
    baseline: SlotTimeMs,
    delay: SlotTimeMs,
    supersede: bool,
) -> Result<Fraction, SimError> {
    if delay < baseline {
        return Err(SimError::DelayBeforeBaseline { baseline, delay });
    }
    let base = best_eligible_bid_with(auction, &RelayFilter::All, baseline, supersede)
        .ok_or(SimError::NoBaselineBid(baseline))?;
    let delayed = best_eligible_bid_with(auction, &RelayFilter::All, delay, supersede)
        .ok_or(SimError::NoBaselineBid(baseline))?;
    let (vb, vd) = (base.value.to_i128()?, delayed.value.to_i128()?);
    if vb == 0 {
        return if vd == 0 {
            Ok(Fraction::from_integer(0))
        } else {
            Err(SimError::ZeroBaselineValue)
        };
    }
    Ok(Fraction::new(vd - vb, vb))
}

/// Where the delayed query time of each run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySource {
    Fixed(SlotTimeMs),
    /// One draw per run, in milliseconds (fractions truncated).
    Sampled(EmpiricalDistribution),
}

/// One simulation run. `value` is absent when the run was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: u64,
    pub auction_index: usize,
    pub slot: u64,
    pub baseline: SlotTimeMs,
    /// Query time actually used: never earlier than `baseline`.
    pub delay: SlotTimeMs,
    pub value: Option<Fraction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub records: Vec<RunRecord>,
    pub skipped: usize,
    pub distribution: EmpiricalDistribution,
}

impl SimulationOutput {
    /// Exact per-run values of the runs that were not skipped, in run order.
    pub fn values(&self) -> impl Iterator<Item = Fraction> + '_ {
        self.records.iter().filter_map(|r| r.value)
    }
}

fn draw_ms(dist: &EmpiricalDistribution, rng: &mut SeededRng) -> SlotTimeMs {
    SlotTimeMs::saturating(dist.sample(rng).trunc() as i64)
}

/// Shared engine behind the per-block simulations. Run `i` uses stream `i`
/// of `config.seed` and draws, in order, a baseline time, an auction, and
/// (for sampled delays) a delay. Baselines before slot start are raised to
/// zero, and the delay is raised to the baseline when it is earlier. `per_block` returns `None` to skip a run.
pub fn simulate_per_block<F>(
    auctions: &[SlotAuction],
    baseline_dist: &EmpiricalDistribution,
    delay: &DelaySource,
    config: &SimConfig,
    per_block: F,
) -> Result<SimulationOutput, SimError>
where
    F: Fn(&SlotAuction, SlotTimeMs, SlotTimeMs) -> Result<Option<Fraction>, SimError> + Sync,
{
    config.validate()?;
    if auctions.is_empty() || baseline_dist.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let records = (0..config.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = SeededRng::new(config.seed, run);
            // No header query happens before the slot starts.
            let baseline = draw_ms(baseline_dist, &mut rng).max(SlotTimeMs::ZERO);
            let auction_index = rng.below(auctions.len());
            let delay = match delay {
                DelaySource::Fixed(t) => *t,
                DelaySource::Sampled(d) => draw_ms(d, &mut rng),
            }
            .max(baseline);
            let auction = &auctions[auction_index];
            let value = per_block(auction, baseline, delay)?;
            Ok(RunRecord {
                run,
                auction_index,
                slot: auction.slot(),
                baseline,
                delay,
                value,
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let samples: Vec<f64> = records
        .iter()
        .filter_map(|r| r.value.as_ref().map(fraction_to_f64))
        .collect();
    if samples.is_empty() {
        return Err(SimError::AllDrawsSkipped { runs: config.n_runs });
    }
    let skipped = records.len() - samples.len();
    Ok(SimulationOutput {
        records,
        skipped,
        distribution: EmpiricalDistribution::new(samples)?,
    })
}

/// Per-block uplift with the delay fixed at `config.delay_threshold`.
pub fn run_uplift_simulation(
    auctions: &[SlotAuction],
    baseline_dist: &EmpiricalDistribution,
    config: &SimConfig,
) -> Result<SimulationOutput, SimError> {
    run_uplift_simulation_with(
        auctions,
        baseline_dist,
        &DelaySource::Fixed(config.delay_threshold),
        config,
    )
}

/// Per-block uplift with an arbitrary delay source. Runs without a baseline
/// bid, or whose baseline winner is worth nothing, are skipped.
pub fn run_uplift_simulation_with(
    auctions: &[SlotAuction],
    baseline_dist: &EmpiricalDistribution,
    delay: &DelaySource,
    config: &SimConfig,
) -> Result<SimulationOutput, SimError> {
    let supersede = config.supersede;
    simulate_per_block(
        auctions,
        baseline_dist,
        delay,
        config,
        |auction, baseline, delay| match uplift_per_block(auction, baseline, delay, supersede) {
            Ok(u) => Ok(Some(u)),
            Err(SimError::NoBaselineBid(_) | SimError::ZeroBaselineValue) => Ok(None),
            Err(e) => Err(e),
        },
    )
}

/// Relative next-slot burn increase per block, using the same draws as the
/// uplift simulation with the same config.
pub fn run_burn_simulation(
    auctions: &[SlotAuction],
    baseline_dist: &EmpiricalDistribution,
    state: &FeeMarketState,
    config: &SimConfig,
) -> Result<SimulationOutput, SimError> {
    let flagged: Vec<SlotAuction>;
    let auctions = if auctions.iter().all(|a| a.supersede() == config.supersede) {
        auctions
    } else {
        flagged = auctions
            .iter()
            .map(|a| a.clone().with_supersede(config.supersede))
            .collect();
        &flagged
    };
    let delay = DelaySource::Fixed(config.delay_threshold);
    simulate_per_block(
        auctions,
        baseline_dist,
        &delay,
        config,
        |auction, baseline, delay| match burn_increase_for_delay(auction, baseline, delay, state) {
            Ok(b) => Ok(Some(b)),
            Err(FeeMarketError::NoBaselineBid(_)) => Ok(None),
            Err(e) => Err(e.into()),
        },
    )
}

/// Median R of the bid a proposer would take at `from` and at `to`, over the
/// auctions that have a bid eligible by `from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RGain {
    pub from: SlotTimeMs,
    pub to: SlotTimeMs,
    pub auctions: usize,
    pub median_from: f64,
    pub median_to: f64,
    /// `median_to / median_from - 1`.
    pub gain: f64,
}

pub fn median_r_gain(
    auctions: &[SlotAuction],
    from: SlotTimeMs,
    to: SlotTimeMs,
    cutoff: SlotTimeMs,
    supersede: bool,
) -> Result<RGain, SimError> {
    if from > to || to > cutoff {
        return Err(SimError::InvalidConfig(format!(
            "need {from} <= {to} <= cutoff {cutoff}"
        )));
    }
    let mut at_from: Vec<Ratio<u128>> = Vec::new();
    let mut at_to: Vec<Ratio<u128>> = Vec::new();
    for auction in auctions {
        let Some(max) = auction.max_value_by(cutoff) else {
            continue;
        };
        let Some(early) = best_eligible_bid_with(auction, &RelayFilter::All, from, supersede) else {
            continue;
        };
        let late = best_eligible_bid_with(auction, &RelayFilter::All, to, supersede).unwrap_or(early);
        let r = |v: u128| {
            if max.is_zero() {
                Ratio::from_integer(1)
            } else {
                Ratio::new(v, max.wei())
            }
        };
        at_from.push(r(early.value.wei()));
        at_to.push(r(late.value.wei()));
    }
    if at_from.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let median = |mut v: Vec<Ratio<u128>>| {
        v.sort();
        let m = v[nearest_rank(0.5, v.len()) - 1];
        *m.numer() as f64 / *m.denom() as f64
    };
    let n = at_from.len();
    let (median_from, median_to) = (median(at_from), median(at_to));
    Ok(RGain {
        from,
        to,
        auctions: n,
        median_from,
        median_to,
        gain: median_to / median_from - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auction::test_support::{bid, ms};
    use crate::auction::{best_eligible_bid, BidTrace};
    use crate::units::WeiAmount;
    use proptest::prelude::*;

    const ETH: u128 = 1_000_000_000_000_000_000;

    fn linear_auction(slot: u64) -> SlotAuction {
        // value(t) = 1 + 0.001 t (in units of 10^15 wei) every 50 ms
        let bids = (0..=40)
            .map(|i| {
                let t = i * 50;
                let mut b = bid(&format!("b{i}"), "r", t, (1_000 + t as u128) * 1_000_000_000_000_000);
                b.slot = slot;
                b
            })
            .collect();
        SlotAuction::new(slot, bids).unwrap()
    }

    #[test]
    fn uplift_examples() {
        let a = SlotAuction::from_bids(vec![bid("a", "r", 100, ETH), bid("b", "r", 800, ETH * 11 / 10)]).unwrap();
        assert_eq!(
            uplift_per_block(&a, ms(200), ms(950), false).unwrap(),
            Fraction::new(1, 10)
        );
        assert_eq!(
            uplift_per_block(&a, ms(200), ms(200), false).unwrap(),
            Fraction::from_integer(0)
        );
        assert_eq!(
            uplift_per_block(&a, ms(50), ms(950), false),
            Err(SimError::NoBaselineBid(ms(50)))
        );
        assert_eq!(
            uplift_per_block(&a, ms(300), ms(200), false),
            Err(SimError::DelayBeforeBaseline {
                baseline: ms(300),
                delay: ms(200)
            })
        );
    }

    #[test]
    fn uplift_can_go_negative_with_supersede() {
        let a = SlotAuction::from_bids(vec![
            bid("a", "r", 100, 10),
            bid("a", "r", 500, 4),
            bid("b", "r", 50, 5),
        ])
        .unwrap();
        assert_eq!(
            uplift_per_block(&a, ms(200), ms(600), true).unwrap(),
            Fraction::new(-1, 2)
        );
        assert_eq!(
            uplift_per_block(&a, ms(200), ms(600), false).unwrap(),
            Fraction::from_integer(0)
        );
    }

    #[test]
    fn linear_corpus_closed_form() {
        let auctions: Vec<_> = (0..20).map(linear_auction).collect();
        let baseline = EmpiricalDistribution::point_mass(250.0).unwrap();
        let out = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(7)).unwrap();
        assert_eq!(out.skipped, 0);
        assert_eq!(out.records.len(), 1_000);
        // best at 950 ms is the 950 ms bid, best at 250 ms the 250 ms bid
        assert!(out.values().all(|u| u == Fraction::new(1_950 - 1_250, 1_250)));
        assert!((out.distribution.quantile(0.5).unwrap() - 0.56).abs() < 1e-12);
    }

    #[test]
    fn flat_corpus_gives_zero() {
        let auctions = vec![SlotAuction::from_bids(vec![bid("a", "r", 0, 5), bid("b", "r", 0, 5)]).unwrap()];
        let baseline = EmpiricalDistribution::new(vec![0.0, 100.0, 400.0]).unwrap();
        let out = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(1)).unwrap();
        assert!(out.values().all(|u| u == Fraction::from_integer(0)));
    }

    #[test]
    fn skipped_draws_are_counted() {
        let auctions = vec![
            SlotAuction::from_bids(vec![bid("a", "r", 500, 5)]).unwrap(),
            SlotAuction::from_bids(vec![bid("a", "r", 0, 5)]).unwrap(),
        ];
        let baseline = EmpiricalDistribution::point_mass(100.0).unwrap();
        let out = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(3)).unwrap();
        let skipped = out.records.iter().filter(|r| r.auction_index == 0).count();
        assert_eq!(out.skipped, skipped);
        assert!(skipped > 400 && skipped < 600);

        let only_late = vec![auctions[0].clone()];
        assert_eq!(
            run_uplift_simulation(&only_late, &baseline, &SimConfig::new(3)),
            Err(SimError::AllDrawsSkipped { runs: 1_000 })
        );
    }

    #[test]
    fn baseline_after_threshold_gives_zero() {
        let auctions: Vec<_> = (0..3).map(linear_auction).collect();
        let baseline = EmpiricalDistribution::point_mass(1_500.0).unwrap();
        let out = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(3)).unwrap();
        assert!(out.records.iter().all(|r| r.delay == ms(1_500)));
        assert!(out.values().all(|u| u == Fraction::from_integer(0)));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let auctions: Vec<_> = (0..30).map(linear_auction).collect();
        let baseline = EmpiricalDistribution::new((0..40).map(|i| i as f64 * 30.0).collect()).unwrap();
        let a = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(99)).unwrap();
        let b = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(99)).unwrap();
        assert_eq!(a, b);
        let c = run_uplift_simulation(&auctions, &baseline, &SimConfig::new(100)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn config_validation() {
        let auctions = vec![linear_auction(1)];
        let baseline = EmpiricalDistribution::point_mass(0.0).unwrap();
        let mut cfg = SimConfig::new(1);
        cfg.n_runs = 0;
        assert!(matches!(
            run_uplift_simulation(&auctions, &baseline, &cfg),
            Err(SimError::InvalidConfig(_))
        ));
        let mut cfg = SimConfig::new(1);
        cfg.delay_threshold = ms(2_001);
        assert!(matches!(
            run_uplift_simulation(&auctions, &baseline, &cfg),
            Err(SimError::InvalidConfig(_))
        ));
        assert_eq!(
            run_uplift_simulation(&[], &baseline, &SimConfig::new(1)),
            Err(SimError::EmptyInput)
        );
    }

    #[test]
    fn burn_simulation_shares_draws() {
        let auctions: Vec<_> = (0..10)
            .map(|s| {
                let mut a = linear_auction(s);
                let bids: Vec<BidTrace> = a
                    .bids()
                    .iter()
                    .map(|b| BidTrace {
                        gas_used: 15_000_000 + b.eligible_at.ms() as u64 * 1_000,
                        ..b.clone()
                    })
                    .collect();
                a = SlotAuction::new(s, bids).unwrap();
                a
            })
            .collect();
        let baseline = EmpiricalDistribution::new(vec![0.0, 200.0, 600.0]).unwrap();
        let cfg = SimConfig::new(5);
        let state = FeeMarketState::mainnet(WeiAmount::from_wei(20_000_000_000)).unwrap();
        let burn = run_burn_simulation(&auctions, &baseline, &state, &cfg).unwrap();
        let uplift = run_uplift_simulation(&auctions, &baseline, &cfg).unwrap();
        for (b, u) in burn.records.iter().zip(&uplift.records) {
            assert_eq!(
                (b.auction_index, b.baseline, b.delay),
                (u.auction_index, u.baseline, u.delay)
            );
            let direct = burn_increase_for_delay(&auctions[b.auction_index], b.baseline, b.delay, &state).unwrap();
            assert_eq!(b.value, Some(direct));
        }
    }

    #[test]
    fn r_gain_on_linear_corpus() {
        let auctions: Vec<_> = (0..5).map(linear_auction).collect();
        let g = median_r_gain(&auctions, ms(250), ms(950), DEFAULT_R_CUTOFF, false).unwrap();
        assert!((g.median_from - 1_250.0 / 3_000.0).abs() < 1e-12);
        assert!((g.median_to - 1_950.0 / 3_000.0).abs() < 1e-12);
        assert!((g.gain - 0.56).abs() < 1e-12);
        assert!(median_r_gain(&auctions, ms(950), ms(250), DEFAULT_R_CUTOFF, false).is_err());
        assert!(median_r_gain(&auctions, ms(250), ms(2_500), DEFAULT_R_CUTOFF, false).is_err());
    }

    fn arb_auction() -> impl Strategy<Value = SlotAuction> {
        prop::collection::vec((0usize..4, 0usize..2, -500i64..2_500, 1u128..1_000), 1..30).prop_map(|raw| {
            let bids = raw
                .into_iter()
                .map(|(b, r, t, v)| bid(&format!("b{b}"), &format!("r{r}"), t, v))
                .collect();
            SlotAuction::from_bids(bids).unwrap()
        })
    }

    proptest! {
        #[test]
        fn uplift_matches_scan_and_is_monotone(a in arb_auction(), t0 in -500i64..2_500, d1 in 0i64..1_000, d2 in 0i64..1_000) {
            let (base, lo, hi) = (ms(t0), ms((t0 + d1.min(d2)).min(12_000)), ms((t0 + d1.max(d2)).min(12_000)));
            let scan = |t: SlotTimeMs| a.bids().iter().filter(|b| b.eligible_at <= t).map(|b| b.value.wei()).max();
            match (scan(base), uplift_per_block(&a, base, lo, false)) {
                (None, r) => prop_assert_eq!(r, Err(SimError::NoBaselineBid(base))),
                (Some(vb), r) => {
                    let u_lo = r.unwrap();
                    let expected = Fraction::new(scan(lo).unwrap() as i128 - vb as i128, vb as i128);
                    prop_assert_eq!(u_lo, expected);
                    prop_assert!(u_lo >= Fraction::from_integer(0));
                    prop_assert!(uplift_per_block(&a, base, hi, false).unwrap() >= u_lo);
                    let best = best_eligible_bid(&a, &RelayFilter::All, base).unwrap();
                    prop_assert_eq!(best.value.wei(), vb);
                }
            }
        }

        #[test]
        fn median_uplift_monotone_in_threshold(seed in any::<u64>()) {
            let auctions: Vec<_> = (0..8).map(linear_auction).collect();
            let baseline = EmpiricalDistribution::new(vec![0.0, 100.0, 300.0, 800.0]).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for th in [250, 500, 700, 950] {
                let mut cfg = SimConfig::new(seed);
                cfg.n_runs = 200;
                cfg.delay_threshold = ms(th);
                let m = run_uplift_simulation(&auctions, &baseline, &cfg).unwrap().distribution.quantile(0.5).unwrap();
                prop_assert!(m >= prev);
                prev = m;
            }
        }
    }
}
