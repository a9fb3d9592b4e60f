// SPDX-License-Identifier: Apache-2.0

//! Weekly and annual reward uplift for an operator with a given voting power.
//!
//! Proposal counts, per-block MEV and per-block uplift are drawn
//! independently. A period's uplift is MEV-weighted: blocks that carry more
//! value count for more.

use num_rational::Ratio;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::SlotAuction;
use crate::distributions::{DistributionError, EmpiricalDistribution, QuantileSummary, SeededRng};
use crate::timing::{run_uplift_simulation_with, DelaySource, SimConfig, SimError};
use crate::units::{fraction_to_f64, Fraction};

/// Twelve-second slots over one week.
pub const SLOTS_PER_WEEK: u64 = 7 * 24 * 3600 / 12;
pub const WEEKS_PER_YEAR: u64 = 52;

// Stream used for period draws, kept apart from the per-block simulation.
const PERIOD_STREAM: u64 = 0x7045_5249_4f44;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonteCarloError {
    #[error("voting power {0} outside [0, 1]")]
    InvalidVotingPower(f64),
    #[error("invalid reward model: {0}")]
    InvalidModel(String),
    #[error("all {runs} runs were degenerate (no proposals or no MEV)")]
    AllRunsDegenerate { runs: u64 },
    #[error("n_runs must be at least 1")]
    NoRuns,
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// Share of total stake, i.e. the per-slot chance of proposing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct VotingPower(f64);

impl VotingPower {
    pub fn new(fraction: f64) -> Result<Self, MonteCarloError> {
        if (0.0..=1.0).contains(&fraction) {
            Ok(Self(fraction))
        } else {
            Err(MonteCarloError::InvalidVotingPower(fraction))
        }
    }

    pub fn fraction(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Horizon {
    Weekly,
    Annual,
}

impl Horizon {
    pub fn weeks(self) -> u64 {
        match self {
            Horizon::Weekly => 1,
            Horizon::Annual => WEEKS_PER_YEAR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel {
    /// Per-block MEV in wei.
    pub per_block_mev: EmpiricalDistribution,
    /// Per-block relative uplift.
    pub uplift: EmpiricalDistribution,
    pub slots_per_week: u64,
    /// Execution-layer share of total staking rewards.
    pub el_share: Fraction,
    pub base_apr: Fraction,
}

impl RewardModel {
    /// 50,400 slots per week, 30% execution-layer share, 4.2% base APR.
    pub fn new(per_block_mev: EmpiricalDistribution, uplift: EmpiricalDistribution) -> Self {
        Self {
            per_block_mev,
            uplift,
            slots_per_week: SLOTS_PER_WEEK,
            el_share: Ratio::new(30, 100),
            base_apr: Ratio::new(42, 1000),
        }
    }

    pub fn validate(&self) -> Result<(), MonteCarloError> {
        let zero = Fraction::from_integer(0);
        let one = Fraction::from_integer(1);
        if self.el_share <= zero || self.el_share >= one {
            return Err(MonteCarloError::InvalidModel(
                "el_share must lie strictly between 0 and 1".into(),
            ));
        }
        if self.base_apr < zero {
            return Err(MonteCarloError::InvalidModel("base_apr must not be negative".into()));
        }
        if self.slots_per_week == 0 {
            return Err(MonteCarloError::InvalidModel("slots_per_week must be positive".into()));
        }
        if self.per_block_mev.min() < 0.0 {
            return Err(MonteCarloError::InvalidModel(
                "per-block MEV must not be negative".into(),
            ));
        }
        Ok(())
    }

    pub fn slots(&self, horizon: Horizon) -> u64 {
        self.slots_per_week * horizon.weeks()
    }
}

/// One binomial draw of the number of slots won out of `n_slots`.
pub fn proposals_in_period(vp: VotingPower, n_slots: u64, rng: &mut SeededRng) -> u64 {
    if vp.0 == 0.0 || n_slots == 0 {
        return 0;
    }
    Binomial::new(n_slots, vp.0)
        .expect("p validated by VotingPower")
        .sample(rng)
}

/// MEV-weighted uplift per run. Runs with no proposals, or whose drawn MEV
/// sums to zero, are counted in `degenerate` and left out of the
/// distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodUplift {
    pub horizon: Horizon,
    pub runs: u64,
    pub degenerate: u64,
    pub distribution: EmpiricalDistribution,
}

/// `sum(mev * uplift) / sum(mev)` over `(mev, uplift)` pairs; `None` when
/// the MEV sums to zero.
pub fn weighted_uplift(blocks: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut weighted, mut total) = (0.0f64, 0.0f64);
    for (mev, u) in blocks {
        weighted += mev * u;
        total += mev;
    }
    (total > 0.0).then(|| weighted / total)
}

/// Run `i` draws from stream `i` of `seed`.
pub fn period_uplift(
    vp: VotingPower,
    model: &RewardModel,
    horizon: Horizon,
    n_runs: u64,
    seed: u64,
) -> Result<PeriodUplift, MonteCarloError> {
    model.validate()?;
    if n_runs == 0 {
        return Err(MonteCarloError::NoRuns);
    }
    let n_slots = model.slots(horizon);
    let per_run: Vec<Option<f64>> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = SeededRng::new(seed, run).derive(PERIOD_STREAM);
            let k = proposals_in_period(vp, n_slots, &mut rng);
            weighted_uplift((0..k).map(|_| {
                let mev = model.per_block_mev.sample(&mut rng);
                (mev, model.uplift.sample(&mut rng))
            }))
        })
        .collect();
    let samples: Vec<f64> = per_run.iter().flatten().copied().collect();
    if samples.is_empty() {
        return Err(MonteCarloError::AllRunsDegenerate { runs: n_runs });
    }
    Ok(PeriodUplift {
        horizon,
        runs: n_runs,
        degenerate: n_runs - samples.len() as u64,
        distribution: EmpiricalDistribution::new(samples)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AprDelta {
    /// `base_apr * el_share * uplift`, in APR units.
    pub absolute: Fraction,
    /// `el_share * uplift`: the relative change in total rewards.
    pub relative: Fraction,
    pub new_apr: Fraction,
}

pub fn apr_delta(uplift: Fraction, model: &RewardModel) -> AprDelta {
    let relative = model.el_share * uplift;
    let absolute = model.base_apr * relative;
    AprDelta {
        absolute,
        relative,
        new_apr: model.base_apr + absolute,
    }
}

/// Nearest rational to an f64 uplift, for feeding [`apr_delta`].
pub fn fraction_from_f64(x: f64) -> Fraction {
    Ratio::approximate_float(x).unwrap_or_else(|| Fraction::from_integer(0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpliftReport {
    pub horizon: Horizon,
    /// Relative uplift quantiles.
    pub summary: QuantileSummary,
    /// Absolute APR change at each uplift quantile.
    pub apr_delta: QuantileSummary,
    pub median_apr: AprDelta,
    pub period: PeriodUplift,
    pub skipped_blocks: usize,
}

impl UpliftReport {
    pub fn from_period(period: PeriodUplift, model: &RewardModel, skipped_blocks: usize) -> Self {
        let summary = period.distribution.summarize();
        let apr = |u: f64| fraction_to_f64(&apr_delta(fraction_from_f64(u), model).absolute);
        Self {
            horizon: period.horizon,
            summary,
            apr_delta: summary.map(apr),
            median_apr: apr_delta(fraction_from_f64(summary.q50), model),
            period,
            skipped_blocks,
        }
    }
}

/// Annual uplift when the delay of each block is drawn from the realized
/// eligibility of a delayed strategy rather than fixed. `baseline` is the
/// eligibility the operator would have had without delaying.
pub fn annual_pilot_uplift(
    model: &RewardModel,
    pilot_eligibility: &EmpiricalDistribution,
    baseline: &EmpiricalDistribution,
    auctions: &[SlotAuction],
    vp: VotingPower,
    config: &SimConfig,
) -> Result<UpliftReport, MonteCarloError> {
    if auctions.is_empty() {
        return Err(MonteCarloError::EmptyInput);
    }
    let per_block = run_uplift_simulation_with(
        auctions,
        baseline,
        &DelaySource::Sampled(pilot_eligibility.clone()),
        config,
    )?;
    let annual_model = RewardModel {
        uplift: per_block.distribution.clone(),
        ..model.clone()
    };
    let period = period_uplift(vp, &annual_model, Horizon::Annual, config.n_runs, config.seed)?;
    Ok(UpliftReport::from_period(period, &annual_model, per_block.skipped))
}
