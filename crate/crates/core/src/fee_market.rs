// SPDX-License-Identifier: Apache-2.0

//! EIP-1559 base-fee controller and the next-slot burn a delayed block causes.
//!
//! Delaying the header request tends to select heavier blocks. A heavier
//! block raises the next base fee, so the following proposer sees more of the
//! value in its slot burned. Next-slot gas is held at the controller target
//! when converting a base-fee change into a burn change.

use num_rational::Ratio;
use num_traits::{CheckedMul, CheckedSub, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{best_eligible_bid, AuctionError, RelayFilter, SlotAuction, BLOCK_GAS_LIMIT};
use crate::units::{Fraction, SlotTimeMs, UnitsError, WeiAmount};

pub const DEFAULT_GAS_LIMIT: u64 = BLOCK_GAS_LIMIT;
pub const DEFAULT_ADJUSTMENT_DENOMINATOR: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeeMarketError {
    #[error("gas used {gas_used} exceeds gas limit {gas_limit}")]
    GasAboveLimit { gas_used: u64, gas_limit: u64 },
    #[error("invalid fee market state: {0}")]
    InvalidState(String),
    #[error("no bid eligible at baseline {0}")]
    NoBaselineBid(SlotTimeMs),
    #[error("delay {delay} precedes baseline {baseline}")]
    DelayBeforeBaseline { baseline: SlotTimeMs, delay: SlotTimeMs },
    #[error(transparent)]
    Auction(#[from] AuctionError),
    #[error(transparent)]
    Units(#[from] UnitsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeMarketState {
    pub base_fee_per_gas: WeiAmount,
    pub gas_target: u64,
    pub gas_limit: u64,
    pub adjustment_denominator: u64,
}

impl FeeMarketState {
    /// Target is half the limit.
    pub fn new(
        base_fee_per_gas: WeiAmount,
        gas_limit: u64,
        adjustment_denominator: u64,
    ) -> Result<Self, FeeMarketError> {
        if base_fee_per_gas.is_zero() {
            return Err(FeeMarketError::InvalidState("base fee must be positive".into()));
        }
        if gas_limit < 2 {
            return Err(FeeMarketError::InvalidState(format!("gas limit {gas_limit} too small")));
        }
        if adjustment_denominator == 0 {
            return Err(FeeMarketError::InvalidState(
                "adjustment denominator must be positive".into(),
            ));
        }
        Ok(Self {
            base_fee_per_gas,
            gas_target: gas_limit / 2,
            gas_limit,
            adjustment_denominator,
        })
    }

    /// 30M gas limit, 15M target, denominator 8.
    pub fn mainnet(base_fee_per_gas: WeiAmount) -> Result<Self, FeeMarketError> {
        Self::new(base_fee_per_gas, DEFAULT_GAS_LIMIT, DEFAULT_ADJUSTMENT_DENOMINATOR)
    }

    /// Base fee after this block, as a new state.
    pub fn advance(&self, gas_used: u64) -> Result<Self, FeeMarketError> {
        Ok(Self {
            base_fee_per_gas: next_base_fee(self, gas_used)?,
            ..*self
        })
    }
}

/// Canonical EIP-1559 update with floor division; an above-target block
/// always raises the fee by at least one wei.
pub fn next_base_fee(state: &FeeMarketState, gas_used: u64) -> Result<WeiAmount, FeeMarketError> {
    if gas_used > state.gas_limit {
        return Err(FeeMarketError::GasAboveLimit {
            gas_used,
            gas_limit: state.gas_limit,
        });
    }
    let base = state.base_fee_per_gas;
    let target = state.gas_target as u128;
    let denom = state.adjustment_denominator as u128;
    let used = gas_used as u128;
    if used == target {
        return Ok(base);
    }
    if used > target {
        let delta = base.checked_mul(used - target)?.wei() / target / denom;
        base.checked_add(WeiAmount::from_wei(delta.max(1))).map_err(Into::into)
    } else {
        let delta = base.checked_mul(target - used)?.wei() / target / denom;
        base.checked_sub(WeiAmount::from_wei(delta)).map_err(Into::into)
    }
}

/// Relative change in next-slot burn between selecting the winner at
/// `baseline` and the winner at `delay`. Next-slot gas is held at target, so
/// this is the relative change of the next base fee.
pub fn burn_increase_for_delay(
    auction: &SlotAuction,
    baseline: SlotTimeMs,
    delay: SlotTimeMs,
    state: &FeeMarketState,
) -> Result<Fraction, FeeMarketError> {
    if delay < baseline {
        return Err(FeeMarketError::DelayBeforeBaseline { baseline, delay });
    }
    let base_winner =
        best_eligible_bid(auction, &RelayFilter::All, baseline).ok_or(FeeMarketError::NoBaselineBid(baseline))?;
    let delayed_winner =
        best_eligible_bid(auction, &RelayFilter::All, delay).ok_or(FeeMarketError::NoBaselineBid(baseline))?;
    let burn_base = next_slot_burn(state, base_winner.gas_used)?;
    let burn_delayed = next_slot_burn(state, delayed_winner.gas_used)?;
    let base = burn_base.to_i128()?;
    Ok(Fraction::new(burn_delayed.to_i128()? - base, base))
}

/// Burn of a target-sized block priced at the base fee that follows a block
/// using `gas_used`.
pub fn next_slot_burn(state: &FeeMarketState, gas_used: u64) -> Result<WeiAmount, FeeMarketError> {
    Ok(next_base_fee(state, gas_used)?.checked_mul(state.gas_target as u128)?)
}

/// How an increase in next-slot burn eats into a proposer's MEV reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurnImpact {
    pub burn_increase: Fraction,
    /// Floored to whole wei, never negative.
    pub adjusted_reward: WeiAmount,
    /// `(reward - adjusted) / reward`, computed before the wei floor.
    pub reward_decrease: Fraction,
}

/// `adjusted = reward - burnt * burn_increase`, floored at zero.
pub fn burn_impact_on_reward(
    mev_reward: WeiAmount,
    burnt: WeiAmount,
    burn_increase: Fraction,
) -> Result<BurnImpact, FeeMarketError> {
    let reward = Fraction::from_integer(mev_reward.to_i128()?);
    let extra_burn = Fraction::from_integer(burnt.to_i128()?)
        .checked_mul(&burn_increase)
        .ok_or(UnitsError::Overflow)?;
    let mut adjusted = reward.checked_sub(&extra_burn).ok_or(UnitsError::Overflow)?;
    if adjusted < Fraction::zero() {
        adjusted = Fraction::zero();
    }
    let reward_decrease = if reward.is_zero() {
        Fraction::zero()
    } else {
        (reward - adjusted) / reward
    };
    let floored = adjusted.floor().to_integer();
    Ok(BurnImpact {
        burn_increase,
        adjusted_reward: WeiAmount::from_wei(floored as u128),
        reward_decrease,
    })
}

/// `num / den` as an exact fraction, e.g. `ratio(5, 1000)` for 0.5%.
pub fn ratio(num: i128, den: i128) -> Fraction {
    Ratio::new(num, den)
}
