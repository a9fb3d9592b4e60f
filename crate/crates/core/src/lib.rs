// SPDX-License-Identifier: Apache-2.0

//! Analytics and simulation for MEV-Boost auction timing games.
//!
//! The crate reconstructs per-slot builder auctions from relay bid traces,
//! measures what a proposer gains by delaying its header request, and prices
//! the extra next-slot burn that a heavier delayed block causes.

pub mod auction;
pub mod distributions;
pub mod fee_market;
pub mod ingest;
pub mod montecarlo;
pub mod synthetic;
pub mod timing;
pub mod units;
