// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::auction::RelayFilter;
use crate::distributions::EmpiricalDistribution;
use crate::units::SlotTimeMs;

/// Relay id that matches bids from every relay.
pub const ANY_RELAY: &str = "*";

pub const DEFAULT_MAX_DELAY: SlotTimeMs = SlotTimeMs::from_ms(1_200);
pub const MAX_LAG_MS: f64 = 2_000.0;

/// How a proposer talks to one relay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayConfig {
    pub relay_id: String,
    pub optimistic: bool,
    /// Milliseconds between a bid reaching the relay and the relay serving it.
    pub eligibility_lag: EmpiricalDistribution,
    /// getHeader delay used for this relay.
    pub artificial_delay: SlotTimeMs,
}

impl RelayConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.artificial_delay < SlotTimeMs::ZERO {
            return Err(SimError::InvalidStrategy(format!(
                "relay {}: negative delay {}",
                self.relay_id, self.artificial_delay
            )));
        }
        if self.eligibility_lag.min() < 0.0 || self.eligibility_lag.max() > MAX_LAG_MS {
            return Err(SimError::InvalidStrategy(format!(
                "relay {}: lag samples must lie in [0, 2000] ms",
                self.relay_id
            )));
        }
        Ok(())
    }

    pub fn filter(&self) -> RelayFilter {
        if self.relay_id == ANY_RELAY {
            RelayFilter::All
        } else {
            RelayFilter::only([self.relay_id.as_str()])
        }
    }
}

/// Lag models used when building presets.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetLags {
    pub optimistic: EmpiricalDistribution,
    pub non_optimistic: EmpiricalDistribution,
}

impl Default for PresetLags {
    /// Non-optimistic relays lag uniformly over 100..=200 ms; optimistic ones
    /// skip validation and lag over 20..=80 ms.
    fn default() -> Self {
        Self {
            optimistic: uniform_lag(20, 80),
            non_optimistic: uniform_lag(100, 200),
        }
    }
}

/// Uniform lag over the integer milliseconds `lo..=hi`.
pub fn uniform_lag(lo: i64, hi: i64) -> EmpiricalDistribution {
    EmpiricalDistribution::new((lo..=hi.max(lo)).map(|v| v as f64).collect()).expect("non-empty range")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Benchmark,
    Aggressive,
    Normal,
    Moderate,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Benchmark, Preset::Aggressive, Preset::Normal, Preset::Moderate];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Benchmark => "benchmark",
            Preset::Aggressive => "aggressive",
            Preset::Normal => "normal",
            Preset::Moderate => "moderate",
        }
    }

    /// Delay for a given safety threshold.
    pub fn delay(self, threshold: SlotTimeMs) -> SlotTimeMs {
        match self {
            Preset::Benchmark => SlotTimeMs::ZERO,
            Preset::Aggressive => threshold,
            Preset::Normal => SlotTimeMs::from_ms(700),
            Preset::Moderate => threshold.saturating_add_ms(-100).max(SlotTimeMs::ZERO),
        }
    }

    pub fn optimistic(self) -> bool {
        matches!(self, Preset::Normal | Preset::Moderate)
    }
}

impl std::str::FromStr for Preset {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SimError::InvalidStrategy(format!("unknown preset {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposerStrategy {
    pub name: String,
    pub relays: Vec<RelayConfig>,
    pub max_delay: SlotTimeMs,
}

impl ProposerStrategy {
    pub fn new(name: impl Into<String>, relays: Vec<RelayConfig>) -> Result<Self, SimError> {
        let s = Self {
            name: name.into(),
            relays,
            max_delay: DEFAULT_MAX_DELAY,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.relays.is_empty() {
            return Err(SimError::InvalidStrategy(format!("strategy {}: no relays", self.name)));
        }
        for relay in &self.relays {
            relay.validate()?;
            if relay.artificial_delay > self.max_delay {
                return Err(SimError::InvalidStrategy(format!(
                    "strategy {}: delay {} exceeds cap {}",
                    self.name, relay.artificial_delay, self.max_delay
                )));
            }
        }
        Ok(())
    }

    /// One preset over the given relays. The benchmark always queries two
    /// relays; with a single id it queries that relay twice, with independent
    /// lag draws.
    pub fn preset(
        preset: Preset,
        relay_ids: &[&str],
        threshold: SlotTimeMs,
        lags: &PresetLags,
    ) -> Result<Self, SimError> {
        if relay_ids.is_empty() {
            return Err(SimError::InvalidStrategy(format!(
                "preset {}: no relays",
                preset.name()
            )));
        }
        let ids: Vec<&str> = match preset {
            Preset::Benchmark if relay_ids.len() == 1 => vec![relay_ids[0], relay_ids[0]],
            Preset::Benchmark => relay_ids[..2].to_vec(),
            _ => relay_ids.to_vec(),
        };
        let lag = if preset.optimistic() {
            &lags.optimistic
        } else {
            &lags.non_optimistic
        };
        let relays = ids
            .into_iter()
            .map(|id| RelayConfig {
                relay_id: id.to_string(),
                optimistic: preset.optimistic(),
                eligibility_lag: lag.clone(),
                artificial_delay: preset.delay(threshold),
            })
            .collect();
        Self::new(preset.name(), relays)
    }

    /// Benchmark, aggressive, normal and moderate over all relays, in that
    /// order.
    pub fn pilot_presets(threshold: SlotTimeMs, lags: &PresetLags) -> Result<Vec<Self>, SimError> {
        Preset::ALL
            .into_iter()
            .map(|p| Self::preset(p, &[ANY_RELAY], threshold, lags))
            .collect()
    }
}

/// Piecewise-linear missed-slot probability against effective query time.
/// Flat before the first knot and after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardModel {
    knots: Vec<(SlotTimeMs, f64)>,
}

impl HazardModel {
    pub fn new(knots: Vec<(SlotTimeMs, f64)>) -> Result<Self, SimError> {
        if knots.is_empty() {
            return Err(SimError::InvalidHazard("no knots".into()));
        }
        for (i, &(_, p)) in knots.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidHazard(format!(
                    "knot {i}: probability {p} outside [0, 1]"
                )));
            }
        }
        for w in knots.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::InvalidHazard("knot times must strictly increase".into()));
            }
            if w[1].1 < w[0].1 {
                return Err(SimError::InvalidHazard("probabilities must not decrease".into()));
            }
        }
        Ok(Self { knots })
    }

    /// Zero up to `start`, rising linearly to `p_max` at `end`.
    pub fn ramp(start: SlotTimeMs, end: SlotTimeMs, p_max: f64) -> Result<Self, SimError> {
        Self::new(vec![(start, 0.0), (end, p_max)])
    }

    pub fn zero() -> Self {
        Self {
            knots: vec![(SlotTimeMs::ZERO, 0.0)],
        }
    }

    pub fn knots(&self) -> &[(SlotTimeMs, f64)] {
        &self.knots
    }

    pub fn at(&self, t: SlotTimeMs) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if t <= first.0 {
            return first.1;
        }
        if t >= last.0 {
            return last.1;
        }
        let i = self.knots.partition_point(|k| k.0 <= t);
        let (t0, p0) = self.knots[i - 1];
        let (t1, p1) = self.knots[i];
        let frac = (t.ms() - t0.ms()) as f64 / (t1.ms() - t0.ms()) as f64;
        p0 + frac * (p1 - p0)
    }
}

impl Default for HazardModel {
    /// Zero through 950 ms, rising to 5% at 2000 ms.
    fn default() -> Self {
        Self::ramp(SlotTimeMs::from_ms(950), SlotTimeMs::from_ms(2_000), 0.05).expect("valid default")
    }
}
