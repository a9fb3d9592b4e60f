// SPDX-License-Identifier: Apache-2.0

//! TOML run settings. Every table and key is optional; see `settings.toml`
//! in the repository root for the full set with defaults.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use timing_games_core::auction::DEFAULT_R_CUTOFF;
use timing_games_core::fee_market::{FeeMarketState, DEFAULT_ADJUSTMENT_DENOMINATOR, DEFAULT_GAS_LIMIT};
use timing_games_core::ingest::ChainConfig;
use timing_games_core::montecarlo::{fraction_from_f64, RewardModel, SLOTS_PER_WEEK};
use timing_games_core::timing::{
    uniform_lag, HazardModel, LagModel, PresetLags, ProposerStrategy, RelayConfig, DEFAULT_DELAY_THRESHOLD,
    DEFAULT_MAX_DELAY, DEFAULT_RUNS,
};
use timing_games_core::units::{SlotTimeMs, WeiAmount};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub analysis: AnalysisSettings,
    pub simulation: SimulationSettings,
    pub chain: ChainConfig,
    pub fee_market: FeeMarketSettings,
    pub rewards: RewardSettings,
    pub lags: LagSettings,
    pub hazard: HazardSettings,
    pub annual: AnnualSettings,
    #[serde(rename = "strategy")]
    pub strategies: Vec<StrategySettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub bins_ms: i64,
    pub cutoff_ms: i64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self {
            bins_ms: 100,
            cutoff_ms: DEFAULT_R_CUTOFF.ms(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSettings {
    pub runs: u64,
    pub delay_ms: i64,
    pub supersede: bool,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            runs: DEFAULT_RUNS,
            delay_ms: DEFAULT_DELAY_THRESHOLD.ms(),
            supersede: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeeMarketSettings {
    pub base_fee_wei: u64,
    pub gas_limit: u64,
    pub adjustment_denominator: u64,
}

impl Default for FeeMarketSettings {
    fn default() -> Self {
        Self {
            base_fee_wei: 20_000_000_000,
            gas_limit: DEFAULT_GAS_LIMIT,
            adjustment_denominator: DEFAULT_ADJUSTMENT_DENOMINATOR,
        }
    }
}

impl FeeMarketSettings {
    pub fn state(&self) -> Result<FeeMarketState> {
        Ok(FeeMarketState::new(
            WeiAmount::from_wei(self.base_fee_wei as u128),
            self.gas_limit,
            self.adjustment_denominator,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardSettings {
    pub el_share: f64,
    pub base_apr: f64,
    pub slots_per_week: u64,
}

impl Default for RewardSettings {
    fn default() -> Self {
        Self {
            el_share: 0.30,
            base_apr: 0.042,
            slots_per_week: SLOTS_PER_WEEK,
        }
    }
}

/// Inclusive millisecond range for a uniform lag.
pub type LagRange = [i64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagSettings {
    pub optimistic_ms: LagRange,
    pub non_optimistic_ms: LagRange,
    /// Per-relay overrides used when traces lack eligibility times.
    pub relays: BTreeMap<String, LagRange>,
}

impl Default for LagSettings {
    fn default() -> Self {
        Self {
            optimistic_ms: [20, 80],
            non_optimistic_ms: [100, 200],
            relays: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HazardSettings {
    /// `(ms, probability)` pairs.
    pub knots: Vec<(i64, f64)>,
}

impl Default for HazardSettings {
    fn default() -> Self {
        Self {
            knots: vec![(950, 0.0), (2_000, 0.05)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnualSettings {
    /// Strategy whose realized eligibility sets the per-block delay.
    pub pilot: String,
    /// Strategy whose realized eligibility is the no-delay baseline.
    pub baseline: String,
}

impl Default for AnnualSettings {
    fn default() -> Self {
        Self {
            pilot: "normal".into(),
            baseline: "benchmark".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySettings {
    pub name: String,
    #[serde(default)]
    pub max_delay_ms: Option<i64>,
    #[serde(rename = "relay")]
    pub relays: Vec<RelaySettings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySettings {
    /// Relay id, or `*` for every relay.
    pub id: String,
    #[serde(default)]
    pub delay_ms: i64,
    #[serde(default)]
    pub optimistic: bool,
    /// Defaults to the `[lags]` range for the relay's mode.
    #[serde(default)]
    pub lag_ms: Option<LagRange>,
}

fn lag(range: LagRange, what: &str) -> Result<timing_games_core::distributions::EmpiricalDistribution> {
    let [lo, hi] = range;
    if lo < 0 || hi < lo {
        bail!("{what}: lag range [{lo}, {hi}] must satisfy 0 <= lo <= hi");
    }
    Ok(uniform_lag(lo, hi))
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let settings: Settings = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        settings.validate()?;
        Ok(settings)
    }

    /// Checks everything that can be checked without input data.
    pub fn validate(&self) -> Result<()> {
        if self.analysis.bins_ms <= 0 {
            bail!("bins_ms must be positive");
        }
        SlotTimeMs::new(self.analysis.cutoff_ms).context("cutoff_ms")?;
        if self.simulation.runs == 0 {
            bail!("runs must be at least 1");
        }
        let max = DEFAULT_R_CUTOFF.ms();
        if !(0..=max).contains(&self.simulation.delay_ms) {
            bail!("delay_ms {} outside [0, {max}]", self.simulation.delay_ms);
        }
        self.chain.validate()?;
        self.fee_market.state()?;
        self.reward_model_check()?;
        self.lag_model()?;
        self.hazard()?;
        self.strategies(SlotTimeMs::from_ms(self.simulation.delay_ms))?;
        Ok(())
    }

    fn reward_model_check(&self) -> Result<()> {
        let r = &self.rewards;
        if !(r.el_share > 0.0 && r.el_share < 1.0) {
            bail!("el_share {} must lie strictly between 0 and 1", r.el_share);
        }
        if !(r.base_apr >= 0.0 && r.base_apr.is_finite()) {
            bail!("base_apr {} must be a non-negative number", r.base_apr);
        }
        if r.slots_per_week == 0 {
            bail!("slots_per_week must be positive");
        }
        Ok(())
    }

    /// Applies `[rewards]` to a model built from the given distributions.
    pub fn reward_model(&self, model: RewardModel) -> Result<RewardModel> {
        self.reward_model_check()?;
        Ok(RewardModel {
            el_share: fraction_from_f64(self.rewards.el_share),
            base_apr: fraction_from_f64(self.rewards.base_apr),
            slots_per_week: self.rewards.slots_per_week,
            ..model
        })
    }

    pub fn lag_model(&self) -> Result<LagModel> {
        let mut per_relay = BTreeMap::new();
        for (id, range) in &self.lags.relays {
            per_relay.insert(id.clone(), lag(*range, id)?);
        }
        let model = LagModel {
            default: lag(self.lags.non_optimistic_ms, "non_optimistic_ms")?,
            per_relay,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn preset_lags(&self) -> Result<PresetLags> {
        Ok(PresetLags {
            optimistic: lag(self.lags.optimistic_ms, "optimistic_ms")?,
            non_optimistic: lag(self.lags.non_optimistic_ms, "non_optimistic_ms")?,
        })
    }

    pub fn hazard(&self) -> Result<HazardModel> {
        if self.hazard.knots.is_empty() {
            return Ok(HazardModel::zero());
        }
        let knots = self
            .hazard
            .knots
            .iter()
            .map(|(t, p)| Ok((SlotTimeMs::new(*t)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(HazardModel::new(knots)?)
    }

    /// Configured strategies, or the four presets over all relays when none
    /// are configured.
    pub fn strategies(&self, threshold: SlotTimeMs) -> Result<Vec<ProposerStrategy>> {
        let lags = self.preset_lags()?;
        if self.strategies.is_empty() {
            return Ok(ProposerStrategy::pilot_presets(threshold, &lags)?);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::with_capacity(self.strategies.len());
        for s in &self.strategies {
            if !seen.insert(s.name.as_str()) {
                bail!("strategy {:?} defined twice", s.name);
            }
            let relays = s
                .relays
                .iter()
                .map(|r| {
                    let eligibility_lag = match r.lag_ms {
                        Some(range) => lag(range, &r.id)?,
                        None if r.optimistic => lags.optimistic.clone(),
                        None => lags.non_optimistic.clone(),
                    };
                    Ok(RelayConfig {
                        relay_id: r.id.clone(),
                        optimistic: r.optimistic,
                        eligibility_lag,
                        artificial_delay: SlotTimeMs::new(r.delay_ms)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let max_delay = match s.max_delay_ms {
                Some(ms) => SlotTimeMs::new(ms)?,
                None => DEFAULT_MAX_DELAY,
            };
            let strategy = ProposerStrategy {
                name: s.name.clone(),
                relays,
                max_delay,
            };
            strategy.validate()?;
            out.push(strategy);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let s: Settings = toml::from_str("").unwrap();
        assert_eq!(s, Settings::default());
        s.validate().unwrap();
        assert_eq!(s.strategies(SlotTimeMs::from_ms(950)).unwrap().len(), 4);
    }

    #[test]
    fn strategies_from_toml() {
        let s: Settings = toml::from_str(
            r#"
            [simulation]
            delay_ms = 800

            [[strategy]]
            name = "honest"
            [[strategy.relay]]
            id = "flashbots"

            [[strategy]]
            name = "late"
            max_delay_ms = 1500
            [[strategy.relay]]
            id = "ultrasound"
            delay_ms = 1400
            optimistic = true
            lag_ms = [10, 30]
            "#,
        )
        .unwrap();
        s.validate().unwrap();
        let strategies = s.strategies(SlotTimeMs::from_ms(800)).unwrap();
        assert_eq!(strategies[1].relays[0].artificial_delay.ms(), 1400);
        assert_eq!(strategies[1].relays[0].eligibility_lag.max(), 30.0);
        assert_eq!(strategies[0].relays[0].eligibility_lag.min(), 100.0);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[simulation]\nruns = 0",
            "[simulation]\ndelay_ms = 2500",
            "[rewards]\nel_share = 1.5",
            "[lags]\noptimistic_ms = [50, 10]",
            "[hazard]\nknots = [[900, 1.5]]",
            "[typo]\nx = 1",
            "[[strategy]]\nname = \"a\"\nmax_delay_ms = 100\n[[strategy.relay]]\nid = \"*\"\ndelay_ms = 200",
        ] {
            let parsed: Result<Settings, _> = toml::from_str(text);
            assert!(
                parsed.map_err(anyhow::Error::from).and_then(|s| s.validate()).is_err(),
                "{text}"
            );
        }
    }
}
