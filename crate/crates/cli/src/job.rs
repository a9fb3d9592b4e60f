// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use timing_games_core::auction::SlotAuction;
use timing_games_core::distributions::{read_ecdf_cache, source_digest, EmpiricalDistribution};
use timing_games_core::ingest::{
    build_auctions, parse_delivered, parse_traces, to_auctions, winning_bid_eligibility_ecdf, winning_value_ecdf,
    IngestError, TraceFormat,
};
use timing_games_core::montecarlo::VotingPower;

use crate::bundle::{InputDigest, Manifest, ReportBundle};
use crate::commands::{self, Report};
use crate::config::Settings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Uplift,
    Burn,
    Weekly,
    Annual,
    Strategies,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Uplift => "simulate uplift",
            Command::Burn => "simulate burn",
            Command::Weekly => "simulate weekly",
            Command::Annual => "simulate annual",
            Command::Strategies => "simulate strategies",
        }
    }

    fn needs_vp(self) -> bool {
        matches!(self, Command::Weekly | Command::Annual)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub traces: PathBuf,
    /// `jsonl` or `csv`.
    pub format: String,
    pub strict: bool,
    pub delivered: Option<PathBuf>,
    /// Overrides the winning-bid eligibility ECDF used as the baseline.
    pub baseline_ecdf: Option<PathBuf>,
    /// Overrides the winning-bid value ECDF used as per-block MEV.
    pub mev_ecdf: Option<PathBuf>,
}

/// A fully resolved command: replaying it needs nothing else but the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub command: Command,
    pub inputs: Inputs,
    pub seed: u64,
    pub vp: Option<f64>,
    pub settings: Settings,
}

impl Job {
    /// Checks flags and settings; called before any input is read.
    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        self.inputs.format.parse::<TraceFormat>()?;
        match (self.command.needs_vp(), self.vp) {
            (true, None) => bail!("{} requires --vp", self.command.name()),
            (false, Some(_)) => bail!("--vp does not apply to {}", self.command.name()),
            (true, Some(vp)) => {
                VotingPower::new(vp)?;
            }
            (false, None) => {}
        }
        if self.inputs.mev_ecdf.is_some() && !self.command.needs_vp() {
            bail!("--mev-ecdf does not apply to {}", self.command.name());
        }
        if self.inputs.baseline_ecdf.is_some()
            && matches!(self.command, Command::Analyze | Command::Strategies | Command::Annual)
        {
            bail!("--baseline-ecdf does not apply to {}", self.command.name());
        }
        Ok(())
    }

    pub fn vp(&self) -> Result<VotingPower> {
        Ok(VotingPower::new(self.vp.context("missing voting power")?)?)
    }
}

/// Input bytes read once, so hashing and parsing see the same content.
pub struct LoadedInput {
    pub digest: InputDigest,
    pub bytes: Vec<u8>,
}

fn read_input(role: &str, path: &Path) -> Result<LoadedInput> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {role} {}", path.display()))?;
    let digest = InputDigest {
        role: role.into(),
        path: path.to_path_buf(),
        sha256: source_digest(&bytes),
    };
    Ok(LoadedInput { digest, bytes })
}

fn read_ecdf(input: &LoadedInput) -> Result<EmpiricalDistribution> {
    let cache =
        read_ecdf_cache(&input.bytes[..]).with_context(|| format!("reading {}", input.digest.path.display()))?;
    Ok(cache.distribution)
}

/// Parsed inputs shared by every command.
pub struct Dataset {
    pub auctions: Vec<SlotAuction>,
    pub delivered: Option<BTreeMap<u64, String>>,
    pub records: usize,
    pub parse_errors: usize,
    pub synthesized: usize,
    pub dropped: usize,
    pub duplicates: usize,
    baseline_override: Option<EmpiricalDistribution>,
    mev_override: Option<EmpiricalDistribution>,
}

impl Dataset {
    /// Winning-bid eligibility in ms, unless overridden by a cache file.
    pub fn baseline(&self) -> Result<EmpiricalDistribution> {
        match &self.baseline_override {
            Some(d) => Ok(d.clone()),
            None => Ok(winning_bid_eligibility_ecdf(&self.auctions, self.delivered.as_ref())?),
        }
    }

    /// Winning-bid value in wei, unless overridden by a cache file.
    pub fn mev(&self) -> Result<EmpiricalDistribution> {
        match &self.mev_override {
            Some(d) => Ok(d.clone()),
            None => Ok(winning_value_ecdf(&self.auctions, self.delivered.as_ref())?),
        }
    }
}

pub fn load(job: &Job) -> Result<(Dataset, Vec<InputDigest>)> {
    let inputs = &job.inputs;
    let format: TraceFormat = inputs.format.parse()?;
    let traces = read_input("traces", &inputs.traces)?;
    let parsed = parse_traces(&traces.bytes[..], format, inputs.strict)
        .with_context(|| format!("parsing {}", inputs.traces.display()))?;
    if parsed.records.is_empty() {
        return Err(IngestError::EmptyInput)
            .with_context(|| format!("no trace records in {}", inputs.traces.display()));
    }
    let records = parsed.records.len();
    let outcome = to_auctions(&parsed.records, &job.settings.chain)?;
    let loaded = build_auctions(outcome, &job.settings.lag_model()?, job.seed)?;
    if loaded.auctions.is_empty() {
        return Err(IngestError::EmptyInput)
            .with_context(|| format!("no record in {} falls inside its slot window", inputs.traces.display()));
    }
    let supersede = job.settings.simulation.supersede;
    let auctions = loaded
        .auctions
        .into_iter()
        .map(|a| a.with_supersede(supersede))
        .collect();

    let mut digests = vec![traces.digest];
    let delivered = match &inputs.delivered {
        Some(path) => {
            let input = read_input("delivered", path)?;
            let map = parse_delivered(&input.bytes[..]).with_context(|| format!("parsing {}", path.display()))?;
            digests.push(input.digest);
            Some(map.into_iter().map(|(slot, p)| (slot, p.block_hash)).collect())
        }
        None => None,
    };
    let mut cache = |role: &str, path: &Option<PathBuf>| -> Result<Option<EmpiricalDistribution>> {
        let Some(path) = path else { return Ok(None) };
        let input = read_input(role, path)?;
        let dist = read_ecdf(&input)?;
        digests.push(input.digest);
        Ok(Some(dist))
    };
    let baseline_override = cache("baseline-ecdf", &inputs.baseline_ecdf)?;
    let mev_override = cache("mev-ecdf", &inputs.mev_ecdf)?;
    let data = Dataset {
        auctions,
        delivered,
        records,
        parse_errors: parsed.errors.len(),
        synthesized: loaded.synthesized,
        dropped: loaded.dropped,
        duplicates: loaded.duplicates,
        baseline_override,
        mev_override,
    };
    Ok((data, digests))
}

/// Runs a job and assembles its bundle without touching the output path.
pub fn execute(job: &Job) -> Result<(ReportBundle, Vec<String>)> {
    job.validate()?;
    let (data, inputs) = load(job)?;
    let Report {
        tables,
        plots,
        headline,
    } = commands::run(job, &data)?;
    let mut bundle = ReportBundle {
        tables,
        plots,
        manifest: Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            job: job.clone(),
            inputs,
            outputs: BTreeMap::new(),
        },
    };
    bundle.manifest.outputs = bundle.output_digests();
    Ok((bundle, headline))
}
