// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Bid-trace analytics and latency-strategy simulation for MEV-Boost
/// auctions.
///
/// Numeric defaults come from the settings file given with --config and
/// otherwise from the built-in values listed in each flag's help. Flags
/// always win over the settings file.
#[derive(Debug, Parser)]
#[command(name = "timing-games", version)]
pub struct Cli {
    /// TOML settings file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Curves of R, gas, transactions and burn against bid time, plus the
    /// winning-bid eligibility PDF and CDF.
    Analyze(AnalyzeArgs),
    /// Monte Carlo reports.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Write an ECDF cache file from a trace export.
    Ecdf(EcdfArgs),
    /// Write a synthetic trace corpus.
    Generate(GenerateArgs),
    /// Rerun the command recorded in a bundle manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Per-block value uplift from delaying the header query.
    Uplift(UpliftArgs),
    /// Relative increase of next-slot burn from delaying.
    Burn(BurnArgs),
    /// MEV-weighted uplift over one week of proposals.
    Weekly(PeriodArgs),
    /// Annual uplift with per-block delays drawn from a simulated pilot
    /// strategy.
    Annual(AnnualArgs),
    /// Paired comparison of proposer strategies.
    Strategies(StrategyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Jsonl,
    Csv,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Trace export (JSONL or CSV).
    pub traces: PathBuf,
    /// Trace format [default: from the file extension].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Delivered payloads (JSONL), used to identify each slot's winner.
    #[arg(long, value_name = "FILE")]
    pub delivered: Option<PathBuf>,
    /// Abort on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Bundle directory to create.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Replace an existing, non-empty bundle directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// RNG seed [default: generated and printed].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Delayed header query time in ms after slot start [default: 950].
    #[arg(long, value_name = "MS", allow_negative_numbers = true)]
    pub delay_ms: Option<i64>,
    /// Monte Carlo runs [default: 1000].
    #[arg(long)]
    pub runs: Option<u64>,
    /// Let a builder's later bid replace its earlier ones at the same relay.
    #[arg(long)]
    pub supersede: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// Voting power, as a share of total stake in [0, 1].
    #[arg(long, required = true)]
    pub vp: f64,
    /// Execution-layer share of staking rewards [default: 0.30].
    #[arg(long)]
    pub el_share: Option<f64>,
    /// Base staking APR as a fraction [default: 0.042].
    #[arg(long)]
    pub base_apr: Option<f64>,
    /// ECDF cache of per-block MEV in wei [default: winning bid values].
    #[arg(long, value_name = "FILE")]
    pub mev_ecdf: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Bin width in ms [default: 100].
    #[arg(long, value_name = "MS")]
    pub bins_ms: Option<i64>,
    /// R denominator cutoff in ms [default: 2000].
    #[arg(long, value_name = "MS", allow_negative_numbers = true)]
    pub cutoff_ms: Option<i64>,
    /// Let a builder's later bid replace its earlier ones at the same relay.
    #[arg(long)]
    pub supersede: bool,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct UpliftArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// ECDF cache of baseline query times in ms [default: winning bid
    /// eligibility].
    #[arg(long, value_name = "FILE")]
    pub baseline_ecdf: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BurnArgs {
    #[command(flatten)]
    pub uplift: UpliftArgs,
    /// Base fee per gas in wei [default: 20000000000].
    #[arg(long)]
    pub base_fee_wei: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PeriodArgs {
    #[command(flatten)]
    pub uplift: UpliftArgs,
    #[command(flatten)]
    pub reward: RewardArgs,
}

#[derive(Debug, Args)]
pub struct AnnualArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub reward: RewardArgs,
    /// Strategy that sets the per-block delay [default: normal].
    #[arg(long)]
    pub pilot: Option<String>,
    /// Strategy that sets the no-delay baseline [default: benchmark].
    #[arg(long)]
    pub baseline: Option<String>,
}

#[derive(Debug, Args)]
pub struct StrategyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EcdfKind {
    /// Winning bid eligibility times, in ms.
    Eligibility,
    /// Winning bid values, in wei.
    Value,
}

#[derive(Debug, Args)]
pub struct EcdfArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum)]
    pub kind: EcdfKind,
    /// Cache file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Trace file to write.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Trace format [default: from the file extension].
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Also write delivered payloads (JSONL) here.
    #[arg(long, value_name = "FILE")]
    pub delivered_out: Option<PathBuf>,
    /// Number of slots [default: 500].
    #[arg(long)]
    pub slots: Option<u64>,
    /// First slot number [default: 8000000].
    #[arg(long)]
    pub first_slot: Option<u64>,
    /// Share of records written without an eligibility time [default: 0].
    #[arg(long)]
    pub omit_eligibility: Option<f64>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// manifest.json of an earlier bundle.
    pub manifest: PathBuf,
    #[command(flatten)]
    pub output: OutputArgs,
}
