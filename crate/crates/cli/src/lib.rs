// SPDX-License-Identifier: Apache-2.0

//! The `timing-games` command line: reads trace exports, runs the analyses
//! in `timing-games-core`, and writes report bundles of CSV tables, SVG
//! plots and a replayable manifest.

pub mod bundle;
pub mod cli;
pub mod commands;
pub mod config;
pub mod job;
pub mod svg;
pub mod table;

use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use timing_games_core::distributions::{write_ecdf_cache, EcdfCache, SampleUnits};
use timing_games_core::ingest::{serialize_traces, ChainConfig, TraceFormat};
use timing_games_core::synthetic::{generate_corpus, CorpusParams};

use crate::bundle::{check_output_dir, write_file_atomic, Manifest};
use crate::cli::{
    AnalyzeArgs, Cli, Commands, EcdfArgs, EcdfKind, FormatArg, GenerateArgs, InputArgs, ReplayArgs, RewardArgs,
    SeedArg, SimArgs, SimulateCommand,
};
use crate::config::Settings;
use crate::job::{Command, Inputs, Job};

pub fn run(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    match cli.command {
        Commands::Analyze(args) => analyze(args, settings),
        Commands::Simulate(cmd) => {
            let (job, out) = simulate_job(cmd, &mut settings)?;
            run_job(&job, &out.out, out.force)
        }
        Commands::Ecdf(args) => ecdf(args, settings),
        Commands::Generate(args) => generate(args, &settings.chain),
        Commands::Replay(args) => replay(args),
    }
}

fn format_name(arg: Option<FormatArg>, path: &Path) -> Result<String> {
    let format = match arg {
        Some(FormatArg::Jsonl) => TraceFormat::Jsonl,
        Some(FormatArg::Csv) => TraceFormat::Csv,
        None => TraceFormat::from_path(path)?,
    };
    Ok(format.to_string())
}

fn inputs(args: InputArgs) -> Result<Inputs> {
    Ok(Inputs {
        format: format_name(args.format, &args.traces)?,
        traces: args.traces,
        strict: args.strict,
        delivered: args.delivered,
        baseline_ecdf: None,
        mev_ecdf: None,
    })
}

fn resolve_seed(arg: SeedArg) -> u64 {
    arg.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        eprintln!("seed: {seed} (generated; pass --seed {seed} to reproduce)");
        seed
    })
}

fn apply_sim(settings: &mut Settings, sim: &SimArgs) {
    let s = &mut settings.simulation;
    if let Some(d) = sim.delay_ms {
        s.delay_ms = d;
    }
    if let Some(r) = sim.runs {
        s.runs = r;
    }
    s.supersede |= sim.supersede;
}

fn apply_reward(settings: &mut Settings, reward: &RewardArgs) {
    if let Some(x) = reward.el_share {
        settings.rewards.el_share = x;
    }
    if let Some(x) = reward.base_apr {
        settings.rewards.base_apr = x;
    }
}

fn analyze(args: AnalyzeArgs, mut settings: Settings) -> Result<()> {
    if let Some(b) = args.bins_ms {
        settings.analysis.bins_ms = b;
    }
    if let Some(c) = args.cutoff_ms {
        settings.analysis.cutoff_ms = c;
    }
    settings.simulation.supersede |= args.supersede;
    let job = Job {
        command: Command::Analyze,
        inputs: inputs(args.input)?,
        seed: resolve_seed(args.seed),
        vp: None,
        settings,
    };
    run_job(&job, &args.output.out, args.output.force)
}

fn simulate_job(cmd: SimulateCommand, settings: &mut Settings) -> Result<(Job, cli::OutputArgs)> {
    let (command, input, output, sim, baseline_ecdf, reward) = match cmd {
        SimulateCommand::Uplift(a) => (Command::Uplift, a.input, a.output, a.sim, a.baseline_ecdf, None),
        SimulateCommand::Burn(a) => {
            if let Some(fee) = a.base_fee_wei {
                settings.fee_market.base_fee_wei = fee;
            }
            let u = a.uplift;
            (Command::Burn, u.input, u.output, u.sim, u.baseline_ecdf, None)
        }
        SimulateCommand::Weekly(a) => {
            let u = a.uplift;
            (
                Command::Weekly,
                u.input,
                u.output,
                u.sim,
                u.baseline_ecdf,
                Some(a.reward),
            )
        }
        SimulateCommand::Annual(a) => {
            if let Some(p) = a.pilot {
                settings.annual.pilot = p;
            }
            if let Some(b) = a.baseline {
                settings.annual.baseline = b;
            }
            (Command::Annual, a.input, a.output, a.sim, None, Some(a.reward))
        }
        SimulateCommand::Strategies(a) => (Command::Strategies, a.input, a.output, a.sim, None, None),
    };
    apply_sim(settings, &sim);
    if let Some(r) = &reward {
        apply_reward(settings, r);
    }
    let mut inputs = inputs(input)?;
    inputs.baseline_ecdf = baseline_ecdf;
    inputs.mev_ecdf = reward.as_ref().and_then(|r| r.mev_ecdf.clone());
    let job = Job {
        command,
        inputs,
        seed: resolve_seed(sim.seed),
        vp: reward.map(|r| r.vp),
        settings: settings.clone(),
    };
    Ok((job, output))
}

/// Validates, computes, then writes. Nothing is written on failure.
pub fn run_job(job: &Job, out: &Path, force: bool) -> Result<()> {
    job.validate()?;
    check_output_dir(out, force)?;
    let (bundle, headline) = job::execute(job)?;
    bundle.write(out, force)?;
    say(headline.into_iter().chain([format!("wrote {}", out.display())]))
}

/// Prints to stdout. A reader that went away early is not an error.
fn say(lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    for line in lines {
        match writeln!(stdout, "{line}") {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            r => r?,
        }
    }
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let recorded = Manifest::read(&args.manifest)?;
    check_output_dir(&args.output.out, args.output.force)?;
    for input in &recorded.inputs {
        let bytes =
            std::fs::read(&input.path).with_context(|| format!("reading {} {}", input.role, input.path.display()))?;
        if timing_games_core::distributions::source_digest(&bytes) != input.sha256 {
            bail!(
                "{} {} changed since the manifest was written",
                input.role,
                input.path.display()
            );
        }
    }
    let (bundle, headline) = job::execute(&recorded.job)?;
    if bundle.manifest.outputs != recorded.outputs {
        let differing: Vec<&String> = bundle
            .manifest
            .outputs
            .iter()
            .filter(|(k, v)| recorded.outputs.get(*k) != Some(v))
            .map(|(k, _)| k)
            .collect();
        bail!("replay does not reproduce the recorded outputs: {differing:?}");
    }
    bundle.write(&args.output.out, args.output.force)?;
    let done = format!(
        "replayed {} into {}",
        recorded.job.command.name(),
        args.output.out.display()
    );
    say(headline.into_iter().chain([done]))
}

fn ecdf(args: EcdfArgs, settings: Settings) -> Result<()> {
    let job = Job {
        command: Command::Analyze,
        inputs: inputs(args.input)?,
        seed: resolve_seed(args.seed),
        vp: None,
        settings,
    };
    job.validate()?;
    let (data, digests) = job::load(&job)?;
    let (units, distribution) = match args.kind {
        EcdfKind::Eligibility => (SampleUnits::Millis, data.baseline()?),
        EcdfKind::Value => (SampleUnits::Wei, data.mev()?),
    };
    let cache = EcdfCache {
        units,
        source_sha256: digests[0].sha256.clone(),
        distribution,
    };
    let mut bytes = Vec::new();
    write_ecdf_cache(&mut bytes, &cache)?;
    write_file_atomic(&args.out, &bytes)?;
    say([format!(
        "wrote {} samples ({}) to {}",
        cache.distribution.len(),
        units,
        args.out.display()
    )])
}

fn generate(args: GenerateArgs, chain: &ChainConfig) -> Result<()> {
    let format: TraceFormat = format_name(args.format, &args.out)?.parse()?;
    let defaults = CorpusParams::default();
    let params = CorpusParams {
        n_slots: args.slots.unwrap_or(defaults.n_slots),
        first_slot: args.first_slot.unwrap_or(defaults.first_slot),
        omit_eligibility: args.omit_eligibility.unwrap_or(defaults.omit_eligibility),
        seed: resolve_seed(args.seed),
        chain: *chain,
        ..defaults
    };
    if params.n_slots == 0 {
        bail!("--slots must be at least 1");
    }
    let corpus = generate_corpus(&params).map_err(anyhow::Error::msg)?;
    let mut bytes = Vec::new();
    serialize_traces(&mut bytes, &corpus.records, format)?;
    if let Some(path) = &args.delivered_out {
        let mut lines = Vec::new();
        for d in &corpus.delivered {
            serde_json::to_writer(&mut lines, d)?;
            lines.push(b'\n');
        }
        write_file_atomic(path, &lines)?;
    }
    write_file_atomic(&args.out, &bytes)?;
    say([format!(
        "wrote {} records over {} slots to {}",
        corpus.records.len(),
        params.n_slots,
        args.out.display()
    )])
}
