// SPDX-License-Identifier: Apache-2.0

use anyhow::{bail, Context, Result};
use timing_games_core::distributions::{EmpiricalDistribution, QuantileSummary};
use timing_games_core::montecarlo::{annual_pilot_uplift, period_uplift, Horizon, RewardModel, UpliftReport};
use timing_games_core::timing::{
    compare_strategies, run_burn_simulation, run_uplift_simulation, SimConfig, SimulationOutput, StrategyReport,
};
use timing_games_core::units::{fraction_to_f64, SlotTimeMs};

use super::{bin_width, percent_triple, summary_header, Report};
use crate::job::{Dataset, Job};
use crate::svg::{self, Style};
use crate::table::{cdf_points, opt, summary_cells, Table};

fn sim_config(job: &Job) -> Result<SimConfig> {
    let s = &job.settings.simulation;
    let config = SimConfig {
        n_runs: s.runs,
        delay_threshold: SlotTimeMs::new(s.delay_ms)?,
        seed: job.seed,
        supersede: s.supersede,
    };
    config.validate()?;
    Ok(config)
}

/// Per-run records, summary, histogram and CDF of a per-block simulation.
fn per_block(report: &mut Report, name: &str, title: &str, out: &SimulationOutput) -> QuantileSummary {
    let mut runs = Table::new(["run", "slot", "auction_index", "baseline_ms", "delay_ms", name, "exact"]);
    for r in &out.records {
        runs.push([
            r.run.to_string(),
            r.slot.to_string(),
            r.auction_index.to_string(),
            r.baseline.ms().to_string(),
            r.delay.ms().to_string(),
            opt(r.value.as_ref().map(fraction_to_f64)),
            opt(r.value),
        ]);
    }
    report.table(&format!("{name}_runs"), runs);
    let dist = &out.distribution;
    let summary = dist.summarize();
    let mut t = Table::new(["runs", "skipped", "mean"].into_iter().chain(summary_header()));
    t.push(
        [
            out.records.len().to_string(),
            out.skipped.to_string(),
            dist.mean().to_string(),
        ]
        .into_iter()
        .chain(summary_cells(&summary)),
    );
    report.table(&format!("{name}_summary"), t);
    report.distribution(name, title, "relative change", dist, bin_width(dist, 1e-3));
    summary
}

pub fn uplift(job: &Job, data: &Dataset) -> Result<Report> {
    let config = sim_config(job)?;
    let out = run_uplift_simulation(&data.auctions, &data.baseline()?, &config)?;
    let mut report = Report::default();
    let s = per_block(&mut report, "uplift", "Per-block value uplift", &out);
    report.headline.push(percent_triple("per-block uplift", &s));
    Ok(report)
}

pub fn burn(job: &Job, data: &Dataset) -> Result<Report> {
    let config = sim_config(job)?;
    let state = job.settings.fee_market.state()?;
    let out = run_burn_simulation(&data.auctions, &data.baseline()?, &state, &config)?;
    let mut report = Report::default();
    let s = per_block(&mut report, "burn", "Next-slot burn increase", &out);
    report.headline.push(percent_triple("next-slot burn increase", &s));
    Ok(report)
}

fn period_tables(report: &mut Report, job: &Job, name: &str, title: &str, r: &UpliftReport) {
    let mut t = Table::new(
        ["horizon", "vp", "runs", "degenerate", "skipped_blocks"]
            .into_iter()
            .chain(summary_header())
            .chain([
                "apr_delta_q25",
                "apr_delta_q50",
                "apr_delta_q95",
                "median_relative_reward",
                "median_new_apr",
            ]),
    );
    t.push(
        [
            format!("{:?}", r.horizon).to_lowercase(),
            opt(job.vp),
            r.period.runs.to_string(),
            r.period.degenerate.to_string(),
            r.skipped_blocks.to_string(),
        ]
        .into_iter()
        .chain(summary_cells(&r.summary))
        .chain(summary_cells(&r.apr_delta))
        .chain([
            fraction_to_f64(&r.median_apr.relative).to_string(),
            fraction_to_f64(&r.median_apr.new_apr).to_string(),
        ]),
    );
    report.table(&format!("{name}_summary"), t);
    let dist = &r.period.distribution;
    report.distribution(name, title, "relative change", dist, bin_width(dist, 1e-3));
    report.headline.push(percent_triple(title, &r.summary));
    report.headline.push(format!(
        "median APR: {:.4}% -> {:.4}%",
        job.settings.rewards.base_apr * 100.0,
        fraction_to_f64(&r.median_apr.new_apr) * 100.0
    ));
}

pub fn weekly(job: &Job, data: &Dataset) -> Result<Report> {
    let config = sim_config(job)?;
    let vp = job.vp()?;
    let per_block_out = run_uplift_simulation(&data.auctions, &data.baseline()?, &config)?;
    let model = job
        .settings
        .reward_model(RewardModel::new(data.mev()?, per_block_out.distribution.clone()))?;
    let period = period_uplift(vp, &model, Horizon::Weekly, config.n_runs, config.seed)?;
    let r = UpliftReport::from_period(period, &model, per_block_out.skipped);
    let mut report = Report::default();
    let block = per_block(&mut report, "uplift", "Per-block value uplift", &per_block_out);
    report.headline.push(percent_triple("per-block uplift", &block));
    period_tables(&mut report, job, "weekly", "weekly uplift", &r);
    Ok(report)
}

fn realized_eligibility(reports: &[StrategyReport], name: &str) -> Result<EmpiricalDistribution> {
    let r = reports
        .iter()
        .find(|r| r.name == name)
        .with_context(|| format!("no strategy named {name:?}"))?;
    r.winning_eligibility
        .clone()
        .with_context(|| format!("strategy {name:?} never delivered a block"))
}

pub fn annual(job: &Job, data: &Dataset) -> Result<Report> {
    let config = sim_config(job)?;
    let vp = job.vp()?;
    let settings = &job.settings;
    let all = settings.strategies(config.delay_threshold)?;
    let pick = |name: &str| {
        all.iter()
            .find(|s| s.name == name)
            .cloned()
            .with_context(|| format!("annual: unknown strategy {name:?}"))
    };
    let (baseline, pilot) = (pick(&settings.annual.baseline)?, pick(&settings.annual.pilot)?);
    if baseline.name == pilot.name {
        bail!("annual: pilot and baseline are both {:?}", pilot.name);
    }
    let reports = compare_strategies(
        &data.auctions,
        &[baseline.clone(), pilot.clone()],
        &settings.hazard()?,
        &config,
    )?;
    let base_elig = realized_eligibility(&reports, &baseline.name)?;
    let pilot_elig = realized_eligibility(&reports, &pilot.name)?;
    let placeholder = EmpiricalDistribution::point_mass(0.0)?;
    let model = settings.reward_model(RewardModel::new(data.mev()?, placeholder))?;
    let r = annual_pilot_uplift(&model, &pilot_elig, &base_elig, &data.auctions, vp, &config)?;

    let mut report = Report::default();
    let mut cdfs = Table::new(["strategy", "eligible_ms", "cdf"]);
    for (name, dist) in [(&baseline.name, &base_elig), (&pilot.name, &pilot_elig)] {
        for (x, f) in cdf_points(dist) {
            cdfs.push([name.clone(), x.to_string(), f.to_string()]);
        }
    }
    report.plotted("annual_eligibility_cdf", cdfs, |t| {
        svg::grouped_lines(
            "Realized winner eligibility",
            t,
            "strategy",
            "eligible_ms",
            "cdf",
            Style::Step,
            ["ms", "cumulative share"],
        )
    });
    period_tables(&mut report, job, "annual", "annual uplift", &r);
    Ok(report)
}

pub fn strategies(job: &Job, data: &Dataset) -> Result<Report> {
    let config = sim_config(job)?;
    let settings = &job.settings;
    let strategies = settings.strategies(config.delay_threshold)?;
    let reports = compare_strategies(&data.auctions, &strategies, &settings.hazard()?, &config)?;

    let mut report = Report::default();
    let q = |s: Option<QuantileSummary>| match s {
        Some(s) => summary_cells(&s),
        None => Default::default(),
    };
    let mut table = Table::new([
        "strategy",
        "runs",
        "missed",
        "missed_rate",
        "no_bid",
        "mean_query_ms",
        "eligibility_q25",
        "eligibility_q50",
        "eligibility_q95",
        "uplift_q25",
        "uplift_q50",
        "uplift_q95",
        "value_q50_wei",
    ]);
    let (mut elig, mut uplift) = (
        Table::new(["strategy", "eligible_ms", "cdf"]),
        Table::new(["strategy", "uplift", "cdf"]),
    );
    for r in &reports {
        let value_q50 = r.value_summary().map(|s| s.q50);
        table.push(
            [
                r.name.clone(),
                r.runs.to_string(),
                r.missed.to_string(),
                r.missed_rate().to_string(),
                r.no_bid.to_string(),
                r.mean_query_time_ms.to_string(),
            ]
            .into_iter()
            .chain(q(r.eligibility_summary()))
            .chain(q(r.uplift_summary()))
            .chain([opt(value_q50)]),
        );
        for (t, d) in [
            (&mut elig, &r.winning_eligibility),
            (&mut uplift, &r.uplift_vs_reference),
        ] {
            for (x, f) in d.iter().flat_map(cdf_points) {
                t.push([r.name.clone(), x.to_string(), f.to_string()]);
            }
        }
        let e = r
            .eligibility_summary()
            .map(|s| format!("{}/{}/{} ms", s.q25, s.q50, s.q95))
            .unwrap_or_else(|| "n/a".into());
        let u = r
            .uplift_summary()
            .map(|s| format!("{:.4}%", s.q50 * 100.0))
            .unwrap_or_else(|| "n/a".into());
        report.headline.push(format!(
            "{}: missed {:.2}%, winner eligibility q25/q50/q95 {e}, median uplift {u}",
            r.name,
            r.missed_rate() * 100.0
        ));
    }
    report.table("strategies", table);
    report.plotted("strategy_eligibility_cdf", elig, |t| {
        svg::grouped_lines(
            "Winner eligibility by strategy",
            t,
            "strategy",
            "eligible_ms",
            "cdf",
            Style::Step,
            ["ms", "cumulative share"],
        )
    });
    report.plotted("strategy_uplift_cdf", uplift, |t| {
        svg::grouped_lines(
            "Realized reward vs. reference",
            t,
            "strategy",
            "uplift",
            "cdf",
            Style::Step,
            ["relative change", "cumulative share"],
        )
    });
    Ok(report)
}
