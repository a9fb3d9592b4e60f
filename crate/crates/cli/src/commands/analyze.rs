// SPDX-License-Identifier: Apache-2.0

use anyhow::Result;
use timing_games_core::auction::{binned_quantile_curve, binned_quantile_curve_by, BinnedCurve, CurveSpec, Ordinate};
use timing_games_core::fee_market::next_base_fee;
use timing_games_core::timing::{median_r_gain, SimError};
use timing_games_core::units::{fraction_to_f64, Fraction, SlotTimeMs};

use super::{summary_header, Report};
use crate::job::{Dataset, Job};
use crate::svg::{self, Style};
use crate::table::{opt, summary_cells, Table};

const R_GAIN_STEPS: [(i64, i64); 2] = [(250, 950), (950, 1_000)];

fn curve_table(curve: &BinnedCurve) -> Table {
    let mut t = Table::new(["lo_ms", "hi_ms", "mid_ms", "count", "q25", "q50", "q95"]);
    let f = |v: &Option<Fraction>| opt(v.as_ref().map(fraction_to_f64));
    for b in &curve.bins {
        t.push([
            b.lo_ms.to_string(),
            b.hi_ms.to_string(),
            ((b.lo_ms + b.hi_ms) as f64 / 2.0).to_string(),
            b.count.to_string(),
            f(&b.q25),
            f(&b.q50),
            f(&b.q95),
        ]);
    }
    t
}

pub fn run(job: &Job, data: &Dataset) -> Result<Report> {
    let settings = &job.settings;
    let cutoff = SlotTimeMs::new(settings.analysis.cutoff_ms)?;
    let spec = |ordinate| CurveSpec {
        bin_width_ms: settings.analysis.bins_ms,
        cutoff,
        ..CurveSpec::new(ordinate)
    };
    let mut report = Report::default();

    let state = settings.fee_market.state()?;
    let base = Fraction::from_integer(state.base_fee_per_gas.to_i128()?);
    // Gas above a custom limit is clamped; a failed update skips the bid.
    let burn = binned_quantile_curve_by(&data.auctions, &spec(Ordinate::GasUsed), |bid, _| {
        let next = next_base_fee(&state, bid.gas_used.min(state.gas_limit))
            .ok()
            .and_then(|w| w.to_i128().ok());
        Ok(next.map(|n| (Fraction::from_integer(n) - base) / base))
    })?;
    let curves = [
        (
            "r_curve",
            "Bid value over slot maximum",
            "R",
            binned_quantile_curve(&data.auctions, &spec(Ordinate::RValue))?,
        ),
        (
            "gas_curve",
            "Gas used",
            "gas",
            binned_quantile_curve(&data.auctions, &spec(Ordinate::GasUsed))?,
        ),
        (
            "tx_curve",
            "Transactions per block",
            "transactions",
            binned_quantile_curve(&data.auctions, &spec(Ordinate::TxCount))?,
        ),
        ("burn_curve", "Next base fee change", "relative change", burn),
    ];
    for (name, title, unit, curve) in &curves {
        report.plotted(name, curve_table(curve), |t| {
            svg::lines(
                title,
                t,
                "mid_ms",
                &["q25", "q50", "q95"],
                Style::Line,
                ["eligibility time (ms)", unit],
            )
        });
    }

    let elig = data.baseline()?;
    let summary = elig.summarize();
    let mut t = Table::new(["winners", "mean_ms"].into_iter().chain(summary_header()));
    t.push(
        [elig.len().to_string(), elig.mean().to_string()]
            .into_iter()
            .chain(summary_cells(&summary)),
    );
    report.table("eligibility_summary", t);
    report.distribution(
        "eligibility",
        "Winning bid eligibility",
        "ms",
        &elig,
        settings.analysis.bins_ms as f64,
    );

    let mut gains = Table::new(["from_ms", "to_ms", "auctions", "median_r_from", "median_r_to", "gain"]);
    for (from, to) in R_GAIN_STEPS.into_iter().filter(|(_, to)| *to <= cutoff.ms()) {
        match median_r_gain(
            &data.auctions,
            SlotTimeMs::new(from)?,
            SlotTimeMs::new(to)?,
            cutoff,
            settings.simulation.supersede,
        ) {
            Ok(g) => gains.push([
                from.to_string(),
                to.to_string(),
                g.auctions.to_string(),
                g.median_from.to_string(),
                g.median_to.to_string(),
                g.gain.to_string(),
            ]),
            Err(SimError::EmptyInput) => {}
            Err(e) => return Err(e.into()),
        }
    }
    report.table("r_gain", gains);

    let mut ingest = Table::new([
        "records",
        "parse_errors",
        "auctions",
        "bids",
        "synthesized",
        "dropped",
        "duplicates",
    ]);
    let bids: usize = data.auctions.iter().map(|a| a.len()).sum();
    ingest.push([
        data.records,
        data.parse_errors,
        data.auctions.len(),
        bids,
        data.synthesized,
        data.dropped,
        data.duplicates,
    ]);
    report.table("ingest", ingest);

    report.headline.push(format!(
        "winning bid eligibility: q25={} ms q50={} ms q95={} ms ({} slots)",
        summary.q25,
        summary.q50,
        summary.q95,
        elig.len()
    ));
    Ok(report)
}
