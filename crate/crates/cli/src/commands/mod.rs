// SPDX-License-Identifier: Apache-2.0

mod analyze;
mod simulate;

use std::collections::BTreeMap;

use anyhow::Result;
use timing_games_core::distributions::{EmpiricalDistribution, QuantileSummary};

use crate::job::{Command, Dataset, Job};
use crate::svg::{self, Style};
use crate::table::{cdf_table, histogram_table, Table};

/// What a command produced, before it is written anywhere.
#[derive(Debug, Default)]
pub struct Report {
    pub tables: BTreeMap<String, Table>,
    /// Keyed like the table holding the plotted numbers.
    pub plots: BTreeMap<String, String>,
    /// Lines for standard output.
    pub headline: Vec<String>,
}

impl Report {
    fn table(&mut self, name: &str, table: Table) {
        self.tables.insert(name.to_string(), table);
    }

    /// Adds the table and a plot drawn from it under the same name.
    fn plotted(&mut self, name: &str, table: Table, draw: impl FnOnce(&Table) -> String) {
        self.plots.insert(name.to_string(), draw(&table));
        self.tables.insert(name.to_string(), table);
    }

    /// Histogram and CDF tables and plots of one distribution.
    fn distribution(&mut self, name: &str, title: &str, unit: &str, dist: &EmpiricalDistribution, width: f64) {
        self.plotted(&format!("{name}_hist"), histogram_table(dist, width), |t| {
            svg::histogram(
                &format!("{title}: density"),
                t,
                "lo",
                "hi",
                "density",
                [unit, "density"],
            )
        });
        self.plotted(&format!("{name}_cdf"), cdf_table(dist, "x"), |t| {
            svg::lines(
                &format!("{title}: CDF"),
                t,
                "x",
                &["cdf"],
                Style::Step,
                [unit, "cumulative share"],
            )
        });
    }
}

pub fn run(job: &Job, data: &Dataset) -> Result<Report> {
    match job.command {
        Command::Analyze => analyze::run(job, data),
        Command::Uplift => simulate::uplift(job, data),
        Command::Burn => simulate::burn(job, data),
        Command::Weekly => simulate::weekly(job, data),
        Command::Annual => simulate::annual(job, data),
        Command::Strategies => simulate::strategies(job, data),
    }
}

/// About 40 bins over the sample range; `fallback` for a point mass.
fn bin_width(dist: &EmpiricalDistribution, fallback: f64) -> f64 {
    let span = dist.max() - dist.min();
    if span > 0.0 {
        span / 40.0
    } else {
        fallback
    }
}

fn percent_triple(label: &str, s: &QuantileSummary) -> String {
    format!(
        "{label}: q25={:.4}% q50={:.4}% q95={:.4}%",
        s.q25 * 100.0,
        s.q50 * 100.0,
        s.q95 * 100.0
    )
}

fn summary_header() -> [&'static str; 3] {
    ["q25", "q50", "q95"]
}
