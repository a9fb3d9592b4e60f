// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use timing_games_core::distributions::{EmpiricalDistribution, QuantileSummary};

/// An in-memory CSV table. Cells are written verbatim except that fields
/// containing commas, quotes or newlines are quoted.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let cells: Vec<String> = line.iter().map(|c| escape(c)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    /// Numeric column by name; unparseable or empty cells become `None`.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx].parse().ok()).collect())
    }
}

fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Empty string for missing values.
pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_cells(s: &QuantileSummary) -> [String; 3] {
    [s.q25.to_string(), s.q50.to_string(), s.q95.to_string()]
}

/// Step points `(x, F(x))`, one per distinct sample.
pub fn cdf_points(dist: &EmpiricalDistribution) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &x in dist.samples() {
        if out.last().is_some_and(|p| p.0 == x) {
            continue;
        }
        out.push((x, dist.cdf(x)));
    }
    out
}

pub fn cdf_table(dist: &EmpiricalDistribution, x_name: &str) -> Table {
    let mut t = Table::new([x_name, "cdf"]);
    for (x, f) in cdf_points(dist) {
        t.push([x, f]);
    }
    t
}

/// Bins of `width` with their sample count and density (share per unit).
pub fn histogram_table(dist: &EmpiricalDistribution, width: f64) -> Table {
    let mut t = Table::new(["lo", "hi", "weight", "density"]);
    let total = dist.total_weight();
    for b in dist.histogram(width) {
        t.push([b.lo, b.hi, b.weight, b.weight / total / width]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotes_only_when_needed() {
        let mut t = Table::new(["name", "value"]);
        t.push(["plain", "1"]);
        t.push(["a,b", "say \"hi\""]);
        assert_eq!(t.to_csv(), "name,value\nplain,1\n\"a,b\",\"say \"\"hi\"\"\"\n");
    }

    #[test]
    fn cdf_points_collapse_ties() {
        let d = EmpiricalDistribution::new(vec![1.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(cdf_points(&d), vec![(1.0, 0.5), (2.0, 0.75), (4.0, 1.0)]);
    }

    #[test]
    fn histogram_density_integrates_to_one() {
        let d = EmpiricalDistribution::new((0..100).map(f64::from).collect()).unwrap();
        let t = histogram_table(&d, 10.0);
        let area: f64 = t.column("density").unwrap().iter().map(|v| v.unwrap() * 10.0).sum();
        assert!((area - 1.0).abs() < 1e-12);
    }
}
