// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use timing_games_cli::bundle::Manifest;
use timing_games_core::distributions::nearest_rank;
use timing_games_core::fee_market::{burn_increase_for_delay, FeeMarketState};
use timing_games_core::ingest::{
    parse_delivered, parse_traces, to_auctions, winning_bid_eligibility_ecdf, ChainConfig, TraceFormat,
};
use timing_games_core::units::{fraction_to_f64, SlotTimeMs, WeiAmount};

struct Fixture {
    dir: TempDir,
    traces: PathBuf,
    delivered: PathBuf,
}

impl Fixture {
    fn new(slots: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let traces = dir.path().join("traces.jsonl");
        let delivered = dir.path().join("delivered.jsonl");
        let out = run(&[
            "generate",
            "--out",
            traces.to_str().unwrap(),
            "--delivered-out",
            delivered.to_str().unwrap(),
            "--slots",
            &slots.to_string(),
            "--seed",
            "5",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        Self { dir, traces, delivered }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// `args` followed by the trace inputs.
    fn run(&self, args: &[&str]) -> Output {
        let mut all: Vec<&str> = args.to_vec();
        all.extend([
            self.traces.to_str().unwrap(),
            "--delivered",
            self.delivered.to_str().unwrap(),
        ]);
        run(&all)
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_timing-games"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn read_dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for sub in ["tables", "plots"] {
        for entry in fs::read_dir(dir.join(sub)).unwrap() {
            let entry = entry.unwrap();
            files.insert(
                format!("{sub}/{}", entry.file_name().to_string_lossy()),
                fs::read(entry.path()).unwrap(),
            );
        }
    }
    files
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().to_string()).collect()
}

#[test]
fn empty_input_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out_dir = dir.path().join("bundle");
    let out = run(&[
        "simulate",
        "uplift",
        empty.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!out_dir.exists());
}

#[test]
fn same_seed_gives_identical_bundles() {
    let f = Fixture::new(40);
    let (a, b) = (f.path("a"), f.path("b"));
    for dir in [&a, &b] {
        ok(&f.run(&[
            "simulate",
            "weekly",
            "--vp",
            "0.05",
            "--runs",
            "200",
            "--seed",
            "9",
            "--out",
            dir.to_str().unwrap(),
        ]));
    }
    assert_eq!(read_dir_files(&a), read_dir_files(&b));
    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
}

#[test]
fn replay_reproduces_tables() {
    let f = Fixture::new(40);
    let first = f.path("first");
    ok(&f.run(&[
        "simulate",
        "burn",
        "--runs",
        "300",
        "--seed",
        "4",
        "--out",
        first.to_str().unwrap(),
    ]));
    let again = f.path("again");
    ok(&run(&[
        "replay",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]));
    assert_eq!(read_dir_files(&first), read_dir_files(&again));
    let manifest = Manifest::read(&first.join("manifest.json")).unwrap();
    assert_eq!(manifest.inputs.len(), 2);
    assert!(manifest.outputs.contains_key("tables/burn_runs.csv"));
}

#[test]
fn replay_refuses_changed_inputs() {
    let f = Fixture::new(20);
    let first = f.path("first");
    ok(&f.run(&[
        "simulate",
        "uplift",
        "--runs",
        "50",
        "--seed",
        "4",
        "--out",
        first.to_str().unwrap(),
    ]));
    let mut bytes = fs::read(&f.delivered).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(&f.delivered, bytes).unwrap();
    let out = run(&[
        "replay",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        f.path("again").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("changed"));
}

#[test]
fn zero_delay_gives_zero_uplift() {
    let f = Fixture::new(30);
    let out = f.path("zero");
    ok(&f.run(&[
        "simulate",
        "uplift",
        "--delay-ms",
        "0",
        "--runs",
        "400",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]));
    let values = csv_column(&out.join("tables/uplift_runs.csv"), "uplift");
    assert_eq!(values.len(), 400);
    assert!(values.iter().all(|v| v == "0"), "{values:?}");
}

#[test]
fn burn_median_matches_direct_evaluation() {
    let f = Fixture::new(40);
    let out = f.path("burn");
    ok(&f.run(&[
        "simulate",
        "burn",
        "--runs",
        "500",
        "--seed",
        "8",
        "--out",
        out.to_str().unwrap(),
    ]));

    let parsed = parse_traces(fs::read(&f.traces).unwrap().as_slice(), TraceFormat::Jsonl, true).unwrap();
    let auctions = to_auctions(&parsed.records, &ChainConfig::default()).unwrap().auctions;
    let state = FeeMarketState::mainnet(WeiAmount::from_wei(20_000_000_000)).unwrap();
    let runs = out.join("tables/burn_runs.csv");
    let index = csv_column(&runs, "auction_index");
    let base = csv_column(&runs, "baseline_ms");
    let delay = csv_column(&runs, "delay_ms");
    let mut direct: Vec<_> = (0..index.len())
        .map(|i| {
            let ms = |s: &str| SlotTimeMs::new(s.parse().unwrap()).unwrap();
            burn_increase_for_delay(
                &auctions[index[i].parse::<usize>().unwrap()],
                ms(&base[i]),
                ms(&delay[i]),
                &state,
            )
            .unwrap()
        })
        .collect();
    direct.sort();
    let median = fraction_to_f64(&direct[nearest_rank(0.5, direct.len()) - 1]);
    let reported: f64 = csv_column(&out.join("tables/burn_summary.csv"), "q50")[0]
        .parse()
        .unwrap();
    assert_eq!(reported, median);
}

#[test]
fn analyze_summary_matches_winner_quantiles() {
    let f = Fixture::new(60);
    let out = f.path("analyze");
    ok(&f.run(&["analyze", "--seed", "1", "--out", out.to_str().unwrap()]));

    let parsed = parse_traces(fs::read(&f.traces).unwrap().as_slice(), TraceFormat::Jsonl, true).unwrap();
    let auctions = to_auctions(&parsed.records, &ChainConfig::default()).unwrap().auctions;
    let delivered: BTreeMap<u64, String> = parse_delivered(fs::read(&f.delivered).unwrap().as_slice())
        .unwrap()
        .into_iter()
        .map(|(slot, d)| (slot, d.block_hash))
        .collect();
    let s = winning_bid_eligibility_ecdf(&auctions, Some(&delivered))
        .unwrap()
        .summarize();
    let summary = out.join("tables/eligibility_summary.csv");
    for (col, want) in [("q25", s.q25), ("q50", s.q50), ("q95", s.q95)] {
        assert_eq!(csv_column(&summary, col)[0].parse::<f64>().unwrap(), want, "{col}");
    }
}

#[test]
fn every_plot_has_a_table() {
    let f = Fixture::new(30);
    let cases: [&[&str]; 3] = [
        &["analyze", "--seed", "1"],
        &["simulate", "strategies", "--runs", "100", "--seed", "1"],
        &["simulate", "annual", "--vp", "0.01", "--runs", "50", "--seed", "1"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = f.path(&format!("bundle{i}"));
        let mut all = args.to_vec();
        all.extend(["--out", out.to_str().unwrap()]);
        ok(&f.run(&all));
        let files = read_dir_files(&out);
        let plots: Vec<&String> = files.keys().filter(|k| k.starts_with("plots/")).collect();
        assert!(!plots.is_empty());
        for p in plots {
            let stem = p.trim_start_matches("plots/").trim_end_matches(".svg");
            assert!(files.contains_key(&format!("tables/{stem}.csv")), "{args:?}: {p}");
        }
    }
}

#[test]
fn existing_bundle_needs_force() {
    let f = Fixture::new(20);
    let out = f.path("b");
    let args = [
        "simulate",
        "uplift",
        "--runs",
        "20",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ];
    ok(&f.run(&args));
    assert!(!f.run(&args).status.success());
    let mut forced = args.to_vec();
    forced.push("--force");
    ok(&f.run(&forced));
}

#[test]
fn invalid_flags_are_rejected_before_reading_input() {
    let missing = "/nonexistent/traces.jsonl";
    let cases: [&[&str]; 5] = [
        &["simulate", "uplift", missing, "--out", "/tmp/x", "--vp", "0.1"],
        &["simulate", "weekly", missing, "--out", "/tmp/x"],
        &["analyze", missing, "--out", "/tmp/x", "--runs", "5"],
        &[
            "simulate",
            "strategies",
            missing,
            "--out",
            "/tmp/x",
            "--baseline-ecdf",
            "e.csv",
        ],
        &["simulate", "uplift", missing, "--out", "/tmp/x", "--runs", "many"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let bad_vp = run(&[
        "simulate", "weekly", missing, "--out", "/tmp/x", "--vp", "1.5", "--seed", "1",
    ]);
    assert_eq!(bad_vp.status.code(), Some(1));
    let err = String::from_utf8_lossy(&bad_vp.stderr);
    assert!(!err.contains("nonexistent"), "{err}");
}

#[test]
fn settings_file_and_flags_layer() {
    let f = Fixture::new(20);
    let config = f.path("settings.toml");
    fs::write(&config, "[simulation]\nruns = 30\ndelay_ms = 500\n").unwrap();
    let out = f.path("b");
    ok(&f.run(&[
        "--config",
        config.to_str().unwrap(),
        "simulate",
        "uplift",
        "--delay-ms",
        "700",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let manifest = Manifest::read(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest.job.settings.simulation.runs, 30);
    assert_eq!(manifest.job.settings.simulation.delay_ms, 700);

    fs::write(&config, "[simulation]\nrunz = 30\n").unwrap();
    let bad = f.run(&[
        "--config",
        config.to_str().unwrap(),
        "simulate",
        "uplift",
        "--seed",
        "1",
        "--out",
        f.path("c").to_str().unwrap(),
    ]);
    assert!(!bad.status.success());
}

#[test]
fn ecdf_cache_feeds_a_simulation() {
    let f = Fixture::new(30);
    let cache = f.path("baseline.ecdf");
    ok(&f.run(&[
        "ecdf",
        "--kind",
        "eligibility",
        "--out",
        cache.to_str().unwrap(),
        "--seed",
        "1",
    ]));
    let out = f.path("b");
    ok(&f.run(&[
        "simulate",
        "uplift",
        "--baseline-ecdf",
        cache.to_str().unwrap(),
        "--runs",
        "50",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]));
    let manifest = Manifest::read(&out.join("manifest.json")).unwrap();
    assert!(manifest.inputs.iter().any(|i| i.path == cache));
}

#[test]
fn sample_settings_are_the_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../settings.toml");
    let settings = timing_games_cli::config::Settings::load(&path).unwrap();
    assert_eq!(settings, timing_games_cli::config::Settings::default());
}
