// SPDX-License-Identifier: Apache-2.0

//! Bid-trace exports: parsing, validation and grouping into auctions.
//!
//! JSONL is the canonical format, one object per line:
//!
//! ```text
//! {"slot":8000000,"relay":"ultrasound","builder_pubkey":"0xa1b2...","timestamp_ms":1702824023120,
//!  "eligible_ms":1702824023241,"value":"770000000000000000000","gas_used":15000000,"num_tx":120,
//!  "block_hash":"0xdead..."}
//! ```
//!
//! `eligible_ms` and `block_hash` are optional and unknown fields are
//! ignored. `value` is a decimal wei string so it never passes through a
//! float. Timestamps given with a fractional part are floored to whole ms.
//!
//! CSV files carry a header row followed by rows in the fixed column order
//! [`CSV_COLUMNS`]; empty cells stand for absent optional fields.

mod slots;

pub use slots::{
    build_auctions, to_auctions, winning_bid_eligibility_ecdf, winning_bids, winning_value_ecdf, ChainConfig,
    IngestOutcome, LoadedAuctions,
};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::timing::SimError;
use crate::units::WeiAmount;

pub const CSV_COLUMNS: [&str; 9] = [
    "slot",
    "relay",
    "builder_pubkey",
    "timestamp_ms",
    "eligible_ms",
    "value",
    "gas_used",
    "num_tx",
    "block_hash",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: u64, reason: String },
    #[error("unknown trace format {0:?} (expected jsonl or csv)")]
    UnknownFormat(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty input")]
    EmptyInput,
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Jsonl,
    Csv,
}

impl TraceFormat {
    /// From a file extension: `.jsonl`/`.json` or `.csv`.
    pub fn from_path(path: &std::path::Path) -> Result<Self, IngestError> {
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        match ext {
            "jsonl" | "json" | "ndjson" => Ok(TraceFormat::Jsonl),
            other => other.parse(),
        }
    }
}

impl FromStr for TraceFormat {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(TraceFormat::Jsonl),
            "csv" => Ok(TraceFormat::Csv),
            _ => Err(IngestError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraceFormat::Jsonl => "jsonl",
            TraceFormat::Csv => "csv",
        })
    }
}

/// One bid as exported by a relay, with absolute unix-epoch millisecond times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceRecord {
    pub slot: u64,
    pub relay: String,
    pub builder_pubkey: String,
    #[serde(deserialize_with = "floor_ms")]
    pub timestamp_ms: u64,
    #[serde(default, deserialize_with = "floor_ms_opt", skip_serializing_if = "Option::is_none")]
    pub eligible_ms: Option<u64>,
    pub value: WeiAmount,
    pub gas_used: u64,
    pub num_tx: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_hash: Option<String>,
}

fn floor_number(v: serde_json::Number) -> Result<u64, String> {
    if let Some(u) = v.as_u64() {
        return Ok(u);
    }
    match v.as_f64() {
        Some(f) if f.is_finite() && f >= 0.0 && f < u64::MAX as f64 => Ok(f.floor() as u64),
        _ => Err(format!("timestamp {v} is not a non-negative number of ms")),
    }
}

fn floor_ms<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
    floor_number(serde_json::Number::deserialize(d)?).map_err(serde::de::Error::custom)
}

fn floor_ms_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    Option::<serde_json::Number>::deserialize(d)?
        .map(floor_number)
        .transpose()
        .map_err(serde::de::Error::custom)
}

fn is_hex(s: &str) -> bool {
    let digits = s.strip_prefix("0x").unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_hexdigit())
}

impl TraceRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.relay.is_empty() {
            return Err("relay is empty".into());
        }
        if !is_hex(&self.builder_pubkey) {
            return Err(format!("builder_pubkey {:?} is not hex", self.builder_pubkey));
        }
        if let Some(h) = &self.block_hash {
            if !is_hex(h) {
                return Err(format!("block_hash {h:?} is not hex"));
            }
        }
        if let Some(e) = self.eligible_ms {
            if e < self.timestamp_ms {
                return Err(format!("eligible_ms {e} precedes timestamp_ms {}", self.timestamp_ms));
            }
        }
        Ok(())
    }
}

/// Records that parsed, plus positioned errors for the ones that did not.
#[derive(Debug, Default)]
pub struct ParsedTraces {
    pub records: Vec<TraceRecord>,
    /// `(line, reason)`; always empty in strict mode.
    pub errors: Vec<(u64, String)>,
}

/// Parses a trace export. In strict mode the first bad record aborts with
/// its line number; otherwise bad records are collected and skipped.
pub fn parse_traces<R: BufRead>(input: R, format: TraceFormat, strict: bool) -> Result<ParsedTraces, IngestError> {
    let mut out = ParsedTraces::default();
    let push = |out: &mut ParsedTraces, line: u64, rec: Result<TraceRecord, String>| -> Result<(), IngestError> {
        match rec.and_then(|r| r.validate().map(|_| r)) {
            Ok(r) => out.records.push(r),
            Err(reason) if strict => return Err(IngestError::MalformedRecord { line, reason }),
            Err(reason) => out.errors.push((line, reason)),
        }
        Ok(())
    };
    match format {
        TraceFormat::Jsonl => {
            for (i, line) in input.split(b'\n').enumerate() {
                let line_no = i as u64 + 1;
                let bytes = line?;
                let text = match std::str::from_utf8(&bytes) {
                    Ok(t) => t.trim_end_matches('\r'),
                    Err(_) => {
                        push(&mut out, line_no, Err("not valid UTF-8".into()))?;
                        continue;
                    }
                };
                if text.trim().is_empty() {
                    continue;
                }
                push(
                    &mut out,
                    line_no,
                    serde_json::from_str::<TraceRecord>(text).map_err(|e| e.to_string()),
                )?;
            }
        }
        TraceFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(input);
            let headers = reader.byte_headers().map_err(|e| csv_error(1, e))?.clone();
            let expected: Vec<&[u8]> = CSV_COLUMNS.iter().map(|c| c.as_bytes()).collect();
            if headers.iter().collect::<Vec<_>>() != expected {
                return Err(IngestError::MalformedRecord {
                    line: 1,
                    reason: format!("header must be {}", CSV_COLUMNS.join(",")),
                });
            }
            let mut row = csv::ByteRecord::new();
            loop {
                match reader.read_byte_record(&mut row) {
                    Ok(false) => break,
                    Ok(true) => {
                        let line = row.position().map_or(0, |p| p.line());
                        push(&mut out, line, csv_record(&row))?;
                    }
                    Err(e) => {
                        let line = e.position().map_or(0, |p| p.line());
                        if strict || matches!(e.kind(), csv::ErrorKind::Io(_)) {
                            return Err(csv_error(line, e));
                        }
                        out.errors.push((line, e.to_string()));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn csv_error(line: u64, e: csv::Error) -> IngestError {
    IngestError::MalformedRecord {
        line,
        reason: e.to_string(),
    }
}

fn csv_record(row: &csv::ByteRecord) -> Result<TraceRecord, String> {
    if row.len() != CSV_COLUMNS.len() {
        return Err(format!("expected {} fields, found {}", CSV_COLUMNS.len(), row.len()));
    }
    let field = |i: usize| std::str::from_utf8(&row[i]).map_err(|_| format!("{} is not valid UTF-8", CSV_COLUMNS[i]));
    let int = |i: usize| -> Result<u64, String> {
        let s = field(i)?;
        s.parse::<u64>()
            .map_err(|_| format!("{} {s:?} is not an unsigned integer", CSV_COLUMNS[i]))
    };
    let ms = |i: usize| -> Result<u64, String> {
        let s = field(i)?;
        match s.parse::<serde_json::Number>() {
            Ok(n) => floor_number(n),
            Err(_) => Err(format!("{} {s:?} is not a number", CSV_COLUMNS[i])),
        }
    };
    let optional = |i: usize| -> Result<Option<String>, String> {
        let s = field(i)?;
        Ok((!s.is_empty()).then(|| s.to_string()))
    };
    Ok(TraceRecord {
        slot: int(0)?,
        relay: field(1)?.to_string(),
        builder_pubkey: field(2)?.to_string(),
        timestamp_ms: ms(3)?,
        eligible_ms: match field(4)? {
            "" => None,
            _ => Some(ms(4)?),
        },
        value: field(5)?.parse().map_err(|e| format!("value: {e}"))?,
        gas_used: int(6)?,
        num_tx: u32::try_from(int(7)?).map_err(|_| "num_tx out of range".to_string())?,
        block_hash: optional(8)?,
    })
}

pub fn serialize_traces<W: Write>(mut w: W, records: &[TraceRecord], format: TraceFormat) -> Result<(), IngestError> {
    match format {
        TraceFormat::Jsonl => {
            for r in records {
                serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
        }
        TraceFormat::Csv => {
            let mut csv_w = csv::Writer::from_writer(w);
            let io = |e: csv::Error| IngestError::Io(e.into());
            csv_w.write_record(CSV_COLUMNS).map_err(io)?;
            for r in records {
                csv_w
                    .write_record([
                        r.slot.to_string(),
                        r.relay.clone(),
                        r.builder_pubkey.clone(),
                        r.timestamp_ms.to_string(),
                        r.eligible_ms.map(|e| e.to_string()).unwrap_or_default(),
                        r.value.to_string(),
                        r.gas_used.to_string(),
                        r.num_tx.to_string(),
                        r.block_hash.clone().unwrap_or_default(),
                    ])
                    .map_err(io)?;
            }
            csv_w.flush()?;
        }
    }
    Ok(())
}

/// A payload the proposer actually published.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveredPayload {
    pub slot: u64,
    pub block_hash: String,
    pub value: WeiAmount,
}

/// Reads a delivered-payload JSONL file into a map keyed by slot. A slot
/// listed twice with different hashes is an error.
pub fn parse_delivered<R: BufRead>(input: R) -> Result<BTreeMap<u64, DeliveredPayload>, IngestError> {
    let mut out: BTreeMap<u64, DeliveredPayload> = BTreeMap::new();
    for (i, line) in input.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: DeliveredPayload = serde_json::from_str(&line).map_err(|e| IngestError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        if !is_hex(&p.block_hash) {
            return Err(IngestError::MalformedRecord {
                line: line_no,
                reason: "block_hash is not hex".into(),
            });
        }
        if let Some(prev) = out.get(&p.slot) {
            if prev.block_hash != p.block_hash {
                return Err(IngestError::MalformedRecord {
                    line: line_no,
                    reason: format!("slot {} delivered twice with different hashes", p.slot),
                });
            }
            continue;
        }
        out.insert(p.slot, p);
    }
    Ok(out)
}
