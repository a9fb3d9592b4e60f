// SPDX-License-Identifier: Apache-2.0

//! Portable text cache for empirical distributions.
//!
//! Layout (UTF-8, `\n` line endings):
//!
//! ```text
//! # timing-games ecdf v1
//! count=3
//! units=ms
//! source_sha256=<64 lowercase hex chars>
//! weighted=false
//! ---
//! 74
//! 240.5
//! 1410
//! ```
//!
//! Header keys appear in exactly this order. Each body line is one sample,
//! or `sample,weight` when `weighted=true`, ascending by sample. Numbers are
//! written in Rust's shortest round-trip float notation, so reading a cache
//! back reproduces the distribution bit for bit.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{DistributionError, EmpiricalDistribution};

const MAGIC: &str = "# timing-games ecdf v1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleUnits {
    Millis,
    Wei,
    Fraction,
}

impl fmt::Display for SampleUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleUnits::Millis => "ms",
            SampleUnits::Wei => "wei",
            SampleUnits::Fraction => "fraction",
        })
    }
}

impl FromStr for SampleUnits {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ms" => Ok(SampleUnits::Millis),
            "wei" => Ok(SampleUnits::Wei),
            "fraction" => Ok(SampleUnits::Fraction),
            other => Err(format!("unknown units {other:?}")),
        }
    }
}

/// Lowercase hex SHA-256 of the bytes a distribution was derived from.
pub fn source_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcdfCache {
    pub units: SampleUnits,
    pub source_sha256: String,
    pub distribution: EmpiricalDistribution,
}

pub fn write_ecdf_cache<W: Write>(mut w: W, cache: &EcdfCache) -> std::io::Result<()> {
    let dist = &cache.distribution;
    writeln!(w, "{MAGIC}")?;
    writeln!(w, "count={}", dist.len())?;
    writeln!(w, "units={}", cache.units)?;
    writeln!(w, "source_sha256={}", cache.source_sha256)?;
    writeln!(w, "weighted={}", dist.weights().is_some())?;
    writeln!(w, "---")?;
    match dist.weights() {
        None => {
            for s in dist.samples() {
                writeln!(w, "{s}")?;
            }
        }
        Some(weights) => {
            for (s, wt) in dist.samples().iter().zip(weights) {
                writeln!(w, "{s},{wt}")?;
            }
        }
    }
    Ok(())
}

pub fn read_ecdf_cache<R: BufRead>(r: R) -> Result<EcdfCache, CacheError> {
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |expect: &str| -> Result<(usize, String), CacheError> {
        match lines.next() {
            Some((n, l)) => Ok((n, l?)),
            None => Err(CacheError::Format {
                line: 0,
                reason: format!("missing {expect}"),
            }),
        }
    };
    let fail = |line, reason: String| CacheError::Format { line, reason };

    let (n, magic) = next("magic line")?;
    if magic != MAGIC {
        return Err(fail(n, format!("expected {MAGIC:?}")));
    }
    let mut header = |key: &str| -> Result<(usize, String), CacheError> {
        let (n, l) = next(key)?;
        match l.split_once('=') {
            Some((k, v)) if k == key => Ok((n, v.to_string())),
            _ => Err(fail(n, format!("expected `{key}=`"))),
        }
    };
    let (n, count) = header("count")?;
    let count: usize = count.parse().map_err(|_| fail(n, "bad count".into()))?;
    let (n, units) = header("units")?;
    let units: SampleUnits = units.parse().map_err(|e| fail(n, e))?;
    let (n, source_sha256) = header("source_sha256")?;
    if source_sha256.len() != 64 || !source_sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(fail(n, "source_sha256 must be 64 hex chars".into()));
    }
    let (n, weighted) = header("weighted")?;
    let weighted: bool = weighted.parse().map_err(|_| fail(n, "bad weighted flag".into()))?;
    let (n, sep) = next("separator")?;
    if sep != "---" {
        return Err(fail(n, "expected `---`".into()));
    }

    let mut samples = Vec::with_capacity(count);
    let mut weights = Vec::new();
    for (n, line) in lines {
        let line = line?;
        let parse = |s: &str| s.parse::<f64>().map_err(|_| fail(n, format!("bad number {s:?}")));
        if weighted {
            let (s, wt) = line
                .split_once(',')
                .ok_or_else(|| fail(n, "expected sample,weight".into()))?;
            samples.push(parse(s)?);
            weights.push(parse(wt)?);
        } else {
            samples.push(parse(&line)?);
        }
        if samples.len() >= 2 && samples[samples.len() - 2] > samples[samples.len() - 1] {
            return Err(fail(n, "samples not ascending".into()));
        }
    }
    if samples.len() != count {
        return Err(fail(0, format!("header count {count}, found {}", samples.len())));
    }
    let distribution = if weighted {
        EmpiricalDistribution::with_weights(samples, weights)?
    } else {
        EmpiricalDistribution::new(samples)?
    };
    Ok(EcdfCache {
        units,
        source_sha256,
        distribution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(cache: &EcdfCache) -> EcdfCache {
        let mut buf = Vec::new();
        write_ecdf_cache(&mut buf, cache).unwrap();
        read_ecdf_cache(buf.as_slice()).unwrap()
    }

    #[test]
    fn unweighted_roundtrip_is_exact() {
        let cache = EcdfCache {
            units: SampleUnits::Millis,
            source_sha256: source_digest(b"fixture"),
            distribution: EmpiricalDistribution::new(vec![1410.0, 74.0, 240.5, 0.1 + 0.2]).unwrap(),
        };
        assert_eq!(roundtrip(&cache), cache);
    }

    #[test]
    fn weighted_roundtrip_is_exact() {
        let cache = EcdfCache {
            units: SampleUnits::Fraction,
            source_sha256: source_digest(b""),
            distribution: EmpiricalDistribution::with_weights(vec![0.5, 0.25], vec![1.0 / 3.0, 2.0]).unwrap(),
        };
        assert_eq!(roundtrip(&cache), cache);
    }

    #[test]
    fn documented_example_parses() {
        let text = format!(
            "# timing-games ecdf v1\ncount=3\nunits=ms\nsource_sha256={}\nweighted=false\n---\n74\n240.5\n1410\n",
            "0".repeat(64)
        );
        let cache = read_ecdf_cache(text.as_bytes()).unwrap();
        assert_eq!(cache.units, SampleUnits::Millis);
        assert_eq!(cache.distribution.quantile(0.5).unwrap(), 240.5);
    }

    #[test]
    fn rejects_bad_files() {
        let hash = "0".repeat(64);
        let cases = [
            "nope\n".to_string(),
            format!("# timing-games ecdf v1\ncount=2\nunits=ms\nsource_sha256={hash}\nweighted=false\n---\n1\n"),
            format!("# timing-games ecdf v1\ncount=2\nunits=ms\nsource_sha256={hash}\nweighted=false\n---\n2\n1\n"),
            format!("# timing-games ecdf v1\ncount=1\nunits=parsecs\nsource_sha256={hash}\nweighted=false\n---\n1\n"),
            "# timing-games ecdf v1\ncount=1\nunits=ms\nsource_sha256=abc\nweighted=false\n---\n1\n".to_string(),
            format!("# timing-games ecdf v1\ncount=1\nunits=ms\nsource_sha256={hash}\nweighted=false\n---\nNaN\n"),
        ];
        for c in cases {
            assert!(read_ecdf_cache(c.as_bytes()).is_err(), "{c}");
        }
    }
}
