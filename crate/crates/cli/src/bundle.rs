// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use timing_games_core::distributions::source_digest;

use crate::job::Job;
use crate::table::Table;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command, plus digests of what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub job: Job,
    pub inputs: Vec<InputDigest>,
    /// Relative output path to SHA-256, for every table and plot.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

/// Tables, plots and the manifest of one command. Written all at once.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub tables: BTreeMap<String, Table>,
    pub plots: BTreeMap<String, String>,
    pub manifest: Manifest,
}

impl ReportBundle {
    /// Relative path and content of every file except the manifest.
    pub fn files(&self) -> Vec<(String, Vec<u8>)> {
        let tables = self
            .tables
            .iter()
            .map(|(k, t)| (format!("tables/{k}.csv"), t.to_csv().into_bytes()));
        let plots = self
            .plots
            .iter()
            .map(|(k, p)| (format!("plots/{k}.svg"), p.clone().into_bytes()));
        tables.chain(plots).collect()
    }

    pub fn output_digests(&self) -> BTreeMap<String, String> {
        self.files()
            .into_iter()
            .map(|(k, bytes)| (k, source_digest(&bytes)))
            .collect()
    }

    /// Writes into a sibling temp directory and renames it into place, so
    /// `out` either holds the complete bundle or is left as it was.
    pub fn write(&self, out: &Path, force: bool) -> Result<()> {
        check_output_dir(out, force)?;
        let parent = match out.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".timing-games-")
            .tempdir_in(&parent)
            .with_context(|| format!("creating staging directory in {}", parent.display()))?;
        fs::create_dir(staging.path().join("tables"))?;
        fs::create_dir(staging.path().join("plots"))?;
        for (rel, bytes) in self.files() {
            fs::write(staging.path().join(&rel), bytes).with_context(|| format!("writing {rel}"))?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(staging.path().join(MANIFEST_FILE), manifest)?;
        if out.exists() {
            fs::remove_dir_all(out).with_context(|| format!("replacing {}", out.display()))?;
        }
        fs::rename(staging.path(), out).with_context(|| format!("moving bundle to {}", out.display()))?;
        Ok(())
    }
}

/// Fails unless `out` is absent, an empty directory, or `force` is set and
/// `out` is a directory.
pub fn check_output_dir(out: &Path, force: bool) -> Result<()> {
    if !out.exists() {
        return Ok(());
    }
    if !out.is_dir() {
        bail!("output path {} exists and is not a directory", out.display());
    }
    let empty = fs::read_dir(out)?.next().is_none();
    if !empty && !force {
        bail!(
            "output directory {} is not empty (use --force to replace it)",
            out.display()
        );
    }
    Ok(())
}

/// Writes one file through a temp file in the same directory.
pub fn write_file_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&parent)?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
