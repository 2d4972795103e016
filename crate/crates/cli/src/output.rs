//! Iteration CSVs, manifests and content hashes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use bmnn_core::{IterationRecord, SolverReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

/// Column order of every per-iteration CSV.
pub const ITERATION_COLUMNS: [&str; 6] = [
    "iter",
    "re_or_nan",
    "rel_change",
    "fit_term",
    "mu",
    "seconds",
];

pub fn iteration_fields(r: &IterationRecord) -> [String; 6] {
    [
        r.iter.to_string(),
        r.re.unwrap_or(f64::NAN).to_string(),
        r.rel_change.to_string(),
        r.fit_term.to_string(),
        r.mu.to_string(),
        r.seconds.to_string(),
    ]
}

pub fn write_iterations(path: &Path, report: &SolverReport) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ITERATION_COLUMNS)?;
    for r in &report.records {
        w.write_record(iteration_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Hashes a file, or every regular file directly inside a directory.
pub fn hash_inputs(path: &Path, into: &mut BTreeMap<String, String>) -> CliResult<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()?;
        entries.sort();
        for p in entries.into_iter().filter(|p| p.is_file()) {
            into.insert(p.display().to_string(), sha256_file(&p)?);
        }
    } else {
        into.insert(path.display().to_string(), sha256_file(path)?);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub iterations: usize,
    pub final_re: Option<f64>,
    pub final_rel_change: Option<f64>,
}

impl RunSummary {
    pub fn of(report: &SolverReport) -> Self {
        RunSummary {
            status: report.status.to_string(),
            iterations: report.iterations(),
            final_re: report.final_re().filter(|v| v.is_finite()),
            final_rel_change: report
                .last()
                .map(|r| r.rel_change)
                .filter(|v| v.is_finite()),
        }
    }
}

/// Everything needed to re-run a command and check its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: Vec<String>,
    pub version: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: C,
    pub input_sha256: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub results: serde_json::Value,
    pub wall_seconds: f64,
}

pub fn write_manifest<C: Serialize>(path: &Path, manifest: &RunManifest<C>) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}
