//! CSV writers and the JSON provenance block.

use crate::experiment::Row;
use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const MAIN_COLUMNS: [&str; 8] = ["observable", "m", "estimate", "stderr", "ess", "bound", "margin_sigma", "status"];
pub const CHAIN_COLUMNS: [&str; 6] = ["chain_id", "observable", "mean", "stderr", "ess", "acceptance_rate"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRow {
    pub chain_id: usize,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub acceptance_rate: f64,
}

/// Shortest round-trip decimal; `inf`, `-inf` and `nan` spelled out.
fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

pub fn write_rows<W: Write>(w: W, rows: &[Row]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(MAIN_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.observable.clone(),
            num(r.m),
            num(r.estimate),
            num(r.stderr),
            opt(r.ess),
            opt(r.bound),
            opt(r.margin_sigma),
            r.status.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_chain_rows<W: Write>(w: W, rows: &[ChainRow]) -> Result<()> {
    let mut out = writer(w);
    out.write_record(CHAIN_COLUMNS)?;
    for r in rows {
        out.write_record([
            r.chain_id.to_string(),
            r.observable.clone(),
            num(r.mean),
            num(r.stderr),
            num(r.ess),
            num(r.acceptance_rate),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub config_path: String,
    /// SHA-256 of the raw config bytes.
    pub config_hash: String,
    pub seed: u64,
    /// Chains use `seed` with stream `chain_id`.
    pub chain_streams: Vec<usize>,
    pub version: String,
    pub timestamp_unix: u64,
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, config_path: &Path, raw: &[u8], seed: u64, chains: usize) -> Self {
        Provenance {
            command: command.into(),
            config_path: config_path.display().to_string(),
            config_hash: hex(&Sha256::digest(raw)),
            seed,
            chain_streams: (0..chains).collect(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            warnings: Vec::new(),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Sibling path `<stem><suffix>` next to `out`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{stem}{suffix}"))
}

pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::Status;

    #[test]
    fn header_and_formatting() {
        let rows = vec![Row {
            observable: "cosh(u[0])^2".into(),
            m: 2.0,
            estimate: 1.0003,
            stderr: 1e-5,
            ess: Some(4000.0),
            bound: Some(2.0),
            margin_sigma: Some(f64::INFINITY),
            status: Status::Pass,
        }];
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "observable,m,estimate,stderr,ess,bound,margin_sigma,status\ncosh(u[0])^2,2,1.0003,0.00001,4000,2,inf,pass\n");
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("/tmp/run.csv"), ".chains.csv"), PathBuf::from("/tmp/run.chains.csv"));
    }
}
