//! Artifact writing with a checksummed run manifest.
//!
//! Series go to CSV, summaries to JSON; floats are printed with Rust's
//! shortest round-trip formatting, so identical values give identical
//! bytes. The manifest records the tool version, the config hash, the
//! master seed, and a SHA-256 per artifact; wall-clock time is informative
//! only and excluded from any reproducibility comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// One cell of a CSV row; `Empty` renders as an empty field.
pub enum Cell {
    U64(u64),
    U32(u32),
    F64(f64),
    Empty,
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::U64(v) => write!(out, "{v}").unwrap(),
            Cell::U32(v) => write!(out, "{v}").unwrap(),
            Cell::F64(v) => write!(out, "{v}").unwrap(),
            Cell::Empty => {}
        }
    }
}

/// Builds a CSV document with a fixed header.
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "CSV row width mismatch");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            cell.render(&mut self.text);
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'a str,
    subcommand: &'a str,
    config_sha256: &'a str,
    master_seed: u64,
    /// Artifact name -> SHA-256 of its bytes.
    outputs: &'a BTreeMap<String, String>,
    /// Informative only; never part of reproducibility comparisons.
    wall_clock_ms: u128,
}

/// Collects artifacts for one run and finishes with `manifest.json`.
pub struct OutputWriter {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
    started: Instant,
}

impl OutputWriter {
    pub fn new(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| {
            CliError::Runtime(format!("cannot create output dir {}: {e}", dir.display()))
        })?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            checksums: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> CliResult<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.checksums
            .insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn finish(
        self,
        subcommand: &str,
        config_sha256: &str,
        master_seed: u64,
    ) -> CliResult<()> {
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_sha256,
            master_seed,
            outputs: &self.checksums,
            wall_clock_ms: self.started.elapsed().as_millis(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| CliError::Runtime(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        std::fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}
