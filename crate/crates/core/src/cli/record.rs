//! Run records: what was run, with which configuration, and what it concluded.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::HistoryRow;
use crate::snapshot::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    CheckClasses,
    Run,
    Family,
    SolveMa,
    Functionals,
    Report,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::CheckClasses,
        Command::Run,
        Command::Family,
        Command::SolveMa,
        Command::Functionals,
        Command::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckClasses => "check-classes",
            Command::Run => "run",
            Command::Family => "family",
            Command::SolveMa => "solve-ma",
            Command::Functionals => "functionals",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub command: Command,
    pub config_hash: String,
    pub config: RunConfig,
    pub started: String,
    pub finished: String,
    /// Functional rows, one per flow snapshot.
    pub rows: Vec<HistoryRow>,
    pub verdicts: Vec<Verdict>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.verdicts.iter().all(|v| v.passed)
    }
}

pub fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(record)?)
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let text = std::fs::read(path)?;
    serde_json::from_slice(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordWarning {
    /// The stored hash does not match the stored or current configuration.
    StaleConfig { recorded: String, actual: String },
    MissingArtifact(String),
}

impl fmt::Display for RecordWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordWarning::StaleConfig { recorded, actual } => {
                write!(f, "stale record: config hash {recorded} but configuration hashes to {actual}")
            }
            RecordWarning::MissingArtifact(p) => write!(f, "missing artifact {p}"),
        }
    }
}

/// Integrity warnings for a record stored in `dir`, optionally against the
/// configuration currently in force.
pub fn check_record(record: &RunRecord, dir: &Path, current: Option<&RunConfig>) -> Vec<RecordWarning> {
    let mut out = Vec::new();
    let stored = record.config.hash();
    if stored != record.config_hash {
        out.push(RecordWarning::StaleConfig { recorded: record.config_hash.clone(), actual: stored });
    }
    if let Some(c) = current {
        let h = c.hash();
        if h != record.config_hash {
            out.push(RecordWarning::StaleConfig { recorded: record.config_hash.clone(), actual: h });
        }
    }
    for a in &record.artifacts {
        if !dir.join(a).is_file() {
            out.push(RecordWarning::MissingArtifact(a.clone()));
        }
    }
    out
}
