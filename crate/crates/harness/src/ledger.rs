use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::HarnessError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Completed,
    /// Completed by an earlier run with the same key.
    Skipped,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub config_hash: String,
    pub stage: String,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    /// Hash of config, stage, seed and `δ`.
    pub key: String,
    pub status: StageStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Files written by this entry, relative to the output or cache directory.
    pub artifacts: Vec<String>,
    pub timestamp: u64,
}

/// Entries of one run, in the order they were written.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunLedger {
    pub config_hash: String,
    pub entries: Vec<LedgerEntry>,
}

impl RunLedger {
    pub fn completed(&self) -> usize {
        self.entries.iter().filter(|e| e.status == StageStatus::Completed).count()
    }

    pub fn skipped(&self) -> usize {
        self.entries.iter().filter(|e| e.status == StageStatus::Skipped).count()
    }

    pub fn failed(&self) -> Vec<&LedgerEntry> {
        self.entries.iter().filter(|e| e.status == StageStatus::Failed).collect()
    }
}

pub fn stage_key(config_hash: &str, stage: &str, seed: Option<u64>, delta: Option<f64>) -> String {
    let text = format!("{config_hash}|{stage}|{seed:?}|{:?}", delta.map(f64::to_bits));
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Append-only JSON-lines ledger with a single serialized writer.
pub struct LedgerWriter {
    path: PathBuf,
    file: Mutex<File>,
    done: HashSet<String>,
    written: Mutex<Vec<LedgerEntry>>,
}

/// Every entry in a ledger file, oldest first.
pub fn read_ledger(path: &Path) -> Result<Vec<LedgerEntry>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    BufReader::new(f)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l.map_err(|e| HarnessError::io(path, e))?;
            serde_json::from_str(&l).map_err(|e| HarnessError::Ledger(format!("{}: {e}", path.display())))
        })
        .collect()
}

impl LedgerWriter {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        let done = read_ledger(path)?.into_iter().filter(|e| e.status != StageStatus::Failed).map(|e| e.key).collect();
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(LedgerWriter { path: path.to_path_buf(), file: Mutex::new(file), done, written: Mutex::new(Vec::new()) })
    }

    /// Whether an earlier run completed this key.
    pub fn is_done(&self, key: &str) -> bool {
        self.done.contains(key)
    }

    pub fn append(&self, entry: LedgerEntry) -> Result<(), HarnessError> {
        let line = serde_json::to_string(&entry).expect("serializable entry");
        let mut f = self.file.lock().expect("ledger lock");
        writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| HarnessError::io(&self.path, e))?;
        self.written.lock().expect("ledger lock").push(entry);
        Ok(())
    }

    pub fn finish(self, config_hash: &str) -> RunLedger {
        RunLedger { config_hash: config_hash.to_string(), entries: self.written.into_inner().expect("ledger lock") }
    }
}
