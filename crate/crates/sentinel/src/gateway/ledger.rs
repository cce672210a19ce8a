//! Run ledger: one JSON object per request, for cost accounting.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub prompt_sha256: String,
    pub in_tokens: usize,
    pub out_tokens: usize,
    pub ms: u64,
    /// `ok`, `budget-exceeded`, `transport-error` or `auth-error`.
    pub outcome: String,
}

/// Keeps every entry in memory and optionally appends it to a JSONL sink.
pub struct RunLedger {
    sink: Option<Mutex<Box<dyn Write + Send>>>,
    entries: Mutex<Vec<LedgerEntry>>,
}

impl RunLedger {
    pub fn in_memory() -> Self {
        RunLedger {
            sink: None,
            entries: Mutex::new(Vec::new()),
        }
    }

    pub fn to_writer(w: impl Write + Send + 'static) -> Self {
        RunLedger {
            sink: Some(Mutex::new(Box::new(w))),
            entries: Mutex::new(Vec::new()),
        }
    }

    /// Appends to `path`, creating it if needed.
    pub fn to_file(path: &Path) -> io::Result<Self> {
        let file = File::options().create(true).append(true).open(path)?;
        Ok(Self::to_writer(BufWriter::new(file)))
    }

    pub fn record(&self, entry: LedgerEntry) {
        if let Some(sink) = &self.sink {
            let mut w = sink.lock().unwrap_or_else(|e| e.into_inner());
            let line = serde_json::to_string(&entry).expect("ledger entries serialize");
            if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                log::warn!("could not write run ledger: {e}");
            }
        }
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(entry);
    }

    pub fn entries(&self) -> Vec<LedgerEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Requests that reached the backend and returned an answer.
    pub fn answered(&self) -> usize {
        self.entries().iter().filter(|e| e.outcome == "ok").count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_one_json_object_per_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.jsonl");
        let ledger = RunLedger::to_file(&path).unwrap();
        for outcome in ["ok", "budget-exceeded"] {
            ledger.record(LedgerEntry {
                prompt_sha256: "ab".into(),
                in_tokens: 3,
                out_tokens: 1,
                ms: 7,
                outcome: outcome.into(),
            });
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<LedgerEntry> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines, ledger.entries());
        assert_eq!(ledger.answered(), 1);
        assert!(text.starts_with("{\"prompt_sha256\":\"ab\",\"in_tokens\":3,\"out_tokens\":1,\"ms\":7,\"outcome\":\"ok\"}"));
    }
}
