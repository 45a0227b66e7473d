//! Offline audit of JSONL trace files for belief leakage and gate rule
//! violations.

use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};

use aec_core::trace::{gate_violations, leakage_violations, Trace, TraceRecord};
use serde::{Deserialize, Serialize};

const MAX_EXAMPLES: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub files: usize,
    pub episodes: usize,
    pub records: usize,
    pub leakage_violations: usize,
    pub gate_violations: usize,
    /// `file:line` of the first few offending records.
    pub examples: Vec<String>,
}

impl AuditReport {
    pub fn clean(&self) -> bool {
        self.leakage_violations == 0 && self.gate_violations == 0
    }

    /// Audits one trace held in memory.
    pub fn add_trace(&mut self, trace: &Trace) {
        self.episodes += trace.records.iter().filter(|r| r.seq == 0).count();
        self.records += trace.records.len();
        self.leakage_violations += leakage_violations(trace).len();
        self.gate_violations += gate_violations(trace).len();
    }

    fn add_record(&mut self, record: TraceRecord, origin: impl FnOnce() -> String) {
        if record.seq == 0 {
            self.episodes += 1;
        }
        self.records += 1;
        let one = Trace { records: vec![record] };
        let leak = leakage_violations(&one).len();
        let gate = gate_violations(&one).len();
        self.leakage_violations += leak;
        self.gate_violations += gate;
        if leak + gate > 0 && self.examples.len() < MAX_EXAMPLES {
            let kind = if leak > 0 { "leakage" } else { "gate" };
            self.examples.push(format!("{} ({kind})", origin()));
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: malformed trace record: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<(), AuditError> {
    let io_err = |source| AuditError::Io {
        path: path.to_path_buf(),
        source,
    };
    if path.is_dir() {
        let mut entries = fs::read_dir(path)
            .map_err(io_err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(io_err)?;
        entries.sort();
        for e in entries {
            if e.is_dir() || e.extension().is_some_and(|x| x == "jsonl") {
                collect(&e, out)?;
            }
        }
    } else {
        fs::metadata(path).map_err(io_err)?;
        out.push(path.to_path_buf());
    }
    Ok(())
}

/// Audits a `.jsonl` file, or every `.jsonl` file below a directory.
pub fn audit_path(path: &Path) -> Result<AuditReport, AuditError> {
    let mut files = Vec::new();
    collect(path, &mut files)?;
    let mut report = AuditReport::default();
    for file in files {
        let io_err = |source| AuditError::Io {
            path: file.clone(),
            source,
        };
        let reader = BufReader::new(fs::File::open(&file).map_err(io_err)?);
        report.files += 1;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line).map_err(|source| AuditError::Parse {
                path: file.clone(),
                line: i + 1,
                source,
            })?;
            report.add_record(record, || format!("{}:{}", file.display(), i + 1));
        }
    }
    Ok(report)
}
