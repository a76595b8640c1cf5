//! White-box session logs: one JSONL line per dialogue turn carrying the
//! full retrieval breakdown, protocol compliance, and any anomaly — plus a
//! separate event log for handoffs and invocation anomalies.
//!
//! Turn rounds are strictly sequential (1, 2, 3, …); opening a log replays
//! and validates the whole file, so a reopened session resumes exactly
//! where the last durable turn left it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chunk::SourceType;
use crate::error::EngineError;
use crate::jsonl::{self, CrashPoint};
use crate::protocol::ComplianceReport;
use crate::retrieval::ScoredCandidate;

/// Everything recorded about one completed turn. Field order is the wire
/// order; readers rely on it only for human diffing, never for parsing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    /// `turn-NNNNNN`, derived from the round.
    pub chunk_id: String,
    pub session_id: String,
    pub user_input: String,
    pub assistant_reply: String,
    /// Always `experience`: a turn line is dialogue memory.
    pub source_type: SourceType,
    pub timestamp: u64,
    pub round: u32,
    /// Merged candidate list delivered to the prompt, best first.
    pub candidates: Vec<ScoredCandidate>,
    /// Extracted analysis span, when the reply carried one.
    pub analysis_text: Option<String>,
    pub compliance: ComplianceReport,
    pub augmented_query: String,
    pub model_identity: String,
    pub template_version: String,
    /// `None` for a clean turn; otherwise a short kind such as `timeout`.
    pub anomaly: Option<String>,
}

impl TurnRecord {
    pub fn chunk_id_for_round(round: u32) -> String {
        format!("turn-{round:06}")
    }
}

/// Append-only turn log with strict round sequencing.
pub struct TurnLog {
    path: PathBuf,
    fsync: bool,
    last_round: u32,
}

impl TurnLog {
    /// Opens (creating if absent), recovers any interrupted append, and
    /// replays all records, validating that rounds run 1, 2, 3, … without
    /// gaps or repeats.
    pub fn open(path: &Path, fsync: bool) -> Result<(Self, Vec<TurnRecord>), EngineError> {
        jsonl::recover(path)?;
        let records: Vec<TurnRecord> = if path.exists() {
            jsonl::read_all(path)?
        } else {
            Vec::new()
        };
        let mut last = 0_u32;
        for r in &records {
            if r.round != last + 1 {
                return Err(EngineError::NonMonotonicRound {
                    last,
                    got: r.round,
                });
            }
            last = r.round;
        }
        Ok((
            Self {
                path: path.to_path_buf(),
                fsync,
                last_round: last,
            },
            records,
        ))
    }

    pub fn last_round(&self) -> u32 {
        self.last_round
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&mut self, record: &TurnRecord) -> Result<(), EngineError> {
        self.append_inner(record, None)
    }

    /// Test seam: performs the same append but aborts at the given point,
    /// leaving the file exactly as a real crash would.
    pub fn append_crashing(&mut self, record: &TurnRecord, crash: CrashPoint) -> Result<(), EngineError> {
        self.append_inner(record, Some(crash))
    }

    fn append_inner(&mut self, record: &TurnRecord, crash: Option<CrashPoint>) -> Result<(), EngineError> {
        if record.round != self.last_round + 1 {
            return Err(EngineError::NonMonotonicRound {
                last: self.last_round,
                got: record.round,
            });
        }
        let line = serde_json::to_string(record)?;
        jsonl::append_line(&self.path, &line, self.fsync, crash)?;
        self.last_round = record.round;
        Ok(())
    }
}

/// Session lifecycle events that are not turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Handoff {
        timestamp: u64,
        round: u32,
        from_identity: String,
        to_identity: String,
        cleared_context: bool,
    },
    InvocationAnomaly {
        timestamp: u64,
        round: u32,
        kind: String,
        detail: String,
    },
}

pub struct EventLog {
    path: PathBuf,
    fsync: bool,
}

impl EventLog {
    pub fn open(path: &Path, fsync: bool) -> Result<Self, EngineError> {
        jsonl::recover(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            fsync,
        })
    }

    pub fn append(&mut self, event: &SessionEvent) -> Result<(), EngineError> {
        let line = serde_json::to_string(event)?;
        jsonl::append_line(&self.path, &line, self.fsync, None)
    }

    pub fn read_all(&self) -> Result<Vec<SessionEvent>, EngineError> {
        if self.path.exists() {
            jsonl::read_all(&self.path)
        } else {
            Ok(Vec::new())
        }
    }
}
