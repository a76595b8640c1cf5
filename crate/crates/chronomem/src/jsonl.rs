//! Crash-safe JSONL appends.
//!
//! Append protocol: the serialized line is first written and synced to a
//! sidecar stage file, then published to the main log with a single
//! append-mode `write` of the whole line, then the stage file is removed.
//! Publishing is one syscall, so a reader never observes a torn record; a
//! crash between stage and publish loses only the unacknowledged record.
//! Reopening a log discards any orphaned stage file.
//!
//! Tests exercise the crash window through [`CrashPoint`], which aborts the
//! protocol at a named seam exactly as a process death there would.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::EngineError;

/// Seams where a simulated crash can abort an append.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashPoint {
    /// Die before anything reaches disk.
    BeforeStage,
    /// Die after the stage file is durable but before publish.
    AfterStage,
    /// Die after publish but before the stage file is cleaned up.
    AfterPublish,
}

/// Sidecar path used to stage a pending line.
pub fn stage_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".staged");
    path.with_file_name(name)
}

/// Appends one record line (no trailing newline in `line`) using the
/// stage-then-publish protocol. `crash` aborts at the given seam.
pub fn append_line(
    path: &Path,
    line: &str,
    fsync: bool,
    crash: Option<CrashPoint>,
) -> Result<(), EngineError> {
    debug_assert!(!line.contains('\n'), "serialized records must be single lines");
    if crash == Some(CrashPoint::BeforeStage) {
        return Err(EngineError::SimulatedCrash("serialize"));
    }
    let stage = stage_path(path);
    let mut payload = String::with_capacity(line.len() + 1);
    payload.push_str(line);
    payload.push('\n');
    {
        let mut f = File::create(&stage).map_err(|e| EngineError::io(&stage, e))?;
        f.write_all(payload.as_bytes()).map_err(|e| EngineError::io(&stage, e))?;
        if fsync {
            f.sync_all().map_err(|e| EngineError::io(&stage, e))?;
        }
    }
    if crash == Some(CrashPoint::AfterStage) {
        return Err(EngineError::SimulatedCrash("stage"));
    }
    {
        let mut f = OpenOptions::new()
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| EngineError::io(path, e))?;
        f.write_all(payload.as_bytes()).map_err(|e| EngineError::io(path, e))?;
        if fsync {
            f.sync_all().map_err(|e| EngineError::io(path, e))?;
        }
    }
    if crash == Some(CrashPoint::AfterPublish) {
        return Err(EngineError::SimulatedCrash("publish"));
    }
    std::fs::remove_file(&stage).map_err(|e| EngineError::io(&stage, e))?;
    Ok(())
}

/// Discards an orphaned stage file (a record that was never acknowledged).
pub fn recover(path: &Path) -> Result<(), EngineError> {
    let stage = stage_path(path);
    if stage.exists() {
        std::fs::remove_file(&stage).map_err(|e| EngineError::io(&stage, e))?;
    }
    Ok(())
}

/// Strict reader: every line must parse; a bad line is reported with its
/// 1-based line number. A missing file is an io error (callers that treat
/// absence as "no session" check existence first).
pub fn read_all<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, EngineError> {
    let file = File::open(path).map_err(|e| EngineError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| EngineError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| EngineError::CorruptLog {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Row {
        n: u32,
        text: String,
    }

    fn row_line(n: u32) -> String {
        serde_json::to_string(&Row {
            n,
            text: format!("row {n}"),
        })
        .unwrap()
    }

    #[test]
    fn append_then_read_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        for n in 1..=3 {
            append_line(&path, &row_line(n), true, None).unwrap();
        }
        let rows: Vec<Row> = read_all(&path).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].n, 3);
        assert!(!stage_path(&path).exists(), "stage file must be cleaned up");
    }

    #[test]
    fn crash_before_publish_loses_only_the_pending_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        append_line(&path, &row_line(1), true, None).unwrap();
        for point in [CrashPoint::BeforeStage, CrashPoint::AfterStage] {
            let err = append_line(&path, &row_line(99), true, Some(point)).unwrap_err();
            assert!(matches!(err, EngineError::SimulatedCrash(_)));
            recover(&path).unwrap();
            let rows: Vec<Row> = read_all(&path).unwrap();
            assert_eq!(rows.len(), 1, "crash at {point:?} must not publish");
        }
    }

    #[test]
    fn crash_after_publish_keeps_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        let err = append_line(&path, &row_line(1), true, Some(CrashPoint::AfterPublish)).unwrap_err();
        assert!(matches!(err, EngineError::SimulatedCrash("publish")));
        assert!(stage_path(&path).exists(), "cleanup was skipped by the crash");
        recover(&path).unwrap();
        assert!(!stage_path(&path).exists());
        let rows: Vec<Row> = read_all(&path).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n, 1);
    }

    #[test]
    fn corrupt_interior_line_is_reported_with_its_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        std::fs::write(&path, format!("{}\nnot json\n{}\n", row_line(1), row_line(3))).unwrap();
        match read_all::<Row>(&path) {
            Err(EngineError::CorruptLog { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected corrupt-log error, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_reads_as_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.jsonl");
        std::fs::write(&path, "").unwrap();
        let rows: Vec<Row> = read_all(&path).unwrap();
        assert!(rows.is_empty());
    }
}
