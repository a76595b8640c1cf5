//! Byte-stable evaluation artifacts: accuracy curves, review sheets, run
//! summaries, ablation matrices, and per-model protocol statistics.
//!
//! Writers format every float to a fixed number of decimals and emit rows
//! in a deterministic order, so re-running an evaluation reproduces each
//! file byte for byte. Review sheets round-trip through a reader that
//! tolerates the `unknown` cell marker.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use chronomem::EngineError;

use crate::ablation::AblationOutcome;
use crate::metrics::{rolling_means, ManualReview, ReviewSummary};
use crate::stats::IdentityStats;

/// Cell marker for a judgment the reviewer has not made yet.
pub const UNKNOWN_CELL: &str = "unknown";

/// Writes via a temp file and rename so readers never observe a torn file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), EngineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| EngineError::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| EngineError::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| EngineError::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| EngineError::io(path, e))?;
    Ok(())
}

/// `round,auto_rolling,manual_rolling` — rolling prefix accuracies, three
/// decimals, one row per round.
pub fn write_curves_csv(
    path: &Path,
    auto: &[bool],
    reviews: &[ManualReview],
) -> Result<(), EngineError> {
    if auto.len() != reviews.len() {
        return Err(EngineError::InvalidConfig(format!(
            "curve series lengths differ: {} vs {}",
            auto.len(),
            reviews.len()
        )));
    }
    let finals: Vec<bool> = reviews.iter().map(|r| r.final_correct()).collect();
    let auto_curve = rolling_means(auto);
    let manual_curve = rolling_means(&finals);
    let mut out = String::from("round,auto_rolling,manual_rolling\n");
    for (i, r) in reviews.iter().enumerate() {
        out.push_str(&format!("{},{:.3},{:.3}\n", r.round, auto_curve[i], manual_curve[i]));
    }
    write_atomic(path, out.as_bytes())
}

fn cell(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1",
        Some(false) => "0",
        None => UNKNOWN_CELL,
    }
}

/// `round,manual_support,answer_correct` with `1`/`0`/`unknown` cells.
pub fn write_reviews_csv(path: &Path, reviews: &[ManualReview]) -> Result<(), EngineError> {
    let mut out = String::from("round,manual_support,answer_correct\n");
    for r in reviews {
        out.push_str(&format!(
            "{},{},{}\n",
            r.round,
            cell(r.manual_support),
            cell(r.answer_correct)
        ));
    }
    write_atomic(path, out.as_bytes())
}

fn parse_cell(raw: &str, path: &Path, line: usize) -> Result<Option<bool>, EngineError> {
    match raw {
        "1" => Ok(Some(true)),
        "0" => Ok(Some(false)),
        UNKNOWN_CELL => Ok(None),
        other => Err(EngineError::InvalidConfig(format!(
            "{}:{line}: bad review cell {other:?} (expected 1, 0, or {UNKNOWN_CELL})",
            path.display()
        ))),
    }
}

/// Reads a review sheet written by [`write_reviews_csv`] (or edited by a
/// human reviewer with the same columns).
pub fn read_reviews_csv(path: &Path) -> Result<Vec<ManualReview>, EngineError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let mut reviews = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| EngineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        if row.len() != 3 {
            return Err(EngineError::InvalidConfig(format!(
                "{}:{}: expected 3 columns, got {}",
                path.display(),
                i + 2,
                row.len()
            )));
        }
        let round: u32 = row[0].parse().map_err(|_| {
            EngineError::InvalidConfig(format!("{}:{}: bad round {:?}", path.display(), i + 2, &row[0]))
        })?;
        reviews.push(ManualReview {
            round,
            manual_support: parse_cell(&row[1], path, i + 2)?,
            answer_correct: parse_cell(&row[2], path, i + 2)?,
        });
    }
    Ok(reviews)
}

/// Pretty JSON with a trailing newline; field order fixed by the type.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EngineError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Run summary serialized for `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub run_label: String,
    pub total_rounds: usize,
    pub auto_correct: usize,
    pub auto_accuracy: f64,
    pub final_correct: usize,
    pub manual_accuracy: f64,
    pub corrections: usize,
    pub pending: usize,
}

impl RunSummary {
    pub fn from_review(label: &str, s: &ReviewSummary) -> Self {
        Self {
            run_label: label.to_string(),
            total_rounds: s.total,
            auto_correct: s.auto_correct,
            auto_accuracy: s.auto_accuracy,
            final_correct: s.final_correct,
            manual_accuracy: s.manual_accuracy,
            corrections: s.corrections,
            pending: s.pending,
        }
    }
}

/// `mode,correct,total,accuracy,stale_order_anomalies`, one row per mode in
/// the given order.
pub fn write_ablation_csv(path: &Path, outcomes: &[AblationOutcome]) -> Result<(), EngineError> {
    let mut out = String::from("mode,correct,total,accuracy,stale_order_anomalies\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{:.3},{}\n",
            o.mode.as_str(),
            o.correct,
            o.total,
            o.accuracy(),
            o.stale_order_anomalies
        ));
    }
    write_atomic(path, out.as_bytes())
}

/// Per-identity protocol statistics table.
pub fn write_stats_csv(path: &Path, stats: &[IdentityStats]) -> Result<(), EngineError> {
    let mut out = String::from(
        "model_identity,turns,anomalies,mean_analysis_chars,missing_analysis,missing_response,repaired_turns,repair_invocations,truncations\n",
    );
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{:.1},{},{},{},{},{}\n",
            s.identity,
            s.turns,
            s.anomalies,
            s.mean_analysis_chars,
            s.missing_analysis,
            s.missing_response,
            s.repaired_turns,
            s.repair_invocations,
            s.truncations
        ));
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ablation::AblationMode;
    use tempfile::tempdir;

    fn review(round: u32, s: Option<bool>, c: Option<bool>) -> ManualReview {
        ManualReview {
            round,
            manual_support: s,
            answer_correct: c,
        }
    }

    #[test]
    fn curves_csv_layout_is_frozen() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("curves.csv");
        let auto = [true, false, true];
        let reviews = [
            review(1, Some(true), Some(true)),
            review(2, None, None),
            review(3, Some(true), Some(true)),
        ];
        write_curves_csv(&path, &auto, &reviews).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "round,auto_rolling,manual_rolling\n1,1.000,1.000\n2,0.500,0.500\n3,0.667,0.667\n"
        );
    }

    #[test]
    fn review_sheet_round_trips_including_unknown() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("reviews.csv");
        let reviews = vec![
            review(1, Some(true), Some(true)),
            review(2, Some(false), Some(true)),
            review(3, None, Some(false)),
            review(4, None, None),
        ];
        write_reviews_csv(&path, &reviews).unwrap();
        let back = read_reviews_csv(&path).unwrap();
        assert_eq!(back, reviews);
    }

    #[test]
    fn reader_rejects_malformed_cells() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "round,manual_support,answer_correct\n1,maybe,1\n").unwrap();
        assert!(read_reviews_csv(&path).is_err());
        fs::write(&path, "round,manual_support,answer_correct\nx,1,1\n").unwrap();
        assert!(read_reviews_csv(&path).is_err());
    }

    #[test]
    fn writers_are_byte_stable_across_runs() {
        let dir = tempdir().unwrap();
        let auto = [true, true, false];
        let reviews = [
            review(1, Some(true), Some(true)),
            review(2, Some(true), Some(true)),
            review(3, None, None),
        ];
        let a = dir.path().join("a.csv");
        let b = dir.path().join("b.csv");
        write_curves_csv(&a, &auto, &reviews).unwrap();
        write_curves_csv(&b, &auto, &reviews).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

        let outcomes = vec![AblationOutcome {
            mode: AblationMode::Full,
            correct: 15,
            total: 15,
            stale_order_anomalies: 0,
        }];
        let a = dir.path().join("abl_a.csv");
        let b = dir.path().join("abl_b.csv");
        write_ablation_csv(&a, &outcomes).unwrap();
        write_ablation_csv(&b, &outcomes).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert_eq!(
            fs::read_to_string(&a).unwrap(),
            "mode,correct,total,accuracy,stale_order_anomalies\nfull,15,15,1.000,0\n"
        );
    }
}
