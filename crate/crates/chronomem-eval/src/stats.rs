//! Per-model protocol adherence statistics, aggregated from turn logs.
//!
//! Turns that ended in an invocation anomaly (e.g. a timeout) never carried
//! a reply, so they are counted separately and excluded from the tag and
//! analysis-length statistics rather than polluting them with zeros.

use std::collections::BTreeMap;

use serde::Serialize;

use chronomem::log::TurnRecord;

/// Protocol statistics for one model identity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityStats {
    pub identity: String,
    /// Turns that produced a reply (anomalous turns excluded).
    pub turns: usize,
    /// Turns that ended in an invocation anomaly.
    pub anomalies: usize,
    /// Mean analysis length in characters over replying turns that carried
    /// an analysis tag; 0.0 when none did.
    pub mean_analysis_chars: f64,
    /// Replying turns whose final reply lacked the analysis tag.
    pub missing_analysis: usize,
    /// Replying turns whose final reply lacked the response tag.
    pub missing_response: usize,
    /// Replying turns that needed at least one repair re-invocation.
    pub repaired_turns: usize,
    /// Total repair re-invocations across all replying turns.
    pub repair_invocations: u64,
    /// Total evidence items dropped for prompt budget across all turns.
    pub truncations: u64,
}

/// Aggregates turn records by model identity, sorted by identity.
pub fn per_identity(records: &[TurnRecord]) -> Vec<IdentityStats> {
    #[derive(Default)]
    struct Acc {
        turns: usize,
        anomalies: usize,
        analysis_chars: u64,
        analyzed_turns: usize,
        missing_analysis: usize,
        missing_response: usize,
        repaired_turns: usize,
        repair_invocations: u64,
        truncations: u64,
    }
    let mut by_identity: BTreeMap<String, Acc> = BTreeMap::new();
    for r in records {
        let acc = by_identity.entry(r.model_identity.clone()).or_default();
        acc.truncations += u64::from(r.compliance.truncations);
        if r.anomaly.is_some() {
            acc.anomalies += 1;
            continue;
        }
        acc.turns += 1;
        if r.compliance.has_analysis_tag {
            acc.analysis_chars += r.compliance.analysis_length_chars;
            acc.analyzed_turns += 1;
        } else {
            acc.missing_analysis += 1;
        }
        if !r.compliance.has_response_tag {
            acc.missing_response += 1;
        }
        if r.compliance.repair_count > 0 {
            acc.repaired_turns += 1;
        }
        acc.repair_invocations += u64::from(r.compliance.repair_count);
    }
    by_identity
        .into_iter()
        .map(|(identity, a)| IdentityStats {
            identity,
            turns: a.turns,
            anomalies: a.anomalies,
            mean_analysis_chars: if a.analyzed_turns == 0 {
                0.0
            } else {
                a.analysis_chars as f64 / a.analyzed_turns as f64
            },
            missing_analysis: a.missing_analysis,
            missing_response: a.missing_response,
            repaired_turns: a.repaired_turns,
            repair_invocations: a.repair_invocations,
            truncations: a.truncations,
        })
        .collect()
}
