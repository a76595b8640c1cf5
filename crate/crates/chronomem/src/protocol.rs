//! Output protocol: tagged analysis/response parsing and bounded repair.
//!
//! Replies must carry `<analysis>...</analysis>` followed by
//! `<response>...</response>`. Parsing takes the first well-formed span of
//! each tag; a reply without a response tag falls back to the raw text so
//! the dialogue never stalls, and the violation is recorded instead of
//! patched over.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::model::ModelClient;

pub const ANALYSIS_OPEN: &str = "<analysis>";
pub const ANALYSIS_CLOSE: &str = "</analysis>";
pub const RESPONSE_OPEN: &str = "<response>";
pub const RESPONSE_CLOSE: &str = "</response>";

/// Appended to the prompt before each repair re-invocation.
pub const REPAIR_NOTICE: &str = "\n\n## Repair notice\nThe previous reply violated the output protocol. Answer the same question again, wrapping private reasoning in <analysis>...</analysis> immediately followed by the final reply in <response>...</response>. Both tags are mandatory.";

/// Per-turn audit of protocol adherence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplianceReport {
    pub has_analysis_tag: bool,
    pub has_response_tag: bool,
    pub analysis_length_chars: u64,
    pub repair_count: u32,
    /// Evidence items dropped to fit the prompt budget.
    pub truncations: u32,
}

impl ComplianceReport {
    pub fn is_compliant(&self) -> bool {
        self.has_analysis_tag && self.has_response_tag
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReply {
    pub analysis: Option<String>,
    /// Extracted response, or the full raw reply when the tag is missing.
    pub response: String,
    pub has_analysis_tag: bool,
    pub has_response_tag: bool,
}

fn extract_first(raw: &str, open: &str, close: &str) -> Option<String> {
    let start = raw.find(open)? + open.len();
    let rest = &raw[start..];
    let end = rest.find(close)?;
    Some(rest[..end].to_string())
}

/// Parses the first well-formed `<analysis>` and `<response>` spans.
pub fn parse_tagged_response(raw: &str) -> ParsedReply {
    let analysis = extract_first(raw, ANALYSIS_OPEN, ANALYSIS_CLOSE);
    let response = extract_first(raw, RESPONSE_OPEN, RESPONSE_CLOSE);
    let has_analysis_tag = analysis.is_some();
    match response {
        Some(r) => ParsedReply {
            analysis,
            response: r,
            has_analysis_tag,
            has_response_tag: true,
        },
        None => ParsedReply {
            analysis,
            response: raw.to_string(),
            has_analysis_tag,
            has_response_tag: false,
        },
    }
}

#[derive(Debug)]
pub struct RepairOutcome {
    pub raw: String,
    pub parsed: ParsedReply,
    pub repair_count: u32,
}

/// Invokes the model, re-asking with an appended [`REPAIR_NOTICE`] while the
/// reply is non-compliant, up to `max_repairs` re-invocations. Always
/// terminates; the last reply is returned with its true compliance flags.
pub fn repair_loop(
    client: &dyn ModelClient,
    prompt: &str,
    max_repairs: u32,
) -> Result<RepairOutcome, ModelError> {
    let mut current = prompt.to_string();
    let mut repair_count = 0;
    loop {
        let raw = client.complete(&current)?;
        let parsed = parse_tagged_response(&raw);
        if (parsed.has_analysis_tag && parsed.has_response_tag) || repair_count >= max_repairs {
            return Ok(RepairOutcome {
                raw,
                parsed,
                repair_count,
            });
        }
        repair_count += 1;
        current.push_str(REPAIR_NOTICE);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EvidenceGroundedMock, TagFailure};

    #[test]
    fn well_formed_reply_parses_both_spans() {
        let p = parse_tagged_response("<analysis>thinking here</analysis>\n<response>Tea.</response>");
        assert_eq!(p.analysis.as_deref(), Some("thinking here"));
        assert_eq!(p.response, "Tea.");
        assert!(p.has_analysis_tag && p.has_response_tag);
    }

    #[test]
    fn missing_response_falls_back_to_raw() {
        let raw = "<analysis>only analysis</analysis> trailing prose";
        let p = parse_tagged_response(raw);
        assert!(p.has_analysis_tag);
        assert!(!p.has_response_tag);
        assert_eq!(p.response, raw);
    }

    #[test]
    fn malformed_tag_counts_as_missing() {
        let raw = "<analysis>never closed <response>hi</response>";
        let p = parse_tagged_response(raw);
        assert!(!p.has_analysis_tag, "unclosed analysis is not well-formed");
        // First well-formed response span is still found.
        assert!(p.has_response_tag);
        assert_eq!(p.response, "hi");
    }

    #[test]
    fn first_spans_win_when_duplicated() {
        let p = parse_tagged_response(
            "<analysis>a1</analysis><response>r1</response><analysis>a2</analysis><response>r2</response>",
        );
        assert_eq!(p.analysis.as_deref(), Some("a1"));
        assert_eq!(p.response, "r1");
    }

    #[test]
    fn repair_recovers_a_single_failure() {
        // Mock drops both tags on call 1 and complies on call 2.
        let mock = EvidenceGroundedMock::new("m").with_omit_on_call(1, TagFailure::DropBoth);
        let out = repair_loop(&mock, "## Current question\nhello", 2).unwrap();
        assert_eq!(out.repair_count, 1);
        assert!(out.parsed.has_analysis_tag && out.parsed.has_response_tag);
    }

    #[test]
    fn hopeless_model_stops_at_the_bound() {
        let mock = EvidenceGroundedMock::new("m").with_omit_always(TagFailure::DropBoth);
        let out = repair_loop(&mock, "## Current question\nhello", 2).unwrap();
        assert_eq!(out.repair_count, 2, "exactly max_repairs re-invocations");
        assert!(!out.parsed.has_analysis_tag);
        assert!(!out.parsed.has_response_tag);
        assert_eq!(mock.calls_made(), 3, "initial call plus two repairs");
    }

    #[test]
    fn zero_budget_accepts_the_first_reply_flagged() {
        let mock = EvidenceGroundedMock::new("m").with_omit_always(TagFailure::DropAnalysis);
        let out = repair_loop(&mock, "## Current question\nhello", 0).unwrap();
        assert_eq!(out.repair_count, 0);
        assert!(!out.parsed.has_analysis_tag);
        assert!(out.parsed.has_response_tag);
    }
}
