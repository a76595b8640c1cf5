//! Model clients: the trait the engine talks to, an HTTP client for real
//! backends, and a deterministic evidence-grounded mock for evaluation.
//!
//! The mock reads the same sectioned prompt a real model would receive and
//! answers *only* from the retrieved-memory section: if its answer key
//! matches the current question, it replies with the gold answer when that
//! answer is actually present in the delivered evidence, and with a refusal
//! marker when it is not. That makes end-to-end correctness a pure function
//! of what retrieval delivered, which is exactly what the evaluation
//! harness needs to measure.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::evidence::{SECTION_MEMORY, SECTION_QUESTION};
use crate::protocol::{ANALYSIS_CLOSE, ANALYSIS_OPEN, RESPONSE_CLOSE, RESPONSE_OPEN};

/// Fixed refusal emitted when the question is recognized but the evidence
/// does not establish the answer.
pub const UNKNOWN_MARKER: &str = "I cannot verify this from the records.";

/// Prefix of every grounded mock answer.
pub const GROUNDED_PREFIX: &str = "Based on the stored records, ";

pub trait ModelClient: Send + Sync {
    /// Stable identifier recorded with every turn.
    fn identity(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, ModelError>;
}

/// Extracts the body of a `## Section` from a sectioned prompt: everything
/// after the header line up to the next `## ` header (or the end).
pub fn extract_section<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    let start = prompt.find(header)? + header.len();
    let rest = &prompt[start..];
    let end = rest.find("\n## ").unwrap_or(rest.len());
    Some(rest[..end].trim())
}

/// Ways the mock can violate the output protocol on purpose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFailure {
    DropAnalysis,
    DropResponse,
    DropBoth,
}

/// Deterministic stand-in model. Thread-safe; every `complete` call bumps an
/// invocation counter that failure schedules are keyed on (1-based).
pub struct EvidenceGroundedMock {
    identity: String,
    /// (question pattern, gold answer) — first matching pattern wins.
    answer_key: Vec<(String, String)>,
    omit_on_call: BTreeMap<u64, TagFailure>,
    omit_always: Option<TagFailure>,
    timeout_on_call: BTreeMap<u64, ()>,
    calls: AtomicU64,
}

impl EvidenceGroundedMock {
    pub fn new(identity: &str) -> Self {
        Self {
            identity: identity.to_string(),
            answer_key: Vec::new(),
            omit_on_call: BTreeMap::new(),
            omit_always: None,
            timeout_on_call: BTreeMap::new(),
            calls: AtomicU64::new(0),
        }
    }

    /// Registers a question pattern and the gold answer it should be graded
    /// against. Patterns are matched by substring, in registration order.
    pub fn with_answer(mut self, pattern: &str, gold: &str) -> Self {
        self.answer_key.push((pattern.to_string(), gold.to_string()));
        self
    }

    pub fn with_answers(mut self, pairs: &[(String, String)]) -> Self {
        self.answer_key.extend(pairs.iter().cloned());
        self
    }

    /// Violates the protocol on one specific invocation (1-based).
    pub fn with_omit_on_call(mut self, call: u64, failure: TagFailure) -> Self {
        self.omit_on_call.insert(call, failure);
        self
    }

    /// Violates the protocol on every invocation.
    pub fn with_omit_always(mut self, failure: TagFailure) -> Self {
        self.omit_always = Some(failure);
        self
    }

    /// Times out on one specific invocation (1-based).
    pub fn with_timeout_on_call(mut self, call: u64) -> Self {
        self.timeout_on_call.insert(call, ());
        self
    }

    pub fn calls_made(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn answer_for(&self, prompt: &str) -> (String, String) {
        let memory = extract_section(prompt, SECTION_MEMORY).unwrap_or("");
        let question = extract_section(prompt, SECTION_QUESTION).unwrap_or("");
        let evidence_entries = memory.lines().filter(|l| l.starts_with('[')).count();
        let response = match self
            .answer_key
            .iter()
            .find(|(pattern, _)| question.contains(pattern.as_str()))
        {
            Some((_, gold)) if memory.contains(gold.as_str()) => {
                format!("{GROUNDED_PREFIX}{gold}.")
            }
            Some(_) => UNKNOWN_MARKER.to_string(),
            None => "Noted.".to_string(),
        };
        let analysis = format!(
            "Reviewing {evidence_entries} retrieved entries in chronological order for the \
question at hand; where entries conflict, the most recent statement governs. Question: {question}"
        );
        (analysis, response)
    }
}

impl ModelClient for EvidenceGroundedMock {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn complete(&self, prompt: &str) -> Result<String, ModelError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if self.timeout_on_call.contains_key(&call) {
            return Err(ModelError::Timeout(Duration::from_secs(30)));
        }
        let (analysis, response) = self.answer_for(prompt);
        let failure = self.omit_always.or_else(|| self.omit_on_call.get(&call).copied());
        Ok(match failure {
            Some(TagFailure::DropBoth) => response,
            Some(TagFailure::DropAnalysis) => {
                format!("{RESPONSE_OPEN}{response}{RESPONSE_CLOSE}")
            }
            Some(TagFailure::DropResponse) => {
                format!("{ANALYSIS_OPEN}{analysis}{ANALYSIS_CLOSE}")
            }
            None => format!(
                "{ANALYSIS_OPEN}{analysis}{ANALYSIS_CLOSE}\n{RESPONSE_OPEN}{response}{RESPONSE_CLOSE}"
            ),
        })
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// Client for an HTTP completion endpoint: POST `{"prompt": ...}`, expects
/// `{"text": ...}` back.
pub struct HttpModelClient {
    identity: String,
    url: String,
    timeout: Duration,
    agent: ureq::Agent,
}

/// Environment variable naming an HTTP completion endpoint.
pub const ENV_MODEL_URL: &str = "CHRONOMEM_MODEL_URL";

impl HttpModelClient {
    pub fn new(identity: &str, url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            identity: identity.to_string(),
            url: url.to_string(),
            timeout,
            agent,
        }
    }
}

impl ModelClient for HttpModelClient {
    fn identity(&self) -> &str {
        &self.identity
    }

    fn complete(&self, prompt: &str) -> Result<String, ModelError> {
        let mut reply = self
            .agent
            .post(&self.url)
            .send_json(CompletionRequest { prompt })
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => ModelError::Timeout(self.timeout),
                other => ModelError::Transport(other.to_string()),
            })?;
        let parsed: CompletionResponse = reply
            .body_mut()
            .read_json()
            .map_err(|e| ModelError::Malformed(e.to_string()))?;
        Ok(parsed.text)
    }
}
