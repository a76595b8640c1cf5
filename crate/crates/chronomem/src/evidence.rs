//! Evidence assembly: merging the two retrieval routes under their quotas,
//! unfolding the survivors into chronological order with provenance
//! annotations, and rendering the final sectioned prompt under a character
//! budget.
//!
//! The prompt layout is fixed — system persona, recent dialogue window,
//! retrieved memory, output protocol, current question — so downstream
//! parsers (and the evaluation mock) can locate sections by their headers.

use crate::clock::epoch_to_iso_date;
use crate::config::QuotaConfig;
use crate::retrieval::{sort_by_final, ScoredCandidate};

pub const SECTION_SYSTEM: &str = "## System";
pub const SECTION_DIALOGUE: &str = "## Recent dialogue";
pub const SECTION_MEMORY: &str = "## Retrieved memory";
pub const SECTION_PROTOCOL: &str = "## Output protocol";
pub const SECTION_QUESTION: &str = "## Current question";

pub const EMPTY_EVIDENCE_MARKER: &str = "(no retrieved evidence)";
pub const EMPTY_DIALOGUE_MARKER: &str = "(none)";

pub const TEMPLATE_VERSION_BASE: &str = "v1";
pub const TEMPLATE_VERSION_STRONG: &str = "v1-strong";

const PROTOCOL_BASE: &str = "Think inside <analysis></analysis>: restate what the retrieved memory \
establishes, note conflicts, and prefer newer statements over older ones. Then give only the \
user-facing reply inside <response></response>.";

const PROTOCOL_STRONG: &str = "You MUST reply in exactly two tagged blocks and nothing else.\n\
First block: <analysis></analysis> — restate what the retrieved memory establishes, note \
conflicts, and prefer newer statements over older ones. Second block: <response></response> — \
the user-facing reply only. Both tags are mandatory on every turn; output outside the tags is \
discarded. Repeat: open and close BOTH tags.";

/// Protocol instructions embedded in the prompt.
pub fn protocol_instructions(strong: bool) -> &'static str {
    if strong {
        PROTOCOL_STRONG
    } else {
        PROTOCOL_BASE
    }
}

pub fn template_version(strong: bool) -> &'static str {
    if strong {
        TEMPLATE_VERSION_STRONG
    } else {
        TEMPLATE_VERSION_BASE
    }
}

/// One evidence entry as rendered into the prompt: a provenance annotation
/// line followed by the chunk text, verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceItem {
    pub chunk_id: String,
    pub delivered_id: String,
    pub annotation: String,
    pub text: String,
}

impl EvidenceItem {
    fn render(&self) -> String {
        format!("{}\n{}", self.annotation, self.text)
    }
}

/// Applies per-route quotas, concatenates, and orders by descending final
/// score (ties by ascending chunk id). This is the candidate list that gets
/// logged for the turn.
pub fn merge_routes(
    mut knowledge: Vec<ScoredCandidate>,
    mut experience: Vec<ScoredCandidate>,
    quotas: &QuotaConfig,
) -> Vec<ScoredCandidate> {
    sort_by_final(&mut knowledge);
    knowledge.truncate(quotas.knowledge_k);
    sort_by_final(&mut experience);
    experience.truncate(quotas.chat_history_k);
    let mut merged = knowledge;
    merged.append(&mut experience);
    sort_by_final(&mut merged);
    merged
}

/// Reorders merged candidates into chronological narrative order (timestamp,
/// then round, then chunk id — all ascending) and attaches a provenance
/// annotation of the form `[route | label | date | N rounds ago]`.
pub fn unfold_chronologically(candidates: &[ScoredCandidate], current_round: u32) -> Vec<EvidenceItem> {
    let mut order: Vec<&ScoredCandidate> = candidates.iter().collect();
    order.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.round.cmp(&b.round))
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
    order
        .into_iter()
        .map(|c| {
            let label = if c.source_label.is_empty() { "unlabeled" } else { &c.source_label };
            let annotation = format!(
                "[{} | {} | {} | {} rounds ago]",
                c.route.as_str(),
                label,
                epoch_to_iso_date(c.timestamp),
                current_round.saturating_sub(c.round),
            );
            EvidenceItem {
                chunk_id: c.chunk_id.clone(),
                delivered_id: c.delivered_id().to_string(),
                annotation,
                text: c.text.clone(),
            }
        })
        .collect()
}

/// The rendered prompt plus bookkeeping for the turn record.
#[derive(Debug, Clone)]
pub struct PromptBuild {
    pub prompt: String,
    /// Evidence items dropped to honor the character budget.
    pub truncations: u32,
    /// Chunk ids that survived into the prompt, in prompt order.
    pub kept: Vec<String>,
    pub template_version: String,
}

pub struct PromptInputs<'a> {
    pub persona: &'a str,
    /// (user, assistant) pairs, oldest first. Empty renders a placeholder.
    pub window: &'a [(String, String)],
    /// Chronologically unfolded evidence, oldest first.
    pub items: Vec<EvidenceItem>,
    pub question: &'a str,
    /// Date line for the memory section header.
    pub as_of_date: &'a str,
    pub strong: bool,
    pub budget_chars: usize,
}

fn render(inputs: &PromptInputs, items: &[EvidenceItem]) -> String {
    let mut s = String::new();
    s.push_str(SECTION_SYSTEM);
    s.push('\n');
    s.push_str(inputs.persona);
    s.push_str(
        "\nAnswer strictly from the recent dialogue and retrieved memory below. \
If the records do not establish an answer, say so plainly.\n\n",
    );
    s.push_str(SECTION_DIALOGUE);
    s.push('\n');
    if inputs.window.is_empty() {
        s.push_str(EMPTY_DIALOGUE_MARKER);
        s.push('\n');
    } else {
        for (user, assistant) in inputs.window {
            s.push_str("User: ");
            s.push_str(user);
            s.push_str("\nAssistant: ");
            s.push_str(assistant);
            s.push('\n');
        }
    }
    s.push('\n');
    s.push_str(SECTION_MEMORY);
    s.push_str(&format!("\nMemory as of {} (oldest first):\n", inputs.as_of_date));
    if items.is_empty() {
        s.push_str(EMPTY_EVIDENCE_MARKER);
        s.push('\n');
    } else {
        for item in items {
            s.push_str(&item.render());
            s.push('\n');
        }
    }
    s.push('\n');
    s.push_str(SECTION_PROTOCOL);
    s.push('\n');
    s.push_str(protocol_instructions(inputs.strong));
    s.push_str("\n\n");
    s.push_str(SECTION_QUESTION);
    s.push('\n');
    s.push_str(inputs.question);
    s
}

/// Renders the prompt, dropping whole evidence items oldest-first until the
/// prompt fits the character budget (or no items remain).
pub fn build_prompt(inputs: PromptInputs) -> PromptBuild {
    let mut items = inputs.items.clone();
    let mut truncations = 0_u32;
    let mut prompt = render(&inputs, &items);
    while prompt.chars().count() > inputs.budget_chars && !items.is_empty() {
        items.remove(0);
        truncations += 1;
        prompt = render(&inputs, &items);
    }
    PromptBuild {
        prompt,
        truncations,
        kept: items.iter().map(|i| i.chunk_id.clone()).collect(),
        template_version: template_version(inputs.strong).to_string(),
    }
}
