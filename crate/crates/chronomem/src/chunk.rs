//! Atomic memory units.
//!
//! Both stores speak the same chunk type. Knowledge documents split into
//! parent chunks (delivered to prompts) and child chunks (indexed for
//! matching, pointing at their parent); dialogue write-back produces
//! experience chunks. Chunk text is verbatim: the engine never rewrites it.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceType {
    KnowledgeChild,
    KnowledgeParent,
    Experience,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MemoryChunk {
    pub chunk_id: String,
    pub session_id: String,
    pub source_type: SourceType,
    pub user_id: String,
    pub character_id: String,
    /// Verbatim text, never rewritten.
    pub text: String,
    /// Child chunks point at the parent they were cut from.
    pub parent_id: Option<String>,
    /// UTC epoch seconds.
    pub timestamp: u64,
    /// Dialogue round the chunk entered the store (0 = before the dialogue).
    pub round: u32,
    /// Provenance: document name, "chat", etc.
    pub source_label: String,
}

/// Splits text into consecutive windows of at most `size` Unicode scalar
/// values, consecutive windows sharing `overlap` characters (0 = disjoint).
/// The final window may be short. Callers validate `size > overlap`.
pub fn split_chars(text: &str, size: usize, overlap: usize) -> Vec<String> {
    debug_assert!(size > 0 && overlap < size);
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let end = (start + size).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start = end - overlap;
    }
    out
}
