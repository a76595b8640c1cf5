//! External temporal memory governance for long-horizon dialogue.
//!
//! The engine keeps two heterogeneous memory sources outside the model — a
//! curated knowledge base (parent/child chunked documents) and per-session
//! dialogue experience — and governs every turn end to end:
//!
//! 1. **Augment** the query with user/assistant role markers.
//! 2. **Retrieve** over both sources: the knowledge route fuses an
//!    embedding scan with lexical BM25 ranking via reciprocal-rank fusion,
//!    then normalizes and applies role/provenance bonuses; the experience
//!    route uses thresholded semantic similarity with session bonuses.
//! 3. **Rerank temporally** with a dual decay over round distance and
//!    wall-clock age, so newer statements outrank stale ones.
//! 4. **Unfold** the merged evidence chronologically into an annotated,
//!    budgeted prompt with a fixed section layout.
//! 5. **Enforce** a tagged analysis/response output protocol with a bounded
//!    repair loop.
//! 6. **Log** every turn atomically to append-only JSONL with the complete
//!    score breakdown, then write the dialogue back into experience memory.
//!
//! Sessions are fully replayable from their logs: reopening (or handing the
//! session to a different model) rebuilds memory, the recent window, and
//! the round counter from disk. Everything is deterministic given the same
//! corpus, clock, and model client — identical runs produce byte-identical
//! logs.

pub mod bm25;
pub mod chunk;
pub mod clock;
pub mod config;
pub mod embed;
pub mod engine;
pub mod error;
pub mod evidence;
pub mod jsonl;
pub mod log;
pub mod model;
pub mod protocol;
pub mod retrieval;
pub mod store;
pub mod temporal;
pub mod tokenize;
#[cfg(test)]
mod testutil;

pub use chunk::{MemoryChunk, SourceType};
pub use clock::{epoch_to_iso_date, Clock, ManualClock, SystemClock};
pub use config::EngineConfig;
pub use embed::{Embedder, HashingEmbedder, HttpEmbedder};
pub use engine::{Engine, Session, SessionMeta};
pub use error::{EngineError, ModelError};
pub use log::{SessionEvent, TurnRecord};
pub use model::{EvidenceGroundedMock, HttpModelClient, ModelClient, TagFailure, UNKNOWN_MARKER};
pub use retrieval::{QueryContext, Route, ScoredCandidate};
pub use store::{IngestMeta, IngestReceipt};
