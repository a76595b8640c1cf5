//! Evaluation harness for the temporal memory engine: synthetic high-noise
//! corpora with provable retrieval geometry, scripted QA and handoff
//! probes, the component-contribution (ablation) matrix, review-ledger
//! metrics, per-model protocol statistics, and byte-stable report writers.

pub mod ablation;
pub mod corpus;
pub mod highnoise;
pub mod metrics;
pub mod qa;
pub mod report;
pub mod stats;

pub use ablation::{run_ablation, run_matrix, AblationMode, AblationOutcome};
pub use corpus::{synthesize, CorpusSpec, SyntheticCorpus};
pub use highnoise::{retrieval_gate, review_fixture, NoiseRatio, ReviewFixture};
pub use metrics::{rolling_means, summarize, ManualReview, ReviewSummary};
pub use qa::{run_handoff_probe, run_qa, HandoffProbe, QaCase, QaRun};
pub use stats::{per_identity, IdentityStats};
