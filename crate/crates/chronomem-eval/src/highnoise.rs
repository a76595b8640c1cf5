//! High-noise long-horizon evaluation: the two published noise regimes,
//! their pinned 50-round review ledgers, and a live retrieval gate over the
//! synthetic corpus.
//!
//! The review ledgers reproduce the reference desk study: 50 questions per
//! regime, an automatic correctness flag per round, and the human review
//! that followed. At the moderate ratio every round was eventually
//! reviewed; at the extreme ratio the last ten flagged rounds were still
//! awaiting review when the books closed, and they count as incorrect.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use chronomem::config::EngineConfig;
use chronomem::embed::HashingEmbedder;
use chronomem::retrieval::{augment_query, retrieve_knowledge, QueryContext};
use chronomem::store::KnowledgeStore;
use chronomem::EngineError;

use crate::corpus::{self, CorpusSpec, Domain, SyntheticCorpus, EVAL_CHARACTER_ID, EVAL_USER_ID};
use crate::metrics::ManualReview;

/// Distractor-to-fact regimes the benchmark suite runs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseRatio {
    OneToFive,
    OneToTwoHundred,
}

impl NoiseRatio {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseRatio::OneToFive => "1to5",
            NoiseRatio::OneToTwoHundred => "1to200",
        }
    }

    pub fn noise_per_gold(&self) -> usize {
        match self {
            NoiseRatio::OneToFive => 5,
            NoiseRatio::OneToTwoHundred => 200,
        }
    }

    /// Corpus spec for this regime (50 facts, decoys inside the noise
    /// budget).
    pub fn corpus_spec(&self) -> CorpusSpec {
        CorpusSpec {
            gold_count: 50,
            noise_per_gold: self.noise_per_gold(),
            decoys_per_gold: 4,
            seed: 7,
            dim: 256,
        }
    }
}

/// The pinned 50-round ledger for one regime: automatic flags plus the
/// human review that followed.
#[derive(Debug, Clone)]
pub struct ReviewFixture {
    pub auto: Vec<bool>,
    pub reviews: Vec<ManualReview>,
}

/// Reference review ledger. Moderate noise: 27/50 automatic, all rounds
/// reviewed and confirmed (23 corrections, 0 pending). Extreme noise:
/// 22/50 automatic, 18 corrections confirmed, 10 rounds still pending.
pub fn review_fixture(ratio: NoiseRatio) -> ReviewFixture {
    let (total, auto_true, pending_count, seed) = match ratio {
        NoiseRatio::OneToFive => (50_usize, 27_usize, 0_usize, 0x0105_u64),
        NoiseRatio::OneToTwoHundred => (50, 22, 10, 0x01c8),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let auto_false: BTreeSet<usize> = order[..total - auto_true].iter().copied().collect();
    // The rounds still awaiting review are the latest flagged ones.
    let pending: BTreeSet<usize> = auto_false
        .iter()
        .rev()
        .take(pending_count)
        .copied()
        .collect();

    let auto: Vec<bool> = (0..total).map(|i| !auto_false.contains(&i)).collect();
    let reviews: Vec<ManualReview> = (0..total)
        .map(|i| {
            if pending.contains(&i) {
                ManualReview {
                    round: i as u32 + 1,
                    manual_support: None,
                    answer_correct: None,
                }
            } else {
                ManualReview {
                    round: i as u32 + 1,
                    manual_support: Some(true),
                    answer_correct: Some(true),
                }
            }
        })
        .collect();
    ReviewFixture { auto, reviews }
}

/// One query's outcome in the live retrieval gate.
#[derive(Debug, Clone, Serialize)]
pub struct GateCase {
    pub index: usize,
    pub domain: Domain,
    pub hybrid_hit: bool,
    pub vector_only_hit: bool,
}

/// Live sweep over the synthetic corpus: does the fact's parent chunk reach
/// the top 3 with hybrid retrieval, and with the lexical leg disabled?
#[derive(Debug, Clone, Serialize)]
pub struct RetrievalGateOutcome {
    pub total: usize,
    pub hybrid_hits: usize,
    pub vector_only_hits: usize,
    pub cases: Vec<GateCase>,
    pub elapsed_secs: f64,
}

/// Builds the corpus, indexes it in memory, and runs every query against
/// the hybrid configuration and the vector-only ablation, checking the gold
/// parent against the top `top_k` candidates.
pub fn retrieval_gate(spec: &CorpusSpec, top_k: usize) -> Result<RetrievalGateOutcome, EngineError> {
    let started = Instant::now();
    let corpus = corpus::synthesize(spec)?;
    let outcome = retrieval_gate_over(&corpus, top_k, started)?;
    Ok(outcome)
}

fn retrieval_gate_over(
    corpus: &SyntheticCorpus,
    top_k: usize,
    started: Instant,
) -> Result<RetrievalGateOutcome, EngineError> {
    let embedder = std::sync::Arc::new(HashingEmbedder::new(corpus.spec.dim));
    let mut store = KnowledgeStore::in_memory(embedder.clone());
    let labels = corpus::ingest(corpus, &mut store, 1_000_000)?;
    let snap = store.snapshot();

    let cfg = EngineConfig {
        embed_dim: corpus.spec.dim,
        ..EngineConfig::default()
    };
    let mut vector_only = cfg.clone();
    vector_only.toggles.enable_bm25 = false;

    let ctx = QueryContext {
        session_id: String::new(),
        user_id: EVAL_USER_ID.to_string(),
        character_id: EVAL_CHARACTER_ID.to_string(),
    };

    let mut cases = Vec::with_capacity(corpus.cases.len());
    for case in &corpus.cases {
        let q = augment_query(&case.question, EVAL_USER_ID, EVAL_CHARACTER_ID)?;
        let gold_parent = labels[&case.gold_label].as_str();
        let hit = |cands: &[chronomem::ScoredCandidate]| {
            cands.iter().any(|c| c.delivered_id() == gold_parent)
        };
        let hybrid = retrieve_knowledge(&snap, embedder.as_ref(), &q, &ctx, top_k, &cfg)?;
        let vector = retrieve_knowledge(&snap, embedder.as_ref(), &q, &ctx, top_k, &vector_only)?;
        cases.push(GateCase {
            index: case.index,
            domain: case.domain,
            hybrid_hit: hit(&hybrid),
            vector_only_hit: hit(&vector),
        });
    }
    Ok(RetrievalGateOutcome {
        total: cases.len(),
        hybrid_hits: cases.iter().filter(|c| c.hybrid_hit).count(),
        vector_only_hits: cases.iter().filter(|c| c.vector_only_hit).count(),
        cases,
        elapsed_secs: started.elapsed().as_secs_f64(),
    })
}
