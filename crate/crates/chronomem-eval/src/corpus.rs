//! Synthetic high-noise corpora with verifiable retrieval geometry.
//!
//! Each corpus holds `gold_count` single-fact documents and
//! `noise_per_gold × gold_count` distractors. Gold facts split into two
//! domains: *marker* facts additionally get hand-mined adversarial decoys —
//! documents that share **no** words with the query but whose tokens are
//! mined to collide with the query tokens' embedding buckets. Decoys score
//! higher than the gold document on the embedding leg while staying
//! invisible to the lexical leg, so embedding-only retrieval provably
//! misses marker golds while hybrid fusion recovers them. *Ledger* facts
//! get no decoys and are easy for both.
//!
//! Plain noise is doubly inert by construction: its vocabulary is mined to
//! share neither words nor embedding buckets with any query, and
//! [`verify`] re-checks both properties over the whole corpus.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use chronomem::embed::HashingEmbedder;
use chronomem::store::{IngestMeta, KnowledgeStore};
use chronomem::tokenize::tokenize;
use chronomem::EngineError;

/// User id used by evaluation sessions (one token, by design).
pub const EVAL_USER_ID: &str = "evaluser";
/// Assistant/character id used by evaluation sessions.
pub const EVAL_CHARACTER_ID: &str = "archivist";

const MARKER_WORDS: [&str; 3] = ["marker", "access", "code"];
const LEDGER_WORDS: [&str; 3] = ["ledger", "entry", "label"];
const ROLE_WORDS: [&str; 4] = ["user", EVAL_USER_ID, "assistant", EVAL_CHARACTER_ID];

const RARE_STEMS: [&str; 25] = [
    "kephrax", "voltrine", "maribeck", "ossidran", "quelforn", "tarvalis", "umbrexin", "veldrossa",
    "wintrogal", "xanodrel", "yorbellin", "zephrakud", "ambrandel", "boskerith", "cindravol",
    "dorvexian", "elphandor", "fimbrosec", "galvutrin", "hexolbran", "ivrandole", "jasperquil",
    "krontaves", "lumbrexis", "morvandic",
];

const ANSWER_STEMS: [&str; 5] = ["opalvault", "umberfelt", "cobaltrow", "sablekey", "ochrebin"];

const NOISE_STEMS: [&str; 16] = [
    "velorn", "tashmi", "oridune", "quenal", "sovet", "bramil", "feldane", "gorsith", "halvet",
    "ismeret", "jolvane", "kresnib", "lumetra", "norvath", "peldrin", "rosvane",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// Adversarially decoyed facts: embedding-only retrieval misses them.
    Marker,
    /// Clean facts: every configuration retrieves them.
    Ledger,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub label: String,
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryCase {
    /// 1-based query number.
    pub index: usize,
    pub question: String,
    pub gold_answer: String,
    /// Label of the document that answers the question.
    pub gold_label: String,
    pub domain: Domain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub gold_count: usize,
    pub noise_per_gold: usize,
    /// Adversarial decoys per marker-domain gold (they count toward the
    /// noise budget).
    pub decoys_per_gold: usize,
    pub seed: u64,
    /// Embedding dimension the decoys are mined against; must match the
    /// engine's embedder.
    pub dim: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            gold_count: 50,
            noise_per_gold: 200,
            decoys_per_gold: 4,
            seed: 7,
            dim: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    /// Gold documents first, then decoys, then plain noise — gold chunks
    /// therefore take the smallest ids and win score ties.
    pub docs: Vec<CorpusDoc>,
    pub cases: Vec<QueryCase>,
}

/// Token slot in the hashing embedder: (bucket index, sign is positive).
fn slot(embedder: &HashingEmbedder, token: &str) -> (usize, bool) {
    let (idx, sign) = embedder.bucket_of(token);
    (idx, sign > 0.0)
}

/// Mines coined tokens against the hashing embedder: either *avoiding* a
/// growing forbidden bucket set (so every coined word is exactly orthogonal
/// to every other, whatever its sign), or *colliding* with one specific
/// reserved word's slot (so a document can score against a query without
/// sharing a single word with it).
pub struct TokenMiner {
    embedder: HashingEmbedder,
    forbidden_buckets: BTreeSet<usize>,
    used_tokens: BTreeSet<String>,
}

impl TokenMiner {
    /// Seeds the forbidden set with the given reserved words, failing if any
    /// two of them already share a bucket (the caller's geometry would be
    /// unsound).
    pub fn new(dim: usize, reserved: &[&str]) -> Result<Self, EngineError> {
        let embedder = HashingEmbedder::new(dim);
        let mut miner = Self {
            embedder,
            forbidden_buckets: BTreeSet::new(),
            used_tokens: BTreeSet::new(),
        };
        for word in reserved {
            let (bucket, _) = slot(&miner.embedder, word);
            if !miner.forbidden_buckets.insert(bucket) {
                return Err(EngineError::InvalidConfig(format!(
                    "reserved words collide in {dim} buckets ({word:?}); adjust the vocabulary"
                )));
            }
            miner.used_tokens.insert(word.to_string());
        }
        Ok(miner)
    }

    /// First `{prefix}` or `{prefix}x{n}` token landing outside every
    /// forbidden bucket — sign-agnostic, since an opposite-sign token in the
    /// same bucket would still produce a nonzero dot product. The winner's
    /// bucket becomes forbidden too.
    pub fn coin(&mut self, prefix: &str) -> String {
        let mut n = 0_u64;
        loop {
            let tok = if n == 0 { prefix.to_string() } else { format!("{prefix}x{n}") };
            let (bucket, _) = slot(&self.embedder, &tok);
            if !self.forbidden_buckets.contains(&bucket) && !self.used_tokens.contains(&tok) {
                self.forbidden_buckets.insert(bucket);
                self.used_tokens.insert(tok.clone());
                return tok;
            }
            n += 1;
        }
    }

    /// First unused `{prefix}{n}` token whose slot equals `with`'s slot.
    pub fn collide(&mut self, prefix: &str, with: &str) -> String {
        let target = slot(&self.embedder, with);
        let mut n = 0_u64;
        loop {
            let tok = format!("{prefix}{n}");
            if slot(&self.embedder, &tok) == target && !self.used_tokens.contains(&tok) {
                self.used_tokens.insert(tok.clone());
                return tok;
            }
            n += 1;
        }
    }
}

/// Builds a corpus from a [`CorpusSpec`]. Deterministic in (seed, spec).
pub fn synthesize(spec: &CorpusSpec) -> Result<SyntheticCorpus, EngineError> {
    if spec.gold_count == 0 {
        return Err(EngineError::EmptyInput("gold_count"));
    }
    let reserved: Vec<&str> = MARKER_WORDS
        .iter()
        .chain(&LEDGER_WORDS)
        .chain(&ROLE_WORDS)
        .copied()
        .collect();
    let mut miner = TokenMiner::new(spec.dim, &reserved)?;
    let marker_count = spec.gold_count.div_ceil(2);

    // Coin rare ids and answers on non-colliding slots.
    let rares: Vec<String> = (0..spec.gold_count)
        .map(|i| miner.coin(&format!("{}{:02}", RARE_STEMS[i % RARE_STEMS.len()], i)))
        .collect();
    let answers: Vec<String> = (0..spec.gold_count)
        .map(|i| miner.coin(&format!("{}{:02}", ANSWER_STEMS[i % ANSWER_STEMS.len()], i)))
        .collect();
    let noise_vocab: Vec<String> = (0..64)
        .map(|i| miner.coin(&format!("{}{}", NOISE_STEMS[i % NOISE_STEMS.len()], i / NOISE_STEMS.len())))
        .collect();

    let mut docs = Vec::new();
    let mut cases = Vec::new();
    for i in 0..spec.gold_count {
        let (domain, text, question) = if i < marker_count {
            (
                Domain::Marker,
                format!("marker {} access code {}", rares[i], answers[i]),
                format!("marker {} access code", rares[i]),
            )
        } else {
            (
                Domain::Ledger,
                format!("ledger {} entry label {}", rares[i], answers[i]),
                format!("ledger {} entry label", rares[i]),
            )
        };
        docs.push(CorpusDoc {
            label: format!("gold-{:03}", i + 1),
            text,
        });
        cases.push(QueryCase {
            index: i + 1,
            question,
            gold_answer: answers[i].clone(),
            gold_label: format!("gold-{:03}", i + 1),
            domain,
        });
    }

    // Adversarial decoys: four mined tokens per decoy, one colliding with
    // each content-token slot of its query (three shared domain words plus
    // the rare id). A 4-token decoy scores 4/√(8·4) ≈ 0.707 against the
    // 8-token augmented query, strictly above the 5-token gold's
    // 4/√(8·5) ≈ 0.632, while sharing no words with anything.
    let mut decoy_total = 0_usize;
    for (i, rare) in rares.iter().enumerate().take(marker_count) {
        for j in 0..spec.decoys_per_gold {
            let mut toks: Vec<String> = Vec::with_capacity(MARKER_WORDS.len() + 1);
            for (w, word) in MARKER_WORDS.iter().enumerate() {
                toks.push(miner.collide(&format!("q{i}d{j}w{w}n"), word));
            }
            toks.push(miner.collide(&format!("q{i}d{j}rn"), rare));
            docs.push(CorpusDoc {
                label: format!("decoy-{:03}-{}", i + 1, j),
                text: toks.join(" "),
            });
            decoy_total += 1;
        }
    }

    // Plain noise fills the remaining budget from the inert vocabulary.
    let noise_budget = spec.gold_count * spec.noise_per_gold;
    if decoy_total > noise_budget {
        return Err(EngineError::InvalidConfig(format!(
            "decoys ({decoy_total}) exceed the noise budget ({noise_budget})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for k in 0..(noise_budget - decoy_total) {
        let len = rng.random_range(8..=12);
        let words: Vec<&str> = (0..len)
            .map(|_| noise_vocab[rng.random_range(0..noise_vocab.len())].as_str())
            .collect();
        docs.push(CorpusDoc {
            label: format!("noise-{k:05}"),
            text: words.join(" "),
        });
    }

    let corpus = SyntheticCorpus {
        spec: spec.clone(),
        docs,
        cases,
    };
    verify(&corpus)?;
    Ok(corpus)
}

/// Independent purity re-check over the finished corpus:
/// - no noise or decoy document shares a word with any query (or with the
///   role prefix),
/// - no plain-noise token lands in any query token's embedding *bucket*
///   (sign-agnostic: an opposite-sign collision would still leak signal).
pub fn verify(corpus: &SyntheticCorpus) -> Result<(), EngineError> {
    let embedder = HashingEmbedder::new(corpus.spec.dim);
    let mut query_tokens: BTreeSet<String> = ROLE_WORDS.iter().map(|s| s.to_string()).collect();
    for case in &corpus.cases {
        query_tokens.extend(tokenize(&case.question));
    }
    let query_buckets: BTreeSet<usize> =
        query_tokens.iter().map(|t| slot(&embedder, t).0).collect();

    for doc in &corpus.docs {
        if doc.label.starts_with("gold-") {
            continue;
        }
        for tok in tokenize(&doc.text) {
            if query_tokens.contains(&tok) {
                return Err(EngineError::InvalidConfig(format!(
                    "distractor {} shares query word {tok:?}",
                    doc.label
                )));
            }
            if doc.label.starts_with("noise-") && query_buckets.contains(&slot(&embedder, &tok).0) {
                return Err(EngineError::InvalidConfig(format!(
                    "noise {} token {tok:?} collides with a query bucket",
                    doc.label
                )));
            }
        }
    }
    Ok(())
}

/// Ingests every document (gold first) into a knowledge store and returns
/// the label → delivered parent id mapping.
pub fn ingest(
    corpus: &SyntheticCorpus,
    store: &mut KnowledgeStore,
    timestamp: u64,
) -> Result<BTreeMap<String, String>, EngineError> {
    let chunking = chronomem::config::ChunkingConfig::default();
    let mut map = BTreeMap::new();
    for doc in &corpus.docs {
        let meta = IngestMeta {
            source_label: doc.label.clone(),
            ..IngestMeta::default()
        };
        let receipt = store.ingest_document(&doc.text, &meta, &chunking, timestamp, 0)?;
        map.insert(doc.label.clone(), receipt.parent_ids[0].clone());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chronomem::embed::Embedder;
    use chronomem::retrieval::augment_query;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            gold_count: 6,
            noise_per_gold: 10,
            decoys_per_gold: 4,
            seed: 11,
            dim: 256,
        }
    }

    #[test]
    fn corpus_counts_and_labels() {
        let spec = small_spec();
        let corpus = synthesize(&spec).unwrap();
        assert_eq!(corpus.cases.len(), 6);
        // 3 marker golds × 4 decoys = 12 decoys; 60 total noise budget.
        assert_eq!(corpus.docs.len(), 6 + 60);
        assert_eq!(corpus.docs.iter().filter(|d| d.label.starts_with("gold-")).count(), 6);
        assert_eq!(corpus.docs.iter().filter(|d| d.label.starts_with("decoy-")).count(), 12);
        assert_eq!(corpus.docs.iter().filter(|d| d.label.starts_with("noise-")).count(), 48);
        assert!(matches!(corpus.cases[0].domain, Domain::Marker));
        assert!(matches!(corpus.cases[5].domain, Domain::Ledger));
        // Gold docs come first so their chunk ids win ties.
        assert!(corpus.docs[0].label.starts_with("gold-"));
    }

    #[test]
    fn synthesis_is_deterministic() {
        let a = synthesize(&small_spec()).unwrap();
        let b = synthesize(&small_spec()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn decoy_geometry_brackets_the_gold_on_the_embedding_leg() {
        let corpus = synthesize(&small_spec()).unwrap();
        let embedder = HashingEmbedder::new(256);
        let case = &corpus.cases[0]; // marker domain, has decoys
        let q = augment_query(&case.question, EVAL_USER_ID, EVAL_CHARACTER_ID).unwrap();
        let qv = embedder.embed(&q).unwrap();
        let dot = |text: &str| {
            let dv = embedder.embed(text).unwrap();
            chronomem::embed::dot(&qv, &dv).unwrap()
        };
        let gold = corpus.docs.iter().find(|d| d.label == case.gold_label).unwrap();
        let gold_dot = dot(&gold.text);
        assert!((gold_dot - 4.0 / (8.0_f64.sqrt() * 5.0_f64.sqrt())).abs() < 1e-9);
        for doc in &corpus.docs {
            let d = dot(&doc.text);
            if doc.label.starts_with(&format!("decoy-{:03}", case.index)) {
                assert!(d > gold_dot + 0.05, "own decoy must outscore gold: {} {d}", doc.label);
            } else if doc.label.starts_with("decoy-") {
                assert!(d < gold_dot - 0.05, "foreign decoy must stay below gold: {} {d}", doc.label);
            } else if doc.label.starts_with("noise-") {
                assert_eq!(d, 0.0, "noise must be orthogonal: {}", doc.label);
            }
        }
    }

    #[test]
    fn ledger_golds_have_no_decoys_and_top_embedding_score() {
        let corpus = synthesize(&small_spec()).unwrap();
        let embedder = HashingEmbedder::new(256);
        let case = corpus.cases.iter().find(|c| matches!(c.domain, Domain::Ledger)).unwrap();
        let q = augment_query(&case.question, EVAL_USER_ID, EVAL_CHARACTER_ID).unwrap();
        let qv = embedder.embed(&q).unwrap();
        let gold = corpus.docs.iter().find(|d| d.label == case.gold_label).unwrap();
        let gold_dot = chronomem::embed::dot(&qv, &embedder.embed(&gold.text).unwrap()).unwrap();
        for doc in &corpus.docs {
            if doc.label == case.gold_label {
                continue;
            }
            let d = chronomem::embed::dot(&qv, &embedder.embed(&doc.text).unwrap()).unwrap();
            assert!(d < gold_dot, "{} must score below the ledger gold", doc.label);
        }
    }

    #[test]
    fn verify_rejects_planted_impurities() {
        let mut corpus = synthesize(&small_spec()).unwrap();
        corpus.docs.push(CorpusDoc {
            label: "noise-99999".into(),
            text: "marker something".into(),
        });
        assert!(verify(&corpus).is_err());
    }

    #[test]
    fn ingest_maps_labels_to_parent_ids() {
        let corpus = synthesize(&small_spec()).unwrap();
        let mut store = KnowledgeStore::in_memory(std::sync::Arc::new(HashingEmbedder::new(256)));
        let map = ingest(&corpus, &mut store, 1_000).unwrap();
        assert_eq!(map.len(), corpus.docs.len());
        assert_eq!(map["gold-001"], "kp-000001");
        assert_eq!(store.parent_count(), corpus.docs.len());
    }
}
