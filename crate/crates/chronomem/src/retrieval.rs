//! Hybrid retrieval: role-augmented queries, a fused vector+lexical
//! knowledge route, and a gated semantic experience route.
//!
//! Knowledge route: rank all indexed children by raw inner product and by
//! BM25, fuse the two ranked lists with reciprocal-rank fusion, min-max
//! normalize over the fused pool, add role/provenance bonuses, then resolve
//! child hits to their parent chunks (dedup keeps the best child). The
//! experience route ranks chunks by clipped cosine, drops anything under the
//! similarity threshold, and adds session/role bonuses. Both routes return
//! top-k by base score; temporal reranking happens afterwards.
//!
//! Ties anywhere break by ascending chunk id, so a fixed corpus, embedder,
//! and query always produce byte-identical candidate lists.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chunk::MemoryChunk;
use crate::config::EngineConfig;
use crate::embed::{cosine, dot, Embedder};
use crate::error::EngineError;
use crate::store::{ExperienceSnapshot, KnowledgeSnapshot};
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Knowledge,
    Experience,
}

impl Route {
    pub fn as_str(&self) -> &'static str {
        match self {
            Route::Knowledge => "knowledge",
            Route::Experience => "experience",
        }
    }
}

/// One retrieval hit with its full score breakdown, as logged and as entered
/// into the prompt.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScoredCandidate {
    /// The matched chunk (a knowledge child, or an experience chunk).
    pub chunk_id: String,
    /// Resolved parent for knowledge hits; experience chunks have none.
    pub parent_id: Option<String>,
    pub route: Route,
    /// Raw inner product with the query embedding (for normalized embedders
    /// this equals the cosine).
    pub s_vec: f64,
    /// Lexical score; `None` on routes/configurations that never computed it.
    pub s_bm25: Option<f64>,
    /// Fused reciprocal-rank score; `None` on the experience route.
    pub s_rrf: Option<f64>,
    /// Normalized + bonused score before temporal weighting.
    pub base_score: f64,
    /// Dual-clock decay applied to this candidate (1.0 when disabled).
    pub temporal_weight: f64,
    /// `base_score * temporal_weight`.
    pub final_score: f64,
    /// Text delivered to the prompt (parent text for knowledge hits).
    pub text: String,
    pub timestamp: u64,
    pub round: u32,
    pub source_label: String,
}

impl ScoredCandidate {
    /// Id of the unit actually delivered to the prompt (parent for
    /// knowledge hits, the chunk itself otherwise).
    pub fn delivered_id(&self) -> &str {
        self.parent_id.as_deref().unwrap_or(&self.chunk_id)
    }
}

/// Who is asking: used for role bonuses and session affinity.
#[derive(Debug, Clone, Default)]
pub struct QueryContext {
    pub session_id: String,
    pub user_id: String,
    pub character_id: String,
}

/// Sorts by descending final score, ties by ascending chunk id.
pub fn sort_by_final(cands: &mut [ScoredCandidate]) {
    cands.sort_by(|a, b| {
        b.final_score
            .partial_cmp(&a.final_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
}

fn sort_by_base(cands: &mut [ScoredCandidate]) {
    cands.sort_by(|a, b| {
        b.base_score
            .partial_cmp(&a.base_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.chunk_id.cmp(&b.chunk_id))
    });
}

/// Prepends the role prefix: `[User u][Assistant a] q`. Refuses to augment a
/// query that already starts with the prefix shape, so the operation can
/// never stack.
pub fn augment_query(query: &str, user_id: &str, assistant_id: &str) -> Result<String, EngineError> {
    if is_augmented(query) {
        return Err(EngineError::AlreadyAugmented(query.to_string()));
    }
    Ok(format!("[User {user_id}][Assistant {assistant_id}] {query}"))
}

/// True when the text already starts with a role prefix.
pub fn is_augmented(query: &str) -> bool {
    query.starts_with("[User ") && query.contains("][Assistant ")
}

/// Raw inner product of query and document embeddings.
pub fn score_vector(query_vec: &[f64], doc_vec: &[f64]) -> Result<f64, EngineError> {
    dot(query_vec, doc_vec)
}

/// Cosine similarity clipped to `[0, 1]`; zero vectors score 0.
pub fn semantic_score(query_vec: &[f64], doc_vec: &[f64]) -> Result<f64, EngineError> {
    Ok(cosine(query_vec, doc_vec)?.clamp(0.0, 1.0))
}

/// Reciprocal-rank fusion over one or more duplicate-free ranked lists:
/// an id at 0-based `rank` in a list contributes `1 / (k_rrf + rank + 1)`,
/// summed over the lists that contain it.
pub fn fuse_rrf(ranked_lists: &[Vec<String>], k_rrf: f64) -> Result<BTreeMap<String, f64>, EngineError> {
    if ranked_lists.is_empty() {
        return Err(EngineError::NoRankedLists);
    }
    let mut fused: BTreeMap<String, f64> = BTreeMap::new();
    for (list_idx, list) in ranked_lists.iter().enumerate() {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for (rank, id) in list.iter().enumerate() {
            if !seen.insert(id) {
                return Err(EngineError::DuplicateInRankedList(id.clone(), list_idx));
            }
            *fused.entry(id.clone()).or_insert(0.0) += 1.0 / (k_rrf + rank as f64 + 1.0);
        }
    }
    Ok(fused)
}

/// Min-max normalization over the candidate pool. Singleton or all-equal
/// pools map to 1.0 (a sole candidate is a full-strength match, and
/// normalizing it to 0 would erase the route).
pub fn min_max_normalize(scores: &BTreeMap<String, f64>) -> BTreeMap<String, f64> {
    if scores.is_empty() {
        return BTreeMap::new();
    }
    let min = scores.values().cloned().fold(f64::INFINITY, f64::min);
    let max = scores.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    scores
        .iter()
        .map(|(id, &s)| {
            let n = if max == min { 1.0 } else { (s - min) / (max - min) };
            (id.clone(), n)
        })
        .collect()
}

fn id_match(chunk_field: &str, ctx_field: &str) -> bool {
    !chunk_field.is_empty() && chunk_field == ctx_field
}

/// Knowledge-route base score: normalized fused score plus user/character
/// role bonuses plus the trusted-source bonus, each applied when it matches.
pub fn knowledge_base_score(
    normalized: f64,
    chunk: &MemoryChunk,
    ctx: &QueryContext,
    cfg: &EngineConfig,
) -> f64 {
    let mut s = normalized;
    if id_match(&chunk.user_id, &ctx.user_id) {
        s += cfg.bonus.user;
    }
    if id_match(&chunk.character_id, &ctx.character_id) {
        s += cfg.bonus.character;
    }
    if !chunk.source_label.is_empty() && cfg.trusted_sources.iter().any(|t| t == &chunk.source_label) {
        s += cfg.bonus.source;
    }
    s
}

/// Experience-route base score: clipped cosine plus session/user/character
/// bonuses.
pub fn chat_base_score(s_sem: f64, chunk: &MemoryChunk, ctx: &QueryContext, cfg: &EngineConfig) -> f64 {
    let mut s = s_sem;
    if id_match(&chunk.session_id, &ctx.session_id) {
        s += cfg.bonus.session;
    }
    if id_match(&chunk.user_id, &ctx.user_id) {
        s += cfg.bonus.user;
    }
    if id_match(&chunk.character_id, &ctx.character_id) {
        s += cfg.bonus.character;
    }
    s
}

/// Hybrid knowledge retrieval. Returns up to `k` parent-resolved candidates
/// ranked by base score (temporal weighting not yet applied).
pub fn retrieve_knowledge(
    snap: &KnowledgeSnapshot,
    embedder: &dyn Embedder,
    augmented_query: &str,
    ctx: &QueryContext,
    k: usize,
    cfg: &EngineConfig,
) -> Result<Vec<ScoredCandidate>, EngineError> {
    if cfg.toggles.pure_dialogue || k == 0 || snap.children.is_empty() {
        return Ok(Vec::new());
    }
    let qvec = embedder.embed(augmented_query)?;

    // Vector leg: exhaustive scan, ranked, truncated to the fusion depth.
    let mut dots = Vec::with_capacity(snap.children.len());
    for vec in &snap.child_vecs {
        dots.push(score_vector(&qvec, vec)?);
    }
    let mut order: Vec<usize> = (0..snap.children.len()).collect();
    order.sort_by(|&a, &b| {
        dots[b]
            .partial_cmp(&dots[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| snap.children[a].chunk_id.cmp(&snap.children[b].chunk_id))
    });
    order.truncate(cfg.fusion.leg_depth);
    let vector_list: Vec<String> = order.iter().map(|&i| snap.children[i].chunk_id.clone()).collect();

    // Lexical leg (optional): only documents sharing a query term rank.
    let mut lists = vec![vector_list];
    let mut bm25_scores: BTreeMap<String, f64> = BTreeMap::new();
    if cfg.toggles.enable_bm25 {
        let qtokens = tokenize(augmented_query);
        let mut scored = snap.bm25.score_matching(&qtokens, &cfg.bm25);
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        bm25_scores = scored.iter().cloned().collect();
        scored.truncate(cfg.fusion.leg_depth);
        lists.push(scored.into_iter().map(|(id, _)| id).collect());
    }

    let fused = fuse_rrf(&lists, cfg.fusion.k_rrf)?;
    let normalized = min_max_normalize(&fused);

    let mut candidates = Vec::with_capacity(fused.len());
    for (id, &norm) in &normalized {
        let &idx = snap
            .child_index
            .get(id)
            .ok_or_else(|| EngineError::NotIndexed(id.clone()))?;
        let chunk = &snap.children[idx];
        let base = knowledge_base_score(norm, chunk, ctx, cfg);
        let (parent_id, text) = match chunk.parent_id.as_deref().and_then(|p| snap.parents.get(p)) {
            Some(parent) => (Some(parent.chunk_id.clone()), parent.text.clone()),
            None => (None, chunk.text.clone()),
        };
        candidates.push(ScoredCandidate {
            chunk_id: chunk.chunk_id.clone(),
            parent_id,
            route: Route::Knowledge,
            s_vec: dots[idx],
            s_bm25: cfg
                .toggles
                .enable_bm25
                .then(|| bm25_scores.get(id).copied().unwrap_or(0.0)),
            s_rrf: Some(fused[id]),
            base_score: base,
            temporal_weight: 1.0,
            final_score: base,
            text,
            timestamp: chunk.timestamp,
            round: chunk.round,
            source_label: chunk.source_label.clone(),
        });
    }

    // Resolve child hits to parents: best child represents each parent.
    sort_by_base(&mut candidates);
    let mut seen_parents: BTreeSet<String> = BTreeSet::new();
    candidates.retain(|c| seen_parents.insert(c.delivered_id().to_string()));
    candidates.truncate(k);
    Ok(candidates)
}

/// Gated semantic retrieval over experience chunks. Returns up to `k`
/// candidates ranked by base score (temporal weighting not yet applied).
pub fn retrieve_experience(
    snap: &ExperienceSnapshot,
    embedder: &dyn Embedder,
    augmented_query: &str,
    ctx: &QueryContext,
    k: usize,
    cfg: &EngineConfig,
) -> Result<Vec<ScoredCandidate>, EngineError> {
    if cfg.toggles.pure_dialogue || !cfg.toggles.enable_chat_retrieval || k == 0 {
        return Ok(Vec::new());
    }
    let qvec = embedder.embed(augmented_query)?;
    let mut candidates = Vec::new();
    for (chunk, vec) in snap.chunks.iter().zip(&snap.vecs) {
        let raw = score_vector(&qvec, vec)?;
        let s_sem = semantic_score(&qvec, vec)?;
        if s_sem < cfg.similarity_threshold {
            continue;
        }
        let base = chat_base_score(s_sem, chunk, ctx, cfg);
        candidates.push(ScoredCandidate {
            chunk_id: chunk.chunk_id.clone(),
            parent_id: None,
            route: Route::Experience,
            s_vec: raw,
            s_bm25: None,
            s_rrf: None,
            base_score: base,
            temporal_weight: 1.0,
            final_score: base,
            text: chunk.text.clone(),
            timestamp: chunk.timestamp,
            round: chunk.round,
            source_label: chunk.source_label.clone(),
        });
    }
    sort_by_base(&mut candidates);
    candidates.truncate(k);
    Ok(candidates)
}

/// Shared helper for `Arc<dyn Embedder>` call sites.
pub fn embed_query(embedder: &Arc<dyn Embedder>, text: &str) -> Result<Vec<f64>, EngineError> {
    embedder.embed(text)
}
