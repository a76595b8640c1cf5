//! Memory stores for the two evidence sources.
//!
//! `KnowledgeStore` holds curated documents split into parent/child chunks:
//! children are embedded and lexically indexed for retrieval, parents are
//! what gets delivered. It can run purely in memory (evaluation) or backed
//! by an append-only JSONL file (durable ingestion).
//!
//! `ExperienceStore` holds per-session dialogue chunks, embedded at insert
//! time. It is rebuilt from the session's turn log on open, so it needs no
//! file of its own.
//!
//! Both stores expose cheap immutable snapshots (`Arc`-shared chunk and
//! vector tables) that retrieval reads without locking; a snapshot is
//! rebuilt lazily only after a mutation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bm25::Bm25Index;
use crate::chunk::{split_chars, MemoryChunk, SourceType};
use crate::config::ChunkingConfig;
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::EngineError;
use crate::jsonl;

/// Provenance attached to ingested content.
#[derive(Debug, Clone, Default)]
pub struct IngestMeta {
    pub session_id: String,
    pub user_id: String,
    pub character_id: String,
    pub source_label: String,
}

/// Ids created by one document ingestion.
#[derive(Debug, Clone)]
pub struct IngestReceipt {
    pub parent_ids: Vec<String>,
    pub child_ids: Vec<String>,
}

/// Immutable view of the knowledge store used by retrieval.
#[derive(Clone)]
pub struct KnowledgeSnapshot {
    pub children: Vec<Arc<MemoryChunk>>,
    pub child_vecs: Vec<Arc<EmbeddingVector>>,
    /// chunk id -> position in `children` / `child_vecs`.
    pub child_index: BTreeMap<String, usize>,
    pub parents: BTreeMap<String, Arc<MemoryChunk>>,
    pub bm25: Arc<Bm25Index>,
}

pub struct KnowledgeStore {
    embedder: Arc<dyn Embedder>,
    parents: BTreeMap<String, Arc<MemoryChunk>>,
    children: Vec<Arc<MemoryChunk>>,
    child_vecs: Vec<Arc<EmbeddingVector>>,
    next_parent: u64,
    next_child: u64,
    log_path: Option<PathBuf>,
    fsync: bool,
    cached: Option<Arc<KnowledgeSnapshot>>,
}

fn id_counter(prefix: &str, id: &str) -> Option<u64> {
    id.strip_prefix(prefix)?.parse().ok()
}

impl KnowledgeStore {
    /// A store that keeps everything in memory (evaluation corpora).
    pub fn in_memory(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            embedder,
            parents: BTreeMap::new(),
            children: Vec::new(),
            child_vecs: Vec::new(),
            next_parent: 1,
            next_child: 1,
            log_path: None,
            fsync: true,
            cached: None,
        }
    }

    /// Opens (or creates) a store backed by an append-only JSONL file.
    /// Existing chunks are loaded, children re-embedded, and id counters
    /// resume after the highest id seen.
    pub fn open(path: &Path, embedder: Arc<dyn Embedder>, fsync: bool) -> Result<Self, EngineError> {
        jsonl::recover(path)?;
        let mut store = Self::in_memory(embedder);
        store.log_path = Some(path.to_path_buf());
        store.fsync = fsync;
        if path.exists() {
            for chunk in jsonl::read_all::<MemoryChunk>(path)? {
                store.adopt(chunk)?;
            }
        }
        Ok(store)
    }

    fn adopt(&mut self, chunk: MemoryChunk) -> Result<(), EngineError> {
        match chunk.source_type {
            SourceType::KnowledgeParent => {
                if let Some(n) = id_counter("kp-", &chunk.chunk_id) {
                    self.next_parent = self.next_parent.max(n + 1);
                }
                self.parents.insert(chunk.chunk_id.clone(), Arc::new(chunk));
            }
            SourceType::KnowledgeChild => {
                if let Some(n) = id_counter("kc-", &chunk.chunk_id) {
                    self.next_child = self.next_child.max(n + 1);
                }
                let vec = self.embedder.embed(&chunk.text)?;
                self.children.push(Arc::new(chunk));
                self.child_vecs.push(Arc::new(vec));
            }
            SourceType::Experience => {
                return Err(EngineError::InvalidConfig(
                    "experience chunk in knowledge log".to_string(),
                ))
            }
        }
        self.cached = None;
        Ok(())
    }

    fn persist(&self, chunk: &MemoryChunk) -> Result<(), EngineError> {
        if let Some(path) = &self.log_path {
            let line = serde_json::to_string(chunk)?;
            jsonl::append_line(path, &line, self.fsync, None)?;
        }
        Ok(())
    }

    /// Splits a document into parent chunks and their children, embeds the
    /// children, indexes everything, and (when file-backed) appends each
    /// chunk to the store's log.
    pub fn ingest_document(
        &mut self,
        text: &str,
        meta: &IngestMeta,
        chunking: &ChunkingConfig,
        timestamp: u64,
        round: u32,
    ) -> Result<IngestReceipt, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::EmptyDocument);
        }
        let mut receipt = IngestReceipt {
            parent_ids: Vec::new(),
            child_ids: Vec::new(),
        };
        for parent_text in split_chars(text, chunking.parent_size, chunking.overlap) {
            let parent_id = format!("kp-{:06}", self.next_parent);
            self.next_parent += 1;
            let parent = MemoryChunk {
                chunk_id: parent_id.clone(),
                session_id: meta.session_id.clone(),
                source_type: SourceType::KnowledgeParent,
                user_id: meta.user_id.clone(),
                character_id: meta.character_id.clone(),
                text: parent_text.clone(),
                parent_id: None,
                timestamp,
                round,
                source_label: meta.source_label.clone(),
            };
            self.persist(&parent)?;
            self.parents.insert(parent_id.clone(), Arc::new(parent));
            receipt.parent_ids.push(parent_id.clone());

            for child_text in split_chars(&parent_text, chunking.child_size, chunking.overlap) {
                let child_id = format!("kc-{:06}", self.next_child);
                self.next_child += 1;
                let child = MemoryChunk {
                    chunk_id: child_id.clone(),
                    session_id: meta.session_id.clone(),
                    source_type: SourceType::KnowledgeChild,
                    user_id: meta.user_id.clone(),
                    character_id: meta.character_id.clone(),
                    text: child_text,
                    parent_id: Some(parent_id.clone()),
                    timestamp,
                    round,
                    source_label: meta.source_label.clone(),
                };
                let vec = self.embedder.embed(&child.text)?;
                self.persist(&child)?;
                self.children.push(Arc::new(child));
                self.child_vecs.push(Arc::new(vec));
                receipt.child_ids.push(child_id);
            }
        }
        self.cached = None;
        Ok(receipt)
    }

    pub fn child_count(&self) -> usize {
        self.children.len()
    }

    pub fn parent_count(&self) -> usize {
        self.parents.len()
    }

    /// Current immutable view; rebuilt only after a mutation.
    pub fn snapshot(&mut self) -> Arc<KnowledgeSnapshot> {
        if let Some(s) = &self.cached {
            return Arc::clone(s);
        }
        let child_index = self
            .children
            .iter()
            .enumerate()
            .map(|(i, c)| (c.chunk_id.clone(), i))
            .collect();
        let bm25 = Bm25Index::build(
            self.children
                .iter()
                .map(|c| (c.chunk_id.as_str(), c.text.as_str())),
        );
        let snap = Arc::new(KnowledgeSnapshot {
            children: self.children.clone(),
            child_vecs: self.child_vecs.clone(),
            child_index,
            parents: self.parents.clone(),
            bm25: Arc::new(bm25),
        });
        self.cached = Some(Arc::clone(&snap));
        snap
    }
}

/// Immutable view of a session's dialogue memory.
#[derive(Clone, Default)]
pub struct ExperienceSnapshot {
    pub chunks: Vec<Arc<MemoryChunk>>,
    pub vecs: Vec<Arc<EmbeddingVector>>,
}

pub struct ExperienceStore {
    embedder: Arc<dyn Embedder>,
    chunks: Vec<Arc<MemoryChunk>>,
    vecs: Vec<Arc<EmbeddingVector>>,
    next: u64,
}

impl ExperienceStore {
    pub fn new(embedder: Arc<dyn Embedder>) -> Self {
        Self {
            embedder,
            chunks: Vec::new(),
            vecs: Vec::new(),
            next: 1,
        }
    }

    /// Embeds and indexes one dialogue chunk; returns its id.
    pub fn insert_chunk(
        &mut self,
        text: &str,
        meta: &IngestMeta,
        user_id: &str,
        character_id: &str,
        timestamp: u64,
        round: u32,
    ) -> Result<String, EngineError> {
        let chunk_id = format!("ex-{:06}", self.next);
        self.next += 1;
        let chunk = MemoryChunk {
            chunk_id: chunk_id.clone(),
            session_id: meta.session_id.clone(),
            source_type: SourceType::Experience,
            user_id: user_id.to_string(),
            character_id: character_id.to_string(),
            text: text.to_string(),
            parent_id: None,
            timestamp,
            round,
            source_label: meta.source_label.clone(),
        };
        let vec = self.embedder.embed(text)?;
        self.chunks.push(Arc::new(chunk));
        self.vecs.push(Arc::new(vec));
        Ok(chunk_id)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn snapshot(&self) -> ExperienceSnapshot {
        ExperienceSnapshot {
            chunks: self.chunks.clone(),
            vecs: self.vecs.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::HashingEmbedder;

    fn embedder() -> Arc<dyn Embedder> {
        Arc::new(HashingEmbedder::new(256))
    }

    fn meta() -> IngestMeta {
        IngestMeta {
            session_id: String::new(),
            user_id: "alice".into(),
            character_id: String::new(),
            source_label: "notes".into(),
        }
    }

    #[test]
    fn ingest_splits_into_expected_parent_and_child_counts() {
        let mut store = KnowledgeStore::in_memory(embedder());
        let text = "x".repeat(2000);
        let receipt = store
            .ingest_document(&text, &meta(), &ChunkingConfig::default(), 100, 0)
            .unwrap();
        assert_eq!(receipt.parent_ids, vec!["kp-000001", "kp-000002"]);
        assert_eq!(receipt.child_ids.len(), 10);
        assert_eq!(receipt.child_ids[0], "kc-000001");
        assert_eq!(receipt.child_ids[9], "kc-000010");
        assert_eq!(store.parent_count(), 2);
        assert_eq!(store.child_count(), 10);
        let snap = store.snapshot();
        for id in &receipt.child_ids {
            let &i = snap.child_index.get(id).unwrap();
            assert_eq!(&snap.children[i].chunk_id, id);
            assert_eq!(snap.children[i].parent_id.as_deref().unwrap().len(), 9);
            assert_eq!(snap.children[i].text.chars().count(), 200);
        }
    }

    #[test]
    fn ingest_rejects_empty_documents() {
        let mut store = KnowledgeStore::in_memory(embedder());
        assert!(matches!(
            store.ingest_document("", &meta(), &ChunkingConfig::default(), 0, 0),
            Err(EngineError::EmptyDocument)
        ));
        assert!(matches!(
            store.ingest_document("   \n\t", &meta(), &ChunkingConfig::default(), 0, 0),
            Err(EngineError::EmptyDocument)
        ));
    }

    #[test]
    fn snapshot_is_cached_until_the_next_mutation() {
        let mut store = KnowledgeStore::in_memory(embedder());
        store
            .ingest_document("hello world", &meta(), &ChunkingConfig::default(), 0, 0)
            .unwrap();
        let a = store.snapshot();
        let b = store.snapshot();
        assert!(Arc::ptr_eq(&a, &b), "no mutation, same snapshot");
        store
            .ingest_document("more text", &meta(), &ChunkingConfig::default(), 0, 0)
            .unwrap();
        let c = store.snapshot();
        assert!(!Arc::ptr_eq(&a, &c), "mutation invalidates the snapshot");
        assert_eq!(c.children.len(), 2);
    }

    #[test]
    fn file_backed_store_round_trips_and_resumes_counters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knowledge.jsonl");
        {
            let mut store = KnowledgeStore::open(&path, embedder(), true).unwrap();
            store
                .ingest_document("alpha beta gamma", &meta(), &ChunkingConfig::default(), 7, 0)
                .unwrap();
            store
                .ingest_document("delta epsilon", &meta(), &ChunkingConfig::default(), 8, 0)
                .unwrap();
        }
        let mut reopened = KnowledgeStore::open(&path, embedder(), true).unwrap();
        assert_eq!(reopened.parent_count(), 2);
        assert_eq!(reopened.child_count(), 2);
        let receipt = reopened
            .ingest_document("zeta", &meta(), &ChunkingConfig::default(), 9, 0)
            .unwrap();
        assert_eq!(receipt.parent_ids, vec!["kp-000003"]);
        assert_eq!(receipt.child_ids, vec!["kc-000003"]);
        let snap = reopened.snapshot();
        assert_eq!(snap.parents["kp-000001"].text, "alpha beta gamma");
        assert_eq!(snap.parents["kp-000001"].timestamp, 7);
        // Children were re-embedded on load.
        assert_eq!(snap.child_vecs.len(), 3);
        assert!(snap.child_vecs[0].iter().any(|&x| x != 0.0));
    }

    #[test]
    fn file_backed_store_rejects_experience_chunks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("knowledge.jsonl");
        let stray = MemoryChunk {
            chunk_id: "ex-000001".into(),
            session_id: "s1".into(),
            source_type: SourceType::Experience,
            user_id: String::new(),
            character_id: String::new(),
            text: "stray".into(),
            parent_id: None,
            timestamp: 0,
            round: 1,
            source_label: "chat".into(),
        };
        let line = serde_json::to_string(&stray).unwrap();
        jsonl::append_line(&path, &line, true, None).unwrap();
        assert!(matches!(
            KnowledgeStore::open(&path, embedder(), true),
            Err(EngineError::InvalidConfig(_))
        ));
    }

    #[test]
    fn experience_store_assigns_sequential_ids_and_embeds() {
        let mut store = ExperienceStore::new(embedder());
        let m = IngestMeta {
            session_id: "s1".into(),
            source_label: "chat".into(),
            ..IngestMeta::default()
        };
        let id1 = store.insert_chunk("first message", &m, "alice", "mori", 10, 1).unwrap();
        let id2 = store.insert_chunk("second message", &m, "alice", "mori", 20, 1).unwrap();
        assert_eq!(id1, "ex-000001");
        assert_eq!(id2, "ex-000002");
        assert_eq!(store.len(), 2);
        let snap = store.snapshot();
        assert_eq!(snap.chunks[0].session_id, "s1");
        assert_eq!(snap.chunks[0].round, 1);
        assert_eq!(snap.vecs.len(), 2);
        let norm: f64 = snap.vecs[0].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }
}
