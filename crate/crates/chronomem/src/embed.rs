//! Embedders.
//!
//! The engine treats embeddings as opaque `Vec<f64>` produced by a pluggable
//! [`Embedder`]. Two implementations ship: a deterministic feature-hashing
//! embedder (the default for offline runs, evaluation, and tests) and a
//! generic HTTP adapter for an external embedding service.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, ModelError};
use crate::tokenize::tokenize;

pub type EmbeddingVector = Vec<f64>;

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector, EngineError>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Signed feature hashing over lexical tokens, L2-normalized.
///
/// Each token lands in bucket `hash % dim` with a sign taken from the top
/// hash bit; occurrences accumulate. Pure function of the text, so identical
/// inputs embed identically across runs and platforms.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dim: usize,
}

impl HashingEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be >= 1");
        Self { dim }
    }

    /// Bucket and sign a single token; exposed so corpus builders can mine
    /// tokens that deliberately share a bucket.
    pub fn bucket_of(&self, token: &str) -> (usize, f64) {
        let h = fnv1a64(token.as_bytes());
        let idx = (h % self.dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (idx, sign)
    }
}

impl Embedder for HashingEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EngineError> {
        let mut v = vec![0.0; self.dim];
        for tok in tokenize(text) {
            let (idx, sign) = self.bucket_of(&tok);
            v[idx] += sign;
        }
        l2_normalize(&mut v);
        Ok(v)
    }
}

/// Normalizes in place; the all-zero vector is left untouched.
pub fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

/// Raw inner product. Errors on dimension mismatch.
pub fn dot(q: &[f64], d: &[f64]) -> Result<f64, EngineError> {
    if q.len() != d.len() {
        return Err(EngineError::DimensionMismatch {
            expected: q.len(),
            got: d.len(),
        });
    }
    let mut s = 0.0;
    for i in 0..q.len() {
        s += q[i] * d[i];
    }
    Ok(s)
}

/// Cosine similarity; either vector having zero norm yields 0.0.
pub fn cosine(q: &[f64], d: &[f64]) -> Result<f64, EngineError> {
    let num = dot(q, d)?;
    let nq = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nd = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nq == 0.0 || nd == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (nq * nd))
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    vector: Vec<f64>,
}

/// Adapter for an external embedding service speaking
/// `POST {"text": ...} -> {"vector": [...]}`.
pub struct HttpEmbedder {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    dim: usize,
}

/// Environment variables the adapters read.
pub const ENV_EMBED_URL: &str = "CHRONOMEM_EMBED_URL";
pub const ENV_API_KEY: &str = "CHRONOMEM_API_KEY";

impl HttpEmbedder {
    pub fn new(url: String, api_key: Option<String>, dim: usize, timeout_secs: u64) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(std::time::Duration::from_secs(timeout_secs)))
            .build();
        Self {
            agent: config.into(),
            url,
            api_key,
            dim,
        }
    }

    /// Builds from `CHRONOMEM_EMBED_URL` / `CHRONOMEM_API_KEY`; `None` when
    /// the URL variable is unset.
    pub fn from_env(dim: usize, timeout_secs: u64) -> Option<Self> {
        let url = std::env::var(ENV_EMBED_URL).ok()?;
        let key = std::env::var(ENV_API_KEY).ok();
        Some(Self::new(url, key, dim, timeout_secs))
    }
}

impl Embedder for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EngineError> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let mut res = req
            .send_json(EmbedRequest { text })
            .map_err(|e| EngineError::Model(ModelError::Transport(e.to_string())))?;
        let parsed: EmbedResponse = res
            .body_mut()
            .read_json()
            .map_err(|e| EngineError::Model(ModelError::Malformed(e.to_string())))?;
        if parsed.vector.len() != self.dim {
            return Err(EngineError::DimensionMismatch {
                expected: self.dim,
                got: parsed.vector.len(),
            });
        }
        Ok(parsed.vector)
    }
}
