//! Lexical scoring over an immutable inverted-index snapshot.
//!
//! The scheme is BM25 with a clamped, shifted idf:
//!
//! ```text
//! idf(t)      = max(0, ln((N - df + 0.5) / (df + 0.5))) + delta
//! score(q, d) = sum over query tokens t of
//!               idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//! ```
//!
//! The clamp keeps very common terms from going negative; the `delta` shift
//! keeps every matched term worth something. A term absent from a document
//! contributes zero. The sum iterates query token *occurrences* (multiset
//! semantics), in query order, so independent re-implementations accumulate
//! floating point identically.

use std::collections::BTreeMap;

use crate::config::Bm25Config;
use crate::error::EngineError;
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Default)]
pub struct Bm25Index {
    /// term -> postings sorted by document ordinal.
    postings: BTreeMap<String, Vec<(u32, u32)>>,
    doc_ids: Vec<String>,
    doc_ordinals: BTreeMap<String, u32>,
    doc_len: Vec<u32>,
    avgdl: f64,
}

impl Bm25Index {
    /// Builds a snapshot over `(id, text)` documents. Ordinal order follows
    /// the input order and ids must be unique (enforced by the stores).
    pub fn build<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut index = Bm25Index::default();
        let mut total_len: u64 = 0;
        for (id, text) in docs {
            let ordinal = index.doc_ids.len() as u32;
            index.doc_ids.push(id.to_string());
            index.doc_ordinals.insert(id.to_string(), ordinal);
            let tokens = tokenize(text);
            total_len += tokens.len() as u64;
            index.doc_len.push(tokens.len() as u32);
            let mut counts: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                index.postings.entry(term).or_default().push((ordinal, tf));
            }
        }
        if !index.doc_ids.is_empty() {
            index.avgdl = total_len as f64 / index.doc_ids.len() as f64;
        }
        index
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    /// Clamped, shifted inverse document frequency. Uncollected terms have
    /// df = 0, which is well defined (and moot: no document matches them).
    pub fn idf(&self, term: &str, params: &Bm25Config) -> f64 {
        let n = self.doc_ids.len() as f64;
        let df = self.postings.get(term).map_or(0.0, |p| p.len() as f64);
        let raw = ((n - df + 0.5) / (df + 0.5)).ln();
        raw.max(0.0) + params.delta
    }

    fn term_contribution(&self, idf: f64, tf: u32, doc_len: u32, params: &Bm25Config) -> f64 {
        let tf = tf as f64;
        let norm = 1.0 - params.b + params.b * doc_len as f64 / self.avgdl;
        idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * norm)
    }

    /// Scores one document against pre-tokenized query terms.
    pub fn score_doc(
        &self,
        query_tokens: &[String],
        chunk_id: &str,
        params: &Bm25Config,
    ) -> Result<f64, EngineError> {
        let ordinal = *self
            .doc_ordinals
            .get(chunk_id)
            .ok_or_else(|| EngineError::NotIndexed(chunk_id.to_string()))?;
        let mut score = 0.0;
        for t in query_tokens {
            let Some(postings) = self.postings.get(t) else {
                continue;
            };
            let Ok(pos) = postings.binary_search_by_key(&ordinal, |&(o, _)| o) else {
                continue;
            };
            let idf = self.idf(t, params);
            score += self.term_contribution(idf, postings[pos].1, self.doc_len[ordinal as usize], params);
        }
        Ok(score)
    }

    /// Scores every document sharing at least one query term. Accumulation
    /// happens term-by-term in query order, so results are bit-identical to
    /// calling [`Self::score_doc`] per document. Output is ordered by
    /// document ordinal; callers rank it.
    pub fn score_matching(&self, query_tokens: &[String], params: &Bm25Config) -> Vec<(String, f64)> {
        let mut acc: BTreeMap<u32, f64> = BTreeMap::new();
        for t in query_tokens {
            let Some(postings) = self.postings.get(t) else {
                continue;
            };
            let idf = self.idf(t, params);
            for &(ordinal, tf) in postings {
                *acc.entry(ordinal).or_insert(0.0) +=
                    self.term_contribution(idf, tf, self.doc_len[ordinal as usize], params);
            }
        }
        acc.into_iter()
            .map(|(ordinal, s)| (self.doc_ids[ordinal as usize].clone(), s))
            .collect()
    }
}

/// Convenience wrapper for scoring raw query text against one document.
pub fn score_bm25(index: &Bm25Index, query: &str, chunk_id: &str, params: &Bm25Config) -> Result<f64, EngineError> {
    index.score_doc(&tokenize(query), chunk_id, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Bm25Config {
        Bm25Config::default() // k1 = 1.2, b = 0.75, delta = 0.5
    }

    #[test]
    fn ubiquitous_term_scores_exactly_delta() {
        // Both documents contain the term once and have |d| = avgdl, so the
        // saturation ratio is exactly 1 and idf clamps to 0 before the shift:
        // score = (0 + 0.5) * 1 = 0.5.
        let index = Bm25Index::build([("d1", "alpha beta"), ("d2", "alpha gamma")]);
        let s = index.score_doc(&tokenize("alpha"), "d1", &params()).unwrap();
        assert!((s - 0.5).abs() < 1e-9, "score was {s}");
    }

    #[test]
    fn absent_term_contributes_zero() {
        let index = Bm25Index::build([("d1", "alpha beta"), ("d2", "alpha gamma")]);
        let s = index.score_doc(&tokenize("zulu"), "d1", &params()).unwrap();
        assert_eq!(s, 0.0);
        // And an absent term added to a present one changes nothing.
        let with = index.score_doc(&tokenize("alpha zulu"), "d1", &params()).unwrap();
        let without = index.score_doc(&tokenize("alpha"), "d1", &params()).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn idf_is_clamped_and_shifted() {
        let index = Bm25Index::build([("d1", "alpha"), ("d2", "alpha"), ("d3", "alpha")]);
        // df = N: raw idf = ln(0.5 / 3.5) < 0, clamped to 0, shifted by delta.
        assert!((index.idf("alpha", &params()) - 0.5).abs() < 1e-12);
        // df = 0 (never indexed): raw idf = ln(3.5 / 0.5) = ln 7.
        let expect = (3.5_f64 / 0.5).ln() + 0.5;
        assert!((index.idf("missing", &params()) - expect).abs() < 1e-12);
    }

    #[test]
    fn rare_term_dominates_common_terms() {
        let docs: Vec<(String, String)> = (0..50)
            .map(|i| {
                let text = if i == 17 {
                    "common filler words kephrax17 here".to_string()
                } else {
                    "common filler words padding here".to_string()
                };
                (format!("d{i:03}"), text)
            })
            .collect();
        let index = Bm25Index::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        let q = tokenize("common kephrax17");
        let mut ranked = index.score_matching(&q, &params());
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        assert_eq!(ranked[0].0, "d017");
        assert!(ranked[0].1 > 2.0 * ranked[1].1);
    }

    #[test]
    fn unindexed_doc_is_an_error() {
        let index = Bm25Index::build([("d1", "alpha")]);
        assert!(matches!(
            index.score_doc(&tokenize("alpha"), "ghost", &params()),
            Err(EngineError::NotIndexed(_))
        ));
    }

    #[test]
    fn bulk_scoring_matches_per_doc_scoring_bitwise() {
        let docs = [
            ("a", "red green blue red"),
            ("b", "green green yellow"),
            ("c", "blue ochre red green teal"),
            ("d", "nothing shared here"),
        ];
        let index = Bm25Index::build(docs);
        let q = tokenize("red green blue");
        let bulk: BTreeMap<String, f64> = index.score_matching(&q, &params()).into_iter().collect();
        for (id, _) in &docs[..3] {
            let single = index.score_doc(&q, id, &params()).unwrap();
            assert_eq!(bulk[*id], single, "doc {id}");
        }
        assert!(!bulk.contains_key("d"), "no shared term, no entry");
    }

    #[test]
    fn monotone_in_tf() {
        let index = Bm25Index::build([("once", "topic filler filler"), ("twice", "topic topic filler")]);
        let q = tokenize("topic");
        let s1 = index.score_doc(&q, "once", &params()).unwrap();
        let s2 = index.score_doc(&q, "twice", &params()).unwrap();
        assert!(s2 > s1);
    }

    #[test]
    fn empty_index_scores_nothing() {
        let index = Bm25Index::build(std::iter::empty::<(&str, &str)>());
        assert!(index.is_empty());
        assert!(index.score_matching(&tokenize("anything"), &params()).is_empty());
    }
}
