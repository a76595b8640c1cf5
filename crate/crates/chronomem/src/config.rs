//! Engine configuration.
//!
//! Every tunable the engine reads lives in [`EngineConfig`] so that a run is
//! reproducible from config + seed + clock script alone. All fields have
//! serde defaults; a config file only needs to name what it overrides.

use serde::{Deserialize, Serialize};

use crate::error::EngineError;
use crate::retrieval::Route;

/// Parent/child chunking geometry, measured in Unicode scalar values.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ChunkingConfig {
    /// Size of the chunks delivered to prompts.
    pub parent_size: usize,
    /// Size of the chunks indexed for matching.
    pub child_size: usize,
    /// Overlap between consecutive chunks at both levels (0 = none).
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            parent_size: 1000,
            child_size: 200,
            overlap: 0,
        }
    }
}

/// Lexical scoring constants (saturation, length normalization, idf shift).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Bm25Config {
    pub k1: f64,
    pub b: f64,
    pub delta: f64,
}

impl Default for Bm25Config {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            delta: 0.5,
        }
    }
}

/// Reciprocal-rank fusion constant.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct FusionConfig {
    pub k_rrf: f64,
    /// How many ranked candidates each leg (vector / lexical) contributes to
    /// the fusion pool.
    pub leg_depth: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            k_rrf: 60.0,
            leg_depth: 50,
        }
    }
}

/// Additive role/provenance bonuses applied on top of normalized base scores.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct BonusConfig {
    pub user: f64,
    pub character: f64,
    pub source: f64,
    pub session: f64,
}

impl Default for BonusConfig {
    fn default() -> Self {
        Self {
            user: 0.10,
            character: 0.10,
            source: 0.05,
            session: 0.15,
        }
    }
}

/// Decay scales for one route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalDecayParams {
    pub lambda_round: f64,
    pub lambda_hours: f64,
}

/// Optional per-route override of the shared decay scales.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default, PartialEq)]
#[serde(default)]
pub struct TemporalOverride {
    pub lambda_round: Option<f64>,
    pub lambda_hours: Option<f64>,
}

/// Dual-clock decay configuration: dialogue-round distance and wall-clock
/// hours, each with its own scale, optionally overridden per route.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TemporalConfig {
    pub lambda_round: f64,
    pub lambda_hours: f64,
    pub knowledge: TemporalOverride,
    pub experience: TemporalOverride,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        Self {
            lambda_round: 20.0,
            lambda_hours: 168.0,
            knowledge: TemporalOverride::default(),
            experience: TemporalOverride::default(),
        }
    }
}

impl TemporalConfig {
    /// Effective decay scales for a route after overrides.
    pub fn params_for(&self, route: Route) -> TemporalDecayParams {
        let ov = match route {
            Route::Knowledge => &self.knowledge,
            Route::Experience => &self.experience,
        };
        TemporalDecayParams {
            lambda_round: ov.lambda_round.unwrap_or(self.lambda_round),
            lambda_hours: ov.lambda_hours.unwrap_or(self.lambda_hours),
        }
    }
}

/// Per-route evidence quotas. Routes never compete for slots.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct QuotaConfig {
    pub knowledge_k: usize,
    pub chat_history_k: usize,
}

impl Default for QuotaConfig {
    fn default() -> Self {
        Self {
            knowledge_k: 5,
            chat_history_k: 10,
        }
    }
}

/// Feature switches used by the ablation harness. Everything on by default.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Toggles {
    /// Off: the experience route returns nothing.
    pub enable_chat_retrieval: bool,
    /// Off: the knowledge route fuses the vector leg alone.
    pub enable_bm25: bool,
    /// Off: every temporal weight is exactly 1.0.
    pub enable_temporal: bool,
    /// On: both retrieval routes are disabled; prompts carry no evidence.
    pub pure_dialogue: bool,
    /// On: prompts use the tightened output-protocol wording.
    pub strong_protocol: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Self {
            enable_chat_retrieval: true,
            enable_bm25: true,
            enable_temporal: true,
            pure_dialogue: false,
            strong_protocol: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EngineConfig {
    pub chunking: ChunkingConfig,
    pub bm25: Bm25Config,
    pub fusion: FusionConfig,
    pub bonus: BonusConfig,
    pub temporal: TemporalConfig,
    pub quotas: QuotaConfig,
    /// Experience-route gate: candidates whose clipped cosine falls below
    /// this are dropped before scoring. The knowledge route is not gated.
    pub similarity_threshold: f64,
    /// Dimension of the built-in hashing embedder.
    pub embed_dim: usize,
    pub prompt_budget_chars: usize,
    pub max_repairs: u32,
    /// How many recent turns of in-window dialogue a prompt may carry.
    pub window_turns: usize,
    pub model_timeout_secs: u64,
    /// Source labels that earn the trusted-source bonus.
    pub trusted_sources: Vec<String>,
    pub toggles: Toggles,
    /// fsync log writes (turn log, event log, knowledge file).
    pub fsync: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            chunking: ChunkingConfig::default(),
            bm25: Bm25Config::default(),
            fusion: FusionConfig::default(),
            bonus: BonusConfig::default(),
            temporal: TemporalConfig::default(),
            quotas: QuotaConfig::default(),
            similarity_threshold: 0.5,
            embed_dim: 256,
            prompt_budget_chars: 12_000,
            max_repairs: 2,
            window_turns: 4,
            model_timeout_secs: 30,
            trusted_sources: Vec::new(),
            toggles: Toggles::default(),
            fsync: true,
        }
    }
}

/// True for zero, negative, and NaN alike — anything an exponential decay
/// scale or fusion constant must not be.
fn not_positive(v: f64) -> bool {
    v.is_nan() || v <= 0.0
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let c = &self.chunking;
        if c.parent_size == 0 || c.child_size == 0 || c.child_size > c.parent_size {
            return Err(EngineError::InvalidChunkSizes {
                parent_size: c.parent_size,
                child_size: c.child_size,
                overlap: c.overlap,
            });
        }
        if c.overlap >= c.child_size {
            return Err(EngineError::InvalidChunkSizes {
                parent_size: c.parent_size,
                child_size: c.child_size,
                overlap: c.overlap,
            });
        }
        for (name, v) in [
            ("temporal.lambda_round", self.temporal.lambda_round),
            ("temporal.lambda_hours", self.temporal.lambda_hours),
        ] {
            if not_positive(v) {
                return Err(EngineError::InvalidConfig(format!("{name} must be > 0, got {v}")));
            }
        }
        for route in [Route::Knowledge, Route::Experience] {
            let p = self.temporal.params_for(route);
            if not_positive(p.lambda_round) || not_positive(p.lambda_hours) {
                return Err(EngineError::InvalidConfig(format!(
                    "temporal override for {route:?} must keep both scales > 0"
                )));
            }
        }
        if not_positive(self.fusion.k_rrf) {
            return Err(EngineError::InvalidConfig(format!(
                "fusion.k_rrf must be > 0, got {}",
                self.fusion.k_rrf
            )));
        }
        if self.fusion.leg_depth == 0 {
            return Err(EngineError::InvalidConfig("fusion.leg_depth must be >= 1".into()));
        }
        if self.embed_dim == 0 {
            return Err(EngineError::InvalidConfig("embed_dim must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return Err(EngineError::InvalidConfig(format!(
                "similarity_threshold must lie in [0, 1], got {}",
                self.similarity_threshold
            )));
        }
        if self.bm25.k1 < 0.0 || !(0.0..=1.0).contains(&self.bm25.b) || self.bm25.delta < 0.0 {
            return Err(EngineError::InvalidConfig(
                "bm25 constants out of range (k1 >= 0, 0 <= b <= 1, delta >= 0)".into(),
            ));
        }
        Ok(())
    }

    /// Loads a JSON config file; missing fields fall back to defaults.
    pub fn from_json_file(path: &std::path::Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::io(path, e))?;
        let cfg: EngineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_operating_point() {
        let cfg = EngineConfig::default();
        assert_eq!(cfg.quotas.knowledge_k, 5);
        assert_eq!(cfg.quotas.chat_history_k, 10);
        assert_eq!(cfg.similarity_threshold, 0.5);
        assert_eq!(cfg.fusion.k_rrf, 60.0);
        assert_eq!(cfg.temporal.lambda_round, 20.0);
        assert_eq!(cfg.temporal.lambda_hours, 168.0);
        assert_eq!(cfg.bm25.k1, 1.2);
        assert_eq!(cfg.bm25.b, 0.75);
        assert_eq!(cfg.bm25.delta, 0.5);
        assert_eq!(cfg.bonus.user, 0.10);
        assert_eq!(cfg.bonus.character, 0.10);
        assert_eq!(cfg.bonus.source, 0.05);
        assert_eq!(cfg.bonus.session, 0.15);
        assert_eq!(cfg.chunking.parent_size, 1000);
        assert_eq!(cfg.chunking.child_size, 200);
        assert_eq!(cfg.prompt_budget_chars, 12_000);
        assert_eq!(cfg.max_repairs, 2);
        assert_eq!(cfg.embed_dim, 256);
        cfg.validate().expect("defaults must validate");
    }

    #[test]
    fn per_route_overrides_fall_back_to_shared_scales() {
        let mut cfg = TemporalConfig::default();
        cfg.experience.lambda_round = Some(5.0);
        let k = cfg.params_for(Route::Knowledge);
        let e = cfg.params_for(Route::Experience);
        assert_eq!(k.lambda_round, 20.0);
        assert_eq!(k.lambda_hours, 168.0);
        assert_eq!(e.lambda_round, 5.0);
        assert_eq!(e.lambda_hours, 168.0);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut cfg = EngineConfig::default();
        cfg.temporal.lambda_round = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = EngineConfig::default();
        cfg.chunking.child_size = 2000; // larger than parent
        assert!(cfg.validate().is_err());

        let mut cfg = EngineConfig::default();
        cfg.chunking.overlap = 200; // >= child_size
        assert!(cfg.validate().is_err());

        let cfg = EngineConfig {
            similarity_threshold: 1.5,
            ..EngineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn partial_json_round_trip() {
        let cfg: EngineConfig =
            serde_json::from_str(r#"{"quotas": {"knowledge_k": 3, "chat_history_k": 3}}"#).unwrap();
        assert_eq!(cfg.quotas.knowledge_k, 3);
        assert_eq!(cfg.quotas.chat_history_k, 3);
        // Everything else keeps its default.
        assert_eq!(cfg.similarity_threshold, 0.5);
        assert_eq!(cfg.fusion.k_rrf, 60.0);
    }
}
