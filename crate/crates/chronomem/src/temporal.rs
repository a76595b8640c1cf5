//! Dual-clock temporal weighting.
//!
//! Retrieved candidates decay along two independent axes — dialogue-round
//! distance and wall-clock age — and the final score of a candidate is its
//! base relevance multiplied by the product of both decays:
//!
//! ```text
//! w_round = exp(-|r_now - r_chunk| / lambda_round)
//! w_clock = exp(-max(0, now - t_chunk) / 3600 / lambda_hours)
//! final   = base * w_round * w_clock
//! ```
//!
//! Each route reranks independently with its own (overridable) scales, so
//! knowledge and experience never compete through their decay geometry.

use crate::config::TemporalDecayParams;
use crate::retrieval::{sort_by_final, ScoredCandidate};

/// The "now" of a turn: wall clock plus dialogue round.
#[derive(Debug, Clone, Copy)]
pub struct TemporalContext {
    pub now_epoch_secs: u64,
    pub current_round: u32,
}

/// Decay over dialogue-round distance (symmetric in the gap).
pub fn round_decay(current_round: u32, chunk_round: u32, lambda_round: f64) -> f64 {
    let gap = current_round.abs_diff(chunk_round) as f64;
    (-gap / lambda_round).exp()
}

/// Decay over wall-clock hours. Future timestamps clamp to age zero.
pub fn clock_decay(now_epoch_secs: u64, chunk_timestamp: u64, lambda_hours: f64) -> f64 {
    let delta_hours = now_epoch_secs.saturating_sub(chunk_timestamp) as f64 / 3600.0;
    (-delta_hours / lambda_hours).exp()
}

/// Product of both decays; lies in (0, 1], and equals 1 exactly when the
/// chunk is from the current round and the current instant (or newer).
pub fn temporal_weight(
    ctx: &TemporalContext,
    chunk_round: u32,
    chunk_timestamp: u64,
    params: &TemporalDecayParams,
) -> f64 {
    round_decay(ctx.current_round, chunk_round, params.lambda_round)
        * clock_decay(ctx.now_epoch_secs, chunk_timestamp, params.lambda_hours)
}

/// Applies temporal weights to one route's candidates and re-sorts by final
/// score (ties broken by ascending chunk id). With `enabled = false` every
/// weight is exactly 1.0, so `final == base` still holds bit-for-bit.
pub fn rerank_route(
    candidates: &mut [ScoredCandidate],
    ctx: &TemporalContext,
    params: &TemporalDecayParams,
    enabled: bool,
) {
    for c in candidates.iter_mut() {
        let w = if enabled {
            temporal_weight(ctx, c.round, c.timestamp, params)
        } else {
            1.0
        };
        c.temporal_weight = w;
        c.final_score = c.base_score * w;
    }
    sort_by_final(candidates);
}
