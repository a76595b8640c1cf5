//! Accuracy accounting: automatic per-round flags, the manual-review
//! overlay, rolling curves, and their merged summary.
//!
//! The automatic flag is what the harness could check without a human. The
//! manual review supplies two judgments per round — whether the delivered
//! evidence supported the answer, and whether the answer itself was correct
//! — either of which may still be `unknown`. A round is *final-correct*
//! only when both judgments are explicitly positive; pending rounds count
//! as incorrect until reviewed.

use serde::{Deserialize, Serialize};

use chronomem::EngineError;

/// Prefix means: element `i` is the accuracy over rounds `0..=i`.
pub fn rolling_means(flags: &[bool]) -> Vec<f64> {
    let mut out = Vec::with_capacity(flags.len());
    let mut sum = 0.0_f64;
    for (i, &f) in flags.iter().enumerate() {
        if f {
            sum += 1.0;
        }
        out.push(sum / (i + 1) as f64);
    }
    out
}

/// One round's human judgment. `None` means the reviewer has not decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManualReview {
    pub round: u32,
    pub manual_support: Option<bool>,
    pub answer_correct: Option<bool>,
}

impl ManualReview {
    /// Both judgments explicitly positive; anything unknown counts as not
    /// correct.
    pub fn final_correct(&self) -> bool {
        self.manual_support == Some(true) && self.answer_correct == Some(true)
    }

    pub fn is_pending(&self) -> bool {
        self.manual_support.is_none() || self.answer_correct.is_none()
    }
}

/// Merged automatic + manual tallies for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReviewSummary {
    pub total: usize,
    pub auto_correct: usize,
    pub auto_accuracy: f64,
    pub final_correct: usize,
    pub manual_accuracy: f64,
    /// Rounds where the reviewed verdict differs from the automatic flag.
    pub corrections: usize,
    /// Rounds still carrying an unknown judgment.
    pub pending: usize,
}

/// Folds the manual review over the automatic flags. The two series must
/// describe the same rounds, in the same order.
pub fn summarize(auto: &[bool], reviews: &[ManualReview]) -> Result<ReviewSummary, EngineError> {
    if auto.len() != reviews.len() {
        return Err(EngineError::InvalidConfig(format!(
            "review length {} does not match run length {}",
            reviews.len(),
            auto.len()
        )));
    }
    let total = auto.len();
    let auto_correct = auto.iter().filter(|&&f| f).count();
    let final_correct = reviews.iter().filter(|r| r.final_correct()).count();
    let corrections = auto
        .iter()
        .zip(reviews)
        .filter(|(&a, r)| r.final_correct() != a)
        .count();
    let pending = reviews.iter().filter(|r| r.is_pending()).count();
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    Ok(ReviewSummary {
        total,
        auto_correct,
        auto_accuracy: frac(auto_correct),
        final_correct,
        manual_accuracy: frac(final_correct),
        corrections,
        pending,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn review(round: u32, s: Option<bool>, c: Option<bool>) -> ManualReview {
        ManualReview {
            round,
            manual_support: s,
            answer_correct: c,
        }
    }

    #[test]
    fn rolling_means_are_prefix_averages() {
        let flags = [true, false, true, true];
        let curve = rolling_means(&flags);
        assert_eq!(curve, vec![1.0, 0.5, 2.0 / 3.0, 0.75]);
        assert!(rolling_means(&[]).is_empty());
    }

    #[test]
    fn final_correct_requires_both_explicit_positives() {
        assert!(review(1, Some(true), Some(true)).final_correct());
        assert!(!review(1, Some(true), Some(false)).final_correct());
        assert!(!review(1, Some(false), Some(true)).final_correct());
        assert!(!review(1, None, Some(true)).final_correct());
        assert!(!review(1, Some(true), None).final_correct());
        assert!(review(1, None, Some(true)).is_pending());
        assert!(!review(1, Some(false), Some(true)).is_pending());
    }

    #[test]
    fn summary_counts_corrections_and_pending() {
        // Round 1: auto wrong, review upgrades. Round 2: agreement.
        // Round 3: auto right, review downgrades. Round 4: pending.
        let auto = [false, true, true, false];
        let reviews = [
            review(1, Some(true), Some(true)),
            review(2, Some(true), Some(true)),
            review(3, Some(false), Some(true)),
            review(4, None, None),
        ];
        let s = summarize(&auto, &reviews).unwrap();
        assert_eq!(s.total, 4);
        assert_eq!(s.auto_correct, 2);
        assert_eq!(s.final_correct, 2);
        assert_eq!(s.corrections, 2, "one upgrade + one downgrade");
        assert_eq!(s.pending, 1);
        assert_eq!(s.auto_accuracy, 0.5);
        assert_eq!(s.manual_accuracy, 0.5);
    }

    #[test]
    fn summary_rejects_mismatched_lengths() {
        assert!(summarize(&[true], &[]).is_err());
    }

    proptest! {
        #[test]
        fn rolling_means_stay_in_unit_interval(flags in proptest::collection::vec(any::<bool>(), 0..200)) {
            for v in rolling_means(&flags) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn last_rolling_point_equals_overall_accuracy(flags in proptest::collection::vec(any::<bool>(), 1..200)) {
            let curve = rolling_means(&flags);
            let overall = flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64;
            prop_assert!((curve.last().unwrap() - overall).abs() < 1e-12);
        }

        #[test]
        fn reviewed_accuracy_never_counts_pending_rounds(
            pairs in proptest::collection::vec((any::<bool>(), proptest::option::of(any::<bool>()), proptest::option::of(any::<bool>())), 0..100)
        ) {
            let auto: Vec<bool> = pairs.iter().map(|p| p.0).collect();
            let reviews: Vec<ManualReview> = pairs
                .iter()
                .enumerate()
                .map(|(i, p)| review(i as u32 + 1, p.1, p.2))
                .collect();
            let s = summarize(&auto, &reviews).unwrap();
            // A pending round can never be final-correct, so the two tallies
            // are disjoint.
            for r in &reviews {
                if r.is_pending() {
                    prop_assert!(!r.final_correct());
                }
            }
            prop_assert!(s.final_correct + s.pending <= s.total);
            prop_assert!(s.manual_accuracy <= 1.0 && s.auto_accuracy <= 1.0);
        }
    }
}
