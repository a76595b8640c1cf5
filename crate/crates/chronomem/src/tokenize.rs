//! Lexical tokenizer shared by the inverted index and the hashing embedder.
//!
//! Lowercases, then splits on anything non-alphanumeric. Contiguous CJK runs
//! are expanded into character unigrams plus adjacent-character bigrams so
//! that unsegmented Chinese/Japanese text still yields matchable terms.

/// Han ideographs plus kana. Intentionally coarse: it only has to decide
/// whether whitespace-free scripts need character-level terms.
fn is_cjk(c: char) -> bool {
    matches!(
        c as u32,
        0x3040..=0x30FF   // hiragana + katakana
        | 0x3400..=0x4DBF // CJK extension A
        | 0x4E00..=0x9FFF // CJK unified ideographs
        | 0xF900..=0xFAFF // CJK compatibility ideographs
    )
}

pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut run: Vec<char> = Vec::new();
    for c in lower.chars().chain(std::iter::once(' ')) {
        if c.is_alphanumeric() {
            run.push(c);
        } else if !run.is_empty() {
            emit_run(&run, &mut tokens);
            run.clear();
        }
    }
    tokens
}

/// Splits one alphanumeric run into CJK / non-CJK segments and emits terms.
fn emit_run(run: &[char], out: &mut Vec<String>) {
    let mut seg_start = 0;
    for i in 1..=run.len() {
        let boundary = i == run.len() || is_cjk(run[i]) != is_cjk(run[seg_start]);
        if !boundary {
            continue;
        }
        let seg = &run[seg_start..i];
        if is_cjk(seg[0]) {
            for &c in seg {
                out.push(c.to_string());
            }
            for pair in seg.windows(2) {
                out.push(pair.iter().collect());
            }
        } else {
            out.push(seg.iter().collect());
        }
        seg_start = i;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits_on_punctuation() {
        assert_eq!(tokenize("Hello, World!"), vec!["hello", "world"]);
        assert_eq!(tokenize("ZQ-7741"), vec!["zq", "7741"]);
        assert_eq!(tokenize("kephrax17"), vec!["kephrax17"]);
        assert_eq!(tokenize("  a  b  "), vec!["a", "b"]);
        assert!(tokenize("!!! ... ---").is_empty());
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn cjk_runs_emit_unigrams_and_bigrams() {
        assert_eq!(tokenize("今天天气"), vec!["今", "天", "天", "气", "今天", "天天", "天气"]);
        // Single CJK character: unigram only.
        assert_eq!(tokenize("茶"), vec!["茶"]);
    }

    #[test]
    fn mixed_scripts_segment_inside_one_run() {
        assert_eq!(tokenize("abc中文def"), vec!["abc", "中", "文", "中文", "def"]);
    }

    #[test]
    fn deterministic() {
        let a = tokenize("The 小猫 sat on the mat, twice. The 小猫!");
        let b = tokenize("The 小猫 sat on the mat, twice. The 小猫!");
        assert_eq!(a, b);
    }
}
