//! Deterministic text algorithms the metrics and baselines are built on:
//! tokenization, LCS/ROUGE-L, Levenshtein distance, character diff, TF-IDF.

mod tfidf;

pub use tfidf::{tfidf_fit, tfidf_transform, tfidf_transform_batch, TfidfError, TfidfVocabulary};

use crate::model::{Span, SpanSet};

/// Lowercases and splits on maximal runs of non-alphanumeric characters.
/// Never yields empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Length of the longest common subsequence, two-row DP.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-measure between two texts, over [`tokenize`] output.
///
/// With p = LCS/|a| and r = LCS/|b| the score is 2pr/(p+r), which reduces to
/// 2·LCS/(|a|+|b|); 0 when either side has no tokens.
pub fn rouge_l(a: &str, b: &str) -> f64 {
    rouge_l_tokens(&tokenize(a), &tokenize(b))
}

/// ROUGE-L on pre-tokenized inputs, for callers that compare many pairs.
pub fn rouge_l_tokens(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(a, b) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    2.0 * lcs / (a.len() + b.len()) as f64
}

/// Character-level Levenshtein distance with unit insert/delete/substitute
/// costs. Characters are Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b)
}

/// [`levenshtein`] on pre-collected characters, for window-scanning callers.
pub fn levenshtein_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character ranges of `new_text` that a minimal edit script inserts or
/// substitutes relative to `old_text`, merged into maximal disjoint ranges.
///
/// Minimal scripts are not unique. The script is canonicalized by walking both
/// strings from the start and preferring match, then substitution, then
/// deletion, then insertion at each step; with repeated structure this keeps
/// inserted material attached to the insertion site instead of realigning an
/// earlier repeat. Offsets are Unicode scalar positions into `new_text`.
pub fn diff_added_spans(old_text: &str, new_text: &str) -> SpanSet {
    let old: Vec<char> = old_text.chars().collect();
    let new: Vec<char> = new_text.chars().collect();
    let n = old.len();
    let m = new.len();

    // d[i][j] = edit distance between old[i..] and new[j..]. Suffix form so
    // the forward walk below can test each move for minimality in O(1).
    // u32 halves the memory next to usize; claim texts stay far below 2^32.
    let w = m + 1;
    let mut d = vec![0u32; (n + 1) * w];
    for j in 0..=m {
        d[n * w + j] = (m - j) as u32;
    }
    for i in (0..n).rev() {
        d[i * w + m] = (n - i) as u32;
        for j in (0..m).rev() {
            let sub = d[(i + 1) * w + (j + 1)] + u32::from(old[i] != new[j]);
            let del = d[(i + 1) * w + j] + 1;
            let ins = d[i * w + (j + 1)] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }

    let mut spans: Vec<Span> = Vec::new();
    let mark = |pos: usize, spans: &mut Vec<Span>| match spans.last_mut() {
        Some(last) if pos == last.end => last.end += 1,
        _ => spans.push(Span::new(pos, pos + 1)),
    };
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let cur = d[i * w + j];
        if i < n && j < m && old[i] == new[j] && d[(i + 1) * w + (j + 1)] == cur {
            i += 1;
            j += 1;
        } else if i < n && j < m && d[(i + 1) * w + (j + 1)] + 1 == cur {
            mark(j, &mut spans);
            i += 1;
            j += 1;
        } else if i < n && d[(i + 1) * w + j] + 1 == cur {
            i += 1;
        } else {
            mark(j, &mut spans);
            j += 1;
        }
    }
    SpanSet(spans)
}
