//! Claim text parsing and normalization: reference-numeral stripping,
//! heuristic segmentation, prior-art reference-string parsing, anchoring of
//! free-text features back into the claim, and predicted-to-gold feature
//! alignment.

use crate::model::{PassageId, Segmentation, Span, SpanSet};
use crate::textsim::levenshtein_chars;
use regex::Regex;
use std::collections::BTreeSet;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClaimTextError {
    #[error("claim text is empty")]
    EmptyClaim,
    #[error("cannot align an empty segmentation")]
    EmptySegmentation,
    #[error("unparseable reference {0:?}")]
    UnparseableReference(String),
    #[error("reference range ends before it starts: {start}-{end}")]
    InvalidRange { start: u32, end: u32 },
}

/// Outcome of [`strip_reference_numerals`].
///
/// Deleting `removed_spans` from the original text reproduces `cleaned_text`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumeralStripResult {
    pub cleaned_text: String,
    pub removed_spans: SpanSet,
}

fn numeral_group_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A parenthesized group of drawing labels: digits with up to two trailing
    // letters, separated by commas or semicolons. "f(x)" stays untouched.
    RE.get_or_init(|| {
        Regex::new(r"\(\s*\d+[A-Za-z]{0,2}(\s*[,;]\s*\d+[A-Za-z]{0,2})*\s*\)").unwrap()
    })
}

/// Removes drawing reference numerals such as "(10)" or "(10, 12a)" from a
/// claim, together with one adjacent space where the removal would otherwise
/// leave a double or trailing space. Spans index the original text.
pub fn strip_reference_numerals(claim_text: &str) -> NumeralStripResult {
    let chars: Vec<char> = claim_text.chars().collect();
    // Byte offset of every char, for mapping regex matches to char offsets.
    let mut byte_to_char = vec![0usize; claim_text.len() + 1];
    for (ci, (bi, _)) in claim_text.char_indices().enumerate() {
        byte_to_char[bi] = ci;
    }
    byte_to_char[claim_text.len()] = chars.len();

    let mut spans = Vec::new();
    for m in numeral_group_re().find_iter(claim_text) {
        let mut start = byte_to_char[m.start()];
        let mut end = byte_to_char[m.end()];
        let prev_is_space = start > 0 && chars[start - 1] == ' ';
        let next_is_space = end < chars.len() && chars[end] == ' ';
        if prev_is_space && (next_is_space || end == chars.len()) {
            start -= 1;
        } else if start == 0 && next_is_space {
            end += 1;
        }
        spans.push(Span::new(start, end));
    }
    let removed_spans = SpanSet::from_unmerged(spans);
    let cleaned_text: String = chars
        .iter()
        .enumerate()
        .filter(|(i, _)| !removed_spans.iter().any(|s| s.start <= *i && *i < s.end))
        .map(|(_, c)| c)
        .collect();
    NumeralStripResult { cleaned_text, removed_spans }
}

/// Splits a claim at semicolons and newlines; the part before the first
/// delimiter additionally splits after its first colon, so a "A method
/// comprising:" preamble becomes its own feature. Feature texts are trimmed,
/// empty runs dropped, and spans index the original text.
pub fn segment_claim_heuristic(claim_text: &str) -> Result<Segmentation, ClaimTextError> {
    if claim_text.trim().is_empty() {
        return Err(ClaimTextError::EmptyClaim);
    }
    let chars: Vec<char> = claim_text.chars().collect();
    let mut cuts: Vec<Span> = Vec::new();
    let mut start = 0usize;
    for (i, c) in chars.iter().enumerate() {
        if *c == ';' || *c == '\n' {
            cuts.push(Span::new(start, i));
            start = i + 1;
        }
    }
    cuts.push(Span::new(start, chars.len()));

    if let Some(first) = cuts.first().copied() {
        if let Some(colon) = chars[first.start..first.end].iter().position(|c| *c == ':') {
            let at = first.start + colon + 1;
            cuts.splice(0..1, [Span::new(first.start, at), Span::new(at, first.end)]);
        }
    }

    let mut features = Vec::new();
    for cut in cuts {
        let mut s = cut.start;
        let mut e = cut.end;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        if s < e {
            features.push(Span::new(s, e));
        }
    }
    Ok(Segmentation::from_spans(claim_text, features))
}

/// Expands a prior-art reference string such as "paragraphs 10-13, 16-18, 20"
/// into passage ids. The kind keyword ("paragraph(s)"/"par.", "claim(s)",
/// "abstract") is matched case-insensitively and defaults to paragraphs when
/// absent; dash ranges are inclusive; bracketed numerals like "[0010]"
/// normalize to their integer value.
pub fn parse_reference_string(s: &str) -> Result<BTreeSet<PassageId>, ClaimTextError> {
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return Err(ClaimTextError::UnparseableReference(s.to_string()));
    }
    let lower = trimmed.to_lowercase();

    if lower == "abstract" {
        return Ok(BTreeSet::from([PassageId::Abstract]));
    }

    type MakeId = fn(u32) -> PassageId;
    let keywords: [(&str, MakeId); 6] = [
        ("paragraphs", PassageId::Paragraph),
        ("paragraph", PassageId::Paragraph),
        ("par.", PassageId::Paragraph),
        ("par", PassageId::Paragraph),
        ("claims", PassageId::Claim),
        ("claim", PassageId::Claim),
    ];
    let (make, rest): (MakeId, &str) = keywords
        .iter()
        .find(|(kw, _)| lower.starts_with(kw))
        .map(|(kw, make)| (*make, &trimmed[kw.len()..]))
        .unwrap_or((PassageId::Paragraph, trimmed));

    let mut out = BTreeSet::new();
    for item in rest.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(ClaimTextError::UnparseableReference(item.to_string()));
        }
        match item.split_once('-') {
            Some((a, b)) => {
                let start = parse_passage_number(a)
                    .ok_or_else(|| ClaimTextError::UnparseableReference(item.to_string()))?;
                let end = parse_passage_number(b)
                    .ok_or_else(|| ClaimTextError::UnparseableReference(item.to_string()))?;
                if end < start {
                    return Err(ClaimTextError::InvalidRange { start, end });
                }
                out.extend((start..=end).map(make));
            }
            None => {
                let n = parse_passage_number(item)
                    .ok_or_else(|| ClaimTextError::UnparseableReference(item.to_string()))?;
                out.insert(make(n));
            }
        }
    }
    Ok(out)
}

/// Parses "12", "[0012]", or " 12 " into 12.
fn parse_passage_number(s: &str) -> Option<u32> {
    let s = s.trim();
    let s = s.strip_prefix('[').and_then(|t| t.strip_suffix(']')).unwrap_or(s);
    let s = s.trim();
    if s.is_empty() || !s.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    s.parse().ok()
}

/// A feature text that [`locate_feature_spans`] could not anchor in the claim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedFeature {
    /// Index into the input feature list.
    pub index: usize,
    pub text: String,
}

/// Outcome of [`locate_feature_spans`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatedSpans {
    pub segmentation: Segmentation,
    pub dropped: Vec<DroppedFeature>,
}

/// Anchors free-text feature strings (typically LLM output) back into the
/// claim. Each feature is matched against candidate claim windows of length
/// |feature| ± 20%, scanning left to right from the end of the previous
/// match; the window with minimal edit distance wins, ties going to the
/// earliest and then shortest window. Features whose best normalized distance
/// (distance / longer length) exceeds 0.5 are dropped and reported.
pub fn locate_feature_spans(claim_text: &str, feature_texts: &[String]) -> LocatedSpans {
    let claim: Vec<char> = claim_text.chars().collect();
    let mut cursor = 0usize;
    let mut spans = Vec::new();
    let mut dropped = Vec::new();

    for (index, text) in feature_texts.iter().enumerate() {
        let feature: Vec<char> = text.chars().collect();
        match best_window(&claim, cursor, &feature) {
            Some(span) => {
                cursor = span.end;
                spans.push(span);
            }
            None => dropped.push(DroppedFeature { index, text: text.clone() }),
        }
    }
    LocatedSpans { segmentation: Segmentation::from_spans(claim_text, spans), dropped }
}

/// Minimal-distance window of `claim[from..]` for `feature`, or `None` when
/// even the best window's normalized distance exceeds 0.5.
fn best_window(claim: &[char], from: usize, feature: &[char]) -> Option<Span> {
    let flen = feature.len();
    if flen == 0 || from >= claim.len() {
        return None;
    }
    let min_w = ((flen as f64) * 0.8).floor().max(1.0) as usize;
    let max_w = ((flen as f64) * 1.2).ceil() as usize;

    let mut best: Option<(usize, Span)> = None;
    for start in from..claim.len() {
        if claim.len() - start < min_w {
            break;
        }
        let hi = max_w.min(claim.len() - start);
        // One DP over the longest window yields the distance to every window
        // prefix in its final row, so all lengths are scored in one pass.
        let window = &claim[start..start + hi];
        let row = levenshtein_last_row(feature, window);
        for (w, &dist) in row.iter().enumerate().take(hi + 1).skip(min_w) {
            if best.is_none_or(|(b, _)| dist < b) {
                best = Some((dist, Span::new(start, start + w)));
            }
        }
        if matches!(best, Some((0, _))) {
            break;
        }
    }
    let (dist, span) = best?;
    let norm = dist as f64 / flen.max(span.len()) as f64;
    (norm <= 0.5).then_some(span)
}

/// Final DP row of the Levenshtein computation: entry `j` is the distance
/// between `a` and `b[..j]`.
fn levenshtein_last_row(a: &[char], b: &[char]) -> Vec<usize> {
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
    prev
}

/// Distance measure used by [`align_features`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlignmentDistance {
    /// Raw character-level Levenshtein distance.
    #[default]
    Raw,
    /// Levenshtein divided by the longer text's length.
    Normalized,
}

/// Mapping from predicted feature indices to gold feature indices.
///
/// Every predicted index maps to exactly one gold index (`mapping[i]` is the
/// gold index for predicted feature `i`); a gold index may receive several
/// predictions; gold features nothing mapped to are listed in `unmapped_gold`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureAlignment {
    pub mapping: Vec<usize>,
    pub unmapped_gold: Vec<usize>,
}

/// Maps each predicted feature to the gold feature with minimal edit
/// distance between their texts, ties broken by the earliest gold index.
pub fn align_features(
    predicted: &Segmentation,
    gold: &Segmentation,
    distance: AlignmentDistance,
) -> Result<FeatureAlignment, ClaimTextError> {
    if predicted.is_empty() || gold.is_empty() {
        return Err(ClaimTextError::EmptySegmentation);
    }
    let gold_chars: Vec<Vec<char>> = gold.features.iter().map(|f| f.text.chars().collect()).collect();
    let mut mapping = Vec::with_capacity(predicted.len());
    for feature in &predicted.features {
        let pred_chars: Vec<char> = feature.text.chars().collect();
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (j, g) in gold_chars.iter().enumerate() {
            let raw = levenshtein_chars(&pred_chars, g) as f64;
            let dist = match distance {
                AlignmentDistance::Raw => raw,
                AlignmentDistance::Normalized => {
                    let denom = pred_chars.len().max(g.len());
                    if denom == 0 {
                        0.0
                    } else {
                        raw / denom as f64
                    }
                }
            };
            if dist < best_dist {
                best_dist = dist;
                best = j;
            }
        }
        mapping.push(best);
    }
    let mapped: BTreeSet<usize> = mapping.iter().copied().collect();
    let unmapped_gold = (0..gold.len()).filter(|j| !mapped.contains(j)).collect();
    Ok(FeatureAlignment { mapping, unmapped_gold })
}
