//! Data model for novelty examination records.
//!
//! An examination pairs one claim with one prior art document. Claims carry a
//! novelty label from the prosecution outcome; not-novel claims additionally
//! carry a gold segmentation into features and, per feature, the set of prior
//! art passages cited against it; novel claims carry the character spans that
//! were added relative to the rejected version.
//!
//! All spans are half-open `[start, end)` ranges counted in Unicode scalar
//! values of the claim text, not bytes.

mod validate;

pub use validate::{validate_record, Violation, ViolationCode};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Identifier of one passage inside a prior art document.
///
/// The derived ordering is the canonical citation order: abstract first, then
/// claims by number, then paragraphs by number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "PassageIdRepr", into = "PassageIdRepr")]
pub enum PassageId {
    Abstract,
    Claim(u32),
    Paragraph(u32),
}

impl fmt::Display for PassageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassageId::Abstract => write!(f, "abstract"),
            PassageId::Claim(n) => write!(f, "claim {n}"),
            PassageId::Paragraph(n) => write!(f, "par {n}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PassageIdRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    number: Option<u32>,
}

impl From<PassageId> for PassageIdRepr {
    fn from(id: PassageId) -> Self {
        match id {
            PassageId::Abstract => PassageIdRepr { kind: "abstract".into(), number: None },
            PassageId::Claim(n) => PassageIdRepr { kind: "claim".into(), number: Some(n) },
            PassageId::Paragraph(n) => PassageIdRepr { kind: "paragraph".into(), number: Some(n) },
        }
    }
}

impl TryFrom<PassageIdRepr> for PassageId {
    type Error = String;

    fn try_from(repr: PassageIdRepr) -> Result<Self, String> {
        match (repr.kind.as_str(), repr.number) {
            ("abstract", None) => Ok(PassageId::Abstract),
            ("abstract", Some(_)) => Err("abstract passages carry no number".into()),
            ("claim", Some(n)) => Ok(PassageId::Claim(n)),
            ("paragraph", Some(n)) => Ok(PassageId::Paragraph(n)),
            (k @ ("claim" | "paragraph"), None) => Err(format!("{k} passage id needs a number")),
            (other, _) => Err(format!("unknown passage kind {other:?}")),
        }
    }
}

/// Sorts and deduplicates passage ids into canonical citation order.
pub fn canonical_passage_order(ids: impl IntoIterator<Item = PassageId>) -> Vec<PassageId> {
    let mut out: Vec<PassageId> = ids.into_iter().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// One retrievable unit of a prior art document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: PassageId,
    pub text: String,
}

/// A prior art document as a flat, canonically ordered list of passages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorArtDocument {
    pub doc_id: String,
    pub passages: Vec<Passage>,
}

impl PriorArtDocument {
    /// Checks that passage ids are strictly increasing in canonical order,
    /// which also rules out duplicates and a second abstract.
    pub fn validate(&self) -> Result<(), String> {
        for pair in self.passages.windows(2) {
            if pair[0].id >= pair[1].id {
                return Err(format!(
                    "document {}: passage {} does not precede {}",
                    self.doc_id, pair[0].id, pair[1].id
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, id: PassageId) -> Option<&Passage> {
        self.passages.iter().find(|p| p.id == id)
    }

    pub fn contains(&self, id: PassageId) -> bool {
        self.get(id).is_some()
    }

    pub fn passage_ids(&self) -> Vec<PassageId> {
        self.passages.iter().map(|p| p.id).collect()
    }
}

/// Half-open `[start, end)` range in Unicode scalar offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

impl From<(usize, usize)> for Span {
    fn from((start, end): (usize, usize)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (usize, usize) {
    fn from(s: Span) -> Self {
        (s.start, s.end)
    }
}

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice of `s` covered by `span`, or `None` when the span exceeds the text.
pub fn slice_chars(s: &str, span: Span) -> Option<&str> {
    if span.end < span.start {
        return None;
    }
    let mut byte_start = None;
    let mut byte_end = None;
    for (count, (byte, _)) in s.char_indices().enumerate() {
        if count == span.start {
            byte_start = Some(byte);
        }
        if count == span.end {
            byte_end = Some(byte);
            break;
        }
    }
    let n = char_len(s);
    if span.start == n {
        byte_start = Some(s.len());
    }
    if span.end == n {
        byte_end = Some(s.len());
    }
    Some(&s[byte_start?..byte_end?])
}

/// One claim feature: a span of the claim and the text under that span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub span: Span,
    pub text: String,
}

/// An ordered, non-overlapping segmentation of a claim into features.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Segmentation {
    pub features: Vec<Feature>,
}

impl Segmentation {
    /// Builds a segmentation by slicing `claim` at the given spans. Spans that
    /// exceed the claim are skipped.
    pub fn from_spans(claim: &str, spans: impl IntoIterator<Item = Span>) -> Self {
        let features = spans
            .into_iter()
            .filter_map(|span| {
                slice_chars(claim, span).map(|text| Feature { span, text: text.to_string() })
            })
            .collect();
        Segmentation { features }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn spans(&self) -> Vec<Span> {
        self.features.iter().map(|f| f.span).collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.text.as_str()).collect()
    }
}

/// Per-feature citation sets, keyed by feature index into a segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureReferences(pub BTreeMap<usize, BTreeSet<PassageId>>);

impl FeatureReferences {
    pub fn get(&self, feature_idx: usize) -> Option<&BTreeSet<PassageId>> {
        self.0.get(&feature_idx)
    }

    pub fn insert(&mut self, feature_idx: usize, ids: impl IntoIterator<Item = PassageId>) {
        self.0.entry(feature_idx).or_default().extend(ids);
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BTreeSet<PassageId>)> {
        self.0.iter().map(|(k, v)| (*k, v))
    }

    /// Union of all citation sets, in canonical order.
    pub fn all_passages(&self) -> Vec<PassageId> {
        canonical_passage_order(self.0.values().flatten().copied())
    }
}

/// A set of pairwise disjoint spans, kept sorted by start offset.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpanSet(pub Vec<Span>);

impl SpanSet {
    /// Canonicalizes arbitrary spans: drops empty ones, sorts, and merges
    /// overlapping or adjacent ranges into maximal disjoint ranges.
    pub fn from_unmerged(spans: impl IntoIterator<Item = Span>) -> Self {
        let mut spans: Vec<Span> = spans.into_iter().filter(|s| !s.is_empty()).collect();
        spans.sort_unstable();
        let mut merged: Vec<Span> = Vec::with_capacity(spans.len());
        for span in spans {
            match merged.last_mut() {
                Some(last) if span.start <= last.end => last.end = last.end.max(span.end),
                _ => merged.push(span),
            }
        }
        SpanSet(merged)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Span> {
        self.0.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total_len(&self) -> usize {
        self.0.iter().map(Span::len).sum()
    }

    /// Total number of character positions covered by both sets.
    pub fn overlap_len(&self, other: &SpanSet) -> usize {
        self.0
            .iter()
            .map(|a| other.0.iter().map(|b| a.overlap(b)).sum::<usize>())
            .sum()
    }
}

/// Gold novelty outcome of a claim's examination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoveltyLabel {
    Novel,
    NotNovel,
}

/// Predicted novelty verdict for a whole claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimVerdict {
    Novel,
    NotNovel,
}

impl From<NoveltyLabel> for ClaimVerdict {
    fn from(l: NoveltyLabel) -> Self {
        match l {
            NoveltyLabel::Novel => ClaimVerdict::Novel,
            NoveltyLabel::NotNovel => ClaimVerdict::NotNovel,
        }
    }
}

impl From<ClaimVerdict> for NoveltyLabel {
    fn from(v: ClaimVerdict) -> Self {
        match v {
            ClaimVerdict::Novel => NoveltyLabel::Novel,
            ClaimVerdict::NotNovel => NoveltyLabel::NotNovel,
        }
    }
}

/// Predicted disclosure verdict for one claim feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureVerdict {
    FullyDisclosed,
    PartiallyDisclosed,
    NotDisclosed,
}

impl NoveltyLabel {
    pub const ALL: [NoveltyLabel; 2] = [NoveltyLabel::Novel, NoveltyLabel::NotNovel];
}

impl ClaimVerdict {
    pub const ALL: [ClaimVerdict; 2] = [ClaimVerdict::Novel, ClaimVerdict::NotNovel];
}

impl FeatureVerdict {
    pub const ALL: [FeatureVerdict; 3] = [
        FeatureVerdict::FullyDisclosed,
        FeatureVerdict::PartiallyDisclosed,
        FeatureVerdict::NotDisclosed,
    ];
}

/// Which prosecution stage a claim text comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimVersion {
    Initial,
    Granted,
}

impl fmt::Display for ClaimVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClaimVersion::Initial => write!(f, "initial"),
            ClaimVersion::Granted => write!(f, "granted"),
        }
    }
}

/// One claim to examine against one prior art document.
///
/// Invariants, checked by [`validate_record`]: a not-novel record carries a
/// gold segmentation and gold references; a novel record carries the spans
/// added relative to the rejected claim version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExaminationRecord {
    pub application_id: String,
    pub claim_version: ClaimVersion,
    pub claim_text: String,
    pub novelty_label: NoveltyLabel,
    pub prior_art_doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_segmentation: Option<Segmentation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_references: Option<FeatureReferences>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_spans: Option<SpanSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub domain_classes: Vec<String>,
}

impl ExaminationRecord {
    /// Stable key of this record within a corpus.
    pub fn record_id(&self) -> String {
        format!("{}:{}", self.application_id, self.claim_version)
    }
}

/// Examination output for one feature of the predicted segmentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureResult {
    /// Cited passages, ranked most relevant first, without duplicates.
    pub passages: Vec<PassageId>,
    pub verdict: FeatureVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
}

/// Full examination output for one record.
///
/// `feature_results` is aligned index-for-index with
/// `predicted_segmentation.features`. Both may be empty for methods that only
/// classify the claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExaminationResult {
    pub record_id: String,
    pub predicted_segmentation: Segmentation,
    pub feature_results: Vec<FeatureResult>,
    pub claim_verdict: ClaimVerdict,
}

/// Retrieval quality of one examination, all values in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RetrievalScores {
    pub p: f64,
    pub soft_p: f64,
    pub r: f64,
    pub soft_r: f64,
    pub f1: f64,
    pub soft_f1: f64,
    pub ndcg: f64,
}
