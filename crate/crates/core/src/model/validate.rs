//! Record-level invariant checks.
//!
//! Violations are data, not errors: ingestion collects them into a report and
//! decides what to reject, so a single bad record cannot abort a whole corpus
//! scan.

use super::{char_len, slice_chars, ExaminationRecord, NoveltyLabel, PriorArtDocument, Span};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    DocumentMismatch,
    MissingGoldSegmentation,
    MissingGoldReferences,
    MissingAddedSpans,
    InvalidSpan,
    SpanOutOfBounds,
    SpanOverlap,
    FeatureTextMismatch,
    ReferenceIndexOutOfBounds,
    UnknownPassageId,
}

/// One invariant violation found in a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, message: impl Into<String>) -> Self {
        Violation { code, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.code, self.message)
    }
}

/// Checks every record invariant against its prior art document and returns
/// all violations found. An empty result means the record is well-formed.
pub fn validate_record(record: &ExaminationRecord, doc: &PriorArtDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    let claim_len = char_len(&record.claim_text);

    if record.prior_art_doc_id != doc.doc_id {
        out.push(Violation::new(
            ViolationCode::DocumentMismatch,
            format!("record cites document {} but was validated against {}", record.prior_art_doc_id, doc.doc_id),
        ));
    }

    match record.novelty_label {
        NoveltyLabel::NotNovel => {
            if record.gold_segmentation.is_none() {
                out.push(Violation::new(
                    ViolationCode::MissingGoldSegmentation,
                    "not-novel record lacks a gold segmentation",
                ));
            }
            if record.gold_references.is_none() {
                out.push(Violation::new(
                    ViolationCode::MissingGoldReferences,
                    "not-novel record lacks gold references",
                ));
            }
        }
        NoveltyLabel::Novel => {
            if record.added_spans.is_none() {
                out.push(Violation::new(
                    ViolationCode::MissingAddedSpans,
                    "novel record lacks added spans",
                ));
            }
        }
    }

    if let Some(seg) = &record.gold_segmentation {
        let mut prev_end: Option<usize> = None;
        for (idx, feature) in seg.features.iter().enumerate() {
            if let Some(v) = check_span(feature.span, claim_len, &format!("feature {idx}")) {
                out.push(v);
                continue;
            }
            if let Some(end) = prev_end {
                if feature.span.start < end {
                    out.push(Violation::new(
                        ViolationCode::SpanOverlap,
                        format!("feature {idx} overlaps or precedes the previous feature"),
                    ));
                }
            }
            prev_end = Some(feature.span.end);
            let expected = slice_chars(&record.claim_text, feature.span).unwrap_or_default();
            if feature.text != expected {
                out.push(Violation::new(
                    ViolationCode::FeatureTextMismatch,
                    format!("feature {idx} text does not match claim span {:?}", (feature.span.start, feature.span.end)),
                ));
            }
        }
    }

    if let Some(refs) = &record.gold_references {
        let n_features = record.gold_segmentation.as_ref().map(|s| s.len());
        for (idx, passages) in refs.iter() {
            match n_features {
                Some(n) if idx >= n => out.push(Violation::new(
                    ViolationCode::ReferenceIndexOutOfBounds,
                    format!("reference index {idx} exceeds segmentation of {n} features"),
                )),
                None => out.push(Violation::new(
                    ViolationCode::ReferenceIndexOutOfBounds,
                    format!("reference index {idx} has no segmentation to point into"),
                )),
                _ => {}
            }
            for id in passages {
                if !doc.contains(*id) {
                    out.push(Violation::new(
                        ViolationCode::UnknownPassageId,
                        format!("feature {idx} cites {id}, absent from document {}", doc.doc_id),
                    ));
                }
            }
        }
    }

    if let Some(spans) = &record.added_spans {
        let mut prev_end: Option<usize> = None;
        for (idx, span) in spans.iter().enumerate() {
            if let Some(v) = check_span(*span, claim_len, &format!("added span {idx}")) {
                out.push(v);
                continue;
            }
            if let Some(end) = prev_end {
                if span.start < end {
                    out.push(Violation::new(
                        ViolationCode::SpanOverlap,
                        format!("added span {idx} overlaps or precedes the previous span"),
                    ));
                }
            }
            prev_end = Some(span.end);
        }
    }

    out
}

fn check_span(span: Span, claim_len: usize, what: &str) -> Option<Violation> {
    if span.end < span.start {
        return Some(Violation::new(
            ViolationCode::InvalidSpan,
            format!("{what} ends before it starts"),
        ));
    }
    if span.end > claim_len {
        return Some(Violation::new(
            ViolationCode::SpanOutOfBounds,
            format!("{what} ends at {} but the claim has {claim_len} characters", span.end),
        ));
    }
    None
}
