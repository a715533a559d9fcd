//! Corpus-level report assembly: applies the eligibility rules, macro-averages
//! per-record scores, and keeps per-record values for inspection.

use super::{
    eval_classification, eval_nfi, eval_retrieval_claim_level, eval_retrieval_feature_level,
    mean_retrieval, ClassificationScores, MetricsError,
};
use crate::model::{
    ExaminationRecord, ExaminationResult, FeatureVerdict, PriorArtDocument, RetrievalScores,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// One record with everything needed to score it.
#[derive(Clone, Copy)]
pub struct EvalInput<'a> {
    pub record: &'a ExaminationRecord,
    pub doc: &'a PriorArtDocument,
    pub result: &'a ExaminationResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskCounts {
    pub retrieval: usize,
    pub nfi: usize,
    pub classification: usize,
}

/// Scores of a single record under the tasks it is eligible for.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RecordScores {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub claim_retrieval: Option<RetrievalScores>,
    /// Mean over this record's eligible gold features.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_retrieval: Option<RetrievalScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nfi: Option<(f64, f64, f64)>,
}

/// Corpus-level evaluation report.
///
/// Retrieval and NFI blocks are macro averages over eligible records (each
/// claim weighted equally); classification covers every record with a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub counts: TaskCounts,
    pub retrieval_claim: RetrievalScores,
    pub retrieval_feature: RetrievalScores,
    pub nfi: (f64, f64, f64),
    pub classification: ClassificationScores,
    pub per_record: BTreeMap<String, RecordScores>,
    /// Records that could not be scored for an eligible task, with reasons.
    pub skipped: Vec<String>,
    /// How claim-level nDCG rankings were formed from per-feature lists.
    pub ndcg_ranking: String,
}

/// Scores every record and macro-averages: not-novel records contribute the
/// retrieval block, novel records the NFI block, all records classification.
/// Records whose gold data cannot support an eligible task are listed in
/// `skipped` instead of aborting the report.
pub fn assemble_report(
    inputs: &[EvalInput<'_>],
    novel_verdicts: &BTreeSet<FeatureVerdict>,
) -> Result<EvalReport, MetricsError> {
    if inputs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut per_record = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut claim_scores = Vec::new();
    let mut feature_scores = Vec::new();
    let mut nfi_scores: Vec<(f64, f64, f64)> = Vec::new();
    let mut predictions = Vec::new();
    let mut labels = Vec::new();

    for input in inputs {
        let id = input.record.record_id();
        let mut scores = RecordScores::default();
        predictions.push(input.result.claim_verdict);
        labels.push(input.record.novelty_label);

        match input.record.novelty_label {
            crate::model::NoveltyLabel::NotNovel => {
                match eval_retrieval_claim_level(input.result, input.record, input.doc) {
                    Ok(s) => {
                        claim_scores.push(s);
                        scores.claim_retrieval = Some(s);
                    }
                    Err(e) => skipped.push(format!("{id}: {e}")),
                }
                match eval_retrieval_feature_level(input.result, input.record, input.doc) {
                    Ok(f) if !f.per_feature.is_empty() => {
                        feature_scores.push(f.mean);
                        scores.feature_retrieval = Some(f.mean);
                    }
                    Ok(_) => {}
                    Err(e) => skipped.push(format!("{id}: {e}")),
                }
            }
            crate::model::NoveltyLabel::Novel => {
                match eval_nfi(input.result, input.record, novel_verdicts) {
                    Ok(t) => {
                        nfi_scores.push(t);
                        scores.nfi = Some(t);
                    }
                    Err(e) => skipped.push(format!("{id}: {e}")),
                }
            }
        }
        per_record.insert(id, scores);
    }

    let nfi = if nfi_scores.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        let n = nfi_scores.len() as f64;
        let sum = nfi_scores
            .iter()
            .fold((0.0, 0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2));
        (sum.0 / n, sum.1 / n, sum.2 / n)
    };

    Ok(EvalReport {
        counts: TaskCounts {
            retrieval: claim_scores.len(),
            nfi: nfi_scores.len(),
            classification: predictions.len(),
        },
        retrieval_claim: mean_retrieval(&claim_scores),
        retrieval_feature: mean_retrieval(&feature_scores),
        nfi,
        classification: eval_classification(&predictions, &labels)?,
        per_record,
        skipped,
        ndcg_ranking: "predicted-order".to_string(),
    })
}
