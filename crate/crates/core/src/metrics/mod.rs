//! Three-task evaluation protocol: passage retrieval (hard and soft, claim
//! and feature level), novel feature identification, claim classification,
//! and inter-run agreement.
//!
//! Eligibility rules: retrieval metrics are defined only for not-novel
//! records (they carry gold references), novel feature identification only
//! for novel records (they carry added spans). Classification covers every
//! record.

mod report;

pub use report::{assemble_report, EvalInput, EvalReport, RecordScores, TaskCounts};

use crate::claimtext::{align_features, AlignmentDistance};
use crate::model::{
    ClaimVerdict, ExaminationRecord, ExaminationResult, FeatureVerdict, NoveltyLabel, PassageId,
    PriorArtDocument, RetrievalScores, SpanSet,
};
use crate::textsim::{rouge_l_tokens, tokenize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("retrieval metrics require a not-novel record, got a novel one ({0})")]
    RetrievalEligibility(String),
    #[error("novel feature identification requires a novel record, got a not-novel one ({0})")]
    NfiEligibility(String),
    #[error("record {0} lacks the gold data its label promises")]
    MissingGold(String),
    #[error("ndcg is undefined for an empty gold set")]
    EmptyGold,
    #[error("input lengths differ: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("inputs are empty")]
    Empty,
    #[error("result has {results} feature results for {features} segmented features")]
    ResultMisaligned { results: usize, features: usize },
}

/// Set precision/recall/F1 with the empty-set conventions: both empty is
/// perfect (1,1,1); nothing predicted against a non-empty gold is (0,0,0);
/// something predicted against an empty gold is (0,1,0).
pub fn set_prf(
    predicted: &BTreeSet<PassageId>,
    gold: &BTreeSet<PassageId>,
) -> (f64, f64, f64) {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) => return (0.0, 0.0, 0.0),
        (false, true) => return (0.0, 1.0, 0.0),
        (false, false) => {}
    }
    let hit = predicted.intersection(gold).count() as f64;
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    (p, r, f1_of(p, r))
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Soft precision/recall/F1: each predicted text scores its maximum ROUGE-L
/// against the gold texts (and vice versa), averaged per side. Empty-set
/// conventions match [`set_prf`].
pub fn soft_prf(predicted: &[&str], gold: &[&str]) -> (f64, f64, f64) {
    match (predicted.is_empty(), gold.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) => return (0.0, 0.0, 0.0),
        (false, true) => return (0.0, 1.0, 0.0),
        (false, false) => {}
    }
    let pred_tokens: Vec<Vec<String>> = predicted.iter().map(|t| tokenize(t)).collect();
    let gold_tokens: Vec<Vec<String>> = gold.iter().map(|t| tokenize(t)).collect();
    let max_against = |x: &Vec<String>, others: &[Vec<String>]| {
        others.iter().map(|y| rouge_l_tokens(x, y)).fold(0.0, f64::max)
    };
    let p = pred_tokens.iter().map(|x| max_against(x, &gold_tokens)).sum::<f64>()
        / pred_tokens.len() as f64;
    let r = gold_tokens.iter().map(|y| max_against(y, &pred_tokens)).sum::<f64>()
        / gold_tokens.len() as f64;
    (p, r, f1_of(p, r))
}

/// Normalized discounted cumulative gain with binary gains and no rank
/// cutoff: DCG sums 1/log2(i+2) over 0-based ranks of relevant items, IDCG
/// over the first |gold| ranks. `ranked` must not contain duplicates.
pub fn ndcg(ranked: &[PassageId], gold: &BTreeSet<PassageId>) -> Result<f64, MetricsError> {
    if gold.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 =
        ranked.iter().enumerate().filter(|(_, id)| gold.contains(id)).map(|(i, _)| discount(i)).sum();
    let idcg: f64 = (0..gold.len()).map(discount).sum();
    Ok(dcg / idcg)
}

/// Retrieval scores of one ranked prediction against one gold set, given the
/// texts behind the ids.
fn score_one_retrieval(
    ranked: &[PassageId],
    gold: &BTreeSet<PassageId>,
    doc: &PriorArtDocument,
) -> Result<RetrievalScores, MetricsError> {
    let predicted: BTreeSet<PassageId> = ranked.iter().copied().collect();
    let (p, r, f1) = set_prf(&predicted, gold);
    // Ids absent from the document resolve to empty text, so they earn zero
    // similarity rather than being silently dropped.
    let resolve = |id: &PassageId| doc.get(*id).map(|pa| pa.text.as_str()).unwrap_or("");
    let pred_texts: Vec<&str> = ranked.iter().map(resolve).collect();
    let gold_texts: Vec<&str> = gold.iter().map(resolve).collect();
    let (soft_p, soft_r, soft_f1) = soft_prf(&pred_texts, &gold_texts);
    let ndcg = ndcg(ranked, gold)?;
    Ok(RetrievalScores { p, soft_p, r, soft_r, f1, soft_f1, ndcg })
}

/// Field-wise arithmetic mean; zeros when `scores` is empty.
pub fn mean_retrieval(scores: &[RetrievalScores]) -> RetrievalScores {
    if scores.is_empty() {
        return RetrievalScores::default();
    }
    let n = scores.len() as f64;
    let mut m = RetrievalScores::default();
    for s in scores {
        m.p += s.p;
        m.soft_p += s.soft_p;
        m.r += s.r;
        m.soft_r += s.soft_r;
        m.f1 += s.f1;
        m.soft_f1 += s.soft_f1;
        m.ndcg += s.ndcg;
    }
    m.p /= n;
    m.soft_p /= n;
    m.r /= n;
    m.soft_r /= n;
    m.f1 /= n;
    m.soft_f1 /= n;
    m.ndcg /= n;
    m
}

/// Feature-level retrieval outcome: per eligible gold feature index, plus the
/// macro average over those features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLevelRetrieval {
    pub per_feature: Vec<(usize, RetrievalScores)>,
    pub mean: RetrievalScores,
}

/// Scores retrieval per gold feature. Predicted features are aligned to gold
/// features by minimal edit distance; each gold feature is scored against the
/// ranked union (concatenated in predicted order, deduplicated) of the
/// passages its aligned predictions retrieved. Gold features with an empty
/// reference set are excluded; gold features no prediction aligned to score
/// against an empty prediction.
pub fn eval_retrieval_feature_level(
    result: &ExaminationResult,
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
) -> Result<FeatureLevelRetrieval, MetricsError> {
    if record.novelty_label != NoveltyLabel::NotNovel {
        return Err(MetricsError::RetrievalEligibility(record.record_id()));
    }
    let (gold_seg, gold_refs) = match (&record.gold_segmentation, &record.gold_references) {
        (Some(s), Some(r)) => (s, r),
        _ => return Err(MetricsError::MissingGold(record.record_id())),
    };
    check_alignment(result)?;

    // mapping[i] = gold index for predicted feature i; empty predictions have
    // no alignment and leave every gold feature unmapped.
    let mapping: Vec<Option<usize>> = if result.predicted_segmentation.is_empty() || gold_seg.is_empty() {
        vec![None; result.predicted_segmentation.len()]
    } else {
        align_features(&result.predicted_segmentation, gold_seg, AlignmentDistance::Raw)
            .expect("both segmentations checked non-empty")
            .mapping
            .into_iter()
            .map(Some)
            .collect()
    };

    let mut per_feature = Vec::new();
    for (j, _) in gold_seg.features.iter().enumerate() {
        let gold_set = match gold_refs.get(j) {
            Some(s) if !s.is_empty() => s,
            _ => continue,
        };
        let mut ranked: Vec<PassageId> = Vec::new();
        for (i, fr) in result.feature_results.iter().enumerate() {
            if mapping.get(i).copied().flatten() == Some(j) {
                for id in &fr.passages {
                    if !ranked.contains(id) {
                        ranked.push(*id);
                    }
                }
            }
        }
        per_feature.push((j, score_one_retrieval(&ranked, gold_set, doc)?));
    }
    let mean = mean_retrieval(&per_feature.iter().map(|(_, s)| *s).collect::<Vec<_>>());
    Ok(FeatureLevelRetrieval { per_feature, mean })
}

/// Scores retrieval with all features pooled: gold is the union of all gold
/// reference sets, the prediction is the deduplicated first-occurrence
/// ranking across predicted features.
pub fn eval_retrieval_claim_level(
    result: &ExaminationResult,
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
) -> Result<RetrievalScores, MetricsError> {
    if record.novelty_label != NoveltyLabel::NotNovel {
        return Err(MetricsError::RetrievalEligibility(record.record_id()));
    }
    let gold_refs =
        record.gold_references.as_ref().ok_or_else(|| MetricsError::MissingGold(record.record_id()))?;
    check_alignment(result)?;
    let gold: BTreeSet<PassageId> = gold_refs.0.values().flatten().copied().collect();
    if gold.is_empty() {
        return Err(MetricsError::MissingGold(record.record_id()));
    }
    let mut ranked: Vec<PassageId> = Vec::new();
    for fr in &result.feature_results {
        for id in &fr.passages {
            if !ranked.contains(id) {
                ranked.push(*id);
            }
        }
    }
    score_one_retrieval(&ranked, &gold, doc)
}

fn check_alignment(result: &ExaminationResult) -> Result<(), MetricsError> {
    if result.feature_results.len() != result.predicted_segmentation.len() {
        return Err(MetricsError::ResultMisaligned {
            results: result.feature_results.len(),
            features: result.predicted_segmentation.len(),
        });
    }
    Ok(())
}

/// Character-overlap precision/recall/F1 of predicted-novel spans against the
/// spans added during prosecution. A feature counts as predicted novel when
/// its verdict is in `novel_verdicts` (typically not-disclosed and
/// partially-disclosed). Empty-set conventions match [`set_prf`].
pub fn eval_nfi(
    result: &ExaminationResult,
    record: &ExaminationRecord,
    novel_verdicts: &BTreeSet<FeatureVerdict>,
) -> Result<(f64, f64, f64), MetricsError> {
    if record.novelty_label != NoveltyLabel::Novel {
        return Err(MetricsError::NfiEligibility(record.record_id()));
    }
    let gold =
        record.added_spans.as_ref().ok_or_else(|| MetricsError::MissingGold(record.record_id()))?;
    check_alignment(result)?;
    let predicted = SpanSet::from_unmerged(
        result
            .feature_results
            .iter()
            .zip(&result.predicted_segmentation.features)
            .filter(|(fr, _)| novel_verdicts.contains(&fr.verdict))
            .map(|(_, f)| f.span),
    );
    match (predicted.is_empty(), gold.total_len() == 0) {
        (true, true) => return Ok((1.0, 1.0, 1.0)),
        (true, false) => return Ok((0.0, 0.0, 0.0)),
        (false, true) => return Ok((0.0, 1.0, 0.0)),
        (false, false) => {}
    }
    let overlap = predicted.overlap_len(gold) as f64;
    let p = overlap / predicted.total_len() as f64;
    let r = overlap / gold.total_len() as f64;
    Ok((p, r, f1_of(p, r)))
}

/// Whole-corpus classification quality.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassificationScores {
    pub predicted_novel_fraction: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy, macro F1, and the predicted-novel fraction. Macro F1 averages
/// per-class F1 over the classes observed in labels or predictions; a class
/// absent from both sides is skipped.
pub fn eval_classification(
    predictions: &[ClaimVerdict],
    labels: &[NoveltyLabel],
) -> Result<ClassificationScores, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { a: predictions.len(), b: labels.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let labels: Vec<ClaimVerdict> = labels.iter().map(|&l| l.into()).collect();
    let n = predictions.len() as f64;
    let predicted_novel_fraction =
        predictions.iter().filter(|v| **v == ClaimVerdict::Novel).count() as f64 / n;
    let accuracy =
        predictions.iter().zip(&labels).filter(|(a, b)| a == b).count() as f64 / n;

    let mut f1s = Vec::new();
    for class in ClaimVerdict::ALL {
        let in_preds = predictions.contains(&class);
        let in_labels = labels.contains(&class);
        if !in_preds && !in_labels {
            continue;
        }
        let tp = predictions.iter().zip(&labels).filter(|(a, b)| **a == class && **b == class).count() as f64;
        let fp = predictions.iter().zip(&labels).filter(|(a, b)| **a == class && **b != class).count() as f64;
        let fnn = predictions.iter().zip(&labels).filter(|(a, b)| **a != class && **b == class).count() as f64;
        let p = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
        let r = if tp + fnn == 0.0 { 0.0 } else { tp / (tp + fnn) };
        f1s.push(f1_of(p, r));
    }
    let macro_f1 = f1s.iter().sum::<f64>() / f1s.len() as f64;
    Ok(ClassificationScores { predicted_novel_fraction, accuracy, macro_f1 })
}

/// Cohen's kappa between two verdict sequences over the same records.
/// When chance agreement is total (p_e = 1), returns 1 for identical
/// sequences and 0 otherwise.
pub fn cohens_kappa(a: &[ClaimVerdict], b: &[ClaimVerdict]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = a.len() as f64;
    let p_o = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let p_e: f64 = ClaimVerdict::ALL
        .iter()
        .map(|c| {
            let fa = a.iter().filter(|v| *v == c).count() as f64 / n;
            let fb = b.iter().filter(|v| *v == c).count() as f64 / n;
            fa * fb
        })
        .sum();
    if p_e >= 1.0 {
        return Ok(if a == b { 1.0 } else { 0.0 });
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Pairwise Cohen's kappa between named runs, as a symmetric matrix with a
/// unit diagonal. All runs must cover the same records in the same order.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgreementMatrix {
    pub names: Vec<String>,
    pub kappa: Vec<Vec<f64>>,
}

pub fn agreement_matrix(
    runs: &[(String, Vec<ClaimVerdict>)],
) -> Result<AgreementMatrix, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty);
    }
    let len = runs[0].1.len();
    for (_, verdicts) in runs {
        if verdicts.len() != len {
            return Err(MetricsError::LengthMismatch { a: len, b: verdicts.len() });
        }
    }
    let k = runs.len();
    let mut kappa = vec![vec![0.0; k]; k];
    for i in 0..k {
        kappa[i][i] = 1.0;
        for j in i + 1..k {
            let v = cohens_kappa(&runs[i].1, &runs[j].1)?;
            kappa[i][j] = v;
            kappa[j][i] = v;
        }
    }
    Ok(AgreementMatrix { names: runs.iter().map(|(n, _)| n.clone()).collect(), kappa })
}
