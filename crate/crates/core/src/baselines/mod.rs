//! Reference examiners that bracket the task: a uniform-random examiner, two
//! threshold retrievers (lexical and embedding similarity), and a claim-only
//! logistic regression used for spurious-correlation probes and adversarial
//! filtering.

mod embed;
mod logreg;

pub use embed::{
    EmbeddingCache, EmbeddingClient, EmbeddingError, HashEmbeddingClient, HttpEmbeddingClient,
};
pub use logreg::{
    extract_claim_features, predict_logreg, top_coefficients, train_logreg, BaselineError,
    ClaimFeatureVector, FeatureSpace, LogRegModel, LogRegParams,
};

use crate::claimtext::segment_claim_heuristic;
use crate::model::{
    ClaimVerdict, ExaminationRecord, ExaminationResult, FeatureResult, FeatureVerdict,
    PriorArtDocument, Segmentation,
};
use crate::textsim::rouge_l_tokens;
use crate::textsim::tokenize;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Segments with the shared heuristic, treating an unsegmentable (blank)
/// claim as having no features.
fn heuristic_or_empty(claim_text: &str) -> Segmentation {
    segment_claim_heuristic(claim_text).unwrap_or_else(|_| Segmentation::from_spans(claim_text, []))
}

/// Uniform-chance examiner. Each passage is retrieved independently with
/// probability `expected_passages / |passages|`, feature verdicts are uniform
/// over the three options, and the claim verdict is an independent coin flip.
pub fn random_examiner(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    expected_passages: usize,
    seed: u64,
) -> ExaminationResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let segmentation = heuristic_or_empty(&record.claim_text);
    let p_retrieve = if doc.passages.is_empty() {
        0.0
    } else {
        (expected_passages as f64 / doc.passages.len() as f64).min(1.0)
    };
    let feature_results = segmentation
        .features
        .iter()
        .map(|_| {
            let passages = doc
                .passages
                .iter()
                .filter(|_| rng.random_bool(p_retrieve))
                .map(|p| p.id)
                .collect();
            let verdict = *FeatureVerdict::ALL.choose(&mut rng).unwrap();
            FeatureResult { passages, verdict, summary: None }
        })
        .collect();
    let claim_verdict = *ClaimVerdict::ALL.choose(&mut rng).unwrap();
    ExaminationResult {
        record_id: record.record_id(),
        predicted_segmentation: segmentation,
        feature_results,
        claim_verdict,
    }
}

/// Scores every passage against a feature and keeps those above the
/// threshold, ranked by descending score. Canonical passage order breaks
/// score ties because the scan runs in document order and the sort is stable.
fn threshold_retrieve(
    scores: &[(usize, f64)],
    doc: &PriorArtDocument,
    threshold: f64,
) -> FeatureResult {
    let mut kept: Vec<(usize, f64)> =
        scores.iter().copied().filter(|(_, s)| *s > threshold).collect();
    kept.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    let verdict = if kept.is_empty() {
        FeatureVerdict::NotDisclosed
    } else {
        FeatureVerdict::FullyDisclosed
    };
    FeatureResult {
        passages: kept.into_iter().map(|(i, _)| doc.passages[i].id).collect(),
        verdict,
        summary: None,
    }
}

fn novel_iff_any_undisclosed(results: &[FeatureResult]) -> ClaimVerdict {
    if results.iter().any(|r| r.verdict == FeatureVerdict::NotDisclosed) {
        ClaimVerdict::Novel
    } else {
        ClaimVerdict::NotNovel
    }
}

/// Lexical threshold examiner: a passage discloses a feature when their
/// ROUGE-L exceeds the threshold; a claim is novel when any feature stays
/// undisclosed. A claim with no features is therefore not novel.
pub fn rouge_retrieval_examiner(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    threshold: f64,
) -> ExaminationResult {
    let segmentation = heuristic_or_empty(&record.claim_text);
    let passage_tokens: Vec<Vec<String>> =
        doc.passages.iter().map(|p| tokenize(&p.text)).collect();
    let feature_results: Vec<FeatureResult> = segmentation
        .features
        .iter()
        .map(|feature| {
            let feature_tokens = tokenize(&feature.text);
            let scores: Vec<(usize, f64)> = passage_tokens
                .iter()
                .enumerate()
                .map(|(i, p)| (i, rouge_l_tokens(&feature_tokens, p)))
                .collect();
            threshold_retrieve(&scores, doc, threshold)
        })
        .collect();
    let claim_verdict = novel_iff_any_undisclosed(&feature_results);
    ExaminationResult {
        record_id: record.record_id(),
        predicted_segmentation: segmentation,
        feature_results,
        claim_verdict,
    }
}

/// Embedding threshold examiner: same decision structure as
/// [`rouge_retrieval_examiner`] with cosine similarity over client vectors.
/// Passage embeddings are computed once per document through the cache.
pub fn embedding_retrieval_examiner(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    client: &dyn EmbeddingClient,
    threshold: f64,
    cache: &EmbeddingCache,
) -> Result<ExaminationResult, EmbeddingError> {
    let segmentation = heuristic_or_empty(&record.claim_text);
    let mut feature_results = Vec::with_capacity(segmentation.len());
    for feature in &segmentation.features {
        let passage_vectors = cache.passage_embeddings(client, doc)?;
        let feature_vector = client
            .embed(std::slice::from_ref(&feature.text))?
            .pop()
            .ok_or(EmbeddingError::WrongCount { expected: 1, got: 0 })?;
        let scores = passage_vectors
            .iter()
            .enumerate()
            .map(|(i, p)| Ok((i, cosine(&feature_vector, p)?)))
            .collect::<Result<Vec<_>, EmbeddingError>>()?;
        feature_results.push(threshold_retrieve(&scores, doc, threshold));
    }
    let claim_verdict = novel_iff_any_undisclosed(&feature_results);
    Ok(ExaminationResult {
        record_id: record.record_id(),
        predicted_segmentation: segmentation,
        feature_results,
        claim_verdict,
    })
}

/// Cosine similarity, with zero vectors scoring 0 rather than NaN.
fn cosine(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimensionMismatch { a: a.len(), b: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na * nb))
}

#[cfg(test)]
mod tests;
