//! Claim-only logistic regression. The feature vector deliberately sees
//! nothing but the claim text and its domain classes, so any accuracy it
//! reaches measures shortcut signal in the data, not examination skill.

use crate::claimtext::segment_claim_heuristic;
use crate::model::{ClaimVerdict, NoveltyLabel};
use crate::textsim::{tfidf_fit, tfidf_transform, tokenize, TfidfError, TfidfVocabulary};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("training needs at least two examples")]
    TooFewExamples,
    #[error("training needs both classes present")]
    SingleClass,
    #[error("feature vectors have inconsistent dimensionality")]
    RaggedInput,
    #[error("vector has {got} dimensions, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Vocabulary(#[from] TfidfError),
}

pub type ClaimFeatureVector = Vec<f64>;

const PUNCT_NAMES: [&str; 5] =
    ["punct_comma", "punct_semicolon", "punct_colon", "punct_period", "punct_paren"];

/// Fitted input space of the claim-only classifier: the top domain classes by
/// training frequency plus a TF-IDF vocabulary. Serialized with the model so
/// feature order survives a round trip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub domain_classes: Vec<String>,
    pub vocab: TfidfVocabulary,
}

impl FeatureSpace {
    /// Fits on training claims: `domain_lists` holds each claim's class
    /// codes; the `top_k_domains` most frequent (ties lexicographic) become
    /// indicator features.
    pub fn fit(
        claims: &[String],
        domain_lists: &[Vec<String>],
        top_k_domains: usize,
        max_ngram: usize,
        max_tfidf_features: usize,
    ) -> Result<FeatureSpace, BaselineError> {
        let vocab = tfidf_fit(claims, max_ngram, max_tfidf_features)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for classes in domain_lists {
            for class in classes {
                *counts.entry(class).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(top_k_domains);
        let domain_classes = ranked.into_iter().map(|(name, _)| name.to_string()).collect();
        Ok(FeatureSpace { domain_classes, vocab })
    }

    pub fn dimensionality(&self) -> usize {
        2 + PUNCT_NAMES.len() + self.domain_classes.len() + self.vocab.len()
    }

    /// Stable names, index-aligned with [`extract_claim_features`] output.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = vec!["word_count".to_string(), "feature_count".to_string()];
        names.extend(PUNCT_NAMES.iter().map(|n| n.to_string()));
        names.extend(self.domain_classes.iter().map(|c| format!("domain:{c}")));
        names.extend(self.vocab.terms.iter().map(|t| format!("tfidf:{t}")));
        names
    }
}

/// Builds the claim-only vector: word count, heuristic feature count, five
/// punctuation counts, domain indicators, then the TF-IDF block.
pub fn extract_claim_features(
    claim_text: &str,
    domain_classes: &[String],
    space: &FeatureSpace,
) -> ClaimFeatureVector {
    let mut v = Vec::with_capacity(space.dimensionality());
    v.push(tokenize(claim_text).len() as f64);
    let feature_count = segment_claim_heuristic(claim_text).map(|s| s.len()).unwrap_or(0);
    v.push(feature_count as f64);
    for chars in [&[','][..], &[';'], &[':'], &['.'], &['(', ')']] {
        v.push(claim_text.chars().filter(|c| chars.contains(c)).count() as f64);
    }
    for class in &space.domain_classes {
        v.push(if domain_classes.iter().any(|c| c == class) { 1.0 } else { 0.0 });
    }
    v.extend(tfidf_transform(&space.vocab, claim_text));
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegParams {
    pub l2: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams { l2: 1.0, iterations: 500, learning_rate: 0.1, seed: 0 }
    }
}

/// Weights over standardized inputs. Scaler entries with zero variance get
/// stddev 1, so constant features pass through as exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub params: LogRegParams,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Full-batch gradient descent on L2-regularized mean logistic loss over
/// standardized features. Deterministic: weights start at zero and the data
/// order is whatever the caller passed.
pub fn train_logreg(
    vectors: &[ClaimFeatureVector],
    labels: &[NoveltyLabel],
    feature_names: &[String],
    params: &LogRegParams,
) -> Result<LogRegModel, BaselineError> {
    let n = vectors.len();
    if n < 2 {
        return Err(BaselineError::TooFewExamples);
    }
    assert_eq!(n, labels.len(), "one label per vector");
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(BaselineError::SingleClass);
    }
    let dim = feature_names.len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(BaselineError::RaggedInput);
    }

    let mut means = vec![0.0; dim];
    for v in vectors {
        for (m, x) in means.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; dim];
    for v in vectors {
        for ((s, m), x) in stds.iter_mut().zip(&means).zip(v) {
            *s += (x - m) * (x - m);
        }
    }
    for s in &mut stds {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }

    let scaled: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&means).zip(&stds).map(|((x, m), s)| (x - m) / s).collect())
        .collect();
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if *l == NoveltyLabel::Novel { 1.0 } else { 0.0 })
        .collect();

    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    for _ in 0..params.iterations {
        let mut grad_w = vec![0.0; dim];
        let mut grad_b = 0.0;
        for (x, yi) in scaled.iter().zip(&y) {
            let p = sigmoid(weights.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bias);
            let err = p - yi;
            for (g, xi) in grad_w.iter_mut().zip(x) {
                *g += err * xi;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= params.learning_rate * (g / n as f64 + params.l2 * *w / n as f64);
        }
        bias -= params.learning_rate * grad_b / n as f64;
    }

    Ok(LogRegModel {
        feature_names: feature_names.to_vec(),
        weights,
        bias,
        means,
        stds,
        params: *params,
    })
}

/// Sigmoid probability of Novel over the scaled input; the verdict is Novel
/// strictly above 0.5, so an exact tie goes to NotNovel.
pub fn predict_logreg(
    model: &LogRegModel,
    vector: &ClaimFeatureVector,
) -> Result<(ClaimVerdict, f64), BaselineError> {
    if vector.len() != model.weights.len() {
        return Err(BaselineError::DimensionMismatch {
            expected: model.weights.len(),
            got: vector.len(),
        });
    }
    let z: f64 = model
        .weights
        .iter()
        .zip(vector)
        .zip(model.means.iter().zip(&model.stds))
        .map(|((w, x), (m, s))| w * (x - m) / s)
        .sum::<f64>()
        + model.bias;
    let p = sigmoid(z);
    let verdict = if p > 0.5 { ClaimVerdict::Novel } else { ClaimVerdict::NotNovel };
    Ok((verdict, p))
}

/// The `k` largest coefficients by magnitude, ties broken by feature name.
pub fn top_coefficients(model: &LogRegModel, k: usize) -> Vec<(String, f64)> {
    let mut pairs: Vec<(String, f64)> = model
        .feature_names
        .iter()
        .cloned()
        .zip(model.weights.iter().copied())
        .collect();
    pairs.sort_by(|a, b| {
        b.1.abs().partial_cmp(&a.1.abs()).unwrap().then_with(|| a.0.cmp(&b.0))
    });
    pairs.truncate(k);
    pairs
}
