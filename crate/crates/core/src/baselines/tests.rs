use super::*;
use crate::dataset::{generate_synthetic_corpus, SynthOptions};
use crate::metrics::eval_retrieval_feature_level;
use crate::model::{
    ClaimVersion, ExaminationRecord, NoveltyLabel, Passage, PassageId, PriorArtDocument,
};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn record(claim: &str, label: NoveltyLabel) -> ExaminationRecord {
    ExaminationRecord {
        application_id: "APP".to_string(),
        claim_version: ClaimVersion::Initial,
        claim_text: claim.to_string(),
        novelty_label: label,
        prior_art_doc_id: "DOC".to_string(),
        gold_segmentation: None,
        gold_references: None,
        added_spans: None,
        domain_classes: Vec::new(),
    }
}

fn doc(passages: &[(&str, PassageId)]) -> PriorArtDocument {
    PriorArtDocument {
        doc_id: "DOC".to_string(),
        passages: passages
            .iter()
            .map(|(text, id)| Passage { id: *id, text: text.to_string() })
            .collect(),
    }
}

fn plain_doc(texts: &[&str]) -> PriorArtDocument {
    let passages: Vec<(&str, PassageId)> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| (*t, PassageId::Paragraph(i as u32 + 1)))
        .collect();
    doc(&passages)
}

#[test]
fn random_examiner_is_seed_deterministic() {
    let record = record("intro: heat the part; cool the part", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["alpha", "beta", "gamma", "delta"]);
    let a = random_examiner(&record, &doc, 2, 7);
    let b = random_examiner(&record, &doc, 2, 7);
    assert_eq!(a, b);
}

#[test]
fn random_examiner_claim_verdicts_are_near_uniform() {
    let record = record("a; b", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["alpha", "beta", "gamma", "delta", "epsilon"]);
    let runs = 10_000;
    let mut novel = 0usize;
    let mut retrieved = 0usize;
    let mut features = 0usize;
    for seed in 0..runs {
        let result = random_examiner(&record, &doc, 2, seed as u64);
        if result.claim_verdict == crate::model::ClaimVerdict::Novel {
            novel += 1;
        }
        for fr in &result.feature_results {
            retrieved += fr.passages.len();
            features += 1;
        }
    }
    let fraction = novel as f64 / runs as f64;
    assert!((fraction - 0.5).abs() < 0.02, "novel fraction {fraction}");
    let mean_retrieved = retrieved as f64 / features as f64;
    assert!((mean_retrieved - 2.0).abs() < 0.1, "mean retrieved {mean_retrieved}");
}

#[test]
fn random_examiner_clamps_oversized_expectation() {
    let record = record("a; b", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["alpha", "beta"]);
    let result = random_examiner(&record, &doc, 100, 3);
    for fr in &result.feature_results {
        assert_eq!(fr.passages.len(), 2);
    }
}

#[test]
fn rouge_examiner_retrieves_verbatim_copy_at_rank_one() {
    let record =
        record("intro: a tubular housing supports the rotor; unrelated text", NoveltyLabel::NotNovel);
    let doc = plain_doc(&[
        "completely different words here",
        "a tubular housing supports the rotor",
        "more unrelated filler content",
    ]);
    let result = rouge_retrieval_examiner(&record, &doc, 0.4);
    let fr = &result.feature_results[1];
    assert_eq!(fr.passages.first(), Some(&PassageId::Paragraph(2)));
    assert_eq!(fr.verdict, crate::model::FeatureVerdict::FullyDisclosed);
}

#[test]
fn rouge_examiner_with_no_shared_tokens_declares_novel() {
    let record = record("alpha beta; gamma delta", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["one two three", "four five six"]);
    let result = rouge_retrieval_examiner(&record, &doc, 0.4);
    for fr in &result.feature_results {
        assert!(fr.passages.is_empty());
        assert_eq!(fr.verdict, crate::model::FeatureVerdict::NotDisclosed);
    }
    assert_eq!(result.claim_verdict, crate::model::ClaimVerdict::Novel);
}

#[test]
fn rouge_examiner_ranks_by_descending_score() {
    let record = record("a b c d e f g h", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["a b c d e", "a b c d e f g h", "a b c d e f"]);
    let result = rouge_retrieval_examiner(&record, &doc, 0.4);
    assert_eq!(
        result.feature_results[0].passages,
        vec![PassageId::Paragraph(2), PassageId::Paragraph(3), PassageId::Paragraph(1)]
    );
}

#[test]
fn rouge_recall_beats_random_on_planted_paraphrases() {
    let corpus = generate_synthetic_corpus(41, 12, &SynthOptions::default());
    let docs: BTreeMap<&str, &PriorArtDocument> =
        corpus.documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut rouge_recall = 0.0;
    let mut random_recall = 0.0;
    let mut n = 0usize;
    for record in corpus.records.iter().filter(|r| r.novelty_label == NoveltyLabel::NotNovel) {
        let doc = docs[record.prior_art_doc_id.as_str()];
        let rouge = rouge_retrieval_examiner(record, doc, 0.4);
        let random = random_examiner(record, doc, 2, 17 + n as u64);
        rouge_recall += eval_retrieval_feature_level(&rouge, record, doc).unwrap().mean.r;
        random_recall += eval_retrieval_feature_level(&random, record, doc).unwrap().mean.r;
        n += 1;
    }
    assert!(n > 0);
    assert!(
        rouge_recall > random_recall,
        "rouge {rouge_recall} vs random {random_recall} over {n} records"
    );
}

#[test]
fn embedding_examiner_finds_verbatim_copy_with_hash_client() {
    let record = record("intro: a porous membrane seals the conduit", NoveltyLabel::NotNovel);
    let doc = plain_doc(&[
        "nothing relevant in this paragraph at all",
        "a porous membrane seals the conduit",
    ]);
    let client = HashEmbeddingClient::default();
    let cache = EmbeddingCache::new();
    let result = embedding_retrieval_examiner(&record, &doc, &client, 0.5, &cache).unwrap();
    let fr = &result.feature_results[1];
    assert_eq!(fr.passages.first(), Some(&PassageId::Paragraph(2)));
    assert_eq!(fr.verdict, crate::model::FeatureVerdict::FullyDisclosed);
}

struct OrthogonalClient;

impl EmbeddingClient for OrthogonalClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        // One-hot on a stable per-text slot: distinct texts are orthogonal.
        Ok(texts
            .iter()
            .map(|t| {
                let slot = (t.len() * 31 + t.bytes().map(usize::from).sum::<usize>()) % 16;
                let mut v = vec![0.0; 16];
                v[slot] = 1.0;
                v
            })
            .collect())
    }
}

#[test]
fn embedding_examiner_with_orthogonal_vectors_declares_novel() {
    let record = record("first feature; second feature", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["passage one simple", "entirely different passage two longer"]);
    let cache = EmbeddingCache::new();
    let result = embedding_retrieval_examiner(&record, &doc, &OrthogonalClient, 0.5, &cache).unwrap();
    for fr in &result.feature_results {
        assert!(fr.passages.is_empty());
    }
    assert_eq!(result.claim_verdict, crate::model::ClaimVerdict::Novel);
}

#[test]
fn embedding_cache_fills_once_per_document() {
    let record = record("intro: one; two; three", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["alpha", "beta", "gamma", "delta"]);
    let client = HashEmbeddingClient::default();
    let cache = EmbeddingCache::new();
    let result = embedding_retrieval_examiner(&record, &doc, &client, 0.5, &cache).unwrap();
    let features = result.feature_results.len();
    assert_eq!(features, 4);
    // One batched call for the document plus one call per feature text.
    assert_eq!(client.calls(), features + 1);
    assert_eq!(cache.misses(), 1);
    assert_eq!(cache.hits(), features - 1);

    // A second record against the same document reuses the fill.
    let record2 = record2_against_same_doc();
    embedding_retrieval_examiner(&record2, &doc, &client, 0.5, &cache).unwrap();
    assert_eq!(cache.misses(), 1);
}

fn record2_against_same_doc() -> ExaminationRecord {
    record("another claim; with features", NoveltyLabel::NotNovel)
}

struct RaggedClient;

impl EmbeddingClient for RaggedClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        Ok(texts.iter().enumerate().map(|(i, _)| vec![1.0; 3 + i % 2]).collect())
    }
}

#[test]
fn embedding_examiner_surfaces_dimension_mismatch() {
    let record = record("only feature", NoveltyLabel::NotNovel);
    let doc = plain_doc(&["alpha", "beta"]);
    let cache = EmbeddingCache::new();
    let err = embedding_retrieval_examiner(&record, &doc, &RaggedClient, 0.5, &cache).unwrap_err();
    assert!(matches!(err, EmbeddingError::DimensionMismatch { .. }));
}

fn toy_space() -> FeatureSpace {
    FeatureSpace::fit(
        &["heat the part".to_string(), "cool the part".to_string()],
        &[vec!["A61B".to_string()], vec!["G06F".to_string()]],
        50,
        2,
        100,
    )
    .unwrap()
}

#[test]
fn extracted_features_count_words_features_and_punctuation() {
    let space = toy_space();
    let names = space.feature_names();
    let v = extract_claim_features("a; b", &[], &space);
    assert_eq!(v.len(), space.dimensionality());
    assert_eq!(v[names.iter().position(|n| n == "word_count").unwrap()], 2.0);
    assert_eq!(v[names.iter().position(|n| n == "feature_count").unwrap()], 2.0);

    let v = extract_claim_features("step one; step two; wherein X (1)", &["A61B".to_string()], &space);
    assert_eq!(v[names.iter().position(|n| n == "punct_semicolon").unwrap()], 2.0);
    assert_eq!(v[names.iter().position(|n| n == "punct_paren").unwrap()], 2.0);
    assert_eq!(v[names.iter().position(|n| n == "domain:A61B").unwrap()], 1.0);
    assert_eq!(v[names.iter().position(|n| n == "domain:G06F").unwrap()], 0.0);

    let no_domains = extract_claim_features("a; b", &[], &space);
    for class in &space.domain_classes {
        let idx = names.iter().position(|n| n == &format!("domain:{class}")).unwrap();
        assert_eq!(no_domains[idx], 0.0);
    }
}

fn toy_training() -> (Vec<ClaimFeatureVector>, Vec<NoveltyLabel>, Vec<String>) {
    // Feature 0 separates the classes; feature 1 is constant zero.
    let vectors = vec![
        vec![0.0, 0.0],
        vec![0.2, 0.0],
        vec![0.8, 0.0],
        vec![1.0, 0.0],
    ];
    let labels = vec![
        NoveltyLabel::NotNovel,
        NoveltyLabel::NotNovel,
        NoveltyLabel::Novel,
        NoveltyLabel::Novel,
    ];
    (vectors, labels, vec!["signal".to_string(), "dead".to_string()])
}

#[test]
fn logreg_fits_separable_data_perfectly() {
    let (vectors, labels, names) = toy_training();
    let model = train_logreg(&vectors, &labels, &names, &LogRegParams::default()).unwrap();
    for (v, label) in vectors.iter().zip(&labels) {
        let (verdict, _) = predict_logreg(&model, v).unwrap();
        assert_eq!(NoveltyLabel::from(verdict), *label);
    }
}

#[test]
fn logreg_leaves_constant_features_at_zero_weight() {
    let (vectors, labels, names) = toy_training();
    let model = train_logreg(&vectors, &labels, &names, &LogRegParams::default()).unwrap();
    assert!(model.weights[1].abs() < 1e-6, "dead weight {}", model.weights[1]);
}

#[test]
fn logreg_rejects_degenerate_training_sets() {
    let names = vec!["x".to_string()];
    let err = train_logreg(&[vec![1.0]], &[NoveltyLabel::Novel], &names, &LogRegParams::default());
    assert_eq!(err.unwrap_err(), BaselineError::TooFewExamples);
    let err = train_logreg(
        &[vec![1.0], vec![2.0]],
        &[NoveltyLabel::Novel, NoveltyLabel::Novel],
        &names,
        &LogRegParams::default(),
    );
    assert_eq!(err.unwrap_err(), BaselineError::SingleClass);
}

#[test]
fn logreg_tie_probability_goes_to_not_novel() {
    let model = LogRegModel {
        feature_names: vec!["x".to_string()],
        weights: vec![0.0],
        bias: 0.0,
        means: vec![0.0],
        stds: vec![1.0],
        params: LogRegParams::default(),
    };
    let (verdict, p) = predict_logreg(&model, &vec![3.0]).unwrap();
    assert_eq!(p, 0.5);
    assert_eq!(verdict, crate::model::ClaimVerdict::NotNovel);
}

#[test]
fn logreg_probability_is_monotone_in_a_positive_weight() {
    let model = LogRegModel {
        feature_names: vec!["word_count".to_string()],
        weights: vec![1.0],
        bias: 0.0,
        means: vec![50.0],
        stds: vec![10.0],
        params: LogRegParams::default(),
    };
    let probabilities: Vec<f64> = (0..10)
        .map(|i| predict_logreg(&model, &vec![i as f64 * 20.0]).unwrap().1)
        .collect();
    for pair in probabilities.windows(2) {
        assert!(pair[0] < pair[1]);
    }
}

#[test]
fn logreg_survives_serialization_round_trip() {
    let (vectors, labels, names) = toy_training();
    let model = train_logreg(&vectors, &labels, &names, &LogRegParams::default()).unwrap();
    let json = serde_json::to_string(&model).unwrap();
    let back: LogRegModel = serde_json::from_str(&json).unwrap();
    assert_eq!(back, model);
    for v in &vectors {
        assert_eq!(predict_logreg(&back, v).unwrap(), predict_logreg(&model, v).unwrap());
    }
}

#[test]
fn logreg_dimension_mismatch_is_reported() {
    let (vectors, labels, names) = toy_training();
    let model = train_logreg(&vectors, &labels, &names, &LogRegParams::default()).unwrap();
    let err = predict_logreg(&model, &vec![1.0]).unwrap_err();
    assert_eq!(err, BaselineError::DimensionMismatch { expected: 2, got: 1 });
}

#[test]
fn top_coefficients_rank_by_magnitude_with_name_ties() {
    let model = LogRegModel {
        feature_names: vec!["b".to_string(), "a".to_string(), "c".to_string()],
        weights: vec![-2.0, 0.5, 2.0],
        bias: 0.0,
        means: vec![0.0; 3],
        stds: vec![1.0; 3],
        params: LogRegParams::default(),
    };
    let top = top_coefficients(&model, 10);
    assert_eq!(
        top,
        vec![("b".to_string(), -2.0), ("c".to_string(), 2.0), ("a".to_string(), 0.5)]
    );
    assert!(top_coefficients(&model, 0).is_empty());
    assert_eq!(top_coefficients(&model, 2).len(), 2);
}

proptest! {
    #[test]
    fn prop_threshold_examiner_verdicts_aggregate_exactly(
        claim in "[ab c;]{1,40}",
        passages in prop::collection::vec("[abc ]{0,12}", 1..5),
        threshold in 0.0f64..1.0,
    ) {
        let record = record(&claim, NoveltyLabel::NotNovel);
        let texts: Vec<&str> = passages.iter().map(String::as_str).collect();
        let doc = plain_doc(&texts);
        let result = rouge_retrieval_examiner(&record, &doc, threshold);
        let any_undisclosed = result
            .feature_results
            .iter()
            .any(|fr| fr.verdict == crate::model::FeatureVerdict::NotDisclosed);
        let expected = if any_undisclosed {
            crate::model::ClaimVerdict::Novel
        } else {
            crate::model::ClaimVerdict::NotNovel
        };
        prop_assert_eq!(result.claim_verdict, expected);
        for fr in &result.feature_results {
            let mut seen = std::collections::BTreeSet::new();
            for id in &fr.passages {
                prop_assert!(seen.insert(*id), "duplicate passage in ranking");
            }
            prop_assert_eq!(
                fr.passages.is_empty(),
                fr.verdict == crate::model::FeatureVerdict::NotDisclosed
            );
        }
    }

    #[test]
    fn prop_logreg_verdicts_invariant_under_input_rescaling(
        raw in prop::collection::vec(prop::collection::vec(-4.0f64..4.0, 3), 4..20),
        flips in prop::collection::vec(prop::bool::ANY, 20),
    ) {
        let labels: Vec<NoveltyLabel> = raw
            .iter()
            .enumerate()
            .map(|(i, _)| if flips[i] { NoveltyLabel::Novel } else { NoveltyLabel::NotNovel })
            .collect();
        prop_assume!(labels.contains(&NoveltyLabel::Novel));
        prop_assume!(labels.contains(&NoveltyLabel::NotNovel));
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let params = LogRegParams { iterations: 50, ..LogRegParams::default() };
        let base = train_logreg(&raw, &labels, &names, &params).unwrap();

        // Doubling is exact in floating point, so standardization cancels the
        // scale bit for bit and the verdicts cannot move.
        let doubled: Vec<ClaimFeatureVector> =
            raw.iter().map(|v| v.iter().map(|x| x * 2.0).collect()).collect();
        let rescaled = train_logreg(&doubled, &labels, &names, &params).unwrap();
        for (a, b) in raw.iter().zip(&doubled) {
            let (va, _) = predict_logreg(&base, a).unwrap();
            let (vb, _) = predict_logreg(&rescaled, b).unwrap();
            prop_assert_eq!(va, vb);
        }
    }
}
