//! Word n-gram TF-IDF vectorization for the claim-only baseline features.

use super::tokenize;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TfidfError {
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
}

/// Fitted n-gram vocabulary with inverse document frequencies.
///
/// `terms[i]` and `idf[i]` describe axis `i` of every transformed vector. The
/// axis order is the selection order: document frequency descending, ties by
/// lexicographic term order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVocabulary {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
}

impl TfidfVocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Space-joined word n-grams of `tokens` for n in `1..=max_ngram`.
fn ngrams(tokens: &[String], max_ngram: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_ngram {
        if n > tokens.len() {
            break;
        }
        for window in tokens.windows(n) {
            out.push(window.join(" "));
        }
    }
    out
}

/// Fits a vocabulary: n-grams over [`tokenize`] output, keeping the
/// `max_features` highest document-frequency entries (ties broken by
/// lexicographic order), with idf = ln((1+N)/(1+df)) + 1.
pub fn tfidf_fit(
    corpus: &[String],
    max_ngram: usize,
    max_features: usize,
) -> Result<TfidfVocabulary, TfidfError> {
    if corpus.is_empty() {
        return Err(TfidfError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for doc in corpus {
        let tokens = tokenize(doc);
        let seen: BTreeSet<String> = ngrams(&tokens, max_ngram).into_iter().collect();
        for gram in seen {
            *df.entry(gram).or_insert(0) += 1;
        }
    }
    let mut by_df: Vec<(String, usize)> = df.into_iter().collect();
    // BTreeMap iteration is already lexicographic, so a stable sort on
    // descending df leaves ties in lexicographic order.
    by_df.sort_by_key(|(_, df)| std::cmp::Reverse(*df));
    by_df.truncate(max_features);

    let n = corpus.len() as f64;
    let (terms, idf) = by_df
        .into_iter()
        .map(|(term, df)| (term, ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0))
        .unzip();
    Ok(TfidfVocabulary { terms, idf })
}

/// Transforms one text: vocabulary term counts times idf, L2-normalized.
/// A text sharing no n-gram with the vocabulary maps to the zero vector.
pub fn tfidf_transform(vocab: &TfidfVocabulary, text: &str) -> Vec<f64> {
    let index: HashMap<&str, usize> =
        vocab.terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    transform_indexed(vocab, &index, text)
}

/// Batch variant of [`tfidf_transform`] that builds the term index once.
pub fn tfidf_transform_batch<'a>(
    vocab: &TfidfVocabulary,
    texts: impl IntoIterator<Item = &'a str>,
) -> Vec<Vec<f64>> {
    let index: HashMap<&str, usize> =
        vocab.terms.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    texts.into_iter().map(|t| transform_indexed(vocab, &index, t)).collect()
}

fn transform_indexed(
    vocab: &TfidfVocabulary,
    index: &HashMap<&str, usize>,
    text: &str,
) -> Vec<f64> {
    let max_ngram = vocab.terms.iter().map(|t| t.split(' ').count()).max().unwrap_or(1);
    let tokens = tokenize(text);
    let mut v = vec![0.0; vocab.len()];
    for gram in ngrams(&tokens, max_ngram) {
        if let Some(&i) = index.get(gram.as_str()) {
            v[i] += vocab.idf[i];
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fit_keeps_all_ngrams_of_a_tiny_corpus() {
        let vocab = tfidf_fit(&["a b".to_string()], 4, 500).unwrap();
        assert_eq!(vocab.terms, vec!["a", "a b", "b"]);
        // idf = ln((1+1)/(1+1)) + 1 = 1 for terms present in the single doc.
        assert!(vocab.idf.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn fit_caps_vocabulary_size() {
        let corpus: Vec<String> = (0..600).map(|i| format!("w{i:03}")).collect();
        let vocab = tfidf_fit(&corpus, 1, 500).unwrap();
        assert_eq!(vocab.len(), 500);
        // All dfs tie at 1, so the cap keeps the lexicographically smallest.
        assert_eq!(vocab.terms[0], "w000");
        assert_eq!(vocab.terms[499], "w499");
    }

    #[test]
    fn ubiquitous_terms_get_minimal_idf() {
        let corpus = vec![
            "shared alpha".to_string(),
            "shared beta".to_string(),
            "shared gamma".to_string(),
        ];
        let vocab = tfidf_fit(&corpus, 1, 500).unwrap();
        let shared_idx = vocab.terms.iter().position(|t| t == "shared").unwrap();
        let min = vocab.idf.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(vocab.idf[shared_idx], min);
        assert_eq!(vocab.terms[0], "shared");
    }

    #[test]
    fn fit_rejects_empty_corpus() {
        assert_eq!(tfidf_fit(&[], 4, 500).unwrap_err(), TfidfError::EmptyCorpus);
    }

    #[test]
    fn transform_matches_hand_computed_vectors() {
        let vocab = TfidfVocabulary {
            terms: vec!["a".into(), "b".into()],
            idf: vec![1.0, 1.0],
        };
        assert_eq!(tfidf_transform(&vocab, "nothing matches"), vec![0.0, 0.0]);
        assert_eq!(tfidf_transform(&vocab, "b"), vec![0.0, 1.0]);
        let v = tfidf_transform(&vocab, "a a b");
        let norm5 = 5.0f64.sqrt();
        assert!((v[0] - 2.0 / norm5).abs() < 1e-12);
        assert!((v[1] - 1.0 / norm5).abs() < 1e-12);
    }

    #[test]
    fn vocabulary_roundtrips_through_json() {
        let vocab = tfidf_fit(&["a b c".to_string(), "b c d".to_string()], 2, 500).unwrap();
        let json = serde_json::to_string(&vocab).unwrap();
        let back: TfidfVocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vocab);
    }

    proptest! {
        #[test]
        fn transform_norm_is_zero_or_one(texts in prop::collection::vec("[abcd ]{1,20}", 1..6),
                                         probe in "[abcdxy ]{0,20}") {
            if let Ok(vocab) = tfidf_fit(&texts, 3, 50) {
                let v = tfidf_transform(&vocab, &probe);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                prop_assert!(norm.abs() < 1e-9 || (norm - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn vocabulary_terms_are_unique_and_capped(texts in prop::collection::vec("[ab ]{1,12}", 1..8)) {
            let vocab = tfidf_fit(&texts, 4, 5).unwrap();
            prop_assert!(vocab.len() <= 5);
            let unique: BTreeSet<_> = vocab.terms.iter().collect();
            prop_assert_eq!(unique.len(), vocab.len());
        }
    }
}
