//! Embedding client interface: an HTTP adapter for a JSON embeddings
//! endpoint, a deterministic feature-hashing client for offline use and
//! tests, and a per-document cache so passages are embedded once.

use crate::model::PriorArtDocument;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding endpoint unreachable: {0}")]
    Transport(String),
    #[error("embedding endpoint returned status {0}")]
    Status(u16),
    #[error("malformed embedding response: {0}")]
    Malformed(String),
    #[error("expected {expected} embeddings, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("cannot compare vectors of dimension {a} and {b}")]
    DimensionMismatch { a: usize, b: usize },
}

/// Maps texts to fixed-dimension vectors, one per input, in input order.
pub trait EmbeddingClient: Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError>;
}

/// Per-document passage embeddings, filled once and then shared. The fill
/// happens under the lock, so concurrent readers of the same document wait
/// instead of embedding twice.
#[derive(Default)]
pub struct EmbeddingCache {
    by_doc: Mutex<BTreeMap<String, Arc<Vec<Vec<f64>>>>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl EmbeddingCache {
    pub fn new() -> Self {
        EmbeddingCache::default()
    }

    /// Embeddings for every passage of `doc`, in passage order.
    pub fn passage_embeddings(
        &self,
        client: &dyn EmbeddingClient,
        doc: &PriorArtDocument,
    ) -> Result<Arc<Vec<Vec<f64>>>, EmbeddingError> {
        let mut by_doc = self.by_doc.lock().unwrap();
        if let Some(vectors) = by_doc.get(&doc.doc_id) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::clone(vectors));
        }
        self.misses.fetch_add(1, Ordering::Relaxed);
        let texts: Vec<String> = doc.passages.iter().map(|p| p.text.clone()).collect();
        let vectors = client.embed(&texts)?;
        if vectors.len() != texts.len() {
            return Err(EmbeddingError::WrongCount { expected: texts.len(), got: vectors.len() });
        }
        let vectors = Arc::new(vectors);
        by_doc.insert(doc.doc_id.clone(), Arc::clone(&vectors));
        Ok(vectors)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

/// Deterministic bag-of-words feature hashing: each token increments one of
/// `dim` buckets chosen by its digest, and the result is L2-normalized.
/// Identical texts embed identically; texts sharing most tokens land close.
pub struct HashEmbeddingClient {
    dim: usize,
    calls: AtomicUsize,
}

impl Default for HashEmbeddingClient {
    fn default() -> Self {
        HashEmbeddingClient::new(64)
    }
}

impl HashEmbeddingClient {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashEmbeddingClient { dim, calls: AtomicUsize::new(0) }
    }

    /// Number of embed calls served, for cache-contract tests.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    fn bucket(&self, token: &str) -> usize {
        let digest = Sha256::digest(token.as_bytes());
        let mut raw = [0u8; 8];
        raw.copy_from_slice(&digest[..8]);
        (u64::from_be_bytes(raw) % self.dim as u64) as usize
    }
}

impl EmbeddingClient for HashEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![0.0; self.dim];
                for token in crate::textsim::tokenize(text) {
                    v[self.bucket(&token)] += 1.0;
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    for x in &mut v {
                        *x /= norm;
                    }
                }
                v
            })
            .collect())
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    data: Vec<WireEmbedding>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    index: usize,
    embedding: Vec<f64>,
}

/// Orders wire embeddings by their declared index and checks the count.
fn arrange_embeddings(
    response: WireResponse,
    expected: usize,
) -> Result<Vec<Vec<f64>>, EmbeddingError> {
    if response.data.len() != expected {
        return Err(EmbeddingError::WrongCount { expected, got: response.data.len() });
    }
    let mut out: Vec<Option<Vec<f64>>> = vec![None; expected];
    for item in response.data {
        let slot = out
            .get_mut(item.index)
            .ok_or_else(|| EmbeddingError::Malformed(format!("index {} out of range", item.index)))?;
        if slot.replace(item.embedding).is_some() {
            return Err(EmbeddingError::Malformed(format!("duplicate index {}", item.index)));
        }
    }
    Ok(out.into_iter().map(|v| v.unwrap()).collect())
}

/// Client for a JSON embeddings endpoint: POST `{model, input: [text, ...]}`,
/// answered by `{data: [{index, embedding: [...]}, ...]}`. Transport faults,
/// 429 and 5xx responses are retried with exponential backoff.
pub struct HttpEmbeddingClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    attempts: u32,
    backoff: Duration,
}

impl HttpEmbeddingClient {
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpEmbeddingClient {
            agent: config.into(),
            url: url.into(),
            model: model.into(),
            api_key: None,
            attempts: 3,
            backoff: Duration::from_millis(200),
        }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_attempts(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn request_once(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let body = WireRequest { model: &self.model, input: texts };
        let mut response = request.send_json(&body).map_err(classify_ureq_error)?;
        let parsed: WireResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| EmbeddingError::Malformed(e.to_string()))?;
        arrange_embeddings(parsed, texts.len())
    }
}

fn classify_ureq_error(error: ureq::Error) -> EmbeddingError {
    match error {
        ureq::Error::StatusCode(code) => EmbeddingError::Status(code),
        other => EmbeddingError::Transport(other.to_string()),
    }
}

fn is_retryable(error: &EmbeddingError) -> bool {
    match error {
        EmbeddingError::Transport(_) => true,
        EmbeddingError::Status(code) => *code == 429 || *code >= 500,
        _ => false,
    }
}

impl EmbeddingClient for HttpEmbeddingClient {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, EmbeddingError> {
        let mut delay = self.backoff;
        let mut last = None;
        for attempt in 0..self.attempts {
            match self.request_once(texts) {
                Ok(vectors) => return Ok(vectors),
                Err(e) if is_retryable(&e) && attempt + 1 < self.attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt runs"))
    }
}

#[cfg(test)]
mod wire_tests {
    use super::*;

    #[test]
    fn arranges_embeddings_by_declared_index() {
        let response = WireResponse {
            data: vec![
                WireEmbedding { index: 1, embedding: vec![2.0] },
                WireEmbedding { index: 0, embedding: vec![1.0] },
            ],
        };
        assert_eq!(arrange_embeddings(response, 2).unwrap(), vec![vec![1.0], vec![2.0]]);
    }

    #[test]
    fn rejects_count_mismatch_and_bad_indices() {
        let short = WireResponse { data: vec![WireEmbedding { index: 0, embedding: vec![] }] };
        assert!(matches!(
            arrange_embeddings(short, 2),
            Err(EmbeddingError::WrongCount { expected: 2, got: 1 })
        ));
        let dup = WireResponse {
            data: vec![
                WireEmbedding { index: 0, embedding: vec![] },
                WireEmbedding { index: 0, embedding: vec![] },
            ],
        };
        assert!(matches!(arrange_embeddings(dup, 2), Err(EmbeddingError::Malformed(_))));
    }
}
