//! Runtime configuration: one struct per concern, TOML-compatible, with
//! every constant that encodes a protocol decision exposed as a documented
//! key. Values resolve lowest to highest as defaults, config file, then
//! NW_-prefixed environment variables; command-line flags sit on top and are
//! applied by the binary.

use crate::baselines::LogRegParams;
use crate::model::FeatureVerdict;
use crate::workflows::WorkflowConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown configuration key {0}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
}

/// Complete tool configuration. Any subset of keys may appear in the file;
/// missing ones keep their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Seed for every seeded stage unless a flag overrides it.
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub baselines: BaselinesConfig,
    pub metrics: MetricsConfig,
    pub workflow: WorkflowConfig,
    pub client: ClientConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Number of equal-width claim-length bins used when balancing labels.
    pub stratify_bins: usize,
    /// Train/validation/test fractions; must sum to 1.
    pub split_ratios: (f64, f64, f64),
    /// Balance labels within length bins before splitting.
    pub stratify_before_split: bool,
    /// Build the adversarial test subset during preparation.
    pub adversarial: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            stratify_bins: 100,
            split_ratios: (0.4, 0.1, 0.5),
            stratify_before_split: true,
            adversarial: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselinesConfig {
    /// ROUGE-L score a passage must exceed to count as retrieved.
    pub rouge_threshold: f64,
    /// Cosine similarity an embedded passage must exceed to count as retrieved.
    pub embedding_threshold: f64,
    /// Expected retrieved passages per feature for the random examiner.
    pub random_expected_passages: usize,
    /// Vocabulary size of the claim-only classifier.
    pub tfidf_max_features: usize,
    /// Longest word n-gram in the claim-only classifier vocabulary.
    pub tfidf_max_ngram: usize,
    /// Domain classes kept as indicator features; the rest are dropped.
    pub top_k_domains: usize,
    pub logreg: LogRegParams,
}

impl Default for BaselinesConfig {
    fn default() -> Self {
        BaselinesConfig {
            rouge_threshold: 0.4,
            embedding_threshold: 0.5,
            random_expected_passages: 2,
            tfidf_max_features: 500,
            tfidf_max_ngram: 4,
            top_k_domains: 8,
            logreg: LogRegParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    /// Feature verdicts that count as novel when scoring novel-feature
    /// identification.
    pub novel_feature_verdicts: BTreeSet<FeatureVerdict>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            novel_feature_verdicts: BTreeSet::from([
                FeatureVerdict::NotDisclosed,
                FeatureVerdict::PartiallyDisclosed,
            ]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    /// Chat-completions endpoint for the examiner workflows.
    pub chat_url: String,
    pub chat_model: String,
    /// Embeddings endpoint for the embedding baseline.
    pub embedding_url: String,
    pub embedding_model: String,
    /// Environment variable read for the bearer token; never stored.
    pub api_key_env: String,
    /// Attempts per request, covering retries on transport and 429/5xx.
    pub attempts: u32,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            chat_url: "http://127.0.0.1:8080/v1/chat/completions".to_string(),
            chat_model: "local-chat".to_string(),
            embedding_url: "http://127.0.0.1:8080/v1/embeddings".to_string(),
            embedding_model: "local-embed".to_string(),
            api_key_env: "NW_API_KEY".to_string(),
            attempts: 3,
        }
    }
}

impl Config {
    /// Reads a TOML config file; absent keys keep defaults.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        toml::from_str(&raw)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })
    }

    /// Loads the file when given, then applies NW_ environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => Config::from_file(p)?,
            None => Config::default(),
        };
        let pairs: Vec<(String, String)> =
            std::env::vars().filter(|(k, _)| k.starts_with("NW_")).collect();
        config.apply_overrides(&pairs)?;
        Ok(config)
    }

    /// Applies `NW_SECTION_FIELD=value` pairs. Unknown keys are errors so
    /// typos fail loudly instead of silently running with defaults. The API
    /// key variable itself is read by the client at request time, not here.
    pub fn apply_overrides(&mut self, pairs: &[(String, String)]) -> Result<(), ConfigError> {
        for (key, value) in pairs {
            if key == self.client.api_key_env.as_str() {
                continue;
            }
            let err = |reason: &str| ConfigError::InvalidValue {
                key: key.clone(),
                value: value.clone(),
                reason: reason.to_string(),
            };
            match key.as_str() {
                "NW_SEED" => self.seed = value.parse().map_err(|_| err("expected an integer"))?,
                "NW_DATASET_STRATIFY_BINS" => {
                    self.dataset.stratify_bins =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_DATASET_SPLIT_RATIOS" => {
                    let parts: Vec<f64> = value
                        .split(',')
                        .map(|p| p.trim().parse())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err("expected three comma-separated numbers"))?;
                    let [train, val, test] = parts[..] else {
                        return Err(err("expected three comma-separated numbers"));
                    };
                    self.dataset.split_ratios = (train, val, test);
                }
                "NW_DATASET_STRATIFY_BEFORE_SPLIT" => {
                    self.dataset.stratify_before_split = parse_bool(value).ok_or_else(|| err("expected true or false"))?
                }
                "NW_DATASET_ADVERSARIAL" => {
                    self.dataset.adversarial = parse_bool(value).ok_or_else(|| err("expected true or false"))?
                }
                "NW_BASELINES_ROUGE_THRESHOLD" => {
                    self.baselines.rouge_threshold =
                        value.parse().map_err(|_| err("expected a number"))?
                }
                "NW_BASELINES_EMBEDDING_THRESHOLD" => {
                    self.baselines.embedding_threshold =
                        value.parse().map_err(|_| err("expected a number"))?
                }
                "NW_BASELINES_RANDOM_EXPECTED_PASSAGES" => {
                    self.baselines.random_expected_passages =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_BASELINES_TFIDF_MAX_FEATURES" => {
                    self.baselines.tfidf_max_features =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_BASELINES_TFIDF_MAX_NGRAM" => {
                    self.baselines.tfidf_max_ngram =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_BASELINES_TOP_K_DOMAINS" => {
                    self.baselines.top_k_domains =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_BASELINES_LOGREG_L2" => {
                    self.baselines.logreg.l2 = value.parse().map_err(|_| err("expected a number"))?
                }
                "NW_BASELINES_LOGREG_ITERATIONS" => {
                    self.baselines.logreg.iterations =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_BASELINES_LOGREG_LEARNING_RATE" => {
                    self.baselines.logreg.learning_rate =
                        value.parse().map_err(|_| err("expected a number"))?
                }
                "NW_METRICS_NOVEL_FEATURE_VERDICTS" => {
                    let mut verdicts = BTreeSet::new();
                    for part in value.split(',') {
                        verdicts.insert(
                            parse_feature_verdict(part.trim()).ok_or_else(|| {
                                err("expected fully_disclosed, partially_disclosed, or not_disclosed")
                            })?,
                        );
                    }
                    self.metrics.novel_feature_verdicts = verdicts;
                }
                "NW_WORKFLOW_MODE" => {
                    self.workflow.mode = parse_enum(value).map_err(|reason| err(&reason))?
                }
                "NW_WORKFLOW_SEGMENTATION" => {
                    self.workflow.segmentation = parse_enum(value).map_err(|reason| err(&reason))?
                }
                "NW_WORKFLOW_INCLUDE_SUMMARIES" => {
                    self.workflow.include_summaries =
                        parse_bool(value).ok_or_else(|| err("expected true or false"))?
                }
                "NW_WORKFLOW_USE_GOLD_REFERENCES" => {
                    self.workflow.use_gold_references =
                        parse_bool(value).ok_or_else(|| err("expected true or false"))?
                }
                "NW_WORKFLOW_INCLUDE_PRIOR_ART" => {
                    self.workflow.include_prior_art =
                        parse_bool(value).ok_or_else(|| err("expected true or false"))?
                }
                "NW_WORKFLOW_SELF_CONSISTENCY_K" => {
                    self.workflow.self_consistency_k =
                        value.parse().map_err(|_| err("expected an integer"))?
                }
                "NW_WORKFLOW_TEMPERATURE" => {
                    self.workflow.temperature =
                        Some(value.parse().map_err(|_| err("expected a number"))?)
                }
                "NW_CLIENT_CHAT_URL" => self.client.chat_url = value.clone(),
                "NW_CLIENT_CHAT_MODEL" => self.client.chat_model = value.clone(),
                "NW_CLIENT_EMBEDDING_URL" => self.client.embedding_url = value.clone(),
                "NW_CLIENT_EMBEDDING_MODEL" => self.client.embedding_model = value.clone(),
                "NW_CLIENT_API_KEY_ENV" => self.client.api_key_env = value.clone(),
                "NW_CLIENT_ATTEMPTS" => {
                    self.client.attempts = value.parse().map_err(|_| err("expected an integer"))?
                }
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        Ok(())
    }
}

fn parse_bool(value: &str) -> Option<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

fn parse_feature_verdict(value: &str) -> Option<FeatureVerdict> {
    match value {
        "fully_disclosed" => Some(FeatureVerdict::FullyDisclosed),
        "partially_disclosed" => Some(FeatureVerdict::PartiallyDisclosed),
        "not_disclosed" => Some(FeatureVerdict::NotDisclosed),
        _ => None,
    }
}

/// Parses a snake_case enum value through its serde representation.
fn parse_enum<T: serde::de::DeserializeOwned>(value: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|e| e.to_string())
}
