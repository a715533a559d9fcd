//! Examination workflows over a chat-endpoint client: a single-step variant
//! that asks for the whole structured examination at once, and a hierarchical
//! variant that segments the claim, examines each feature separately, and
//! aggregates a claim verdict. Both sanitize model citations against the
//! actual prior art document and account for every call in a trace.

mod client;

pub use client::{
    prompt_digest, ChatMessage, ClientError, Completion, ExaminerClient, HttpChatClient,
    OutputSchema, ScriptFixture, ScriptedClient, Usage,
};

use crate::claimtext::{locate_feature_spans, parse_reference_string, segment_claim_heuristic};
use crate::model::{
    ClaimVerdict, ExaminationRecord, ExaminationResult, FeatureResult, FeatureVerdict, PassageId,
    PriorArtDocument, Segmentation,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("invalid workflow configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error("structured output failed validation after a repair attempt: {0}")]
    Schema(String),
    #[error("claim produced no usable features")]
    NoFeatures,
    #[error("all {0} self-consistency runs failed")]
    AllRunsFailed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowMode {
    SingleStep,
    Hierarchical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentationMode {
    Heuristic,
    Llm,
}

/// Workflow switches, covering the published ablations: summaries on or off,
/// oracle (gold) references for aggregation, prior art omitted entirely in
/// single-step mode, and self-consistency sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    pub mode: WorkflowMode,
    pub segmentation: SegmentationMode,
    pub include_summaries: bool,
    pub use_gold_references: bool,
    pub include_prior_art: bool,
    pub self_consistency_k: usize,
    /// None picks the default: 0 for single runs, 0.7 when sampling.
    pub temperature: Option<f64>,
    pub seed: u64,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        WorkflowConfig {
            mode: WorkflowMode::SingleStep,
            segmentation: SegmentationMode::Heuristic,
            include_summaries: true,
            use_gold_references: false,
            include_prior_art: true,
            self_consistency_k: 1,
            temperature: None,
            seed: 0,
        }
    }
}

impl WorkflowConfig {
    pub fn validate(&self) -> Result<(), WorkflowError> {
        if self.self_consistency_k == 0 {
            return Err(WorkflowError::Config("self_consistency_k must be at least 1".into()));
        }
        if self.self_consistency_k.is_multiple_of(2) {
            return Err(WorkflowError::Config(
                "self_consistency_k must be odd so verdict votes cannot tie".into(),
            ));
        }
        if self.use_gold_references && self.mode != WorkflowMode::Hierarchical {
            return Err(WorkflowError::Config(
                "use_gold_references requires hierarchical mode".into(),
            ));
        }
        if !self.include_prior_art && self.mode != WorkflowMode::SingleStep {
            return Err(WorkflowError::Config(
                "include_prior_art can only be disabled in single_step mode".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_temperature(&self) -> f64 {
        self.temperature.unwrap_or(if self.self_consistency_k > 1 { 0.7 } else { 0.0 })
    }
}

/// One completed client call, recorded for cost accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: String,
    pub prompt_digest: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub latency_ms: u64,
}

/// Everything that happened while producing one result. Merging traces adds
/// counters and concatenates lists; workflows always merge in feature order,
/// so equal inputs give equal traces regardless of execution interleaving.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowTrace {
    pub calls: Vec<CallRecord>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Cited passage ids that did not resolve in the document.
    pub dropped_ids: usize,
    /// Model feature texts that could not be anchored in the claim.
    pub dropped_features: usize,
    pub schema_repairs: usize,
    /// Indexes (into the attempted segmentation) of features whose
    /// examination call failed; they are excluded from the result.
    pub errored_features: Vec<usize>,
    pub notes: Vec<String>,
}

impl WorkflowTrace {
    pub fn merge(&mut self, other: WorkflowTrace) {
        self.calls.extend(other.calls);
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.dropped_ids += other.dropped_ids;
        self.dropped_features += other.dropped_features;
        self.schema_repairs += other.schema_repairs;
        self.errored_features.extend(other.errored_features);
        self.notes.extend(other.notes);
    }
}

/// Renders passages one per line, each prefixed with its bracketed id, so the
/// model can cite passages with strings `parse_reference_string` understands.
pub fn render_document(doc: &PriorArtDocument) -> String {
    doc.passages
        .iter()
        .map(|p| format!("[{}] {}", p.id, p.text))
        .collect::<Vec<_>>()
        .join("\n")
}

fn verdict_label(verdict: FeatureVerdict) -> &'static str {
    match verdict {
        FeatureVerdict::FullyDisclosed => "fully_disclosed",
        FeatureVerdict::PartiallyDisclosed => "partially_disclosed",
        FeatureVerdict::NotDisclosed => "not_disclosed",
    }
}

const CITATION_RULE: &str = "Cite passages by the identifier inside their brackets, \
for example \"par 12\", \"claim 3\", or \"abstract\".";

pub fn segmentation_schema() -> OutputSchema {
    OutputSchema {
        name: "segmentation".to_string(),
        schema: json!({
            "type": "object",
            "properties": {
                "features": {"type": "array", "items": {"type": "string"}}
            },
            "required": ["features"],
            "additionalProperties": false
        }),
    }
}

pub fn feature_examination_schema() -> OutputSchema {
    OutputSchema {
        name: "feature_examination".to_string(),
        schema: json!({
            "type": "object",
            "properties": {
                "passages": {"type": "array", "items": {"type": "string"}},
                "verdict": {"enum": ["fully_disclosed", "partially_disclosed", "not_disclosed"]},
                "summary": {"type": "string"}
            },
            "required": ["passages", "verdict"],
            "additionalProperties": false
        }),
    }
}

pub fn claim_aggregation_schema() -> OutputSchema {
    OutputSchema {
        name: "claim_aggregation".to_string(),
        schema: json!({
            "type": "object",
            "properties": {
                "verdict": {"enum": ["novel", "not_novel"]}
            },
            "required": ["verdict"],
            "additionalProperties": false
        }),
    }
}

pub fn single_step_schema() -> OutputSchema {
    OutputSchema {
        name: "single_step_examination".to_string(),
        schema: json!({
            "type": "object",
            "properties": {
                "features": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "text": {"type": "string"},
                            "passages": {"type": "array", "items": {"type": "string"}},
                            "verdict": {
                                "enum": ["fully_disclosed", "partially_disclosed", "not_disclosed"]
                            }
                        },
                        "required": ["text", "passages", "verdict"],
                        "additionalProperties": false
                    }
                },
                "claim_verdict": {"enum": ["novel", "not_novel"]}
            },
            "required": ["features", "claim_verdict"],
            "additionalProperties": false
        }),
    }
}

#[derive(Deserialize)]
struct WireSegmentation {
    features: Vec<String>,
}

#[derive(Deserialize)]
struct WireFeatureExamination {
    passages: Vec<String>,
    verdict: FeatureVerdict,
    #[serde(default)]
    summary: Option<String>,
}

#[derive(Deserialize)]
struct WireAggregation {
    verdict: ClaimVerdict,
}

#[derive(Deserialize)]
struct WireSingleStep {
    features: Vec<WireSingleStepFeature>,
    claim_verdict: ClaimVerdict,
}

#[derive(Deserialize)]
struct WireSingleStepFeature {
    text: String,
    passages: Vec<String>,
    verdict: FeatureVerdict,
}

/// Calls the client and validates the value against `T`. On a validation
/// failure the model gets exactly one repair prompt carrying the error, then
/// the call is reported as a schema failure.
fn call_structured<T: serde::de::DeserializeOwned>(
    client: &dyn ExaminerClient,
    messages: &[ChatMessage],
    schema: &OutputSchema,
    temperature: f64,
    seed: u64,
    trace: &mut WorkflowTrace,
) -> Result<T, WorkflowError> {
    let completion = timed_call(client, messages, schema, temperature, seed, trace)?;
    match serde_json::from_value::<T>(completion.value.clone()) {
        Ok(parsed) => Ok(parsed),
        Err(first_error) => {
            trace.schema_repairs += 1;
            let mut repair = messages.to_vec();
            repair.push(ChatMessage::assistant(completion.value.to_string()));
            repair.push(ChatMessage::user(format!(
                "That output failed validation: {first_error}. \
                 Respond again with JSON matching the {} schema exactly.",
                schema.name
            )));
            let second = timed_call(client, &repair, schema, temperature, seed, trace)?;
            serde_json::from_value::<T>(second.value)
                .map_err(|e| WorkflowError::Schema(e.to_string()))
        }
    }
}

fn timed_call(
    client: &dyn ExaminerClient,
    messages: &[ChatMessage],
    schema: &OutputSchema,
    temperature: f64,
    seed: u64,
    trace: &mut WorkflowTrace,
) -> Result<Completion, WorkflowError> {
    let started = Instant::now();
    let completion = client.complete(messages, schema, temperature, seed)?;
    trace.calls.push(CallRecord {
        kind: schema.name.clone(),
        prompt_digest: prompt_digest(messages),
        prompt_tokens: completion.usage.prompt_tokens,
        completion_tokens: completion.usage.completion_tokens,
        latency_ms: started.elapsed().as_millis() as u64,
    });
    trace.prompt_tokens += completion.usage.prompt_tokens;
    trace.completion_tokens += completion.usage.completion_tokens;
    Ok(completion)
}

/// Expands citation strings and keeps ids that resolve in the document,
/// preserving first-mention order. Unparseable strings and unresolvable ids
/// are counted into `dropped`.
fn sanitize_citations(
    raw: &[String],
    doc: &PriorArtDocument,
    trace: &mut WorkflowTrace,
) -> Vec<PassageId> {
    let mut kept = Vec::new();
    let mut seen = BTreeSet::new();
    for citation in raw {
        let Ok(ids) = parse_reference_string(citation) else {
            trace.dropped_ids += 1;
            trace.notes.push(format!("unparseable citation {citation:?}"));
            continue;
        };
        for id in ids {
            if !doc.contains(id) {
                trace.dropped_ids += 1;
                trace.notes.push(format!("hallucinated citation {id}"));
            } else if seen.insert(id) {
                kept.push(id);
            }
        }
    }
    kept
}

fn segmentation_messages(claim_text: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You are a patent examiner. Split the claim into its ordered technical \
             features, quoting the claim text verbatim for each feature.",
        ),
        ChatMessage::user(format!("Claim:\n{claim_text}")),
    ]
}

/// Prompt parts are ordered prior art, then claim, then feature, so every
/// feature call on one record shares a byte-identical prefix.
fn feature_messages(document_text: &str, claim_text: &str, feature_text: &str) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(format!(
            "You are a patent examiner assessing whether one claim feature is disclosed \
             by a prior art document. {CITATION_RULE}"
        )),
        ChatMessage::user(format!(
            "Prior art document:\n{document_text}\n\n\
             Claim under examination:\n{claim_text}\n\n\
             Feature to examine:\n{feature_text}"
        )),
    ]
}

fn aggregation_messages(
    claim_text: &str,
    filtered_document_text: &str,
    findings: &str,
) -> Vec<ChatMessage> {
    vec![
        ChatMessage::system(
            "You are a patent examiner deciding whether a claim is novel over a prior \
             art document, given per-feature findings.",
        ),
        ChatMessage::user(format!(
            "Prior art document (filtered to retrieved passages):\n{filtered_document_text}\n\n\
             Claim under examination:\n{claim_text}\n\n\
             Feature findings:\n{findings}"
        )),
    ]
}

fn single_step_messages(document_text: Option<&str>, claim_text: &str) -> Vec<ChatMessage> {
    let body = match document_text {
        Some(doc) => format!(
            "Prior art document:\n{doc}\n\nClaim under examination:\n{claim_text}"
        ),
        None => format!("Claim under examination (no prior art provided):\n{claim_text}"),
    };
    vec![
        ChatMessage::system(format!(
            "You are a patent examiner. Segment the claim into features, judge each \
             feature's disclosure, and give a claim novelty verdict. {CITATION_RULE}"
        )),
        ChatMessage::user(body),
    ]
}

/// Runs the configured workflow, wrapping it in self-consistency sampling
/// when `self_consistency_k` is above 1.
pub fn examine(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    client: &dyn ExaminerClient,
    config: &WorkflowConfig,
) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError> {
    config.validate()?;
    if config.self_consistency_k > 1 {
        let temperature = config.effective_temperature();
        self_consistency(config.self_consistency_k, config.seed, |seed| {
            let run_config = WorkflowConfig {
                seed,
                self_consistency_k: 1,
                temperature: Some(temperature),
                ..config.clone()
            };
            examine_once(record, doc, client, &run_config)
        })
    } else {
        examine_once(record, doc, client, config)
    }
}

fn examine_once(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    client: &dyn ExaminerClient,
    config: &WorkflowConfig,
) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError> {
    match config.mode {
        WorkflowMode::SingleStep => single_step_examine(record, doc, client, config),
        WorkflowMode::Hierarchical => hierarchical_examine(record, doc, client, config),
    }
}

/// One prompt, one structured answer: features with citations and verdicts
/// plus the claim verdict. Feature texts are anchored back into the claim;
/// unanchorable ones are dropped and counted.
pub fn single_step_examine(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    client: &dyn ExaminerClient,
    config: &WorkflowConfig,
) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError> {
    config.validate()?;
    if config.mode != WorkflowMode::SingleStep {
        return Err(WorkflowError::Config("single_step_examine needs mode=single_step".into()));
    }
    let mut trace = WorkflowTrace::default();
    let document_text = config.include_prior_art.then(|| render_document(doc));
    let messages = single_step_messages(document_text.as_deref(), &record.claim_text);
    let wire: WireSingleStep = call_structured(
        client,
        &messages,
        &single_step_schema(),
        config.effective_temperature(),
        config.seed,
        &mut trace,
    )?;

    let texts: Vec<String> = wire.features.iter().map(|f| f.text.clone()).collect();
    let located = locate_feature_spans(&record.claim_text, &texts);
    trace.dropped_features += located.dropped.len();
    for dropped in &located.dropped {
        trace.notes.push(format!("unanchorable feature {:?}", dropped.text));
    }
    let dropped_indexes: BTreeSet<usize> = located.dropped.iter().map(|d| d.index).collect();
    let feature_results: Vec<FeatureResult> = wire
        .features
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped_indexes.contains(i))
        .map(|(_, f)| FeatureResult {
            passages: sanitize_citations(&f.passages, doc, &mut trace),
            verdict: f.verdict,
            summary: None,
        })
        .collect();

    Ok((
        ExaminationResult {
            record_id: record.record_id(),
            predicted_segmentation: located.segmentation,
            feature_results,
            claim_verdict: wire.claim_verdict,
        },
        trace,
    ))
}

/// Asks the model for an ordered feature list and anchors each back into the
/// claim. Falls back to the heuristic segmentation when nothing anchors.
pub fn segment_claim_llm(
    claim_text: &str,
    client: &dyn ExaminerClient,
    temperature: f64,
    seed: u64,
    trace: &mut WorkflowTrace,
) -> Result<Segmentation, WorkflowError> {
    let messages = segmentation_messages(claim_text);
    let wire: WireSegmentation =
        call_structured(client, &messages, &segmentation_schema(), temperature, seed, trace)?;
    let located = locate_feature_spans(claim_text, &wire.features);
    trace.dropped_features += located.dropped.len();
    for dropped in &located.dropped {
        trace.notes.push(format!("unanchorable feature {:?}", dropped.text));
    }
    if located.segmentation.is_empty() && !claim_text.trim().is_empty() {
        trace.notes.push("model segmentation unusable, heuristic fallback".to_string());
        return Ok(segment_claim_heuristic(claim_text)
            .expect("non-blank claim segments heuristically"));
    }
    Ok(located.segmentation)
}

/// Examines one feature against the document. The returned passages are
/// sanitized and ranked as the model listed them.
pub fn examine_feature(
    feature_text: &str,
    claim_text: &str,
    doc: &PriorArtDocument,
    client: &dyn ExaminerClient,
    temperature: f64,
    seed: u64,
    trace: &mut WorkflowTrace,
) -> Result<FeatureResult, WorkflowError> {
    let document_text = render_document(doc);
    let messages = feature_messages(&document_text, claim_text, feature_text);
    let wire: WireFeatureExamination = call_structured(
        client,
        &messages,
        &feature_examination_schema(),
        temperature,
        seed,
        trace,
    )?;
    Ok(FeatureResult {
        passages: sanitize_citations(&wire.passages, doc, trace),
        verdict: wire.verdict,
        summary: wire.summary,
    })
}

/// Renders the findings block of the aggregation prompt.
fn render_findings(findings: &[(&str, &FeatureResult)], include_summaries: bool) -> String {
    findings
        .iter()
        .enumerate()
        .map(|(i, (text, result))| {
            let passages = if result.passages.is_empty() {
                "none".to_string()
            } else {
                result
                    .passages
                    .iter()
                    .map(|id| id.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let mut block = format!(
                "[feature {i}] {text}\nverdict: {}\npassages: {passages}",
                verdict_label(result.verdict)
            );
            if include_summaries {
                if let Some(summary) = &result.summary {
                    block.push_str(&format!("\nsummary: {summary}"));
                }
            }
            block
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Decides the claim verdict from per-feature findings over a document
/// already filtered to the relevant passages.
#[allow(clippy::too_many_arguments)]
pub fn aggregate_claim_verdict(
    claim_text: &str,
    filtered_doc: &PriorArtDocument,
    findings: &[(&str, &FeatureResult)],
    client: &dyn ExaminerClient,
    include_summaries: bool,
    temperature: f64,
    seed: u64,
    trace: &mut WorkflowTrace,
) -> Result<ClaimVerdict, WorkflowError> {
    if findings.is_empty() {
        return Err(WorkflowError::NoFeatures);
    }
    let messages = aggregation_messages(
        claim_text,
        &render_document(filtered_doc),
        &render_findings(findings, include_summaries),
    );
    let wire: WireAggregation = call_structured(
        client,
        &messages,
        &claim_aggregation_schema(),
        temperature,
        seed,
        trace,
    )?;
    Ok(wire.verdict)
}

/// Keeps only the passages whose id is in `ids`, preserving document order.
fn filter_document(doc: &PriorArtDocument, ids: &BTreeSet<PassageId>) -> PriorArtDocument {
    PriorArtDocument {
        doc_id: doc.doc_id.clone(),
        passages: doc.passages.iter().filter(|p| ids.contains(&p.id)).cloned().collect(),
    }
}

/// Segment, examine each feature, aggregate. Features whose examination call
/// fails are dropped from the result and recorded in the trace; the claim
/// verdict is aggregated over the surviving features.
pub fn hierarchical_examine(
    record: &ExaminationRecord,
    doc: &PriorArtDocument,
    client: &dyn ExaminerClient,
    config: &WorkflowConfig,
) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError> {
    config.validate()?;
    if config.mode != WorkflowMode::Hierarchical {
        return Err(WorkflowError::Config("hierarchical_examine needs mode=hierarchical".into()));
    }
    let mut trace = WorkflowTrace::default();
    let temperature = config.effective_temperature();

    let segmentation = match config.segmentation {
        SegmentationMode::Heuristic => segment_claim_heuristic(&record.claim_text)
            .unwrap_or_else(|_| Segmentation::from_spans(&record.claim_text, [])),
        SegmentationMode::Llm => {
            segment_claim_llm(&record.claim_text, client, temperature, config.seed, &mut trace)?
        }
    };

    let mut survivors = Vec::new();
    for (index, feature) in segmentation.features.iter().enumerate() {
        match examine_feature(
            &feature.text,
            &record.claim_text,
            doc,
            client,
            temperature,
            config.seed,
            &mut trace,
        ) {
            Ok(result) => survivors.push((index, result)),
            Err(WorkflowError::Client(e)) => {
                trace.errored_features.push(index);
                trace.notes.push(format!("feature {index} examination failed: {e}"));
            }
            Err(WorkflowError::Schema(e)) => {
                trace.errored_features.push(index);
                trace.notes.push(format!("feature {index} schema failure: {e}"));
            }
            Err(other) => return Err(other),
        }
    }
    if survivors.is_empty() {
        return Err(WorkflowError::NoFeatures);
    }

    let kept_spans = survivors.iter().map(|(i, _)| segmentation.features[*i].span);
    let final_segmentation = Segmentation::from_spans(&record.claim_text, kept_spans);
    let feature_results: Vec<FeatureResult> =
        survivors.iter().map(|(_, r)| r.clone()).collect();

    let filter_ids: BTreeSet<PassageId> = if config.use_gold_references {
        record
            .gold_references
            .as_ref()
            .map(|refs| refs.all_passages().into_iter().collect())
            .unwrap_or_default()
    } else {
        feature_results.iter().flat_map(|r| r.passages.iter().copied()).collect()
    };
    let filtered = filter_document(doc, &filter_ids);

    let findings: Vec<(&str, &FeatureResult)> = survivors
        .iter()
        .zip(&feature_results)
        .map(|((i, _), result)| (segmentation.features[*i].text.as_str(), result))
        .collect();
    let claim_verdict = aggregate_claim_verdict(
        &record.claim_text,
        &filtered,
        &findings,
        client,
        config.include_summaries,
        temperature,
        config.seed,
        &mut trace,
    )?;

    Ok((
        ExaminationResult {
            record_id: record.record_id(),
            predicted_segmentation: final_segmentation,
            feature_results,
            claim_verdict,
        },
        trace,
    ))
}

/// Runs the closure with seeds `seed..seed+k` and merges the successful
/// results: majority claim verdict (ties to not novel), per-feature majority
/// verdicts aligned by the first run's spans, and passages kept when they
/// appear in at least half the runs, ranked by count then canonical order.
pub fn self_consistency<F>(
    k: usize,
    seed: u64,
    mut run: F,
) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError>
where
    F: FnMut(u64) -> Result<(ExaminationResult, WorkflowTrace), WorkflowError>,
{
    if k == 0 {
        return Err(WorkflowError::Config("self-consistency needs k >= 1".into()));
    }
    let mut trace = WorkflowTrace::default();
    let mut results = Vec::new();
    let mut failures = 0usize;
    for i in 0..k {
        match run(seed + i as u64) {
            Ok((result, run_trace)) => {
                trace.merge(run_trace);
                results.push(result);
            }
            Err(e) => {
                failures += 1;
                trace.notes.push(format!("self-consistency run {i} failed: {e}"));
            }
        }
    }
    if results.is_empty() {
        return Err(WorkflowError::AllRunsFailed(k));
    }
    if failures > 0 {
        trace.notes.push(format!(
            "voting over {} of {k} runs after {failures} failures",
            results.len()
        ));
    }
    if results.len() == 1 {
        return Ok((results.pop().unwrap(), trace));
    }

    let k_effective = results.len();
    let novel_votes =
        results.iter().filter(|r| r.claim_verdict == ClaimVerdict::Novel).count();
    let claim_verdict = if novel_votes * 2 > k_effective {
        ClaimVerdict::Novel
    } else {
        ClaimVerdict::NotNovel
    };

    let reference = &results[0];
    let quorum = k_effective.div_ceil(2);
    let mut feature_results = Vec::with_capacity(reference.feature_results.len());
    for (index, feature) in reference.predicted_segmentation.features.iter().enumerate() {
        let mut verdict_votes: BTreeMap<FeatureVerdict, usize> = BTreeMap::new();
        let mut passage_counts: BTreeMap<PassageId, usize> = BTreeMap::new();
        for result in &results {
            let aligned = result
                .predicted_segmentation
                .features
                .iter()
                .position(|f| f.span == feature.span)
                .map(|j| &result.feature_results[j]);
            let Some(aligned) = aligned else { continue };
            *verdict_votes.entry(aligned.verdict).or_insert(0) += 1;
            for id in &aligned.passages {
                *passage_counts.entry(*id).or_insert(0) += 1;
            }
        }
        let top_votes = verdict_votes.values().max().copied().unwrap_or(0);
        // BTreeMap keys iterate in FeatureVerdict::ALL order, so a vote tie
        // resolves to the stronger disclosure claim deterministically.
        let verdict = verdict_votes
            .iter()
            .find(|(_, votes)| **votes == top_votes)
            .map(|(v, _)| *v)
            .unwrap_or(reference.feature_results[index].verdict);
        let mut passages: Vec<(PassageId, usize)> = passage_counts
            .into_iter()
            .filter(|(_, count)| *count >= quorum)
            .collect();
        passages.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        feature_results.push(FeatureResult {
            passages: passages.into_iter().map(|(id, _)| id).collect(),
            verdict,
            summary: reference.feature_results[index].summary.clone(),
        });
    }

    Ok((
        ExaminationResult {
            record_id: reference.record_id.clone(),
            predicted_segmentation: reference.predicted_segmentation.clone(),
            feature_results,
            claim_verdict,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests;
