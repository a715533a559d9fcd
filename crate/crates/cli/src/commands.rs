//! The six workbench commands: synth, ingest, prepare, run, eval, agree.
//!
//! Exit code contract: 0 on success, 1 on hard errors (propagated as `Err`),
//! 2 when a command completed but skipped records (failed examinations,
//! predictions missing at eval time).

use crate::render;
use crate::store::{
    self, append_predictions, file_digest, load_corpus, now_unix, open_predictions_for_append,
    read_json, read_prediction_file, save_corpus, write_json_pretty, write_jsonl, Corpus,
    PrepareCounts, PrepareManifest, RunKey, RunManifest, DOCUMENTS_FILE, MANIFEST_FILE,
    PREDICTIONS_FILE, RECORDS_FILE, SPLIT_FILE,
};
use anyhow::{bail, Context, Result};
use novex_core::baselines::{
    embedding_retrieval_examiner, extract_claim_features, predict_logreg, random_examiner,
    rouge_retrieval_examiner, top_coefficients, train_logreg, EmbeddingCache, EmbeddingClient,
    FeatureSpace, HashEmbeddingClient, HttpEmbeddingClient, LogRegModel,
};
use novex_core::config::Config;
use novex_core::dataset::{
    adversarial_filter, generate_synthetic_corpus, split, stratify_balance, strip_corpus_numerals,
    SplitAssignment, SplitName, SynthOptions,
};
use novex_core::metrics::{agreement_matrix, assemble_report, EvalInput, EvalReport};
use novex_core::model::{
    validate_record, ClaimVerdict, ExaminationRecord, ExaminationResult, NoveltyLabel,
    PriorArtDocument, Segmentation,
};
use novex_core::workflows::{
    examine, ExaminerClient, HttpChatClient, ScriptedClient, WorkflowMode,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SKIPS: i32 = 2;

pub struct Ctx {
    pub workspace: PathBuf,
    pub config: Config,
}

impl Ctx {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        store::resolve(&self.workspace, path)
    }

    fn corpus_dir(&self) -> PathBuf {
        self.workspace.join("corpus")
    }

    fn prepared_dir(&self) -> PathBuf {
        self.workspace.join("prepared")
    }

    fn run_dir(&self, run_id: &str) -> PathBuf {
        self.workspace.join("runs").join(run_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Random,
    Rouge,
    Embedding,
    Logreg,
    #[value(name = "single_step")]
    SingleStep,
    Hierarchical,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Rouge => "rouge",
            Method::Embedding => "embedding",
            Method::Logreg => "logreg",
            Method::SingleStep => "single_step",
            Method::Hierarchical => "hierarchical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

impl SplitArg {
    pub fn name(self) -> SplitName {
        match self {
            SplitArg::Train => SplitName::Train,
            SplitArg::Val => SplitName::Val,
            SplitArg::Test => SplitName::Test,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SplitArg::Train => "train",
            SplitArg::Val => "val",
            SplitArg::Test => "test",
        }
    }
}

pub fn cmd_synth(
    ctx: &Ctx,
    applications: usize,
    out: Option<&Path>,
    skew: bool,
    no_numerals: bool,
    filler: usize,
) -> Result<i32> {
    let options = SynthOptions {
        length_skew: skew,
        plant_numerals: !no_numerals,
        filler_paragraphs: filler,
    };
    let corpus = generate_synthetic_corpus(ctx.config.seed, applications, &options);
    let dir = out.map(|p| ctx.resolve(p)).unwrap_or_else(|| ctx.workspace.join("synth"));
    write_jsonl(&dir.join(RECORDS_FILE), &corpus.records)?;
    write_jsonl(&dir.join(DOCUMENTS_FILE), &corpus.documents)?;
    println!(
        "synthesized {} records over {} applications into {}",
        corpus.records.len(),
        applications,
        dir.display()
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct IngestReport {
    records: usize,
    documents: usize,
    problems: Vec<String>,
}

/// Validates raw record and document files and, when clean, stores them as
/// the working corpus. Any violation rejects the whole batch.
pub fn cmd_ingest(ctx: &Ctx, records_path: &Path, documents_path: &Path) -> Result<i32> {
    let records: Vec<ExaminationRecord> = store::read_jsonl(&ctx.resolve(records_path))?;
    let documents: Vec<PriorArtDocument> = store::read_jsonl(&ctx.resolve(documents_path))?;
    let mut problems = Vec::new();

    let mut docs_by_id: BTreeMap<String, PriorArtDocument> = BTreeMap::new();
    for doc in documents {
        if let Err(e) = doc.validate() {
            problems.push(e);
        }
        let id = doc.doc_id.clone();
        if docs_by_id.insert(id.clone(), doc).is_some() {
            problems.push(format!("duplicate document id {id}"));
        }
    }

    let mut seen = BTreeSet::new();
    for record in &records {
        let id = record.record_id();
        if !seen.insert(id.clone()) {
            problems.push(format!("duplicate record id {id}"));
            continue;
        }
        match docs_by_id.get(&record.prior_art_doc_id) {
            Some(doc) => {
                for violation in validate_record(record, doc) {
                    problems.push(format!("{id}: {violation}"));
                }
            }
            None => problems.push(format!(
                "{id}: cites unknown document {}",
                record.prior_art_doc_id
            )),
        }
    }

    let report = IngestReport {
        records: records.len(),
        documents: docs_by_id.len(),
        problems: problems.clone(),
    };
    let report_path = ctx.corpus_dir().join("ingest_report.json");
    write_json_pretty(&report_path, &report)?;

    if !problems.is_empty() {
        for p in problems.iter().take(20) {
            eprintln!("  {p}");
        }
        bail!(
            "ingest rejected: {} problems (full list in {})",
            problems.len(),
            report_path.display()
        );
    }
    save_corpus(&ctx.corpus_dir(), &Corpus { records, documents: docs_by_id })?;
    println!(
        "ingested {} records and {} documents into {}",
        report.records,
        report.documents,
        ctx.corpus_dir().display()
    );
    Ok(EXIT_OK)
}

struct TrainedClassifier {
    space: FeatureSpace,
    model: LogRegModel,
}

/// Fits the claim-only classifier (lexical, length, punctuation, and domain
/// features; no prior art) on the given records.
fn train_claim_classifier(
    records: &[&ExaminationRecord],
    config: &Config,
    seed: u64,
) -> Result<TrainedClassifier> {
    let claims: Vec<String> = records.iter().map(|r| r.claim_text.clone()).collect();
    let domains: Vec<Vec<String>> = records.iter().map(|r| r.domain_classes.clone()).collect();
    let labels: Vec<NoveltyLabel> = records.iter().map(|r| r.novelty_label).collect();
    let b = &config.baselines;
    let space = FeatureSpace::fit(
        &claims,
        &domains,
        b.top_k_domains,
        b.tfidf_max_ngram,
        b.tfidf_max_features,
    )?;
    let vectors: Vec<_> = records
        .iter()
        .map(|r| extract_claim_features(&r.claim_text, &r.domain_classes, &space))
        .collect();
    let mut params = b.logreg;
    params.seed = seed;
    let model = train_logreg(&vectors, &labels, &space.feature_names(), &params)?;
    Ok(TrainedClassifier { space, model })
}

fn classify(classifier: &TrainedClassifier, record: &ExaminationRecord) -> Result<ClaimVerdict> {
    let vector = extract_claim_features(&record.claim_text, &record.domain_classes, &classifier.space);
    let (verdict, _) = predict_logreg(&classifier.model, &vector)?;
    Ok(verdict)
}

fn verdict_matches(verdict: ClaimVerdict, label: NoveltyLabel) -> bool {
    matches!(
        (verdict, label),
        (ClaimVerdict::Novel, NoveltyLabel::Novel)
            | (ClaimVerdict::NotNovel, NoveltyLabel::NotNovel)
    )
}

#[derive(Serialize)]
struct PersistedClassifier<'a> {
    space: &'a FeatureSpace,
    model: &'a LogRegModel,
    test_accuracy: Option<f64>,
    top_coefficients: Vec<(String, f64)>,
}

/// Dataset hygiene pipeline over the ingested corpus: strip reference
/// numerals, balance labels within claim-length bins, split by application,
/// then mark the adversarial slice of the test split that a claim-only
/// classifier cannot beat.
pub fn cmd_prepare(ctx: &Ctx) -> Result<i32> {
    let corpus_dir = ctx.corpus_dir();
    let corpus = load_corpus(&corpus_dir)
        .context("no ingested corpus found; run `novex ingest` first")?;
    if corpus.records.is_empty() {
        bail!("the ingested corpus has no records");
    }
    let seed = ctx.config.seed;
    let dcfg = &ctx.config.dataset;
    let input_records_digest = file_digest(&corpus_dir.join(RECORDS_FILE))?;
    let input_documents_digest = file_digest(&corpus_dir.join(DOCUMENTS_FILE))?;

    let stripped = strip_corpus_numerals(&corpus.records);

    let retained: Vec<ExaminationRecord> = if dcfg.stratify_before_split {
        let keep: BTreeSet<String> =
            stratify_balance(&stripped, dcfg.stratify_bins, seed)?.into_iter().collect();
        stripped.into_iter().filter(|r| keep.contains(&r.record_id())).collect()
    } else {
        stripped
    };
    if retained.is_empty() {
        bail!("stratification retained no records; the corpus is too skewed");
    }

    let mut assignment = split(&retained, dcfg.split_ratios, seed)?;

    let prepared_dir = ctx.prepared_dir();
    let mut filter_accuracy = None;
    if dcfg.adversarial {
        let by_id: BTreeMap<String, &ExaminationRecord> =
            retained.iter().map(|r| (r.record_id(), r)).collect();
        let pick = |ids: Vec<String>| -> Vec<&ExaminationRecord> {
            ids.iter().map(|id| by_id[id]).collect()
        };
        let train_records = pick(assignment.ids_in(SplitName::Train));
        let test_records = pick(assignment.ids_in(SplitName::Test));
        if train_records.len() < 2 || test_records.is_empty() {
            bail!("adversarial filtering needs non-empty train and test splits");
        }
        let classifier = train_claim_classifier(&train_records, &ctx.config, seed)?;
        let mut predictions = BTreeMap::new();
        let mut correct = 0usize;
        for record in &test_records {
            let verdict = classify(&classifier, record)?;
            if verdict_matches(verdict, record.novelty_label) {
                correct += 1;
            }
            predictions.insert(record.record_id(), verdict);
        }
        let accuracy = correct as f64 / test_records.len() as f64;
        filter_accuracy = Some(accuracy);
        let adversarial_ids = adversarial_filter(&test_records, &predictions, seed)?;
        assignment.mark_adversarial(&adversarial_ids)?;
        write_json_pretty(
            &prepared_dir.join("filter_model.json"),
            &PersistedClassifier {
                space: &classifier.space,
                model: &classifier.model,
                test_accuracy: filter_accuracy,
                top_coefficients: top_coefficients(&classifier.model, 10),
            },
        )?;
    }

    save_corpus(&prepared_dir, &Corpus { records: retained, documents: corpus.documents })?;
    write_json_pretty(&prepared_dir.join(SPLIT_FILE), &assignment)?;

    let counts = PrepareCounts {
        input_records: corpus.records.len(),
        after_stratify: assignment.0.len(),
        train: assignment.ids_in(SplitName::Train).len(),
        val: assignment.ids_in(SplitName::Val).len(),
        test: assignment.ids_in(SplitName::Test).len(),
        adversarial: assignment.adversarial_ids().len(),
    };
    let manifest = PrepareManifest {
        seed,
        config: ctx.config.clone(),
        input_records_digest,
        input_documents_digest,
        counts: counts.clone(),
        filter_test_accuracy: filter_accuracy,
        created_unix: now_unix(),
    };
    write_json_pretty(&prepared_dir.join(MANIFEST_FILE), &manifest)?;

    println!(
        "prepared {} of {} records: train {} / val {} / test {} (adversarial {})",
        counts.after_stratify,
        counts.input_records,
        counts.train,
        counts.val,
        counts.test,
        counts.adversarial
    );
    if let Some(acc) = filter_accuracy {
        println!("claim-only filter test accuracy: {acc:.3}");
    }
    Ok(EXIT_OK)
}

pub struct RunArgs {
    pub method: Method,
    pub split: SplitArg,
    pub run_id: Option<String>,
    pub fixture: Option<PathBuf>,
    pub jobs: usize,
}

type Examiner =
    Box<dyn Fn(&ExaminationRecord, &PriorArtDocument, u64) -> Result<ExaminationResult, String> + Sync>;

fn build_embedding_client(ctx: &Ctx) -> Result<Box<dyn EmbeddingClient>> {
    let c = &ctx.config.client;
    // "hash:<dim>" swaps the HTTP embedder for a deterministic local one, so
    // the embedding baseline runs offline.
    if let Some(dim) = c.embedding_url.strip_prefix("hash:") {
        let dim: usize = dim
            .parse()
            .with_context(|| format!("bad embedding url {:?}: hash:<dim> expects a number", c.embedding_url))?;
        return Ok(Box::new(HashEmbeddingClient::new(dim)));
    }
    let mut client = HttpEmbeddingClient::new(&c.embedding_url, &c.embedding_model)
        .with_attempts(c.attempts, Duration::from_millis(500));
    if let Ok(key) = std::env::var(&c.api_key_env) {
        client = client.with_api_key(key);
    }
    Ok(Box::new(client))
}

fn build_chat_client(ctx: &Ctx, fixture: Option<&Path>) -> Result<Box<dyn ExaminerClient>> {
    if let Some(path) = fixture {
        let client = ScriptedClient::from_file(&ctx.resolve(path))?;
        return Ok(Box::new(client));
    }
    let c = &ctx.config.client;
    let mut client = HttpChatClient::new(&c.chat_url, &c.chat_model)
        .with_attempts(c.attempts, Duration::from_millis(500));
    if let Ok(key) = std::env::var(&c.api_key_env) {
        client = client.with_api_key(key);
    }
    Ok(Box::new(client))
}

fn build_examiner(
    ctx: &Ctx,
    args: &RunArgs,
    prepared: &Corpus,
    assignment: &SplitAssignment,
    run_dir: &Path,
) -> Result<Examiner> {
    if args.fixture.is_some() && !matches!(args.method, Method::SingleStep | Method::Hierarchical) {
        bail!("--fixture only applies to the single_step and hierarchical methods");
    }
    let b = &ctx.config.baselines;
    match args.method {
        Method::Random => {
            let expected = b.random_expected_passages;
            Ok(Box::new(move |record, doc, seed| {
                Ok(random_examiner(record, doc, expected, seed))
            }))
        }
        Method::Rouge => {
            let threshold = b.rouge_threshold;
            Ok(Box::new(move |record, doc, _| {
                Ok(rouge_retrieval_examiner(record, doc, threshold))
            }))
        }
        Method::Embedding => {
            let threshold = b.embedding_threshold;
            let client = build_embedding_client(ctx)?;
            let cache = EmbeddingCache::new();
            Ok(Box::new(move |record, doc, _| {
                embedding_retrieval_examiner(record, doc, client.as_ref(), threshold, &cache)
                    .map_err(|e| e.to_string())
            }))
        }
        Method::Logreg => {
            let by_id: BTreeMap<String, &ExaminationRecord> =
                prepared.records.iter().map(|r| (r.record_id(), r)).collect();
            let train_ids = assignment.ids_in(SplitName::Train);
            let train_records: Vec<&ExaminationRecord> =
                train_ids.iter().map(|id| by_id[id]).collect();
            let classifier = train_claim_classifier(&train_records, &ctx.config, ctx.config.seed)?;
            write_json_pretty(
                &run_dir.join("model.json"),
                &PersistedClassifier {
                    space: &classifier.space,
                    model: &classifier.model,
                    test_accuracy: None,
                    top_coefficients: top_coefficients(&classifier.model, 10),
                },
            )?;
            Ok(Box::new(move |record, _, _| {
                let verdict = classify(&classifier, record).map_err(|e| e.to_string())?;
                Ok(ExaminationResult {
                    record_id: record.record_id(),
                    predicted_segmentation: Segmentation::default(),
                    feature_results: vec![],
                    claim_verdict: verdict,
                })
            }))
        }
        Method::SingleStep | Method::Hierarchical => {
            let client = build_chat_client(ctx, args.fixture.as_deref())?;
            let mut wf = ctx.config.workflow.clone();
            wf.mode = match args.method {
                Method::SingleStep => WorkflowMode::SingleStep,
                _ => WorkflowMode::Hierarchical,
            };
            wf.validate().map_err(|e| anyhow::anyhow!("workflow config: {e}"))?;
            Ok(Box::new(move |record, doc, seed| {
                let mut config = wf.clone();
                config.seed = seed;
                examine(record, doc, client.as_ref(), &config)
                    .map(|(result, _)| result)
                    .map_err(|e| e.to_string())
            }))
        }
    }
}

/// Examines `todo` with record-level parallelism. Workers pull the next index
/// from a shared counter; after each chunk the results are appended in record
/// order by the single writer, so output bytes never depend on thread timing.
fn run_parallel(
    todo: &[&ExaminationRecord],
    corpus: &Corpus,
    examiner: &Examiner,
    seed: u64,
    jobs: usize,
    file: &mut File,
) -> Result<Vec<(String, String)>> {
    let jobs = jobs.max(1);
    let mut errors = Vec::new();
    for chunk in todo.chunks(jobs * 8) {
        let next = AtomicUsize::new(0);
        let collected: Mutex<Vec<(usize, Result<ExaminationResult, String>)>> =
            Mutex::new(Vec::with_capacity(chunk.len()));
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(chunk.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= chunk.len() {
                        break;
                    }
                    let record = chunk[i];
                    let out = match corpus.doc_for(record) {
                        Ok(doc) => {
                            examiner(record, doc, store::record_seed(seed, &record.record_id()))
                        }
                        Err(e) => Err(e.to_string()),
                    };
                    collected.lock().expect("examiner panicked").push((i, out));
                });
            }
        });
        let mut results = collected.into_inner().expect("examiner panicked");
        results.sort_by_key(|(i, _)| *i);
        let mut ready = Vec::new();
        for (i, out) in results {
            match out {
                Ok(result) => ready.push(result),
                Err(e) => errors.push((chunk[i].record_id(), e)),
            }
        }
        append_predictions(file, &ready)?;
    }
    Ok(errors)
}

#[derive(Serialize)]
struct RecordError {
    record_id: String,
    error: String,
}

/// Examines one split with the chosen method, streaming predictions to an
/// append-only JSONL file keyed by record id. Re-running with the same run id
/// resumes: already-predicted records are skipped, and a changed method,
/// seed, config, or input corpus is rejected via the manifest.
pub fn cmd_run(ctx: &Ctx, args: &RunArgs) -> Result<i32> {
    let prepared_dir = ctx.prepared_dir();
    let prepared = load_corpus(&prepared_dir)
        .context("no prepared corpus found; run `novex prepare` first")?;
    let assignment: SplitAssignment = read_json(&prepared_dir.join(SPLIT_FILE))?;

    let ids = assignment.ids_in(args.split.name());
    if ids.is_empty() {
        bail!("the {} split is empty", args.split.label());
    }
    let by_id = prepared.record_by_id();
    for id in &ids {
        if !by_id.contains_key(id) {
            bail!("split file lists {id} but the prepared corpus has no such record");
        }
    }

    // Scripted fixtures can hold order-sensitive response queues, which
    // concurrent records would interleave.
    let jobs = if args.fixture.is_some() { 1 } else { args.jobs };

    let run_id = args.run_id.clone().unwrap_or_else(|| {
        format!("{}-{}-s{}", args.method.label(), args.split.label(), ctx.config.seed)
    });
    let run_dir = ctx.run_dir(&run_id);
    std::fs::create_dir_all(&run_dir)?;

    let key = RunKey {
        method: args.method.label().to_string(),
        split: args.split.label().to_string(),
        seed: ctx.config.seed,
        config: ctx.config.clone(),
        records_digest: file_digest(&prepared_dir.join(RECORDS_FILE))?,
        documents_digest: file_digest(&prepared_dir.join(DOCUMENTS_FILE))?,
        split_digest: file_digest(&prepared_dir.join(SPLIT_FILE))?,
        fixture_digest: match &args.fixture {
            Some(path) => Some(file_digest(&ctx.resolve(path))?),
            None => None,
        },
    };
    let manifest_path = run_dir.join(MANIFEST_FILE);
    let mut manifest = if manifest_path.exists() {
        let existing: RunManifest = read_json(&manifest_path)?;
        if existing.key != key {
            bail!(
                "run {run_id} already exists with a different method, seed, config, or corpus; \
                 pick a new --run-id or delete {}",
                run_dir.display()
            );
        }
        existing
    } else {
        let manifest = RunManifest {
            run_id: run_id.clone(),
            key,
            predictions_file: PREDICTIONS_FILE.to_string(),
            created_unix: now_unix(),
            completed_unix: None,
        };
        write_json_pretty(&manifest_path, &manifest)?;
        manifest
    };

    let predictions_path = run_dir.join(PREDICTIONS_FILE);
    let state = read_prediction_file(&predictions_path)?;
    for id in state.results.keys() {
        if !by_id.contains_key(id) {
            bail!("{} holds a prediction for unknown record {id}", predictions_path.display());
        }
    }
    let todo: Vec<&ExaminationRecord> =
        ids.iter().filter(|id| !state.results.contains_key(*id)).map(|id| by_id[id]).collect();
    let resumed = ids.len() - todo.len();

    let examiner = build_examiner(ctx, args, &prepared, &assignment, &run_dir)?;
    let mut file = open_predictions_for_append(&predictions_path, &state)?;
    let errors = run_parallel(&todo, &prepared, &examiner, ctx.config.seed, jobs, &mut file)?;
    drop(file);

    let errors_path = run_dir.join("errors.jsonl");
    if errors.is_empty() {
        if errors_path.exists() {
            std::fs::remove_file(&errors_path)?;
        }
        if manifest.completed_unix.is_none() {
            manifest.completed_unix = Some(now_unix());
            write_json_pretty(&manifest_path, &manifest)?;
        }
    } else {
        write_jsonl(
            &errors_path,
            errors.iter().map(|(record_id, error)| RecordError {
                record_id: record_id.clone(),
                error: error.clone(),
            }),
        )?;
    }

    println!(
        "run {run_id}: {} predicted, {} resumed, {} failed -> {}",
        todo.len() - errors.len(),
        resumed,
        errors.len(),
        predictions_path.display()
    );
    if errors.is_empty() {
        Ok(EXIT_OK)
    } else {
        for (id, e) in errors.iter().take(10) {
            eprintln!("  {id}: {e}");
        }
        eprintln!("{} records failed; re-run the same command to retry them", errors.len());
        Ok(EXIT_SKIPS)
    }
}

/// Resolves a run reference: a run id under `runs/`, a directory holding a
/// prediction file, or a prediction file itself. Returns the prediction path,
/// the directory reports belong in, and a display name.
fn resolve_run_ref(ctx: &Ctx, reference: &str) -> Result<(PathBuf, PathBuf, String)> {
    let run_dir = ctx.run_dir(reference);
    if run_dir.join(PREDICTIONS_FILE).is_file() {
        return Ok((run_dir.join(PREDICTIONS_FILE), run_dir, reference.to_string()));
    }
    let as_path = ctx.resolve(Path::new(reference));
    if as_path.is_file() {
        let dir = as_path.parent().unwrap_or(&ctx.workspace).to_path_buf();
        let name = as_path.file_stem().map(|s| s.to_string_lossy().into_owned());
        return Ok((as_path.clone(), dir, name.unwrap_or_else(|| reference.to_string())));
    }
    if as_path.join(PREDICTIONS_FILE).is_file() {
        let name = as_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| reference.to_string());
        return Ok((as_path.join(PREDICTIONS_FILE), as_path, name));
    }
    bail!("no predictions found for {reference:?} (tried runs/{reference} and the literal path)");
}

/// Errors when the run's manifest records input digests that differ from the
/// current prepared corpus: its predictions would be scored against data they
/// were not produced from.
fn check_run_inputs(ctx: &Ctx, run_dir: &Path) -> Result<()> {
    let manifest_path = run_dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Ok(());
    }
    let manifest: RunManifest = read_json(&manifest_path)?;
    let prepared_dir = ctx.prepared_dir();
    let fresh_records = file_digest(&prepared_dir.join(RECORDS_FILE))?;
    let fresh_split = file_digest(&prepared_dir.join(SPLIT_FILE))?;
    if manifest.key.records_digest != fresh_records || manifest.key.split_digest != fresh_split {
        bail!(
            "run {} was produced from a different prepared corpus; re-run it before evaluating",
            manifest.run_id
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    run: &'a str,
    split: &'a str,
    report: &'a EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversarial: Option<&'a EvalReport>,
    missing_records: &'a [String],
}

/// Scores one run's predictions over a split: retrieval on not-novel records,
/// novel feature identification on novel records, claim classification on all
/// records, plus the same classification block on the adversarial subset.
pub fn cmd_eval(ctx: &Ctx, run_ref: &str, split_arg: SplitArg) -> Result<i32> {
    let prepared_dir = ctx.prepared_dir();
    let prepared = load_corpus(&prepared_dir)
        .context("no prepared corpus found; run `novex prepare` first")?;
    let assignment: SplitAssignment = read_json(&prepared_dir.join(SPLIT_FILE))?;
    let (predictions_path, out_dir, name) = resolve_run_ref(ctx, run_ref)?;
    check_run_inputs(ctx, &out_dir)?;

    let predictions = read_prediction_file(&predictions_path)?;
    if predictions.truncated_tail {
        eprintln!("warning: {} ends mid-line; ignoring the partial record", predictions_path.display());
    }

    let ids = assignment.ids_in(split_arg.name());
    let by_id = prepared.record_by_id();
    let mut inputs = Vec::new();
    let mut missing = Vec::new();
    for id in &ids {
        let record = by_id[id.as_str()];
        match predictions.results.get(id) {
            Some(result) => {
                inputs.push(EvalInput { record, doc: prepared.doc_for(record)?, result })
            }
            None => missing.push(id.clone()),
        }
    }
    if inputs.is_empty() {
        bail!(
            "{} has no predictions for the {} split",
            predictions_path.display(),
            split_arg.label()
        );
    }

    let novel_verdicts = &ctx.config.metrics.novel_feature_verdicts;
    let report = assemble_report(&inputs, novel_verdicts)?;
    let adversarial_ids: BTreeSet<String> = assignment.adversarial_ids().into_iter().collect();
    let adversarial_inputs: Vec<EvalInput> = inputs
        .iter()
        .filter(|input| adversarial_ids.contains(&input.record.record_id()))
        .copied()
        .collect();
    let adversarial = if adversarial_inputs.is_empty() {
        None
    } else {
        Some(assemble_report(&adversarial_inputs, novel_verdicts)?)
    };

    let title = format!("{name} on {}", split_arg.label());
    let rendered = render::render_report(&title, &report, adversarial.as_ref());
    print!("{rendered}");

    let output = EvalOutput {
        run: &name,
        split: split_arg.label(),
        report: &report,
        adversarial: adversarial.as_ref(),
        missing_records: &missing,
    };
    let json_path = out_dir.join(format!("report-{}.json", split_arg.label()));
    write_json_pretty(&json_path, &output)?;
    std::fs::write(out_dir.join(format!("report-{}.txt", split_arg.label())), &rendered)?;
    println!("report written to {}", json_path.display());

    if missing.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "{} of {} records in the {} split have no prediction",
            missing.len(),
            ids.len(),
            split_arg.label()
        );
        Ok(EXIT_SKIPS)
    }
}

#[derive(Serialize)]
struct AgreementOutput {
    record_count: usize,
    test: novex_core::metrics::AgreementMatrix,
    #[serde(skip_serializing_if = "Option::is_none")]
    adversarial: Option<novex_core::metrics::AgreementMatrix>,
}

/// Pairwise Cohen's kappa between two or more runs over the test split, and
/// again over its adversarial subset. All runs must cover the same records.
pub fn cmd_agree(ctx: &Ctx, run_refs: &[String], out: Option<&Path>) -> Result<i32> {
    if run_refs.len() < 2 {
        bail!("agreement needs at least two runs");
    }
    let prepared_dir = ctx.prepared_dir();
    let assignment: SplitAssignment = read_json(&prepared_dir.join(SPLIT_FILE))
        .context("no prepared corpus found; run `novex prepare` first")?;

    let mut runs: Vec<(String, BTreeMap<String, ExaminationResult>)> = Vec::new();
    for reference in run_refs {
        let (path, _, name) = resolve_run_ref(ctx, reference)?;
        let predictions = read_prediction_file(&path)?;
        if runs.iter().any(|(n, _)| *n == name) {
            bail!("run name {name:?} appears twice");
        }
        runs.push((name, predictions.results));
    }

    let first_ids: BTreeSet<&String> = runs[0].1.keys().collect();
    for (name, results) in &runs[1..] {
        let ids: BTreeSet<&String> = results.keys().collect();
        if ids != first_ids {
            let missing = first_ids.difference(&ids).count();
            let extra = ids.difference(&first_ids).count();
            bail!(
                "record-set mismatch: {} vs {name} ({missing} records missing, {extra} extra)",
                runs[0].0
            );
        }
    }

    let verdict_rows = |subset: &[String]| -> Vec<(String, Vec<ClaimVerdict>)> {
        runs.iter()
            .map(|(name, results)| {
                (name.clone(), subset.iter().map(|id| results[id].claim_verdict).collect())
            })
            .collect()
    };
    let test_ids: Vec<String> = assignment
        .ids_in(SplitName::Test)
        .into_iter()
        .filter(|id| runs[0].1.contains_key(id))
        .collect();
    if test_ids.is_empty() {
        bail!("the runs share no records with the test split");
    }
    let test_matrix = agreement_matrix(&verdict_rows(&test_ids))?;
    print!("{}", render::render_matrix(&format!("agreement on test (n={})", test_ids.len()), &test_matrix));

    let adversarial_ids: Vec<String> = assignment
        .adversarial_ids()
        .into_iter()
        .filter(|id| runs[0].1.contains_key(id))
        .collect();
    let adversarial_matrix = if adversarial_ids.is_empty() {
        None
    } else {
        let m = agreement_matrix(&verdict_rows(&adversarial_ids))?;
        print!(
            "{}",
            render::render_matrix(
                &format!("agreement on adversarial subset (n={})", adversarial_ids.len()),
                &m
            )
        );
        Some(m)
    };

    let output = AgreementOutput {
        record_count: test_ids.len(),
        test: test_matrix,
        adversarial: adversarial_matrix,
    };
    let out_path = out.map(|p| ctx.resolve(p)).unwrap_or_else(|| ctx.workspace.join("agreement.json"));
    write_json_pretty(&out_path, &output)?;
    println!("agreement written to {}", out_path.display());
    Ok(EXIT_OK)
}
