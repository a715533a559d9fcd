//! On-disk formats: JSONL corpus stores, append-only prediction files with
//! crash-tolerant resume, and the manifests that make runs reproducible.

use anyhow::{bail, Context, Result};
use novex_core::config::Config;
use novex_core::model::{ExaminationRecord, ExaminationResult, PriorArtDocument};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const SPLIT_FILE: &str = "split.json";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("cannot read {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed line", path.display(), i + 1))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut rendered = serde_json::to_string_pretty(value)?;
    rendered.push('\n');
    fs::write(path, rendered).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let raw =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    serde_json::from_str(&raw).with_context(|| format!("{}: malformed JSON", path.display()))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex(&hasher.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Stable per-record seed: mixes the run seed with the record id so records
/// draw independent randomness that survives resumes and reordering.
pub fn record_seed(seed: u64, record_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(record_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields at least 8 bytes"))
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct Corpus {
    pub records: Vec<ExaminationRecord>,
    pub documents: BTreeMap<String, PriorArtDocument>,
}

impl Corpus {
    pub fn doc_for(&self, record: &ExaminationRecord) -> Result<&PriorArtDocument> {
        self.documents.get(&record.prior_art_doc_id).with_context(|| {
            format!(
                "record {} cites document {} which is not in the corpus",
                record.record_id(),
                record.prior_art_doc_id
            )
        })
    }

    pub fn record_by_id(&self) -> BTreeMap<String, &ExaminationRecord> {
        self.records.iter().map(|r| (r.record_id(), r)).collect()
    }
}

pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let records: Vec<ExaminationRecord> = read_jsonl(&dir.join(RECORDS_FILE))?;
    let documents: Vec<PriorArtDocument> = read_jsonl(&dir.join(DOCUMENTS_FILE))?;
    let mut by_id = BTreeMap::new();
    for doc in documents {
        if by_id.insert(doc.doc_id.clone(), doc).is_some() {
            bail!("duplicate document id in {}", dir.join(DOCUMENTS_FILE).display());
        }
    }
    Ok(Corpus { records, documents: by_id })
}

pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    write_jsonl(&dir.join(RECORDS_FILE), &corpus.records)?;
    write_jsonl(&dir.join(DOCUMENTS_FILE), corpus.documents.values())?;
    Ok(())
}

/// Contents of a prediction file plus what a resuming writer needs to know:
/// how many leading bytes hold intact lines, and whether the last intact line
/// is missing its newline.
pub struct PredictionFile {
    pub results: BTreeMap<String, ExaminationResult>,
    pub valid_len: u64,
    pub needs_newline: bool,
    /// A trailing partial line was discarded (interrupted writer).
    pub truncated_tail: bool,
}

impl PredictionFile {
    pub fn empty() -> Self {
        PredictionFile {
            results: BTreeMap::new(),
            valid_len: 0,
            needs_newline: false,
            truncated_tail: false,
        }
    }
}

/// Reads a prediction file, tolerating a truncated final line so an
/// interrupted run can resume. A malformed line anywhere else is corruption
/// and fails hard, as does a duplicate record id.
pub fn read_prediction_file(path: &Path) -> Result<PredictionFile> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(PredictionFile::empty()),
        Err(e) => return Err(e).with_context(|| format!("cannot open {}", path.display())),
    };
    let mut reader = BufReader::new(file);
    let mut state = PredictionFile::empty();
    let mut offset = 0u64;
    let mut line_no = 0usize;
    let mut pending_bad: Option<usize> = None;
    loop {
        let mut buf = Vec::new();
        let n = reader.read_until(b'\n', &mut buf)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        if let Some(bad_line) = pending_bad {
            bail!("{}:{}: malformed prediction line", path.display(), bad_line);
        }
        let complete = buf.last() == Some(&b'\n');
        let parsed = std::str::from_utf8(&buf)
            .ok()
            .filter(|text| !text.trim().is_empty())
            .and_then(|text| serde_json::from_str::<ExaminationResult>(text.trim_end()).ok());
        match parsed {
            Some(result) => {
                if state.results.insert(result.record_id.clone(), result).is_some() {
                    bail!("{}:{}: duplicate record id", path.display(), line_no);
                }
                offset += n as u64;
                state.valid_len = offset;
                state.needs_newline = !complete;
            }
            None if std::str::from_utf8(&buf).is_ok_and(|t| t.trim().is_empty()) => {
                offset += n as u64;
                state.valid_len = offset;
                state.needs_newline = !complete;
            }
            None => pending_bad = Some(line_no),
        }
    }
    state.truncated_tail = pending_bad.is_some();
    Ok(state)
}

/// Opens the prediction file for appending, first discarding any truncated
/// tail and restoring the trailing newline the tail may have clobbered.
pub fn open_predictions_for_append(path: &Path, state: &PredictionFile) -> Result<File> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .with_context(|| format!("cannot open {} for append", path.display()))?;
    if file.metadata()?.len() > state.valid_len {
        file.set_len(state.valid_len)?;
    }
    let mut file = file;
    if state.needs_newline {
        file.write_all(b"\n")?;
    }
    Ok(file)
}

pub fn append_predictions(file: &mut File, results: &[ExaminationResult]) -> Result<()> {
    let mut buf = Vec::new();
    for result in results {
        serde_json::to_writer(&mut buf, result)?;
        buf.push(b'\n');
    }
    file.write_all(&buf)?;
    file.flush()?;
    Ok(())
}

/// Everything that identifies a run's outcome: re-running with an equal key
/// and the same fixtures must reproduce the prediction file byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub method: String,
    pub split: String,
    pub seed: u64,
    pub config: Config,
    pub records_digest: String,
    pub documents_digest: String,
    pub split_digest: String,
    /// Digest of the scripted-client fixture, when one drove the run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture_digest: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub key: RunKey,
    pub predictions_file: String,
    pub created_unix: u64,
    pub completed_unix: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepareCounts {
    pub input_records: usize,
    pub after_stratify: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub adversarial: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepareManifest {
    pub seed: u64,
    pub config: Config,
    pub input_records_digest: String,
    pub input_documents_digest: String,
    pub counts: PrepareCounts,
    /// Test accuracy of the claim-only filter model, when one was trained.
    pub filter_test_accuracy: Option<f64>,
    pub created_unix: u64,
}

/// Resolves a user-supplied path against the workspace directory.
pub fn resolve(workspace: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        workspace.join(path)
    }
}
