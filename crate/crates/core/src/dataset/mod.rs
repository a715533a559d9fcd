//! Dataset hygiene and construction: length stratification, application-level
//! splitting, adversarial filtering, corpus-wide numeral removal, citation
//! overlap, and a synthetic corpus generator for desk-scale verification.

mod synth;

pub use synth::{generate_synthetic_corpus, SynthOptions, SyntheticCorpus};

use crate::claimtext::strip_reference_numerals;
use crate::model::{
    ClaimVerdict, ExaminationRecord, NoveltyLabel, PassageId, Segmentation, Span, SpanSet,
};
use crate::textsim::tokenize;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("no records to process")]
    EmptyCorpus,
    #[error("split ratios {0:?} do not sum to 1")]
    InvalidRatios([f64; 3]),
    #[error("stratification needs at least one bin")]
    InvalidBins,
    #[error("record {0} has no filter prediction")]
    MissingPrediction(String),
    #[error("record {0} is not in the test split")]
    NotInTest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitEntry {
    pub split: SplitName,
    pub adversarial: bool,
}

/// Total assignment of record ids to train/val/test, with an adversarial
/// marker on a subset of the test records.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SplitAssignment(pub BTreeMap<String, SplitEntry>);

impl SplitAssignment {
    pub fn ids_in(&self, split: SplitName) -> Vec<String> {
        self.0
            .iter()
            .filter(|(_, e)| e.split == split)
            .map(|(id, _)| id.clone())
            .collect()
    }

    pub fn adversarial_ids(&self) -> Vec<String> {
        self.0
            .iter()
            .filter(|(_, e)| e.adversarial)
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Marks test records as adversarial. Ids outside the test split are
    /// rejected, preserving the adversarial ⟹ test invariant.
    pub fn mark_adversarial(&mut self, ids: &[String]) -> Result<(), DatasetError> {
        for id in ids {
            match self.0.get_mut(id) {
                Some(e) if e.split == SplitName::Test => e.adversarial = true,
                _ => return Err(DatasetError::NotInTest(id.clone())),
            }
        }
        Ok(())
    }
}

fn claim_word_count(record: &ExaminationRecord) -> usize {
    tokenize(&record.claim_text).len()
}

/// Balances novelty labels within equal-width claim-length bins: claim length
/// is the word count, bins cover [min, max] length, and within each bin the
/// majority class is subsampled (seeded) down to the minority count. Bins
/// where only one class occurs are dropped entirely. Returns retained record
/// ids in input order.
pub fn stratify_balance(
    records: &[ExaminationRecord],
    n_bins: usize,
    seed: u64,
) -> Result<Vec<String>, DatasetError> {
    if n_bins == 0 {
        return Err(DatasetError::InvalidBins);
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }
    let lengths: Vec<usize> = records.iter().map(claim_word_count).collect();
    let min = *lengths.iter().min().unwrap() as f64;
    let max = *lengths.iter().max().unwrap() as f64;
    let bin_of = |len: usize| -> usize {
        if max == min {
            return 0;
        }
        let raw = ((len as f64 - min) / (max - min) * n_bins as f64).floor() as usize;
        raw.min(n_bins - 1)
    };

    let mut bins: BTreeMap<usize, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for (record, len) in records.iter().zip(&lengths) {
        let entry = bins.entry(bin_of(*len)).or_default();
        match record.novelty_label {
            NoveltyLabel::Novel => entry.0.push(record.record_id()),
            NoveltyLabel::NotNovel => entry.1.push(record.record_id()),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained: BTreeSet<String> = BTreeSet::new();
    for (_, (mut novel, mut not_novel)) in bins {
        let target = novel.len().min(not_novel.len());
        if target == 0 {
            continue;
        }
        // Sampling order is fixed by record id sort, not input order, so the
        // outcome does not depend on how the corpus file was arranged.
        for class in [&mut novel, &mut not_novel] {
            class.sort_unstable();
            class.shuffle(&mut rng);
            retained.extend(class.drain(..).take(target));
        }
    }
    Ok(records
        .iter()
        .map(|r| r.record_id())
        .filter(|id| retained.contains(id))
        .collect())
}

/// Assigns records to train/val/test with the given ratios. Applications are
/// the unit of assignment so both claim versions of one application land in
/// the same split: applications are shuffled (seeded) and filled contiguously
/// into train, then val, with test absorbing the residue. Targets use
/// largest-remainder rounding over record counts.
pub fn split(
    records: &[ExaminationRecord],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<SplitAssignment, DatasetError> {
    let r = [ratios.0, ratios.1, ratios.2];
    if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 || r.iter().any(|x| *x < 0.0) {
        return Err(DatasetError::InvalidRatios(r));
    }
    if records.is_empty() {
        return Err(DatasetError::EmptyCorpus);
    }

    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for record in records {
        groups.entry(&record.application_id).or_default().push(record.record_id());
    }
    let mut apps: Vec<(&str, Vec<String>)> = groups.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    apps.shuffle(&mut rng);

    let n = records.len();
    let targets = largest_remainder_targets(n, &r);

    let mut assignment = BTreeMap::new();
    let mut counts = [0usize; 3];
    for (_, record_ids) in apps {
        let slot = if counts[0] < targets[0] {
            0
        } else if counts[1] < targets[1] {
            1
        } else {
            2
        };
        let split = [SplitName::Train, SplitName::Val, SplitName::Test][slot];
        counts[slot] += record_ids.len();
        for id in record_ids {
            assignment.insert(id, SplitEntry { split, adversarial: false });
        }
    }
    Ok(SplitAssignment(assignment))
}

/// Integer targets summing to `n`: floor each share, then hand the remainder
/// out by descending fractional part (ties to the earlier split).
fn largest_remainder_targets(n: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut targets = [raw[0] as usize, raw[1] as usize, raw[2] as usize];
    let assigned: usize = targets.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(n - assigned) {
        targets[order[i % 3]] += 1;
    }
    targets
}

/// Keeps the test records the filter model misclassified, then subsamples the
/// majority label (seeded) down to the minority count so the kept set is
/// exactly balanced. The filter model scores 0 accuracy on the result by
/// construction. Returns ids in input order.
pub fn adversarial_filter(
    test_records: &[&ExaminationRecord],
    filter_predictions: &BTreeMap<String, ClaimVerdict>,
    seed: u64,
) -> Result<Vec<String>, DatasetError> {
    let mut novel = Vec::new();
    let mut not_novel = Vec::new();
    for record in test_records {
        let id = record.record_id();
        let predicted = filter_predictions
            .get(&id)
            .ok_or_else(|| DatasetError::MissingPrediction(id.clone()))?;
        if NoveltyLabel::from(*predicted) != record.novelty_label {
            match record.novelty_label {
                NoveltyLabel::Novel => novel.push(id),
                NoveltyLabel::NotNovel => not_novel.push(id),
            }
        }
    }
    let target = novel.len().min(not_novel.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut retained: BTreeSet<String> = BTreeSet::new();
    for class in [&mut novel, &mut not_novel] {
        class.sort_unstable();
        class.shuffle(&mut rng);
        retained.extend(class.drain(..).take(target));
    }
    Ok(test_records
        .iter()
        .map(|r| r.record_id())
        .filter(|id| retained.contains(id))
        .collect())
}

/// Removes reference numerals from every claim and remaps gold segmentation
/// spans and added spans through the removals: a span shrinks by the number
/// of removed characters before each endpoint, and spans that collapse to
/// nothing are dropped (with their reference entries).
pub fn strip_corpus_numerals(records: &[ExaminationRecord]) -> Vec<ExaminationRecord> {
    records.iter().map(strip_record_numerals).collect()
}

fn strip_record_numerals(record: &ExaminationRecord) -> ExaminationRecord {
    let stripped = strip_reference_numerals(&record.claim_text);
    if stripped.removed_spans.is_empty() {
        return record.clone();
    }
    let removed: Vec<Span> = stripped.removed_spans.0.clone();
    let map_pos = |p: usize| -> usize {
        let gone: usize =
            removed.iter().map(|r| p.min(r.end).saturating_sub(r.start).min(r.len())).sum();
        p - gone
    };
    let map_span = |s: Span| -> Option<Span> {
        let mapped = Span::new(map_pos(s.start), map_pos(s.end));
        (!mapped.is_empty()).then_some(mapped)
    };

    let mut out = record.clone();
    out.claim_text = stripped.cleaned_text;

    if let Some(seg) = &record.gold_segmentation {
        // Dropped features shift the indices gold references point at.
        let mut index_map: BTreeMap<usize, usize> = BTreeMap::new();
        let mut spans = Vec::new();
        for (old_idx, feature) in seg.features.iter().enumerate() {
            if let Some(mapped) = map_span(feature.span) {
                index_map.insert(old_idx, spans.len());
                spans.push(mapped);
            }
        }
        out.gold_segmentation = Some(Segmentation::from_spans(&out.claim_text, spans));
        if let Some(refs) = &record.gold_references {
            let mut remapped = crate::model::FeatureReferences::default();
            for (old_idx, ids) in refs.iter() {
                if let Some(&new_idx) = index_map.get(&old_idx) {
                    remapped.insert(new_idx, ids.iter().copied());
                }
            }
            out.gold_references = Some(remapped);
        }
    }

    if let Some(added) = &record.added_spans {
        out.added_spans =
            Some(SpanSet::from_unmerged(added.iter().filter_map(|s| map_span(*s))));
    }
    out
}

/// Fraction of coarse citations that also appear in the fine-grained set:
/// |coarse ∩ fine| / |coarse|, with 1.0 for an empty coarse set.
pub fn citation_overlap(coarse: &BTreeSet<PassageId>, fine: &BTreeSet<PassageId>) -> f64 {
    if coarse.is_empty() {
        return 1.0;
    }
    coarse.intersection(fine).count() as f64 / coarse.len() as f64
}
