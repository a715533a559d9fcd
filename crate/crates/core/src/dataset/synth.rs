//! Deterministic synthetic corpus generator. Claims are semicolon-joined
//! templated features; each not-novel claim's features are paraphrased into
//! the paired prior art document (those paragraph ids become gold
//! references), and each granted claim inserts fresh features so the added
//! spans are known by construction.

use crate::claimtext::segment_claim_heuristic;
use crate::model::{
    ClaimVersion, ExaminationRecord, FeatureReferences, NoveltyLabel, Passage, PassageId,
    PriorArtDocument,
};
use crate::textsim::diff_added_spans;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NOUNS: &[&str] = &[
    "housing", "sensor", "controller", "valve", "membrane", "circuit", "actuator", "conduit",
    "electrode", "fastener", "rotor", "substrate", "nozzle", "bearing", "antenna", "gasket",
];

const ADJECTIVES: &[&str] = &[
    "elongated", "flexible", "annular", "conductive", "porous", "rigid", "thermal", "resilient",
    "tubular", "laminated", "coaxial", "perforated",
];

const VERBS: &[&str] = &[
    "engage", "support", "convey", "regulate", "monitor", "seal", "align", "couple", "actuate",
    "filter", "absorb", "deflect",
];

const GERUNDS: &[&str] = &[
    "conveying", "sealing", "monitoring", "regulating", "filtering", "supporting", "aligning",
    "cooling",
];

const DOMAIN_CLASSES: &[&str] =
    &["A61B", "B29C", "C08L", "F16K", "G01N", "G06F", "H01L", "H04W"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    /// Make most granted claims several times the feature count of their
    /// initial versions instead of one inserted feature. A small slice swaps
    /// a single feature in place instead, so length stratification is left
    /// with mixed-class bins whose retained claims are textually
    /// indistinguishable.
    pub length_skew: bool,
    /// Attach reference numerals like " (12)" to granted claims only, as a
    /// removable spurious signal.
    pub plant_numerals: bool,
    /// Unrelated paragraphs mixed into each prior art document.
    pub filler_paragraphs: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions { length_skew: false, plant_numerals: true, filler_paragraphs: 3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<ExaminationRecord>,
    pub documents: Vec<PriorArtDocument>,
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).unwrap()
}

/// One claim feature. The separator is fixed at creation so inserting a
/// feature later never rewrites existing text: the granted claim stays a
/// pure-insertion edit of the initial claim.
#[derive(Clone)]
struct FeaturePart {
    text: String,
    separator: &'static str,
}

fn make_feature(rng: &mut ChaCha8Rng) -> FeaturePart {
    let noun = pick(rng, NOUNS);
    let other = pick(rng, NOUNS);
    let adj = pick(rng, ADJECTIVES);
    let verb = pick(rng, VERBS);
    let mut text = match rng.random_range(0..4u8) {
        0 => format!("a {adj} {noun} configured to {verb} the {other}"),
        1 => format!("wherein the {noun} {verb}s a {adj} {other}"),
        2 => format!("a {noun} arranged to {verb} each {adj} {other}"),
        _ => format!("at least one {adj} {noun} that {verb}s the {other}"),
    };
    if rng.random_bool(0.4) {
        let third = pick(rng, NOUNS);
        let tail = match rng.random_range(0..3u8) {
            0 => format!(" in response to a signal from the {third}"),
            1 => format!(" along a longitudinal axis of the {third}"),
            _ => format!(" during operation of the {third}"),
        };
        text.push_str(&tail);
    }
    let separator = if rng.random_bool(0.3) { ";\n" } else { "; " };
    FeaturePart { text, separator }
}

fn make_preamble(rng: &mut ChaCha8Rng) -> String {
    let noun = pick(rng, NOUNS);
    let other = pick(rng, NOUNS);
    let gerund = pick(rng, GERUNDS);
    format!("A {noun} assembly for {gerund} a {other}, comprising:")
}

/// Joins the preamble and features into claim text. Every feature except the
/// last contributes its own separator; the claim ends with a period.
fn assemble_claim(preamble: &str, features: &[FeaturePart], numerals: Option<&mut u32>) -> String {
    let mut rendered: Vec<String> = features.iter().map(|f| f.text.clone()).collect();
    if let Some(counter) = numerals {
        for text in &mut rendered {
            *text = attach_numeral(text, counter);
        }
    }
    let mut claim = format!("{preamble} ");
    for (i, text) in rendered.iter().enumerate() {
        claim.push_str(text);
        if i + 1 < rendered.len() {
            claim.push_str(features[i].separator);
        }
    }
    claim.push('.');
    claim
}

/// Inserts a reference numeral after the first noun of the feature, patent
/// style: "the valve" becomes "the valve (12)".
fn attach_numeral(feature_text: &str, counter: &mut u32) -> String {
    let words: Vec<&str> = feature_text.split(' ').collect();
    let Some(at) = words.iter().position(|w| NOUNS.contains(w)) else {
        return feature_text.to_string();
    };
    let numeral = *counter;
    *counter += 2;
    let mut out = Vec::with_capacity(words.len() + 1);
    out.extend_from_slice(&words[..=at]);
    let tag = format!("({numeral})");
    out.push(&tag);
    out.extend_from_slice(&words[at + 1..]);
    out.join(" ")
}

/// Restates a feature inside a prior art sentence frame with a light
/// substitution, keeping most content tokens verbatim.
fn paraphrase(rng: &mut ChaCha8Rng, feature_text: &str) -> String {
    let core = feature_text.replace("configured to", "adapted to");
    match rng.random_range(0..3u8) {
        0 => format!("In one embodiment there is provided {core}, as described herein."),
        1 => format!("The disclosed arrangement provides {core}."),
        _ => format!("According to this disclosure, {core} during normal use."),
    }
}

fn filler_paragraph(rng: &mut ChaCha8Rng) -> String {
    let adj = pick(rng, ADJECTIVES);
    let noun = pick(rng, NOUNS);
    let verb = pick(rng, VERBS);
    let other = pick(rng, NOUNS);
    let third = pick(rng, NOUNS);
    format!("The {adj} {noun} described in earlier examples {verb}s a {other} mounted on the {third}.")
}

/// Generates `n_applications` applications, each with an initial (not novel)
/// and granted (novel) claim plus one prior art document, with full gold
/// annotations. Output is a deterministic function of the seed.
pub fn generate_synthetic_corpus(
    seed: u64,
    n_applications: usize,
    options: &SynthOptions,
) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_applications * 2);
    let mut documents = Vec::with_capacity(n_applications);

    for app_idx in 0..n_applications {
        let application_id = format!("APP{app_idx:05}");
        let doc_id = format!("D{app_idx:05}");
        let mut domain_classes = vec![pick(&mut rng, DOMAIN_CLASSES).to_string()];
        if rng.random_bool(0.3) {
            let second = pick(&mut rng, DOMAIN_CLASSES).to_string();
            if second != domain_classes[0] {
                domain_classes.push(second);
            }
        }

        let preamble = make_preamble(&mut rng);
        // Skewed applications balloon the granted claim. Overlap applications
        // swap one feature instead, so their granted text keeps the exact
        // initial feature-count and template distribution.
        let skew_app = options.length_skew && rng.random_bool(0.9);
        let n_features = rng.random_range(4..=8usize);
        let features: Vec<FeaturePart> =
            (0..n_features).map(|_| make_feature(&mut rng)).collect();
        let initial_claim = assemble_claim(&preamble, &features, None);

        // Prior art document: one paraphrase paragraph per initial feature,
        // fillers interleaved, plus an abstract and two claim passages. The
        // first feature is sometimes also paraphrased into claim 2.
        let cite_claim_two = rng.random_bool(0.25);
        let mut passages = vec![Passage {
            id: PassageId::Abstract,
            text: format!(
                "A {} assembly with a {} {} and a {} for {} applications.",
                pick(&mut rng, NOUNS),
                pick(&mut rng, ADJECTIVES),
                pick(&mut rng, NOUNS),
                pick(&mut rng, NOUNS),
                pick(&mut rng, GERUNDS),
            ),
        }];
        passages.push(Passage {
            id: PassageId::Claim(1),
            text: format!(
                "A {} apparatus comprising a {} and a {} {}.",
                pick(&mut rng, NOUNS),
                pick(&mut rng, NOUNS),
                pick(&mut rng, ADJECTIVES),
                pick(&mut rng, NOUNS),
            ),
        });
        let claim_two_text = if cite_claim_two {
            paraphrase(&mut rng, &features[0].text)
        } else {
            format!(
                "The apparatus wherein the {} is {}.",
                pick(&mut rng, NOUNS),
                pick(&mut rng, ADJECTIVES),
            )
        };
        passages.push(Passage { id: PassageId::Claim(2), text: claim_two_text });

        let mut fillers_left = options.filler_paragraphs;
        let mut next_par = 1u32;
        let mut paraphrase_pars = Vec::with_capacity(n_features);
        for feature in &features {
            if fillers_left > 0 {
                passages.push(Passage {
                    id: PassageId::Paragraph(next_par),
                    text: filler_paragraph(&mut rng),
                });
                next_par += 1;
                fillers_left -= 1;
            }
            passages.push(Passage {
                id: PassageId::Paragraph(next_par),
                text: paraphrase(&mut rng, &feature.text),
            });
            paraphrase_pars.push(next_par);
            next_par += 1;
        }
        for _ in 0..fillers_left {
            passages.push(Passage {
                id: PassageId::Paragraph(next_par),
                text: filler_paragraph(&mut rng),
            });
            next_par += 1;
        }
        documents.push(PriorArtDocument { doc_id: doc_id.clone(), passages });

        // Gold annotations for the initial claim come from the same heuristic
        // the pipeline uses, so segment index 0 is the preamble; it gets no
        // reference entry, which exercises the empty-reference exclusion.
        let segmentation = segment_claim_heuristic(&initial_claim)
            .expect("generated claim is never empty");
        debug_assert_eq!(segmentation.len(), n_features + 1);
        let mut references = FeatureReferences::default();
        for (body_idx, par) in paraphrase_pars.iter().enumerate() {
            let mut ids = vec![PassageId::Paragraph(*par)];
            if body_idx == 0 && cite_claim_two {
                ids.push(PassageId::Claim(2));
            }
            references.insert(body_idx + 1, ids);
        }

        records.push(ExaminationRecord {
            application_id: application_id.clone(),
            claim_version: ClaimVersion::Initial,
            claim_text: initial_claim.clone(),
            novelty_label: NoveltyLabel::NotNovel,
            prior_art_doc_id: doc_id.clone(),
            gold_segmentation: Some(segmentation),
            gold_references: Some(references),
            added_spans: None,
            domain_classes: domain_classes.clone(),
        });

        // Granted claim: fresh features (never paraphrased into the prior
        // art) make the claim as a whole novel over the document. Skewed
        // applications insert many; overlap applications replace one in
        // place, which keeps the claim length distribution untouched.
        let mut granted_features = features.clone();
        if skew_app {
            let factor = rng.random_range(2.5..3.2f64);
            let n_inserted = ((n_features as f64 * factor).round() as usize).max(1);
            for _ in 0..n_inserted {
                let at = rng.random_range(0..=granted_features.len());
                granted_features.insert(at, make_feature(&mut rng));
            }
        } else if options.length_skew {
            let at = rng.random_range(0..granted_features.len());
            granted_features[at] = make_feature(&mut rng);
        } else {
            let at = rng.random_range(0..=granted_features.len());
            granted_features.insert(at, make_feature(&mut rng));
        }
        let mut numeral_counter = 10u32;
        let numerals = options.plant_numerals.then_some(&mut numeral_counter);
        let granted_claim = assemble_claim(&preamble, &granted_features, numerals);
        let added_spans = diff_added_spans(&initial_claim, &granted_claim);

        records.push(ExaminationRecord {
            application_id,
            claim_version: ClaimVersion::Granted,
            claim_text: granted_claim,
            novelty_label: NoveltyLabel::Novel,
            prior_art_doc_id: doc_id,
            gold_segmentation: None,
            gold_references: None,
            added_spans: Some(added_spans),
            domain_classes,
        });
    }

    SyntheticCorpus { records, documents }
}
