//! Data model, JSONL ingestion, and a synthetic planted-evidence generator.
//!
//! Examples are claims paired with a sentence-split source document, a binary
//! gold-evidence mask over those sentences, and a three-way verdict label.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-way verdict. The integer codes index prediction vectors everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerificationLabel {
    Refuted = 0,
    Supported = 1,
    NotEnoughInfo = 2,
}

pub const ALL_LABELS: [VerificationLabel; 3] = [
    VerificationLabel::Refuted,
    VerificationLabel::Supported,
    VerificationLabel::NotEnoughInfo,
];

impl VerificationLabel {
    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Self> {
        match code {
            0 => Ok(VerificationLabel::Refuted),
            1 => Ok(VerificationLabel::Supported),
            2 => Ok(VerificationLabel::NotEnoughInfo),
            _ => Err(Error::Validation(format!("unknown label code {code}"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VerificationLabel::Refuted => "REF",
            VerificationLabel::Supported => "SUP",
            VerificationLabel::NotEnoughInfo => "NEI",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "REF" => Ok(VerificationLabel::Refuted),
            "SUP" => Ok(VerificationLabel::Supported),
            "NEI" => Ok(VerificationLabel::NotEnoughInfo),
            other => Err(Error::Validation(format!("unknown label string '{other}'"))),
        }
    }
}

/// One verification example.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimDocument {
    pub id: String,
    pub claim: Vec<String>,
    pub doc_sentences: Vec<Vec<String>>,
    pub gold_evidence: Vec<u8>,
    pub label: VerificationLabel,
}

impl ClaimDocument {
    pub fn n_doc(&self) -> usize {
        self.doc_sentences.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.claim.is_empty() {
            return Err(Error::Validation(format!("example '{}': empty claim", self.id)));
        }
        if self.doc_sentences.is_empty() {
            return Err(Error::Validation(format!(
                "example '{}': document has no sentences",
                self.id
            )));
        }
        if self.doc_sentences.iter().any(|s| s.is_empty()) {
            return Err(Error::Validation(format!(
                "example '{}': document contains an empty sentence",
                self.id
            )));
        }
        if self.gold_evidence.len() != self.n_doc() {
            return Err(Error::Validation(format!(
                "example '{}': gold evidence mask has {} entries for {} sentences",
                self.id,
                self.gold_evidence.len(),
                self.n_doc()
            )));
        }
        if self.gold_evidence.iter().any(|&g| g > 1) {
            return Err(Error::Validation(format!(
                "example '{}': gold evidence entries must be 0 or 1",
                self.id
            )));
        }
        Ok(())
    }

    /// Indices of gold evidence sentences.
    pub fn gold_indices(&self) -> Vec<usize> {
        self.gold_evidence
            .iter()
            .enumerate()
            .filter(|(_, &g)| g == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// An immutable collection of examples with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub examples: Vec<ClaimDocument>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for ex in &self.examples {
            ex.validate()?;
            if !seen.insert(ex.id.as_str()) {
                return Err(Error::Validation(format!("duplicate example id '{}'", ex.id)));
            }
        }
        Ok(())
    }
}

/// Wire format for one JSONL line. Claims and sentences are space-joined
/// token strings; the evidence mask is aligned to `document` order.
#[derive(Serialize, Deserialize)]
struct ExampleRecord {
    id: String,
    claim: String,
    document: Vec<String>,
    gold_evidence: Vec<u8>,
    label: String,
}

fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

/// Load a JSONL dataset, validating every example. Error messages carry
/// 1-based line numbers.
pub fn load_dataset(path: &Path, split: Split) -> Result<Dataset> {
    let file = fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut examples = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExampleRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let example = ClaimDocument {
            id: record.id,
            claim: tokens(&record.claim),
            doc_sentences: record.document.iter().map(|s| tokens(s)).collect(),
            gold_evidence: record.gold_evidence,
            label: VerificationLabel::parse(&record.label)
                .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?,
        };
        example
            .validate()
            .map_err(|e| Error::Validation(format!("line {line_no}: {e}")))?;
        if !seen_ids.insert(example.id.clone()) {
            return Err(Error::Validation(format!(
                "line {line_no}: duplicate example id '{}'",
                example.id
            )));
        }
        if example.label != VerificationLabel::NotEnoughInfo
            && example.gold_evidence.iter().all(|&g| g == 0)
        {
            eprintln!(
                "warning: line {line_no}: example '{}' is {} but has no gold evidence",
                example.id,
                example.label.as_str()
            );
        }
        examples.push(example);
    }
    Ok(Dataset { split, examples })
}

/// Write a dataset as JSONL with stable field order, one example per line.
pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for ex in &dataset.examples {
        let record = ExampleRecord {
            id: ex.id.clone(),
            claim: ex.claim.join(" "),
            document: ex.doc_sentences.iter().map(|s| s.join(" ")).collect(),
            gold_evidence: ex.gold_evidence.clone(),
            label: ex.label.as_str().to_owned(),
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::Validation(format!("serialization failed: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Configuration for the synthetic corpus generator.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_examples: usize,
    pub vocab_size: usize,
    /// Inclusive range of document lengths in sentences.
    pub sentences_per_doc: (usize, usize),
    pub evidence_sentences_per_doc: usize,
    /// Relative sampling weights for (Refuted, Supported, NotEnoughInfo).
    pub label_mix: [f64; 3],
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_examples: 1000,
            vocab_size: 64,
            sentences_per_doc: (20, 20),
            evidence_sentences_per_doc: 1,
            label_mix: [1.0, 1.0, 1.0],
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 32 {
            return Err(Error::Config("vocab_size must be at least 32".into()));
        }
        let (lo, hi) = self.sentences_per_doc;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "invalid sentences_per_doc range ({lo}, {hi})"
            )));
        }
        if self.evidence_sentences_per_doc == 0 {
            return Err(Error::Config("evidence_sentences_per_doc must be positive".into()));
        }
        if self.evidence_sentences_per_doc >= lo {
            return Err(Error::Config(format!(
                "evidence_sentences_per_doc ({}) must be below the minimum document length ({lo})",
                self.evidence_sentences_per_doc
            )));
        }
        if self.label_mix.iter().any(|&w| w < 0.0) || self.label_mix.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("label_mix weights must be nonnegative with positive sum".into()));
        }
        Ok(())
    }
}

/// The vocabulary is split into three small fact-token pools (subjects,
/// attributes, values) and a large distractor pool. Fact pools are kept small
/// so claim/document token coincidences carry the label signal; distractor
/// sentences never draw from them. Values come in antonym pairs ("val0lo" /
/// "val0hi"): a Refuted document states the opposite value from the claim's
/// pair, the same-scale contradiction shape real refutations take.
struct Vocabulary {
    subjects: Vec<String>,
    attributes: Vec<String>,
    values: Vec<String>,
    distractors: Vec<String>,
}

/// Every document sentence has exactly this many tokens, so token presence
/// contributes a fixed weight to each sentence bag.
const SENTENCE_LEN: usize = 6;

/// Near-miss sentences per document: they repeat the claim's subject and
/// attribute but carry no value token, so surface overlap with the claim
/// cannot by itself identify the evidence. Refuted gold sentences tie with
/// them on token overlap; separating the two requires knowing which value
/// tokens bear on the claim.
const NEAR_MISS_PER_DOC: usize = 2;

impl Vocabulary {
    fn build(vocab_size: usize) -> Self {
        let pool = (vocab_size / 16).clamp(4, 16);
        let value_pairs = (vocab_size / 64).clamp(2, 4);
        let n_distractors = vocab_size - 2 * pool - 2 * value_pairs;
        let mut values = Vec::with_capacity(2 * value_pairs);
        for i in 0..value_pairs {
            values.push(format!("val{i}lo"));
            values.push(format!("val{i}hi"));
        }
        Vocabulary {
            subjects: (0..pool).map(|i| format!("subj{i}")).collect(),
            attributes: (0..pool).map(|i| format!("attr{i}")).collect(),
            values,
            distractors: (0..n_distractors).map(|i| format!("w{i}")).collect(),
        }
    }

    /// The contradicting value: the other member of the pair.
    fn opposite(&self, value: &str) -> String {
        let idx = self.values.iter().position(|v| v == value).unwrap();
        self.values[idx ^ 1].clone()
    }
}

fn sample_label(rng: &mut ChaCha8Rng, mix: &[f64; 3]) -> VerificationLabel {
    let total: f64 = mix.iter().sum();
    let draw = rng.gen_range(0.0..total);
    let mut acc = 0.0;
    for (i, &w) in mix.iter().enumerate() {
        acc += w;
        if draw < acc {
            return VerificationLabel::from_code(i).unwrap();
        }
    }
    VerificationLabel::NotEnoughInfo
}

fn distractor_sentence(rng: &mut ChaCha8Rng, vocab: &Vocabulary, len: usize) -> Vec<String> {
    (0..len)
        .map(|_| vocab.distractors.choose(rng).unwrap().clone())
        .collect()
}

/// A sentence of length `SENTENCE_LEN` containing `planted` tokens in order
/// at random slots, padded with distractor-pool tokens.
fn planted_sentence(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    planted: &[String],
) -> Vec<String> {
    let len = SENTENCE_LEN.max(planted.len());
    let mut slots = rand::seq::index::sample(rng, len, planted.len()).into_vec();
    slots.sort_unstable();
    let mut sentence = Vec::with_capacity(len);
    let mut next = 0usize;
    for slot in 0..len {
        if next < planted.len() && slots[next] == slot {
            sentence.push(planted[next].clone());
            next += 1;
        } else {
            sentence.push(vocab.distractors.choose(rng).unwrap().clone());
        }
    }
    sentence
}

/// A near-miss sentence: the claim's subject and attribute without any value
/// token. It overlaps the claim as much as refuting evidence does (whose
/// value token differs from the claim's), so token overlap alone cannot
/// separate the two.
fn near_miss_sentence(
    rng: &mut ChaCha8Rng,
    vocab: &Vocabulary,
    subject: &str,
    attribute: &str,
) -> Vec<String> {
    planted_sentence(rng, vocab, &[subject.to_owned(), attribute.to_owned()])
}

/// Deterministically generate a planted-evidence corpus.
///
/// Each claim states a (subject, attribute, value) fact. Supported documents
/// embed the fact verbatim in the gold sentences; Refuted documents embed the
/// same fact with the value token swapped for its paired opposite;
/// NotEnoughInfo documents contain only distractor sentences and an all-zero
/// gold mask. Every document additionally carries near-miss distractor
/// sentences (see `near_miss_sentence`) so evidence cannot be found by token
/// overlap alone.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let vocab = Vocabulary::build(cfg.vocab_size);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut examples = Vec::with_capacity(cfg.n_examples);

    for idx in 0..cfg.n_examples {
        let label = sample_label(&mut rng, &cfg.label_mix);
        let (lo, hi) = cfg.sentences_per_doc;
        let n_doc = rng.gen_range(lo..=hi);
        let subject = vocab.subjects.choose(&mut rng).unwrap().clone();
        let attribute = vocab.attributes.choose(&mut rng).unwrap().clone();
        let value = vocab.values.choose(&mut rng).unwrap().clone();
        let claim = vec![subject.clone(), attribute.clone(), value.clone()];

        let n_gold = if label == VerificationLabel::NotEnoughInfo {
            0
        } else {
            cfg.evidence_sentences_per_doc
        };
        let n_near = NEAR_MISS_PER_DOC.min(n_doc - n_gold);

        // Disjoint random positions: the first n_gold carry the fact, the
        // next n_near are near misses, the rest pure distractors.
        let mut positions: Vec<usize> = (0..n_doc).collect();
        positions.shuffle(&mut rng);
        let mut gold_positions = positions[..n_gold].to_vec();
        gold_positions.sort_unstable();
        let mut near_positions = positions[n_gold..n_gold + n_near].to_vec();
        near_positions.sort_unstable();

        // Distribute the fact tokens over the gold sentences so every gold
        // sentence carries at least one of them.
        let fact = [&subject, &attribute, &value];
        let mut fact_per_sentence: Vec<Vec<String>> = vec![Vec::new(); n_gold.max(1)];
        if n_gold > 0 {
            for i in 0..3.max(n_gold) {
                fact_per_sentence[i % n_gold].push(fact[i % 3].clone());
            }
        }

        let mut gold_evidence = vec![0u8; n_doc];
        let mut doc_sentences = Vec::with_capacity(n_doc);
        let mut gold_iter = 0usize;
        let mut near_iter = 0usize;
        for pos in 0..n_doc {
            if gold_iter < n_gold && gold_positions[gold_iter] == pos {
                doc_sentences.push(planted_sentence(&mut rng, &vocab, &fact_per_sentence[gold_iter]));
                gold_evidence[pos] = 1;
                gold_iter += 1;
            } else if near_iter < n_near && near_positions[near_iter] == pos {
                doc_sentences.push(near_miss_sentence(&mut rng, &vocab, &subject, &attribute));
                near_iter += 1;
            } else {
                doc_sentences.push(distractor_sentence(&mut rng, &vocab, SENTENCE_LEN));
            }
        }

        if label == VerificationLabel::Refuted {
            // Swap the value token for its paired opposite; flipping it back
            // recovers the Supported surface form exactly.
            let alt = vocab.opposite(&value);
            for (pos, sentence) in doc_sentences.iter_mut().enumerate() {
                if gold_evidence[pos] == 1 {
                    for tok in sentence.iter_mut() {
                        if *tok == value {
                            *tok = alt.clone();
                        }
                    }
                }
            }
        }

        examples.push(ClaimDocument {
            id: format!("synth-{idx:06}"),
            claim,
            doc_sentences,
            gold_evidence,
            label,
        });
    }

    Ok(Dataset {
        split: Split::Train,
        examples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let file = tempfile::NamedTempFile::new().unwrap();
        let mut f = fs::File::create(file.path()).unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        file
    }

    #[test]
    fn empty_file_loads_as_empty_dataset() {
        let file = write_lines(&[]);
        let ds = load_dataset(file.path(), Split::Train).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let file = write_lines(&[
            r#"{"id":"a","claim":"x y","document":["z w"],"gold_evidence":[0],"label":"NEI"}"#,
            "{not json",
        ]);
        match load_dataset(file.path(), Split::Train) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mask_length_mismatch_reports_line() {
        let file = write_lines(&[
            r#"{"id":"a","claim":"x","document":["a b","c d"],"gold_evidence":[1],"label":"SUP"}"#,
        ]);
        match load_dataset(file.path(), Split::Train) {
            Err(Error::Validation(msg)) => assert!(msg.contains("line 1"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_label_rejected() {
        let file = write_lines(&[
            r#"{"id":"a","claim":"x","document":["a"],"gold_evidence":[0],"label":"MAYBE"}"#,
        ]);
        assert!(matches!(
            load_dataset(file.path(), Split::Train),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"a","claim":"x","document":["b c"],"gold_evidence":[0],"label":"NEI"}"#;
        let file = write_lines(&[line, line]);
        assert!(matches!(
            load_dataset(file.path(), Split::Train),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn empty_sentence_rejected() {
        let file = write_lines(&[
            r#"{"id":"a","claim":"x","document":["a b","  "],"gold_evidence":[0,1],"label":"SUP"}"#,
        ]);
        assert!(matches!(
            load_dataset(file.path(), Split::Train),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = SynthConfig {
            n_examples: 50,
            ..SynthConfig::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);

        let dir = tempfile::tempdir().unwrap();
        let pa = dir.path().join("a.jsonl");
        let pb = dir.path().join("b.jsonl");
        save_dataset(&a, &pa).unwrap();
        save_dataset(&b, &pb).unwrap();
        assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap());
    }

    #[test]
    fn label_mix_is_roughly_balanced() {
        let cfg = SynthConfig {
            n_examples: 3000,
            seed: 7,
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut counts = [0usize; 3];
        for ex in &ds.examples {
            counts[ex.label.code()] += 1;
        }
        for c in counts {
            assert!(
                (c as i64 - 1000).unsigned_abs() <= 150,
                "class count {c} outside 1000 +/- 150"
            );
        }
    }

    #[test]
    fn supported_examples_plant_the_value_token_only_in_gold_sentences() {
        let cfg = SynthConfig {
            n_examples: 300,
            seed: 11,
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        let mut checked = 0;
        for ex in &ds.examples {
            if ex.label != VerificationLabel::Supported {
                continue;
            }
            checked += 1;
            let value = &ex.claim[2];
            let mut in_gold = false;
            for (i, sentence) in ex.doc_sentences.iter().enumerate() {
                let contains = sentence.iter().any(|t| t == value);
                if ex.gold_evidence[i] == 1 {
                    in_gold |= contains;
                } else {
                    assert!(!contains, "value token leaked into a distractor sentence");
                }
            }
            assert!(in_gold, "value token missing from gold sentences of {}", ex.id);
        }
        assert!(checked > 50);
    }

    #[test]
    fn refuted_examples_flip_back_to_supported_form() {
        let cfg = SynthConfig {
            n_examples: 200,
            seed: 13,
            ..SynthConfig::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for ex in &ds.examples {
            if ex.label != VerificationLabel::Refuted {
                continue;
            }
            let claim_value = &ex.claim[2];
            // The substituted value sits in gold sentences and differs from
            // the claim's value; substituting it back must re-plant the
            // claim's value in at least one gold sentence.
            let mut substituted = None;
            for (i, sentence) in ex.doc_sentences.iter().enumerate() {
                if ex.gold_evidence[i] == 1 {
                    for tok in sentence {
                        if tok.starts_with("val") {
                            assert_ne!(tok, claim_value);
                            substituted = Some(tok.clone());
                        }
                    }
                }
            }
            if let Some(alt) = substituted {
                let mut flipped = ex.clone();
                for (i, sentence) in flipped.doc_sentences.iter_mut().enumerate() {
                    if flipped.gold_evidence[i] == 1 {
                        for tok in sentence.iter_mut() {
                            if *tok == alt {
                                *tok = claim_value.clone();
                            }
                        }
                    }
                }
                let restored = flipped
                    .doc_sentences
                    .iter()
                    .enumerate()
                    .any(|(i, s)| flipped.gold_evidence[i] == 1 && s.iter().any(|t| t == claim_value));
                assert!(restored);
            }
        }
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = SynthConfig {
            sentences_per_doc: (3, 5),
            evidence_sentences_per_doc: 3,
            ..SynthConfig::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn save_then_load_single_example() {
        let ds = generate_synthetic(&SynthConfig {
            n_examples: 1,
            ..SynthConfig::default()
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.jsonl");
        save_dataset(&ds, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        let back = load_dataset(&path, Split::Train).unwrap();
        assert_eq!(back, ds);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn roundtrip_and_invariants_over_random_configs(
            seed in 0u64..1000,
            n in 1usize..40,
            lo in 2usize..10,
            extra in 0usize..5,
            evidence in 1usize..2,
        ) {
            let cfg = SynthConfig {
                n_examples: n,
                vocab_size: 200,
                sentences_per_doc: (lo, lo + extra),
                evidence_sentences_per_doc: evidence.min(lo - 1),
                label_mix: [1.0, 1.0, 1.0],
                seed,
            };
            let ds = generate_synthetic(&cfg).unwrap();
            ds.validate().unwrap();
            for ex in &ds.examples {
                prop_assert!(ex.n_doc() >= lo && ex.n_doc() <= lo + extra);
                if ex.label == VerificationLabel::NotEnoughInfo {
                    prop_assert!(ex.gold_evidence.iter().all(|&g| g == 0));
                } else {
                    prop_assert_eq!(
                        ex.gold_evidence.iter().filter(|&&g| g == 1).count(),
                        cfg.evidence_sentences_per_doc
                    );
                }
            }

            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("ds.jsonl");
            save_dataset(&ds, &path).unwrap();
            let back = load_dataset(&path, Split::Train).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
