//! Metrics: micro/macro F1 over verdicts, evidence precision/recall/F1,
//! smoothed BLEU between retrieved and gold evidence text, probability-delta
//! faithfulness diagnostics, and the k sweep.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, VerificationLabel, ALL_LABELS};
use crate::encoder::{EmbeddingSource, SentenceEmbeddingMatrix};
use crate::error::{Error, Result};
use crate::retriever::{
    complement_view, evidence_view, score_sentences, select_top_k, EvidenceMask, RetrieverParams,
    SentenceScores, ViewMode,
};
use crate::trainer::{train_phase3_revisit, TrainConfig, TrainedSystem};
use crate::verifier::{predict, VerifierParams};

/// Precision / recall / F1 for one verdict class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub label: VerificationLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Micro F1 (global accuracy for single-label multiclass), macro F1
/// (unweighted mean of per-class F1, absent classes counting 0), and the
/// per-class breakdown.
pub fn micro_macro_f1(
    preds: &[VerificationLabel],
    golds: &[VerificationLabel],
) -> Result<(f64, f64, [ClassMetrics; 3])> {
    if preds.len() != golds.len() {
        return Err(Error::Dimension(format!(
            "{} predictions vs {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Dimension("cannot score zero examples".into()));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (p, g) in preds.iter().zip(golds) {
        confusion[g.code()][p.code()] += 1;
    }
    let mut per_class = [ClassMetrics {
        label: VerificationLabel::Refuted,
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
        support: 0,
    }; 3];
    let mut correct = 0usize;
    let mut macro_sum = 0.0;
    for label in ALL_LABELS {
        let c = label.code();
        let tp = confusion[c][c];
        let fp: usize = (0..3).filter(|&g| g != c).map(|g| confusion[g][c]).sum();
        let fn_: usize = (0..3).filter(|&p| p != c).map(|p| confusion[c][p]).sum();
        let (precision, recall, f1) = prf(tp, fp, fn_);
        per_class[c] = ClassMetrics {
            label,
            precision,
            recall,
            f1,
            support: confusion[c].iter().sum(),
        };
        correct += tp;
        macro_sum += f1;
    }
    let micro = correct as f64 / preds.len() as f64;
    Ok((micro, macro_sum / 3.0, per_class))
}

/// Set-overlap precision / recall / F1 of a selection against the gold mask.
/// Empty gold with an empty selection scores perfect; empty gold with a
/// non-empty selection scores precision 0 (recall is vacuously 1).
pub fn evidence_prf(mask: &EvidenceMask, gold: &[u8]) -> Result<(f64, f64, f64)> {
    if mask.m.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "selection over {} sentences vs gold mask of {}",
            mask.m.len(),
            gold.len()
        )));
    }
    let tp = mask
        .m
        .iter()
        .zip(gold)
        .filter(|(&sel, &g)| sel && g == 1)
        .count();
    let pred = mask.selected_count();
    let gold_count = gold.iter().filter(|&&g| g == 1).count();
    if gold_count == 0 {
        return Ok(if pred == 0 { (1.0, 1.0, 1.0) } else { (0.0, 1.0, 0.0) });
    }
    let precision = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
    let recall = tp as f64 / gold_count as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f1))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU-4 with uniform weights, brevity penalty, and add-one smoothing of
/// zero higher-order counts. Unigram precision is left unsmoothed, so fully
/// disjoint texts score 0.
pub fn bleu(retrieved: &[String], gold: &[String]) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Validation("gold evidence text is empty".into()));
    }
    let c = retrieved.len();
    if c == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=4usize {
        let total = c.saturating_sub(n - 1);
        let gold_counts = ngram_counts(gold, n);
        let mut matched = 0usize;
        let mut seen: HashMap<&[String], usize> = HashMap::new();
        if c >= n {
            for window in retrieved.windows(n) {
                let used = seen.entry(window).or_insert(0);
                if *used < gold_counts.get(window).copied().unwrap_or(0) {
                    matched += 1;
                }
                *used += 1;
            }
        }
        let p = if n == 1 {
            if matched == 0 {
                return Ok(0.0);
            }
            matched as f64 / total as f64
        } else if total == 0 {
            1.0
        } else if matched == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += 0.25 * p.ln();
    }
    let r = gold.len() as f64;
    let bp = if c as f64 > r { 1.0 } else { (1.0 - r / c as f64).exp() };
    Ok((bp * log_sum.exp()).clamp(0.0, 1.0))
}

/// Probability-delta diagnostics under a fixed verifier and hard views.
/// `fullness_delta` is the drop in the predicted label's probability when the
/// selected evidence is removed; `sufficiency_delta` the drop when only the
/// evidence is kept. High fullness and near-zero sufficiency indicate the
/// selection carries the verifier's decision.
pub fn faithfulness_deltas(
    verifier: &VerifierParams,
    s: &SentenceEmbeddingMatrix,
    mask: &EvidenceMask,
) -> Result<(f64, f64)> {
    let zeros = SentenceScores {
        s: vec![0.0; mask.m.len()],
    };
    let full = predict(s, verifier)?;
    let predicted = full.argmax();
    let complement = complement_view(s, &zeros, mask, ViewMode::Hard)?;
    let evidence = evidence_view(s, &zeros, mask, ViewMode::Hard)?;
    let p_complement = predict(&complement.matrix, verifier)?.prob(predicted);
    let p_evidence = predict(&evidence.matrix, verifier)?.prob(predicted);
    let p_full = full.prob(predicted);
    Ok((p_full - p_complement, p_full - p_evidence))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Dataset-level evaluation of a trained system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_examples: usize,
    pub k_percent: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassReport>,
    /// Micro-aggregated over all selected/gold sentences in the dataset.
    pub evidence_precision: f64,
    pub evidence_recall: f64,
    pub evidence_f1: f64,
    /// Mean over examples with non-empty gold evidence.
    pub bleu: f64,
    pub n_bleu_examples: usize,
    pub mean_fullness_delta: f64,
    pub mean_sufficiency_delta: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Validation(format!("report serialization failed: {e}")))
    }
}

/// Evaluate a trained system: verdicts come from the revisited verifier on
/// hard evidence views, evidence quality from the retriever's selection, and
/// the faithfulness deltas from the phase-1 verifier that saw full documents.
pub fn evaluate_system(
    system: &TrainedSystem,
    data: &Dataset,
    k_percent: f64,
) -> Result<EvalReport> {
    if data.is_empty() {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    data.validate()?;
    let mut preds = Vec::with_capacity(data.len());
    let mut golds = Vec::with_capacity(data.len());
    let (mut tp, mut pred_total, mut gold_total) = (0usize, 0usize, 0usize);
    let mut bleu_sum = 0.0;
    let mut bleu_count = 0usize;
    let mut fullness_sum = 0.0;
    let mut sufficiency_sum = 0.0;

    for ex in &data.examples {
        let s = system.encoder.encode_example(ex)?;
        let scores = score_sentences(&s, &system.retriever)?;
        let mask = select_top_k(&scores, k_percent)?;
        let view = evidence_view(&s, &scores, &mask, ViewMode::Hard)?;
        preds.push(predict(&view.matrix, &system.verifier_revisited)?.argmax());
        golds.push(ex.label);

        for (i, &selected) in mask.m.iter().enumerate() {
            let gold = ex.gold_evidence[i] == 1;
            if selected && gold {
                tp += 1;
            }
            if selected {
                pred_total += 1;
            }
            if gold {
                gold_total += 1;
            }
        }

        let gold_indices = ex.gold_indices();
        if !gold_indices.is_empty() {
            let retrieved: Vec<String> = mask
                .selected_indices()
                .iter()
                .flat_map(|&i| ex.doc_sentences[i].iter().cloned())
                .collect();
            let gold_text: Vec<String> = gold_indices
                .iter()
                .flat_map(|&i| ex.doc_sentences[i].iter().cloned())
                .collect();
            bleu_sum += bleu(&retrieved, &gold_text)?;
            bleu_count += 1;
        }

        let (fullness, sufficiency) = faithfulness_deltas(&system.verifier_phase1, &s, &mask)?;
        fullness_sum += fullness;
        sufficiency_sum += sufficiency;
    }

    let (micro, macro_f1, per_class) = micro_macro_f1(&preds, &golds)?;
    let precision = if pred_total == 0 { 1.0 } else { tp as f64 / pred_total as f64 };
    let recall = if gold_total == 0 { 1.0 } else { tp as f64 / gold_total as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    let n = data.len() as f64;
    Ok(EvalReport {
        n_examples: data.len(),
        k_percent,
        micro_f1: micro,
        macro_f1,
        per_class: per_class
            .iter()
            .map(|m| ClassReport {
                label: m.label.as_str().to_owned(),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                support: m.support,
            })
            .collect(),
        evidence_precision: precision,
        evidence_recall: recall,
        evidence_f1: f1,
        bleu: if bleu_count == 0 { 0.0 } else { bleu_sum / bleu_count as f64 },
        n_bleu_examples: bleu_count,
        mean_fullness_delta: fullness_sum / n,
        mean_sufficiency_delta: sufficiency_sum / n,
    })
}

/// One point of the k sweep.
#[derive(Debug, Clone, Copy)]
pub struct KSweepPoint {
    pub k_percent: f64,
    pub micro_f1: f64,
    pub macro_f1: f64,
}

/// For each k: re-select evidence, retrain the revisit phase, and score the
/// dev split. Phases 1 and 2 are reused as-is.
pub fn k_sweep(
    train: &Dataset,
    dev: &Dataset,
    cfg: &TrainConfig,
    encoder: &EmbeddingSource,
    verifier_phase1: &VerifierParams,
    retriever: &RetrieverParams,
    k_values: &[f64],
) -> Result<Vec<KSweepPoint>> {
    if k_values.is_empty() {
        return Err(Error::Config("k sweep needs at least one k value".into()));
    }
    let mut points = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let mut cfg_k = cfg.clone();
        cfg_k.k_percent = k;
        let (revisited, _) =
            train_phase3_revisit(train, None, &cfg_k, encoder, retriever, verifier_phase1)?;
        let mut preds = Vec::with_capacity(dev.len());
        let mut golds = Vec::with_capacity(dev.len());
        for ex in &dev.examples {
            let s = encoder.encode_example(ex)?;
            let scores = score_sentences(&s, retriever)?;
            let mask = select_top_k(&scores, k)?;
            let view = evidence_view(&s, &scores, &mask, ViewMode::Hard)?;
            preds.push(predict(&view.matrix, &revisited)?.argmax());
            golds.push(ex.label);
        }
        let (micro, macro_f1, _) = micro_macro_f1(&preds, &golds)?;
        points.push(KSweepPoint {
            k_percent: k,
            micro_f1: micro,
            macro_f1,
        });
    }
    Ok(points)
}

pub fn k_sweep_csv(points: &[KSweepPoint]) -> String {
    let mut out = String::from("k,micro_f1,macro_f1\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.k_percent, p.micro_f1, p.macro_f1));
    }
    out
}
