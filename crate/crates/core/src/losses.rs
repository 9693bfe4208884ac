//! Retriever training objectives: plausibility against gold evidence, and
//! hinge-regulated fullness / sufficiency against a frozen verifier, combined
//! into one weighted loss.
//!
//! During retriever training the evidence and complement views are score
//! scaled (soft), so the only gradient path is through the scores; the
//! verifier and the embeddings stay fixed.

use crate::corpus::VerificationLabel;
use crate::encoder::SentenceEmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{binary_cross_entropy, binary_cross_entropy_backward, cross_entropy};
use crate::retriever::{
    complement_view, evidence_view, score_backward, score_sentences_with_cache, select_top_k,
    EvidenceMask, RetrieverParams, SentenceScores, ViewMode,
};
use crate::verifier::{input_row_grad, predict_with_cache, VerifierParams};

/// Mixing weights for the combined retriever objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha_full: f64,
    pub alpha_suff: f64,
    pub alpha_plau: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha_full: 1.0,
            alpha_suff: 1.0,
            alpha_plau: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha_full < 0.0 || self.alpha_suff < 0.0 || self.alpha_plau < 0.0 {
            return Err(Error::Config("loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Hinge offsets keeping the faithfulness losses nonnegative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaithfulnessMargins {
    pub b_f: f64,
    pub b_s: f64,
}

impl Default for FaithfulnessMargins {
    fn default() -> Self {
        FaithfulnessMargins { b_f: 0.5, b_s: 0.5 }
    }
}

impl FaithfulnessMargins {
    pub fn validate(&self) -> Result<()> {
        if self.b_f <= 0.0 || self.b_s <= 0.0 {
            return Err(Error::Config("faithfulness margins must be positive".into()));
        }
        Ok(())
    }
}

/// Every component of the combined objective for one example or batch.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub l_acc: f64,
    pub l_plau: f64,
    pub l_full_raw: f64,
    pub l_full_hinged: f64,
    pub l_suff_raw: f64,
    pub l_suff_hinged: f64,
    pub combined: f64,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str =
        "step,l_acc,l_plau,l_full_raw,l_full_hinged,l_suff_raw,l_suff_hinged,combined";

    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{},{},{},{}",
            self.l_acc,
            self.l_plau,
            self.l_full_raw,
            self.l_full_hinged,
            self.l_suff_raw,
            self.l_suff_hinged,
            self.combined
        )
    }

    fn add(&mut self, other: &LossBreakdown) {
        self.l_acc += other.l_acc;
        self.l_plau += other.l_plau;
        self.l_full_raw += other.l_full_raw;
        self.l_full_hinged += other.l_full_hinged;
        self.l_suff_raw += other.l_suff_raw;
        self.l_suff_hinged += other.l_suff_hinged;
        self.combined += other.combined;
    }

    fn scale(&mut self, factor: f64) {
        self.l_acc *= factor;
        self.l_plau *= factor;
        self.l_full_raw *= factor;
        self.l_full_hinged *= factor;
        self.l_suff_raw *= factor;
        self.l_suff_hinged *= factor;
        self.combined *= factor;
    }

    /// Mean of a non-empty list of breakdowns.
    pub fn mean(items: &[LossBreakdown]) -> LossBreakdown {
        let mut out = LossBreakdown::default();
        for item in items {
            out.add(item);
        }
        if !items.is_empty() {
            out.scale(1.0 / items.len() as f64);
        }
        out
    }
}

/// `max(0, raw + margin)`.
pub fn hinge(raw: f64, margin: f64) -> f64 {
    (raw + margin).max(0.0)
}

/// Binary cross entropy between sentence scores and the gold evidence mask.
pub fn plausibility_loss(scores: &SentenceScores, gold: &[u8]) -> Result<f64> {
    let target: Vec<f64> = gold.iter().map(|&g| g as f64).collect();
    binary_cross_entropy(&scores.s, &target)
}

fn view_cross_entropy(
    view: &SentenceEmbeddingMatrix,
    label: VerificationLabel,
    verifier: &VerifierParams,
) -> Result<f64> {
    let (dist, _) = predict_with_cache(view, verifier)?;
    cross_entropy(&dist.p, label.code())
}

/// Fullness: how much the verifier degrades once the selected evidence is
/// removed. Returns `(raw, hinged)` where
/// `raw = CE(full document) - CE(complement)` and `hinged = max(0, raw + b_f)`.
pub fn fullness_loss(
    verifier: &VerifierParams,
    s: &SentenceEmbeddingMatrix,
    complement: &SentenceEmbeddingMatrix,
    label: VerificationLabel,
    b_f: f64,
) -> Result<(f64, f64)> {
    let ce_full = view_cross_entropy(s, label, verifier)?;
    let ce_complement = view_cross_entropy(complement, label, verifier)?;
    let raw = ce_full - ce_complement;
    Ok((raw, hinge(raw, b_f)))
}

/// Sufficiency: how well the selected evidence alone stands in for the whole
/// document. Returns `(raw, hinged)` where
/// `raw = CE(evidence) - CE(full document)` and `hinged = max(0, raw + b_s)`.
pub fn sufficiency_loss(
    verifier: &VerifierParams,
    s: &SentenceEmbeddingMatrix,
    evidence: &SentenceEmbeddingMatrix,
    label: VerificationLabel,
    b_s: f64,
) -> Result<(f64, f64)> {
    let ce_full = view_cross_entropy(s, label, verifier)?;
    let ce_evidence = view_cross_entropy(evidence, label, verifier)?;
    let raw = ce_evidence - ce_full;
    Ok((raw, hinge(raw, b_s)))
}

/// Assemble the weighted objective from its components. The hinged
/// faithfulness values enter the combination.
pub fn combined_retriever_loss(
    l_acc: f64,
    l_plau: f64,
    fullness: (f64, f64),
    sufficiency: (f64, f64),
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    weights.validate()?;
    Ok(LossBreakdown {
        l_acc,
        l_plau,
        l_full_raw: fullness.0,
        l_full_hinged: fullness.1,
        l_suff_raw: sufficiency.0,
        l_suff_hinged: sufficiency.1,
        combined: weights.alpha_full * fullness.1
            + weights.alpha_suff * sufficiency.1
            + weights.alpha_plau * l_plau,
    })
}

/// Forward evaluation of the combined objective for one example.
pub fn retriever_example_loss(
    s: &SentenceEmbeddingMatrix,
    gold: &[u8],
    label: VerificationLabel,
    verifier: &VerifierParams,
    retriever: &RetrieverParams,
    k_percent: f64,
    weights: &LossWeights,
    margins: &FaithfulnessMargins,
) -> Result<(LossBreakdown, SentenceScores, EvidenceMask)> {
    margins.validate()?;
    let (scores, _) = score_sentences_with_cache(s, retriever)?;
    let mask = select_top_k(&scores, k_percent)?;
    let e_soft = evidence_view(s, &scores, &mask, ViewMode::Soft)?;
    let c_soft = complement_view(s, &scores, &mask, ViewMode::Soft)?;

    let l_acc = view_cross_entropy(s, label, verifier)?;
    let full = fullness_loss(verifier, s, &c_soft.matrix, label, margins.b_f)?;
    let suff = sufficiency_loss(verifier, s, &e_soft.matrix, label, margins.b_s)?;
    let l_plau = plausibility_loss(&scores, gold)?;
    let breakdown = combined_retriever_loss(l_acc, l_plau, full, suff, weights)?;
    Ok((breakdown, scores, mask))
}

/// Forward plus backward for one example: accumulates gradients into the
/// retriever (scaled by `grad_scale`), leaving verifier and embeddings
/// untouched.
pub fn retriever_example_train_step(
    s: &SentenceEmbeddingMatrix,
    gold: &[u8],
    label: VerificationLabel,
    verifier: &VerifierParams,
    retriever: &mut RetrieverParams,
    k_percent: f64,
    weights: &LossWeights,
    margins: &FaithfulnessMargins,
    grad_scale: f64,
) -> Result<LossBreakdown> {
    weights.validate()?;
    margins.validate()?;
    let (scores, score_cache) = score_sentences_with_cache(s, retriever)?;
    let mask = select_top_k(&scores, k_percent)?;
    let e_soft = evidence_view(s, &scores, &mask, ViewMode::Soft)?;
    let c_soft = complement_view(s, &scores, &mask, ViewMode::Soft)?;

    let (dist_full, _) = predict_with_cache(s, verifier)?;
    let ce_full = cross_entropy(&dist_full.p, label.code())?;
    let (dist_c, cache_c) = predict_with_cache(&c_soft.matrix, verifier)?;
    let ce_complement = cross_entropy(&dist_c.p, label.code())?;
    let (dist_e, cache_e) = predict_with_cache(&e_soft.matrix, verifier)?;
    let ce_evidence = cross_entropy(&dist_e.p, label.code())?;

    let raw_full = ce_full - ce_complement;
    let raw_suff = ce_evidence - ce_full;
    let full = (raw_full, hinge(raw_full, margins.b_f));
    let suff = (raw_suff, hinge(raw_suff, margins.b_s));
    let l_plau = plausibility_loss(&scores, gold)?;
    let breakdown = combined_retriever_loss(ce_full, l_plau, full, suff, weights)?;

    // dL/ds per document sentence, assembled from the three objectives.
    let n_doc = s.n_doc();
    let mut d_scores = vec![0.0; n_doc];

    if weights.alpha_plau > 0.0 {
        let target: Vec<f64> = gold.iter().map(|&g| g as f64).collect();
        for (j, g) in binary_cross_entropy_backward(&scores.s, &target)
            .into_iter()
            .enumerate()
        {
            d_scores[j] += weights.alpha_plau * g;
        }
    }

    // Complement rows carry weight (1 - s_j); through the hinge the chain is
    // d hinged / d s_j = -(dCE_c/d row_j) . x_j with an outer minus from
    // raw = CE(S) - CE(complement), leaving +(row grad . x_j).
    if weights.alpha_full > 0.0 && raw_full + margins.b_f > 0.0 {
        let row_grad = input_row_grad(&cache_c, label, verifier);
        for &j in &c_soft.doc_indices {
            let dot: f64 = row_grad.iter().zip(s.doc_row(j)).map(|(a, b)| a * b).sum();
            d_scores[j] += weights.alpha_full * dot;
        }
    }

    // Evidence rows carry weight s_i, so d hinged / d s_i = (dCE_e/d row_i) . x_i.
    if weights.alpha_suff > 0.0 && raw_suff + margins.b_s > 0.0 {
        let row_grad = input_row_grad(&cache_e, label, verifier);
        for &i in &e_soft.doc_indices {
            let dot: f64 = row_grad.iter().zip(s.doc_row(i)).map(|(a, b)| a * b).sum();
            d_scores[i] += weights.alpha_suff * dot;
        }
    }

    score_backward(s, &score_cache, &d_scores, retriever, grad_scale)?;
    Ok(breakdown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_check, Tensor};
    use crate::retriever::MaskedView;
    use crate::verifier::predict;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn matrix(rows: Vec<Vec<f64>>) -> SentenceEmbeddingMatrix {
        let r = rows.len();
        let c = rows[0].len();
        SentenceEmbeddingMatrix::from_tensor(
            Tensor::new(vec![r, c], rows.into_iter().flatten().collect()).unwrap(),
        )
        .unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, d: usize) -> SentenceEmbeddingMatrix {
        matrix(
            (0..rows)
                .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn plausibility_matches_bce_cases() {
        let exact = plausibility_loss(&SentenceScores { s: vec![1.0, 0.0] }, &[1, 0]).unwrap();
        assert!(exact.abs() < 1e-9);
        let half = plausibility_loss(&SentenceScores { s: vec![0.5, 0.5, 0.5] }, &[1, 0, 1]).unwrap();
        assert!((half - std::f64::consts::LN_2).abs() < 1e-12);
        let v = plausibility_loss(&SentenceScores { s: vec![0.9, 0.1] }, &[1, 0]).unwrap();
        assert!((v - 0.10536051565782628).abs() < 1e-12);
        assert!(plausibility_loss(&SentenceScores { s: vec![0.5] }, &[1, 0]).is_err());
    }

    #[test]
    fn hinge_clamps_from_below() {
        assert_eq!(hinge(-0.5, 0.3), 0.0);
        assert!((hinge(-0.2, 0.5) - 0.3).abs() < 1e-15);
        assert_eq!(hinge(0.0, 0.5), 0.5);
    }

    #[test]
    fn fullness_identity_when_complement_equals_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let verifier = VerifierParams::new(4, 3, &mut rng).unwrap();
        let s = random_matrix(&mut rng, 5, 4);
        let (raw, hinged) = fullness_loss(&verifier, &s, &s, VerificationLabel::Supported, 0.5).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(hinged, 0.5);
    }

    #[test]
    fn sufficiency_identity_when_evidence_equals_full() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let verifier = VerifierParams::new(4, 3, &mut rng).unwrap();
        let s = random_matrix(&mut rng, 5, 4);
        let (raw, hinged) = sufficiency_loss(&verifier, &s, &s, VerificationLabel::Refuted, 0.7).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(hinged, 0.7);
    }

    #[test]
    fn soft_identity_views_reproduce_the_full_matrix() {
        // Mask nothing with zero scores: the soft complement IS the document.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let verifier = VerifierParams::new(3, 3, &mut rng).unwrap();
        let s = random_matrix(&mut rng, 4, 3);
        let zeros = SentenceScores { s: vec![0.0; 3] };
        let none = EvidenceMask { m: vec![false; 3], k_percent: 1.0 };
        let cv = complement_view(&s, &zeros, &none, ViewMode::Soft).unwrap();
        let (raw, hinged) =
            fullness_loss(&verifier, &s, &cv.matrix, VerificationLabel::NotEnoughInfo, 0.5).unwrap();
        assert_eq!(raw, 0.0);
        assert_eq!(hinged, 0.5);
    }

    #[test]
    fn fullness_raw_matches_two_forward_passes() {
        // Fixed toy: the raw value must equal the difference of two
        // independently computed cross entropies.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let verifier = VerifierParams::new(4, 4, &mut rng).unwrap();
        let s = random_matrix(&mut rng, 5, 4);
        let scores = SentenceScores {
            s: vec![0.9, 0.2, 0.7, 0.4],
        };
        let mask = select_top_k(&scores, 50.0).unwrap();
        let cv = complement_view(&s, &scores, &mask, ViewMode::Soft).unwrap();
        let label = VerificationLabel::Supported;

        let ce_s = -predict(&s, &verifier).unwrap().prob(label).ln();
        let ce_c = -predict(&cv.matrix, &verifier).unwrap().prob(label).ln();
        let (raw, _) = fullness_loss(&verifier, &s, &cv.matrix, label, 0.5).unwrap();
        assert!((raw - (ce_s - ce_c)).abs() < 1e-12);

        let ev = evidence_view(&s, &scores, &mask, ViewMode::Soft).unwrap();
        let ce_e = -predict(&ev.matrix, &verifier).unwrap().prob(label).ln();
        let (raw_s, _) = sufficiency_loss(&verifier, &s, &ev.matrix, label, 0.5).unwrap();
        assert!((raw_s - (ce_e - ce_s)).abs() < 1e-12);
    }

    #[test]
    fn combined_arithmetic_and_validation() {
        let zero = combined_retriever_loss(
            0.1,
            0.3,
            (0.1, 0.2),
            (0.3, 0.4),
            &LossWeights { alpha_full: 0.0, alpha_suff: 0.0, alpha_plau: 0.0 },
        )
        .unwrap();
        assert_eq!(zero.combined, 0.0);

        let ones = combined_retriever_loss(
            0.0,
            0.4,
            (0.0, 0.2),
            (0.0, 0.3),
            &LossWeights::default(),
        )
        .unwrap();
        assert!((ones.combined - 0.9).abs() < 1e-15);

        assert!(combined_retriever_loss(
            0.0,
            0.0,
            (0.0, 0.0),
            (0.0, 0.0),
            &LossWeights { alpha_full: -1.0, ..LossWeights::default() },
        )
        .is_err());
    }

    #[test]
    fn combined_is_linear_in_each_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..50 {
            let l_plau = rng.gen_range(0.0..2.0);
            let full = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0));
            let suff = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0));
            let base = LossWeights::default();
            let a = combined_retriever_loss(0.0, l_plau, full, suff, &base).unwrap();
            let mut doubled = base;
            doubled.alpha_full = 2.0;
            let b = combined_retriever_loss(0.0, l_plau, full, suff, &doubled).unwrap();
            assert!((b.combined - a.combined - full.1).abs() < 1e-12);
        }
    }

    #[test]
    fn hinged_losses_nonnegative_over_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..300 {
            let d = rng.gen_range(2..5usize);
            let n_doc = rng.gen_range(1..6usize);
            let verifier = VerifierParams::new(d, 3, &mut rng).unwrap();
            let s = random_matrix(&mut rng, n_doc + 1, d);
            let scores = SentenceScores {
                s: (0..n_doc).map(|_| rng.gen_range(0.0..1.0)).collect(),
            };
            let k = rng.gen_range(1.0..100.0);
            let mask = select_top_k(&scores, k).unwrap();
            let label = VerificationLabel::from_code(rng.gen_range(0..3)).unwrap();
            let b_f = rng.gen_range(0.01..1.0);
            let b_s = rng.gen_range(0.01..1.0);
            let cv = complement_view(&s, &scores, &mask, ViewMode::Soft).unwrap();
            let ev = evidence_view(&s, &scores, &mask, ViewMode::Soft).unwrap();
            let (_, hf) = fullness_loss(&verifier, &s, &cv.matrix, label, b_f).unwrap();
            let (_, hs) = sufficiency_loss(&verifier, &s, &ev.matrix, label, b_s).unwrap();
            assert!(hf >= 0.0 && hs >= 0.0);
        }
    }

    fn toy_setup(seed: u64) -> (SentenceEmbeddingMatrix, Vec<u8>, VerifierParams, RetrieverParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        let s = random_matrix(&mut rng, 7, d);
        let gold = vec![0, 1, 0, 0, 1, 0];
        let verifier = VerifierParams::new(d, 4, &mut rng).unwrap();
        let retriever = RetrieverParams::new(d, 3, &mut rng).unwrap();
        (s, gold, verifier, retriever)
    }

    #[test]
    fn combined_gradient_matches_finite_differences() {
        let (s, gold, verifier, retriever) = toy_setup(21);
        let weights = LossWeights::default();
        let margins = FaithfulnessMargins::default();
        let label = VerificationLabel::Supported;
        let k = 34.0;

        let mut with_grads = retriever.clone();
        with_grads.zero_grads();
        retriever_example_train_step(
            &s, &gold, label, &verifier, &mut with_grads, k, &weights, &margins, 1.0,
        )
        .unwrap();

        let theta = crate::numerics::flatten_values(&with_grads.parameters());
        let analytic = crate::numerics::flatten_grads(&with_grads.parameters());
        let mut scratch = retriever.clone();
        let err = finite_diff_check(
            &theta,
            &analytic,
            |t| {
                crate::numerics::load_values(&mut scratch.parameters_mut(), t)?;
                let (breakdown, _, _) = retriever_example_loss(
                    &s, &gold, label, &verifier, &scratch, k, &weights, &margins,
                )?;
                Ok(breakdown.combined)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "rel error {err}");
    }

    #[test]
    fn inactive_hinges_contribute_no_gradient() {
        // With heavy margins inactive (hinge at zero) and plausibility off,
        // the gradient must vanish entirely when all gates are closed.
        let (s, gold, verifier, mut retriever) = toy_setup(22);
        let weights = LossWeights {
            alpha_full: 0.0,
            alpha_suff: 0.0,
            alpha_plau: 0.0,
        };
        let margins = FaithfulnessMargins::default();
        retriever.zero_grads();
        retriever_example_train_step(
            &s,
            &gold,
            VerificationLabel::Refuted,
            &verifier,
            &mut retriever,
            50.0,
            &weights,
            &margins,
            1.0,
        )
        .unwrap();
        for p in retriever.parameters() {
            assert!(p.grad.data.iter().all(|&g| g == 0.0));
        }
    }

    #[test]
    fn down_weighting_a_decisive_sentence_pushes_its_score_up() {
        // For an unselected sentence whose down-weighting in the complement
        // increases the complement's cross entropy, the fullness gradient on
        // its score must be nonpositive (training raises the score).
        let (s, _, verifier, _) = toy_setup(23);
        let label = VerificationLabel::Supported;
        let n_doc = s.n_doc();
        let base_scores = SentenceScores { s: vec![0.3; n_doc] };
        let mask = EvidenceMask {
            m: (0..n_doc).map(|i| i == 0).collect(),
            k_percent: 10.0,
        };

        let ce_of = |scores: &SentenceScores| -> f64 {
            let cv: MaskedView = complement_view(&s, scores, &mask, ViewMode::Soft).unwrap();
            -predict(&cv.matrix, &verifier).unwrap().prob(label).ln()
        };

        let eps = 1e-6;
        for j in 1..n_doc {
            let mut plus = base_scores.clone();
            plus.s[j] += eps;
            let mut minus = base_scores.clone();
            minus.s[j] -= eps;
            let d_ce = (ce_of(&plus) - ce_of(&minus)) / (2.0 * eps);
            // L_full = CE(S) - CE(complement), so dL_full/ds_j = -d_ce.
            let d_lfull = -d_ce;
            if d_ce > 1e-9 {
                assert!(d_lfull <= 0.0);
            }
        }
    }
}
