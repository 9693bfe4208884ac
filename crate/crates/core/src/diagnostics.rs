//! End-to-end gradient verification: every analytic backward pass in the
//! crate checked against central finite differences on a small fixed example.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{ClaimDocument, VerificationLabel};
use crate::encoder::{encode, encode_with_cache, FeaturizerParams};
use crate::error::Result;
use crate::losses::{
    retriever_example_loss, retriever_example_train_step, FaithfulnessMargins, LossWeights,
};
use crate::numerics::{
    binary_cross_entropy, binary_cross_entropy_backward, cross_entropy, cross_entropy_backward,
    finite_diff_check, flatten_grads, flatten_values, load_values, matmul, matmul_backward,
    softmax_backward, softmax_slice, Tensor,
};
use crate::retriever::RetrieverParams;
use crate::verifier::{accuracy_loss, accuracy_loss_backward, predict_with_cache, VerifierParams};

/// One line of the gradient report.
#[derive(Debug, Clone)]
pub struct GradCheckItem {
    pub name: &'static str,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheckItem {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Fixed toy example: a three-token claim over a six-sentence document.
pub fn toy_example() -> ClaimDocument {
    let sent = |s: &str| s.split_whitespace().map(str::to_owned).collect::<Vec<_>>();
    ClaimDocument {
        id: "toy".into(),
        claim: sent("alpha beta gamma"),
        doc_sentences: vec![
            sent("alpha beta gamma mu"),
            sent("delta epsilon zeta"),
            sent("alpha eta theta"),
            sent("iota kappa lambda mu"),
            sent("beta gamma nu"),
            sent("xi omicron pi rho"),
        ],
        gold_evidence: vec![1, 0, 0, 0, 1, 0],
        label: VerificationLabel::Supported,
    }
}

/// Toy-scale model parameters (d=8) seeded deterministically.
pub fn toy_models() -> (FeaturizerParams, VerifierParams, RetrieverParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9d1a_77c3);
    let featurizer = FeaturizerParams::new(64, 8, &mut rng).expect("valid sizes");
    let verifier = VerifierParams::new(8, 6, &mut rng).expect("valid sizes");
    let retriever = RetrieverParams::new(8, 5, &mut rng).expect("valid sizes");
    (featurizer, verifier, retriever)
}

fn check_matmul(epsilon: f64) -> Result<GradCheckItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = Tensor::uniform(&mut rng, vec![3, 4], 1.0);
    let b = Tensor::uniform(&mut rng, vec![4, 2], 1.0);
    let ones = Tensor::new(vec![3, 2], vec![1.0; 6])?;
    let (da, _) = matmul_backward(&a, &b, &ones)?;
    let b2 = b.clone();
    let err = finite_diff_check(
        &a.data.clone(),
        &da.data,
        move |t| {
            let at = Tensor::new(vec![3, 4], t.to_vec())?;
            Ok(matmul(&at, &b2)?.data.iter().sum())
        },
        epsilon,
    )?;
    Ok(GradCheckItem {
        name: "matmul",
        max_rel_err: err,
        tolerance: 1e-6,
    })
}

fn check_softmax_cross_entropy(epsilon: f64) -> Result<GradCheckItem> {
    let logits = vec![0.4, -1.2, 0.9, 0.1];
    let y = 2;
    let p = softmax_slice(&logits);
    let dx = softmax_backward(&p, &cross_entropy_backward(&p, y));
    let err = finite_diff_check(&logits, &dx, |t| cross_entropy(&softmax_slice(t), y), epsilon)?;
    Ok(GradCheckItem {
        name: "softmax-cross-entropy",
        max_rel_err: err,
        tolerance: 1e-6,
    })
}

fn check_binary_cross_entropy(epsilon: f64) -> Result<GradCheckItem> {
    let scores = vec![0.25, 0.8, 0.55, 0.4];
    let target = vec![0.0, 1.0, 1.0, 0.0];
    let grad = binary_cross_entropy_backward(&scores, &target);
    let t = target.clone();
    let err = finite_diff_check(&scores, &grad, |s| binary_cross_entropy(s, &t), epsilon)?;
    Ok(GradCheckItem {
        name: "binary-cross-entropy",
        max_rel_err: err,
        tolerance: 1e-6,
    })
}

/// Accuracy loss through verifier and featurizer jointly on the toy example.
fn check_accuracy_loss(epsilon: f64) -> Result<GradCheckItem> {
    let example = toy_example();
    let (featurizer, verifier, _) = toy_models();

    let mut f = featurizer.clone();
    let mut v = verifier.clone();
    for p in f.parameters_mut() {
        p.zero_grad();
    }
    v.zero_grads();
    let (s, cache) = encode_with_cache(&example, &f)?;
    let (_, vcache) = predict_with_cache(&s, &v)?;
    let row_grad = accuracy_loss_backward(&vcache, example.label, &mut v, 1.0);
    let mut d_rows = Tensor::zeros(vec![s.n_rows(), s.dim()]);
    for r in 0..s.n_rows() {
        d_rows.row_mut(r).copy_from_slice(&row_grad);
    }
    crate::encoder::encode_backward(&cache, &d_rows, &mut f, 1.0)?;

    let all: Vec<&crate::numerics::Parameter> =
        f.parameters().into_iter().chain(v.parameters()).collect();
    let theta = flatten_values(&all);
    let analytic = flatten_grads(&all);

    let mut sf = featurizer.clone();
    let mut sv = verifier.clone();
    let err = finite_diff_check(
        &theta,
        &analytic,
        |t| {
            let mut params: Vec<&mut crate::numerics::Parameter> = sf.parameters_mut();
            params.extend(sv.parameters_mut());
            load_values(&mut params, t)?;
            let s = encode(&example, &sf)?;
            accuracy_loss(&s, example.label, &sv)
        },
        epsilon,
    )?;
    Ok(GradCheckItem {
        name: "accuracy-loss (verifier + featurizer)",
        max_rel_err: err,
        tolerance: 1e-3,
    })
}

/// Combined retriever objective through the retriever on the toy example,
/// with the verifier and featurizer frozen.
fn check_combined_loss(epsilon: f64) -> Result<GradCheckItem> {
    let example = toy_example();
    let (featurizer, verifier, retriever) = toy_models();
    let weights = LossWeights::default();
    let margins = FaithfulnessMargins::default();
    let s = encode(&example, &featurizer)?;
    let k = 34.0; // 2 of 6 sentences

    let mut r = retriever.clone();
    r.zero_grads();
    retriever_example_train_step(
        &s,
        &example.gold_evidence,
        example.label,
        &verifier,
        &mut r,
        k,
        &weights,
        &margins,
        1.0,
    )?;
    let theta = flatten_values(&r.parameters());
    let analytic = flatten_grads(&r.parameters());

    let mut scratch = retriever.clone();
    let err = finite_diff_check(
        &theta,
        &analytic,
        |t| {
            load_values(&mut scratch.parameters_mut(), t)?;
            let (breakdown, _, _) = retriever_example_loss(
                &s,
                &example.gold_evidence,
                example.label,
                &verifier,
                &scratch,
                k,
                &weights,
                &margins,
            )?;
            Ok(breakdown.combined)
        },
        epsilon,
    )?;
    Ok(GradCheckItem {
        name: "combined-loss (retriever)",
        max_rel_err: err,
        tolerance: 1e-3,
    })
}

/// Run every gradient check with the given finite-difference step.
pub fn gradient_check_report(epsilon: f64) -> Result<Vec<GradCheckItem>> {
    Ok(vec![
        check_matmul(epsilon)?,
        check_softmax_cross_entropy(epsilon)?,
        check_binary_cross_entropy(epsilon)?,
        check_accuracy_loss(epsilon)?,
        check_combined_loss(epsilon)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_gradient_checks_pass() {
        let report = gradient_check_report(1e-5).unwrap();
        assert_eq!(report.len(), 5);
        for item in &report {
            assert!(
                item.passed(),
                "{}: {} >= {}",
                item.name,
                item.max_rel_err,
                item.tolerance
            );
        }
    }
}
