//! The claim verifier: mean-pool the embedding rows, run a two-layer tanh
//! MLP, and softmax into a three-way verdict distribution.

use rand::Rng;

use crate::corpus::VerificationLabel;
use crate::encoder::SentenceEmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{
    cross_entropy, cross_entropy_backward, softmax_backward, softmax_slice, Parameter, Tensor,
};

pub const N_CLASSES: usize = 3;

/// Two-layer MLP weights. Rows index inputs, columns outputs.
#[derive(Debug, Clone)]
pub struct VerifierParams {
    pub w1: Parameter,
    pub b1: Parameter,
    pub w2: Parameter,
    pub b2: Parameter,
}

impl VerifierParams {
    pub fn new<R: Rng>(d: usize, h: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || h == 0 {
            return Err(Error::Config("verifier needs positive d and h".into()));
        }
        Ok(VerifierParams {
            w1: Parameter::new(Tensor::glorot(rng, d, h)),
            b1: Parameter::new(Tensor::zeros(vec![h])),
            w2: Parameter::new(Tensor::glorot(rng, h, N_CLASSES)),
            b2: Parameter::new(Tensor::zeros(vec![N_CLASSES])),
        })
    }

    pub fn d(&self) -> usize {
        self.w1.value.rows()
    }

    pub fn h(&self) -> usize {
        self.w1.value.cols()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        vec![
            ("verifier.W1".into(), self.w1.value.clone()),
            ("verifier.b1".into(), self.b1.value.clone()),
            ("verifier.W2".into(), self.w2.value.clone()),
            ("verifier.b2".into(), self.b2.value.clone()),
        ]
    }

    pub fn from_named_tensors(get: impl Fn(&str) -> Result<Tensor>) -> Result<Self> {
        let w1 = get("verifier.W1")?;
        let b1 = get("verifier.b1")?;
        let w2 = get("verifier.W2")?;
        let b2 = get("verifier.b2")?;
        if w1.rank() != 2 || w2.rank() != 2 || w1.cols() != w2.rows() || w2.cols() != N_CLASSES {
            return Err(Error::Dimension("verifier checkpoint shapes are inconsistent".into()));
        }
        if b1.numel() != w1.cols() || b2.numel() != N_CLASSES {
            return Err(Error::Dimension("verifier bias shapes are inconsistent".into()));
        }
        Ok(VerifierParams {
            w1: Parameter::new(w1),
            b1: Parameter::new(b1),
            w2: Parameter::new(w2),
            b2: Parameter::new(b2),
        })
    }
}

/// Verdict probabilities indexed by label code (Ref=0, Sup=1, NEI=2).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDistribution {
    pub p: [f64; N_CLASSES],
}

impl PredictionDistribution {
    pub fn prob(&self, label: VerificationLabel) -> f64 {
        self.p[label.code()]
    }

    /// Argmax with ties broken toward the lowest label code.
    pub fn argmax(&self) -> VerificationLabel {
        let mut best = 0;
        for i in 1..N_CLASSES {
            if self.p[i] > self.p[best] {
                best = i;
            }
        }
        VerificationLabel::from_code(best).unwrap()
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct VerifierCache {
    pub pool: Vec<f64>,
    pub hidden: Vec<f64>,
    pub probs: [f64; N_CLASSES],
    pub n_rows: usize,
}

fn check_dims(s: &SentenceEmbeddingMatrix, params: &VerifierParams) -> Result<()> {
    if s.dim() != params.d() {
        return Err(Error::Dimension(format!(
            "embedding dimension {} does not match verifier d={}",
            s.dim(),
            params.d()
        )));
    }
    Ok(())
}

/// Forward pass returning the verdict distribution and cached activations.
pub fn predict_with_cache(
    s: &SentenceEmbeddingMatrix,
    params: &VerifierParams,
) -> Result<(PredictionDistribution, VerifierCache)> {
    check_dims(s, params)?;
    let d = params.d();
    let h = params.h();
    let n_rows = s.n_rows();

    let mut pool = vec![0.0; d];
    for r in 0..n_rows {
        let row = s.row(r);
        for j in 0..d {
            pool[j] += row[j];
        }
    }
    let inv = 1.0 / n_rows as f64;
    pool.iter_mut().for_each(|x| *x *= inv);

    let mut hidden = vec![0.0; h];
    for i in 0..d {
        let x = pool[i];
        if x == 0.0 {
            continue;
        }
        let w_row = params.w1.value.row(i);
        for j in 0..h {
            hidden[j] += x * w_row[j];
        }
    }
    for j in 0..h {
        hidden[j] = (hidden[j] + params.b1.value.data[j]).tanh();
    }

    let mut logits = [0.0; N_CLASSES];
    for i in 0..h {
        let x = hidden[i];
        let w_row = params.w2.value.row(i);
        for (j, logit) in logits.iter_mut().enumerate() {
            *logit += x * w_row[j];
        }
    }
    for (j, logit) in logits.iter_mut().enumerate() {
        *logit += params.b2.value.data[j];
    }

    let probs_vec = softmax_slice(&logits);
    let probs = [probs_vec[0], probs_vec[1], probs_vec[2]];
    Ok((
        PredictionDistribution { p: probs },
        VerifierCache {
            pool,
            hidden,
            probs,
            n_rows,
        },
    ))
}

pub fn predict(s: &SentenceEmbeddingMatrix, params: &VerifierParams) -> Result<PredictionDistribution> {
    Ok(predict_with_cache(s, params)?.0)
}

/// Cross entropy of the prediction against the gold label.
pub fn accuracy_loss(
    s: &SentenceEmbeddingMatrix,
    label: VerificationLabel,
    params: &VerifierParams,
) -> Result<f64> {
    let dist = predict(s, params)?;
    cross_entropy(&dist.p, label.code())
}

/// Argmax verdict for evaluation.
pub fn classify(s: &SentenceEmbeddingMatrix, params: &VerifierParams) -> Result<VerificationLabel> {
    Ok(predict(s, params)?.argmax())
}

fn logits_gradient(cache: &VerifierCache, label: VerificationLabel) -> Vec<f64> {
    let dp = cross_entropy_backward(&cache.probs, label.code());
    softmax_backward(&cache.probs, &dp)
}

/// Gradient of the cross-entropy loss w.r.t. any single input row.
/// Mean pooling makes this identical for every row, so one vector suffices.
/// No parameter gradients are touched; used when the verifier is frozen.
pub fn input_row_grad(
    cache: &VerifierCache,
    label: VerificationLabel,
    params: &VerifierParams,
) -> Vec<f64> {
    let d = params.d();
    let h = params.h();
    let d_logits = logits_gradient(cache, label);

    let mut d_hidden = vec![0.0; h];
    for i in 0..h {
        let w_row = params.w2.value.row(i);
        for (j, &dl) in d_logits.iter().enumerate() {
            d_hidden[i] += w_row[j] * dl;
        }
    }
    let mut d_pre1 = vec![0.0; h];
    for j in 0..h {
        d_pre1[j] = d_hidden[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
    }
    let mut d_pool = vec![0.0; d];
    for i in 0..d {
        let w_row = params.w1.value.row(i);
        for j in 0..h {
            d_pool[i] += w_row[j] * d_pre1[j];
        }
    }
    let inv = 1.0 / cache.n_rows as f64;
    d_pool.iter_mut().for_each(|x| *x *= inv);
    d_pool
}

/// Backward pass of the accuracy loss: accumulates parameter gradients
/// (scaled by `scale`) and returns the shared per-row input gradient, also
/// scaled, for propagation into a trainable encoder.
pub fn accuracy_loss_backward(
    cache: &VerifierCache,
    label: VerificationLabel,
    params: &mut VerifierParams,
    scale: f64,
) -> Vec<f64> {
    let d = params.d();
    let h = params.h();
    let d_logits = logits_gradient(cache, label);

    for (j, &dl) in d_logits.iter().enumerate() {
        params.b2.grad.data[j] += scale * dl;
    }
    let mut d_hidden = vec![0.0; h];
    for i in 0..h {
        let w_row = params.w2.value.row(i);
        let g_row = params.w2.grad.row_mut(i);
        for (j, &dl) in d_logits.iter().enumerate() {
            g_row[j] += scale * cache.hidden[i] * dl;
            d_hidden[i] += w_row[j] * dl;
        }
    }
    let mut d_pre1 = vec![0.0; h];
    for j in 0..h {
        d_pre1[j] = d_hidden[j] * (1.0 - cache.hidden[j] * cache.hidden[j]);
        params.b1.grad.data[j] += scale * d_pre1[j];
    }
    let mut d_pool = vec![0.0; d];
    for i in 0..d {
        let w_row = params.w1.value.row(i);
        let g_row = params.w1.grad.row_mut(i);
        for j in 0..h {
            g_row[j] += scale * cache.pool[i] * d_pre1[j];
            d_pool[i] += w_row[j] * d_pre1[j];
        }
    }
    let factor = scale / cache.n_rows as f64;
    d_pool.iter_mut().for_each(|x| *x *= factor);
    d_pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const LN_3: f64 = 1.0986122886681098;

    fn matrix(rows: Vec<Vec<f64>>) -> SentenceEmbeddingMatrix {
        let r = rows.len();
        let c = rows[0].len();
        let data: Vec<f64> = rows.into_iter().flatten().collect();
        SentenceEmbeddingMatrix::from_tensor(Tensor::new(vec![r, c], data).unwrap()).unwrap()
    }

    fn zero_params(d: usize, h: usize) -> VerifierParams {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = VerifierParams::new(d, h, &mut rng).unwrap();
        for param in p.parameters_mut() {
            param.value.fill(0.0);
        }
        p
    }

    #[test]
    fn zero_everything_is_uniform() {
        let params = zero_params(4, 3);
        let s = matrix(vec![vec![0.0; 4]; 2]);
        let dist = predict(&s, &params).unwrap();
        for v in dist.p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let loss = accuracy_loss(&s, VerificationLabel::Supported, &params).unwrap();
        assert!((loss - LN_3).abs() < 1e-12);
    }

    #[test]
    fn duplicating_rows_leaves_prediction_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let params = VerifierParams::new(4, 5, &mut rng).unwrap();
        let rows = vec![
            vec![0.3, -0.2, 0.9, 0.1],
            vec![-0.5, 0.4, 0.0, 0.2],
        ];
        let doubled: Vec<Vec<f64>> = rows.iter().chain(rows.iter()).cloned().collect();
        let a = predict(&matrix(rows), &params).unwrap();
        let b = predict(&matrix(doubled), &params).unwrap();
        for i in 0..N_CLASSES {
            assert!((a.p[i] - b.p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_is_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params = VerifierParams::new(6, 4, &mut rng).unwrap();
        let s = matrix(vec![vec![0.1, 0.2, -0.3, 0.4, 0.0, -0.1]; 3]);
        let a = predict(&s, &params).unwrap();
        let b = predict(&s, &params).unwrap();
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let params = zero_params(4, 3);
        let s = matrix(vec![vec![0.0; 5]]);
        assert!(matches!(predict(&s, &params), Err(Error::Dimension(_))));
    }

    #[test]
    fn classify_argmax_and_tie_break() {
        let d = PredictionDistribution { p: [0.6, 0.3, 0.1] };
        assert_eq!(d.argmax(), VerificationLabel::Refuted);
        let tie = PredictionDistribution {
            p: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        };
        assert_eq!(tie.argmax(), VerificationLabel::Refuted);
        let sup = PredictionDistribution { p: [0.2, 0.5, 0.3] };
        assert_eq!(sup.argmax(), VerificationLabel::Supported);
    }

    #[test]
    fn shifting_logit_bias_keeps_classification() {
        // Adding a constant to every pre-softmax logit must not change the
        // argmax (softmax is shift invariant).
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let mut params = VerifierParams::new(3, 4, &mut rng).unwrap();
            let s = matrix(vec![
                (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ]);
            let before = classify(&s, &params).unwrap();
            let shift = rng.gen_range(-5.0..5.0);
            for j in 0..N_CLASSES {
                params.b2.value.data[j] += shift;
            }
            assert_eq!(classify(&s, &params).unwrap(), before);
        }
    }

    #[test]
    fn accuracy_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = VerifierParams::new(5, 4, &mut rng).unwrap();
        let s = matrix(
            (0..4)
                .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        );
        let label = VerificationLabel::NotEnoughInfo;

        let mut with_grads = params.clone();
        with_grads.zero_grads();
        let (_, cache) = predict_with_cache(&s, &with_grads).unwrap();
        accuracy_loss_backward(&cache, label, &mut with_grads, 1.0);

        let theta = crate::numerics::flatten_values(&with_grads.parameters());
        let analytic = crate::numerics::flatten_grads(&with_grads.parameters());
        let mut scratch = params.clone();
        let err = finite_diff_check(
            &theta,
            &analytic,
            |t| {
                crate::numerics::load_values(&mut scratch.parameters_mut(), t)?;
                accuracy_loss(&s, label, &scratch)
            },
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "rel error {err}");
    }

    #[test]
    fn input_row_grad_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let params = VerifierParams::new(4, 3, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let s = matrix(rows.clone());
        let label = VerificationLabel::Refuted;
        let (_, cache) = predict_with_cache(&s, &params).unwrap();
        let row_grad = input_row_grad(&cache, label, &params);

        // Perturb one row at a time; the analytic gradient is shared.
        for target_row in 0..3 {
            let theta: Vec<f64> = rows[target_row].clone();
            let err = finite_diff_check(
                &theta,
                &row_grad,
                |t| {
                    let mut perturbed = rows.clone();
                    perturbed[target_row] = t.to_vec();
                    accuracy_loss(&matrix(perturbed), label, &params)
                },
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "row {target_row} rel error {err}");
        }
    }

    proptest! {
        #[test]
        fn predict_is_always_a_distribution(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = VerifierParams::new(3, 3, &mut rng).unwrap();
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..3).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            let dist = predict(&matrix(rows), &params).unwrap();
            let sum: f64 = dist.p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(dist.p.iter().all(|&v| v > 0.0));
        }
    }
}
