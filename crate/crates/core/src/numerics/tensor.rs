//! Dense row-major f64 tensors and the differentiable kernels built on them.
//!
//! Every operation that participates in training has a hand-derived backward
//! companion; `gradcheck` verifies each one against central finite
//! differences. There is no graph or tape, callers chain backwards explicitly.

use rand::Rng;

use crate::error::{Error, Result};

/// Probability floor used by the log losses so they are total functions.
pub const PROB_FLOOR: f64 = 1e-12;

/// Dense tensor: row-major `data`, one dimension size per `shape` entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, validating the shape/length invariant and finiteness.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Dimension(format!(
                "shape {:?} implies {} elements, got {}",
                shape,
                numel,
                data.len()
            )));
        }
        let t = Tensor { shape, data };
        t.check_finite()?;
        Ok(t)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(x: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![x],
        }
    }

    /// Uniform random entries in `[-limit, limit]`.
    pub fn uniform<R: Rng>(rng: &mut R, shape: Vec<usize>, limit: f64) -> Self {
        let numel: usize = shape.iter().product();
        let data = (0..numel).map(|_| rng.gen_range(-limit..limit)).collect();
        Tensor { shape, data }
    }

    /// Glorot-uniform init for a `rows x cols` matrix.
    pub fn glorot<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        Self::uniform(rng, vec![rows, cols], limit)
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    /// Borrow row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols() + j]
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.data.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Numeric("tensor contains NaN or Inf".into()))
        }
    }

    pub fn fill(&mut self, x: f64) {
        self.data.iter_mut().for_each(|v| *v = x);
    }
}

/// A trainable tensor and its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape.clone());
        Parameter { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

/// Copy the values of a parameter list into one flat vector, in order.
pub fn flatten_values(params: &[&Parameter]) -> Vec<f64> {
    params.iter().flat_map(|p| p.value.data.iter().copied()).collect()
}

/// Copy the gradients of a parameter list into one flat vector, in order.
pub fn flatten_grads(params: &[&Parameter]) -> Vec<f64> {
    params.iter().flat_map(|p| p.grad.data.iter().copied()).collect()
}

/// Write a flat vector back into a parameter list (inverse of `flatten_values`).
pub fn load_values(params: &mut [&mut Parameter], theta: &[f64]) -> Result<()> {
    let total: usize = params.iter().map(|p| p.numel()).sum();
    if total != theta.len() {
        return Err(Error::Dimension(format!(
            "flat vector has {} entries, parameters hold {}",
            theta.len(),
            total
        )));
    }
    let mut offset = 0;
    for p in params.iter_mut() {
        let n = p.numel();
        p.value.data.copy_from_slice(&theta[offset..offset + n]);
        offset += n;
    }
    Ok(())
}

/// Matrix product of two rank-2 tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 {
        return Err(Error::Dimension(format!(
            "matmul expects rank-2 tensors, got ranks {} and {}",
            a.rank(),
            b.rank()
        )));
    }
    if a.cols() != b.rows() {
        return Err(Error::Dimension(format!(
            "matmul inner dimensions differ: {}x{} . {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a.data[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    let t = Tensor {
        shape: vec![m, n],
        data: out,
    };
    t.check_finite()?;
    Ok(t)
}

/// Gradients of `matmul(a, b)` for both inputs given the output gradient:
/// `dA = dC . B^T`, `dB = A^T . dC`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor)> {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    if grad_out.shape != [m, n] {
        return Err(Error::Dimension(format!(
            "matmul grad shape {:?} does not match output {}x{}",
            grad_out.shape, m, n
        )));
    }
    let mut da = vec![0.0; m * k];
    let mut db = vec![0.0; k * n];
    for i in 0..m {
        for j in 0..n {
            let g = grad_out.data[i * n + j];
            if g == 0.0 {
                continue;
            }
            for p in 0..k {
                da[i * k + p] += g * b.data[p * n + j];
                db[p * n + j] += g * a.data[i * k + p];
            }
        }
    }
    Ok((
        Tensor {
            shape: vec![m, k],
            data: da,
        },
        Tensor {
            shape: vec![k, n],
            data: db,
        },
    ))
}

/// Numerically stable softmax of a slice.
pub fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Softmax of a rank-1 tensor; stabilized by max subtraction.
pub fn softmax(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 1 || x.numel() == 0 {
        return Err(Error::Dimension(
            "softmax expects a non-empty rank-1 tensor".into(),
        ));
    }
    Tensor::new(x.shape.clone(), softmax_slice(&x.data))
}

/// Vector-Jacobian product of softmax: given `y = softmax(x)` and `dL/dy`,
/// returns `dL/dx = y * (dL/dy - <dL/dy, y>)`.
pub fn softmax_backward(y: &[f64], grad_y: &[f64]) -> Vec<f64> {
    let dot: f64 = y.iter().zip(grad_y).map(|(a, b)| a * b).sum();
    y.iter().zip(grad_y).map(|(&yi, &gi)| yi * (gi - dot)).collect()
}

/// Cross entropy `-ln p[y]` with the probability floored at `PROB_FLOOR`.
pub fn cross_entropy(p: &[f64], y: usize) -> Result<f64> {
    if y >= p.len() {
        return Err(Error::Index(format!(
            "class index {} out of range for {} classes",
            y,
            p.len()
        )));
    }
    Ok(-p[y].max(PROB_FLOOR).ln())
}

/// Gradient of `cross_entropy` w.r.t. the probability vector.
/// Zero at floored coordinates, matching the clamped forward pass.
pub fn cross_entropy_backward(p: &[f64], y: usize) -> Vec<f64> {
    let mut g = vec![0.0; p.len()];
    if p[y] > PROB_FLOOR {
        g[y] = -1.0 / p[y];
    }
    g
}

fn clamp_prob(s: f64) -> f64 {
    s.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Mean binary cross entropy between scores in `[0,1]` and a 0/1 target mask.
pub fn binary_cross_entropy(scores: &[f64], target: &[f64]) -> Result<f64> {
    if scores.len() != target.len() {
        return Err(Error::Dimension(format!(
            "binary cross entropy length mismatch: {} scores vs {} targets",
            scores.len(),
            target.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::Dimension("binary cross entropy over zero positions".into()));
    }
    let mut total = 0.0;
    for (&s, &g) in scores.iter().zip(target) {
        let s = clamp_prob(s);
        total -= g * s.ln() + (1.0 - g) * (1.0 - s).ln();
    }
    Ok(total / scores.len() as f64)
}

/// Gradient of `binary_cross_entropy` w.r.t. the scores.
pub fn binary_cross_entropy_backward(scores: &[f64], target: &[f64]) -> Vec<f64> {
    let n = scores.len() as f64;
    scores
        .iter()
        .zip(target)
        .map(|(&s, &g)| {
            if s <= PROB_FLOOR || s >= 1.0 - PROB_FLOOR {
                // Clamped region: the forward value is constant in s.
                0.0
            } else {
                (-g / s + (1.0 - g) / (1.0 - s)) / n
            }
        })
        .collect()
}
