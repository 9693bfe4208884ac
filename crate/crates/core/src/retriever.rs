//! The evidence retriever: claim-conditioned per-sentence importance scores,
//! hard top-k% selection, and the masked evidence / complement views the
//! faithfulness losses consume.

use rand::Rng;

use crate::encoder::SentenceEmbeddingMatrix;
use crate::error::{Error, Result};
use crate::numerics::{Parameter, Tensor};

/// Bilinear-interaction scorer weights. `wc`/`ws` project the claim and each
/// sentence into a shared interaction space.
#[derive(Debug, Clone)]
pub struct RetrieverParams {
    pub wc: Parameter,
    pub ws: Parameter,
    pub w_out: Parameter,
    pub b_out: Parameter,
}

impl RetrieverParams {
    pub fn new<R: Rng>(d: usize, r: usize, rng: &mut R) -> Result<Self> {
        if d == 0 || r == 0 {
            return Err(Error::Config("retriever needs positive d and r".into()));
        }
        Ok(RetrieverParams {
            wc: Parameter::new(Tensor::glorot(rng, d, r)),
            ws: Parameter::new(Tensor::glorot(rng, d, r)),
            w_out: Parameter::new(Tensor::uniform(rng, vec![r], (1.0 / r as f64).sqrt())),
            b_out: Parameter::new(Tensor::zeros(vec![1])),
        })
    }

    pub fn d(&self) -> usize {
        self.wc.value.rows()
    }

    pub fn r(&self) -> usize {
        self.wc.value.cols()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.wc, &mut self.ws, &mut self.w_out, &mut self.b_out]
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.wc, &self.ws, &self.w_out, &self.b_out]
    }

    pub fn zero_grads(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        vec![
            ("retriever.Wc".into(), self.wc.value.clone()),
            ("retriever.Ws".into(), self.ws.value.clone()),
            ("retriever.w_out".into(), self.w_out.value.clone()),
            ("retriever.b_out".into(), self.b_out.value.clone()),
        ]
    }

    pub fn from_named_tensors(get: impl Fn(&str) -> Result<Tensor>) -> Result<Self> {
        let wc = get("retriever.Wc")?;
        let ws = get("retriever.Ws")?;
        let w_out = get("retriever.w_out")?;
        let b_out = get("retriever.b_out")?;
        if wc.rank() != 2 || ws.shape != wc.shape || w_out.numel() != wc.cols() || b_out.numel() != 1
        {
            return Err(Error::Dimension("retriever checkpoint shapes are inconsistent".into()));
        }
        Ok(RetrieverParams {
            wc: Parameter::new(wc),
            ws: Parameter::new(ws),
            w_out: Parameter::new(w_out),
            b_out: Parameter::new(b_out),
        })
    }
}

/// Importance scores in `[0,1]`, aligned to document sentence order.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceScores {
    pub s: Vec<f64>,
}

impl SentenceScores {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Hard selection over document sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceMask {
    pub m: Vec<bool>,
    pub k_percent: f64,
}

impl EvidenceMask {
    pub fn selected_indices(&self) -> Vec<usize> {
        self.m
            .iter()
            .enumerate()
            .filter(|(_, &sel)| sel)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn selected_count(&self) -> usize {
        self.m.iter().filter(|&&sel| sel).count()
    }
}

/// Forward state for `score_backward`.
#[derive(Debug, Clone)]
pub struct ScoreCache {
    claim_proj: Vec<f64>,
    sent_proj: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Score every document sentence against the claim:
/// `s_i = sigmoid(w_out . tanh(proj_c(claim) * proj_s(sent_i)) + b_out)`.
pub fn score_sentences_with_cache(
    s: &SentenceEmbeddingMatrix,
    params: &RetrieverParams,
) -> Result<(SentenceScores, ScoreCache)> {
    if s.n_rows() < 2 {
        return Err(Error::Dimension(
            "scoring needs the claim row plus at least one document sentence".into(),
        ));
    }
    if s.dim() != params.d() {
        return Err(Error::Dimension(format!(
            "embedding dimension {} does not match retriever d={}",
            s.dim(),
            params.d()
        )));
    }
    let d = params.d();
    let r = params.r();
    let project = |row: &[f64], w: &Tensor| -> Vec<f64> {
        let mut out = vec![0.0; r];
        for i in 0..d {
            let x = row[i];
            if x == 0.0 {
                continue;
            }
            let w_row = w.row(i);
            for j in 0..r {
                out[j] += x * w_row[j];
            }
        }
        out
    };

    let claim_proj = project(s.claim_row(), &params.wc.value);
    let n_doc = s.n_doc();
    let mut sent_proj = Vec::with_capacity(n_doc);
    let mut z = Vec::with_capacity(n_doc);
    let mut scores = Vec::with_capacity(n_doc);
    for i in 0..n_doc {
        let t = project(s.doc_row(i), &params.ws.value);
        let zi: Vec<f64> = claim_proj
            .iter()
            .zip(&t)
            .map(|(&u, &v)| (u * v).tanh())
            .collect();
        let mut logit = params.b_out.value.data[0];
        for j in 0..r {
            logit += params.w_out.value.data[j] * zi[j];
        }
        scores.push(sigmoid(logit));
        sent_proj.push(t);
        z.push(zi);
    }
    Ok((
        SentenceScores { s: scores.clone() },
        ScoreCache {
            claim_proj,
            sent_proj,
            z,
            scores,
        },
    ))
}

pub fn score_sentences(
    s: &SentenceEmbeddingMatrix,
    params: &RetrieverParams,
) -> Result<SentenceScores> {
    Ok(score_sentences_with_cache(s, params)?.0)
}

/// Accumulate retriever gradients from `d_scores` (dL/ds per document
/// sentence), scaled by `scale`. The embedding matrix is treated as constant.
pub fn score_backward(
    s: &SentenceEmbeddingMatrix,
    cache: &ScoreCache,
    d_scores: &[f64],
    params: &mut RetrieverParams,
    scale: f64,
) -> Result<()> {
    let n_doc = s.n_doc();
    if d_scores.len() != n_doc {
        return Err(Error::Dimension(format!(
            "score gradient has {} entries for {} sentences",
            d_scores.len(),
            n_doc
        )));
    }
    let d = params.d();
    let r = params.r();
    let mut d_claim_proj = vec![0.0; r];
    for i in 0..n_doc {
        let si = cache.scores[i];
        let d_logit = scale * d_scores[i] * si * (1.0 - si);
        if d_logit == 0.0 {
            continue;
        }
        params.b_out.grad.data[0] += d_logit;
        let zi = &cache.z[i];
        let ti = &cache.sent_proj[i];
        let mut d_t = vec![0.0; r];
        for j in 0..r {
            params.w_out.grad.data[j] += d_logit * zi[j];
            let d_z = d_logit * params.w_out.value.data[j];
            let d_pre = d_z * (1.0 - zi[j] * zi[j]);
            d_claim_proj[j] += d_pre * ti[j];
            d_t[j] = d_pre * cache.claim_proj[j];
        }
        let row = s.doc_row(i);
        for a in 0..d {
            let x = row[a];
            if x == 0.0 {
                continue;
            }
            let g_row = params.ws.grad.row_mut(a);
            for j in 0..r {
                g_row[j] += x * d_t[j];
            }
        }
    }
    let claim = s.claim_row();
    for a in 0..d {
        let x = claim[a];
        if x == 0.0 {
            continue;
        }
        let g_row = params.wc.grad.row_mut(a);
        for j in 0..r {
            g_row[j] += x * d_claim_proj[j];
        }
    }
    Ok(())
}

/// Number of sentences a top-k% selection keeps for a document of `n_doc`
/// sentences: `max(1, ceil(k% of n_doc))`.
pub fn selection_size(k_percent: f64, n_doc: usize) -> usize {
    let raw = ((k_percent * n_doc as f64) / 100.0).ceil() as usize;
    raw.clamp(1, n_doc)
}

/// Keep the `max(1, ceil(k% * n_doc))` highest-scoring sentences, ties broken
/// toward the lowest index.
pub fn select_top_k(scores: &SentenceScores, k_percent: f64) -> Result<EvidenceMask> {
    if !(k_percent > 0.0 && k_percent <= 100.0) {
        return Err(Error::Config(format!(
            "k_percent must be in (0, 100], got {k_percent}"
        )));
    }
    let n_doc = scores.len();
    if n_doc == 0 {
        return Err(Error::Dimension("cannot select from zero sentences".into()));
    }
    let count = selection_size(k_percent, n_doc);
    let mut order: Vec<usize> = (0..n_doc).collect();
    order.sort_by(|&a, &b| {
        scores.s[b]
            .partial_cmp(&scores.s[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    let mut m = vec![false; n_doc];
    for &idx in order.iter().take(count) {
        m[idx] = true;
    }
    Ok(EvidenceMask { m, k_percent })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewMode {
    /// Unscaled rows; used at inference and when retraining the verifier.
    Hard,
    /// Rows scaled by their score (evidence) or one minus it (complement) so
    /// gradients reach the retriever during its training phase.
    Soft,
}

/// A claim-plus-subset view of an embedding matrix. `doc_indices[i]` is the
/// original document sentence behind view row `i + 1` (row 0 stays the claim).
#[derive(Debug, Clone)]
pub struct MaskedView {
    pub matrix: SentenceEmbeddingMatrix,
    pub doc_indices: Vec<usize>,
    pub mode: ViewMode,
}

fn build_view(
    s: &SentenceEmbeddingMatrix,
    scores: &SentenceScores,
    mask: &EvidenceMask,
    mode: ViewMode,
    keep_selected: bool,
) -> Result<MaskedView> {
    let n_doc = s.n_doc();
    if mask.m.len() != n_doc || scores.len() != n_doc {
        return Err(Error::Dimension(format!(
            "mask/scores of length {}/{} do not match {} document sentences",
            mask.m.len(),
            scores.len(),
            n_doc
        )));
    }
    let d = s.dim();
    let mut rows: Vec<f64> = Vec::with_capacity((n_doc + 1) * d);
    rows.extend_from_slice(s.claim_row());
    let mut doc_indices = Vec::new();
    for i in 0..n_doc {
        if mask.m[i] != keep_selected {
            continue;
        }
        let weight = match (mode, keep_selected) {
            (ViewMode::Hard, _) => 1.0,
            (ViewMode::Soft, true) => scores.s[i],
            (ViewMode::Soft, false) => 1.0 - scores.s[i],
        };
        rows.extend(s.doc_row(i).iter().map(|&x| weight * x));
        doc_indices.push(i);
    }
    let n_rows = 1 + doc_indices.len();
    Ok(MaskedView {
        matrix: SentenceEmbeddingMatrix::from_tensor(Tensor::new(vec![n_rows, d], rows)?)?,
        doc_indices,
        mode,
    })
}

/// The selected-evidence view: claim row plus the masked-in sentences.
pub fn evidence_view(
    s: &SentenceEmbeddingMatrix,
    scores: &SentenceScores,
    mask: &EvidenceMask,
    mode: ViewMode,
) -> Result<MaskedView> {
    build_view(s, scores, mask, mode, true)
}

/// The complement view: claim row plus the masked-out sentences.
pub fn complement_view(
    s: &SentenceEmbeddingMatrix,
    scores: &SentenceScores,
    mask: &EvidenceMask,
    mode: ViewMode,
) -> Result<MaskedView> {
    build_view(s, scores, mask, mode, false)
}
