//! Sentence embedding: a trainable hashed bag-of-tokens featurizer, plus
//! ingestion of precomputed embeddings produced by external encoders.
//!
//! Row 0 of every embedding matrix is the claim; rows 1..l-1 are the document
//! sentences in order. Downstream masking relies on this convention.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::corpus::ClaimDocument;
use crate::error::{Error, Result};
use crate::hashing::{fnv1a64, splitmix64};
use crate::numerics::{Parameter, Tensor};

pub const EMBEDDING_MAGIC: [u8; 4] = *b"REMB";
pub const EMBEDDING_VERSION: u32 = 1;

/// Identifier for the token hash recorded in checkpoints. Only FNV-1a 64 is
/// defined; rejecting anything else keeps old encodings from being silently
/// reinterpreted.
pub const HASH_FN_FNV1A64: f64 = 1.0;

/// The l x d embedding matrix for one example; row 0 is the claim.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbeddingMatrix {
    mat: Tensor,
}

impl SentenceEmbeddingMatrix {
    pub fn from_tensor(mat: Tensor) -> Result<Self> {
        if mat.rank() != 2 || mat.rows() == 0 {
            return Err(Error::Dimension(
                "embedding matrix must be rank 2 with at least the claim row".into(),
            ));
        }
        Ok(SentenceEmbeddingMatrix { mat })
    }

    pub fn n_rows(&self) -> usize {
        self.mat.rows()
    }

    /// Number of document sentences (rows excluding the claim).
    pub fn n_doc(&self) -> usize {
        self.mat.rows() - 1
    }

    pub fn dim(&self) -> usize {
        self.mat.cols()
    }

    pub fn claim_row(&self) -> &[f64] {
        self.mat.row(0)
    }

    /// Row of document sentence `i` (0-based over the document).
    pub fn doc_row(&self, i: usize) -> &[f64] {
        self.mat.row(i + 1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.mat.row(i)
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.mat
    }
}

/// Trainable featurizer: hash tokens into buckets, average the bucket
/// indicators per sentence, project, add bias, squash with tanh.
#[derive(Debug, Clone)]
pub struct FeaturizerParams {
    pub n_buckets: usize,
    pub projection: Parameter,
    pub bias: Parameter,
}

impl FeaturizerParams {
    pub fn new<R: Rng>(n_buckets: usize, d: usize, rng: &mut R) -> Result<Self> {
        if n_buckets == 0 || d == 0 {
            return Err(Error::Config("featurizer needs positive bucket count and dimension".into()));
        }
        // Sentence bags have unit l1 mass, so unit-scale projection entries
        // land the pre-activations in tanh's responsive range.
        let projection = Parameter::new(Tensor::uniform(rng, vec![n_buckets, d], 1.0));
        let bias = Parameter::new(Tensor::zeros(vec![d]));
        Ok(FeaturizerParams {
            n_buckets,
            projection,
            bias,
        })
    }

    pub fn d(&self) -> usize {
        self.projection.value.cols()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.projection, &mut self.bias]
    }

    pub fn parameters(&self) -> Vec<&Parameter> {
        vec![&self.projection, &self.bias]
    }

    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        vec![
            ("featurizer.projection".into(), self.projection.value.clone()),
            ("featurizer.bias".into(), self.bias.value.clone()),
            ("featurizer.hash_fn".into(), Tensor::scalar(HASH_FN_FNV1A64)),
        ]
    }

    pub fn from_named_tensors(get: impl Fn(&str) -> Result<Tensor>) -> Result<Self> {
        let hash_fn = get("featurizer.hash_fn")?;
        if hash_fn.data != [HASH_FN_FNV1A64] {
            return Err(Error::Validation(
                "checkpoint uses an unsupported token hash function".into(),
            ));
        }
        let projection = get("featurizer.projection")?;
        if projection.rank() != 2 {
            return Err(Error::Validation("featurizer projection must be rank 2".into()));
        }
        let bias = get("featurizer.bias")?;
        if bias.numel() != projection.cols() {
            return Err(Error::Dimension("featurizer bias does not match projection".into()));
        }
        Ok(FeaturizerParams {
            n_buckets: projection.rows(),
            projection: Parameter::new(projection),
            bias: Parameter::new(bias),
        })
    }
}

fn bucket_of(token: &str, n_buckets: usize) -> usize {
    // FNV-1a alone keeps low-bit congruences between related short tokens
    // (extending two colliding prefixes by the same byte collides again), so
    // avalanche the hash before reducing to a bucket.
    (splitmix64(fnv1a64(token.as_bytes())) % n_buckets as u64) as usize
}

/// Per-sentence hashed bag: sorted (bucket, weight) pairs with weights
/// summing to 1. Sorting fixes the float accumulation order.
fn sentence_bag(tokens: &[String], n_buckets: usize) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for tok in tokens {
        *counts.entry(bucket_of(tok, n_buckets)).or_insert(0) += 1;
    }
    let inv_len = 1.0 / tokens.len() as f64;
    counts
        .into_iter()
        .map(|(b, c)| (b, c as f64 * inv_len))
        .collect()
}

/// Forward state needed to push gradients back into the featurizer.
#[derive(Debug, Clone)]
pub struct EncodeCache {
    /// One bag per row (claim first).
    bags: Vec<Vec<(usize, f64)>>,
    /// tanh outputs, l x d.
    rows: Tensor,
}

/// Embed an example: one row per sentence, claim first.
pub fn encode(example: &ClaimDocument, params: &FeaturizerParams) -> Result<SentenceEmbeddingMatrix> {
    Ok(encode_with_cache(example, params)?.0)
}

/// As `encode`, additionally returning the cache for `encode_backward`.
pub fn encode_with_cache(
    example: &ClaimDocument,
    params: &FeaturizerParams,
) -> Result<(SentenceEmbeddingMatrix, EncodeCache)> {
    example.validate()?;
    let d = params.d();
    let l = 1 + example.n_doc();
    let mut bags = Vec::with_capacity(l);
    bags.push(sentence_bag(&example.claim, params.n_buckets));
    for sentence in &example.doc_sentences {
        bags.push(sentence_bag(sentence, params.n_buckets));
    }

    let mut rows = Tensor::zeros(vec![l, d]);
    for (r, bag) in bags.iter().enumerate() {
        let row = rows.row_mut(r);
        for &(bucket, weight) in bag {
            let proj_row = params.projection.value.row(bucket);
            for j in 0..d {
                row[j] += weight * proj_row[j];
            }
        }
        for j in 0..d {
            row[j] = (row[j] + params.bias.value.data[j]).tanh();
        }
    }
    rows.check_finite()?;
    let cache = EncodeCache {
        bags,
        rows: rows.clone(),
    };
    Ok((SentenceEmbeddingMatrix::from_tensor(rows)?, cache))
}

/// Accumulate featurizer gradients given `d_rows`, the loss gradient w.r.t.
/// every embedding row (l x d), scaled by `scale`.
pub fn encode_backward(
    cache: &EncodeCache,
    d_rows: &Tensor,
    params: &mut FeaturizerParams,
    scale: f64,
) -> Result<()> {
    if d_rows.shape != cache.rows.shape {
        return Err(Error::Dimension(format!(
            "row gradient shape {:?} does not match encoded shape {:?}",
            d_rows.shape, cache.rows.shape
        )));
    }
    let d = cache.rows.cols();
    for (r, bag) in cache.bags.iter().enumerate() {
        let out_row = cache.rows.row(r);
        let grad_row = d_rows.row(r);
        // d pre = d out * (1 - tanh^2)
        let mut dpre = vec![0.0; d];
        for j in 0..d {
            dpre[j] = scale * grad_row[j] * (1.0 - out_row[j] * out_row[j]);
        }
        for j in 0..d {
            params.bias.grad.data[j] += dpre[j];
        }
        for &(bucket, weight) in bag {
            let grad_proj = params.projection.grad.row_mut(bucket);
            for j in 0..d {
                grad_proj[j] += weight * dpre[j];
            }
        }
    }
    Ok(())
}

/// Precomputed embeddings keyed by example id, loaded from a `REMB` file.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    d: usize,
    entries: BTreeMap<String, Tensor>,
}

impl EmbeddingStore {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fetch the matrix for `example_id`, checking the stored sentence count
    /// against the example it will stand in for.
    pub fn get(&self, example_id: &str, expected_rows: usize) -> Result<SentenceEmbeddingMatrix> {
        let mat = self
            .entries
            .get(example_id)
            .ok_or_else(|| Error::Lookup(format!("no embedding stored for id '{example_id}'")))?;
        if mat.rows() != expected_rows {
            return Err(Error::Validation(format!(
                "embedding for '{example_id}' has {} rows but the example needs {}",
                mat.rows(),
                expected_rows
            )));
        }
        SentenceEmbeddingMatrix::from_tensor(mat.clone())
    }

    /// Check the store against the configured embedding dimension.
    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.d != d {
            return Err(Error::Validation(format!(
                "embedding file has d={} but the configuration expects d={}",
                self.d, d
            )));
        }
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
            if *pos + n > bytes.len() {
                return Err(Error::Validation("embedding file truncated".into()));
            }
            let out = &bytes[*pos..*pos + n];
            *pos += n;
            Ok(out)
        };
        let mut pos = 0usize;
        if take(&mut pos, 4)? != EMBEDDING_MAGIC {
            return Err(Error::Validation("bad embedding file magic bytes".into()));
        }
        let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
        if version != EMBEDDING_VERSION {
            return Err(Error::Validation(format!(
                "unsupported embedding file version {version}"
            )));
        }
        let d = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let count = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let id_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().unwrap()) as usize;
            let id = String::from_utf8(take(&mut pos, id_len)?.to_vec())
                .map_err(|_| Error::Validation("embedding id is not valid UTF-8".into()))?;
            let l = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap()) as usize;
            let mut data = Vec::with_capacity(l * d);
            for _ in 0..l * d {
                data.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
            }
            entries.insert(id, Tensor::new(vec![l, d], data)?);
        }
        if pos != bytes.len() {
            return Err(Error::Validation("trailing bytes in embedding file".into()));
        }
        Ok(EmbeddingStore { d, entries })
    }

    /// Write a store; entries are (id, l x d matrix) pairs.
    pub fn save(path: &Path, d: usize, entries: &[(String, Tensor)]) -> Result<()> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&EMBEDDING_MAGIC);
        buf.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
        buf.extend_from_slice(&(d as u32).to_le_bytes());
        buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
        for (id, mat) in entries {
            if mat.rank() != 2 || mat.cols() != d {
                return Err(Error::Dimension(format!(
                    "embedding for '{id}' must be rank 2 with d={d}"
                )));
            }
            let id_bytes = id.as_bytes();
            if id_bytes.len() > u16::MAX as usize {
                return Err(Error::Validation(format!("id too long: {id}")));
            }
            buf.extend_from_slice(&(id_bytes.len() as u16).to_le_bytes());
            buf.extend_from_slice(id_bytes);
            buf.extend_from_slice(&(mat.rows() as u32).to_le_bytes());
            for &x in &mat.data {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        let tmp = path.with_extension("tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

/// Where embedding matrices come from: the trainable featurizer, or a
/// read-only store of precomputed matrices.
#[derive(Debug, Clone)]
pub enum EmbeddingSource {
    Featurizer(FeaturizerParams),
    Precomputed(EmbeddingStore),
}

impl EmbeddingSource {
    pub fn d(&self) -> usize {
        match self {
            EmbeddingSource::Featurizer(f) => f.d(),
            EmbeddingSource::Precomputed(s) => s.d(),
        }
    }

    pub fn is_trainable(&self) -> bool {
        matches!(self, EmbeddingSource::Featurizer(_))
    }

    pub fn encode_example(&self, example: &ClaimDocument) -> Result<SentenceEmbeddingMatrix> {
        match self {
            EmbeddingSource::Featurizer(f) => encode(example, f),
            EmbeddingSource::Precomputed(s) => s.get(&example.id, 1 + example.n_doc()),
        }
    }
}
