//! Three-phase training schedule:
//!   1. fit the verifier (and featurizer) on full documents with cross entropy,
//!   2. fit the retriever against the frozen verifier with the combined loss,
//!   3. revisit: re-fit the verifier, starting from phase 1, on the hard
//!      evidence views chosen by the trained retriever.
//!
//! Every random stream derives from (seed, phase tag), so each phase is
//! independently reproducible and resumed runs match uninterrupted ones.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{tensor_to_u64, u64_to_tensor, Checkpoint};
use crate::corpus::Dataset;
use crate::encoder::{
    encode_backward, encode_with_cache, EmbeddingSource, EmbeddingStore, FeaturizerParams,
    SentenceEmbeddingMatrix,
};
use crate::error::{Error, Result};
use crate::evaluation::micro_macro_f1;
use crate::hashing::{derive_seed, fnv1a64};
use crate::losses::{
    retriever_example_loss, retriever_example_train_step, FaithfulnessMargins, LossBreakdown,
    LossWeights,
};
use crate::numerics::{adam_step, cross_entropy, AdamState, Parameter, Tensor};
use crate::retriever::{
    evidence_view, score_sentences, select_top_k, RetrieverParams, ViewMode,
};
use crate::verifier::{accuracy_loss_backward, predict_with_cache, VerifierParams};

/// All training hyperparameters. Defaults follow the fine-tuning recipe the
/// models were designed around; synthetic from-scratch runs usually override
/// the learning rate and sizes through a config file or CLI flags.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub warmup_fraction: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub epochs_phase3: usize,
    pub k_percent: f64,
    pub weights: LossWeights,
    pub margins: FaithfulnessMargins,
    pub seed: u64,
    pub d: usize,
    pub h: usize,
    pub r: usize,
    pub n_buckets: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 4e-5,
            batch_size: 16,
            warmup_fraction: 0.07,
            epochs_phase1: 10,
            epochs_phase2: 10,
            epochs_phase3: 5,
            k_percent: 5.0,
            weights: LossWeights::default(),
            margins: FaithfulnessMargins::default(),
            seed: 42,
            d: 64,
            h: 64,
            r: 64,
            n_buckets: 4096,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must be in [0, 1]".into()));
        }
        if !(self.k_percent > 0.0 && self.k_percent <= 100.0) {
            return Err(Error::Config("k_percent must be in (0, 100]".into()));
        }
        if self.d == 0 || self.h == 0 || self.r == 0 || self.n_buckets == 0 {
            return Err(Error::Config("model sizes must be positive".into()));
        }
        self.weights.validate()?;
        self.margins.validate()?;
        Ok(())
    }

    /// Stable key=value rendering; also the config-file format.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lr={}", self.lr);
        let _ = writeln!(out, "batch_size={}", self.batch_size);
        let _ = writeln!(out, "warmup_fraction={}", self.warmup_fraction);
        let _ = writeln!(out, "epochs_phase1={}", self.epochs_phase1);
        let _ = writeln!(out, "epochs_phase2={}", self.epochs_phase2);
        let _ = writeln!(out, "epochs_phase3={}", self.epochs_phase3);
        let _ = writeln!(out, "k_percent={}", self.k_percent);
        let _ = writeln!(out, "alpha_full={}", self.weights.alpha_full);
        let _ = writeln!(out, "alpha_suff={}", self.weights.alpha_suff);
        let _ = writeln!(out, "alpha_plau={}", self.weights.alpha_plau);
        let _ = writeln!(out, "b_f={}", self.margins.b_f);
        let _ = writeln!(out, "b_s={}", self.margins.b_s);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "d={}", self.d);
        let _ = writeln!(out, "h={}", self.h);
        let _ = writeln!(out, "r={}", self.r);
        let _ = writeln!(out, "n_buckets={}", self.n_buckets);
        out
    }

    /// Fingerprint recorded in every checkpoint this config produces.
    pub fn config_hash(&self) -> u64 {
        fnv1a64(self.canonical_string().as_bytes())
    }

    /// Parse a flat key=value config file. Unknown keys are rejected; missing
    /// keys keep their defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected key=value", idx + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.set_key(key, value).map_err(|e| {
                Error::Config(format!("config line {}: {e}", idx + 1))
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }

    /// Apply one key=value assignment (shared by the file parser and the CLI
    /// flag overrides).
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn float(v: &str) -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("'{v}' is not a number")))
        }
        fn int(v: &str) -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("'{v}' is not an integer")))
        }
        match key {
            "lr" => self.lr = float(value)?,
            "batch_size" => self.batch_size = int(value)?,
            "warmup_fraction" => self.warmup_fraction = float(value)?,
            "epochs_phase1" => self.epochs_phase1 = int(value)?,
            "epochs_phase2" => self.epochs_phase2 = int(value)?,
            "epochs_phase3" => self.epochs_phase3 = int(value)?,
            "k_percent" => self.k_percent = float(value)?,
            "alpha_full" => self.weights.alpha_full = float(value)?,
            "alpha_suff" => self.weights.alpha_suff = float(value)?,
            "alpha_plau" => self.weights.alpha_plau = float(value)?,
            "b_f" => self.margins.b_f = float(value)?,
            "b_s" => self.margins.b_s = float(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("'{value}' is not a seed")))?
            }
            "d" => self.d = int(value)?,
            "h" => self.h = int(value)?,
            "r" => self.r = int(value)?,
            "n_buckets" => self.n_buckets = int(value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn with_ablation(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::None => {}
            Ablation::NoPlau => self.weights.alpha_plau = 0.0,
            Ablation::NoFaith => {
                self.weights.alpha_full = 0.0;
                self.weights.alpha_suff = 0.0;
            }
        }
        self
    }
}

/// Ablations zero the corresponding loss weights; the code paths stay live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    None,
    NoPlau,
    NoFaith,
}

impl Ablation {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Ablation::None),
            "no-plau" => Ok(Ablation::NoPlau),
            "no-faith" => Ok(Ablation::NoFaith),
            other => Err(Error::Config(format!(
                "unknown ablation '{other}' (expected no-plau or no-faith)"
            ))),
        }
    }
}

/// One optimizer step's batch-mean loss components.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub step: usize,
    pub loss: LossBreakdown,
}

/// Dev metrics recorded once per epoch.
#[derive(Debug, Clone)]
pub struct DevRow {
    pub epoch: usize,
    pub metrics: Vec<(&'static str, f64)>,
}

/// Per-phase training log.
#[derive(Debug, Clone, Default)]
pub struct PhaseReport {
    pub steps: Vec<StepRow>,
    pub dev: Vec<DevRow>,
}

impl PhaseReport {
    fn empty() -> Self {
        PhaseReport::default()
    }

    pub fn loss_csv(&self) -> String {
        let mut out = String::from(LossBreakdown::CSV_HEADER);
        out.push('\n');
        for row in &self.steps {
            out.push_str(&row.loss.csv_row(row.step));
            out.push('\n');
        }
        out
    }

    pub fn dev_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.dev.first() {
            out.push_str("epoch");
            for (name, _) in &first.metrics {
                out.push(',');
                out.push_str(name);
            }
            out.push('\n');
            for row in &self.dev {
                let _ = write!(out, "{}", row.epoch);
                for (_, value) in &row.metrics {
                    let _ = write!(out, ",{value}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn write(&self, dir: &Path, phase: &str) -> Result<()> {
        fs::write(dir.join(format!("{phase}_loss.csv")), self.loss_csv())?;
        if !self.dev.is_empty() {
            fs::write(dir.join(format!("{phase}_dev.csv")), self.dev_csv())?;
        }
        Ok(())
    }
}

/// Global-norm cap applied to each batch-mean gradient before the optimizer
/// step. Occasional violent steps during the featurizer's amplification
/// phase can otherwise saturate the tanh units and collapse training.
const GRAD_CLIP_NORM: f64 = 25.0;

fn clip_gradients(params: &mut [&mut Parameter]) {
    let norm_sq: f64 = params
        .iter()
        .flat_map(|p| p.grad.data.iter())
        .map(|g| g * g)
        .sum();
    let norm = norm_sq.sqrt();
    if norm > GRAD_CLIP_NORM {
        let scale = GRAD_CLIP_NORM / norm;
        for p in params.iter_mut() {
            p.grad.data.iter_mut().for_each(|g| *g *= scale);
        }
    }
}

fn epoch_order(seed: u64, phase: &str, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("{phase}.epoch{epoch}")));
    order.shuffle(&mut rng);
    order
}

fn n_batches(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}

fn check_train_inputs(train: &Dataset, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    train.validate()?;
    Ok(())
}

/// Micro / macro F1 and mean cross entropy of a verifier over full documents.
fn eval_full_documents(
    encoder: &EmbeddingSource,
    verifier: &VerifierParams,
    data: &Dataset,
) -> Result<(f64, f64, f64)> {
    let mut preds = Vec::with_capacity(data.len());
    let mut golds = Vec::with_capacity(data.len());
    let mut total_ce = 0.0;
    for ex in &data.examples {
        let s = encoder.encode_example(ex)?;
        let (dist, _) = predict_with_cache(&s, verifier)?;
        total_ce += cross_entropy(&dist.p, ex.label.code())?;
        preds.push(dist.argmax());
        golds.push(ex.label);
    }
    let (micro, macro_f1, _) = micro_macro_f1(&preds, &golds)?;
    Ok((micro, macro_f1, total_ce / data.len() as f64))
}

/// Hard claim-plus-evidence views for every example under a fixed retriever.
fn hard_evidence_views(
    encoder: &EmbeddingSource,
    retriever: &RetrieverParams,
    k_percent: f64,
    data: &Dataset,
) -> Result<Vec<SentenceEmbeddingMatrix>> {
    let mut views = Vec::with_capacity(data.len());
    for ex in &data.examples {
        let s = encoder.encode_example(ex)?;
        let scores = score_sentences(&s, retriever)?;
        let mask = select_top_k(&scores, k_percent)?;
        views.push(evidence_view(&s, &scores, &mask, ViewMode::Hard)?.matrix);
    }
    Ok(views)
}

fn eval_views(
    views: &[SentenceEmbeddingMatrix],
    data: &Dataset,
    verifier: &VerifierParams,
) -> Result<(f64, f64, f64)> {
    let mut preds = Vec::with_capacity(data.len());
    let mut golds = Vec::with_capacity(data.len());
    let mut total_ce = 0.0;
    for (view, ex) in views.iter().zip(&data.examples) {
        let (dist, _) = predict_with_cache(view, verifier)?;
        total_ce += cross_entropy(&dist.p, ex.label.code())?;
        preds.push(dist.argmax());
        golds.push(ex.label);
    }
    let (micro, macro_f1, _) = micro_macro_f1(&preds, &golds)?;
    Ok((micro, macro_f1, total_ce / data.len() as f64))
}

/// Retriever dev diagnostics: mean combined / plausibility loss plus
/// micro-aggregated evidence precision, recall, and F1 at the configured k.
fn eval_retriever(
    encoder: &EmbeddingSource,
    verifier: &VerifierParams,
    retriever: &RetrieverParams,
    cfg: &TrainConfig,
    data: &Dataset,
) -> Result<(f64, f64, f64, f64, f64)> {
    let mut breakdowns = Vec::with_capacity(data.len());
    let (mut tp, mut pred_total, mut gold_total) = (0usize, 0usize, 0usize);
    for ex in &data.examples {
        let s = encoder.encode_example(ex)?;
        let (breakdown, _, mask) = retriever_example_loss(
            &s,
            &ex.gold_evidence,
            ex.label,
            verifier,
            retriever,
            cfg.k_percent,
            &cfg.weights,
            &cfg.margins,
        )?;
        breakdowns.push(breakdown);
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
    }
    let mean = LossBreakdown::mean(&breakdowns);
    let precision = if pred_total == 0 { 1.0 } else { tp as f64 / pred_total as f64 };
    let recall = if gold_total == 0 { 1.0 } else { tp as f64 / gold_total as f64 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((mean.combined, mean.l_plau, precision, recall, f1))
}

/// Phase 1: minimize cross entropy on full documents over verifier and (when
/// the built-in featurizer is in use) encoder parameters jointly.
pub fn train_phase1_verifier(
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &TrainConfig,
    encoder: &mut EmbeddingSource,
) -> Result<(VerifierParams, PhaseReport)> {
    check_train_inputs(train, cfg)?;
    if let EmbeddingSource::Precomputed(store) = encoder {
        store.check_dim(cfg.d)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init.verifier"));
    let mut verifier = VerifierParams::new(cfg.d, cfg.h, &mut rng)?;
    let mut report = PhaseReport::empty();
    if cfg.epochs_phase1 == 0 {
        return Ok((verifier, report));
    }

    let featurizer_count: usize = match encoder {
        EmbeddingSource::Featurizer(f) => f.parameters().iter().map(|p| p.numel()).sum(),
        EmbeddingSource::Precomputed(_) => 0,
    };
    let verifier_count: usize = verifier.parameters().iter().map(|p| p.numel()).sum();
    let total_steps = (cfg.epochs_phase1 * n_batches(train.len(), cfg.batch_size)) as u64;
    let mut adam = AdamState::new(
        featurizer_count + verifier_count,
        cfg.lr,
        cfg.warmup_fraction,
        total_steps,
    )?;

    let mut step = 0usize;
    for epoch in 0..cfg.epochs_phase1 {
        for batch in epoch_order(cfg.seed, "phase1", epoch, train.len()).chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_ce = 0.0;
            for &i in batch {
                let ex = &train.examples[i];
                match encoder {
                    EmbeddingSource::Featurizer(f) => {
                        let (s, cache) = encode_with_cache(ex, f)?;
                        let (dist, vcache) = predict_with_cache(&s, &verifier)?;
                        batch_ce += cross_entropy(&dist.p, ex.label.code())?;
                        let row_grad =
                            accuracy_loss_backward(&vcache, ex.label, &mut verifier, scale);
                        let mut d_rows = Tensor::zeros(vec![s.n_rows(), cfg.d]);
                        for r in 0..s.n_rows() {
                            d_rows.row_mut(r).copy_from_slice(&row_grad);
                        }
                        encode_backward(&cache, &d_rows, f, 1.0)?;
                    }
                    EmbeddingSource::Precomputed(store) => {
                        let s = store.get(&ex.id, 1 + ex.n_doc())?;
                        let (dist, vcache) = predict_with_cache(&s, &verifier)?;
                        batch_ce += cross_entropy(&dist.p, ex.label.code())?;
                        accuracy_loss_backward(&vcache, ex.label, &mut verifier, scale);
                    }
                }
            }
            let mut params: Vec<&mut Parameter> = Vec::new();
            if let EmbeddingSource::Featurizer(f) = encoder {
                params.extend(f.parameters_mut());
            }
            params.extend(verifier.parameters_mut());
            clip_gradients(&mut params);
            adam_step(&mut params, &mut adam)?;
            report.steps.push(StepRow {
                step,
                loss: LossBreakdown {
                    l_acc: batch_ce * scale,
                    ..LossBreakdown::default()
                },
            });
            step += 1;
        }
        if let Some(dev) = dev {
            let (micro, macro_f1, mean_ce) = eval_full_documents(encoder, &verifier, dev)?;
            report.dev.push(DevRow {
                epoch,
                metrics: vec![
                    ("micro_f1", micro),
                    ("macro_f1", macro_f1),
                    ("mean_l_acc", mean_ce),
                ],
            });
        }
    }
    Ok((verifier, report))
}

/// Phase 2: minimize the combined retriever objective against the frozen
/// verifier and encoder. Neither borrow is mutable, so freezing is structural.
pub fn train_phase2_retriever(
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &TrainConfig,
    encoder: &EmbeddingSource,
    verifier: &VerifierParams,
) -> Result<(RetrieverParams, PhaseReport)> {
    check_train_inputs(train, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init.retriever"));
    let mut retriever = RetrieverParams::new(cfg.d, cfg.r, &mut rng)?;
    let mut report = PhaseReport::empty();
    if cfg.epochs_phase2 == 0 {
        return Ok((retriever, report));
    }

    let param_count: usize = retriever.parameters().iter().map(|p| p.numel()).sum();
    let total_steps = (cfg.epochs_phase2 * n_batches(train.len(), cfg.batch_size)) as u64;
    let mut adam = AdamState::new(param_count, cfg.lr, cfg.warmup_fraction, total_steps)?;

    let mut step = 0usize;
    for epoch in 0..cfg.epochs_phase2 {
        for batch in epoch_order(cfg.seed, "phase2", epoch, train.len()).chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let ex = &train.examples[i];
                let s = encoder.encode_example(ex)?;
                let breakdown = retriever_example_train_step(
                    &s,
                    &ex.gold_evidence,
                    ex.label,
                    verifier,
                    &mut retriever,
                    cfg.k_percent,
                    &cfg.weights,
                    &cfg.margins,
                    scale,
                )?;
                batch_losses.push(breakdown);
            }
            {
                let mut params = retriever.parameters_mut();
                clip_gradients(&mut params);
                adam_step(&mut params, &mut adam)?;
            }
            report.steps.push(StepRow {
                step,
                loss: LossBreakdown::mean(&batch_losses),
            });
            step += 1;
        }
        if let Some(dev) = dev {
            let (combined, plau, precision, recall, f1) =
                eval_retriever(encoder, verifier, &retriever, cfg, dev)?;
            report.dev.push(DevRow {
                epoch,
                metrics: vec![
                    ("mean_combined", combined),
                    ("mean_plau", plau),
                    ("evidence_precision", precision),
                    ("evidence_recall", recall),
                    ("evidence_f1", f1),
                ],
            });
        }
    }
    Ok((retriever, report))
}

/// Phase 3: starting from the phase-1 verifier, minimize cross entropy on the
/// hard evidence views selected by the frozen retriever.
pub fn train_phase3_revisit(
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &TrainConfig,
    encoder: &EmbeddingSource,
    retriever: &RetrieverParams,
    verifier_phase1: &VerifierParams,
) -> Result<(VerifierParams, PhaseReport)> {
    check_train_inputs(train, cfg)?;
    let mut verifier = verifier_phase1.clone();
    verifier.zero_grads();
    let mut report = PhaseReport::empty();
    if cfg.epochs_phase3 == 0 {
        return Ok((verifier, report));
    }

    // Retriever and encoder are frozen, so the views never change; build them
    // once up front.
    let train_views = hard_evidence_views(encoder, retriever, cfg.k_percent, train)?;
    let dev_views = match dev {
        Some(dev) => Some(hard_evidence_views(encoder, retriever, cfg.k_percent, dev)?),
        None => None,
    };

    let param_count: usize = verifier.parameters().iter().map(|p| p.numel()).sum();
    let total_steps = (cfg.epochs_phase3 * n_batches(train.len(), cfg.batch_size)) as u64;
    let mut adam = AdamState::new(param_count, cfg.lr, cfg.warmup_fraction, total_steps)?;

    let mut step = 0usize;
    for epoch in 0..cfg.epochs_phase3 {
        for batch in epoch_order(cfg.seed, "phase3", epoch, train.len()).chunks(cfg.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_ce = 0.0;
            for &i in batch {
                let ex = &train.examples[i];
                let view = &train_views[i];
                let (dist, vcache) = predict_with_cache(view, &verifier)?;
                batch_ce += cross_entropy(&dist.p, ex.label.code())?;
                accuracy_loss_backward(&vcache, ex.label, &mut verifier, scale);
            }
            {
                let mut params = verifier.parameters_mut();
                clip_gradients(&mut params);
                adam_step(&mut params, &mut adam)?;
            }
            report.steps.push(StepRow {
                step,
                loss: LossBreakdown {
                    l_acc: batch_ce * scale,
                    ..LossBreakdown::default()
                },
            });
            step += 1;
        }
        if let (Some(dev), Some(views)) = (dev, &dev_views) {
            let (micro, macro_f1, mean_ce) = eval_views(views, dev, &verifier)?;
            report.dev.push(DevRow {
                epoch,
                metrics: vec![
                    ("micro_f1", micro),
                    ("macro_f1", macro_f1),
                    ("mean_l_acc", mean_ce),
                ],
            });
        }
    }
    Ok((verifier, report))
}

/// Everything produced by a full pipeline run.
#[derive(Debug, Clone)]
pub struct TrainedSystem {
    pub encoder: EmbeddingSource,
    pub verifier_phase1: VerifierParams,
    pub retriever: RetrieverParams,
    pub verifier_revisited: VerifierParams,
    pub config: TrainConfig,
}

pub const PHASE1_CKPT: &str = "phase1.ckpt";
pub const PHASE2_CKPT: &str = "phase2.ckpt";
pub const PHASE3_CKPT: &str = "phase3.ckpt";
const CONFIG_HASH_KEY: &str = "meta.config_hash";

fn checkpoint_with_hash(tensors: Vec<(String, Tensor)>, hash: u64) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.push(CONFIG_HASH_KEY, u64_to_tensor(hash));
    for (name, tensor) in tensors {
        ck.push(name, tensor);
    }
    ck
}

fn load_checked(path: &Path, expected_hash: u64) -> Result<Checkpoint> {
    let ck = Checkpoint::load(path)?;
    let stored = tensor_to_u64(ck.get(CONFIG_HASH_KEY)?)?;
    if stored != expected_hash {
        return Err(Error::Config(format!(
            "checkpoint {} was produced by a different configuration",
            path.display()
        )));
    }
    Ok(ck)
}

fn getter(ck: &Checkpoint) -> impl Fn(&str) -> Result<Tensor> + '_ {
    move |name| ck.get(name).cloned()
}

/// Run phases 1-3 in order, checkpointing each phase into `out_dir` and
/// writing per-phase loss/dev CSVs. Valid checkpoints already in `out_dir`
/// (matching this config's fingerprint) are reused instead of retraining, so
/// an interrupted run resumes where it stopped. `stop_after` ends the run
/// early after the named phase; the full system is returned only when all
/// three phases completed.
pub fn run_full_pipeline(
    train: &Dataset,
    dev: Option<&Dataset>,
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
    precomputed: Option<EmbeddingStore>,
    stop_after: Option<u8>,
) -> Result<Option<TrainedSystem>> {
    check_train_inputs(train, cfg)?;
    if let Some(dev) = dev {
        dev.validate()?;
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.txt"), cfg.canonical_string())?;
    }
    let hash = cfg.config_hash();

    // Phase 1.
    let p1_path = out_dir.map(|d| d.join(PHASE1_CKPT));
    let (mut encoder, verifier_phase1) = match &p1_path {
        Some(path) if path.exists() => {
            let ck = load_checked(path, hash)?;
            let encoder = if ck.contains("featurizer.projection") {
                EmbeddingSource::Featurizer(FeaturizerParams::from_named_tensors(getter(&ck))?)
            } else {
                let store = precomputed.clone().ok_or_else(|| {
                    Error::Config(
                        "checkpoint was trained on precomputed embeddings; supply the embedding file"
                            .into(),
                    )
                })?;
                store.check_dim(cfg.d)?;
                EmbeddingSource::Precomputed(store)
            };
            (encoder, VerifierParams::from_named_tensors(getter(&ck))?)
        }
        _ => {
            let mut encoder = match precomputed.clone() {
                Some(store) => {
                    store.check_dim(cfg.d)?;
                    EmbeddingSource::Precomputed(store)
                }
                None => {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init.featurizer"));
                    EmbeddingSource::Featurizer(FeaturizerParams::new(
                        cfg.n_buckets,
                        cfg.d,
                        &mut rng,
                    )?)
                }
            };
            let (verifier, report) = train_phase1_verifier(train, dev, cfg, &mut encoder)?;
            if let Some(dir) = out_dir {
                report.write(dir, "phase1")?;
                let mut tensors = verifier.named_tensors();
                if let EmbeddingSource::Featurizer(f) = &encoder {
                    let mut named = f.named_tensors();
                    named.extend(tensors);
                    tensors = named;
                }
                checkpoint_with_hash(tensors, hash).save(&dir.join(PHASE1_CKPT))?;
            }
            (encoder, verifier)
        }
    };
    if stop_after == Some(1) {
        return Ok(None);
    }

    // Phase 2.
    let p2_path = out_dir.map(|d| d.join(PHASE2_CKPT));
    let retriever = match &p2_path {
        Some(path) if path.exists() => {
            let ck = load_checked(path, hash)?;
            RetrieverParams::from_named_tensors(getter(&ck))?
        }
        _ => {
            let (retriever, report) =
                train_phase2_retriever(train, dev, cfg, &encoder, &verifier_phase1)?;
            if let Some(dir) = out_dir {
                report.write(dir, "phase2")?;
                checkpoint_with_hash(retriever.named_tensors(), hash)
                    .save(&dir.join(PHASE2_CKPT))?;
            }
            retriever
        }
    };
    if stop_after == Some(2) {
        return Ok(None);
    }

    // Phase 3.
    let p3_path = out_dir.map(|d| d.join(PHASE3_CKPT));
    let verifier_revisited = match &p3_path {
        Some(path) if path.exists() => {
            let ck = load_checked(path, hash)?;
            VerifierParams::from_named_tensors(getter(&ck))?
        }
        _ => {
            let (revisited, report) = train_phase3_revisit(
                train,
                dev,
                cfg,
                &encoder,
                &retriever,
                &verifier_phase1,
            )?;
            if let Some(dir) = out_dir {
                report.write(dir, "phase3")?;
                checkpoint_with_hash(revisited.named_tensors(), hash)
                    .save(&dir.join(PHASE3_CKPT))?;
            }
            revisited
        }
    };

    // Featurizer weights must be unchanged by phases 2 and 3; re-borrow to
    // make that explicit for the returned system.
    let _ = &mut encoder;
    Ok(Some(TrainedSystem {
        encoder,
        verifier_phase1,
        retriever,
        verifier_revisited,
        config: cfg.clone(),
    }))
}

/// Reload a trained system from its checkpoint directory. `precomputed` is
/// required when the system was trained on external embeddings.
pub fn load_system(
    dir: &Path,
    cfg: &TrainConfig,
    precomputed: Option<EmbeddingStore>,
) -> Result<TrainedSystem> {
    let hash = cfg.config_hash();
    let ck1 = load_checked(&dir.join(PHASE1_CKPT), hash)?;
    let encoder = if ck1.contains("featurizer.projection") {
        EmbeddingSource::Featurizer(FeaturizerParams::from_named_tensors(getter(&ck1))?)
    } else {
        let store = precomputed.ok_or_else(|| {
            Error::Config("checkpoint has no featurizer; supply the embedding file".into())
        })?;
        store.check_dim(cfg.d)?;
        EmbeddingSource::Precomputed(store)
    };
    let verifier_phase1 = VerifierParams::from_named_tensors(getter(&ck1))?;
    let ck2 = load_checked(&dir.join(PHASE2_CKPT), hash)?;
    let retriever = RetrieverParams::from_named_tensors(getter(&ck2))?;
    let ck3 = load_checked(&dir.join(PHASE3_CKPT), hash)?;
    let verifier_revisited = VerifierParams::from_named_tensors(getter(&ck3))?;
    Ok(TrainedSystem {
        encoder,
        verifier_phase1,
        retriever,
        verifier_revisited,
        config: cfg.clone(),
    })
}
