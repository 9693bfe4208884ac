//! `claimcheck`: generate data, train the verify/retrieve/revisit pipeline,
//! run retrieval, evaluate, sweep k, and check gradients.
//!
//! Exit codes: 0 success, 1 validation/configuration errors, 2 I/O errors.
//! Every source of randomness is seeded; nothing reads the clock.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use claimcheck_core::corpus::{generate_synthetic, load_dataset, save_dataset, Split, SynthConfig};
use claimcheck_core::diagnostics::gradient_check_report;
use claimcheck_core::encoder::EmbeddingStore;
use claimcheck_core::error::Error;
use claimcheck_core::evaluation::{evaluate_system, k_sweep, k_sweep_csv};
use claimcheck_core::retriever::{score_sentences, select_top_k};
use claimcheck_core::trainer::{load_system, run_full_pipeline, Ablation, TrainConfig};
use claimcheck_core::Dataset;

#[derive(Parser)]
#[command(
    name = "claimcheck",
    version,
    about = "Claim verification with trained evidence retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic planted-evidence dataset (JSONL).
    GenSynth(GenSynthArgs),
    /// Train the three-phase pipeline and write checkpoints plus metric CSVs.
    Train(TrainArgs),
    /// Score document sentences and emit the top-k selection per example.
    Retrieve(RetrieveArgs),
    /// Evaluate a trained system and write a JSON report.
    Eval(EvalArgs),
    /// Re-run the revisit phase for several k values and tabulate micro F1.
    SweepK(SweepKArgs),
    /// Verify analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct GenSynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Number of examples for a single-file dataset.
    #[arg(long, conflicts_with_all = ["n_train", "n_dev"])]
    n: Option<usize>,
    /// Output path for a single-file dataset.
    #[arg(long, conflicts_with_all = ["train_out", "dev_out"])]
    out: Option<PathBuf>,
    /// Train-split size when generating two disjoint splits at once.
    #[arg(long, requires_all = ["n_dev", "train_out", "dev_out"])]
    n_train: Option<usize>,
    #[arg(long)]
    n_dev: Option<usize>,
    #[arg(long)]
    train_out: Option<PathBuf>,
    #[arg(long)]
    dev_out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    vocab_size: usize,
    #[arg(long, default_value_t = 20)]
    min_sentences: usize,
    #[arg(long, default_value_t = 20)]
    max_sentences: usize,
    /// Gold evidence sentences planted per Supported/Refuted document.
    #[arg(long, default_value_t = 1)]
    evidence: usize,
    /// Relative label weights as "ref,sup,nei".
    #[arg(long, default_value = "1,1,1")]
    label_mix: String,
}

#[derive(Args)]
struct ConfigOverrides {
    /// Flat key=value config file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    epochs_phase1: Option<usize>,
    #[arg(long)]
    epochs_phase2: Option<usize>,
    #[arg(long)]
    epochs_phase3: Option<usize>,
    #[arg(long)]
    k_percent: Option<f64>,
    #[arg(long)]
    alpha_full: Option<f64>,
    #[arg(long)]
    alpha_suff: Option<f64>,
    #[arg(long)]
    alpha_plau: Option<f64>,
    #[arg(long)]
    b_f: Option<f64>,
    #[arg(long)]
    b_s: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    n_buckets: Option<usize>,
}

impl ConfigOverrides {
    /// Resolve: defaults, then the config file, then individual flags.
    fn resolve(&self, fallback_file: Option<&Path>) -> Result<TrainConfig, Error> {
        let mut cfg = match (&self.config, fallback_file) {
            (Some(path), _) => TrainConfig::from_file(path)?,
            (None, Some(path)) if path.exists() => TrainConfig::from_file(path)?,
            _ => TrainConfig::default(),
        };
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.warmup_fraction {
            cfg.warmup_fraction = v;
        }
        if let Some(v) = self.epochs_phase1 {
            cfg.epochs_phase1 = v;
        }
        if let Some(v) = self.epochs_phase2 {
            cfg.epochs_phase2 = v;
        }
        if let Some(v) = self.epochs_phase3 {
            cfg.epochs_phase3 = v;
        }
        if let Some(v) = self.k_percent {
            cfg.k_percent = v;
        }
        if let Some(v) = self.alpha_full {
            cfg.weights.alpha_full = v;
        }
        if let Some(v) = self.alpha_suff {
            cfg.weights.alpha_suff = v;
        }
        if let Some(v) = self.alpha_plau {
            cfg.weights.alpha_plau = v;
        }
        if let Some(v) = self.b_f {
            cfg.margins.b_f = v;
        }
        if let Some(v) = self.b_s {
            cfg.margins.b_s = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.h {
            cfg.h = v;
        }
        if let Some(v) = self.r {
            cfg.r = v;
        }
        if let Some(v) = self.n_buckets {
            cfg.n_buckets = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training split (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Dev split for per-epoch metrics.
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Output directory for checkpoints, CSVs, and the resolved config.
    #[arg(long)]
    out_dir: PathBuf,
    /// Zero one loss group: "no-plau" or "no-faith".
    #[arg(long)]
    ablate: Option<String>,
    /// Precomputed embedding file instead of the built-in featurizer.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Stop after phase 1 or 2 (checkpoints written; rerun to resume).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    stop_after: Option<u8>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Checkpoint directory produced by `train`.
    #[arg(long)]
    ckpt_dir: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output JSONL of per-example scores and selections.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt_dir: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SweepKArgs {
    /// Checkpoint directory with completed phases 1 and 2.
    #[arg(long)]
    ckpt_dir: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Output CSV (header: k,micro_f1,macro_f1).
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated k percentages.
    #[arg(long, default_value = "1,3,5,10,15,20,25")]
    k: String,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
}

#[derive(Serialize)]
struct RetrieveRecord {
    id: String,
    scores: Vec<f64>,
    selected: Vec<usize>,
}

fn parse_weights3(s: &str) -> Result<[f64; 3], Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "expected three comma-separated weights, got '{s}'"
        )));
    }
    let mut out = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("'{p}' is not a number")))?;
    }
    Ok(out)
}

fn parse_k_list(s: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("'{p}' is not a number")))
        })
        .collect()
}

fn open_embeddings(path: &Option<PathBuf>) -> Result<Option<EmbeddingStore>, Error> {
    match path {
        Some(p) => Ok(Some(EmbeddingStore::open(p)?)),
        None => Ok(None),
    }
}

fn run_gen_synth(args: &GenSynthArgs) -> Result<(), Error> {
    let label_mix = parse_weights3(&args.label_mix)?;
    let make_cfg = |n: usize| SynthConfig {
        n_examples: n,
        vocab_size: args.vocab_size,
        sentences_per_doc: (args.min_sentences, args.max_sentences),
        evidence_sentences_per_doc: args.evidence,
        label_mix,
        seed: args.seed,
    };
    match (args.n, &args.out, args.n_train, args.n_dev, &args.train_out, &args.dev_out) {
        (Some(n), Some(out), None, None, None, None) => {
            let ds = generate_synthetic(&make_cfg(n))?;
            save_dataset(&ds, out)?;
            eprintln!("wrote {} examples to {}", ds.len(), out.display());
            Ok(())
        }
        (None, None, Some(n_train), Some(n_dev), Some(train_out), Some(dev_out)) => {
            // One generator stream, split into disjoint train/dev files.
            let all = generate_synthetic(&make_cfg(n_train + n_dev))?;
            let train = Dataset {
                split: Split::Train,
                examples: all.examples[..n_train].to_vec(),
            };
            let dev = Dataset {
                split: Split::Dev,
                examples: all.examples[n_train..].to_vec(),
            };
            save_dataset(&train, train_out)?;
            save_dataset(&dev, dev_out)?;
            eprintln!(
                "wrote {} train examples to {} and {} dev examples to {}",
                train.len(),
                train_out.display(),
                dev.len(),
                dev_out.display()
            );
            Ok(())
        }
        _ => Err(Error::Config(
            "use either --n with --out, or --n-train/--n-dev with --train-out/--dev-out".into(),
        )),
    }
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let mut cfg = args.overrides.resolve(None)?;
    if let Some(ablate) = &args.ablate {
        cfg = cfg.with_ablation(Ablation::parse(ablate)?);
    }
    let train = load_dataset(&args.train, Split::Train)?;
    let dev = match &args.dev {
        Some(path) => Some(load_dataset(path, Split::Dev)?),
        None => None,
    };
    let embeddings = open_embeddings(&args.embeddings)?;
    let outcome = run_full_pipeline(
        &train,
        dev.as_ref(),
        &cfg,
        Some(&args.out_dir),
        embeddings,
        args.stop_after,
    )?;
    match outcome {
        Some(_) => eprintln!("training complete; checkpoints in {}", args.out_dir.display()),
        None => eprintln!(
            "stopped after phase {}; rerun the same command to resume",
            args.stop_after.unwrap_or(0)
        ),
    }
    Ok(())
}

fn run_retrieve(args: &RetrieveArgs) -> Result<(), Error> {
    let cfg = args.overrides.resolve(Some(&args.ckpt_dir.join("config.txt")))?;
    let data = load_dataset(&args.data, Split::Test)?;
    let system = load_system(&args.ckpt_dir, &cfg, open_embeddings(&args.embeddings)?)?;
    let mut out = String::new();
    for ex in &data.examples {
        let s = system.encoder.encode_example(ex)?;
        let scores = score_sentences(&s, &system.retriever)?;
        let mask = select_top_k(&scores, cfg.k_percent)?;
        let record = RetrieveRecord {
            id: ex.id.clone(),
            scores: scores.s.clone(),
            selected: mask.selected_indices(),
        };
        out.push_str(
            &serde_json::to_string(&record)
                .map_err(|e| Error::Validation(format!("serialization failed: {e}")))?,
        );
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    eprintln!("wrote selections for {} examples to {}", data.len(), args.out.display());
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<(), Error> {
    let cfg = args.overrides.resolve(Some(&args.ckpt_dir.join("config.txt")))?;
    let data = load_dataset(&args.data, Split::Test)?;
    let system = load_system(&args.ckpt_dir, &cfg, open_embeddings(&args.embeddings)?)?;
    let report = evaluate_system(&system, &data, cfg.k_percent)?;
    fs::write(&args.out, report.to_json()?)?;
    eprintln!(
        "micro_f1={:.4} macro_f1={:.4} evidence_f1={:.4} bleu={:.4}",
        report.micro_f1, report.macro_f1, report.evidence_f1, report.bleu
    );
    Ok(())
}

fn run_sweep_k(args: &SweepKArgs) -> Result<(), Error> {
    let cfg = args.overrides.resolve(Some(&args.ckpt_dir.join("config.txt")))?;
    let k_values = parse_k_list(&args.k)?;
    let train = load_dataset(&args.train, Split::Train)?;
    let dev = load_dataset(&args.dev, Split::Dev)?;
    let system = load_system(&args.ckpt_dir, &cfg, open_embeddings(&args.embeddings)?)?;
    let points = k_sweep(
        &train,
        &dev,
        &cfg,
        &system.encoder,
        &system.verifier_phase1,
        &system.retriever,
        &k_values,
    )?;
    fs::write(&args.out, k_sweep_csv(&points))?;
    for p in &points {
        eprintln!("k={:>6}: micro_f1={:.4} macro_f1={:.4}", p.k_percent, p.micro_f1, p.macro_f1);
    }
    Ok(())
}

fn run_grad_check(args: &GradCheckArgs) -> Result<bool, Error> {
    let report = gradient_check_report(args.epsilon)?;
    let mut all_passed = true;
    for item in &report {
        let status = if item.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<40} max_rel_err={:.3e} tolerance={:.0e}",
            item.name, item.max_rel_err, item.tolerance
        );
        all_passed &= item.passed();
    }
    Ok(all_passed)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::GenSynth(args) => run_gen_synth(args).map(|()| true),
        Command::Train(args) => run_train(args).map(|()| true),
        Command::Retrieve(args) => run_retrieve(args).map(|()| true),
        Command::Eval(args) => run_eval(args).map(|()| true),
        Command::SweepK(args) => run_sweep_k(args).map(|()| true),
        Command::GradCheck(args) => run_grad_check(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_io() { 2 } else { 1 })
        }
    }
}
