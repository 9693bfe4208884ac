//! Scratch experiments (run explicitly with --ignored --nocapture).

use claimcheck_core::corpus::{generate_synthetic, Dataset, Split, SynthConfig};
use claimcheck_core::encoder::{EmbeddingSource, FeaturizerParams};
use claimcheck_core::trainer::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_v(n_train: usize, n_dev: usize, seed: u64, vocab: usize) -> (Dataset, Dataset) {
    let cfg = SynthConfig {
        n_examples: n_train + n_dev,
        vocab_size: vocab,
        sentences_per_doc: (20, 20),
        evidence_sentences_per_doc: 1,
        label_mix: [1.0, 1.0, 1.0],
        seed,
    };
    let all = generate_synthetic(&cfg).unwrap();
    let train = Dataset {
        split: Split::Train,
        examples: all.examples[..n_train].to_vec(),
    };
    let dev = Dataset {
        split: Split::Dev,
        examples: all.examples[n_train..].to_vec(),
    };
    (train, dev)
}

fn base_cfg(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.lr = 0.03;
    cfg.epochs_phase1 = 60;
    cfg.epochs_phase2 = 8;
    cfg.epochs_phase3 = 6;
    cfg.d = 64;
    cfg.h = 64;
    cfg.r = 32;
    cfg.n_buckets = 4096;
    cfg.seed = seed;
    cfg
}

#[test]
#[ignore]
fn phase1_curve() {
    use claimcheck_core::hashing::derive_seed;
    let (train, dev) = corpus_v(2000, 200, 42, 64);
    for (lr, epochs, h) in [(0.02, 100, 64)] {
        let mut finals = Vec::new();
        for seed in [42u64, 1, 2, 3, 4, 5, 6, 7, 8, 9] {
            let mut cfg = base_cfg(seed);
            cfg.lr = lr;
            cfg.epochs_phase1 = epochs;
            cfg.h = h;
            // Same init path as the pipeline.
            let mut encoder = {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "init.featurizer"));
                EmbeddingSource::Featurizer(
                    FeaturizerParams::new(cfg.n_buckets, cfg.d, &mut rng).unwrap(),
                )
            };
            let (_v, report) =
                train_phase1_verifier(&train, Some(&dev), &cfg, &mut encoder).unwrap();
            finals.push(report.dev.last().unwrap().metrics[0].1);
        }
        println!("lr={lr} epochs={epochs} h={h}: finals {finals:?}");
    }
}

#[test]
#[ignore]
fn full_pipeline_probe() {
    let (train, dev) = corpus_v(2000, 200, 42, 64);
    for seed in [42u64, 1, 2] {
        let cfg = base_cfg(seed);
        let t0 = std::time::Instant::now();
        let system = run_full_pipeline(&train, Some(&dev), &cfg, None, None, None)
            .unwrap()
            .unwrap();
        let report =
            claimcheck_core::evaluation::evaluate_system(&system, &dev, cfg.k_percent).unwrap();
        // Phase-1 dev micro for comparison.
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        for ex in &dev.examples {
            let s = system.encoder.encode_example(ex).unwrap();
            preds.push(claimcheck_core::verifier::classify(&s, &system.verifier_phase1).unwrap());
            golds.push(ex.label);
        }
        let (p1_micro, _, _) = claimcheck_core::evaluation::micro_macro_f1(&preds, &golds).unwrap();
        println!(
            "seed={seed}: p1_micro={p1_micro:.3} p3_micro={:.3} ev_recall={:.3} ev_f1={:.3} bleu={:.3} fullness={:.3} suff={:.3} ({:.1?})",
            report.micro_f1,
            report.evidence_recall,
            report.evidence_f1,
            report.bleu,
            report.mean_fullness_delta,
            report.mean_sufficiency_delta,
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn ablation_probe() {
    let (train, dev) = corpus_v(2000, 200, 42, 64);
    for seed in [42u64, 1, 2] {
        for ablation in [Ablation::None, Ablation::NoPlau, Ablation::NoFaith] {
            let cfg = base_cfg(seed).with_ablation(ablation);
            let system = run_full_pipeline(&train, Some(&dev), &cfg, None, None, None)
                .unwrap()
                .unwrap();
            let report =
                claimcheck_core::evaluation::evaluate_system(&system, &dev, cfg.k_percent).unwrap();
            println!(
                "seed={seed} {ablation:?}: ev_f1={:.4} ev_recall={:.4} fullness={:.4} p3_micro={:.3}",
                report.evidence_f1, report.evidence_recall, report.mean_fullness_delta, report.micro_f1
            );
        }
    }
}

#[test]
#[ignore]
fn sweep_probe() {
    let (train, dev) = corpus_v(2000, 200, 42, 64);
    let cfg = base_cfg(42);
    let system = run_full_pipeline(&train, Some(&dev), &cfg, None, None, None)
        .unwrap()
        .unwrap();
    let ks = [1.0, 3.0, 5.0, 10.0, 15.0, 20.0, 25.0, 100.0];
    let t0 = std::time::Instant::now();
    let points = claimcheck_core::evaluation::k_sweep(
        &train,
        &dev,
        &cfg,
        &system.encoder,
        &system.verifier_phase1,
        &system.retriever,
        &ks,
    )
    .unwrap();
    for p in &points {
        println!("k={:>5}: micro={:.3} macro={:.3}", p.k_percent, p.micro_f1, p.macro_f1);
    }
    println!("sweep took {:.1?}", t0.elapsed());
}
