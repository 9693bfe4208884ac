//! Microbenchmarks for the hot paths: encoding, scoring plus selection, the
//! combined loss with its backward pass, verdict prediction, and the metrics.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use claimcheck_bench::{examples, models};
use claimcheck_core::corpus::VerificationLabel;
use claimcheck_core::encoder::encode;
use claimcheck_core::evaluation::{bleu, micro_macro_f1};
use claimcheck_core::losses::{
    retriever_example_train_step, FaithfulnessMargins, LossWeights,
};
use claimcheck_core::retriever::{score_sentences, select_top_k};
use claimcheck_core::verifier::predict;

fn bench_encode(c: &mut Criterion) {
    let (featurizer, _, _) = models();
    let exs = examples(16);
    c.bench_function("encode 16 documents", |b| {
        b.iter(|| {
            for ex in &exs {
                black_box(encode(ex, &featurizer).unwrap());
            }
        })
    });
}

fn bench_score_and_select(c: &mut Criterion) {
    let (featurizer, _, retriever) = models();
    let exs = examples(16);
    let mats: Vec<_> = exs.iter().map(|ex| encode(ex, &featurizer).unwrap()).collect();
    c.bench_function("score + top-k over 16 documents", |b| {
        b.iter(|| {
            for s in &mats {
                let scores = score_sentences(s, &retriever).unwrap();
                black_box(select_top_k(&scores, 5.0).unwrap());
            }
        })
    });
}

fn bench_combined_loss_step(c: &mut Criterion) {
    let (featurizer, verifier, retriever) = models();
    let exs = examples(16);
    let mats: Vec<_> = exs.iter().map(|ex| encode(ex, &featurizer).unwrap()).collect();
    let weights = LossWeights::default();
    let margins = FaithfulnessMargins::default();
    c.bench_function("combined loss fwd+bwd over 16 examples", |b| {
        b.iter(|| {
            let mut r = retriever.clone();
            for (s, ex) in mats.iter().zip(&exs) {
                black_box(
                    retriever_example_train_step(
                        s,
                        &ex.gold_evidence,
                        ex.label,
                        &verifier,
                        &mut r,
                        5.0,
                        &weights,
                        &margins,
                        1.0 / 16.0,
                    )
                    .unwrap(),
                );
            }
        })
    });
}

fn bench_predict(c: &mut Criterion) {
    let (featurizer, verifier, _) = models();
    let exs = examples(16);
    let mats: Vec<_> = exs.iter().map(|ex| encode(ex, &featurizer).unwrap()).collect();
    c.bench_function("verdict prediction over 16 documents", |b| {
        b.iter(|| {
            for s in &mats {
                black_box(predict(s, &verifier).unwrap());
            }
        })
    });
}

fn bench_metrics(c: &mut Criterion) {
    let golds: Vec<VerificationLabel> = (0..999)
        .map(|i| VerificationLabel::from_code(i % 3).unwrap())
        .collect();
    let preds: Vec<VerificationLabel> = (0..999)
        .map(|i| VerificationLabel::from_code((i * 7 + 1) % 3).unwrap())
        .collect();
    c.bench_function("micro/macro F1 over 999 examples", |b| {
        b.iter(|| black_box(micro_macro_f1(&preds, &golds).unwrap()))
    });

    let a: Vec<String> = (0..40).map(|i| format!("t{}", i % 11)).collect();
    let g: Vec<String> = (0..40).map(|i| format!("t{}", (i * 3) % 13)).collect();
    c.bench_function("smoothed BLEU, 40-token pair", |b| {
        b.iter(|| black_box(bleu(&a, &g).unwrap()))
    });
}

criterion_group!(
    benches,
    bench_encode,
    bench_score_and_select,
    bench_combined_loss_step,
    bench_predict,
    bench_metrics
);
criterion_main!(benches);
