//! Shared fixtures for the pipeline benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use claimcheck_core::corpus::{generate_synthetic, ClaimDocument, SynthConfig};
use claimcheck_core::encoder::FeaturizerParams;
use claimcheck_core::retriever::RetrieverParams;
use claimcheck_core::verifier::VerifierParams;

pub const D: usize = 64;
pub const H: usize = 64;
pub const R: usize = 32;
pub const N_BUCKETS: usize = 4096;

/// A small deterministic corpus shaped like the synthetic training data.
pub fn examples(n: usize) -> Vec<ClaimDocument> {
    let cfg = SynthConfig {
        n_examples: n,
        ..SynthConfig::default()
    };
    generate_synthetic(&cfg).expect("valid config").examples
}

pub fn models() -> (FeaturizerParams, VerifierParams, RetrieverParams) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let featurizer = FeaturizerParams::new(N_BUCKETS, D, &mut rng).expect("valid sizes");
    let verifier = VerifierParams::new(D, H, &mut rng).expect("valid sizes");
    let retriever = RetrieverParams::new(D, R, &mut rng).expect("valid sizes");
    (featurizer, verifier, retriever)
}
