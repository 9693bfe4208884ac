//! Evidence-retrieving claim verification at desk scale.
//!
//! The pipeline verifies tokenized claims against sentence-split source
//! documents in three trained stages: a verifier reads whole documents, an
//! evidence retriever learns to pick the sentences the verifier actually
//! relies on (and that humans marked as evidence), and the verifier then
//! revisits only the retrieved evidence. Everything runs on a small hand
//! rolled f64 tensor core with exact gradients, checked against finite
//! differences.

pub mod checkpoint;
pub mod corpus;
pub mod diagnostics;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod hashing;
pub mod losses;
pub mod numerics;
pub mod retriever;
pub mod trainer;
pub mod verifier;

pub use corpus::{ClaimDocument, Dataset, Split, SynthConfig, VerificationLabel};
pub use encoder::{EmbeddingSource, EmbeddingStore, FeaturizerParams, SentenceEmbeddingMatrix};
pub use error::{Error, Result};
pub use evaluation::EvalReport;
pub use losses::{FaithfulnessMargins, LossBreakdown, LossWeights};
pub use numerics::{Parameter, Tensor};
pub use retriever::{EvidenceMask, RetrieverParams, SentenceScores};
pub use trainer::{Ablation, TrainConfig, TrainedSystem};
pub use verifier::{PredictionDistribution, VerifierParams};
