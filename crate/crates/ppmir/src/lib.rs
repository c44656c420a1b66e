//! Privacy-preserving similarity search over music embeddings.
//!
//! The crate computes inner products between embedding vectors while exactly
//! one side — the query or the database — stays encrypted under an additively
//! homomorphic scheme (a Paillier construction). On top of that primitive it
//! provides block-partitioned and per-block-weighted similarity, exhaustive
//! top-k retrieval, executable demonstrations of the score-leakage attacks
//! that motivate the design, and a benchmark harness for the scaling and
//! storage behaviour of the two deployment settings.
//!
//! Bulk scoring and encryption loops are data-parallel via rayon when the
//! default `parallel` feature is enabled; a sequential fallback keeps the
//! full API available without it.

pub mod ahe;
pub mod bench;
pub mod codec;
pub mod engine;
pub mod error;
pub mod par;
pub mod rng;
pub mod store;
pub mod threat;

pub use ahe::{keygen, Ciphertext, KeyId, KeyPair, PlainInteger, PrivateKey, PublicKey};
pub use codec::{decode_product, encode, encode_weight, overflow_budget, ScaleConfig};
pub use engine::{
    blocked_similarity, encdb_inner, encquery_inner, plain_inner, topk_search, weighted_similarity,
    Opener, QueryRef, RetrievalResult, ScoreKind, SearchKind, Setting, SimilarityScore, TargetRef,
};
pub use error::{Error, Result};
pub use par::Parallelism;
pub use rng::Randomness;
pub use store::{
    ingest_jsonl, synth_corpus, BlockSchema, CorpusProfile, EmbeddingVector, EncryptedVector,
    GroundTruth, WeightVector,
};
