//! Does the distributional context of an inanimate noun reveal its
//! grammatical gender? This crate trains skip-gram embeddings on tagged
//! corpora rewritten under four lemmatization conditions (surface forms,
//! full lemmatization, lemmatized nouns only, everything-but-nouns
//! lemmatized) and probes the vectors two ways: a gender classifier and a
//! learned orthogonal rotation that concentrates gender in one embedding
//! dimension. A synthetic gendered-language generator with controllable
//! concord and context bias provides ground truth for end-to-end checks.

pub mod classifier;
pub mod corpus;
pub mod embeddings;
pub mod lexicon;
pub mod linalg;
pub mod opt;
pub mod pipeline;
pub mod error;
pub mod report;
pub mod seeds;
pub mod stats;
pub mod synth;
pub mod ultradense;

pub use error::{Error, Result};
