//! Word embeddings: vocabulary, skip-gram training and vector file I/O.

mod io;
mod sgns;
mod vocab;

pub use io::{load_state, load_vectors, save_state, save_vectors};
pub use sgns::{
    sgns_pair_loss, train_sgns, train_sgns_logged, NegativeSampleStream, NegativeSampler,
    PairLabel, SgnsConfig, TokenStream, TrainLog,
};
pub use vocab::{build_vocab, VocabEntry, Vocabulary};

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Embeddings for a vocabulary: the published input vectors plus the
/// context (output) vectors kept for training resumption. Analyses read
/// only the input vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    pub input: Array2<f64>,
    pub output: Array2<f64>,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, input: Array2<f64>, output: Array2<f64>) -> Result<Self> {
        if input.nrows() != vocab.len() || output.nrows() != vocab.len() {
            return Err(Error::Format(format!(
                "embedding row count {} does not match vocabulary size {}",
                input.nrows(),
                vocab.len()
            )));
        }
        if input.ncols() != output.ncols() {
            return Err(Error::Format(
                "input and output vector dimensions differ".into(),
            ));
        }
        Ok(EmbeddingTable {
            vocab,
            input,
            output,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn dim(&self) -> usize {
        self.input.ncols()
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    /// Published embedding of a token (case-normalized lookup).
    pub fn vector(&self, token: &str) -> Option<ArrayView1<'_, f64>> {
        self.vocab.id(token).map(|id| self.input.row(id))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.id(token).is_some()
    }
}
