//! Corpus ingestion: labeled sentences, annotation conversion, vocabulary,
//! pretrained embeddings and the TSV corpus format.

mod align;
mod embeddings;
mod spans;
mod tokenize;
mod tsv;
mod vocab;

pub use align::{align_correction, edit_script, EditOp};
pub use embeddings::{load_pretrained, PretrainedCoverage};
pub use spans::{read_span_file, spans_to_labels, SpanAnnotation};
pub use tokenize::{read_token_lines, tokenize};
pub use tsv::{format_tsv, parse_tsv, read_tsv, write_tsv};
pub use vocab::{build_vocab, normalize, Vocabulary, PAD, PAD_ID, UNK, UNK_ID};

use crate::error::{Error, Result};

pub const CORRECT: u8 = 0;
pub const INCORRECT: u8 = 1;

/// Tokens with one binary label each (0 = correct, 1 = incorrect).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub labels: Vec<u8>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<String>, labels: Vec<u8>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Data(format!("label {bad} is not binary")));
        }
        Ok(LabeledSentence { tokens, labels })
    }

    /// All tokens labeled correct.
    pub fn clean(tokens: Vec<String>) -> Self {
        let labels = vec![CORRECT; tokens.len()];
        LabeledSentence { tokens, labels }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == INCORRECT).count()
    }
}

/// Convenience for tests and fixtures.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
