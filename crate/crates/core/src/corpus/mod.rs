//! Review ingestion, sentence segmentation, token preprocessing and the
//! bag-of-words corpus that feeds the topic model.

mod ingest;
mod preprocess;
mod segment;
pub mod synthetic;
mod vocab;

use serde::{Deserialize, Serialize};
use std::fmt;

pub use ingest::{load_reviews, InputFormat, ReviewSet};
pub use preprocess::{preprocess, PreprocessConfig, SuffixRule, DEFAULT_LEMMAS, DEFAULT_STOPWORDS};
pub use segment::{join_sentences, segment_sentences};
pub use synthetic::{generate_synthetic, ratings_by_rank, sample_corpus, SyntheticCorpus, RATING_SHARES};
pub use vocab::{build_vocabulary, to_bow, BowDocument, Vocabulary};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} at line {line}: {reason}")]
    Malformed {
        what: &'static str,
        line: usize,
        reason: String,
    },
    #[error("invalid synthetic corpus parameters: {0}")]
    InvalidSynthetic(String),
}

/// One rated review as ingested from disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    pub hotel_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    pub rating: u8,
    pub text: String,
}

impl Review {
    /// A review with no visible text. Kept, but yields no sentences.
    pub fn is_degenerate(&self) -> bool {
        self.text.trim().is_empty()
    }
}

/// Identifies a sentence: owning review plus 0-based position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub review_id: String,
    pub index: usize,
}

impl SentenceKey {
    pub fn new(review_id: impl Into<String>, index: usize) -> Self {
        Self {
            review_id: review_id.into(),
            index,
        }
    }
}

impl fmt::Display for SentenceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.review_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub review_id: String,
    pub index: usize,
    /// Sentence text including its terminal mark.
    pub raw: String,
    /// Whitespace that followed the sentence in the review text.
    #[serde(default)]
    pub delimiter: String,
    #[serde(default)]
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey::new(self.review_id.clone(), self.index)
    }
}
