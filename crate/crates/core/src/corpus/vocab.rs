use super::{PreprocessConfig, Sentence, SentenceKey};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Dense token ids in sorted-token order, with per-token sentence frequency.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    doc_freq: Vec<usize>,
}

impl Vocabulary {
    /// Builds from (token, document frequency) pairs; ids follow sorted token order.
    pub fn from_frequencies(mut entries: Vec<(String, usize)>) -> Self {
        entries.sort();
        entries.dedup_by(|a, b| a.0 == b.0);
        let ids = entries
            .iter()
            .enumerate()
            .map(|(i, (t, _))| (t.clone(), i as u32))
            .collect();
        let (tokens, doc_freq) = entries.into_iter().unzip();
        Self {
            tokens,
            ids,
            doc_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, id: u32) -> usize {
        self.doc_freq[id as usize]
    }

    /// Maps tokens to ids, keeping positions; out-of-vocabulary tokens are `None`.
    pub fn encode(&self, tokens: &[String]) -> Vec<Option<u32>> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Content hash of the ordered token list.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.tokens {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

/// Sparse token counts for one sentence, sorted by token id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BowDocument {
    pub key: SentenceKey,
    pub counts: Vec<(u32, u32)>,
}

impl BowDocument {
    pub fn from_ids(key: SentenceKey, ids: impl IntoIterator<Item = u32>) -> Self {
        let mut map = BTreeMap::new();
        for id in ids {
            *map.entry(id).or_insert(0u32) += 1;
        }
        Self {
            key,
            counts: map.into_iter().collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total_tokens(&self) -> usize {
        self.counts.iter().map(|&(_, c)| c as usize).sum()
    }

    pub fn count(&self, id: u32) -> u32 {
        self.counts
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|pos| self.counts[pos].1)
            .unwrap_or(0)
    }

    /// Token ids with multiplicity, ascending.
    pub fn expand(&self) -> Vec<u32> {
        self.counts
            .iter()
            .flat_map(|&(id, c)| std::iter::repeat_n(id, c as usize))
            .collect()
    }
}

/// Counts the sentences containing each token and keeps those with
/// frequency at least `config.min_df`.
pub fn build_vocabulary(sentences: &[Sentence], config: &PreprocessConfig) -> Vocabulary {
    let df = sentences
        .par_iter()
        .fold(HashMap::<&str, usize>::new, |mut acc, s| {
            let unique: HashSet<&str> = s.tokens.iter().map(String::as_str).collect();
            for t in unique {
                *acc.entry(t).or_insert(0) += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (t, c) in b {
                *a.entry(t).or_insert(0) += c;
            }
            a
        });
    let min_df = config.min_df.max(1);
    Vocabulary::from_frequencies(
        df.into_iter()
            .filter(|&(_, c)| c >= min_df)
            .map(|(t, c)| (t.to_owned(), c))
            .collect(),
    )
}

/// Drops out-of-vocabulary tokens and counts the rest.
pub fn to_bow(sentence: &Sentence, vocab: &Vocabulary) -> BowDocument {
    BowDocument::from_ids(
        sentence.key(),
        sentence.tokens.iter().filter_map(|t| vocab.id(t)),
    )
}
