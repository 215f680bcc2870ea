//! Topic coherence: sliding-window NPMI c_v (primary) and document
//! co-occurrence UMass (cross-check).

use crate::corpus::{BowDocument, Vocabulary};
use crate::lda::{LdaError, LdaModel};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::Write;

pub const DEFAULT_WINDOW: usize = 110;
pub const DEFAULT_TOP_N: usize = 10;
pub const DEFAULT_EPSILON: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum CoherenceError {
    #[error("need at least two top words, got {0}")]
    TooFewWords(usize),
    #[error("top words must be distinct; word id {0} repeats")]
    DuplicateWord(u32),
    #[error("word id {0} never occurs in the reference corpus")]
    ZeroDocumentFrequency(u32),
    #[error("window size must be at least 2, got {0}")]
    WindowTooSmall(usize),
    #[error("reference corpus produces no sliding windows")]
    NoWindows,
    #[error("cannot aggregate an empty list of scores")]
    Empty,
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error("writing report: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceMetric {
    Cv,
    Umass,
}

impl fmt::Display for CoherenceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoherenceMetric::Cv => "c_v",
            CoherenceMetric::Umass => "u_mass",
        })
    }
}

fn check_distinct(words: &[u32]) -> Result<(), CoherenceError> {
    if words.len() < 2 {
        return Err(CoherenceError::TooFewWords(words.len()));
    }
    for (i, w) in words.iter().enumerate() {
        if words[..i].contains(w) {
            return Err(CoherenceError::DuplicateWord(*w));
        }
    }
    Ok(())
}

/// UMass coherence of a ranked word list:
/// Σ_{i<j} ln[(D(w_i, w_j) + 1) / D(w_j)], with D counting documents.
pub fn umass_for_words(words: &[u32], corpus: &[BowDocument]) -> Result<f64, CoherenceError> {
    check_distinct(words)?;
    let n = words.len();
    let mut single = vec![0usize; n];
    let mut pair = vec![0usize; n * n];
    let mut present = Vec::with_capacity(n);
    for doc in corpus {
        present.clear();
        present.extend((0..n).filter(|&i| doc.count(words[i]) > 0));
        for (a, &i) in present.iter().enumerate() {
            single[i] += 1;
            for &j in &present[a + 1..] {
                pair[i * n + j] += 1;
            }
        }
    }
    let mut score = 0.0;
    for j in 1..n {
        if single[j] == 0 {
            return Err(CoherenceError::ZeroDocumentFrequency(words[j]));
        }
        for i in 0..j {
            score += ((pair[i * n + j] + 1) as f64 / single[j] as f64).ln();
        }
    }
    Ok(score)
}

pub fn umass_coherence(
    model: &LdaModel,
    topic: usize,
    corpus: &[BowDocument],
    top_n: usize,
) -> Result<f64, CoherenceError> {
    umass_for_words(&model.top_word_ids(topic, top_n)?, corpus)
}

/// Reference texts for boolean sliding-window statistics. Token positions are
/// kept, with out-of-vocabulary tokens as `None`, so window spans match the
/// preprocessed sentences.
#[derive(Debug, Clone)]
pub struct SlidingWindows {
    texts: Vec<Vec<Option<u32>>>,
    window: usize,
}

impl SlidingWindows {
    pub fn new(texts: Vec<Vec<Option<u32>>>, window: usize) -> Result<Self, CoherenceError> {
        if window < 2 {
            return Err(CoherenceError::WindowTooSmall(window));
        }
        Ok(Self { texts, window })
    }

    pub fn from_token_lists(
        sentences: &[Vec<String>],
        vocab: &Vocabulary,
        window: usize,
    ) -> Result<Self, CoherenceError> {
        Self::new(sentences.iter().map(|s| vocab.encode(s)).collect(), window)
    }

    /// Uses each document's tokens in id order; adequate when the window is
    /// at least as long as every document.
    pub fn from_bow(docs: &[BowDocument], window: usize) -> Result<Self, CoherenceError> {
        Self::new(
            docs.iter()
                .map(|d| d.expand().into_iter().map(Some).collect())
                .collect(),
            window,
        )
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Texts shorter than the window form a single window; empty texts none.
    pub fn num_windows(&self) -> usize {
        self.texts
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| t.len().saturating_sub(self.window) + 1)
            .sum()
    }

    fn counts(&self, words: &[u32]) -> (usize, Vec<usize>) {
        let n = words.len();
        let index: HashMap<u32, usize> = words.iter().enumerate().map(|(i, &w)| (w, i)).collect();
        let mut joint = vec![0usize; n * n];
        let mut total = 0;
        let mut present = vec![false; n];
        let mut hits = Vec::with_capacity(n);
        for text in self.texts.iter().filter(|t| !t.is_empty()) {
            let span = self.window.min(text.len());
            for start in 0..=(text.len() - span) {
                total += 1;
                hits.clear();
                for id in text[start..start + span].iter().flatten() {
                    if let Some(&i) = index.get(id) {
                        if !present[i] {
                            present[i] = true;
                            hits.push(i);
                        }
                    }
                }
                for &i in &hits {
                    for &j in &hits {
                        joint[i * n + j] += 1;
                    }
                }
                for &i in &hits {
                    present[i] = false;
                }
            }
        }
        (total, joint)
    }

    /// c_v of a word set: NPMI over boolean windows, each word's NPMI vector
    /// compared by cosine with the sum of all vectors, averaged over words.
    pub fn cv(&self, words: &[u32], epsilon: f64) -> Result<f64, CoherenceError> {
        check_distinct(words)?;
        let n = words.len();
        let (total, joint) = self.counts(words);
        if total == 0 {
            return Err(CoherenceError::NoWindows);
        }
        let total = total as f64;
        let npmi = |i: usize, j: usize| -> f64 {
            let (ci, cj, cij) = (joint[i * n + i], joint[j * n + j], joint[i * n + j]);
            if ci == 0 || cj == 0 {
                // no evidence for an unseen word
                return 0.0;
            }
            let p_ij = cij as f64 / total;
            if p_ij >= 1.0 {
                return 1.0;
            }
            let p_i = ci as f64 / total;
            let p_j = cj as f64 / total;
            let joint_p = p_ij + epsilon;
            (joint_p / (p_i * p_j)).ln() / -joint_p.ln()
        };
        let vectors: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| npmi(i, j)).collect()).collect();
        let sum: Vec<f64> = (0..n).map(|j| vectors.iter().map(|v| v[j]).sum()).collect();
        let score = vectors.iter().map(|v| cosine(v, &sum)).sum::<f64>() / n as f64;
        Ok(score)
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn cv_coherence(
    model: &LdaModel,
    topic: usize,
    windows: &SlidingWindows,
    top_n: usize,
    epsilon: f64,
) -> Result<f64, CoherenceError> {
    windows.cv(&model.top_word_ids(topic, top_n)?, epsilon)
}

pub fn aggregate_coherence(per_topic: &[f64]) -> Result<f64, CoherenceError> {
    if per_topic.is_empty() {
        return Err(CoherenceError::Empty);
    }
    Ok(per_topic.iter().sum::<f64>() / per_topic.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub metric: CoherenceMetric,
    pub top_n: usize,
    pub window: Option<usize>,
    pub per_topic: Vec<f64>,
    pub aggregate: f64,
}

impl CoherenceReport {
    pub fn cv(
        model: &LdaModel,
        windows: &SlidingWindows,
        top_n: usize,
        epsilon: f64,
    ) -> Result<Self, CoherenceError> {
        let per_topic = (0..model.k)
            .map(|t| cv_coherence(model, t, windows, top_n, epsilon))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            metric: CoherenceMetric::Cv,
            top_n,
            window: Some(windows.window()),
            aggregate: aggregate_coherence(&per_topic)?,
            per_topic,
        })
    }

    pub fn umass(model: &LdaModel, corpus: &[BowDocument], top_n: usize) -> Result<Self, CoherenceError> {
        let per_topic = (0..model.k)
            .map(|t| umass_coherence(model, t, corpus, top_n))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            metric: CoherenceMetric::Umass,
            top_n,
            window: None,
            aggregate: aggregate_coherence(&per_topic)?,
            per_topic,
        })
    }

    /// Rows of `topic_id,metric,score`, topics numbered from 1.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CoherenceError> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CoherenceError::Io(e.to_string());
        w.write_record(["topic_id", "metric", "score"]).map_err(io)?;
        for (t, s) in self.per_topic.iter().enumerate() {
            w.write_record([(t + 1).to_string(), self.metric.to_string(), format!("{s:.6}")])
                .map_err(io)?;
        }
        w.flush().map_err(|e| CoherenceError::Io(e.to_string()))
    }
}
