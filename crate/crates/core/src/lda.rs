//! Latent Dirichlet Allocation trained by collapsed Gibbs sampling.
//!
//! Documents are swept in sentence-key order and every document owns an RNG
//! stream derived from `(seed, key)`, so a trained model depends only on the
//! set of documents and the seed, not on the order they were supplied in.

use crate::corpus::{BowDocument, SentenceKey, Vocabulary};
use crate::seed;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum LdaError {
    #[error("invalid LDA configuration: {0}")]
    Config(String),
    #[error("document has no in-vocabulary tokens; no assignable topic")]
    NoAssignableTopic,
    #[error("topic {topic} out of range for a {k}-topic model")]
    TopicOutOfRange { topic: usize, k: usize },
    #[error("token id {id} out of range for vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },
    #[error("model was trained on a different vocabulary (expected {expected}, found {found})")]
    VocabularyMismatch { expected: String, found: String },
    #[error("model artifact: {0}")]
    Artifact(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize, alpha: f64, eta: f64) -> Self {
        Self {
            k,
            alpha,
            eta,
            iterations: 500,
            seed: 0,
        }
    }

    pub fn iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), LdaError> {
        if self.k < 1 {
            return Err(LdaError::Config("K must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(LdaError::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(LdaError::Config(format!("eta must be > 0, got {}", self.eta)));
        }
        if self.iterations < 1 {
            return Err(LdaError::Config("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-document topic proportions.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicDistribution(pub Vec<f64>);

impl TopicDistribution {
    pub fn dominant(&self) -> usize {
        dominant_topic(self)
    }
}

/// Argmax with ties going to the lowest topic index.
pub fn dominant_topic(theta: &TopicDistribution) -> usize {
    let mut best = 0;
    for (k, &p) in theta.0.iter().enumerate() {
        if p > theta.0[best] {
            best = k;
        }
    }
    best
}

/// A fitted model: the final Gibbs state's topic-word counts plus priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub format_version: u32,
    pub k: usize,
    pub alpha: f64,
    pub eta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub vocab_size: usize,
    pub vocab_digest: String,
    /// K rows of V counts.
    pub topic_word_counts: Vec<Vec<u32>>,
    pub topic_totals: Vec<u64>,
}

impl LdaModel {
    pub fn phi(&self, topic: usize, word: u32) -> f64 {
        let denom = self.topic_totals[topic] as f64 + self.vocab_size as f64 * self.eta;
        (self.topic_word_counts[topic][word as usize] as f64 + self.eta) / denom
    }

    pub fn phi_row(&self, topic: usize) -> Vec<f64> {
        (0..self.vocab_size as u32).map(|w| self.phi(topic, w)).collect()
    }

    fn check_topic(&self, topic: usize) -> Result<(), LdaError> {
        if topic >= self.k {
            return Err(LdaError::TopicOutOfRange { topic, k: self.k });
        }
        Ok(())
    }

    /// Word ids by descending probability, ties by ascending id.
    pub fn top_word_ids(&self, topic: usize, n: usize) -> Result<Vec<u32>, LdaError> {
        self.check_topic(topic)?;
        let counts = &self.topic_word_counts[topic];
        let mut ids: Vec<u32> = (0..self.vocab_size as u32).collect();
        ids.sort_by(|&a, &b| counts[b as usize].cmp(&counts[a as usize]).then(a.cmp(&b)));
        ids.truncate(n);
        Ok(ids)
    }

    pub fn top_words(
        &self,
        vocab: &Vocabulary,
        topic: usize,
        n: usize,
    ) -> Result<Vec<(String, f64)>, LdaError> {
        self.verify_vocabulary(vocab)?;
        Ok(self
            .top_word_ids(topic, n)?
            .into_iter()
            .map(|id| {
                let token = vocab.token(id).unwrap_or_default().to_owned();
                (token, self.phi(topic, id))
            })
            .collect())
    }

    pub fn verify_vocabulary(&self, vocab: &Vocabulary) -> Result<(), LdaError> {
        let found = vocab.digest();
        if found != self.vocab_digest || vocab.len() != self.vocab_size {
            return Err(LdaError::VocabularyMismatch {
                expected: self.vocab_digest.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LdaError> {
        fs::write(path.as_ref(), self.to_json()).map_err(|e| LdaError::Artifact(e.to_string()))
    }

    /// Loads a saved model and checks it against the vocabulary it will be used with.
    pub fn load(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self, LdaError> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| LdaError::Artifact(e.to_string()))?;
        let model: LdaModel =
            serde_json::from_str(&text).map_err(|e| LdaError::Artifact(e.to_string()))?;
        if model.format_version != FORMAT_VERSION {
            return Err(LdaError::Artifact(format!(
                "unsupported format version {}",
                model.format_version
            )));
        }
        let consistent = model.topic_word_counts.len() == model.k
            && model
                .topic_word_counts
                .iter()
                .zip(&model.topic_totals)
                .all(|(row, &t)| row.len() == model.vocab_size && row.iter().map(|&c| c as u64).sum::<u64>() == t);
        if !consistent {
            return Err(LdaError::Artifact("count matrices are inconsistent".into()));
        }
        model.verify_vocabulary(vocab)?;
        Ok(model)
    }
}

/// Mutable collapsed-Gibbs state. Exposed so callers can observe the chain
/// between sweeps; [`train_lda`] is the usual entry point.
pub struct GibbsSampler {
    params: LdaParams,
    vocab_size: usize,
    vocab_digest: String,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    /// D x K, row-major.
    doc_topic: Vec<u32>,
    /// V x K, row-major.
    word_topic: Vec<u32>,
    topic_totals: Vec<u64>,
    rngs: Vec<ChaCha8Rng>,
    sweeps: usize,
}

impl GibbsSampler {
    pub fn new(corpus: &[BowDocument], vocab: &Vocabulary, params: LdaParams) -> Result<Self, LdaError> {
        params.validate()?;
        if vocab.is_empty() {
            return Err(LdaError::Config("vocabulary is empty".into()));
        }
        let v = vocab.len();
        let k = params.k;
        let mut ordered: Vec<&BowDocument> = corpus.iter().filter(|d| !d.is_empty()).collect();
        if ordered.is_empty() {
            return Err(LdaError::Config("corpus has no non-empty documents".into()));
        }
        ordered.sort_by(|a, b| a.key.cmp(&b.key));

        let mut docs = Vec::with_capacity(ordered.len());
        let mut rngs = Vec::with_capacity(ordered.len());
        for doc in &ordered {
            if let Some(&(id, _)) = doc.counts.iter().find(|&&(id, _)| id as usize >= v) {
                return Err(LdaError::TokenOutOfRange { id, vocab_size: v });
            }
            docs.push(doc.expand());
            rngs.push(doc_rng(params.seed, &doc.key));
        }

        let mut sampler = Self {
            params,
            vocab_size: v,
            vocab_digest: vocab.digest(),
            assignments: Vec::with_capacity(docs.len()),
            doc_topic: vec![0; docs.len() * k],
            word_topic: vec![0; v * k],
            topic_totals: vec![0; k],
            docs,
            rngs,
            sweeps: 0,
        };
        for d in 0..sampler.docs.len() {
            let z: Vec<u32> = (0..sampler.docs[d].len())
                .map(|_| sampler.rngs[d].random_range(0..k as u32))
                .collect();
            for (&w, &t) in sampler.docs[d].iter().zip(&z) {
                sampler.doc_topic[d * k + t as usize] += 1;
                sampler.word_topic[w as usize * k + t as usize] += 1;
                sampler.topic_totals[t as usize] += 1;
            }
            sampler.assignments.push(z);
        }
        Ok(sampler)
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn total_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    /// One full pass resampling every token's topic from
    /// P(z = k | rest) ∝ (n_dk + α)(n_kw + η) / (n_k + Vη).
    pub fn sweep(&mut self) {
        let k = self.params.k;
        let alpha = self.params.alpha;
        let eta = self.params.eta;
        let v_eta = self.vocab_size as f64 * eta;
        let mut cumulative = vec![0.0f64; k];
        for d in 0..self.docs.len() {
            let rng = &mut self.rngs[d];
            let doc_row = &mut self.doc_topic[d * k..(d + 1) * k];
            for (i, &w) in self.docs[d].iter().enumerate() {
                let w = w as usize;
                let old = self.assignments[d][i] as usize;
                doc_row[old] -= 1;
                self.word_topic[w * k + old] -= 1;
                self.topic_totals[old] -= 1;

                let word_row = &self.word_topic[w * k..(w + 1) * k];
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (doc_row[t] as f64 + alpha) * (word_row[t] as f64 + eta)
                        / (self.topic_totals[t] as f64 + v_eta);
                    cumulative[t] = acc;
                }
                let u = rng.random::<f64>() * acc;
                let new = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);

                doc_row[new] += 1;
                self.word_topic[w * k + new] += 1;
                self.topic_totals[new] += 1;
                self.assignments[d][i] = new as u32;
            }
        }
        self.sweeps += 1;
    }

    pub fn doc_topic_counts(&self, doc: usize) -> &[u32] {
        let k = self.params.k;
        &self.doc_topic[doc * k..(doc + 1) * k]
    }

    pub fn topic_word_count(&self, topic: usize, word: u32) -> u32 {
        self.word_topic[word as usize * self.params.k + topic]
    }

    /// Checks count conservation against the assignment vectors and that the
    /// implied φ and θ rows are probability vectors to 1e-9.
    pub fn check_invariants(&self) -> Result<(), String> {
        let k = self.params.k;
        let mut word_topic = vec![0u32; self.word_topic.len()];
        let mut totals = vec![0u64; k];
        for (d, (doc, z)) in self.docs.iter().zip(&self.assignments).enumerate() {
            let row = self.doc_topic_counts(d);
            let mut recount = vec![0u32; k];
            for (&w, &t) in doc.iter().zip(z) {
                recount[t as usize] += 1;
                word_topic[w as usize * k + t as usize] += 1;
                totals[t as usize] += 1;
            }
            if recount != row {
                return Err(format!("doc {d}: n_dk {row:?} disagrees with assignments {recount:?}"));
            }
            let sum: u32 = row.iter().sum();
            if sum as usize != doc.len() {
                return Err(format!("doc {d}: sum n_dk = {sum}, N_d = {}", doc.len()));
            }
            let theta = theta_from_counts(row, self.params.alpha);
            let s: f64 = theta.iter().sum();
            if (s - 1.0).abs() > 1e-9 || theta.iter().any(|&p| p < 0.0) {
                return Err(format!("doc {d}: theta sums to {s}"));
            }
        }
        if word_topic != self.word_topic {
            return Err("n_kw disagrees with assignments".into());
        }
        if totals != self.topic_totals {
            return Err(format!("n_k {:?} disagrees with assignments {totals:?}", self.topic_totals));
        }
        let grand: u64 = totals.iter().sum();
        if grand as usize != self.total_tokens() {
            return Err(format!("sum n_kv = {grand}, corpus tokens = {}", self.total_tokens()));
        }
        let model = self.snapshot();
        for t in 0..k {
            let s: f64 = model.phi_row(t).iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(format!("phi row {t} sums to {s}"));
            }
        }
        Ok(())
    }

    /// The model implied by the current state.
    pub fn snapshot(&self) -> LdaModel {
        let k = self.params.k;
        let topic_word_counts = (0..k)
            .map(|t| (0..self.vocab_size).map(|w| self.word_topic[w * k + t]).collect())
            .collect();
        LdaModel {
            format_version: FORMAT_VERSION,
            k,
            alpha: self.params.alpha,
            eta: self.params.eta,
            seed: self.params.seed,
            iterations: self.sweeps,
            vocab_size: self.vocab_size,
            vocab_digest: self.vocab_digest.clone(),
            topic_word_counts,
            topic_totals: self.topic_totals.clone(),
        }
    }
}

fn doc_rng(seed: u64, key: &SentenceKey) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::derive(seed, &key.to_string()))
}

fn theta_from_counts(counts: &[u32], alpha: f64) -> Vec<f64> {
    let n: u32 = counts.iter().sum();
    let denom = n as f64 + counts.len() as f64 * alpha;
    counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
}

/// Runs `params.iterations` sweeps and returns the final state.
pub fn train_lda(corpus: &[BowDocument], vocab: &Vocabulary, params: LdaParams) -> Result<LdaModel, LdaError> {
    let mut sampler = GibbsSampler::new(corpus, vocab, params)?;
    for _ in 0..params.iterations {
        sampler.sweep();
    }
    Ok(sampler.snapshot())
}

/// Fold-in Gibbs sampling for one document with the topic-word counts frozen.
/// Returns θ = (n_dk + α) / (N_d + Kα).
pub fn infer_topics(
    model: &LdaModel,
    doc: &BowDocument,
    fold_in_iterations: usize,
    seed: u64,
) -> Result<TopicDistribution, LdaError> {
    if doc.is_empty() {
        return Err(LdaError::NoAssignableTopic);
    }
    let k = model.k;
    if let Some(&(id, _)) = doc.counts.iter().find(|&&(id, _)| id as usize >= model.vocab_size) {
        return Err(LdaError::TokenOutOfRange {
            id,
            vocab_size: model.vocab_size,
        });
    }
    let tokens = doc.expand();
    // φ columns for this document's tokens, token-major
    let phi: Vec<f64> = tokens
        .iter()
        .flat_map(|&w| (0..k).map(move |t| model.phi(t, w)))
        .collect();
    let mut rng = doc_rng(seed, &doc.key);
    let mut z: Vec<usize> = tokens.iter().map(|_| rng.random_range(0..k)).collect();
    let mut counts = vec![0u32; k];
    z.iter().for_each(|&t| counts[t] += 1);
    let mut cumulative = vec![0.0; k];
    for _ in 0..fold_in_iterations {
        for i in 0..tokens.len() {
            counts[z[i]] -= 1;
            let mut acc = 0.0;
            for t in 0..k {
                acc += (counts[t] as f64 + model.alpha) * phi[i * k + t];
                cumulative[t] = acc;
            }
            let u = rng.random::<f64>() * acc;
            z[i] = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);
            counts[z[i]] += 1;
        }
    }
    Ok(TopicDistribution(theta_from_counts(&counts, model.alpha)))
}

/// Fold-in for many documents in parallel; empty documents map to `None`.
pub fn infer_corpus(
    model: &LdaModel,
    docs: &[BowDocument],
    fold_in_iterations: usize,
    seed: u64,
) -> Result<Vec<Option<TopicDistribution>>, LdaError> {
    docs.par_iter()
        .map(|doc| match infer_topics(model, doc, fold_in_iterations, seed) {
            Ok(theta) => Ok(Some(theta)),
            Err(LdaError::NoAssignableTopic) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}
