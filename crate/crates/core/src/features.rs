//! Per-review aspect-sentiment vectors, rating label schemes and the design
//! matrix handed to the classifiers.

use crate::corpus::{ratings_by_rank, RATING_SHARES};
use crate::models::Dataset;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("rating {0} outside 1..=5")]
    Rating(u8),
    #[error("topic {topic} outside 0..{k}")]
    Topic { topic: usize, k: usize },
    #[error("vector for review `{review_id}` has {found} topics, expected {expected}")]
    MixedK {
        review_id: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("writing features: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Sum,
    Mean,
    Max,
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregation::Sum),
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            other => Err(format!("unknown aggregation `{other}` (expected sum, mean or max)")),
        }
    }
}

/// One sentence's contribution: its dominant topic and signed sentiment,
/// either of which may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SentenceRecord {
    pub topic: Option<usize>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AspectVector {
    pub review_id: String,
    pub scores: Vec<f64>,
    pub rating: u8,
}

/// Combines the sentiment of all sentences per topic. Topics with no
/// contributing sentence get 0. Values are combined in sorted order so the
/// result does not depend on sentence order.
pub fn assemble(
    review_id: &str,
    records: &[SentenceRecord],
    rating: u8,
    k: usize,
    aggregation: Aggregation,
) -> Result<AspectVector, FeatureError> {
    if !(1..=5).contains(&rating) {
        return Err(FeatureError::Rating(rating));
    }
    let mut per_topic: Vec<Vec<f64>> = vec![Vec::new(); k];
    for r in records {
        if let (Some(topic), Some(score)) = (r.topic, r.score) {
            if topic >= k {
                return Err(FeatureError::Topic { topic, k });
            }
            per_topic[topic].push(score);
        } else if let Some(topic) = r.topic.filter(|&t| t >= k) {
            return Err(FeatureError::Topic { topic, k });
        }
    }
    let scores = per_topic
        .into_iter()
        .map(|mut values| {
            if values.is_empty() {
                return 0.0;
            }
            values.sort_by(f64::total_cmp);
            match aggregation {
                Aggregation::Sum => values.iter().sum(),
                Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
                Aggregation::Max => *values.last().expect("non-empty"),
            }
        })
        .collect();
    Ok(AspectVector {
        review_id: review_id.to_owned(),
        scores,
        rating,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelScheme {
    FiveClass,
    ThreeClass,
}

impl LabelScheme {
    pub fn n_classes(self) -> usize {
        match self {
            LabelScheme::FiveClass => 5,
            LabelScheme::ThreeClass => 3,
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            LabelScheme::FiveClass => (1..=5).map(|r| r.to_string()).collect(),
            LabelScheme::ThreeClass => ["Negative", "Neutral", "Positive"].map(String::from).to_vec(),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::FiveClass => "five_class",
            LabelScheme::ThreeClass => "three_class",
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "five_class" | "fiveclass" | "5" => Ok(LabelScheme::FiveClass),
            "three_class" | "threeclass" | "3" => Ok(LabelScheme::ThreeClass),
            other => Err(format!("unknown label scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RatingClass {
    Stars(u8),
    Negative,
    Neutral,
    Positive,
}

impl RatingClass {
    /// Column index of this class under its scheme.
    pub fn index(self) -> usize {
        match self {
            RatingClass::Stars(r) => r as usize - 1,
            RatingClass::Negative => 0,
            RatingClass::Neutral => 1,
            RatingClass::Positive => 2,
        }
    }
}

impl fmt::Display for RatingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatingClass::Stars(r) => write!(f, "{r}"),
            RatingClass::Negative => f.write_str("Negative"),
            RatingClass::Neutral => f.write_str("Neutral"),
            RatingClass::Positive => f.write_str("Positive"),
        }
    }
}

pub fn collapse_labels(rating: u8, scheme: LabelScheme) -> Result<RatingClass, FeatureError> {
    match (rating, scheme) {
        (1..=5, LabelScheme::FiveClass) => Ok(RatingClass::Stars(rating)),
        (1 | 2, LabelScheme::ThreeClass) => Ok(RatingClass::Negative),
        (3, LabelScheme::ThreeClass) => Ok(RatingClass::Neutral),
        (4 | 5, LabelScheme::ThreeClass) => Ok(RatingClass::Positive),
        _ => Err(FeatureError::Rating(rating)),
    }
}

/// Applies a scheme to an already classified value. Three-class values are
/// fixed points of `ThreeClass` and have no five-class preimage.
pub fn collapse_class(class: RatingClass, scheme: LabelScheme) -> Result<RatingClass, FeatureError> {
    match (class, scheme) {
        (RatingClass::Stars(r), s) => collapse_labels(r, s),
        (c, LabelScheme::ThreeClass) => Ok(c),
        (c, LabelScheme::FiveClass) => Err(FeatureError::Invalid(format!(
            "class {c} cannot be expanded to five classes"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub rating_counts: [usize; 5],
    pub rating_shares: [f64; 5],
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub class_shares: Vec<f64>,
}

impl ClassSummary {
    fn compute(ratings: &[u8], labels: &[usize], scheme: LabelScheme) -> Self {
        let n = ratings.len().max(1) as f64;
        let mut rating_counts = [0usize; 5];
        for &r in ratings {
            rating_counts[r as usize - 1] += 1;
        }
        let mut class_counts = vec![0usize; scheme.n_classes()];
        for &c in labels {
            class_counts[c] += 1;
        }
        Self {
            rating_counts,
            rating_shares: rating_counts.map(|c| c as f64 / n),
            class_names: scheme.class_names(),
            class_shares: class_counts.iter().map(|&c| c as f64 / n).collect(),
            class_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    pub review_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Row-major, one row per review.
    pub rows: Vec<Vec<f64>>,
    pub ratings: Vec<u8>,
    pub labels: Vec<usize>,
    pub scheme: LabelScheme,
    pub summary: ClassSummary,
}

pub fn default_feature_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("Topic {i}")).collect()
}

/// Stacks vectors in input order. `feature_names` defaults to "Topic k".
pub fn build_matrix(
    vectors: &[AspectVector],
    scheme: LabelScheme,
    feature_names: Option<Vec<String>>,
) -> Result<DesignMatrix, FeatureError> {
    let k = vectors.first().map_or(0, |v| v.scores.len());
    if let Some(bad) = vectors.iter().find(|v| v.scores.len() != k) {
        return Err(FeatureError::MixedK {
            review_id: bad.review_id.clone(),
            expected: k,
            found: bad.scores.len(),
        });
    }
    let feature_names = feature_names.unwrap_or_else(|| default_feature_names(k));
    if feature_names.len() != k {
        return Err(FeatureError::Invalid(format!(
            "{} feature names for {k} topics",
            feature_names.len()
        )));
    }
    let labels = vectors
        .iter()
        .map(|v| collapse_labels(v.rating, scheme).map(RatingClass::index))
        .collect::<Result<Vec<_>, _>>()?;
    let ratings: Vec<u8> = vectors.iter().map(|v| v.rating).collect();
    Ok(DesignMatrix {
        review_ids: vectors.iter().map(|v| v.review_id.clone()).collect(),
        feature_names,
        rows: vectors.iter().map(|v| v.scores.clone()).collect(),
        summary: ClassSummary::compute(&ratings, &labels, scheme),
        ratings,
        labels,
        scheme,
    })
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Columns of the serialized table: id, one per topic, rating, and the
    /// collapsed class under `ThreeClass`.
    pub fn n_columns(&self) -> usize {
        self.n_features()
            + 2
            + match self.scheme {
                LabelScheme::ThreeClass => 1,
                LabelScheme::FiveClass => 0,
            }
    }

    /// Same rows and features under a different label scheme.
    pub fn relabel(&self, scheme: LabelScheme) -> DesignMatrix {
        let labels: Vec<usize> = self
            .ratings
            .iter()
            .map(|&r| collapse_labels(r, scheme).expect("validated rating").index())
            .collect();
        DesignMatrix {
            summary: ClassSummary::compute(&self.ratings, &labels, scheme),
            labels,
            scheme,
            ..self.clone()
        }
    }

    pub fn dataset(&self) -> Dataset {
        Dataset {
            rows: self.rows.clone(),
            labels: self.labels.clone(),
            n_classes: self.scheme.n_classes(),
            feature_names: self.feature_names.clone(),
            class_names: self.scheme.class_names(),
        }
    }

    /// `review_id,topic_1..topic_K,rating[,class]`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let io = |e: csv::Error| FeatureError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["review_id".to_owned()];
        header.extend((1..=self.n_features()).map(|i| format!("topic_{i}")));
        header.push("rating".into());
        let three = self.scheme == LabelScheme::ThreeClass;
        if three {
            header.push("class".into());
        }
        w.write_record(&header).map_err(io)?;
        let names = self.scheme.class_names();
        for i in 0..self.n_rows() {
            let mut rec = vec![self.review_ids[i].clone()];
            rec.extend(self.rows[i].iter().map(|v| format!("{v:.6}")));
            rec.push(self.ratings[i].to_string());
            if three {
                rec.push(names[self.labels[i]].clone());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| FeatureError::Io(e.to_string()))
    }

    /// `class,count,share` followed by the raw star distribution.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), FeatureError> {
        let io = |e: csv::Error| FeatureError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "class", "count", "share"]).map_err(io)?;
        let s = &self.summary;
        for (i, name) in s.class_names.iter().enumerate() {
            w.write_record([
                self.scheme.as_str(),
                name,
                &s.class_counts[i].to_string(),
                &format!("{:.6}", s.class_shares[i]),
            ])
            .map_err(io)?;
        }
        for r in 0..5 {
            w.write_record([
                "stars",
                &(r + 1).to_string(),
                &s.rating_counts[r].to_string(),
                &format!("{:.6}", s.rating_shares[r]),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| FeatureError::Io(e.to_string()))
    }
}

/// Three classes laid out on a 3×3 checkerboard: class = (⌊x₁⌋ + ⌊x₂⌋) mod 3
/// for x uniform on [0,3)², plus `n_noise_features` uninformative columns
/// and a `label_noise` fraction of uniformly relabelled rows. Classes are
/// stored as ratings 1, 3 and 5 so the `ThreeClass` scheme recovers them.
pub fn xor_design(n: usize, n_noise_features: usize, label_noise: f64, seed: u64) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors: Vec<AspectVector> = (0..n)
        .map(|i| {
            let x1: f64 = rng.random_range(0.0..3.0);
            let x2: f64 = rng.random_range(0.0..3.0);
            let mut class = (x1.floor() as usize + x2.floor() as usize) % 3;
            if rng.random_bool(label_noise) {
                class = rng.random_range(0..3);
            }
            let mut scores = vec![x1, x2];
            scores.extend((0..n_noise_features).map(|_| rng.random_range(0.0..3.0)));
            AspectVector {
                review_id: format!("x{i:05}"),
                scores,
                rating: [1, 3, 5][class],
            }
        })
        .collect();
    build_matrix(&vectors, LabelScheme::ThreeClass, None).expect("uniform K and valid ratings")
}

/// Seven aspect-sentiment columns driven by a latent review quality, with
/// stars assigned by rank of a noisy copy of that quality so the star
/// distribution follows [`RATING_SHARES`]. Adjacent stars are hard to tell
/// apart; the three coarse classes are not.
pub fn ordinal_design(n: usize, seed: u64) -> DesignMatrix {
    const WEIGHTS: [f64; 7] = [0.6, 0.8, 1.0, 1.2, 0.5, 0.4, 0.9];
    const PRESENCE: [f64; 7] = [0.45, 0.5, 0.7, 0.65, 0.3, 0.55, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid sd");
    let mut vectors = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for i in 0..n {
        let quality: f64 = unit.sample(&mut rng);
        let scores: Vec<f64> = WEIGHTS
            .iter()
            .zip(PRESENCE)
            .map(|(&w, presence)| {
                if rng.random_bool(presence) {
                    let s: f64 = 1.5 + 2.5 * w * quality + 1.5 * unit.sample(&mut rng);
                    s.clamp(-9.2, 9.2)
                } else {
                    0.0
                }
            })
            .collect();
        latent.push(quality + 0.45 * unit.sample(&mut rng));
        vectors.push(AspectVector {
            review_id: format!("o{i:05}"),
            scores,
            rating: 5,
        });
    }
    for (v, r) in vectors.iter_mut().zip(ratings_by_rank(&latent, &RATING_SHARES)) {
        v.rating = r;
    }
    build_matrix(&vectors, LabelScheme::FiveClass, None).expect("uniform K and valid ratings")
}
