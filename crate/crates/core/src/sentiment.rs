//! Sentence sentiment: pluggable providers and the signed log-odds score.
//!
//! A provider returns the predicted label together with the probability of
//! that label, so `p` is always at least one half. The score is the logit of
//! `p` (clamped below one), negated for negative predictions.

use crate::corpus::{Sentence, SentenceKey};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_LEXICON: &str = include_str!("../data/lexicon_en.tsv");

#[derive(Debug, thiserror::Error)]
pub enum SentimentError {
    #[error("probability {0} outside [0.5, 1]")]
    Probability(f64),
    #[error("clamp epsilon {0} outside (0, 0.5)")]
    Epsilon(f64),
    #[error("no sentiment for sentence {0}")]
    NoSentiment(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{what} line {line}: {reason}")]
    Malformed {
        what: &'static str,
        line: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SentimentLabel {
    Positive,
    Negative,
}

impl SentimentLabel {
    pub fn flipped(self) -> Self {
        match self {
            SentimentLabel::Positive => SentimentLabel::Negative,
            SentimentLabel::Negative => SentimentLabel::Positive,
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Positive => "POSITIVE",
            SentimentLabel::Negative => "NEGATIVE",
        })
    }
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "POSITIVE" | "POS" => Ok(SentimentLabel::Positive),
            "NEGATIVE" | "NEG" => Ok(SentimentLabel::Negative),
            other => Err(format!("unknown sentiment label `{other}`")),
        }
    }
}

/// Predicted label and the probability of that label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentPrediction {
    pub label: SentimentLabel,
    pub p: f64,
}

impl SentimentPrediction {
    pub fn new(label: SentimentLabel, p: f64) -> Result<Self, SentimentError> {
        if !(0.5..=1.0).contains(&p) {
            return Err(SentimentError::Probability(p));
        }
        Ok(Self { label, p })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub key: SentenceKey,
    pub value: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Largest score magnitude for a clamp of `epsilon`.
pub fn score_ceiling(epsilon: f64) -> f64 {
    ((1.0 - epsilon) / epsilon).ln()
}

/// Signed log-odds of a prediction: `±ln(p'/(1−p'))` with `p' = min(p, 1−ε)`.
pub fn logit_score(pred: &SentimentPrediction, epsilon: f64) -> Result<f64, SentimentError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(SentimentError::Epsilon(epsilon));
    }
    if !(0.5..=1.0).contains(&pred.p) {
        return Err(SentimentError::Probability(pred.p));
    }
    let p = pred.p.min(1.0 - epsilon);
    // 1 − (1 − ε) is not exactly ε in floating point
    let magnitude = (p / (1.0 - p)).ln().min(score_ceiling(epsilon));
    Ok(match pred.label {
        SentimentLabel::Positive => magnitude,
        SentimentLabel::Negative => -magnitude,
    })
}

/// Token polarity weights plus a bias, squashed through a logistic.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    pub weights: HashMap<String, f64>,
    pub bias: f64,
    pub version: Option<String>,
}

impl Lexicon {
    pub fn parse(content: &str) -> Result<Self, SentimentError> {
        let mut lex = Lexicon::default();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    lex.version = Some(v.trim().to_owned());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: String| SentimentError::Malformed {
                what: "lexicon",
                line: i + 1,
                reason,
            };
            let mut parts = line.split('\t');
            let (Some(token), Some(weight), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(malformed("expected `token<TAB>weight`".into()));
            };
            let weight: f64 = weight
                .trim()
                .parse()
                .map_err(|_| malformed(format!("weight `{weight}` is not a number")))?;
            if !weight.is_finite() {
                return Err(malformed("non-finite weight".into()));
            }
            lex.weights.insert(token.trim().to_owned(), weight);
        }
        Ok(lex)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, SentimentError> {
        let path = path.as_ref();
        let content = std::fs::read_to_string(path).map_err(|source| SentimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content)
    }

    pub fn builtin() -> Self {
        Self::parse(DEFAULT_LEXICON).expect("bundled lexicon parses")
    }

    pub fn with_bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }
}

/// `σ(bias + Σ weights)`, reported as the more likely label and its probability.
pub fn lexicon_predict<S: AsRef<str>>(
    tokens: &[S],
    weights: &HashMap<String, f64>,
    bias: f64,
) -> Result<SentimentPrediction, SentimentError> {
    if tokens.is_empty() {
        return Err(SentimentError::NoSentiment("empty token list".into()));
    }
    let s = bias
        + tokens
            .iter()
            .filter_map(|t| weights.get(t.as_ref()))
            .sum::<f64>();
    let p_pos = sigmoid(s);
    Ok(if p_pos >= 0.5 {
        SentimentPrediction { label: SentimentLabel::Positive, p: p_pos }
    } else {
        SentimentPrediction { label: SentimentLabel::Negative, p: 1.0 - p_pos }
    })
}

/// Maps a sentence to a prediction. Implementations are deterministic and
/// stateless once constructed.
pub trait SentimentProvider: Send + Sync {
    fn name(&self) -> &str;
    fn predict(&self, sentence: &Sentence) -> Result<SentimentPrediction, SentimentError>;
}

pub struct LexiconProvider {
    lexicon: Lexicon,
}

impl LexiconProvider {
    pub fn new(lexicon: Lexicon) -> Self {
        Self { lexicon }
    }
}

impl SentimentProvider for LexiconProvider {
    fn name(&self) -> &str {
        "lexicon"
    }

    fn predict(&self, sentence: &Sentence) -> Result<SentimentPrediction, SentimentError> {
        lexicon_predict(&sentence.tokens, &self.lexicon.weights, self.lexicon.bias)
            .map_err(|_| SentimentError::NoSentiment(sentence.key().to_string()))
    }
}

/// Predictions read from a sidecar file produced by an external classifier.
#[derive(Debug, Clone, Default)]
pub struct ExternalScores {
    pub predictions: HashMap<SentenceKey, SentimentPrediction>,
    pub rejected: usize,
    pub warnings: Vec<String>,
}

impl ExternalScores {
    /// Keys in the sidecar that match none of `sentences`.
    pub fn unknown_keys(&self, sentences: &[Sentence]) -> Vec<SentenceKey> {
        let known: std::collections::HashSet<SentenceKey> = sentences.iter().map(Sentence::key).collect();
        let mut unknown: Vec<SentenceKey> = self
            .predictions
            .keys()
            .filter(|k| !known.contains(*k))
            .cloned()
            .collect();
        unknown.sort();
        unknown
    }
}

impl SentimentProvider for ExternalScores {
    fn name(&self) -> &str {
        "external"
    }

    fn predict(&self, sentence: &Sentence) -> Result<SentimentPrediction, SentimentError> {
        let key = sentence.key();
        self.predictions
            .get(&key)
            .copied()
            .ok_or_else(|| SentimentError::NoSentiment(key.to_string()))
    }
}

/// Reads `review_id,sentence_index,label,p` rows (header optional).
///
/// A row with `p` outside (0,1) is rejected with a warning. A row with
/// `p < 0.5` is read as the opposite label with probability `1 − p`.
/// A row that cannot be parsed at all is fatal.
pub fn load_external_scores(path: impl AsRef<Path>) -> Result<ExternalScores, SentimentError> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|source| SentimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_external_scores(&content)
}

pub fn parse_external_scores(content: &str) -> Result<ExternalScores, SentimentError> {
    let mut out = ExternalScores::default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let malformed = |reason: String| SentimentError::Malformed {
            what: "sentiment sidecar",
            line,
            reason,
        };
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 1 && record.get(0) == Some("review_id") {
            continue;
        }
        if record.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", record.len())));
        }
        let index: usize = record[1]
            .parse()
            .map_err(|_| malformed(format!("sentence_index `{}` is not a non-negative integer", &record[1])))?;
        let label: SentimentLabel = record[2].parse().map_err(malformed)?;
        let p: f64 = record[3]
            .parse()
            .map_err(|_| malformed(format!("p `{}` is not a number", &record[3])))?;
        if !(p > 0.0 && p < 1.0) {
            let msg = format!("line {line}: p={p} outside (0,1), row rejected");
            log::warn!("{msg}");
            out.warnings.push(msg);
            out.rejected += 1;
            continue;
        }
        let pred = if p >= 0.5 {
            SentimentPrediction { label, p }
        } else {
            SentimentPrediction { label: label.flipped(), p: 1.0 - p }
        };
        let key = SentenceKey::new(&record[0], index);
        if out.predictions.insert(key.clone(), pred).is_some() {
            let msg = format!("line {line}: duplicate key {key}, last row wins");
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
    }
    Ok(out)
}

/// Scores every sentence in parallel; `None` where the provider had no
/// prediction. Output order follows `sentences`.
pub fn score_sentences(
    provider: &dyn SentimentProvider,
    sentences: &[Sentence],
    epsilon: f64,
) -> Result<Vec<Option<SentimentScore>>, SentimentError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(SentimentError::Epsilon(epsilon));
    }
    sentences
        .par_iter()
        .map(|s| match provider.predict(s) {
            Ok(pred) => Ok(Some(SentimentScore {
                key: s.key(),
                value: logit_score(&pred, epsilon)?,
            })),
            Err(SentimentError::NoSentiment(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pred(label: SentimentLabel, p: f64) -> SentimentPrediction {
        SentimentPrediction::new(label, p).unwrap()
    }

    #[test]
    fn worked_examples() {
        use SentimentLabel::*;
        assert_eq!(logit_score(&pred(Positive, 0.5), DEFAULT_EPSILON).unwrap(), 0.0);
        let neg = logit_score(&pred(Negative, 0.88), DEFAULT_EPSILON).unwrap();
        assert!((neg - (-1.99243)).abs() < 1e-5, "{neg}");
        let ceil = logit_score(&pred(Positive, 1.0), 1e-4).unwrap();
        assert!((ceil - 9.21024).abs() < 1e-5, "{ceil}");
        assert_eq!(ceil, score_ceiling(1e-4));
    }

    #[test]
    fn contract_violations() {
        assert!(SentimentPrediction::new(SentimentLabel::Positive, 0.4).is_err());
        let bad = SentimentPrediction { label: SentimentLabel::Positive, p: 0.3 };
        assert!(matches!(logit_score(&bad, 1e-4), Err(SentimentError::Probability(_))));
        let ok = pred(SentimentLabel::Positive, 0.7);
        assert!(logit_score(&ok, 0.0).is_err());
        assert!(logit_score(&ok, 0.5).is_err());
    }

    #[test]
    fn round_trip_grid() {
        let eps = DEFAULT_EPSILON;
        for i in 0..1000 {
            let p = 0.5 + (0.5 - eps) * i as f64 / 999.0;
            let v = logit_score(&pred(SentimentLabel::Negative, p), eps).unwrap();
            assert!((sigmoid(v.abs()) - p).abs() <= 1e-12, "p={p}");
        }
    }

    #[test]
    fn lexicon_examples() {
        let mut w = HashMap::new();
        w.insert("great".to_string(), 2.0);
        w.insert("awful".to_string(), -2.0);
        let neutral = lexicon_predict(&["room"], &w, 0.0).unwrap();
        assert_eq!(neutral, SentimentPrediction { label: SentimentLabel::Positive, p: 0.5 });
        let pos = lexicon_predict(&["great"], &w, 0.0).unwrap();
        assert_eq!(pos.label, SentimentLabel::Positive);
        assert!((pos.p - 0.88080).abs() < 1e-5);
        let neg = lexicon_predict(&["awful"], &w, 0.0).unwrap();
        assert_eq!(neg.label, SentimentLabel::Negative);
        assert!((neg.p - pos.p).abs() < 1e-15);
        assert!(lexicon_predict::<&str>(&[], &w, 0.0).is_err());
    }

    #[test]
    fn builtin_lexicon_loads() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.version.as_deref(), Some("1"));
        assert!(lex.weights["excellent"] > 0.0);
        assert!(lex.weights["dirty"] < 0.0);
    }

    #[test]
    fn sidecar_parsing() {
        let s = parse_external_scores("review_id,sentence_index,label,p\nr1,0,POSITIVE,0.997\nr1,1,NEGATIVE,1.5\nr2,0,POSITIVE,0.2\n").unwrap();
        assert_eq!(s.predictions.len(), 2);
        assert_eq!(s.rejected, 1);
        assert_eq!(
            s.predictions[&SentenceKey::new("r1", 0)],
            SentimentPrediction { label: SentimentLabel::Positive, p: 0.997 }
        );
        let flipped = s.predictions[&SentenceKey::new("r2", 0)];
        assert_eq!(flipped.label, SentimentLabel::Negative);
        assert!((flipped.p - 0.8).abs() < 1e-15);
        assert!(parse_external_scores("").unwrap().predictions.is_empty());
        assert!(parse_external_scores("r1,zero,POSITIVE,0.9\n").is_err());
        assert!(parse_external_scores("r1,0,MAYBE,0.9\n").is_err());
        assert!(parse_external_scores("r1,0,POSITIVE\n").is_err());
    }

    #[test]
    fn unknown_sidecar_keys_are_reported() {
        let s = parse_external_scores("r1,0,POSITIVE,0.9\nr9,3,NEGATIVE,0.9\n").unwrap();
        let sentence = Sentence {
            review_id: "r1".into(),
            index: 0,
            raw: "Good.".into(),
            delimiter: String::new(),
            tokens: vec!["good".into()],
        };
        assert_eq!(s.unknown_keys(&[sentence]), vec![SentenceKey::new("r9", 3)]);
    }

    #[test]
    fn scoring_keeps_order_and_gaps() {
        let mk = |i: usize, toks: &[&str]| Sentence {
            review_id: "r".into(),
            index: i,
            raw: String::new(),
            delimiter: String::new(),
            tokens: toks.iter().map(|t| t.to_string()).collect(),
        };
        let provider = LexiconProvider::new(Lexicon::builtin());
        let sentences = vec![mk(0, &["excellent"]), mk(1, &[]), mk(2, &["dirty"])];
        let scores = score_sentences(&provider, &sentences, DEFAULT_EPSILON).unwrap();
        assert!(scores[0].as_ref().unwrap().value > 0.0);
        assert!(scores[1].is_none());
        assert!(scores[2].as_ref().unwrap().value < 0.0);
        assert_eq!(scores[2].as_ref().unwrap().key, SentenceKey::new("r", 2));
    }

    proptest! {
        #[test]
        fn antisymmetric(p in 0.5f64..=1.0) {
            let a = logit_score(&pred(SentimentLabel::Positive, p), DEFAULT_EPSILON).unwrap();
            let b = logit_score(&pred(SentimentLabel::Negative, p), DEFAULT_EPSILON).unwrap();
            prop_assert_eq!(a, -b);
        }

        #[test]
        fn monotone_below_clamp(p1 in 0.5f64..0.9999, p2 in 0.5f64..0.9999) {
            prop_assume!(p1 < p2);
            let a = logit_score(&pred(SentimentLabel::Positive, p1), DEFAULT_EPSILON).unwrap();
            let b = logit_score(&pred(SentimentLabel::Positive, p2), DEFAULT_EPSILON).unwrap();
            prop_assert!(a.abs() < b.abs());
        }

        #[test]
        fn never_exceeds_ceiling(p in 0.5f64..=1.0, eps in 1e-9f64..0.49) {
            let v = logit_score(&pred(SentimentLabel::Negative, p), eps).unwrap();
            prop_assert!(v.abs() <= score_ceiling(eps));
        }

        #[test]
        fn lexicon_negation_flips_label(ws in proptest::collection::vec(-5.0f64..5.0, 1..8)) {
            prop_assume!(ws.iter().sum::<f64>().abs() > 1e-9);
            let tokens: Vec<String> = (0..ws.len()).map(|i| format!("t{i}")).collect();
            let pos: HashMap<String, f64> = tokens.iter().cloned().zip(ws.iter().copied()).collect();
            let neg: HashMap<String, f64> = tokens.iter().cloned().zip(ws.iter().map(|w| -w)).collect();
            let a = lexicon_predict(&tokens, &pos, 0.0).unwrap();
            let b = lexicon_predict(&tokens, &neg, 0.0).unwrap();
            prop_assert_eq!(a.label, b.label.flipped());
            prop_assert!((a.p - b.p).abs() < 1e-12);
        }
    }
}
