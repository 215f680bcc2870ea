use super::CorpusError;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");
pub const DEFAULT_LEMMAS: &str = include_str!("../../data/lemmas_en.tsv");

/// Suffix rules never produce a lemma shorter than this many characters.
const MIN_RULE_LEMMA_CHARS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
}

impl SuffixRule {
    pub fn new(suffix: &str, replacement: &str) -> Self {
        Self {
            suffix: suffix.to_owned(),
            replacement: replacement.to_owned(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    pub min_df: usize,
    pub lemmas: HashMap<String, String>,
    /// Tried in order; the first rule whose suffix matches and whose output
    /// is long enough wins.
    pub suffix_rules: Vec<SuffixRule>,
    pub lowercase: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            min_df: 5,
            lemmas: parse_lemmas(DEFAULT_LEMMAS).expect("bundled lemma dictionary parses"),
            suffix_rules: default_suffix_rules(),
            lowercase: true,
        }
    }
}

pub fn default_suffix_rules() -> Vec<SuffixRule> {
    vec![
        SuffixRule::new("sses", "ss"),
        SuffixRule::new("ies", "y"),
        SuffixRule::new("ss", "ss"),
        SuffixRule::new("us", "us"),
        SuffixRule::new("is", "is"),
        SuffixRule::new("s", ""),
    ]
}

fn data_lines(content: &str) -> impl Iterator<Item = (usize, &str)> {
    content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn parse_stopwords(content: &str) -> HashSet<String> {
    data_lines(content)
        .map(|(_, l)| l.trim().to_lowercase())
        .collect()
}

pub fn parse_lemmas(content: &str) -> Result<HashMap<String, String>, CorpusError> {
    data_lines(content)
        .map(|(line, l)| match l.split_once('\t') {
            Some((token, lemma)) if !token.trim().is_empty() && !lemma.trim().is_empty() => {
                Ok((token.trim().to_lowercase(), lemma.trim().to_lowercase()))
            }
            _ => Err(CorpusError::Malformed {
                what: "lemma dictionary",
                line,
                reason: "expected `token<TAB>lemma`".into(),
            }),
        })
        .collect()
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl PreprocessConfig {
    pub fn with_stopword_file(mut self, path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        self.stopwords = parse_stopwords(&read(path.as_ref())?);
        Ok(self)
    }

    pub fn with_lemma_file(mut self, path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        self.lemmas = parse_lemmas(&read(path.as_ref())?)?;
        Ok(self)
    }

    pub fn with_min_df(mut self, min_df: usize) -> Self {
        self.min_df = min_df.max(1);
        self
    }

    fn is_stopword(&self, token: &str) -> bool {
        if self.lowercase {
            self.stopwords.contains(token)
        } else {
            self.stopwords.contains(&token.to_lowercase())
        }
    }

    /// Dictionary first, then suffix rules, then identity. A rule output that
    /// is itself a dictionary entry is resolved through the dictionary.
    pub fn lemmatize(&self, token: &str) -> String {
        if let Some(lemma) = self.lemmas.get(token) {
            return lemma.clone();
        }
        for rule in &self.suffix_rules {
            if let Some(stem) = token.strip_suffix(rule.suffix.as_str()) {
                let candidate = format!("{stem}{}", rule.replacement);
                if candidate.chars().count() >= MIN_RULE_LEMMA_CHARS {
                    return self.lemmas.get(&candidate).cloned().unwrap_or(candidate);
                }
            }
        }
        token.to_owned()
    }
}

fn raw_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\'' || c == '\u{2019}'))
        .map(|t| t.chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|t| !t.is_empty())
}

/// Normalizes one sentence into content tokens: case folding, punctuation
/// removal, dropping any token that contains a digit, stopword removal and
/// lemmatization.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    raw_tokens(text)
        .filter(|t| !t.chars().any(char::is_numeric))
        .map(|t| if config.lowercase { t.to_lowercase() } else { t })
        .filter(|t| !config.is_stopword(t))
        .map(|t| config.lemmatize(&t))
        .filter(|t| !t.is_empty() && !config.is_stopword(t))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn example_sentence() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess("The rooms were beautiful!", &cfg), vec!["room", "beautiful"]);
    }

    #[test]
    fn single_suffix_rule_matches_hand_derivation() {
        let cfg = PreprocessConfig {
            lemmas: HashMap::new(),
            suffix_rules: vec![SuffixRule::new("s", "")],
            ..PreprocessConfig::default()
        };
        assert_eq!(preprocess("The rooms were beautiful!", &cfg), vec!["room", "beautiful"]);
    }

    #[test]
    fn numbers_are_removed() {
        let cfg = PreprocessConfig::default();
        assert!(preprocess("5 5 5", &cfg).is_empty());
        assert!(preprocess("our 2nd visit, 3.5 stars", &cfg)
            .iter()
            .all(|t| t != "2nd" && t != "3" && t != "5"));
    }

    #[test]
    fn case_folding() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess("Staff staff STAFF", &cfg), vec!["staff", "staff", "staff"]);
    }

    #[test]
    fn emoji_only_yields_nothing() {
        assert!(preprocess("👍👍", &PreprocessConfig::default()).is_empty());
    }

    #[test]
    fn apostrophes_are_folded() {
        let cfg = PreprocessConfig::default();
        assert_eq!(preprocess("Didn't like the chef's soup", &cfg), vec!["like", "chef", "soup"]);
    }

    #[test]
    fn rules_respect_order_and_length_guard() {
        let cfg = PreprocessConfig::default();
        assert_eq!(cfg.lemmatize("glasses"), "glass");
        assert_eq!(cfg.lemmatize("glass"), "glass");
        assert_eq!(cfg.lemmatize("bodies"), "body");
        assert_eq!(cfg.lemmatize("ties"), "tie");
        assert_eq!(cfg.lemmatize("childrens"), "child");
    }

    #[test]
    fn bundled_lemmas_are_fixpoints() {
        let cfg = PreprocessConfig::default();
        for lemma in cfg.lemmas.values() {
            assert_eq!(&cfg.lemmatize(lemma), lemma, "lemma `{lemma}` is not stable");
            assert!(!cfg.stopwords.contains(lemma));
        }
    }

    #[test]
    fn malformed_lemma_line() {
        assert!(parse_lemmas("good\n").is_err());
        assert_eq!(parse_lemmas("# c\nmice\tmouse\n").unwrap()["mice"], "mouse");
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(
            words in proptest::collection::vec("[a-zA-Z]{1,10}|[0-9]{1,3}|rooms|children|the|best|glasses", 0..12),
            sep in "[ ,.!?]{1,2}"
        ) {
            let cfg = PreprocessConfig::default();
            let once = preprocess(&words.join(&sep), &cfg);
            let twice = preprocess(&once.join(" "), &cfg);
            prop_assert_eq!(once, twice);
        }
    }
}
