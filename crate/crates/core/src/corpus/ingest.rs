use super::{CorpusError, Review};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(InputFormat::Jsonl),
            "csv" => Ok(InputFormat::Csv),
            other => Err(format!("unknown input format `{other}` (expected jsonl or csv)")),
        }
    }
}

/// Well-formed reviews plus an account of the rows that were dropped.
#[derive(Debug, Clone, Default)]
pub struct ReviewSet {
    pub reviews: Vec<Review>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

impl ReviewSet {
    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    fn skip(&mut self, line: usize, reason: impl Into<String>) {
        let msg = format!("line {line}: {}", reason.into());
        log::warn!("skipping review row, {msg}");
        self.skipped += 1;
        self.warnings.push(msg);
    }

    fn accept(&mut self, seen: &mut HashSet<String>, line: usize, row: RawRow) {
        match row.validate() {
            Ok(review) => {
                if seen.insert(review.review_id.clone()) {
                    self.reviews.push(review);
                } else {
                    self.skip(line, format!("duplicate review_id `{}`", review.review_id));
                }
            }
            Err(reason) => self.skip(line, reason),
        }
    }
}

#[derive(Debug, Default)]
struct RawRow {
    review_id: Option<String>,
    hotel_id: Option<String>,
    state: Option<String>,
    rating: Option<String>,
    text: Option<String>,
}

impl RawRow {
    fn validate(self) -> Result<Review, String> {
        let review_id = self
            .review_id
            .filter(|s| !s.is_empty())
            .ok_or("missing review_id")?;
        let hotel_id = self.hotel_id.ok_or("missing hotel_id")?;
        let rating_raw = self.rating.ok_or("missing rating")?;
        let rating: i64 = rating_raw
            .trim()
            .parse()
            .map_err(|_| format!("rating `{rating_raw}` is not an integer"))?;
        if !(1..=5).contains(&rating) {
            return Err(format!("rating {rating} outside 1..=5"));
        }
        let text = self.text.ok_or("missing text")?;
        Ok(Review {
            review_id,
            hotel_id,
            state: self.state.filter(|s| !s.is_empty()),
            rating: rating as u8,
            text,
        })
    }
}

fn json_string(v: Option<&Value>) -> Option<String> {
    match v? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Loads rated reviews. Rows that violate the schema are skipped and counted;
/// only an unreadable file is fatal.
pub fn load_reviews(path: impl AsRef<Path>, format: InputFormat) -> Result<ReviewSet, CorpusError> {
    let path = path.as_ref();
    let content = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        InputFormat::Jsonl => Ok(parse_jsonl(&content)),
        InputFormat::Csv => parse_csv(&content),
    }
}

fn parse_jsonl(content: &str) -> ReviewSet {
    let mut set = ReviewSet::default();
    let mut seen = HashSet::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                set.skip(line_no, format!("invalid JSON: {e}"));
                continue;
            }
        };
        let Some(obj) = value.as_object() else {
            set.skip(line_no, "not a JSON object");
            continue;
        };
        let row = RawRow {
            review_id: json_string(obj.get("review_id")),
            hotel_id: json_string(obj.get("hotel_id")),
            state: json_string(obj.get("state")),
            rating: json_string(obj.get("rating")),
            text: obj.get("text").and_then(Value::as_str).map(str::to_owned),
        };
        set.accept(&mut seen, line_no, row);
    }
    set
}

fn parse_csv(content: &str) -> Result<ReviewSet, CorpusError> {
    let mut set = ReviewSet::default();
    if content.trim().is_empty() {
        return Ok(set);
    }
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(content.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Malformed {
            what: "CSV header",
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &'static str| {
        column(name).ok_or_else(|| CorpusError::Malformed {
            what: "CSV header",
            line: 1,
            reason: format!("missing column `{name}`"),
        })
    };
    let id_col = required("review_id")?;
    let hotel_col = required("hotel_id")?;
    let rating_col = required("rating")?;
    let text_col = required("text")?;
    let state_col = column("state");

    let mut seen = HashSet::new();
    for (i, record) in reader.records().enumerate() {
        let line_no = i + 2;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                set.skip(line_no, format!("unparseable CSV row: {e}"));
                continue;
            }
        };
        let get = |c: usize| record.get(c).map(str::to_owned);
        let row = RawRow {
            review_id: get(id_col),
            hotel_id: get(hotel_col),
            state: state_col.and_then(get),
            rating: get(rating_col),
            text: get(text_col),
        };
        set.accept(&mut seen, line_no, row);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn single_jsonl_row() {
        let f = write_tmp(r#"{"review_id":"r1","hotel_id":"h1","rating":5,"text":"Great stay."}"#);
        let set = load_reviews(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.skipped, 0);
        assert_eq!(set.reviews[0].rating, 5);
        assert_eq!(set.reviews[0].state, None);
    }

    #[test]
    fn empty_file_is_empty_set() {
        let f = write_tmp("");
        assert!(load_reviews(f.path(), InputFormat::Jsonl).unwrap().is_empty());
        assert!(load_reviews(f.path(), InputFormat::Csv).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_rating_is_skipped() {
        let f = write_tmp(concat!(
            r#"{"review_id":"r1","hotel_id":"h1","rating":7,"text":"Odd."}"#,
            "\n",
            r#"{"review_id":"r2","hotel_id":"h1","rating":4,"text":"Fine."}"#,
            "\n"
        ));
        let set = load_reviews(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.skipped, 1);
        assert_eq!(set.warnings.len(), 1);
    }

    #[test]
    fn missing_text_and_duplicates_are_skipped() {
        let f = write_tmp(concat!(
            r#"{"review_id":"r1","hotel_id":"h1","rating":3}"#,
            "\n",
            r#"{"review_id":"r2","hotel_id":"h1","rating":3,"text":"a"}"#,
            "\n",
            r#"{"review_id":"r2","hotel_id":"h1","rating":3,"text":"b"}"#,
            "\n",
            "not json\n"
        ));
        let set = load_reviews(f.path(), InputFormat::Jsonl).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.skipped, 3);
    }

    #[test]
    fn csv_with_quoting() {
        let f = write_tmp(
            "review_id,hotel_id,state,rating,text\n\
             r1,h1,Goa,5,\"Lovely pool, great staff.\"\n\
             r2,h2,,2,\"He said \"\"meh\"\".\"\n",
        );
        let set = load_reviews(f.path(), InputFormat::Csv).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.reviews[0].text, "Lovely pool, great staff.");
        assert_eq!(set.reviews[0].state.as_deref(), Some("Goa"));
        assert_eq!(set.reviews[1].state, None);
        assert_eq!(set.reviews[1].text, "He said \"meh\".");
    }

    #[test]
    fn csv_missing_column_is_fatal() {
        let f = write_tmp("review_id,hotel_id,text\nr1,h1,hi\n");
        assert!(load_reviews(f.path(), InputFormat::Csv).is_err());
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = load_reviews("/nonexistent/reviews.jsonl", InputFormat::Jsonl).unwrap_err();
        assert!(matches!(err, CorpusError::Io { .. }));
    }
}
