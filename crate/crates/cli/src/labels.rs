//! Human topic labels from a `topic_id,label` mapping file.

use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopicLabels {
    /// 1-based topic id → label.
    pub mapping: BTreeMap<usize, String>,
    pub warnings: Vec<String>,
}

/// Parses the mapping. A `topic_id,label` header is optional; blank lines
/// are ignored. Malformed rows are errors.
pub fn parse_topic_labels(content: &str) -> Result<TopicLabels, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());
    let mut out = TopicLabels::default();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| format!("topic labels: {e}"))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && rec.get(0).is_some_and(|f| f.eq_ignore_ascii_case("topic_id")) {
            continue;
        }
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(format!("topic labels line {line}: expected `topic_id,label`"));
        }
        let id: usize = rec[0]
            .parse()
            .map_err(|_| format!("topic labels line {line}: `{}` is not a topic id", &rec[0]))?;
        if rec[1].is_empty() {
            return Err(format!("topic labels line {line}: empty label"));
        }
        if out.mapping.insert(id, rec[1].to_owned()).is_some() {
            out.warnings.push(format!("topic {id} is labelled more than once; the last label wins"));
        }
    }
    Ok(out)
}

/// Labels for topics 1..=k: the mapped label where given, `Topic k`
/// otherwise. Unknown ids and duplicate labels produce warnings.
pub fn apply_labels(labels: &TopicLabels, k: usize) -> (Vec<String>, Vec<String>) {
    let mut warnings = labels.warnings.clone();
    for &id in labels.mapping.keys() {
        if id == 0 || id > k {
            warnings.push(format!("topic id {id} is outside 1..={k}; ignored"));
        }
    }
    let names: Vec<String> = (1..=k)
        .map(|t| labels.mapping.get(&t).cloned().unwrap_or_else(|| format!("Topic {t}")))
        .collect();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (t, name) in names.iter().enumerate() {
        if let Some(prev) = seen.insert(name.as_str(), t + 1) {
            warnings.push(format!("topics {prev} and {} share the label `{name}`", t + 1));
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    (names, warnings)
}
