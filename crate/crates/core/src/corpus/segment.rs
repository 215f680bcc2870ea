use super::{Review, Sentence};

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits review text after `.`, `!` or `?` when followed by whitespace or
/// end of text. No abbreviation handling.
///
/// The split is lossless: each sentence keeps the whitespace that followed it
/// in `delimiter`, and any leading whitespace of the text stays at the front of
/// the first sentence. Whitespace-only text yields no sentences.
pub fn segment_sentences(review: &Review) -> Vec<Sentence> {
    let text = review.text.as_str();
    if text.trim().is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut push = |raw: &str, delimiter: &str| {
        out.push(Sentence {
            review_id: review.review_id.clone(),
            index: out.len(),
            raw: raw.to_owned(),
            delimiter: delimiter.to_owned(),
            tokens: Vec::new(),
        });
    };

    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminal(c) {
            continue;
        }
        let end = i + c.len_utf8();
        match chars.peek() {
            None => {
                push(&text[start..end], "");
                start = end;
            }
            Some(&(_, next)) if next.is_whitespace() => {
                let mut delim_end = end;
                while let Some(&(j, w)) = chars.peek() {
                    if !w.is_whitespace() {
                        break;
                    }
                    delim_end = j + w.len_utf8();
                    chars.next();
                }
                push(&text[start..end], &text[end..delim_end]);
                start = delim_end;
            }
            _ => {}
        }
    }
    if start < text.len() {
        let rest = &text[start..];
        let body = rest.trim_end();
        push(body, &rest[body.len()..]);
    }
    out
}

/// Inverse of [`segment_sentences`].
pub fn join_sentences(sentences: &[Sentence]) -> String {
    sentences
        .iter()
        .flat_map(|s| [s.raw.as_str(), s.delimiter.as_str()])
        .collect()
}
