use serde::Serialize;
use setcse::{Corpus, RankedResult};

const TEXT_WIDTH: usize = 120;

#[derive(Serialize)]
struct Row<'a> {
    id: &'a str,
    score: f64,
    rank: usize,
    text: &'a str,
}

fn text_of<'a>(corpus: &'a Corpus, id: &str) -> &'a str {
    corpus.get(id).map_or("", |s| s.text.as_str())
}

/// First 120 characters on one line, with an ellipsis when cut.
pub fn truncate(text: &str) -> String {
    let flat: String = text
        .chars()
        .map(|c| if c.is_control() { ' ' } else { c })
        .collect();
    if flat.chars().count() <= TEXT_WIDTH {
        flat
    } else {
        let mut cut: String = flat.chars().take(TEXT_WIDTH).collect();
        cut.push('…');
        cut
    }
}

/// `id<TAB>score<TAB>text`, one line per entry.
pub fn tsv(result: &RankedResult, corpus: &Corpus) -> String {
    let mut out = String::new();
    for e in &result.entries {
        out.push_str(&format!("{}\t{:.6}\t{}\n", e.id, e.score, truncate(text_of(corpus, &e.id))));
    }
    out
}

pub fn json(result: &RankedResult, corpus: &Corpus) -> serde_json::Result<String> {
    let rows: Vec<Row<'_>> = result
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| Row {
            id: &e.id,
            score: e.score,
            rank: i + 1,
            text: text_of(corpus, &e.id),
        })
        .collect();
    serde_json::to_string_pretty(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncates_long_text() {
        let long = "x".repeat(130);
        let t = truncate(&long);
        assert_eq!(t.chars().count(), 121);
        assert!(t.ends_with('…'));
        assert_eq!(truncate("a\tb\nc"), "a b c");
        assert_eq!(truncate(&"é".repeat(120)), "é".repeat(120));
    }
}
