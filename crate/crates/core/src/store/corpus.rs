//! JSONL corpus loading.
//!
//! One JSON object per line with `id`, `text` and an optional `label`, which
//! may be a single string or a list of strings for multi-label data.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    #[serde(
        rename = "label",
        default,
        deserialize_with = "de_labels",
        skip_serializing_if = "Vec::is_empty"
    )]
    pub labels: Vec<String>,
}

impl Sentence {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Sentence {
            id: id.into(),
            text: text.into(),
            labels: Vec::new(),
        }
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelField {
    One(String),
    Many(Vec<String>),
}

fn de_labels<'de, D>(deserializer: D) -> std::result::Result<Vec<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    Ok(match Option::<LabelField>::deserialize(deserializer)? {
        None => Vec::new(),
        Some(LabelField::One(l)) => vec![l],
        Some(LabelField::Many(ls)) => ls,
    })
}

/// Checks the id rules shared by every artifact that names sentences.
pub(crate) fn validate_id(id: &str) -> std::result::Result<(), String> {
    if id.is_empty() {
        return Err("sentence id is empty".into());
    }
    if id.chars().any(char::is_control) {
        return Err(format!("sentence id {id:?} contains a control character"));
    }
    Ok(())
}

/// An ordered, id-indexed list of sentences.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Result<Self> {
        let mut index = HashMap::with_capacity(sentences.len());
        for (pos, s) in sentences.iter().enumerate() {
            validate_id(&s.id).map_err(Error::Validation)?;
            if index.insert(s.id.clone(), pos).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate sentence id {:?} at position {}",
                    s.id,
                    pos + 1
                )));
            }
        }
        Ok(Corpus { sentences, index })
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    pub fn get(&self, id: &str) -> Option<&Sentence> {
        self.index.get(id).map(|&i| &self.sentences[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Renders the corpus in the JSONL load format.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&serde_json::to_string(s).expect("sentence serializes"));
            out.push('\n');
        }
        out
    }
}

/// Reads a JSONL corpus. Blank lines are skipped; line numbers in errors are
/// 1-based and count blank lines.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus> {
    let mut sentences = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let sentence: Sentence = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: Some(line_no),
            message: e.to_string(),
        })?;
        validate_id(&sentence.id).map_err(|m| Error::Validation(format!("line {line_no}: {m}")))?;
        if let Some(first) = seen.insert(sentence.id.clone(), line_no) {
            return Err(Error::Validation(format!(
                "duplicate sentence id {:?} at line {line_no} (first seen at line {first})",
                sentence.id
            )));
        }
        sentences.push(sentence);
    }
    Corpus::new(sentences)
}
