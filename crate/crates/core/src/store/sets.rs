//! Named semantic sets and their JSON definition files.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::store::corpus::Corpus;

/// A named, non-empty list of distinct sentence ids standing for one semantic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SemanticSet {
    name: String,
    members: Vec<String>,
}

impl SemanticSet {
    pub fn new<I, S>(name: impl Into<String>, members: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Validation("set name is empty".into()));
        }
        let members: Vec<String> = members.into_iter().map(Into::into).collect();
        if members.is_empty() {
            return Err(Error::Validation(format!("set {name:?} has no members")));
        }
        let mut seen = HashSet::with_capacity(members.len());
        for m in &members {
            if !seen.insert(m.as_str()) {
                return Err(Error::Validation(format!(
                    "set {name:?} lists {m:?} more than once"
                )));
            }
        }
        Ok(SemanticSet { name, members })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.iter().any(|m| m == id)
    }
}

/// A sentence that appears in more than one set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OverlapWarning {
    pub id: String,
    pub sets: Vec<String>,
}

impl std::fmt::Display for OverlapWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "sentence {:?} belongs to sets {}", self.id, self.sets.join(", "))
    }
}

/// Sets loaded from one definition file, in file order.
#[derive(Debug, Clone, Default)]
pub struct SetCollection {
    sets: Vec<SemanticSet>,
    warnings: Vec<OverlapWarning>,
}

impl SetCollection {
    /// Builds a collection, rejecting duplicate names and computing overlap warnings.
    pub fn new(sets: Vec<SemanticSet>) -> Result<Self> {
        let mut names = HashSet::new();
        for s in &sets {
            if !names.insert(s.name()) {
                return Err(Error::Validation(format!("set {:?} defined twice", s.name())));
            }
        }
        let warnings = overlaps(&sets);
        Ok(SetCollection { sets, warnings })
    }

    pub fn sets(&self) -> &[SemanticSet] {
        &self.sets
    }

    pub fn warnings(&self) -> &[OverlapWarning] {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&SemanticSet> {
        self.sets.iter().find(|s| s.name() == name)
    }

    pub fn require(&self, name: &str) -> Result<&SemanticSet> {
        self.get(name)
            .ok_or_else(|| Error::Name(format!("no set named {name:?}")))
    }
}

fn overlaps(sets: &[SemanticSet]) -> Vec<OverlapWarning> {
    let mut owners: HashMap<&str, Vec<String>> = HashMap::new();
    let mut order = Vec::new();
    for s in sets {
        for m in s.members() {
            let entry = owners.entry(m.as_str()).or_default();
            if entry.is_empty() {
                order.push(m.as_str());
            }
            entry.push(s.name().to_owned());
        }
    }
    order
        .into_iter()
        .filter_map(|id| {
            let sets = owners.remove(id)?;
            (sets.len() > 1).then(|| OverlapWarning {
                id: id.to_owned(),
                sets,
            })
        })
        .collect()
}

pub fn load_sets(path: impl AsRef<Path>, corpus: &Corpus) -> Result<SetCollection> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_sets(&text, corpus)
}

/// Parses `{name: [id, ...], ...}` and resolves every id against `corpus`.
pub fn parse_sets(text: &str, corpus: &Corpus) -> Result<SetCollection> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let object = value.as_object().ok_or_else(|| Error::Parse {
        line: None,
        message: "set definitions must be a JSON object of name -> [id, ...]".into(),
    })?;
    let mut sets = Vec::with_capacity(object.len());
    for (name, members) in object {
        let list = members.as_array().ok_or_else(|| Error::Parse {
            line: None,
            message: format!("set {name:?} must map to an array of ids"),
        })?;
        let mut ids = Vec::with_capacity(list.len());
        for m in list {
            let id = m.as_str().ok_or_else(|| Error::Parse {
                line: None,
                message: format!("set {name:?} contains a non-string member {m}"),
            })?;
            if !corpus.contains(id) {
                return Err(Error::Validation(format!(
                    "set {name:?} references unknown sentence {id:?}"
                )));
            }
            ids.push(id.to_owned());
        }
        sets.push(SemanticSet::new(name.clone(), ids)?);
    }
    let collection = SetCollection::new(sets)?;
    for w in collection.warnings() {
        log::warn!("{w}");
    }
    Ok(collection)
}
