use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{Corpus, SemanticSet};

/// Labeled sentences in corpus order; unlabeled sentences are left out.
#[derive(Debug, Clone)]
pub struct LabeledCorpus {
    ids: Vec<String>,
    labels: Vec<Vec<String>>,
    classes: Vec<String>,
}

impl LabeledCorpus {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut ids = Vec::new();
        let mut labels = Vec::new();
        let mut classes: Vec<String> = Vec::new();
        for s in corpus.iter().filter(|s| !s.labels.is_empty()) {
            for l in &s.labels {
                if !classes.contains(l) {
                    classes.push(l.clone());
                }
            }
            ids.push(s.id.clone());
            labels.push(s.labels.clone());
        }
        LabeledCorpus {
            ids,
            labels,
            classes,
        }
    }

    /// Classes in order of first appearance.
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn class_size(&self, class: &str) -> usize {
        self.labels.iter().filter(|ls| ls.iter().any(|l| l == class)).count()
    }

    pub fn min_class_size(&self) -> usize {
        self.classes.iter().map(|c| self.class_size(c)).min().unwrap_or(0)
    }

    pub fn require_class(&self, class: &str) -> Result<()> {
        if self.classes.iter().any(|c| c == class) {
            Ok(())
        } else {
            Err(Error::Name(format!("no class labeled {class:?}")))
        }
    }

    pub(crate) fn labels_of(&self) -> std::collections::HashMap<&str, &[String]> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.labels.iter().map(Vec::as_slice))
            .collect()
    }
}

/// Example sets `Q_1..Q_N` (named after their class) and the evaluation set `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub examples: Vec<SemanticSet>,
    pub evaluation: SemanticSet,
}

impl Split {
    pub fn example(&self, class: &str) -> Result<&SemanticSet> {
        self.examples
            .iter()
            .find(|s| s.name() == class)
            .ok_or_else(|| Error::Name(format!("no example set for class {class:?}")))
    }
}

pub const EVALUATION_SET: &str = "U";

/// Draws `n_sample` examples per class without replacement; the rest form `U`.
///
/// Example sets are disjoint: a multi-label sentence drawn for one class is
/// not available to later classes. `U` lists each class's remaining members
/// class by class, each sentence once.
pub fn split_examples(corpus: &LabeledCorpus, n_sample: usize, seed: u64) -> Result<Split> {
    if n_sample == 0 {
        return Err(Error::Domain("n_sample must be at least 1".into()));
    }
    if corpus.classes.is_empty() {
        return Err(Error::Domain("corpus has no labeled sentences".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: HashSet<usize> = HashSet::new();
    let mut examples = Vec::with_capacity(corpus.classes.len());
    let members = |class: &str| -> Vec<usize> {
        (0..corpus.len())
            .filter(|&i| corpus.labels[i].iter().any(|l| l == class))
            .collect()
    };
    for class in &corpus.classes {
        let all = members(class);
        if all.len() <= n_sample {
            return Err(Error::Domain(format!(
                "class {class:?} has {} sentences, needs more than n_sample = {n_sample}",
                all.len()
            )));
        }
        let pool: Vec<usize> = all.into_iter().filter(|i| !taken.contains(i)).collect();
        if pool.len() < n_sample {
            return Err(Error::Domain(format!(
                "class {class:?} has only {} sentences not already drawn for other classes, needs {n_sample}",
                pool.len()
            )));
        }
        let mut picked = rand::seq::index::sample(&mut rng, pool.len(), n_sample).into_vec();
        picked.sort_unstable();
        let ids: Vec<String> = picked
            .into_iter()
            .map(|p| {
                taken.insert(pool[p]);
                corpus.ids[pool[p]].clone()
            })
            .collect();
        examples.push(SemanticSet::new(class.clone(), ids)?);
    }
    let mut in_u: HashSet<usize> = HashSet::new();
    let mut rest = Vec::new();
    for class in &corpus.classes {
        for i in members(class) {
            if !taken.contains(&i) && in_u.insert(i) {
                rest.push(corpus.ids[i].clone());
            }
        }
    }
    let evaluation = SemanticSet::new(EVALUATION_SET, rest)?;
    Ok(Split {
        examples,
        evaluation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Sentence;

    fn labeled(classes: usize, per_class: usize) -> LabeledCorpus {
        let sentences = (0..classes)
            .flat_map(|c| {
                (0..per_class).map(move |i| {
                    Sentence::new(format!("c{c}-{i}"), "t").with_labels([format!("k{c}")])
                })
            })
            .collect();
        LabeledCorpus::from_corpus(&Corpus::new(sentences).unwrap())
    }

    #[test]
    fn counts() {
        let split = split_examples(&labeled(4, 30), 20, 1).unwrap();
        assert_eq!(split.examples.len(), 4);
        assert!(split.examples.iter().all(|q| q.len() == 20));
        assert_eq!(split.evaluation.len(), 40);
        let q0 = split.example("k0").unwrap();
        assert!(q0.members().iter().all(|m| m.starts_with("c0-")));
        // U is class-grouped.
        assert!(split.evaluation.members()[..10].iter().all(|m| m.starts_with("c0-")));
    }

    #[test]
    fn class_too_small() {
        let err = split_examples(&labeled(2, 30), 30, 1).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        assert!(err.to_string().contains("\"k0\""));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let c = labeled(3, 25);
        assert_eq!(split_examples(&c, 5, 9).unwrap(), split_examples(&c, 5, 9).unwrap());
        assert_ne!(split_examples(&c, 5, 9).unwrap(), split_examples(&c, 5, 10).unwrap());
    }

    #[test]
    fn unlabeled_sentences_ignored() {
        let corpus = Corpus::new(vec![
            Sentence::new("a", "t").with_labels(["x"]),
            Sentence::new("b", "t").with_labels(["x"]),
            Sentence::new("c", "t"),
        ])
        .unwrap();
        let lc = LabeledCorpus::from_corpus(&corpus);
        assert_eq!(lc.len(), 2);
        let split = split_examples(&lc, 1, 0).unwrap();
        assert_eq!(split.evaluation.len(), 1);
    }

    #[test]
    fn multilabel_examples_disjoint() {
        let mut sentences = Vec::new();
        for i in 0..6 {
            sentences.push(Sentence::new(format!("ab{i}"), "t").with_labels(["a", "b"]));
        }
        for i in 0..3 {
            sentences.push(Sentence::new(format!("a{i}"), "t").with_labels(["a"]));
        }
        let lc = LabeledCorpus::from_corpus(&Corpus::new(sentences).unwrap());
        let split = split_examples(&lc, 3, 4).unwrap();
        let qa = split.example("a").unwrap();
        let qb = split.example("b").unwrap();
        assert!(qa.members().iter().all(|m| !qb.contains(m)));
        assert_eq!(split.evaluation.len(), 9 - 6);
    }
}
