//! Seeded synthetic corpora for tests, demos and checked-in fixtures.
//!
//! Class `k` is centred on the basis vector `e_k` (so centres are pairwise
//! orthogonal), optionally shifted by a shared offset along the last axis and
//! perturbed by isotropic Gaussian noise.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::store::{write_embeddings, Corpus, EmbeddingMatrix, SemanticSet, Sentence};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation.
    pub noise: f64,
    /// Length of each class centre.
    pub center_scale: f64,
    /// Length of the offset shared by every point, along the last axis.
    pub shared_offset: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            classes: 3,
            per_class: 20,
            dim: 32,
            noise: 0.05,
            center_scale: 1.0,
            shared_offset: 0.0,
            seed: 0,
        }
    }
}

/// A corpus with aligned embeddings.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix,
}

pub fn class_name(k: usize) -> String {
    format!("c{k}")
}

impl SyntheticCorpus {
    /// Single-label Gaussian clusters, `per_class` sentences each, class-major order.
    pub fn clusters(spec: &ClusterSpec) -> Self {
        let groups: Vec<(Vec<usize>, usize)> =
            (0..spec.classes).map(|k| (vec![k], spec.per_class)).collect();
        Self::label_groups(&groups, spec)
    }

    /// Sentences whose label sets are given by `groups` as (labels, count).
    ///
    /// The centre of a multi-label sentence is the normalized sum of its
    /// label centres, scaled by `center_scale`.
    pub fn label_groups(groups: &[(Vec<usize>, usize)], spec: &ClusterSpec) -> Self {
        let classes = groups
            .iter()
            .flat_map(|(ls, _)| ls.iter().copied())
            .max()
            .map_or(0, |m| m + 1);
        let needed = classes + usize::from(spec.shared_offset != 0.0);
        assert!(
            needed <= spec.dim,
            "{classes} classes (plus offset axis) do not fit in dim {}",
            spec.dim
        );
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise).expect("noise must be finite and non-negative");
        let mut sentences = Vec::new();
        let mut rows = Vec::new();
        for (labels, count) in groups {
            let weight = spec.center_scale / (labels.len().max(1) as f64).sqrt();
            for _ in 0..*count {
                let idx = sentences.len();
                let id = format!("s{idx:04}");
                let names: Vec<String> = labels.iter().map(|&k| class_name(k)).collect();
                sentences.push(
                    Sentence::new(&id, format!("synthetic sentence {idx} [{}]", names.join("+")))
                        .with_labels(names),
                );
                let mut v = vec![0.0f64; spec.dim];
                for &k in labels {
                    v[k] += weight;
                }
                v[spec.dim - 1] += spec.shared_offset;
                for x in v.iter_mut() {
                    *x += noise.sample(&mut rng);
                }
                rows.push((id, v.into_iter().map(|x| x as f32).collect::<Vec<f32>>()));
            }
        }
        SyntheticCorpus {
            corpus: Corpus::new(sentences).expect("generated ids are unique"),
            embeddings: EmbeddingMatrix::from_rows(rows).expect("generated rows are valid"),
        }
    }

    /// I.i.d. uniformly random unit vectors with balanced labels.
    pub fn random_unit(classes: usize, per_class: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sentences = Vec::new();
        let mut rows = Vec::new();
        for k in 0..classes {
            for _ in 0..per_class {
                let idx = sentences.len();
                let id = format!("s{idx:04}");
                sentences.push(
                    Sentence::new(&id, format!("random sentence {idx}")).with_labels([class_name(k)]),
                );
                let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= n);
                rows.push((id, v.into_iter().map(|x| x as f32).collect::<Vec<f32>>()));
            }
        }
        SyntheticCorpus {
            corpus: Corpus::new(sentences).expect("generated ids are unique"),
            embeddings: EmbeddingMatrix::from_rows(rows).expect("generated rows are valid"),
        }
    }

    /// One set per label, named after the label, members in corpus order.
    pub fn class_sets(&self) -> Vec<SemanticSet> {
        let mut names: Vec<&str> = Vec::new();
        for s in self.corpus.iter() {
            for l in &s.labels {
                if !names.contains(&l.as_str()) {
                    names.push(l);
                }
            }
        }
        names
            .into_iter()
            .map(|name| {
                SemanticSet::new(
                    name,
                    self.corpus
                        .iter()
                        .filter(|s| s.has_label(name))
                        .map(|s| s.id.clone()),
                )
                .expect("every label has members")
            })
            .collect()
    }

    /// Writes `corpus.jsonl`, `embeddings.scse` and `sets.json` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let corpus_path = dir.join("corpus.jsonl");
        fs::write(&corpus_path, self.corpus.to_jsonl()).map_err(|e| Error::io(&corpus_path, e))?;
        write_embeddings(&self.embeddings, dir.join("embeddings.scse"))?;
        let sets_path = dir.join("sets.json");
        fs::write(&sets_path, sets_to_json(&self.class_sets()))
            .map_err(|e| Error::io(&sets_path, e))?;
        Ok(())
    }
}

/// Renders sets in the `{name: [id, ...]}` definition format.
pub fn sets_to_json(sets: &[SemanticSet]) -> String {
    let map: serde_json::Map<String, serde_json::Value> = sets
        .iter()
        .map(|s| (s.name().to_owned(), serde_json::json!(s.members())))
        .collect();
    serde_json::to_string_pretty(&map).expect("string map serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clusters_are_deterministic() {
        let a = SyntheticCorpus::clusters(&ClusterSpec::default());
        let b = SyntheticCorpus::clusters(&ClusterSpec::default());
        assert_eq!(a.embeddings.values(), b.embeddings.values());
        assert_eq!(a.corpus.len(), 60);
        assert_eq!(a.class_sets().len(), 3);
    }

    #[test]
    fn noiseless_clusters_are_one_hot() {
        let fx = SyntheticCorpus::clusters(&ClusterSpec {
            noise: 0.0,
            per_class: 2,
            dim: 4,
            ..ClusterSpec::default()
        });
        assert_eq!(fx.embeddings.row(2), [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn random_rows_are_unit() {
        let fx = SyntheticCorpus::random_unit(2, 5, 8, 1);
        for r in 0..fx.embeddings.len() {
            assert!((fx.embeddings.norm(r) - 1.0).abs() < 1e-6);
        }
    }
}
