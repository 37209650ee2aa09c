#![allow(dead_code)]

use std::path::{Path, PathBuf};

use setcse::eval::LabeledCorpus;
use setcse::store::{load_corpus, read_embeddings};
use setcse::synthetic::{ClusterSpec, SyntheticCorpus};
use setcse::{Corpus, EmbeddingMatrix};

/// Every checked-in fixture, by directory name.
pub const FIXTURES: &[&str] = &["clusters", "orthogonal", "multilabel", "random"];

/// Regenerates a fixture from its recipe.
pub fn generate(name: &str) -> SyntheticCorpus {
    match name {
        // Three noisy clusters whose class directions are small next to a
        // shared offset, so the frozen embeddings rank imperfectly.
        "clusters" => SyntheticCorpus::clusters(&ClusterSpec {
            classes: 3,
            per_class: 60,
            dim: 32,
            noise: 0.05,
            center_scale: 0.15,
            shared_offset: 1.0,
            seed: 0,
        }),
        "orthogonal" => SyntheticCorpus::clusters(&ClusterSpec {
            classes: 3,
            per_class: 40,
            dim: 8,
            noise: 0.0,
            ..ClusterSpec::default()
        }),
        "multilabel" => SyntheticCorpus::label_groups(
            &[
                (vec![0], 40),
                (vec![1], 40),
                (vec![0, 1], 20),
                (vec![2], 40),
            ],
            &ClusterSpec {
                dim: 8,
                noise: 0.0,
                ..ClusterSpec::default()
            },
        ),
        "random" => SyntheticCorpus::random_unit(4, 120, 16, 0),
        other => panic!("unknown fixture {other}"),
    }
}

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}

/// Loads a checked-in fixture from disk.
pub fn load(name: &str) -> (Corpus, EmbeddingMatrix) {
    let dir = fixture_dir(name);
    let corpus = load_corpus(dir.join("corpus.jsonl")).expect("fixture corpus");
    let emb = read_embeddings(dir.join("embeddings.scse")).expect("fixture embeddings");
    (corpus, emb)
}

pub fn load_labeled(name: &str) -> (LabeledCorpus, EmbeddingMatrix) {
    let (corpus, emb) = load(name);
    (LabeledCorpus::from_corpus(&corpus), emb)
}
