//! Loading and persistence for corpora, embeddings, set definitions and
//! adapter checkpoints. Everything returned here is immutable after
//! construction.

pub mod adapter;
pub mod corpus;
pub mod embeddings;
pub mod sets;

pub use adapter::{load_adapter, save_adapter, AdapterCheckpoint};
pub use corpus::{load_corpus, parse_corpus, Corpus, Sentence};
pub use embeddings::{read_embeddings, write_embeddings, EmbeddingMatrix};
pub use sets::{load_sets, parse_sets, OverlapWarning, SemanticSet, SetCollection};
