//! Semantic set operations over sentence embeddings.
//!
//! Sets of sentences are combined with intersection and difference by ranking
//! a carrier set against operand sets with mean cosine similarity. An optional
//! affine adapter, trained with an inter-set contrastive loss, sharpens the
//! separation between the sets a query talks about.

pub mod error;
pub mod eval;
pub mod geometry;
pub mod ops;
pub mod query;
pub mod store;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
pub use geometry::{apply_adapter, cosine_sim, set_similarity};
pub use ops::{difference, intersection, rank_series, OperationSeries, Polarity, RankedEntry, RankedResult};
pub use query::{evaluate_query, parse_query, QueryExpr, QueryOptions, QueryParseError};
pub use store::{AdapterCheckpoint, Corpus, EmbeddingMatrix, SemanticSet, Sentence, SetCollection};
pub use trainer::{train_adapter, NegativeCap, TrainConfig, TrainReport};
