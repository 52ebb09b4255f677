//! Retrieval-augmented anomaly detection over a store of normal logs.
//!
//! Vectors are normalized on the way in, so the inner product used for
//! retrieval is cosine similarity. Each entry keeps its original text, which
//! is what gets put in front of the model.

mod anomaly;
mod embed;
mod report;
mod store;

use thiserror::Error;

pub use anomaly::{
    build_anomaly_prompt, classify, parse_label, AnomalyJudge, AnomalyVerdict, KeywordStub, Label, LlmJudge,
    DEFAULT_TAU, DEFAULT_TOP_K, QUESTION,
};
pub use embed::{fnv1a, Embedder, EmbeddingVector, HashedEmbedder, RemoteEmbedder};
pub use report::{interpret, AnomalySection, InterpretationReport, Narrator, TemplateCount};
pub use store::{RetrievalResult, VectorStore, VectorStoreEntry};

#[derive(Debug, Error)]
pub enum RagError {
    #[error("text is blank")]
    BlankText,
    #[error("embedding failed: {0}")]
    Embed(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("vector store is empty")]
    EmptyStore,
    #[error("vector store file: {0}")]
    Store(String),
}
