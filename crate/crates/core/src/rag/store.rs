use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::embed::{Embedder, EmbeddingVector};
use super::RagError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorStoreEntry {
    pub id: u64,
    pub text: String,
    pub vector: EmbeddingVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    /// Descending score; ties broken by ascending entry id.
    pub entries: Vec<(VectorStoreEntry, f64)>,
}

impl RetrievalResult {
    pub fn top_score(&self) -> Option<f64> {
        self.entries.first().map(|(_, s)| *s)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Flat store of normal logs, searched by exhaustive inner product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorStore {
    dim: usize,
    entries: Vec<VectorStoreEntry>,
}

impl VectorStore {
    pub fn new(dim: usize) -> Self {
        VectorStore {
            dim,
            entries: Vec::new(),
        }
    }

    /// Embeds and inserts every text; failures are returned alongside.
    pub fn build<'a>(
        embedder: &dyn Embedder,
        texts: impl IntoIterator<Item = &'a str>,
    ) -> (Self, Vec<(String, RagError)>) {
        let mut store = VectorStore::new(embedder.dim());
        let mut skipped = Vec::new();
        for text in texts {
            match embedder.embed(text) {
                Ok(v) => {
                    store.insert(text, v).expect("embedder dimension matches store");
                }
                Err(e) => skipped.push((text.to_owned(), e)),
            }
        }
        (store, skipped)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[VectorStoreEntry] {
        &self.entries
    }

    pub fn insert(&mut self, text: &str, vector: EmbeddingVector) -> Result<u64, RagError> {
        if text.trim().is_empty() {
            return Err(RagError::BlankText);
        }
        if vector.dim() != self.dim {
            return Err(RagError::Dimension {
                expected: self.dim,
                got: vector.dim(),
            });
        }
        let id = self.entries.last().map_or(1, |e| e.id + 1);
        self.entries.push(VectorStoreEntry {
            id,
            text: text.to_owned(),
            vector,
        });
        Ok(id)
    }

    /// Original text for an entry; stands in for decoding the vector.
    pub fn text(&self, id: u64) -> Option<&str> {
        self.entries
            .binary_search_by_key(&id, |e| e.id)
            .ok()
            .map(|i| self.entries[i].text.as_str())
    }

    pub fn retrieve(&self, query: &EmbeddingVector, top_k: usize) -> Result<RetrievalResult, RagError> {
        if self.entries.is_empty() {
            return Err(RagError::EmptyStore);
        }
        if query.dim() != self.dim {
            return Err(RagError::Dimension {
                expected: self.dim,
                got: query.dim(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (i, e.vector.dot(query)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(self.entries[a.0].id.cmp(&self.entries[b.0].id)));
        scored.truncate(top_k);
        Ok(RetrievalResult {
            entries: scored
                .into_iter()
                .map(|(i, s)| (self.entries[i].clone(), s))
                .collect(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("store serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, RagError> {
        let store: VectorStore = serde_json::from_str(json).map_err(|e| RagError::Store(e.to_string()))?;
        for e in &store.entries {
            if e.vector.dim() != store.dim {
                return Err(RagError::Dimension {
                    expected: store.dim,
                    got: e.vector.dim(),
                });
            }
            if (e.vector.norm() - 1.0).abs() > 1e-6 {
                return Err(RagError::Store(format!("entry {} is not unit length", e.id)));
            }
        }
        if store.entries.windows(2).any(|w| w[0].id >= w[1].id) {
            return Err(RagError::Store("entry ids must be strictly increasing".into()));
        }
        Ok(store)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RagError> {
        fs::write(path, self.to_json()).map_err(|e| RagError::Store(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RagError> {
        let text = fs::read_to_string(path).map_err(|e| RagError::Store(e.to_string()))?;
        Self::from_json(&text)
    }
}
