use serde::{Deserialize, Serialize};

use super::RagError;
use crate::llm::HttpEmbeddings;

/// Unit-length dense vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector {
    values: Vec<f64>,
}

impl EmbeddingVector {
    /// L2-normalizes `values`. Fails on an empty, zero or non-finite vector.
    pub fn normalized(values: Vec<f64>) -> Result<Self, RagError> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if values.is_empty() || norm == 0.0 || !norm.is_finite() {
            return Err(RagError::Embed("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(EmbeddingVector {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }
}

pub trait Embedder: Send + Sync {
    fn dim(&self) -> usize;

    /// Raw provider output, before normalization.
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RagError>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, RagError> {
        if text.trim().is_empty() {
            return Err(RagError::BlankText);
        }
        let raw = self.embed_raw(text)?;
        if raw.len() != self.dim() {
            return Err(RagError::Dimension {
                expected: self.dim(),
                got: raw.len(),
            });
        }
        EmbeddingVector::normalized(raw)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Bag-of-tokens vector: each whitespace token adds 1 to bucket
/// `fnv1a(token) % dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedEmbedder {
    dim: usize,
}

impl HashedEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        HashedEmbedder { dim }
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dim as u64) as usize
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RagError> {
        let mut v = vec![0.0; self.dim];
        for token in text.split_whitespace() {
            v[self.bucket(token)] += 1.0;
        }
        Ok(v)
    }
}

pub struct RemoteEmbedder {
    client: HttpEmbeddings,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(client: HttpEmbeddings, dim: usize) -> Self {
        RemoteEmbedder { client, dim }
    }
}

impl Embedder for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>, RagError> {
        self.client.embed(text).map_err(|e| RagError::Embed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hashed_bag_of_tokens() {
        let e = HashedEmbedder::new(8);
        let a = (0xaf63dc4c8601ec8cu64 % 8) as usize;
        let b = (fnv1a(b"b") % 8) as usize;
        let v = e.embed("a a b").unwrap();
        let nonzero = v.values().iter().filter(|x| **x != 0.0).count();
        assert!((1..=2).contains(&nonzero));
        assert!((v.norm() - 1.0).abs() < 1e-12);
        if a != b {
            // counts 2 and 1 before normalization
            assert!((v.values()[a] - 2.0 / 5f64.sqrt()).abs() < 1e-12);
            assert!((v.values()[b] - 1.0 / 5f64.sqrt()).abs() < 1e-12);
        }
        assert_eq!(e.embed("a a b").unwrap(), v);
    }

    #[test]
    fn blank_and_zero_rejected() {
        let e = HashedEmbedder::new(4);
        assert!(matches!(e.embed("  "), Err(RagError::BlankText)));
        assert!(EmbeddingVector::normalized(vec![0.0, 0.0]).is_err());
        assert!(EmbeddingVector::normalized(vec![]).is_err());
    }
}
