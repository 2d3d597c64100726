//! Token embedding providers for the embedding-similarity metric.
//!
//! The real encoder model is not bundled; it is reached through a small
//! HTTP protocol ([`HttpEmbedder`]): POST a JSON body `{"tokens": [...]}`
//! and receive `{"vectors": [[...], ...]}` with one unit vector per token,
//! all of equal dimension. [`HashEmbedder`] is the deterministic offline
//! stand-in, and [`BasisEmbedder`] maps a fixed vocabulary to orthogonal
//! one-hot vectors for exactly predictable test scores.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Transport(String),
    #[error("embedder returned {got} vectors for {expected} tokens")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedder returned vectors of differing dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("token {0:?} is not in the embedder vocabulary")]
    OutOfVocabulary(String),
}

/// One unit-normalized vector per input token, in input order.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Validate shape invariants shared by all providers.
pub(crate) fn check_shape(
    tokens: &[String],
    vectors: &[Vec<f64>],
) -> Result<(), EmbedError> {
    if vectors.len() != tokens.len() {
        return Err(EmbedError::CountMismatch {
            expected: tokens.len(),
            got: vectors.len(),
        });
    }
    if let Some(first) = vectors.first() {
        for v in vectors {
            if v.len() != first.len() {
                return Err(EmbedError::DimensionMismatch(first.len(), v.len()));
            }
        }
    }
    Ok(())
}

/// Deterministic offline embedder: the token text is hashed into a fixed
/// number of pseudo-random coordinates, then normalized. Equal tokens get
/// equal vectors; distinct tokens get quasi-random directions.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        Self { dim: 64 }
    }
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        Self { dim }
    }

    fn vector(&self, token: &str) -> Vec<f64> {
        let mut coords = Vec::with_capacity(self.dim);
        let mut block = 0u32;
        while coords.len() < self.dim {
            let mut hasher = Sha256::new();
            hasher.update(token.as_bytes());
            hasher.update(block.to_be_bytes());
            let digest = hasher.finalize();
            for pair in digest.chunks(2) {
                if coords.len() == self.dim {
                    break;
                }
                let raw = u16::from_be_bytes([pair[0], pair[1]]) as f64;
                coords.push(raw / f64::from(u16::MAX) * 2.0 - 1.0);
            }
            block += 1;
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            // astronomically unlikely; fall back to a fixed axis
            let mut v = vec![0.0; self.dim];
            v[0] = 1.0;
            return v;
        }
        coords.iter().map(|c| c / norm).collect()
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn name(&self) -> &str {
        "hash"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(tokens.iter().map(|t| self.vector(t)).collect())
    }
}

/// Orthogonal mock: each vocabulary token maps to its own one-hot axis, so
/// distinct tokens have exactly zero cosine similarity. Tokens outside the
/// vocabulary are an error.
pub struct BasisEmbedder {
    index: HashMap<String, usize>,
    dim: usize,
}

impl BasisEmbedder {
    pub fn with_vocabulary<I, S>(vocabulary: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let index: HashMap<String, usize> = vocabulary
            .into_iter()
            .map(Into::into)
            .enumerate()
            .map(|(i, t)| (t, i))
            .collect();
        let dim = index.len().max(1);
        Self { index, dim }
    }
}

impl EmbeddingProvider for BasisEmbedder {
    fn name(&self) -> &str {
        "basis"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        tokens
            .iter()
            .map(|t| {
                let &i = self
                    .index
                    .get(t)
                    .ok_or_else(|| EmbedError::OutOfVocabulary(t.clone()))?;
                let mut v = vec![0.0; self.dim];
                v[i] = 1.0;
                Ok(v)
            })
            .collect()
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Client for a local embedding service endpoint.
pub struct HttpEmbedder {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("default TLS-free client construction cannot fail");
        Self {
            endpoint: endpoint.into(),
            client,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> &str {
        "http"
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&EmbedRequest { tokens })
            .send()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(EmbedError::Transport(format!(
                "endpoint returned status {status}"
            )));
        }
        let body: EmbedResponse = response
            .json()
            .map_err(|e| EmbedError::Transport(format!("malformed response: {e}")))?;
        check_shape(tokens, &body.vectors)?;
        Ok(body.vectors)
    }
}
