//! Embeddings, cosine similarity, persistence and the external adapter protocol.

mod adapter;
mod cache;
mod store;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{run_adapter, AdapterSpec, EmbedRequest};
pub use cache::{CacheStats, EmbeddingCache};
pub use store::{load_embeddings, parse_embeddings, save_embeddings, to_jsonl};

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("model mismatch: {left} vs {right}")]
    ModelMismatch { left: String, right: String },
    #[error("embedding {0}: zero vector")]
    ZeroVector(String),
    #[error("embedding {0}: empty vector")]
    EmptyVector(String),
    #[error("embedding {0}: non-finite value")]
    NonFinite(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("adapter response missing id {0}")]
    MissingId(String),
    #[error("adapter response has unrequested id {0}")]
    UnexpectedId(String),
    #[error("id {id}: expected kind {expected}, got {found}")]
    KindMismatch {
        id: String,
        expected: Modality,
        found: Modality,
    },
    #[error("id {id}: expected dim {expected}, got {found}")]
    ExpectedDim {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("id {id}: dim {found} differs from batch dim {expected}")]
    BatchDim {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("adapter command is empty or unparsable: {0:?}")]
    BadCommand(String),
    #[error("failed to launch adapter {command:?}: {source}")]
    Spawn {
        command: String,
        source: std::io::Error,
    },
    #[error("adapter {command:?} exited with {status}:\n{stderr}")]
    AdapterFailed {
        command: String,
        status: String,
        stderr: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Text,
}

impl Modality {
    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Text => "text",
        }
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A finite, non-zero vector produced by one model for one audio clip or text.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    id: String,
    kind: Modality,
    model: String,
    vector: Vec<f64>,
}

impl Embedding {
    pub fn new(id: impl Into<String>, kind: Modality, model: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if vector.is_empty() {
            return Err(EmbeddingError::EmptyVector(id));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(id));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(EmbeddingError::ZeroVector(id));
        }
        Ok(Self {
            id,
            kind,
            model: model.into(),
            vector,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> Modality {
        self.kind
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn vector(&self) -> &[f64] {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    /// Component-wise mean of several embeddings of the same model and dim.
    pub fn mean(id: impl Into<String>, items: &[Embedding]) -> Result<Embedding> {
        let id = id.into();
        let first = items.first().ok_or_else(|| EmbeddingError::EmptyVector(id.clone()))?;
        let mut acc = vec![0.0; first.dim()];
        for e in items {
            check_compatible(first, e)?;
            for (a, v) in acc.iter_mut().zip(&e.vector) {
                *a += v;
            }
        }
        let n = items.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Embedding::new(id, first.kind, first.model.clone(), acc)
    }
}

fn check_compatible(x: &Embedding, y: &Embedding) -> Result<()> {
    if x.model != y.model {
        return Err(EmbeddingError::ModelMismatch {
            left: x.model.clone(),
            right: y.model.clone(),
        });
    }
    if x.dim() != y.dim() {
        return Err(EmbeddingError::DimMismatch {
            left: x.dim(),
            right: y.dim(),
        });
    }
    Ok(())
}

/// Cosine of the angle between two vectors, `None` if either is zero or lengths differ.
pub fn cosine(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() {
        return None;
    }
    let (mut dot, mut xx, mut yy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx == 0.0 || yy == 0.0 {
        return None;
    }
    Some((dot / (xx.sqrt() * yy.sqrt())).clamp(-1.0, 1.0))
}

pub fn cosine_similarity(x: &Embedding, y: &Embedding) -> Result<f64> {
    check_compatible(x, y)?;
    cosine(&x.vector, &y.vector).ok_or_else(|| EmbeddingError::ZeroVector(x.id.clone()))
}
