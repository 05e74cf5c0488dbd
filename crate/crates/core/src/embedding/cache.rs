//! On-disk embedding cache keyed by (model, modality, payload content hash).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use super::{run_adapter, AdapterSpec, EmbedRequest, Embedding, EmbeddingError, Modality, Result};
use crate::fsutil::{sha256_file, sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn content_key(req: &EmbedRequest) -> Result<String> {
        match req.kind {
            Modality::Text => Ok(sha256_hex(req.payload.as_bytes())),
            Modality::Audio => sha256_file(&req.payload).map_err(|source| EmbeddingError::Io {
                path: PathBuf::from(&req.payload),
                source,
            }),
        }
    }

    fn entry(&self, model: &str, kind: Modality, key: &str) -> PathBuf {
        self.root
            .join(sanitize(model))
            .join(kind.as_str())
            .join(format!("{key}.json"))
    }

    /// Embeds `requests`, invoking the adapter once for all cache misses. Requests whose
    /// payload content is identical share one adapter item.
    pub fn embed(&self, spec: &AdapterSpec, requests: &[EmbedRequest]) -> Result<(Vec<Embedding>, CacheStats)> {
        let mut stats = CacheStats::default();
        let keys = requests
            .iter()
            .map(Self::content_key)
            .collect::<Result<Vec<_>>>()?;

        let mut vectors: HashMap<(Modality, String), Vec<f64>> = HashMap::new();
        let mut pending: Vec<EmbedRequest> = Vec::new();
        let mut pending_keys: Vec<(Modality, String)> = Vec::new();
        for (req, key) in requests.iter().zip(&keys) {
            let slot = (req.kind, key.clone());
            if vectors.contains_key(&slot) || pending_keys.contains(&slot) {
                stats.hits += 1;
                continue;
            }
            let path = self.entry(&spec.model_name, req.kind, key);
            match std::fs::read_to_string(&path)
                .ok()
                .and_then(|t| serde_json::from_str::<Vec<f64>>(&t).ok())
            {
                Some(v) if spec.expected_dim.is_none_or(|d| d == v.len()) => {
                    stats.hits += 1;
                    vectors.insert(slot, v);
                }
                _ => {
                    stats.misses += 1;
                    pending.push(req.clone());
                    pending_keys.push(slot);
                }
            }
        }

        let fresh = run_adapter(spec, &pending)?;
        for (emb, slot) in fresh.into_iter().zip(pending_keys) {
            let path = self.entry(&spec.model_name, slot.0, &slot.1);
            let body = serde_json::to_string(emb.vector()).expect("finite floats serialize");
            write_atomic(&path, body.as_bytes()).map_err(|source| EmbeddingError::Io { path, source })?;
            vectors.insert(slot, emb.vector().to_vec());
        }

        let mut out = Vec::with_capacity(requests.len());
        let mut dim = None;
        for (req, key) in requests.iter().zip(keys) {
            let v = vectors[&(req.kind, key)].clone();
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(EmbeddingError::BatchDim {
                        id: req.id.clone(),
                        expected: d,
                        found: v.len(),
                    })
                }
                _ => {}
            }
            out.push(Embedding::new(req.id.clone(), req.kind, spec.model_name.clone(), v)?);
        }
        Ok((out, stats))
    }
}
