//! File-based subprocess protocol for external embedding models.
//!
//! The harness writes `requests.jsonl`, runs `command <requests> <response>` and reads
//! embedding records back from the response path. A command may place the two paths
//! explicitly with `{requests}` and `{response}` placeholders.

use std::collections::{HashMap, HashSet};
use std::process::Command;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use super::{parse_embeddings, Embedding, EmbeddingError, Modality, Result};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub id: String,
    pub kind: Modality,
    /// File path for audio, the literal text for text.
    pub payload: String,
}

impl EmbedRequest {
    pub fn audio(id: impl Into<String>, path: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: Modality::Audio,
            payload: path.into(),
        }
    }

    pub fn text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: Modality::Text,
            payload: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterSpec {
    pub command: String,
    pub model_name: String,
    #[serde(default)]
    pub expected_dim: Option<usize>,
}

impl AdapterSpec {
    fn argv(&self, requests: &str, response: &str) -> Result<Vec<String>> {
        let parts = shlex::split(&self.command)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| EmbeddingError::BadCommand(self.command.clone()))?;
        let templated = parts
            .iter()
            .any(|p| p.contains("{requests}") || p.contains("{response}"));
        let mut argv: Vec<String> = parts
            .into_iter()
            .map(|p| p.replace("{requests}", requests).replace("{response}", response))
            .collect();
        if !templated {
            argv.push(requests.to_string());
            argv.push(response.to_string());
        }
        Ok(argv)
    }
}

// One invocation at a time per adapter command.
fn adapter_lock(command: &str) -> Arc<Mutex<()>> {
    static LOCKS: OnceLock<Mutex<HashMap<String, Arc<Mutex<()>>>>> = OnceLock::new();
    LOCKS
        .get_or_init(Default::default)
        .lock()
        .unwrap_or_else(|e| e.into_inner())
        .entry(command.to_string())
        .or_default()
        .clone()
}

/// Runs the adapter once over `requests` and returns embeddings in request order,
/// labelled with `spec.model_name`.
pub fn run_adapter(spec: &AdapterSpec, requests: &[EmbedRequest]) -> Result<Vec<Embedding>> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let mut ids = HashSet::new();
    for r in requests {
        if !ids.insert(r.id.as_str()) {
            return Err(EmbeddingError::DuplicateId(r.id.clone()));
        }
    }

    let work = tempfile::tempdir().map_err(|source| EmbeddingError::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let req_path = work.path().join("requests.jsonl");
    let resp_path = work.path().join("response.jsonl");
    let mut body = String::new();
    for r in requests {
        body.push_str(&serde_json::to_string(r).expect("requests serialize"));
        body.push('\n');
    }
    write_atomic(&req_path, body.as_bytes()).map_err(|source| EmbeddingError::Io {
        path: req_path.clone(),
        source,
    })?;

    let argv = spec.argv(&req_path.to_string_lossy(), &resp_path.to_string_lossy())?;
    let lock = adapter_lock(&spec.command);
    let output = {
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        log::info!("{}: embedding {} item(s)", spec.model_name, requests.len());
        Command::new(&argv[0])
            .args(&argv[1..])
            .output()
            .map_err(|source| EmbeddingError::Spawn {
                command: spec.command.clone(),
                source,
            })?
    };
    if !output.status.success() {
        return Err(EmbeddingError::AdapterFailed {
            command: spec.command.clone(),
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }

    let text = std::fs::read_to_string(&resp_path).map_err(|source| EmbeddingError::Io {
        path: resp_path.clone(),
        source,
    })?;
    let mut by_id: HashMap<String, Embedding> = HashMap::new();
    for e in parse_embeddings(&text)? {
        if !ids.contains(e.id()) {
            return Err(EmbeddingError::UnexpectedId(e.id().to_string()));
        }
        by_id.insert(e.id().to_string(), e);
    }

    let mut out = Vec::with_capacity(requests.len());
    for r in requests {
        let e = by_id
            .remove(&r.id)
            .ok_or_else(|| EmbeddingError::MissingId(r.id.clone()))?;
        if e.kind() != r.kind {
            return Err(EmbeddingError::KindMismatch {
                id: r.id.clone(),
                expected: r.kind,
                found: e.kind(),
            });
        }
        if let Some(expected) = spec.expected_dim {
            if e.dim() != expected {
                return Err(EmbeddingError::ExpectedDim {
                    id: r.id.clone(),
                    expected,
                    found: e.dim(),
                });
            }
        }
        out.push(e.with_model(spec.model_name.clone()));
    }
    Ok(out)
}
