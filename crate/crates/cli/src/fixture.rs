//! Deterministic fixture embedder behind the `oracle-adapter` binary.
//!
//! A fixture is JSONL; each record maps one input to a vector:
//!
//! ```text
//! {"kind": "text", "text": "warm", "vector": [1.0, 0.0]}
//! {"kind": "audio", "sha256": "<hex digest of the file>", "vector": [0.3, 1.0]}
//! ```
//!
//! Audio requests are matched by the SHA-256 of the file they point at, so the fixture is
//! independent of where files live.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use timbre_core::embedding::{EmbedRequest, Modality};
use timbre_core::fsutil::{sha256_file, sha256_hex, write_atomic};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file} line {line}: {reason}")]
    Parse { file: String, line: usize, reason: String },
    #[error("duplicate request id {0}")]
    DuplicateRequest(String),
    #[error("no fixture entry for request {id} ({kind} {key})")]
    Unknown { id: String, kind: Modality, key: String },
    #[error("fixture has conflicting entries for {0}")]
    Conflict(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum FixtureRecord {
    Text { text: String, vector: Vec<f64> },
    Audio { sha256: String, vector: Vec<f64> },
}

#[derive(Debug, Clone, Default)]
pub struct Fixture {
    text: HashMap<String, Vec<f64>>,
    audio: HashMap<String, Vec<f64>>,
    digest: String,
}

#[derive(Debug, Serialize)]
struct ResponseRecord<'a> {
    id: &'a str,
    kind: Modality,
    model: &'a str,
    dim: usize,
    vector: &'a [f64],
}

fn insert(map: &mut HashMap<String, Vec<f64>>, key: String, v: Vec<f64>) -> Result<(), FixtureError> {
    match map.get(&key) {
        Some(old) if *old != v => Err(FixtureError::Conflict(key)),
        _ => {
            map.insert(key, v);
            Ok(())
        }
    }
}

impl Fixture {
    pub fn parse(text: &str, file: &str) -> Result<Self, FixtureError> {
        let mut f = Fixture {
            digest: sha256_hex(text.as_bytes()),
            ..Default::default()
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let rec: FixtureRecord = serde_json::from_str(line).map_err(|e| FixtureError::Parse {
                file: file.to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            match rec {
                FixtureRecord::Text { text, vector } => insert(&mut f.text, text, vector)?,
                FixtureRecord::Audio { sha256, vector } => insert(&mut f.audio, sha256.to_lowercase(), vector)?,
            }
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn lookup(&self, req: &EmbedRequest) -> Result<&[f64], FixtureError> {
        let (map, key) = match req.kind {
            Modality::Text => (&self.text, req.payload.clone()),
            Modality::Audio => (
                &self.audio,
                sha256_file(&req.payload).map_err(|source| FixtureError::Io {
                    path: req.payload.clone(),
                    source,
                })?,
            ),
        };
        map.get(&key).map(Vec::as_slice).ok_or(FixtureError::Unknown {
            id: req.id.clone(),
            kind: req.kind,
            key,
        })
    }

    /// Embeds every request; errors name each offending request id.
    pub fn respond(&self, requests: &[EmbedRequest], model: &str) -> Result<String, Vec<FixtureError>> {
        let mut seen = HashSet::new();
        let mut errors = Vec::new();
        let mut out = format!("# oracle-adapter fixture sha256={}\n", self.digest);
        for req in requests {
            if !seen.insert(req.id.as_str()) {
                errors.push(FixtureError::DuplicateRequest(req.id.clone()));
                continue;
            }
            match self.lookup(req) {
                Ok(v) => {
                    let rec = ResponseRecord {
                        id: &req.id,
                        kind: req.kind,
                        model,
                        dim: v.len(),
                        vector: v,
                    };
                    out.push_str(&serde_json::to_string(&rec).expect("response serializes"));
                    out.push('\n');
                }
                Err(e) => errors.push(e),
            }
        }
        if errors.is_empty() {
            Ok(out)
        } else {
            Err(errors)
        }
    }
}

/// Reads `requests`, writes `response`. Returns the diagnostics on failure.
pub fn run(fixture: &Path, model: &str, requests: &Path, response: &Path) -> Result<(), Vec<FixtureError>> {
    let fixture = Fixture::load(fixture).map_err(|e| vec![e])?;
    let file = requests.display().to_string();
    let text = std::fs::read_to_string(requests).map_err(|source| {
        vec![FixtureError::Io {
            path: file.clone(),
            source,
        }]
    })?;
    let reqs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<EmbedRequest>(l).map_err(|e| FixtureError::Parse {
                file: file.clone(),
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| vec![e])?;
    let body = fixture.respond(&reqs, model)?;
    write_atomic(response, body.as_bytes()).map_err(|source| {
        vec![FixtureError::Io {
            path: response.display().to_string(),
            source,
        }]
    })
}
