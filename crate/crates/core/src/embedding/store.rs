//! Line-delimited embedding files: one JSON object per line,
//! `{"id", "kind", "model", "dim", "vector"}`. Blank lines and lines starting with `#`
//! are ignored.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Embedding, EmbeddingError, Modality, Result};
use crate::fsutil::write_atomic;

#[derive(Serialize, Deserialize)]
struct Record {
    id: String,
    kind: Modality,
    model: String,
    dim: usize,
    vector: Vec<f64>,
}

pub fn to_jsonl(embs: &[Embedding]) -> String {
    let mut out = String::new();
    for e in embs {
        let rec = Record {
            id: e.id.clone(),
            kind: e.kind,
            model: e.model.clone(),
            dim: e.dim(),
            vector: e.vector.clone(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("finite floats serialize"));
        out.push('\n');
    }
    out
}

pub fn save_embeddings(embs: &[Embedding], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, to_jsonl(embs).as_bytes()).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses records; every record must carry the same dim as the first one.
pub fn parse_embeddings(text: &str) -> Result<Vec<Embedding>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut batch_dim = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parse = |reason: String| EmbeddingError::Parse {
            line: line_no,
            reason,
        };
        let rec: Record = serde_json::from_str(trimmed).map_err(|e| parse(e.to_string()))?;
        if rec.dim != rec.vector.len() {
            return Err(parse(format!(
                "id {}: dim {} but vector has {} values",
                rec.id,
                rec.dim,
                rec.vector.len()
            )));
        }
        match batch_dim {
            None => batch_dim = Some(rec.dim),
            Some(d) if d != rec.dim => {
                return Err(parse(format!("id {}: dim {} differs from header dim {d}", rec.id, rec.dim)))
            }
            _ => {}
        }
        if !seen.insert(rec.id.clone()) {
            return Err(parse(format!("duplicate id {}", rec.id)));
        }
        let emb = Embedding::new(rec.id, rec.kind, rec.model, rec.vector).map_err(|e| parse(e.to_string()))?;
        out.push(emb);
    }
    Ok(out)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<Vec<Embedding>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EmbeddingError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_embeddings(&text)
}
