//! JSONL persistence for [`EmbeddingStore`].
//!
//! ```text
//! {"dim":512,"extractor_id":"clip-vit-b32"}
//! {"concept":"rock","language":"ja","variant":"corrected","modality":"image","index":0,"vec":[...]}
//! ```
//!
//! A fresh store that has not received a vector yet writes `"dim":null`.
//! Components are written in shortest round-trip form, so save then load is
//! exact.

use std::path::Path;

use cccl_core::inventory::{ConceptId, LanguageCode};
use cccl_core::{EmbeddingKey, EmbeddingStore, EmbeddingVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::fs::{read_text, write_atomic};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dim: Option<usize>,
    extractor_id: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    concept: String,
    language: String,
    variant: String,
    modality: String,
    index: u32,
    vec: Vec<f64>,
}

fn entry_key(e: &Entry, line: usize) -> Result<EmbeddingKey, FormatError> {
    let inv = |r| FormatError::new(line, r);
    Ok(EmbeddingKey {
        concept: ConceptId::new(e.concept.as_str()).map_err(inv)?,
        language: LanguageCode::new(e.language.as_str()).map_err(inv)?,
        variant: e.variant.parse().map_err(inv)?,
        modality: e.modality.parse().map_err(|s| FormatError::new(line, s))?,
        index: e.index,
    })
}

pub fn parse_store(text: &str) -> Result<EmbeddingStore, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, first)) = lines.next() else {
        return Err(FormatError::syntax(1, "missing header line"));
    };
    let header: Header = serde_json::from_str(first).map_err(|e| FormatError::new(1, e))?;
    let mut store =
        EmbeddingStore::new(header.extractor_id, header.dim).map_err(|e| FormatError::new(1, e))?;
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let entry: Entry = serde_json::from_str(line).map_err(|e| FormatError::new(no, e))?;
        let key = entry_key(&entry, no)?;
        let vector = EmbeddingVector::new(entry.vec).map_err(|e| FormatError::new(no, e))?;
        store
            .put(key, vector)
            .map_err(|e| FormatError::new(no, e))?;
    }
    Ok(store)
}

pub fn render_store(store: &EmbeddingStore) -> String {
    let header = Header {
        dim: store.dim(),
        extractor_id: store.extractor_id().to_owned(),
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for (key, vector) in store.iter() {
        let entry = Entry {
            concept: key.concept.to_string(),
            language: key.language.to_string(),
            variant: key.variant.to_string(),
            modality: key.modality.to_string(),
            index: key.index,
            vec: vector.as_slice().to_vec(),
        };
        out.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        out.push('\n');
    }
    out
}

pub fn load_store(path: &Path) -> Result<EmbeddingStore> {
    parse_store(&read_text(path)?).map_err(|e| Error::format(path, e))
}

/// Loads the store at `path`, or `None` if no file exists there yet.
pub fn load_store_if_exists(path: &Path) -> Result<Option<EmbeddingStore>> {
    if path.exists() {
        load_store(path).map(Some)
    } else {
        Ok(None)
    }
}

pub fn save_store(store: &EmbeddingStore, path: &Path) -> Result<()> {
    write_atomic(path, render_store(store).as_bytes())
}
