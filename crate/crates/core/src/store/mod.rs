// SPDX-License-Identifier: MIT OR Apache-2.0

//! Persistence: binary matrix files, JSON concept datasets, dictionary
//! manifests and the content-addressed embedding cache.
//!
//! Every file is written to a temporary sibling and renamed into place, so
//! readers never observe a partial write.

mod cache;
mod dataset;
mod manifest;
mod matrix_file;

use std::io::Write;
use std::path::Path;

pub use cache::EmbeddingCache;
pub use dataset::{parse_dataset, read_dataset, write_dataset, ConceptDataset, DATASET_VERSION};
pub use manifest::{load_dictionary, save_dictionary, DictionaryManifest, MANIFEST_VERSION};
pub use matrix_file::{
    decode_matrix, encode_matrix, read_matrix, read_matrix_with_cap, write_matrix, write_matrix_to,
    MatrixHeader, DEFAULT_MAX_ELEMENTS, DTYPE_F32, HEADER_LEN, MAGIC, VERSION,
};

use crate::error::{Error, Result};

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline, written atomically.
pub fn write_atomic_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
