// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dictionary manifests: a JSON sidecar naming the columns of a matrix file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix_file::{read_matrix, write_matrix};
use super::write_atomic_json;
use crate::dictionary::{content_hash, ConceptDictionary, LatentSpaceTag, ReadMethod};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryManifest {
    pub version: u32,
    pub space: LatentSpaceTag,
    pub names: Vec<String>,
    pub read_methods: Vec<ReadMethod>,
    /// Matrix file path, relative to the manifest's directory.
    pub matrix_file: String,
    pub normalized: bool,
    /// SHA-256 of the names and the matrix bytes.
    pub content_hash: String,
}

impl DictionaryManifest {
    pub fn describe(dict: &ConceptDictionary, matrix_file: impl Into<String>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            space: dict.space(),
            names: dict.names().to_vec(),
            read_methods: dict.read_methods().to_vec(),
            matrix_file: matrix_file.into(),
            normalized: dict.is_normalized(),
            content_hash: dict.content_hash(),
        }
    }

    pub fn matrix_path(&self, manifest_path: &Path) -> PathBuf {
        manifest_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&self.matrix_file)
    }
}

/// Writes `<manifest>` plus a sibling `<stem>.clan` matrix file.
pub fn save_dictionary(dict: &ConceptDictionary, manifest_path: impl AsRef<Path>) -> Result<DictionaryManifest> {
    let manifest_path = manifest_path.as_ref();
    let stem = manifest_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dictionary");
    let manifest = DictionaryManifest::describe(dict, format!("{stem}.clan"));
    write_matrix(dict.matrix(), manifest.matrix_path(manifest_path))?;
    write_atomic_json(manifest_path, &manifest)?;
    Ok(manifest)
}

/// Loads a dictionary and verifies the manifest's content hash.
pub fn load_dictionary(manifest_path: impl AsRef<Path>) -> Result<ConceptDictionary> {
    let manifest_path = manifest_path.as_ref();
    let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DictionaryManifest =
        serde_json::from_str(&text).map_err(|e| Error::SchemaViolation(e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::UnsupportedVersion(manifest.version));
    }
    let matrix = read_matrix(manifest.matrix_path(manifest_path))?;
    if matrix.cols() != manifest.names.len() {
        return Err(Error::SchemaViolation(format!(
            "manifest lists {} names but the matrix has {} columns",
            manifest.names.len(),
            matrix.cols()
        )));
    }
    let actual = content_hash(&manifest.names, &matrix);
    if actual != manifest.content_hash {
        return Err(Error::HashMismatch {
            expected: manifest.content_hash,
            actual,
        });
    }
    ConceptDictionary::from_parts(
        manifest.space,
        manifest.names,
        manifest.read_methods,
        matrix,
        manifest.normalized,
    )
}
