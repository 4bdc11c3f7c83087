// SPDX-License-Identifier: MIT OR Apache-2.0

//! On-disk embedding cache keyed by `(model_name, text)`.
//!
//! Entries live at `<root>/<h[0..2]>/<h>.clan` where `h` is the hex SHA-256
//! of the key; each entry is a `1 × d` matrix file. Writes go through a
//! temp-file rename, so concurrent readers see either nothing or a whole
//! entry. Embeddings are deterministic per key, so last-writer-wins is safe.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::matrix_file::{read_matrix, write_matrix};
use crate::dictionary::hex;
use crate::error::{Error, Result};
use crate::solver::DenseMatrix;

#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    root: PathBuf,
}

impl EmbeddingCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key_hash(model_name: &str, text: &str) -> String {
        let mut h = Sha256::new();
        h.update((model_name.len() as u64).to_le_bytes());
        h.update(model_name.as_bytes());
        h.update(text.as_bytes());
        hex(&h.finalize())
    }

    fn entry_path(&self, model_name: &str, text: &str) -> PathBuf {
        let h = Self::key_hash(model_name, text);
        self.root.join(&h[..2]).join(format!("{h}.clan"))
    }

    pub fn get(&self, model_name: &str, text: &str) -> Result<Option<Vec<f32>>> {
        let path = self.entry_path(model_name, text);
        match read_matrix(&path) {
            Ok(m) => Ok(Some(m.into_vec())),
            Err(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put(&self, model_name: &str, text: &str, value: &[f32]) -> Result<()> {
        let m = DenseMatrix::new(1, value.len(), value.to_vec())?;
        write_matrix(&m, self.entry_path(model_name, text))
    }

    /// Number of stored entries.
    pub fn len(&self) -> Result<usize> {
        let mut n = 0;
        let shards = match std::fs::read_dir(&self.root) {
            Ok(it) => it,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(0),
            Err(e) => return Err(Error::io(&self.root, e)),
        };
        for shard in shards {
            let shard = shard.map_err(|e| Error::io(&self.root, e))?;
            if !shard.path().is_dir() {
                continue;
            }
            for entry in std::fs::read_dir(shard.path()).map_err(|e| Error::io(shard.path(), e))? {
                let entry = entry.map_err(|e| Error::io(shard.path(), e))?;
                if entry.path().extension().is_some_and(|x| x == "clan") {
                    n += 1;
                }
            }
        }
        Ok(n)
    }

    pub fn is_empty(&self) -> Result<bool> {
        self.len().map(|n| n == 0)
    }
}
