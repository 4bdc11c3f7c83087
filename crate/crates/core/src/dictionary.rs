// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concepts, representation reading and per-task concept dictionaries.
//!
//! A concept vector is read from the embeddings of a concept's stimuli either
//! as their mean ([`ReadMethod::Avg`], the default everywhere) or as their
//! first principal component ([`ReadMethod::Pca`]). Vectors are stacked as
//! columns of a `d × N` dictionary. The reserved null concept [`NULL_CONCEPT`]
//! is the only column allowed to be zero.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solver::{ensure_finite, mean_rows, norm2, pca_first_component, DenseMatrix};

/// Reserved name of the null concept (the direction of an empty sentence).
pub const NULL_CONCEPT: &str = "∅";

pub const CLIP_SEQ_LEN: usize = 77;
pub const CLIP_TOKEN_DIM: usize = 768;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadMethod {
    #[default]
    Avg,
    Pca,
}

impl fmt::Display for ReadMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReadMethod::Avg => "avg",
            ReadMethod::Pca => "pca",
        })
    }
}

impl std::str::FromStr for ReadMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "avg" | "mean" => Ok(ReadMethod::Avg),
            "pca" => Ok(ReadMethod::Pca),
            other => Err(Error::InvalidConfig(format!("unknown read method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    TextEmbedding,
    Score,
}

/// Which latent space a vector lives in, and how to unflatten it.
///
/// Text embeddings are a `seq_len × token_dim` token grid flattened row-major.
/// Score vectors are opaque; they carry `seq_len = 1, token_dim = flat_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatentSpaceTag {
    pub kind: SpaceKind,
    pub seq_len: usize,
    pub token_dim: usize,
    pub flat_dim: usize,
}

impl LatentSpaceTag {
    pub fn text_embedding(seq_len: usize, token_dim: usize) -> Self {
        Self {
            kind: SpaceKind::TextEmbedding,
            seq_len,
            token_dim,
            flat_dim: seq_len * token_dim,
        }
    }

    /// The 77-token × 768-wide CLIP text-encoder grid, 59136 values flat.
    pub fn clip_text() -> Self {
        Self::text_embedding(CLIP_SEQ_LEN, CLIP_TOKEN_DIM)
    }

    pub fn score(flat_dim: usize) -> Self {
        Self {
            kind: SpaceKind::Score,
            seq_len: 1,
            token_dim: flat_dim,
            flat_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.flat_dim == 0 {
            return Err(Error::SpaceMismatch("flat_dim must be positive".into()));
        }
        if self.kind == SpaceKind::TextEmbedding && self.seq_len * self.token_dim != self.flat_dim {
            return Err(Error::SpaceMismatch(format!(
                "text embedding {}x{} does not flatten to {}",
                self.seq_len, self.token_dim, self.flat_dim
            )));
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.flat_dim {
            return Err(Error::SpaceMismatch(format!(
                "vector has {len} values but the space is {}-dimensional",
                self.flat_dim
            )));
        }
        Ok(())
    }
}

/// Trims and collapses internal whitespace runs to one space.
pub fn normalize_stimulus(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// A named concept with its textual stimuli.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    #[serde(rename = "concept")]
    pub name: String,
    pub stimuli: Vec<String>,
}

impl Concept {
    /// Normalizes whitespace, drops empty stimuli and keeps the first copy of
    /// each duplicate.
    pub fn new(name: impl Into<String>, stimuli: impl IntoIterator<Item = impl AsRef<str>>) -> Result<Self> {
        let name = name.into().trim().to_string();
        if name.is_empty() {
            return Err(Error::Precondition("concept name is empty".into()));
        }
        Ok(Self {
            name,
            stimuli: dedup_stimuli(stimuli),
        })
    }
}

pub(crate) fn dedup_stimuli(stimuli: impl IntoIterator<Item = impl AsRef<str>>) -> Vec<String> {
    let mut seen = HashSet::new();
    stimuli
        .into_iter()
        .map(|s| normalize_stimulus(s.as_ref()))
        .filter(|s| !s.is_empty() && seen.insert(s.clone()))
        .collect()
}

/// A latent direction read from a concept's stimulus embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptVector {
    pub name: String,
    pub vector: Vec<f32>,
    pub read_method: ReadMethod,
    pub space: LatentSpaceTag,
}

impl ConceptVector {
    pub fn is_null(&self) -> bool {
        self.name == NULL_CONCEPT
    }
}

/// Reads one concept vector from `K × d` stimulus embeddings.
pub fn rep_read(
    embeddings: &DenseMatrix,
    method: ReadMethod,
    name: &str,
    space: LatentSpaceTag,
) -> Result<ConceptVector> {
    space.validate()?;
    space.check_len(embeddings.cols())?;
    let vector = match method {
        ReadMethod::Avg => mean_rows(embeddings)?,
        ReadMethod::Pca => pca_first_component(embeddings)?,
    };
    Ok(ConceptVector {
        name: name.to_string(),
        vector,
        read_method: method,
        space,
    })
}

/// The null concept from the encoder's embedding of the empty string.
pub fn null_concept(space: LatentSpaceTag, null_embedding: &[f32]) -> Result<ConceptVector> {
    space.validate()?;
    space.check_len(null_embedding.len())?;
    ensure_finite(null_embedding, "null embedding")?;
    Ok(ConceptVector {
        name: NULL_CONCEPT.to_string(),
        vector: null_embedding.to_vec(),
        read_method: ReadMethod::Avg,
        space,
    })
}

/// Concept vectors stacked as the columns of a `d × N` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptDictionary {
    space: LatentSpaceTag,
    names: Vec<String>,
    read_methods: Vec<ReadMethod>,
    matrix: DenseMatrix,
    normalized: bool,
}

/// Stacks `vectors` into a dictionary, in input order.
///
/// The caller places the edit's source concept first. With `normalize`, each
/// non-null column is scaled to unit L2 norm.
pub fn assemble(vectors: &[ConceptVector], normalize: bool) -> Result<ConceptDictionary> {
    let first = vectors.first().ok_or(Error::EmptyInput("no concept vectors"))?;
    let space = first.space;
    space.validate()?;
    let mut seen = HashSet::new();
    let mut columns = Vec::with_capacity(vectors.len());
    for cv in vectors {
        if cv.space != space {
            return Err(Error::SpaceMismatch(format!(
                "concept {:?} is tagged {:?}, dictionary is {:?}",
                cv.name, cv.space, space
            )));
        }
        space.check_len(cv.vector.len())?;
        if !seen.insert(cv.name.as_str()) {
            return Err(Error::DuplicateName(cv.name.clone()));
        }
        ensure_finite(&cv.vector, "concept vector")?;
        let norm = norm2(&cv.vector);
        if norm == 0.0 && !cv.is_null() {
            return Err(Error::ZeroAtom(cv.name.clone()));
        }
        let column = if normalize && !cv.is_null() {
            cv.vector.iter().map(|&x| (f64::from(x) / norm) as f32).collect()
        } else {
            cv.vector.clone()
        };
        columns.push(column);
    }
    Ok(ConceptDictionary {
        space,
        names: vectors.iter().map(|c| c.name.clone()).collect(),
        read_methods: vectors.iter().map(|c| c.read_method).collect(),
        matrix: DenseMatrix::from_columns(&columns)?,
        normalized: normalize,
    })
}

impl ConceptDictionary {
    /// Reassembles a dictionary from stored parts, re-checking every invariant.
    pub fn from_parts(
        space: LatentSpaceTag,
        names: Vec<String>,
        read_methods: Vec<ReadMethod>,
        matrix: DenseMatrix,
        normalized: bool,
    ) -> Result<Self> {
        space.validate()?;
        if names.is_empty() {
            return Err(Error::EmptyInput("dictionary has no concepts"));
        }
        if matrix.cols() != names.len() || read_methods.len() != names.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: matrix.cols(),
            });
        }
        space.check_len(matrix.rows())?;
        let mut seen = HashSet::new();
        for (j, name) in names.iter().enumerate() {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateName(name.clone()));
            }
            if name == NULL_CONCEPT {
                continue;
            }
            let norm = norm2(&matrix.column(j));
            if norm == 0.0 {
                return Err(Error::ZeroAtom(name.clone()));
            }
            if normalized && (norm - 1.0).abs() > 1e-5 {
                return Err(Error::SchemaViolation(format!(
                    "column {name:?} has norm {norm} in a normalized dictionary"
                )));
            }
        }
        Ok(Self {
            space,
            names,
            read_methods,
            matrix,
            normalized,
        })
    }

    pub fn space(&self) -> LatentSpaceTag {
        self.space
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn read_methods(&self) -> &[ReadMethod] {
        &self.read_methods
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f32> {
        self.matrix.column(j)
    }

    pub fn concept_vector(&self, j: usize) -> ConceptVector {
        ConceptVector {
            name: self.names[j].clone(),
            vector: self.column(j),
            read_method: self.read_methods[j],
            space: self.space,
        }
    }

    pub fn concept_vectors(&self) -> Vec<ConceptVector> {
        (0..self.len()).map(|j| self.concept_vector(j)).collect()
    }

    /// SHA-256 over the length-prefixed names, the matrix shape and the
    /// little-endian payload, as lowercase hex. Doubles as the dictionary id.
    pub fn content_hash(&self) -> String {
        content_hash(&self.names, &self.matrix)
    }
}

pub(crate) fn content_hash(names: &[String], matrix: &DenseMatrix) -> String {
    let mut h = Sha256::new();
    h.update((names.len() as u64).to_le_bytes());
    for n in names {
        h.update((n.len() as u64).to_le_bytes());
        h.update(n.as_bytes());
    }
    h.update((matrix.rows() as u64).to_le_bytes());
    h.update((matrix.cols() as u64).to_le_bytes());
    h.update(matrix.to_le_bytes());
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space2() -> LatentSpaceTag {
        LatentSpaceTag::score(2)
    }

    fn cv(name: &str, v: &[f32]) -> ConceptVector {
        ConceptVector {
            name: name.into(),
            vector: v.to_vec(),
            read_method: ReadMethod::Avg,
            space: LatentSpaceTag::score(v.len()),
        }
    }

    #[test]
    fn clip_layout_flattens_to_59136() {
        let s = LatentSpaceTag::clip_text();
        assert_eq!(s.flat_dim, 59136);
        s.validate().unwrap();
        let bad = LatentSpaceTag {
            flat_dim: 100,
            ..s
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn avg_of_single_stimulus_is_itself() {
        let e = DenseMatrix::from_rows(&[vec![0.25f32, -3.0]]).unwrap();
        let c = rep_read(&e, ReadMethod::Avg, "hat", space2()).unwrap();
        assert_eq!(c.vector, vec![0.25, -3.0]);
        assert_eq!(c.read_method, ReadMethod::Avg);
        assert_eq!(ReadMethod::default(), ReadMethod::Avg);
    }

    #[test]
    fn rep_read_checks_space() {
        let e = DenseMatrix::from_rows(&[vec![1.0f32, 2.0, 3.0]]).unwrap();
        assert!(matches!(
            rep_read(&e, ReadMethod::Avg, "x", space2()),
            Err(Error::SpaceMismatch(_))
        ));
    }

    #[test]
    fn assemble_identity_and_normalize() {
        let d = assemble(&[cv("a", &[1.0, 0.0]), cv("b", &[0.0, 1.0])], false).unwrap();
        assert_eq!(d.matrix().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        let d = assemble(&[cv("a", &[2.0, 0.0]), cv("b", &[0.0, 1.0])], true).unwrap();
        assert_eq!(d.column(0), vec![1.0, 0.0]);
        assert!(d.is_normalized());
    }

    #[test]
    fn assemble_errors() {
        assert!(matches!(
            assemble(&[cv("a", &[1.0, 0.0]), cv("a", &[0.0, 1.0])], false),
            Err(Error::DuplicateName(_))
        ));
        assert!(matches!(
            assemble(&[cv("a", &[1.0, 0.0]), cv("z", &[0.0, 0.0])], false),
            Err(Error::ZeroAtom(_))
        ));
        assert!(matches!(
            assemble(&[cv("a", &[1.0, 0.0]), cv("b", &[0.0, 1.0, 2.0])], false),
            Err(Error::SpaceMismatch(_))
        ));
        assert!(matches!(assemble(&[], false), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn null_concept_may_be_zero() {
        let null = null_concept(space2(), &[0.0, 0.0]).unwrap();
        assert_eq!(null.name, NULL_CONCEPT);
        assert_eq!(null, null_concept(space2(), &[0.0, 0.0]).unwrap());
        let d = assemble(&[cv("a", &[1.0, 0.0]), null.clone()], true).unwrap();
        assert_eq!(d.column(1), vec![0.0, 0.0]);
        assert!(null_concept(space2(), &[f32::NAN, 0.0]).is_err());
    }

    #[test]
    fn concept_normalizes_and_dedups_stimuli() {
        let c = Concept::new(" dog ", ["a  dog\tbarks", "a dog barks", "", "  ", "puppies"]).unwrap();
        assert_eq!(c.name, "dog");
        assert_eq!(c.stimuli, vec!["a dog barks", "puppies"]);
        assert!(Concept::new("  ", ["x"]).is_err());
    }

    #[test]
    fn from_parts_rechecks() {
        let d = assemble(&[cv("a", &[1.0, 0.0]), cv("b", &[0.0, 3.0])], false).unwrap();
        let back = ConceptDictionary::from_parts(
            d.space(),
            d.names().to_vec(),
            d.read_methods().to_vec(),
            d.matrix().clone(),
            false,
        )
        .unwrap();
        assert_eq!(back, d);
        assert!(ConceptDictionary::from_parts(
            d.space(),
            d.names().to_vec(),
            d.read_methods().to_vec(),
            d.matrix().clone(),
            true,
        )
        .is_err());
        assert_eq!(d.content_hash().len(), 64);
    }
}
