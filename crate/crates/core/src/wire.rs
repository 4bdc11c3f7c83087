// SPDX-License-Identifier: MIT OR Apache-2.0

//! JSON bodies exchanged between the HTTP service and its clients.
//!
//! Matrices travel as base64 of their little-endian `f32` payload so that
//! every value survives the trip bit for bit.

use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::dictionary::{ConceptDictionary, ConceptVector, LatentSpaceTag, ReadMethod};
use crate::error::{Error, ErrorCategory, Result};
use crate::mining::{ChatRequest, ConceptListResponse, EditTask};
use crate::solver::{DenseMatrix, SolverConfig};
use crate::store::ConceptDataset;
use crate::transplant::{CoefficientReport, Decomposition, EditRequest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMatrix {
    pub rows: usize,
    pub cols: usize,
    /// Base64 of the row-major little-endian `f32` values.
    pub data: String,
}

impl From<&DenseMatrix> for WireMatrix {
    fn from(m: &DenseMatrix) -> Self {
        Self {
            rows: m.rows(),
            cols: m.cols(),
            data: base64::engine::general_purpose::STANDARD.encode(m.to_le_bytes()),
        }
    }
}

impl TryFrom<&WireMatrix> for DenseMatrix {
    type Error = Error;

    fn try_from(w: &WireMatrix) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(&w.data)
            .map_err(|e| Error::SchemaViolation(format!("matrix data is not base64: {e}")))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::SchemaViolation("matrix data is not whole f32 values".into()));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        DenseMatrix::new(w.rows, w.cols, data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireDictionary {
    pub space: LatentSpaceTag,
    pub names: Vec<String>,
    pub read_methods: Vec<ReadMethod>,
    pub normalized: bool,
    pub matrix: WireMatrix,
}

impl From<&ConceptDictionary> for WireDictionary {
    fn from(d: &ConceptDictionary) -> Self {
        Self {
            space: d.space(),
            names: d.names().to_vec(),
            read_methods: d.read_methods().to_vec(),
            normalized: d.is_normalized(),
            matrix: d.matrix().into(),
        }
    }
}

impl TryFrom<&WireDictionary> for ConceptDictionary {
    type Error = Error;

    fn try_from(w: &WireDictionary) -> Result<Self> {
        ConceptDictionary::from_parts(
            w.space,
            w.names.clone(),
            w.read_methods.clone(),
            DenseMatrix::try_from(&w.matrix)?,
            w.normalized,
        )
    }
}

/// Error body returned with every non-2xx status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub category: ErrorCategory,
    pub message: String,
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        Self {
            code: e.code().to_string(),
            category: e.category(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub dictionaries: usize,
    pub embedding_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRequest {
    pub task: EditTask,
    #[serde(default)]
    pub dry_run: bool,
}

/// Either a validated result, or with `dry_run` the request that would be sent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct MiningReply<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub would_send: Vec<ChatRequest>,
}

pub type ParseReply = MiningReply<ConceptListResponse>;
pub type RewriteReply = MiningReply<EditTask>;
pub type StimuliReply = MiningReply<ConceptDataset>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimuliRequest {
    pub concepts: Vec<String>,
    #[serde(default)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedReply {
    pub model: String,
    pub matrix: WireMatrix,
    /// Encoder requests issued by the service so far.
    pub encoder_requests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildDictionaryRequest {
    pub dataset: ConceptDataset,
    #[serde(default)]
    pub method: ReadMethod,
    #[serde(default)]
    pub normalize: bool,
    /// Space tag for the result; a flat score space of the encoder width if absent.
    #[serde(default)]
    pub space: Option<LatentSpaceTag>,
    /// Column order; dataset order if absent. The edit's source concept goes first.
    #[serde(default)]
    pub order: Option<Vec<String>>,
    /// Append a null-concept column read from the empty string.
    #[serde(default)]
    pub include_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryReply {
    pub id: String,
    pub dictionary: WireDictionary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegisteredDictionary {
    pub id: String,
    pub concepts: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeRequest {
    pub dictionary_id: String,
    pub source: Vec<f32>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub report_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReply {
    pub decomposition: Decomposition,
    pub residual_norm: f64,
    pub report: Option<CoefficientReport>,
    /// Wall-clock time of the solve alone.
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantRequest {
    pub dictionary_id: String,
    pub decomposition: Decomposition,
    pub edit: EditRequest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRequest {
    pub dictionary_id: String,
    pub decomposition: Decomposition,
    pub edit: EditRequest,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReply {
    pub grid: Vec<f64>,
    pub vectors: Vec<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VecAddRequest {
    pub source: Vec<f32>,
    pub toward: ConceptVector,
    pub away_from: ConceptVector,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorReply {
    pub vector: Vec<f32>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::assemble;

    #[test]
    fn matrix_survives_bit_exact() {
        let m = DenseMatrix::new(2, 2, vec![1.0e-38, -0.0, f32::MAX, 0.1]).unwrap();
        let w = WireMatrix::from(&m);
        let json = serde_json::to_string(&w).unwrap();
        let back: WireMatrix = serde_json::from_str(&json).unwrap();
        let m2 = DenseMatrix::try_from(&back).unwrap();
        assert_eq!(m.to_le_bytes(), m2.to_le_bytes());
    }

    #[test]
    fn dictionary_round_trip_keeps_hash() {
        let cv = |name: &str, v: Vec<f32>| ConceptVector {
            name: name.into(),
            vector: v,
            read_method: ReadMethod::Pca,
            space: LatentSpaceTag::score(2),
        };
        let d = assemble(&[cv("a", vec![1.0, 2.0]), cv("b", vec![0.5, -1.0])], false).unwrap();
        let back = ConceptDictionary::try_from(&WireDictionary::from(&d)).unwrap();
        assert_eq!(back.content_hash(), d.content_hash());
        assert_eq!(back, d);
    }

    #[test]
    fn bad_payloads_are_schema_violations() {
        let w = WireMatrix {
            rows: 1,
            cols: 1,
            data: "!!".into(),
        };
        assert!(matches!(DenseMatrix::try_from(&w), Err(Error::SchemaViolation(_))));
        let w = WireMatrix {
            rows: 1,
            cols: 1,
            data: "AAA=".into(),
        };
        assert!(matches!(DenseMatrix::try_from(&w), Err(Error::SchemaViolation(_))));
    }
}
