// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse decomposition of a source latent and concept transplant.
//!
//! A source vector is split as `v = Dw* + r`. An edit swaps the source
//! concept's column of `D` for the target concept vector and re-synthesizes
//! `v' = D'w* + r`. The coefficients and the residual are reused verbatim,
//! never re-solved, so `v' − v = w*_s (d_target − d_source)`.

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::dictionary::{ConceptDictionary, ConceptVector, NULL_CONCEPT};
use crate::error::{Error, Result};
use crate::solver::{
    elastic_net_solve, ensure_finite, norm2, norm_inf, residual_f64, SolverConfig, SparseSolution,
};

pub const DEFAULT_REPORT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub sweeps_used: usize,
    pub converged: bool,
    pub objective: f64,
    pub lambda: f64,
    pub rho: f64,
}

/// `v = D·weights + residual` for one source vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub source: Vec<f32>,
    /// Content hash of the dictionary the weights refer to.
    pub dictionary_id: String,
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    pub residual: Vec<f32>,
    pub stats: SolverStats,
}

impl Decomposition {
    pub fn weight_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.weights[j])
    }

    pub fn residual_norm(&self) -> f64 {
        norm2(&self.residual)
    }

    /// Largest entry of `|D·weights + residual − source|`.
    pub fn reconstruction_error(&self, dict: &ConceptDictionary) -> Result<f64> {
        let fit = synthesize(dict, &self.weights, &self.residual, None)?;
        Ok(crate::solver::max_abs_diff(&fit, &self.source))
    }
}

/// `1e-5·(1 + ‖v‖∞)`, the rounding allowance for reconstruction identities.
pub fn identity_tolerance(v: &[f32]) -> f64 {
    1e-5 * (1.0 + norm_inf(v))
}

pub fn decompose(v: &[f32], dict: &ConceptDictionary, cfg: &SolverConfig) -> Result<Decomposition> {
    ensure_finite(v, "source vector")?;
    if v.len() != dict.space().flat_dim {
        return Err(Error::SpaceMismatch(format!(
            "source has {} values, dictionary space is {}-dimensional",
            v.len(),
            dict.space().flat_dim
        )));
    }
    let SparseSolution {
        weights,
        sweeps_used,
        converged,
        objective,
    } = elastic_net_solve(v, dict.matrix(), cfg)?;
    let residual = residual_f64(v, dict.matrix(), &weights)?
        .into_iter()
        .map(|x| x as f32)
        .collect();
    Ok(Decomposition {
        source: v.to_vec(),
        dictionary_id: dict.content_hash(),
        names: dict.names().to_vec(),
        weights,
        residual,
        stats: SolverStats {
            sweeps_used,
            converged,
            objective,
            lambda: cfg.lambda,
            rho: cfg.rho,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditKind {
    Replace,
    Add,
    Remove,
}

impl std::str::FromStr for EditKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "replace" => Ok(EditKind::Replace),
            "add" | "insert" => Ok(EditKind::Add),
            "remove" => Ok(EditKind::Remove),
            other => Err(Error::InvalidEdit(format!("unknown edit kind {other:?}"))),
        }
    }
}

/// A single replace/add/remove instruction with its target vector resolved.
///
/// For `Add`, `source_concept` is the counterpart proposed for the insertion
/// (e.g. "normal" for target "rusty"). For `Remove` the target is always the
/// null concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRequest {
    pub kind: EditKind,
    pub source_concept: String,
    pub target_concept: String,
    pub target_vector: ConceptVector,
}

impl EditRequest {
    pub fn replace(source_concept: impl Into<String>, target: ConceptVector) -> Self {
        Self {
            kind: EditKind::Replace,
            source_concept: source_concept.into(),
            target_concept: target.name.clone(),
            target_vector: target,
        }
    }

    pub fn add(counterpart: impl Into<String>, target: ConceptVector) -> Self {
        Self {
            kind: EditKind::Add,
            ..Self::replace(counterpart, target)
        }
    }

    pub fn remove(source_concept: impl Into<String>, null: ConceptVector) -> Self {
        Self {
            kind: EditKind::Remove,
            source_concept: source_concept.into(),
            target_concept: NULL_CONCEPT.to_string(),
            target_vector: null,
        }
    }

    /// Checks the request against `dict`, returning the source column index.
    pub fn validate(&self, dict: &ConceptDictionary) -> Result<usize> {
        let s = dict
            .index_of(&self.source_concept)
            .ok_or_else(|| Error::UnknownConcept(self.source_concept.clone()))?;
        let target = &self.target_vector;
        if target.space != dict.space() || target.vector.len() != dict.dim() {
            return Err(Error::SpaceMismatch(format!(
                "target {:?} does not live in the dictionary's space",
                target.name
            )));
        }
        ensure_finite(&target.vector, "target vector")?;
        match self.kind {
            EditKind::Remove => {
                if self.target_concept != NULL_CONCEPT || !target.is_null() {
                    return Err(Error::InvalidEdit(
                        "a removal must target the null concept".into(),
                    ));
                }
            }
            EditKind::Replace | EditKind::Add => {
                if self.target_concept.trim().is_empty() || self.target_concept == NULL_CONCEPT {
                    return Err(Error::InvalidEdit(format!(
                        "{:?} edits need a named target concept",
                        self.kind
                    )));
                }
                if norm2(&target.vector) == 0.0 {
                    return Err(Error::ZeroAtom(self.target_concept.clone()));
                }
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransplantOutput {
    pub vector: Vec<f32>,
    /// `w*_s`, the solved coefficient of the replaced column.
    pub source_weight: f64,
    pub warning: Option<String>,
}

fn check_provenance(dec: &Decomposition, dict: &ConceptDictionary) -> Result<()> {
    if dec.dictionary_id != dict.content_hash() {
        return Err(Error::InvalidEdit(
            "decomposition was computed against a different dictionary".into(),
        ));
    }
    if dec.weights.len() != dict.len() || dec.residual.len() != dict.dim() {
        return Err(Error::DimensionMismatch {
            expected: dict.len(),
            actual: dec.weights.len(),
        });
    }
    Ok(())
}

/// `D·w + r` in `f64`, with column `swap.0` optionally replaced by `swap.1`.
fn synthesize(
    dict: &ConceptDictionary,
    weights: &[f64],
    residual: &[f32],
    swap: Option<(usize, &[f32])>,
) -> Result<Vec<f32>> {
    let m = dict.matrix();
    if residual.len() != m.rows() || weights.len() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.rows(),
            actual: residual.len(),
        });
    }
    Ok(m
        .row_iter()
        .enumerate()
        .map(|(i, row)| {
            let mut acc = f64::from(residual[i]);
            for (j, (&a, &w)) in row.iter().zip(weights).enumerate() {
                let a = match swap {
                    Some((s, target)) if s == j => target[i],
                    _ => a,
                };
                acc += f64::from(a) * w;
            }
            acc as f32
        })
        .collect())
}

/// Re-synthesizes `v' = D'w* + r` with the source column swapped for the target.
///
/// When the source concept's coefficient is exactly zero the edit has no
/// estimated magnitude: the source is returned unchanged with a warning.
pub fn transplant(
    dec: &Decomposition,
    dict: &ConceptDictionary,
    edit: &EditRequest,
) -> Result<TransplantOutput> {
    check_provenance(dec, dict)?;
    let s = edit.validate(dict)?;
    let source_weight = dec.weights[s];
    if source_weight == 0.0 {
        let msg = format!(
            "concept {:?} has a zero coefficient; edit leaves the source unchanged",
            edit.source_concept
        );
        warn!("{msg}");
        return Ok(TransplantOutput {
            vector: dec.source.clone(),
            source_weight,
            warning: Some(msg),
        });
    }
    if edit.target_vector.vector == dict.column(s) {
        // D' = D
        return Ok(TransplantOutput {
            vector: dec.source.clone(),
            source_weight,
            warning: None,
        });
    }
    let vector = synthesize(
        dict,
        &dec.weights,
        &dec.residual,
        Some((s, &edit.target_vector.vector)),
    )?;
    Ok(TransplantOutput {
        vector,
        source_weight,
        warning: None,
    })
}

/// Fixed-strength baseline `v + w·(d_A − d_B)`.
pub fn vec_add(v: &[f32], d_a: &ConceptVector, d_b: &ConceptVector, w: f64) -> Result<Vec<f32>> {
    if d_a.space != d_b.space {
        return Err(Error::SpaceMismatch(format!(
            "{:?} and {:?} live in different spaces",
            d_a.name, d_b.name
        )));
    }
    if v.len() != d_a.vector.len() || v.len() != d_b.vector.len() {
        return Err(Error::SpaceMismatch(format!(
            "vector of length {} cannot be shifted along a {}-dimensional direction",
            v.len(),
            d_a.vector.len()
        )));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite { what: "edit strength" });
    }
    Ok(shift(v, &d_a.vector, &d_b.vector, w))
}

fn shift(v: &[f32], a: &[f32], b: &[f32], w: f64) -> Vec<f32> {
    v.iter()
        .zip(a.iter().zip(b))
        .map(|(&x, (&p, &q))| (f64::from(x) + w * (f64::from(p) - f64::from(q))) as f32)
        .collect()
}

/// One edited vector per strength `α`: `v + α·(d_target − d_source)`.
pub fn strength_sweep(
    dec: &Decomposition,
    dict: &ConceptDictionary,
    edit: &EditRequest,
    grid: &[f64],
) -> Result<Vec<Vec<f32>>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("strength grid"));
    }
    if grid.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite { what: "strength grid" });
    }
    check_provenance(dec, dict)?;
    let s = edit.validate(dict)?;
    let source_col = dict.column(s);
    Ok(grid
        .iter()
        .map(|&alpha| shift(&dec.source, &edit.target_vector.vector, &source_col, alpha))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub concept: String,
    pub coefficient: f64,
    pub magnitude: f64,
}

/// The `k` largest coefficients by magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub k: usize,
    pub entries: Vec<ReportEntry>,
}

/// Ranks coefficients by `|w|` descending; ties keep dictionary column order.
pub fn top_k_report(names: &[String], weights: &[f64], k: usize) -> Result<CoefficientReport> {
    let n = weights.len();
    if names.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: names.len(),
        });
    }
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| weights[b].abs().total_cmp(&weights[a].abs()));
    Ok(CoefficientReport {
        k,
        entries: order
            .into_iter()
            .take(k)
            .map(|j| ReportEntry {
                concept: names[j].clone(),
                coefficient: weights[j],
                magnitude: weights[j].abs(),
            })
            .collect(),
    })
}

impl Decomposition {
    pub fn report(&self, k: usize) -> Result<CoefficientReport> {
        top_k_report(&self.names, &self.weights, k)
    }
}
