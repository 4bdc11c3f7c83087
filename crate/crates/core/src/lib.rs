// SPDX-License-Identifier: MIT OR Apache-2.0

//! Concept-transplant engine for latent-space editing.
//!
//! A source latent `v` is decomposed over a dictionary of concept vectors as
//! `v = D·w + r` with a sparse elastic-net solve. Swapping one column of `D`
//! for a target concept and re-synthesizing gives the edited latent, with the
//! edit strength taken from the solved coefficient.

pub mod config;
pub mod dictionary;
pub mod error;
pub mod mining;
pub mod solver;
pub mod store;
pub mod transplant;
pub mod wire;

pub use dictionary::{
    assemble, null_concept, rep_read, Concept, ConceptDictionary, ConceptVector, LatentSpaceTag,
    ReadMethod, SpaceKind, NULL_CONCEPT,
};
pub use error::{Error, ErrorCategory, Result};
pub use solver::{elastic_net_solve, DenseMatrix, SolverConfig, SparseSolution};
pub use transplant::{
    decompose, strength_sweep, top_k_report, transplant, vec_add, CoefficientReport,
    Decomposition, EditKind, EditRequest, ReportEntry, TransplantOutput, DEFAULT_REPORT_K,
};
