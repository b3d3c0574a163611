//! Γ-graphs, compatible systems of open sets, and the numerical ping-pong
//! certifier.
//!
//! A Γ-graph labels each vertex `v` with a set `T_v` of group elements: a
//! single non-identity element, or a cofinite part of a peripheral coset
//! `gΓ_p`. A compatible system assigns an open set `U_v` to each vertex such
//! that `α · N(U_w, ε) ⊂ U_v` for every edge `(v, w)` and every `α ∈ T_v`.
//! The certifier checks these inclusions on samples with a positive margin,
//! checking cofinite families up to a truncation and disclosing the tail.

use thiserror::Error;

use crate::domains::DomainError;
use crate::linalg::LinalgError;
use crate::projgeom::ProjError;

mod certify;
mod graph;
mod paths;
mod presentation;
mod synth;

pub use certify::{
    check_divergence, default_epsilon, peripheral_stability_probe, verify_compatibility,
    CertifiedSystem, Certificate, CertifyOptions, CompatibleSystem, DivergenceRecord,
    DivergenceStatus, EdgeRecord, ProbeReport, ProbeRow, Separation, SeparationRecord, TailReport,
};
pub use graph::{Element, ElementTable, GammaGraph, Vertex, VertexLabel};
pub use paths::{enumerate_paths, GPath, PathEnumeration, PathStrategy};
pub use presentation::{Generator, GroupPresentation, Peripheral};
pub use synth::{
    synthesize_rp1, AngleArc, SynthesisParams, SynthesisResult, SynthesizedKind, SynthesizedVertex,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutomatonError {
    #[error("no domain assigned to vertex {vertex}")]
    MissingDomain { vertex: String },
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),
    #[error("system is not certified: {0}")]
    NotCertified(String),
    #[error("the unperturbed presentation does not certify")]
    BaseFails,
    #[error("synthesis failed at {clause} (boundary point angle {point})")]
    SynthesisFailed { clause: String, point: f64 },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Proj(#[from] ProjError),
}

pub type Result<T> = std::result::Result<T, AutomatonError>;

#[cfg(test)]
mod tests;
