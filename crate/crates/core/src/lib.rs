//! Certified projective dynamics of discrete linear groups: projective
//! geometry, proper domains and their Hilbert metrics, ping-pong automata,
//! limit sets and contraction rates.

pub mod automaton;
pub mod conedoff;
pub mod domains;
pub mod dynamics;
pub mod linalg;
pub mod projgeom;
pub mod qmc;

pub use automaton::{
    Certificate, CertifiedSystem, CertifyOptions, CompatibleSystem, GPath, GammaGraph, GroupPresentation,
    VertexLabel,
};
pub use conedoff::Word;
pub use domains::{MetricValue, ProperDomain};
pub use dynamics::{DynamicsOptions, LimitSetCloud, PathResult, RateReport};
pub use linalg::{Matrix, SingularDecomposition};
pub use projgeom::{ChartFrame, Flag, ProjHyperplane, ProjPoint};
