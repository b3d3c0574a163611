use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AutomatonError, ElementTable, GammaGraph, GroupPresentation, Result, VertexLabel};
use crate::domains::{BoundarySample, ProperDomain};
use crate::linalg::Matrix;
use crate::projgeom::{fubini_study_vectors, norm};

/// Vertices whose closures are declared at least `delta` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub a: usize,
    pub b: usize,
    pub delta: f64,
}

/// One open set per vertex, plus declared separations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibleSystem {
    pub domains: Vec<ProperDomain>,
    pub separations: Vec<Separation>,
}

impl CompatibleSystem {
    pub fn new(domains: Vec<ProperDomain>) -> Self {
        Self {
            domains,
            separations: Vec::new(),
        }
    }

    pub fn with_separations(mut self, separations: Vec<Separation>) -> Self {
        self.separations = separations;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Points on `∂N(U_w, ε)` mapped per element (exact endpoints in `RP^1`).
    pub boundary_samples: usize,
    /// Interior points of `U_w` mapped per element.
    pub interior_samples: usize,
    /// Boundary points of `U_v` used for FS margins (unused in `RP^1`).
    pub margin_samples: usize,
    /// A record passes when its margin exceeds this.
    pub min_margin: f64,
    /// Candidate points per edge when looking for divergence witnesses.
    pub witness_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            boundary_samples: 256,
            interior_samples: 64,
            margin_samples: 2048,
            min_margin: 1e-9,
            witness_samples: 512,
        }
    }
}

impl CertifyOptions {
    pub fn scaled(&self, factor: usize) -> Self {
        Self {
            boundary_samples: self.boundary_samples * factor,
            interior_samples: self.interior_samples * factor,
            margin_samples: self.margin_samples * factor,
            witness_samples: self.witness_samples * factor,
            ..*self
        }
    }
}

/// Containment evidence for one element on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: usize,
    pub to: usize,
    pub element: String,
    pub exponent: Option<Vec<i64>>,
    pub shell: u64,
    /// Smallest signed FS distance from an image point to `∂U_from`.
    pub margin: f64,
    /// FS diameter of the image of `∂N(U_to, ε)`.
    pub image_diameter: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Monotone-tail heuristic for a truncated family on one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub from: usize,
    pub to: usize,
    pub shells: usize,
    pub shells_examined: usize,
    pub margins_nondecreasing: bool,
    pub diameters_nonincreasing: bool,
    pub pass: bool,
    pub disclosure: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRecord {
    pub a: usize,
    pub b: usize,
    pub delta: f64,
    pub distance: f64,
    pub pass: bool,
}

/// Verified nesting evidence for a Γ-graph and compatible system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub epsilon: f64,
    pub options: CertifyOptions,
    pub records: Vec<EdgeRecord>,
    pub tails: Vec<TailReport>,
    pub separations: Vec<SeparationRecord>,
    pub worst_margin: f64,
    /// Whether margins are exact (`RP^1`) or sampled.
    pub exact_margins: bool,
    pub pass: bool,
    pub first_failure: Option<String>,
}

impl Certificate {
    pub fn records_for_edge(&self, from: usize, to: usize) -> impl Iterator<Item = &EdgeRecord> {
        self.records.iter().filter(move |r| r.from == from && r.to == to)
    }
}

fn domain<'a>(graph: &GammaGraph, system: &'a CompatibleSystem, v: usize) -> Result<&'a ProperDomain> {
    system
        .domains
        .get(v)
        .ok_or_else(|| AutomatonError::MissingDomain {
            vertex: graph.vertices()[v].name.clone(),
        })
}

fn check_system(graph: &GammaGraph, system: &CompatibleSystem, pres: &GroupPresentation) -> Result<()> {
    for v in 0..graph.vertices().len() {
        let d = domain(graph, system, v)?;
        if d.dim() != pres.dim() {
            return Err(AutomatonError::InvalidGraph(format!(
                "domain of vertex {} has dimension {}, presentation has {}",
                graph.vertices()[v].name,
                d.dim(),
                pres.dim()
            )));
        }
    }
    Ok(())
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Sampled FS diameter of a point set (at most 64 points are compared).
pub(crate) fn fs_diameter(points: &[Vec<f64>]) -> f64 {
    let step = points.len().div_ceil(64).max(1);
    let pts: Vec<&Vec<f64>> = points.iter().step_by(step).collect();
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max(fubini_study_vectors(pts[i], pts[j]));
        }
    }
    best
}

/// Smallest FS distance between the closures of two domains (0 if they meet).
fn closure_distance(a: &ProperDomain, b: &ProperDomain, samples: usize) -> f64 {
    let pa = a.boundary_sample(samples).points;
    let pb = b.boundary_sample(samples).points;
    if pa.iter().any(|p| b.contains_vector(p)) || pb.iter().any(|p| a.contains_vector(p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for p in &pa {
        for q in &pb {
            best = best.min(fubini_study_vectors(p, q));
        }
    }
    best
}

/// `0.1 ×` the smallest positive FS gap between assigned domains, or `0.01`
/// when every pair touches.
pub fn default_epsilon(system: &CompatibleSystem) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..system.domains.len() {
        for j in i + 1..system.domains.len() {
            let d = closure_distance(&system.domains[i], &system.domains[j], 256);
            if d > 0.0 {
                best = best.min(d);
            }
        }
    }
    if best.is_finite() {
        0.1 * best
    } else {
        0.01
    }
}

struct VertexCache {
    margin_sample: BoundarySample,
    /// Points of `∂N(U, ε)` followed by interior points of `U`.
    probe_points: Vec<Vec<f64>>,
    boundary_count: usize,
}

fn build_caches(
    graph: &GammaGraph,
    system: &CompatibleSystem,
    opts: &CertifyOptions,
) -> Result<Vec<VertexCache>> {
    (0..graph.vertices().len())
        .map(|v| {
            let d = domain(graph, system, v)?;
            let mut probe_points: Vec<Vec<f64>> = d
                .neighborhood_boundary(graph.epsilon(), opts.boundary_samples)
                .into_iter()
                .map(unit)
                .collect();
            let boundary_count = probe_points.len();
            probe_points.extend(
                d.interior_points(opts.interior_samples)
                    .into_iter()
                    .map(|p| p.coords().to_vec()),
            );
            Ok(VertexCache {
                margin_sample: d.boundary_sample(opts.margin_samples),
                probe_points,
                boundary_count,
            })
        })
        .collect()
}

fn tail_report(from: usize, to: usize, records: &[&EdgeRecord]) -> TailReport {
    let mut shells: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for r in records {
        let e = shells.entry(r.shell).or_insert((f64::INFINITY, 0.0));
        e.0 = e.0.min(r.margin);
        e.1 = e.1.max(r.image_diameter);
    }
    let vals: Vec<(f64, f64)> = shells.values().copied().collect();
    let m = vals.len();
    let q = m.div_ceil(4).max(2).min(m);
    let tail = &vals[m - q..];
    let slack = 1e-12;
    let margins_nondecreasing = tail.windows(2).all(|w| w[1].0 >= w[0].0 - slack);
    let diameters_nonincreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1 + slack);
    let pass = m < 2 || (margins_nondecreasing && diameters_nonincreasing);
    let disclosure = if m < 2 {
        format!("only {m} shell(s) enumerated; elements beyond the truncation are unchecked")
    } else {
        format!(
            "elements beyond the truncation are not checked; over the last {q} of {m} shells the shell-minimum margins are {} and the shell-maximum image diameters are {}, a heuristic (not a proof) for the infinite tail",
            if margins_nondecreasing { "nondecreasing" } else { "NOT nondecreasing" },
            if diameters_nonincreasing { "nonincreasing" } else { "NOT nonincreasing" },
        )
    };
    TailReport {
        from,
        to,
        shells: m,
        shells_examined: q,
        margins_nondecreasing,
        diameters_nonincreasing,
        pass,
        disclosure,
    }
}

/// Checks `ρ(α) · N(U_w, ε) ⊂ U_v` on samples for every edge `(v, w)` and
/// every (truncated) `α ∈ T_v`.
pub fn verify_compatibility(
    graph: &GammaGraph,
    system: &CompatibleSystem,
    pres: &GroupPresentation,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    check_system(graph, system, pres)?;
    let table = graph.element_table(pres)?;
    verify_with_table(graph, system, pres, &table, opts)
}

pub(crate) fn verify_with_table(
    graph: &GammaGraph,
    system: &CompatibleSystem,
    pres: &GroupPresentation,
    table: &ElementTable,
    opts: &CertifyOptions,
) -> Result<Certificate> {
    let caches = build_caches(graph, system, opts)?;
    let names = pres.names();
    let tasks: Vec<(usize, usize, usize)> = graph
        .edges()
        .iter()
        .flat_map(|&(v, w)| (0..table.per_vertex[v].len()).map(move |k| (v, w, k)))
        .collect();
    let records: Vec<EdgeRecord> = tasks
        .par_iter()
        .map(|&(v, w, k)| {
            let el = &table.per_vertex[v][k];
            let target = &system.domains[v];
            let cache = &caches[w];
            let images: Vec<Vec<f64>> = cache
                .probe_points
                .iter()
                .map(|p| unit(el.matrix.mul_vec(p)))
                .collect();
            let margin = images
                .iter()
                .map(|x| target.signed_margin(x, &caches[v].margin_sample))
                .fold(f64::INFINITY, f64::min);
            let image_diameter = fs_diameter(&images[..cache.boundary_count]);
            EdgeRecord {
                from: v,
                to: w,
                element: el.word.display(&names),
                exponent: el.exponent.clone(),
                shell: el.shell,
                margin,
                image_diameter,
                samples: images.len(),
                pass: margin > opts.min_margin,
            }
        })
        .collect();

    let mut tails = Vec::new();
    for &(v, w) in graph.edges() {
        if matches!(graph.vertices()[v].label, VertexLabel::ParabolicFamily { .. }) {
            let recs: Vec<&EdgeRecord> = records.iter().filter(|r| r.from == v && r.to == w).collect();
            tails.push(tail_report(v, w, &recs));
        }
    }

    let separations: Vec<SeparationRecord> = system
        .separations
        .iter()
        .map(|s| {
            let distance = match (system.domains.get(s.a), system.domains.get(s.b)) {
                (Some(a), Some(b)) => closure_distance(a, b, opts.boundary_samples),
                _ => 0.0,
            };
            SeparationRecord {
                a: s.a,
                b: s.b,
                delta: s.delta,
                distance,
                pass: distance >= s.delta,
            }
        })
        .collect();

    let vname = |i: usize| graph.vertices()[i].name.clone();
    let first_failure = records
        .iter()
        .find(|r| !r.pass)
        .map(|r| {
            format!(
                "edge {} -> {}, element {}: margin {:.6e}",
                vname(r.from),
                vname(r.to),
                r.element,
                r.margin
            )
        })
        .or_else(|| {
            tails.iter().find(|t| !t.pass).map(|t| {
                format!("tail heuristic on edge {} -> {}: {}", vname(t.from), vname(t.to), t.disclosure)
            })
        })
        .or_else(|| {
            separations.iter().find(|s| !s.pass).map(|s| {
                format!(
                    "separation {} / {}: distance {:.6e} < delta {:.6e}",
                    vname(s.a),
                    vname(s.b),
                    s.distance,
                    s.delta
                )
            })
        });
    let worst_margin = records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(Certificate {
        epsilon: graph.epsilon(),
        options: *opts,
        exact_margins: pres.dim() == 2,
        pass: first_failure.is_none() && !records.is_empty(),
        first_failure,
        records,
        tails,
        separations,
        worst_margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DivergenceStatus {
    /// A point of `U_v` outside `ρ(α) · closure(U_w)`.
    Witnessed(Vec<f64>),
    NoWitnessFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRecord {
    pub from: usize,
    pub to: usize,
    pub element: String,
    pub status: DivergenceStatus,
}

/// Looks, for every edge and element, for a point of `U_v` that is not in
/// `ρ(α) · closure(U_w)`, witnessing that the inclusion is proper.
pub fn check_divergence(
    graph: &GammaGraph,
    system: &CompatibleSystem,
    pres: &GroupPresentation,
    opts: &CertifyOptions,
) -> Result<Vec<DivergenceRecord>> {
    check_system(graph, system, pres)?;
    let table = graph.element_table(pres)?;
    let names = pres.names();
    let candidates: Vec<Vec<Vec<f64>>> = system
        .domains
        .iter()
        .map(|d| {
            d.interior_points(opts.witness_samples)
                .into_iter()
                .map(|p| p.coords().to_vec())
                .collect()
        })
        .collect();
    let samples: Vec<BoundarySample> = system
        .domains
        .iter()
        .map(|d| d.boundary_sample(opts.margin_samples))
        .collect();
    let tasks: Vec<(usize, usize, usize)> = graph
        .edges()
        .iter()
        .flat_map(|&(v, w)| (0..table.per_vertex[v].len()).map(move |k| (v, w, k)))
        .collect();
    tasks
        .par_iter()
        .map(|&(v, w, k)| {
            let el = &table.per_vertex[v][k];
            let inv: Matrix = el.matrix.inverse()?;
            let source = &system.domains[w];
            let witness = candidates[v].iter().find(|x| {
                let y = unit(inv.mul_vec(x));
                // Strictly outside the closure of U_w.
                source.signed_margin(&y, &samples[w]) < -1e-9
            });
            Ok(DivergenceRecord {
                from: v,
                to: w,
                element: el.word.display(&names),
                status: match witness {
                    Some(x) => DivergenceStatus::Witnessed(x.clone()),
                    None => DivergenceStatus::NoWitnessFound,
                },
            })
        })
        .collect()
}

/// A graph, system and presentation together with a passing certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedSystem {
    pub graph: GammaGraph,
    pub system: CompatibleSystem,
    pub presentation: GroupPresentation,
    pub table: ElementTable,
    /// `None` when certification was skipped on request.
    pub certificate: Option<Certificate>,
}

impl CertifiedSystem {
    /// Runs the certifier and keeps the result only when it passes.
    pub fn certify(
        graph: GammaGraph,
        system: CompatibleSystem,
        presentation: GroupPresentation,
        opts: &CertifyOptions,
    ) -> Result<Self> {
        check_system(&graph, &system, &presentation)?;
        let table = graph.element_table(&presentation)?;
        let cert = verify_with_table(&graph, &system, &presentation, &table, opts)?;
        if !cert.pass {
            return Err(AutomatonError::NotCertified(
                cert.first_failure.unwrap_or_else(|| "no records".into()),
            ));
        }
        Ok(Self {
            graph,
            system,
            presentation,
            table,
            certificate: Some(cert),
        })
    }

    /// Bundles the parts without certifying; downstream results then carry
    /// no certification guarantee.
    pub fn uncertified(graph: GammaGraph, system: CompatibleSystem, presentation: GroupPresentation) -> Result<Self> {
        check_system(&graph, &system, &presentation)?;
        let table = graph.element_table(&presentation)?;
        Ok(Self {
            graph,
            system,
            presentation,
            table,
            certificate: None,
        })
    }

    pub fn is_certified(&self) -> bool {
        self.certificate.as_ref().map_or(false, |c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub t: f64,
    pub pass: bool,
    pub worst_margin: f64,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub first_failing_t: Option<f64>,
    /// Per edge `from -> to`, the first grid value at which it fails.
    pub first_failing_t_per_edge: Vec<(String, Option<f64>)>,
}

/// Re-certifies the same graph and domains along a deformation `t ↦ ρ_t`.
pub fn peripheral_stability_probe(
    family: &dyn Fn(f64) -> Result<GroupPresentation>,
    grid: &[f64],
    graph: &GammaGraph,
    system: &CompatibleSystem,
    opts: &CertifyOptions,
) -> Result<ProbeReport> {
    let base = verify_compatibility(graph, system, &family(0.0)?, opts)?;
    if !base.pass {
        return Err(AutomatonError::BaseFails);
    }
    let vname = |i: usize| graph.vertices()[i].name.clone();
    let mut per_edge: Vec<(String, Option<f64>)> = graph
        .edges()
        .iter()
        .map(|&(v, w)| (format!("{} -> {}", vname(v), vname(w)), None))
        .collect();
    let mut rows = Vec::with_capacity(grid.len());
    for &t in grid {
        let cert = verify_compatibility(graph, system, &family(t)?, opts)?;
        for (i, &(v, w)) in graph.edges().iter().enumerate() {
            if per_edge[i].1.is_none() && cert.records_for_edge(v, w).any(|r| !r.pass) {
                per_edge[i].1 = Some(t);
            }
            let tail_fail = cert.tails.iter().any(|r| r.from == v && r.to == w && !r.pass);
            if per_edge[i].1.is_none() && tail_fail {
                per_edge[i].1 = Some(t);
            }
        }
        rows.push(ProbeRow {
            t,
            pass: cert.pass,
            worst_margin: cert.worst_margin,
            first_failure: cert.first_failure.clone(),
        });
    }
    Ok(ProbeReport {
        first_failing_t: rows.iter().find(|r| !r.pass).map(|r| r.t),
        rows,
        first_failing_t_per_edge: per_edge,
    })
}
