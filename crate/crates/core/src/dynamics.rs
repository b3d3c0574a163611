//! Contracting G-paths: nested-image limits, shrink rates, limit-set clouds,
//! attracting data from singular value gaps, and equivariance checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::{
    enumerate_paths, AutomatonError, CertifiedSystem, GPath, PathStrategy, VertexLabel,
};
use crate::conedoff::Word;
use crate::domains::{diameter, DiameterSet, DomainError, ProperDomain};
use crate::linalg::{
    divergence_flag, exterior_power, svd, wedge, LinalgError, Matrix, DEFAULT_DIVERGENCE_THRESHOLD,
};
use crate::projgeom::{fubini_study_vectors, norm, opposition_margin, ProjError, ProjHyperplane, ProjPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("system is not certified")]
    NotCertified,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("exponential fit rejected: R^2 = {r_squared} (slope {slope})")]
    FitRejected { r_squared: f64, slope: f64 },
    #[error("singular value gap {gap} is below the threshold {threshold}")]
    GapTooSmall { gap: f64, threshold: f64 },
    #[error("no G-path through the generator found: {0}")]
    PathNotFound(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Proj(#[from] ProjError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsOptions {
    /// Boundary points of the next domain mapped per depth.
    pub boundary_samples: usize,
    /// Budget for sampled `C_Ω` values (dimension above 2 or unions).
    pub metric_budget: usize,
    /// A limit counts as converged once its FS radius bound is below this.
    pub tol: f64,
    /// Gaps are `log(σ_k / σ_{k+1})`.
    pub k: usize,
    /// Floating-point floor added to radius bounds when comparing limits.
    pub numeric_floor: f64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            boundary_samples: 64,
            metric_budget: 256,
            tol: 1e-9,
            k: 1,
            numeric_floor: 1e-12,
        }
    }
}

/// Limit data of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub path: GPath,
    /// Vertex names joined by `.`.
    pub code: String,
    pub limit: ProjPoint,
    /// `diam_{C_{U_{v_1}}}(α₁⋯α_n · U_{v_{n+1}})` for `n = 1..=depth`.
    pub diameters: Vec<f64>,
    /// `log(σ_k/σ_{k+1})(α₁⋯α_n)` for `n = 1..=depth`.
    pub gaps: Vec<f64>,
    /// FS radius of the last image around the limit.
    pub radius: f64,
    pub converged: bool,
}

/// Product `α₁⋯α_n` kept at unit sup norm with its log-determinant.
#[derive(Debug, Clone)]
struct Prefix {
    m: Matrix,
    log_det: f64,
    count: usize,
}

impl Prefix {
    fn new(d: usize) -> Self {
        Self {
            m: Matrix::identity(d),
            log_det: 0.0,
            count: 0,
        }
    }

    fn push(&mut self, a: &Matrix) -> Result<()> {
        let d = a.dim() as f64;
        self.m = self.m.mul(a)?;
        self.log_det += a.det().abs().ln();
        self.count += 1;
        if self.count % 8 == 0 || self.m.max_abs() > 1e100 || self.m.max_abs() < 1e-100 {
            let (m, s) = self.m.sup_normalize();
            self.m = m;
            self.log_det -= d * s.ln();
        }
        Ok(())
    }
}

fn det2(a: &[f64], b: &[f64]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// `C_Ω` between `P u` and `P v` for an arc `Ω` of `RP^1`, with
/// `det[Pu, Pv] = det P · det[u, v]` carried in log form so that tiny
/// images keep full relative accuracy.
fn arc_metric(omega: (f64, f64), prefix: &Prefix, u: &[f64], v: &[f64]) -> f64 {
    let (start, width) = omega;
    let a = [start.cos(), start.sin()];
    let b = [(start + width).cos(), (start + width).sin()];
    let x = prefix.m.mul_vec(u);
    let y = prefix.m.mul_vec(v);
    let offset = |p: &[f64]| (p[1].atan2(p[0]) - start).rem_euclid(std::f64::consts::PI);
    let (x, y) = if offset(&x) <= offset(&y) { (x, y) } else { (y, x) };
    let log_r = prefix.log_det + det2(u, v).abs().ln() + det2(&a, &b).abs().ln()
        - det2(&a, &x).abs().ln()
        - det2(&y, &b).abs().ln();
    log_r.exp().ln_1p()
}

/// FS distance between `P u` and `P v`, accurate for tiny separations in
/// dimension 2.
fn image_fs(prefix: &Prefix, u: &[f64], v: &[f64]) -> f64 {
    let x = prefix.m.mul_vec(u);
    let y = prefix.m.mul_vec(v);
    if u.len() == 2 {
        let s = (prefix.log_det + det2(u, v).abs().ln() - norm(&x).ln() - norm(&y).ln()).exp();
        let c = crate::projgeom::dot(&x, &y).abs() / (norm(&x) * norm(&y));
        s.atan2(c)
    } else {
        fubini_study_vectors(&x, &y)
    }
}

fn fs_diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.max(fubini_study_vectors(&points[i], &points[j]));
        }
    }
    best
}

fn path_code(sys: &CertifiedSystem, path: &GPath) -> String {
    let names: Vec<&str> = path
        .vertices
        .iter()
        .map(|&v| sys.graph.vertices()[v].name.as_str())
        .collect();
    names.join(".")
}

fn check_path(sys: &CertifiedSystem, path: &GPath, depth: usize) -> Result<()> {
    if depth < 2 {
        return Err(DynamicsError::InvalidPath("depth must be at least 2".into()));
    }
    if path.len() < depth {
        return Err(DynamicsError::InvalidPath(format!(
            "path has length {} but depth {depth} was requested",
            path.len()
        )));
    }
    for w in path.vertices.windows(2) {
        if !sys.graph.edges().contains(&(w[0], w[1])) {
            return Err(DynamicsError::InvalidPath(format!("{} -> {} is not an edge", w[0], w[1])));
        }
    }
    for (&v, &k) in path.vertices.iter().zip(&path.elements) {
        if k >= sys.table.per_vertex[v].len() {
            return Err(DynamicsError::InvalidPath(format!("element {k} missing at vertex {v}")));
        }
    }
    Ok(())
}

/// Nested images `α₁⋯α_n · U_{v_{n+1}}` of a certified path and the limit
/// they shrink to.
pub fn contracting_limit(
    sys: &CertifiedSystem,
    path: &GPath,
    depth: usize,
    opts: &DynamicsOptions,
) -> Result<PathResult> {
    if !sys.is_certified() {
        return Err(DynamicsError::NotCertified);
    }
    contracting_limit_unchecked(sys, path, depth, opts)
}

/// As [`contracting_limit`] without requiring a certificate.
pub fn contracting_limit_unchecked(sys: &CertifiedSystem, path: &GPath, depth: usize, opts: &DynamicsOptions) -> Result<PathResult> {
    check_path(sys, path, depth)?;
    let d = sys.presentation.dim();
    let next_vertex = |n: usize| -> usize {
        if n < path.len() {
            path.vertices[n]
        } else {
            path.tail_vertex(&sys.graph)
        }
    };
    let outer = &sys.system.domains[path.vertices[0]];
    let outer_arc = match outer.arcs() {
        Some(a) if a.len() == 1 => Some(a[0]),
        _ => None,
    };
    let mut prefix = Prefix::new(d);
    let mut diameters = Vec::with_capacity(depth);
    let mut gaps = Vec::with_capacity(depth);
    let mut last: Option<(Vec<f64>, Vec<Vec<f64>>)> = None;
    for n in 1..=depth {
        let v = path.vertices[n - 1];
        prefix.push(&sys.table.per_vertex[v][path.elements[n - 1]].matrix)?;
        let w = next_vertex(n);
        let dom = &sys.system.domains[w];
        let center = dom.center().coords().to_vec();
        let boundary: Vec<Vec<f64>> = dom
            .boundary_sample(opts.boundary_samples)
            .points
            .into_iter()
            .collect();
        let diam = match (outer_arc, dom.arcs()) {
            (Some(omega), Some(inner)) if inner.len() == 1 => {
                let (s, wd) = inner[0];
                arc_metric(omega, &prefix, &[s.cos(), s.sin()], &[(s + wd).cos(), (s + wd).sin()])
            }
            _ => {
                let mut pts: Vec<ProjPoint> = vec![ProjPoint::new(&prefix.m.mul_vec(&center))?];
                for b in &boundary {
                    pts.push(ProjPoint::new(&prefix.m.mul_vec(b))?);
                }
                diameter(outer, DiameterSet::Points(&pts), opts.metric_budget)?.value
            }
        };
        diameters.push(diam);
        gaps.push(gap_of(&prefix, opts.k)?);
        if n == depth {
            last = Some((center, boundary));
        }
    }
    let (center, boundary) = last.expect("depth >= 2");
    let limit = ProjPoint::new(&unit(prefix.m.mul_vec(&center)))?;
    let radius = boundary
        .iter()
        .map(|b| image_fs(&prefix, &center, b))
        .fold(0.0, f64::max);
    Ok(PathResult {
        code: path_code(sys, path),
        path: path.truncated(depth),
        limit,
        diameters,
        gaps,
        radius,
        converged: radius < opts.tol,
    })
}

fn gap_of(prefix: &Prefix, k: usize) -> Result<f64> {
    let d = prefix.m.dim();
    if k == 0 || k >= d {
        return Err(LinalgError::BadDegree { k, dim: d }.into());
    }
    if d == 2 {
        // σ₁ from the Frobenius norm and σ₁σ₂ = |det|; σ₂ keeps its relative
        // accuracy through the tracked log-determinant.
        let f2 = prefix.m.frobenius().powi(2);
        let det2 = (2.0 * prefix.log_det).exp();
        let s1sq = (f2 + (f2 * f2 - 4.0 * det2).max(0.0).sqrt()) / 2.0;
        return Ok(s1sq.ln() - prefix.log_det);
    }
    Ok(svd(&prefix.m)?.log_gap(k))
}

/// `diam ≤ λ₁ · exp(−λ₂ · n)` fitted on log-diameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r_squared: f64,
    pub depth_range: (usize, usize),
    pub points: usize,
    pub paths: usize,
}

pub const MIN_R_SQUARED: f64 = 0.98;

/// Least-squares fit of `log diam` against depth over `range` (inclusive),
/// pooled over all results.
pub fn fit_rates(results: &[PathResult], range: (usize, usize)) -> Result<RateReport> {
    let (lo, hi) = range;
    if lo < 1 || hi < lo + 4 {
        return Err(DynamicsError::InsufficientData(format!(
            "depth range {lo}..={hi} has fewer than 5 depths"
        )));
    }
    let mut pts = Vec::new();
    for r in results {
        if r.diameters.len() < hi {
            return Err(DynamicsError::InsufficientData(format!(
                "path {} has {} depths, need {hi}",
                r.code,
                r.diameters.len()
            )));
        }
        for n in lo..=hi {
            let dval = r.diameters[n - 1];
            if dval > 0.0 && dval.is_finite() {
                pts.push((n as f64, dval.ln()));
            }
        }
    }
    if pts.len() < 5 {
        return Err(DynamicsError::InsufficientData("fewer than 5 positive diameters".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    if !(r_squared >= MIN_R_SQUARED) || !(slope < 0.0) {
        return Err(DynamicsError::FitRejected { r_squared, slope });
    }
    let excess = pts
        .iter()
        .map(|p| p.1 - intercept - slope * p.0)
        .fold(0.0, f64::max);
    Ok(RateReport {
        lambda1: (intercept + excess).exp(),
        lambda2: -slope,
        r_squared,
        depth_range: range,
        points: pts.len(),
        paths: results.len(),
    })
}

/// Computes limits of `paths` to depth `range.1` and fits the shrink rate.
pub fn shrink_rates(
    sys: &CertifiedSystem,
    paths: &[GPath],
    range: (usize, usize),
    opts: &DynamicsOptions,
) -> Result<RateReport> {
    let results = paths
        .par_iter()
        .map(|p| contracting_limit(sys, p, range.1, opts))
        .collect::<Result<Vec<_>>>()?;
    fit_rates(&results, range)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub point: ProjPoint,
    pub code: String,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSetCloud {
    pub points: Vec<CloudPoint>,
    pub depth: usize,
    pub count: usize,
    pub seed: u64,
}

/// Limits of `count` random certified paths of length `depth`, in path
/// order; deterministic per seed.
pub fn limit_set_sample(
    sys: &CertifiedSystem,
    depth: usize,
    count: usize,
    seed: u64,
    opts: &DynamicsOptions,
) -> Result<LimitSetCloud> {
    if !sys.is_certified() {
        return Err(DynamicsError::NotCertified);
    }
    limit_set_sample_unchecked(sys, depth, count, seed, opts)
}

/// As [`limit_set_sample`] without requiring a certificate.
pub fn limit_set_sample_unchecked(
    sys: &CertifiedSystem,
    depth: usize,
    count: usize,
    seed: u64,
    opts: &DynamicsOptions,
) -> Result<LimitSetCloud> {
    let paths = enumerate_paths(&sys.graph, &sys.table, depth, &PathStrategy::Random { seed, count })?.paths;
    let points = paths
        .par_iter()
        .map(|p| {
            contracting_limit_unchecked(sys, p, depth, opts).map(|r| CloudPoint {
                point: r.limit,
                code: r.code,
                radius: r.radius,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitSetCloud {
        points,
        depth,
        count,
        seed,
    })
}

/// Attracting `k`-plane and repelling `(d−k)`-plane of a matrix with a
/// singular value gap at `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractingData {
    pub k: usize,
    pub gap: f64,
    /// Top `k` left singular vectors.
    pub attracting_basis: Vec<Vec<f64>>,
    /// Their wedge, a point of `P(Λ^k R^d)`.
    pub attracting: ProjPoint,
    /// Bottom `d − k` right singular vectors.
    pub repelling_basis: Vec<Vec<f64>>,
    /// Their wedge, a point of `P(Λ^{d−k} R^d)`.
    pub repelling: ProjPoint,
    /// For `k = 1`, the repelling hyperplane `v₁^⊥`.
    pub repelling_hyperplane: Option<ProjHyperplane>,
}

pub fn attracting_data(m: &Matrix, k: usize, threshold: f64) -> Result<AttractingData> {
    let d = m.dim();
    if k == 0 || k >= d {
        return Err(LinalgError::BadDegree { k, dim: d }.into());
    }
    let s = svd(m)?;
    let gap = s.log_gap(k);
    if !(gap > threshold) {
        return Err(DynamicsError::GapTooSmall { gap, threshold });
    }
    let attracting_basis: Vec<Vec<f64>> = (0..k).map(|j| s.left_vector(j)).collect();
    let repelling_basis: Vec<Vec<f64>> = (k..d).map(|j| s.right_vector(j)).collect();
    let repelling_hyperplane = if k == 1 {
        Some(ProjHyperplane::new(&s.right_vector(0))?)
    } else {
        None
    };
    Ok(AttractingData {
        k,
        gap,
        attracting: ProjPoint::new(&wedge(&attracting_basis))?,
        repelling: ProjPoint::new(&wedge(&repelling_basis))?,
        attracting_basis,
        repelling_basis,
        repelling_hyperplane,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionCheck {
    Pass,
    Fail,
    PremiseNotMet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    PDivergent,
    NotPDivergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGlobalReport {
    pub k: usize,
    /// FS diameters of `g_n · U` (sampled).
    pub diameters: Vec<f64>,
    pub gaps: Vec<f64>,
    pub contracts: bool,
    pub divergent: bool,
    /// Largest FS spread of the attracting points over the last quartile.
    pub limit_spread: f64,
    /// Smallest FS margin of `U` from the last repelling hyperplane (`k = 1`).
    pub repelling_margin: Option<f64>,
    pub first_small_diameter: Option<usize>,
    pub first_large_gap: Option<usize>,
    /// Contraction of `U` implies P-divergence with a unique limit.
    pub contraction_implies_divergence: DirectionCheck,
    /// P-divergence with stable attracting data implies contraction of `U`.
    pub divergence_implies_contraction: DirectionCheck,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalGlobalOptions {
    pub diameter_tol: f64,
    pub gap_threshold: f64,
    pub limit_tol: f64,
    pub samples: usize,
}

impl Default for LocalGlobalOptions {
    fn default() -> Self {
        Self {
            diameter_tol: 1e-3,
            gap_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            limit_tol: 1e-2,
            samples: 64,
        }
    }
}

/// Compares "`g_n · U` shrinks to a point" with "`g_n` is P_k-divergent" in
/// both directions on a finite sequence.
pub fn local_to_global_check(
    seq: &[Matrix],
    u: &ProperDomain,
    k: usize,
    opts: &LocalGlobalOptions,
) -> Result<LocalGlobalReport> {
    let first = seq
        .first()
        .ok_or_else(|| DynamicsError::InsufficientData("empty sequence".into()))?;
    let d = first.dim();
    if k == 0 || k >= d {
        return Err(LinalgError::BadDegree { k, dim: d }.into());
    }
    let mut pts: Vec<Vec<f64>> = vec![u.center().coords().to_vec()];
    pts.extend(u.boundary_sample(opts.samples).points);
    let results: Vec<(f64, f64, Option<Vec<f64>>, Option<Vec<f64>>)> = seq
        .par_iter()
        .map(|g| {
            let imgs: Vec<Vec<f64>> = pts.iter().map(|p| unit(g.mul_vec(p))).collect();
            let diam = fs_diameter(&imgs);
            let s = svd(g)?;
            let gap = s.log_gap(k);
            let (att, rep) = if gap > opts.gap_threshold {
                let ab: Vec<Vec<f64>> = (0..k).map(|j| s.left_vector(j)).collect();
                (Some(unit(wedge(&ab))), Some(s.right_vector(0)))
            } else {
                (None, None)
            };
            Ok((diam, gap, att, rep))
        })
        .collect::<Result<Vec<_>>>()?;
    let diameters: Vec<f64> = results.iter().map(|r| r.0).collect();
    let gaps: Vec<f64> = results.iter().map(|r| r.1).collect();
    let n = seq.len();
    let start = n - (n / 4).max(2).min(n);
    let tail = &results[start..];
    let contracts = tail.iter().all(|r| r.0 < opts.diameter_tol);
    let divergent = divergence_flag(&gaps, opts.gap_threshold);
    let atts: Vec<&Vec<f64>> = tail.iter().filter_map(|r| r.2.as_ref()).collect();
    let stable = atts.len() == tail.len();
    let mut spread = 0.0f64;
    for i in 0..atts.len() {
        for j in i + 1..atts.len() {
            spread = spread.max(fubini_study_vectors(atts[i], atts[j]));
        }
    }
    let unique_limit = stable && spread < opts.limit_tol;
    let repelling_margin = if k == 1 {
        match tail.last().and_then(|r| r.3.as_ref()) {
            Some(v1) => {
                let h = ProjHyperplane::new(v1)?;
                let mut worst = f64::INFINITY;
                for p in &pts {
                    worst = worst.min(opposition_margin(&ProjPoint::new(p)?, &h));
                }
                Some(worst)
            }
            None => None,
        }
    } else {
        None
    };
    let contraction_implies_divergence = if contracts {
        if divergent && unique_limit {
            DirectionCheck::Pass
        } else {
            DirectionCheck::Fail
        }
    } else {
        DirectionCheck::PremiseNotMet
    };
    let avoids = repelling_margin.map_or(false, |m| m > 1e-6);
    let divergence_implies_contraction = if divergent && unique_limit && avoids {
        if contracts {
            DirectionCheck::Pass
        } else {
            DirectionCheck::Fail
        }
    } else {
        DirectionCheck::PremiseNotMet
    };
    let verdict = match (contracts, divergent) {
        (_, true) => Verdict::PDivergent,
        (false, false) => Verdict::NotPDivergent,
        (true, false) => Verdict::Inconclusive,
    };
    Ok(LocalGlobalReport {
        k,
        diameters: diameters.clone(),
        gaps: gaps.clone(),
        contracts,
        divergent,
        limit_spread: spread,
        repelling_margin,
        first_small_diameter: diameters.iter().position(|&x| x < opts.diameter_tol).map(|i| i + 1),
        first_large_gap: gaps.iter().position(|&x| x > opts.gap_threshold).map(|i| i + 1),
        contraction_implies_divergence,
        divergence_implies_contraction,
        verdict,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceSample {
    pub code: String,
    pub shifted_code: String,
    pub defect: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub samples: Vec<EquivarianceSample>,
    pub max_defect: f64,
    pub pass: bool,
}

/// Finds a G-path limiting to `s · limit(path)` by prefix surgery: the first
/// `j ≤ 3` such that `ρ(s) α₁⋯α_j` is an element of some `T_v` with an edge
/// `(v, v_{j+1})`.
fn shifted_path(sys: &CertifiedSystem, s: &Matrix, path: &GPath) -> Option<GPath> {
    let mut e = s.clone();
    for j in 0..=3.min(path.len() - 1) {
        if j > 0 {
            e = e.mul(&sys.table.per_vertex[path.vertices[j - 1]][path.elements[j - 1]].matrix).ok()?;
        }
        let next = path.vertices[j];
        for (v, els) in sys.table.per_vertex.iter().enumerate() {
            if !sys.graph.edges().contains(&(v, next)) {
                continue;
            }
            if let Some(k) = els.iter().position(|el| el.matrix.projective_diff(&e) <= 1e-9) {
                let mut vertices = vec![v];
                let mut elements = vec![k];
                vertices.extend_from_slice(&path.vertices[j..]);
                elements.extend_from_slice(&path.elements[j..]);
                return Some(GPath { vertices, elements });
            }
        }
    }
    None
}

/// Compares `ψ(s·z)` with `s_image · ψ(z)` over the given paths, where
/// `ψ(s·z)` comes from a path found by prefix surgery with `ρ(s)`.
pub fn equivariance_check_with(
    sys: &CertifiedSystem,
    s: &Word,
    s_image: &Matrix,
    paths: &[GPath],
    depth: usize,
    opts: &DynamicsOptions,
) -> Result<EquivarianceReport> {
    if !sys.is_certified() {
        return Err(DynamicsError::NotCertified);
    }
    let rho_s = sys.presentation.evaluate(s)?;
    let samples = paths
        .par_iter()
        .map(|p| {
            let base = contracting_limit_unchecked(sys, p, depth, opts)?;
            let shifted = shifted_path(sys, &rho_s, p).ok_or_else(|| {
                DynamicsError::PathNotFound(format!("{} from {}", sys.presentation.display_word(s), base.code))
            })?;
            let sdepth = depth.min(shifted.len());
            let a = contracting_limit_unchecked(sys, &shifted, sdepth, opts)?;
            let moved = unit(s_image.mul_vec(base.limit.coords()));
            let defect = fubini_study_vectors(a.limit.coords(), &moved);
            // Radius of s · (image at depth) around s · limit, plus that of the shifted path.
            let mut prefix = Prefix::new(sys.presentation.dim());
            prefix.push(s_image)?;
            for (&v, &k) in p.vertices.iter().zip(&p.elements).take(depth) {
                prefix.push(&sys.table.per_vertex[v][k].matrix)?;
            }
            let w = if depth < p.len() { p.vertices[depth] } else { p.tail_vertex(&sys.graph) };
            let dom = &sys.system.domains[w];
            let c = dom.center().coords().to_vec();
            let moved_radius = dom
                .boundary_sample(opts.boundary_samples)
                .points
                .iter()
                .map(|b| image_fs(&prefix, &c, b))
                .fold(0.0, f64::max);
            let bound = a.radius + moved_radius + opts.numeric_floor;
            Ok(EquivarianceSample {
                code: base.code,
                shifted_code: a.code,
                defect,
                bound,
                pass: defect <= bound,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_defect = samples.iter().map(|s| s.defect).fold(0.0, f64::max);
    Ok(EquivarianceReport {
        pass: samples.iter().all(|s| s.pass),
        max_defect,
        samples,
    })
}

pub fn equivariance_check(
    sys: &CertifiedSystem,
    s: &Word,
    paths: &[GPath],
    depth: usize,
    opts: &DynamicsOptions,
) -> Result<EquivarianceReport> {
    let m = sys.presentation.evaluate(s)?;
    equivariance_check_with(sys, s, &m, paths, depth, opts)
}

/// `log(σ_k/σ_{k+1})` of `Λ^j g` for `j = 1..d−1`, a convenience for gap
/// reports through exterior powers.
pub fn exterior_gaps(g: &Matrix) -> Result<Vec<f64>> {
    (1..g.dim())
        .map(|j| {
            let e = exterior_power(g, j)?;
            let s = svd(&e)?;
            Ok(s.log_gap(1))
        })
        .collect()
}

/// Whether a label of the system is a parabolic family.
pub fn is_parabolic(sys: &CertifiedSystem, v: usize) -> bool {
    matches!(sys.graph.vertices()[v].label, VertexLabel::ParabolicFamily { .. })
}

