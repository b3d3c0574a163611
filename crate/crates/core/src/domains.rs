//! Proper domains in affine charts, their duals, the cross-ratio metric
//! `C_Ω`, and contraction estimates between nested domains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{k_subsets, Matrix};
use crate::projgeom::{
    act_dual, dot, fubini_study, fubini_study_vectors, norm, ChartFrame, ProjError,
    ProjHyperplane, ProjPoint,
};
use crate::qmc;

/// Default minimum FS margin for strict nesting checks.
pub const NESTING_MARGIN: f64 = 1e-3;
/// Default minimum opposition margin between a closure and its chart.
pub const PROPER_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("point is not in the domain")]
    NotInDomain,
    #[error("points coincide, so no line through them is defined")]
    DegenerateLine,
    #[error("set is not contained in the outer domain (margin {margin:e})")]
    NotNested { margin: f64 },
    #[error("inner closure is not strictly inside the outer domain (margin {margin:e})")]
    NotStrictlyNested { margin: f64 },
    #[error("points are not in cyclic order a < b < c < d <= a")]
    BadOrder,
    #[error("closure leaves the affine chart (margin {margin:e})")]
    NotProper { margin: f64 },
    #[error("invalid domain: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Proj(#[from] ProjError),
}

pub type Result<T> = std::result::Result<T, DomainError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Half-space `{u : normal·u <= offset}` with unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    ChartBall(Ball),
    ConvexPolytope {
        vertices: Vec<Vec<f64>>,
        facets: Vec<Facet>,
    },
    /// Finite union of balls in a common chart.
    SampledSet(Vec<Ball>),
}

/// An open set whose closure lies in the affine chart of `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProperDomain {
    frame: ChartFrame,
    kind: DomainKind,
    seed: u64,
}

/// Value of `C_Ω` together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: f64,
    /// `false` means a sampled lower bound.
    pub exact: bool,
    /// Dual pairs examined (zero for the exact line-section formula).
    pub pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub lambda: f64,
    pub samples: usize,
    pub nesting_margin: f64,
    /// Whether each sample was resolved by the exact one-dimensional routine.
    pub exact_sections: bool,
}

fn check_vec(v: &[f64], n: usize, what: &str) -> Result<()> {
    if v.len() != n {
        return Err(DomainError::Invalid(format!(
            "{what} has length {}, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(DomainError::Invalid(format!("{what} is not finite")));
    }
    Ok(())
}

fn check_ball(b: &Ball, n: usize) -> Result<()> {
    check_vec(&b.center, n, "ball center")?;
    if !(b.radius > 0.0 && b.radius.is_finite()) {
        return Err(DomainError::Invalid(format!("radius {} must be positive", b.radius)));
    }
    Ok(())
}

fn det_small(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            m.swap(p, c);
            det = -det;
        }
        det *= m[c][c];
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    det
}

/// Affine hyperplane through `n` points of `R^n`, via cofactors.
fn hyperplane_through(points: &[&Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let n = points[0].len();
    let rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(points[0]).map(|(a, b)| a - b).collect())
        .collect();
    let mut normal: Vec<f64> = (0..n)
        .map(|i| {
            let minor: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, x)| *x).collect())
                .collect();
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * det_small(minor)
        })
        .collect();
    let len = norm(&normal);
    let scale = rows.iter().map(|r| norm(r)).fold(1.0f64, f64::max).powi(n as i32 - 1);
    if len <= 1e-12 * scale {
        return None;
    }
    normal.iter_mut().for_each(|x| *x /= len);
    let offset = dot(&normal, points[0]);
    Some((normal, offset))
}

/// Facets of the convex hull of full-dimensional `vertices` in `R^n`.
fn hull_facets(vertices: &[Vec<f64>]) -> Result<Vec<Facet>> {
    let n = vertices[0].len();
    let extent = vertices
        .iter()
        .flat_map(|v| v.iter().map(|x| x.abs()))
        .fold(1.0f64, f64::max);
    let tol = 1e-10 * extent;
    let mut facets: Vec<Facet> = Vec::new();
    for subset in k_subsets(vertices.len(), n) {
        let pts: Vec<&Vec<f64>> = subset.iter().map(|&i| &vertices[i]).collect();
        let Some((mut normal, mut offset)) = hyperplane_through(&pts) else {
            continue;
        };
        let side: Vec<f64> = vertices.iter().map(|v| dot(&normal, v) - offset).collect();
        let above = side.iter().any(|&s| s > tol);
        let below = side.iter().any(|&s| s < -tol);
        if above && below || !above && !below {
            continue;
        }
        if above {
            normal.iter_mut().for_each(|x| *x = -*x);
            offset = -offset;
        }
        let duplicate = facets.iter().any(|f| {
            (f.offset - offset).abs() <= tol
                && f.normal.iter().zip(&normal).all(|(a, b)| (a - b).abs() <= 1e-9)
        });
        if !duplicate {
            facets.push(Facet { normal, offset });
        }
    }
    if facets.len() < n + 1 {
        return Err(DomainError::Invalid("polytope is not full-dimensional".into()));
    }
    Ok(facets)
}

impl ProperDomain {
    fn finish(frame: ChartFrame, kind: DomainKind) -> Result<Self> {
        let dom = Self { frame, kind, seed: 0 };
        let margin = dom.closure_margin(256);
        if !(margin > PROPER_MARGIN) {
            return Err(DomainError::NotProper { margin });
        }
        Ok(dom)
    }

    pub fn ball(chart: &ProjHyperplane, center: Vec<f64>, radius: f64) -> Result<Self> {
        let frame = ChartFrame::new(chart);
        let b = Ball { center, radius };
        check_ball(&b, frame.chart_dim())?;
        Self::finish(frame, DomainKind::ChartBall(b))
    }

    /// Convex hull of at least `d` affinely spanning chart points.
    pub fn polytope(chart: &ProjHyperplane, vertices: Vec<Vec<f64>>) -> Result<Self> {
        let frame = ChartFrame::new(chart);
        let n = frame.chart_dim();
        if vertices.len() < n + 1 {
            return Err(DomainError::Invalid(format!(
                "polytope needs at least {} vertices",
                n + 1
            )));
        }
        for v in &vertices {
            check_vec(v, n, "vertex")?;
        }
        let facets = hull_facets(&vertices)?;
        Self::finish(frame, DomainKind::ConvexPolytope { vertices, facets })
    }

    pub fn union(chart: &ProjHyperplane, balls: Vec<Ball>) -> Result<Self> {
        let frame = ChartFrame::new(chart);
        if balls.is_empty() {
            return Err(DomainError::Invalid("union of no balls".into()));
        }
        for b in &balls {
            check_ball(b, frame.chart_dim())?;
        }
        Self::finish(frame, DomainKind::SampledSet(balls))
    }

    /// Open arc of `RP^1` of angular half-width `half_width < π/2` around the
    /// point `[cos θ : sin θ]`.
    pub fn arc(center_angle: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < std::f64::consts::FRAC_PI_2) {
            return Err(DomainError::Invalid(format!("arc half-width {half_width}")));
        }
        let chart = ProjHyperplane::new(&[center_angle.cos(), center_angle.sin()])?;
        Self::ball(&chart, vec![0.0], half_width.tan())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn frame(&self) -> &ChartFrame {
        &self.frame
    }

    pub fn chart(&self) -> &ProjHyperplane {
        self.frame.hyperplane()
    }

    /// Ambient dimension `d` of `R^d`.
    pub fn dim(&self) -> usize {
        self.frame.chart_dim() + 1
    }

    pub fn is_convex(&self) -> bool {
        !matches!(self.kind, DomainKind::SampledSet(_))
    }

    pub fn chart_coords(&self, p: &ProjPoint) -> Result<Vec<f64>> {
        Ok(self.frame.coords(p)?)
    }

    pub fn contains_coords(&self, u: &[f64]) -> bool {
        let inside_ball = |b: &Ball| {
            let r2: f64 = u.iter().zip(&b.center).map(|(x, c)| (x - c) * (x - c)).sum();
            r2 < b.radius * b.radius
        };
        match &self.kind {
            DomainKind::ChartBall(b) => inside_ball(b),
            DomainKind::ConvexPolytope { facets, .. } => {
                facets.iter().all(|f| dot(&f.normal, u) < f.offset)
            }
            DomainKind::SampledSet(balls) => balls.iter().any(inside_ball),
        }
    }

    pub fn contains_vector(&self, v: &[f64]) -> bool {
        match self.frame.coords_of_vector(v) {
            Ok(u) => self.contains_coords(&u),
            Err(_) => false,
        }
    }

    pub fn contains(&self, p: &ProjPoint) -> bool {
        p.dim() == self.dim() && self.contains_vector(p.coords())
    }

    pub fn center_coords(&self) -> Vec<f64> {
        match &self.kind {
            DomainKind::ChartBall(b) => b.center.clone(),
            DomainKind::ConvexPolytope { vertices, .. } => {
                let n = self.frame.chart_dim();
                let mut c = vec![0.0; n];
                for v in vertices {
                    c.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                }
                c.iter_mut().for_each(|a| *a /= vertices.len() as f64);
                c
            }
            DomainKind::SampledSet(balls) => balls[0].center.clone(),
        }
    }

    pub fn center(&self) -> ProjPoint {
        self.frame.point(&self.center_coords())
    }

    fn balls(&self) -> Option<&[Ball]> {
        match &self.kind {
            DomainKind::ChartBall(b) => Some(std::slice::from_ref(b)),
            DomainKind::SampledSet(bs) => Some(bs),
            DomainKind::ConvexPolytope { .. } => None,
        }
    }

    /// Distance along `dir` from the interior point `from` to the boundary of a
    /// polytope.
    fn polytope_exit(facets: &[Facet], from: &[f64], dir: &[f64]) -> f64 {
        facets
            .iter()
            .filter_map(|f| {
                let rate = dot(&f.normal, dir);
                (rate > 0.0).then(|| (f.offset - dot(&f.normal, from)) / rate)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Chart coordinates of boundary samples, with the outward chart normal at
    /// each. Prefix-stable in `count` for chart dimension at least 2.
    pub fn boundary_with_normals(&self, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let n = self.frame.chart_dim();
        let dirs = qmc::sphere_points(n, count, self.seed);
        match &self.kind {
            DomainKind::ChartBall(b) => dirs
                .into_iter()
                .map(|d| {
                    let u = b.center.iter().zip(&d).map(|(c, x)| c + b.radius * x).collect();
                    (u, d)
                })
                .collect(),
            DomainKind::ConvexPolytope { vertices, facets } => {
                let c = self.center_coords();
                let mut out: Vec<(Vec<f64>, Vec<f64>)> = dirs
                    .into_iter()
                    .map(|d| {
                        let t = Self::polytope_exit(facets, &c, &d);
                        let u: Vec<f64> = c.iter().zip(&d).map(|(a, x)| a + t * x).collect();
                        let f = facets
                            .iter()
                            .min_by(|f, g| {
                                (f.offset - dot(&f.normal, &u))
                                    .abs()
                                    .total_cmp(&(g.offset - dot(&g.normal, &u)).abs())
                            })
                            .unwrap();
                        (u, f.normal.clone())
                    })
                    .collect();
                for v in vertices {
                    let tol = 1e-9 * (1.0 + norm(v));
                    let active: Vec<&Facet> = facets
                        .iter()
                        .filter(|f| (dot(&f.normal, v) - f.offset).abs() <= tol)
                        .collect();
                    if active.is_empty() {
                        continue;
                    }
                    let mut sum = vec![0.0; n];
                    for f in &active {
                        out.push((v.clone(), f.normal.clone()));
                        sum.iter_mut().zip(&f.normal).for_each(|(a, b)| *a += b);
                    }
                    let len = norm(&sum);
                    if active.len() > 1 && len > 1e-12 {
                        out.push((v.clone(), sum.iter().map(|x| x / len).collect()));
                    }
                }
                out
            }
            DomainKind::SampledSet(balls) => {
                let mut out = Vec::new();
                for b in balls {
                    let extra = qmc::sphere_points(n, count.div_ceil(balls.len()).max(2), self.seed);
                    for d in extra {
                        let u: Vec<f64> =
                            b.center.iter().zip(&d).map(|(c, x)| c + b.radius * x).collect();
                        if !self.contains_coords(&u) {
                            out.push((u, d));
                        }
                    }
                }
                out
            }
        }
    }

    pub fn boundary_coords(&self, count: usize) -> Vec<Vec<f64>> {
        self.boundary_with_normals(count).into_iter().map(|(u, _)| u).collect()
    }

    pub fn boundary_points(&self, count: usize) -> Vec<ProjPoint> {
        self.boundary_coords(count)
            .iter()
            .map(|u| self.frame.point(u))
            .collect()
    }

    /// Interior samples in chart coordinates.
    pub fn interior_coords(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.frame.chart_dim();
        let unit = qmc::ball_points(n, count, self.seed ^ 0xB0B);
        match &self.kind {
            DomainKind::ChartBall(b) => unit
                .into_iter()
                .map(|p| b.center.iter().zip(&p).map(|(c, x)| c + b.radius * x).collect())
                .collect(),
            DomainKind::ConvexPolytope { facets, .. } => {
                let c = self.center_coords();
                unit.into_iter()
                    .map(|p| {
                        let r = norm(&p);
                        if r == 0.0 {
                            return c.clone();
                        }
                        let d: Vec<f64> = p.iter().map(|x| x / r).collect();
                        let t = Self::polytope_exit(facets, &c, &d) * r;
                        c.iter().zip(&d).map(|(a, x)| a + t * x).collect()
                    })
                    .collect()
            }
            DomainKind::SampledSet(balls) => unit
                .into_iter()
                .enumerate()
                .map(|(i, p)| {
                    let b = &balls[i % balls.len()];
                    b.center.iter().zip(&p).map(|(c, x)| c + b.radius * x).collect()
                })
                .collect(),
        }
    }

    pub fn interior_points(&self, count: usize) -> Vec<ProjPoint> {
        self.interior_coords(count)
            .iter()
            .map(|u| self.frame.point(u))
            .collect()
    }

    /// Smallest opposition margin of a boundary sample against the chart.
    pub fn closure_margin(&self, count: usize) -> f64 {
        let h = self.chart();
        self.boundary_coords(count)
            .iter()
            .map(|u| crate::projgeom::opposition_margin(&self.frame.point(u), h))
            .fold(f64::INFINITY, f64::min)
    }

    /// For `RP^1` domains: the arcs `(start angle, width)` making up the set,
    /// each of width below `π`.
    pub fn arcs(&self) -> Option<Vec<(f64, f64)>> {
        if self.dim() != 2 {
            return None;
        }
        let base = self.frame.lift(&[0.0]);
        let b0 = &self.frame.basis()[0];
        let orient = if base[0] * b0[1] - base[1] * b0[0] >= 0.0 { 1.0 } else { -1.0 };
        let theta0 = base[1].atan2(base[0]);
        let to_arc = |lo: f64, hi: f64| {
            let (x, y) = (theta0 + orient * lo.atan(), theta0 + orient * hi.atan());
            let start = x.min(y).rem_euclid(std::f64::consts::PI);
            (start, (y - x).abs())
        };
        Some(match &self.kind {
            DomainKind::ChartBall(b) => vec![to_arc(b.center[0] - b.radius, b.center[0] + b.radius)],
            DomainKind::ConvexPolytope { vertices, .. } => {
                let lo = vertices.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
                let hi = vertices.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
                vec![to_arc(lo, hi)]
            }
            DomainKind::SampledSet(balls) => balls
                .iter()
                .map(|b| to_arc(b.center[0] - b.radius, b.center[0] + b.radius))
                .collect(),
        })
    }

    /// Unit-vector samples of the boundary used for FS distances. In `RP^1`
    /// these are exactly the uncovered arc endpoints.
    pub fn boundary_sample(&self, count: usize) -> BoundarySample {
        let points = if self.dim() == 2 {
            self.boundary_points(2)
                .into_iter()
                .map(|p| p.coords().to_vec())
                .collect()
        } else {
            self.boundary_points(count)
                .into_iter()
                .map(|p| p.coords().to_vec())
                .collect()
        };
        BoundarySample {
            points,
            exact: self.dim() == 2,
        }
    }

    /// FS distance from `v` to the sampled boundary, positive inside and
    /// negative outside.
    pub fn signed_margin(&self, v: &[f64], sample: &BoundarySample) -> f64 {
        let dist = sample
            .points
            .iter()
            .map(|b| fubini_study_vectors(v, b))
            .fold(f64::INFINITY, f64::min);
        if self.contains_vector(v) {
            dist
        } else {
            -dist
        }
    }

    /// Boundary of the FS `eps`-neighborhood, sampled by pushing boundary
    /// points along FS normal geodesics. Exact (both endpoints of every arc)
    /// in `RP^1`.
    pub fn neighborhood_boundary(&self, eps: f64, count: usize) -> Vec<Vec<f64>> {
        self.boundary_with_normals(count)
            .into_iter()
            .map(|(u, n)| {
                let lift = self.frame.lift(&u);
                let len = norm(&lift);
                let b: Vec<f64> = lift.iter().map(|x| x / len).collect();
                let un = dot(&u, &n);
                let h = self.chart().covector();
                let mut g: Vec<f64> = h.iter().map(|x| -un * x).collect();
                for (ni, bi) in n.iter().zip(self.frame.basis()) {
                    g.iter_mut().zip(bi).for_each(|(a, y)| *a += ni * y);
                }
                let along = dot(&g, &b);
                g.iter_mut().zip(&b).for_each(|(a, y)| *a -= along * y);
                let gl = norm(&g);
                if eps == 0.0 || gl == 0.0 {
                    return b;
                }
                b.iter()
                    .zip(&g)
                    .map(|(x, t)| eps.cos() * x + eps.sin() * t / gl)
                    .collect()
            })
            .collect()
    }

    /// Parameters `s_- < 0 < s_+` where `u + s w` leaves a convex domain.
    pub fn line_section(&self, u: &[f64], w: &[f64]) -> Option<(f64, f64)> {
        match &self.kind {
            DomainKind::ChartBall(b) => {
                let d: Vec<f64> = u.iter().zip(&b.center).map(|(x, c)| x - c).collect();
                let a = dot(w, w);
                let bb = dot(w, &d);
                let c = dot(&d, &d) - b.radius * b.radius;
                if a == 0.0 || c >= 0.0 {
                    return None;
                }
                let disc = (bb * bb - a * c).sqrt();
                let q = -(bb + bb.signum() * disc);
                let (r1, r2) = if q == 0.0 {
                    (-disc / a, disc / a)
                } else {
                    (q / a, c / q)
                };
                Some((r1.min(r2), r1.max(r2)))
            }
            DomainKind::ConvexPolytope { facets, .. } => {
                let mut lo = f64::NEG_INFINITY;
                let mut hi = f64::INFINITY;
                for f in facets {
                    let gap = f.offset - dot(&f.normal, u);
                    if gap <= 0.0 {
                        return None;
                    }
                    let rate = dot(&f.normal, w);
                    if rate > 0.0 {
                        hi = hi.min(gap / rate);
                    } else if rate < 0.0 {
                        lo = lo.max(gap / rate);
                    }
                }
                (lo.is_finite() && hi.is_finite()).then_some((lo, hi))
            }
            DomainKind::SampledSet(_) => None,
        }
    }

    /// Image under a projective map. Exact for polytopes and for every kind
    /// in `RP^1`; balls in higher dimension map to ellipsoids and are refused.
    pub fn transformed(&self, g: &Matrix) -> Result<Self> {
        let chart = act_dual(g, self.chart())?;
        let frame = ChartFrame::new(&chart);
        let map = |u: &[f64]| -> Result<Vec<f64>> {
            let v = g.mul_vec(&self.frame.lift(u));
            Ok(frame.coords_of_vector(&v)?)
        };
        let kind = match &self.kind {
            DomainKind::ConvexPolytope { vertices, .. } => {
                let vs = vertices.iter().map(|v| map(v)).collect::<Result<Vec<_>>>()?;
                return Ok(Self::polytope(&chart, vs)?.with_seed(self.seed));
            }
            _ if self.dim() != 2 => {
                return Err(DomainError::Unsupported(
                    "projective image of a ball in dimension above 1".into(),
                ))
            }
            DomainKind::ChartBall(b) => DomainKind::ChartBall(Self::map_interval(b, &map)?),
            DomainKind::SampledSet(bs) => DomainKind::SampledSet(
                bs.iter().map(|b| Self::map_interval(b, &map)).collect::<Result<_>>()?,
            ),
        };
        Ok(Self::finish(frame, kind)?.with_seed(self.seed))
    }

    fn map_interval(b: &Ball, map: &dyn Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Ball> {
        let x = map(&[b.center[0] - b.radius])?[0];
        let y = map(&[b.center[0] + b.radius])?[0];
        Ok(Ball {
            center: vec![(x + y) / 2.0],
            radius: (y - x).abs() / 2.0,
        })
    }

    pub fn dual(&self) -> DualDomain<'_> {
        DualDomain { parent: self }
    }

    /// Largest extent of the domain in chart coordinates.
    fn extent(&self) -> f64 {
        match &self.kind {
            DomainKind::ConvexPolytope { vertices, .. } => {
                vertices.iter().map(|v| norm(v)).fold(0.0, f64::max)
            }
            _ => self
                .balls()
                .unwrap()
                .iter()
                .map(|b| norm(&b.center) + b.radius)
                .fold(0.0, f64::max),
        }
    }

    /// `max_{u ∈ closure} θ·u`.
    fn support(&self, theta: &[f64]) -> f64 {
        match &self.kind {
            DomainKind::ConvexPolytope { vertices, .. } => vertices
                .iter()
                .map(|v| dot(theta, v))
                .fold(f64::NEG_INFINITY, f64::max),
            _ => self
                .balls()
                .unwrap()
                .iter()
                .map(|b| dot(theta, &b.center) + b.radius * norm(theta))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Boundary points used for FS margins.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySample {
    pub points: Vec<Vec<f64>>,
    /// Exact boundary (as in `RP^1`) rather than a sample.
    pub exact: bool,
}

/// Hyperplanes opposite to every point of the parent's closure.
#[derive(Debug, Clone, Copy)]
pub struct DualDomain<'a> {
    parent: &'a ProperDomain,
}

impl DualDomain<'_> {
    pub fn parent(&self) -> &ProperDomain {
        self.parent
    }

    /// Whether the covector is strictly opposite to the parent's closure,
    /// judged on boundary samples (exact on polytope vertices).
    pub fn contains(&self, covector: &[f64], count: usize) -> bool {
        let pts: Vec<Vec<f64>> = match &self.parent.kind {
            DomainKind::ConvexPolytope { vertices, .. } => vertices.clone(),
            _ => self.parent.boundary_coords(count),
        };
        let signs: Vec<f64> = pts
            .iter()
            .map(|u| dot(covector, &self.parent.frame.lift(u)))
            .collect();
        if self.parent.is_convex() {
            signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0)
        } else {
            signs.iter().all(|&s| s != 0.0)
        }
    }

    /// Exact generators of the dual of a polytope: its facet covectors,
    /// positive on the polytope.
    pub fn exact_generators(&self) -> Option<Vec<Vec<f64>>> {
        match &self.parent.kind {
            DomainKind::ConvexPolytope { facets, .. } => Some(
                facets
                    .iter()
                    .map(|f| {
                        let w = self.parent.frame.affine_covector(&f.normal, f.offset);
                        w.iter().map(|x| -x).collect()
                    })
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Deterministic covectors in the dual domain: the chart itself, facets
    /// pushed slightly outward, supporting hyperplanes in sampled directions,
    /// and for unions hyperplanes passing between the pieces.
    pub fn sample(&self, count: usize) -> Vec<Vec<f64>> {
        let p = self.parent;
        let n = p.frame.chart_dim();
        let eta = 1e-7 * (1.0 + p.extent());
        let mut out = vec![p.chart().covector().to_vec()];
        if let DomainKind::ConvexPolytope { facets, .. } = &p.kind {
            for f in facets {
                out.push(p.frame.affine_covector(&f.normal, f.offset + eta));
            }
        }
        let dirs = qmc::sphere_points(n, count, p.seed ^ 0xD0A1);
        for theta in &dirs {
            if out.len() >= count.max(2) && !matches!(p.kind, DomainKind::SampledSet(_)) {
                break;
            }
            out.push(p.frame.affine_covector(theta, p.support(theta) + eta));
        }
        if let DomainKind::SampledSet(balls) = &p.kind {
            let mut index = 0u64;
            let mut tries = 0;
            while out.len() < 2 * count.max(2) && tries < 50 * count.max(2) {
                tries += 1;
                let theta = &dirs[(index as usize) % dirs.len()];
                let hi = p.support(theta);
                let lo = -p.support(&theta.iter().map(|x| -x).collect::<Vec<_>>());
                let o = lo + (hi - lo) * qmc::rd_point(1, p.seed ^ 0x5E9, index)[0];
                index += 1;
                let clear = balls
                    .iter()
                    .all(|b| (dot(theta, &b.center) - o).abs() > b.radius + eta);
                if clear {
                    out.push(p.frame.affine_covector(theta, o));
                }
            }
        }
        out
    }
}

fn in_domain(omega: &ProperDomain, p: &ProjPoint) -> Result<Vec<f64>> {
    if !omega.contains(p) {
        return Err(DomainError::NotInDomain);
    }
    omega.chart_coords(p)
}

/// `log` of the cross-ratio of `x = 0`, `y = 1` against section ends
/// `s_- < 0 < 1 < s_+`.
fn section_metric(lo: f64, hi: f64) -> f64 {
    (1.0 / -lo).ln_1p() + (1.0 / (hi - 1.0)).ln_1p()
}

/// `C_Ω(x, y)`: exact for balls and polytopes, a sampled lower bound over
/// `budget` dual pairs for unions.
pub fn zimmer_metric(omega: &ProperDomain, x: &ProjPoint, y: &ProjPoint, budget: usize) -> Result<MetricValue> {
    if !omega.is_convex() {
        return zimmer_metric_sampled(omega, x, y, budget);
    }
    let ux = in_domain(omega, x)?;
    let uy = in_domain(omega, y)?;
    if fubini_study(x, y) <= 1e-12 {
        return Ok(MetricValue { value: 0.0, exact: true, pairs: 0 });
    }
    let w: Vec<f64> = uy.iter().zip(&ux).map(|(a, b)| a - b).collect();
    let (lo, hi) = omega.line_section(&ux, &w).ok_or(DomainError::NotInDomain)?;
    Ok(MetricValue {
        value: section_metric(lo, hi),
        exact: true,
        pairs: 0,
    })
}

/// Supremum of `log|[ξ₁, ξ₂; x, y]|` over all ordered pairs from
/// `⌈√budget⌉` sampled dual hyperplanes.
pub fn zimmer_metric_sampled(
    omega: &ProperDomain,
    x: &ProjPoint,
    y: &ProjPoint,
    budget: usize,
) -> Result<MetricValue> {
    in_domain(omega, x)?;
    in_domain(omega, y)?;
    let m = (budget as f64).sqrt().ceil().max(2.0) as usize;
    let hyperplanes = omega.dual().sample(m);
    // log|cr| = q(ξ₁) - q(ξ₂) with q(ξ) = log|ξ(y)| - log|ξ(x)|.
    let (lo, hi) = hyperplanes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| {
        let q = dot(w, y.coords()).abs().ln() - dot(w, x.coords()).abs().ln();
        (lo.min(q), hi.max(q))
    });
    Ok(MetricValue {
        value: (hi - lo).max(0.0),
        exact: false,
        pairs: hyperplanes.len() * hyperplanes.len(),
    })
}

/// What [`diameter`] measures.
#[derive(Debug, Clone, Copy)]
pub enum DiameterSet<'a> {
    Domain(&'a ProperDomain),
    Points(&'a [ProjPoint]),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiameterValue {
    pub value: f64,
    pub points: usize,
    pub exact_metric: bool,
}

/// Supremum of `C_outer` over pairs of a prefix-stable sample of the set.
pub fn diameter(outer: &ProperDomain, set: DiameterSet<'_>, budget: usize) -> Result<DiameterValue> {
    let m = ((2 * budget) as f64).sqrt().ceil().max(1.0) as usize;
    let pts: Vec<ProjPoint> = match set {
        DiameterSet::Domain(s) => {
            let mut v = vec![s.center()];
            v.extend(s.boundary_points(m));
            v
        }
        DiameterSet::Points(p) => p.iter().take(m.max(2)).cloned().collect(),
    };
    if let Some(bad) = pts.iter().find(|p| !outer.contains(p)) {
        let sample = outer.boundary_sample(256);
        return Err(DomainError::NotNested {
            margin: outer.signed_margin(bad.coords(), &sample),
        });
    }
    let mut best = 0.0f64;
    let mut exact = true;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let v = zimmer_metric(outer, &pts[i], &pts[j], budget)?;
            exact &= v.exact;
            best = best.max(v.value);
        }
    }
    Ok(DiameterValue {
        value: best,
        points: pts.len(),
        exact_metric: exact,
    })
}

/// Smallest FS margin of sampled `closure(inner)` inside `outer`.
pub fn nesting_margin(inner: &ProperDomain, outer: &ProperDomain, budget: usize) -> f64 {
    let sample = outer.boundary_sample(budget.max(64));
    inner
        .boundary_points(budget.max(16))
        .iter()
        .map(|p| outer.signed_margin(p.coords(), &sample))
        .fold(f64::INFINITY, f64::min)
}

/// Estimate of the best `λ` with `C_{Ω₁} >= λ C_{Ω₂}` on `Ω₁`.
///
/// For convex domains each sampled line is resolved exactly: the restriction
/// of both metrics to a line is the one-dimensional one, so the infimum over
/// pairs on that line is [`rp1_contraction_lambda`] of the four section ends.
/// The best sampled lines are then refined by a pattern search. Unions fall back to ratios of sampled metrics over sampled pairs.
pub fn contraction_factor(
    inner: &ProperDomain,
    outer: &ProperDomain,
    budget: usize,
) -> Result<ContractionEstimate> {
    let margin = nesting_margin(inner, outer, budget.min(4096));
    if !(margin > NESTING_MARGIN) {
        return Err(DomainError::NotStrictlyNested { margin });
    }
    if inner.is_convex() && outer.is_convex() {
        let n = inner.frame.chart_dim();
        // Every base point is paired with every direction; indexing both
        // low-discrepancy sequences together would correlate them.
        let per = (budget as f64).sqrt().ceil().max(2.0) as usize;
        let starts = inner.interior_coords(per);
        let dirs = qmc::sphere_points(n, per, inner.seed ^ 0x11E5);
        let mut lines: Vec<(f64, usize, usize)> = Vec::new();
        for (i, u) in starts.iter().enumerate() {
            for (j, d) in dirs.iter().enumerate() {
                if let Some(l) = line_lambda(inner, outer, u, d)? {
                    lines.push((l, i, j));
                }
            }
        }
        lines.sort_by(|a, b| a.0.total_cmp(&b.0));
        let scale = starts
            .iter()
            .flat_map(|u| u.iter().zip(&starts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
            .max(1e-6);
        let mut best = lines.first().map_or(f64::INFINITY, |l| l.0);
        for &(l, i, j) in lines.iter().take(REFINED_LINES) {
            best = best.min(refine_line(inner, outer, &starts[i], &dirs[j], l, scale));
        }
        return Ok(ContractionEstimate {
            lambda: best,
            samples: lines.len(),
            nesting_margin: margin,
            exact_sections: true,
        });
    }
    let m = (budget as f64).sqrt().ceil().max(2.0) as usize;
    let pts = inner.interior_points(m);
    let mut best = f64::INFINITY;
    let mut pairs = 0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if fubini_study(&pts[i], &pts[j]) <= 1e-9 {
                continue;
            }
            let a = zimmer_metric(inner, &pts[i], &pts[j], budget)?.value;
            let b = zimmer_metric(outer, &pts[i], &pts[j], budget)?.value;
            pairs += 1;
            if b > 0.0 {
                best = best.min(a / b);
            }
        }
    }
    Ok(ContractionEstimate {
        lambda: best,
        samples: pairs,
        nesting_margin: margin,
        exact_sections: false,
    })
}

const REFINED_LINES: usize = 8;

/// Pattern search over the base point and direction of a line, starting from
/// a sampled line with ratio `start`.
fn refine_line(inner: &ProperDomain, outer: &ProperDomain, u: &[f64], d: &[f64], start: f64, scale: f64) -> f64 {
    let n = u.len();
    let (mut u, mut d, mut best) = (u.to_vec(), d.to_vec(), start);
    let mut step = 0.25;
    while step > 1e-4 {
        let mut improved = false;
        for axis in 0..2 * n {
            for sign in [-1.0, 1.0] {
                let (mut u2, mut d2) = (u.clone(), d.clone());
                if axis < n {
                    u2[axis] += sign * step * scale;
                } else {
                    d2[axis - n] += sign * step;
                    let l = norm(&d2);
                    d2.iter_mut().for_each(|x| *x /= l);
                }
                if !inner.contains_coords(&u2) {
                    continue;
                }
                if let Ok(Some(l)) = line_lambda(inner, outer, &u2, &d2) {
                    if l < best {
                        (best, u, d, improved) = (l, u2, d2, true);
                    }
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

/// Infimum of the metric ratio over pairs on the line through chart point `u`
/// of `inner` in chart direction `d`.
fn line_lambda(inner: &ProperDomain, outer: &ProperDomain, u: &[f64], d: &[f64]) -> Result<Option<f64>> {
    let (lo1, hi1) = match inner.line_section(u, d) {
        Some(s) => s,
        None => return Ok(None),
    };
    let x = inner.frame.lift(u);
    let y: Vec<f64> = inner.frame.lift(&u.iter().zip(d).map(|(a, b)| a + b).collect::<Vec<_>>());
    let ux = outer.frame.coords_of_vector(&x)?;
    let uy = outer.frame.coords_of_vector(&y)?;
    let w: Vec<f64> = uy.iter().zip(&ux).map(|(a, b)| a - b).collect();
    let Some((a, dd)) = outer.line_section(&ux, &w) else {
        return Ok(None);
    };
    // Inner section ends, re-expressed as parameters on the outer line.
    let param = |s: f64| -> Result<f64> {
        let p: Vec<f64> = inner.frame.lift(&u.iter().zip(d).map(|(a, b)| a + s * b).collect::<Vec<_>>());
        let q = outer.frame.coords_of_vector(&p)?;
        let diff: Vec<f64> = q.iter().zip(&ux).map(|(a, b)| a - b).collect();
        Ok(dot(&diff, &w) / dot(&w, &w))
    };
    let b = param(lo1)?;
    let c = param(hi1)?;
    let (b, c) = (b.min(c), b.max(c));
    if !(a < b && b < c && c < dd) {
        return Err(DomainError::NotStrictlyNested { margin: 0.0 });
    }
    Ok(Some(lambda_finite(a, b, c, dd, 512)))
}

/// Hilbert Finsler density of `(p, q)` at `x`.
fn finsler(p: f64, q: f64, x: f64) -> f64 {
    (q - p) / ((x - p) * (q - x))
}

/// `log` of the one-dimensional Hilbert distance of `x < y` in `(p, q)`.
fn interval_metric(p: f64, q: f64, x: f64, y: f64) -> f64 {
    ((y - p) * (q - x) / ((x - p) * (q - y))).ln().abs()
}

/// `λ` for finite `a < b < c < d`.
fn lambda_finite(a: f64, b: f64, c: f64, d: f64, grid: usize) -> f64 {
    let mid = 0.5 * (b + c);
    let half = 0.5 * (c - b);
    let span = 18.0;
    let at = |t: f64| mid + half * t.tanh();
    let ratio = |t: f64| {
        let x = at(t);
        if !(x > b && x < c) {
            return f64::INFINITY;
        }
        finsler(b, c, x) / finsler(a, d, x)
    };
    let g = grid.max(16);
    let ts: Vec<f64> = (0..=g).map(|i| -span + 2.0 * span * i as f64 / g as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| ratio(t)).collect();
    let k = (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    // Golden-section refinement on the bracketing cells.
    let (mut lo, mut hi) = (ts[k.saturating_sub(1)], ts[(k + 1).min(g)]);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let m1 = hi - gr * (hi - lo);
        let m2 = lo + gr * (hi - lo);
        if ratio(m1) <= ratio(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let mut best = vals[k].min(ratio(0.5 * (lo + hi)));
    // Finite pairs on a coarse grid (never below the pointwise infimum, but
    // kept as an independent cross-check).
    let coarse = 48;
    let xs: Vec<f64> = (1..coarse).map(|i| at(-6.0 + 12.0 * i as f64 / coarse as f64)).collect();
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let inner = interval_metric(b, c, xs[i], xs[j]);
            let outer = interval_metric(a, d, xs[i], xs[j]);
            if outer > 0.0 {
                best = best.min(inner / outer);
            }
        }
    }
    best
}

/// Infimum over distinct `x, y ∈ (b, c)` of `|log[b,c;x,y]| / |log[a,d;x,y]|`
/// for a cyclically ordered quadruple on `RP^1` (infinite entries allowed).
/// Returns `+∞` when `a = d`, where the outer metric vanishes identically.
pub fn rp1_contraction_lambda(a: f64, b: f64, c: f64, d: f64, grid: usize) -> Result<f64> {
    use std::f64::consts::PI;
    let circle = |x: f64| if x.is_infinite() { PI } else { 2.0 * x.atan() };
    let vals = [a, b, c, d];
    if vals.iter().any(|v| v.is_nan()) {
        return Err(DomainError::BadOrder);
    }
    let phi: Vec<f64> = vals.iter().map(|&x| circle(x)).collect();
    let rel = |t: f64| (t - phi[0]).rem_euclid(2.0 * PI);
    let (rb, rc) = (rel(phi[1]), rel(phi[2]));
    let same = |x: f64, y: f64| x == y || (x.is_infinite() && y.is_infinite());
    let rd = if same(a, d) { 2.0 * PI } else { rel(phi[3]) };
    if !(0.0 < rb && rb < rc && rc < rd) || same(b, c) {
        return Err(DomainError::BadOrder);
    }
    if rd >= 2.0 * PI {
        return Ok(f64::INFINITY);
    }
    // Rotate the circle (a projective map) so the middle of the arc from d
    // back to a sits at infinity; the four points then become finite.
    let shift = PI - (phi[0] + 0.5 * (rd + 2.0 * PI));
    let real = |r: f64| ((phi[0] + r + shift) / 2.0).tan();
    let (fa, fb, fc, fd) = (real(0.0), real(rb), real(rc), real(rd));
    // After the rotation the arc a→d avoids infinity, so the reals increase.
    Ok(lambda_finite(fa, fb, fc, fd, grid))
}
