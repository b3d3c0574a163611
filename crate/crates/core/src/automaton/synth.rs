//! Automaton synthesis for actions on `RP^1` from expansion dynamics.
//!
//! Boundary points are angles `θ ∈ [0, π)` of `[cos θ : sin θ]`; the
//! Fubini–Study distance is the angular distance on this circle of length
//! `π`. Conical points get a single element `γ_z` with
//! `W_z = γ_z · B(ζ, 2δ)` and `V_z = γ_z · B(ζ, δ)`, `ζ = γ_z⁻¹ z`.
//! Parabolic points `q = g · p` get the family `{g P^n : |n| ≥ n₀}` together
//! with `V̂ = N(K, δ)` and `Ŵ = N(K, 2δ)` around a fundamental arc `K` for
//! `P` acting on `RP^1 − {p}`. The open set attached to every vertex is
//! `U_a = W_a`.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    verify_compatibility, AutomatonError, Certificate, CertifyOptions, CompatibleSystem, GammaGraph,
    GroupPresentation, Result, Vertex, VertexLabel,
};
use crate::conedoff::Word;
use crate::domains::ProperDomain;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisParams {
    pub epsilon: f64,
    pub delta: f64,
    /// Longest word searched for conical expansions.
    pub search_radius: usize,
    /// Longest coset representative used for parabolic points.
    pub parabolic_radius: usize,
    /// Size of the uniform grid of candidate boundary points.
    pub grid: usize,
    /// Candidate boundary angles replacing the uniform grid. When given, only
    /// these points have to be covered (e.g. a sample of a Cantor limit set).
    pub points: Option<Vec<f64>>,
    /// Largest peripheral exponent tried when choosing `n₀`.
    pub max_exponent: i64,
    pub certify: CertifyOptions,
}

impl Default for SynthesisParams {
    fn default() -> Self {
        Self {
            epsilon: 0.005,
            delta: 0.25,
            search_radius: 16,
            parabolic_radius: 6,
            grid: 256,
            points: None,
            max_exponent: 4096,
            certify: CertifyOptions::default(),
        }
    }
}

/// An open arc `(start, start + width)` of the angle circle `R / πZ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleArc {
    pub start: f64,
    pub width: f64,
}

impl AngleArc {
    fn ball(center: f64, radius: f64) -> Self {
        AngleArc {
            start: (center - radius).rem_euclid(PI),
            width: 2.0 * radius,
        }
    }

    fn offset(&self, theta: f64) -> f64 {
        (theta - self.start).rem_euclid(PI)
    }

    pub fn contains(&self, theta: f64) -> bool {
        let o = self.offset(theta);
        o > 0.0 && o < self.width
    }

    pub fn center(&self) -> f64 {
        (self.start + self.width / 2.0).rem_euclid(PI)
    }

    fn end(&self) -> f64 {
        (self.start + self.width).rem_euclid(PI)
    }

    fn grown(&self, r: f64) -> Self {
        AngleArc {
            start: (self.start - r).rem_euclid(PI),
            width: self.width + 2.0 * r,
        }
    }

    fn meets(&self, other: &AngleArc) -> bool {
        self.contains(other.start)
            || other.contains(self.start)
            || (self.start - other.start).abs() < 1e-15
            || self.contains(other.center())
    }

    /// Image under a projective map of `RP^1`.
    fn image(&self, m: &Matrix) -> Self {
        let a = map_angle(m, self.start);
        let b = map_angle(m, self.start + self.width);
        let mid = map_angle(m, self.start + self.width / 2.0);
        let w = (b - a).rem_euclid(PI);
        if (mid - a).rem_euclid(PI) < w {
            AngleArc { start: a, width: w }
        } else {
            AngleArc { start: b, width: PI - w }
        }
    }
}

fn map_angle(m: &Matrix, theta: f64) -> f64 {
    let v = m.mul_vec(&[theta.cos(), theta.sin()]);
    v[1].atan2(v[0]).rem_euclid(PI)
}

/// Signed offset of `theta` from `base` in `(-π/2, π/2]`.
fn signed_offset(base: f64, theta: f64) -> f64 {
    let o = (theta - base).rem_euclid(PI);
    if o > PI / 2.0 {
        o - PI
    } else {
        o
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    signed_offset(a, b).abs()
}

/// Smallest arc around `q` containing the given arcs, all assumed near `q`.
fn hull_around(q: f64, arcs: &[AngleArc]) -> AngleArc {
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for a in arcs {
        let s = signed_offset(q, a.start);
        let e = s + a.width;
        lo = lo.min(s);
        hi = hi.max(e);
    }
    AngleArc {
        start: (q + lo).rem_euclid(PI),
        width: hi - lo,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SynthesizedKind {
    Conical { element: Word, expansion_center: f64 },
    Parabolic { coset: Word, peripheral: usize, min_exponent: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesizedVertex {
    pub point: f64,
    pub kind: SynthesizedKind,
    pub v: AngleArc,
    pub w: AngleArc,
    /// `γ⁻¹ V` for conical vertices, `V̂` for parabolic ones.
    pub expansion: AngleArc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub graph: GammaGraph,
    pub system: CompatibleSystem,
    pub vertices: Vec<SynthesizedVertex>,
    pub certificate: Certificate,
}

fn failed(clause: &str, point: f64) -> AutomatonError {
    AutomatonError::SynthesisFailed {
        clause: clause.to_string(),
        point,
    }
}

/// Distinct group elements as reduced words, by length then
/// lexicographically (letter order `g₁, g₁⁻¹, g₂, g₂⁻¹, …`); the first word
/// reaching each element is kept. Layers are generated on demand.
struct ElementSearch<'a> {
    pres: &'a GroupPresentation,
    letters: Vec<i32>,
    seen: HashSet<Vec<i128>>,
    layers: Vec<Vec<(Word, Matrix)>>,
}

fn exact_key(x: &Matrix) -> Option<Vec<i128>> {
    x.projective_normalize().ok().and_then(|n| n.exact_entries().map(|e| e.to_vec()))
}

impl<'a> ElementSearch<'a> {
    fn new(pres: &'a GroupPresentation) -> Self {
        let m = pres.generators().len() as i32;
        let id = Matrix::identity(pres.dim());
        let mut seen = HashSet::new();
        seen.extend(exact_key(&id));
        Self {
            pres,
            letters: (1..=m).flat_map(|i| [i, -i]).collect(),
            seen,
            layers: vec![vec![(Word::identity(), id)]],
        }
    }

    /// Elements of word length exactly `len`.
    fn layer(&mut self, len: usize) -> Result<&[(Word, Matrix)]> {
        let id = Matrix::identity(self.pres.dim());
        while self.layers.len() <= len {
            let mut next = Vec::new();
            for (w, x) in self.layers.last().expect("identity layer") {
                for &l in &self.letters {
                    if w.letters().last() == Some(&-l) {
                        continue;
                    }
                    let y = x.mul(self.pres.letter_matrix(l)?)?;
                    let fresh = match exact_key(&y) {
                        Some(k) => self.seen.insert(k),
                        None => y.projective_diff(&id) > 1e-9,
                    };
                    if fresh {
                        let y = if y.is_exact() { y } else { y.sup_normalize().0 };
                        next.push((w.concat(&Word::new(vec![l]).expect("letter")), y));
                    }
                }
            }
            self.layers.push(next);
        }
        Ok(&self.layers[len])
    }
}

struct ParabolicData {
    peripheral: usize,
    generator: Matrix,
    fixed: f64,
    v_hat: AngleArc,
    w_hat: AngleArc,
}

fn parabolic_data(pres: &GroupPresentation, delta: f64) -> Result<Vec<ParabolicData>> {
    let mut out = Vec::new();
    for (i, per) in pres.peripherals().iter().enumerate() {
        if per.matrices.len() != 1 {
            return Err(failed(
                "large_parabolic_neighborhood: peripheral subgroup must be cyclic",
                f64::NAN,
            ));
        }
        let p = &per.matrices[0];
        let det = p.det();
        let (a, b, c, d) = (p.get(0, 0), p.get(0, 1), p.get(1, 0), p.get(1, 1));
        let tr = (a + d) / det.abs().sqrt();
        if (tr.abs() - 2.0).abs() > 1e-9 || det < 0.0 {
            return Err(failed(
                "large_parabolic_neighborhood: peripheral generator is not parabolic",
                f64::NAN,
            ));
        }
        let lambda = (a + d) / 2.0;
        let (u, v) = if b.hypot(lambda - a) >= (lambda - d).hypot(c) {
            (b, lambda - a)
        } else {
            (lambda - d, c)
        };
        let fixed = v.atan2(u).rem_euclid(PI);
        // Fundamental arc [x, P x] avoiding the fixed point, as far from it as possible.
        let mut best: Option<(f64, AngleArc)> = None;
        for k in 0..64 {
            let x = fixed + PI * (k as f64 + 0.5) / 64.0;
            let y = map_angle(p, x);
            let fwd = AngleArc {
                start: x.rem_euclid(PI),
                width: (y - x).rem_euclid(PI),
            };
            let arc = if fwd.contains(fixed) {
                AngleArc {
                    start: y,
                    width: PI - fwd.width,
                }
            } else {
                fwd
            };
            let gap = angle_distance(fixed, arc.start).min(angle_distance(fixed, arc.end()));
            if best.as_ref().map_or(true, |(g, _)| gap > *g) {
                best = Some((gap, arc));
            }
        }
        let (gap, k_arc) = best.expect("nonempty search");
        if gap <= 2.0 * delta {
            return Err(failed(
                "large_parabolic_neighborhood: the closure of N(K, 2δ) contains the parabolic point",
                fixed,
            ));
        }
        out.push(ParabolicData {
            peripheral: i,
            generator: p.clone(),
            fixed,
            v_hat: k_arc.grown(delta),
            w_hat: k_arc.grown(2.0 * delta),
        });
    }
    Ok(out)
}

fn parabolic_vertex(
    data: &ParabolicData,
    coset: &Word,
    g: &Matrix,
    params: &SynthesisParams,
) -> Result<Option<SynthesizedVertex>> {
    let q = map_angle(g, data.fixed);
    let window = 64;
    let ball = params.delta / 4.0;
    let image = |n: i64, arc: &AngleArc| -> Result<AngleArc> {
        let m = g.mul(&data.generator.pow(n)?)?;
        Ok(arc.image(&m))
    };
    let inside = |a: &AngleArc| {
        let s = signed_offset(q, a.start);
        a.width < 2.0 * ball && s > -ball && s + a.width < ball && !a.contains(q)
    };
    let mut n0 = 1;
    let mut streak = 0;
    let mut n = 1;
    while streak < window {
        if n > params.max_exponent {
            return Ok(None);
        }
        if inside(&image(n, &data.w_hat)?) && inside(&image(-n, &data.w_hat)?) {
            streak += 1;
        } else {
            streak = 0;
            n0 = n + 1;
        }
        n += 1;
    }
    let mut w_parts = Vec::new();
    let mut v_parts = Vec::new();
    for n in n0..n0 + window {
        for s in [n, -n] {
            w_parts.push(image(s, &data.w_hat)?);
            v_parts.push(image(s, &data.v_hat)?);
        }
    }
    Ok(Some(SynthesizedVertex {
        point: q,
        kind: SynthesizedKind::Parabolic {
            coset: coset.clone(),
            peripheral: data.peripheral,
            min_exponent: n0,
        },
        v: hull_around(q, &v_parts),
        w: hull_around(q, &w_parts),
        expansion: data.v_hat,
    }))
}

fn conical_vertex(
    z: f64,
    search: &mut ElementSearch<'_>,
    radius: usize,
    delta: f64,
) -> Result<Option<SynthesizedVertex>> {
    for len in 1..=radius {
        for (word, g) in search.layer(len)? {
            let inv = g.inverse()?;
            let zeta = map_angle(&inv, z);
            let w = AngleArc::ball(zeta, 2.0 * delta).image(g);
            if w.width <= delta / 2.0 {
                return Ok(Some(SynthesizedVertex {
                    point: z,
                    kind: SynthesizedKind::Conical {
                        element: word.clone(),
                        expansion_center: zeta,
                    },
                    v: AngleArc::ball(zeta, delta).image(g),
                    w,
                    expansion: AngleArc::ball(zeta, delta),
                }));
            }
        }
    }
    Ok(None)
}

/// Greedy cover of the test points by candidate `V` arcs, seeded with `chosen`.
fn greedy_cover(
    candidates: &[SynthesizedVertex],
    chosen: &mut Vec<usize>,
    tests: &[f64],
    conical_misses: &[f64],
    radius: usize,
) -> Result<()> {
    let mut uncovered: Vec<f64> = tests
        .iter()
        .copied()
        .filter(|&t| !chosen.iter().any(|&c| candidates[c].v.contains(t)))
        .collect();
    while let Some(&t) = uncovered.first() {
        let best = candidates
            .iter()
            .enumerate()
            .filter(|(i, c)| c.v.contains(t) && !chosen.contains(i))
            .map(|(i, c)| (i, uncovered.iter().filter(|&&u| c.v.contains(u)).count()))
            .fold(None, |acc: Option<(usize, usize)>, x| match acc {
                Some(a) if a.1 >= x.1 => Some(a),
                _ => Some(x),
            });
        let Some((i, _)) = best else {
            let near = conical_misses
                .iter()
                .copied()
                .min_by(|a, b| angle_distance(*a, t).total_cmp(&angle_distance(*b, t)));
            return Err(match near {
                Some(z) => failed(
                    &format!(
                        "conical_limit_neighborhoods (1)-(2): no word of length <= {radius} expands about the point"
                    ),
                    z,
                ),
                None => failed("finite subcover: no neighbourhood V_a contains the point", t),
            });
        };
        chosen.push(i);
        let v = candidates[i].v;
        uncovered.retain(|&u| !v.contains(u));
    }
    Ok(())
}

/// Builds a Γ-graph and compatible system for a group acting on `RP^1` and
/// certifies it with the same `ε`.
pub fn synthesize_rp1(pres: &GroupPresentation, params: &SynthesisParams) -> Result<SynthesisResult> {
    if pres.dim() != 2 {
        return Err(AutomatonError::InvalidPresentation(
            "synthesis needs an action on RP^1 (dimension 2)".into(),
        ));
    }
    let delta = params.delta;
    if !(delta > 0.0 && delta < PI / 8.0) || !(params.epsilon > 0.0 && params.epsilon < delta / 4.0) {
        return Err(AutomatonError::InvalidGraph(format!(
            "synthesis needs 0 < δ < π/8 and 0 < ε < δ/4 (got δ = {delta}, ε = {})",
            params.epsilon
        )));
    }
    let parabolics = parabolic_data(pres, delta)?;
    let mut search = ElementSearch::new(pres);

    // Parabolic candidates: orbit points g · p, shortest coset word first.
    let mut candidates: Vec<SynthesizedVertex> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    for data in &parabolics {
        let base = parabolic_vertex(data, &Word::identity(), &Matrix::identity(2), params)?.ok_or_else(|| {
            failed(
                "large_parabolic_neighborhood (1): no cofinite family fits in a δ-ball",
                data.fixed,
            )
        })?;
        chosen.push(candidates.len());
        candidates.push(base);
    }
    let mut orbit: Vec<f64> = parabolics.iter().map(|d| d.fixed).collect();
    let mut coset_reps = Vec::new();
    for len in 1..=params.parabolic_radius {
        coset_reps.extend(search.layer(len)?.iter().cloned());
    }
    for (word, g) in &coset_reps {
        for data in &parabolics {
            let q = map_angle(g, data.fixed);
            if orbit.iter().any(|&o| angle_distance(o, q) < 1e-9) {
                continue;
            }
            orbit.push(q);
            if let Some(c) = parabolic_vertex(data, word, g, params)? {
                candidates.push(c);
            }
        }
    }

    // Conical candidates at the test points.
    let tests: Vec<f64> = match &params.points {
        Some(p) => p.iter().map(|t| t.rem_euclid(PI)).collect(),
        None => (0..params.grid).map(|i| PI * i as f64 / params.grid as f64).collect(),
    };
    let mut conical_misses = Vec::new();
    for &z in &tests {
        if chosen.iter().any(|&c| candidates[c].v.contains(z)) && params.points.is_none() {
            // Already covered by a mandatory parabolic vertex.
            continue;
        }
        match conical_vertex(z, &mut search, params.search_radius, delta)? {
            Some(c) => candidates.push(c),
            None => conical_misses.push(z),
        }
    }

    greedy_cover(&candidates, &mut chosen, &tests, &conical_misses, params.search_radius)?;
    if params.points.is_none() {
        // The open arcs must cover the whole circle: every endpoint of a
        // chosen arc has to lie inside another chosen arc.
        for _ in 0..16 {
            let ends: Vec<f64> = chosen
                .iter()
                .flat_map(|&c| [candidates[c].v.start, candidates[c].v.end()])
                .filter(|&e| !chosen.iter().any(|&c| candidates[c].v.contains(e)))
                .collect();
            if ends.is_empty() {
                break;
            }
            let mut misses = Vec::new();
            for &e in &ends {
                if !candidates.iter().any(|c| c.v.contains(e)) {
                    match conical_vertex(e, &mut search, params.search_radius, delta)? {
                        Some(c) => candidates.push(c),
                        None => misses.push(e),
                    }
                }
            }
            greedy_cover(&candidates, &mut chosen, &ends, &misses, params.search_radius)?;
        }
    }
    chosen.sort_unstable();
    let verts: Vec<SynthesizedVertex> = chosen.iter().map(|&c| candidates[c].clone()).collect();

    let mut edges = Vec::new();
    for (a, va) in verts.iter().enumerate() {
        let before = edges.len();
        for (b, vb) in verts.iter().enumerate() {
            if va.expansion.meets(&vb.v) {
                edges.push((a, b));
            }
        }
        if edges.len() == before {
            return Err(failed("edge rule: vertex has no outgoing edge", va.point));
        }
    }

    let mut vertices = Vec::new();
    let mut domains = Vec::new();
    let (mut nc, mut np) = (0, 0);
    for v in &verts {
        let (name, label) = match &v.kind {
            SynthesizedKind::Conical { element, .. } => {
                nc += 1;
                (format!("c{nc}"), VertexLabel::Singleton { word: element.clone() })
            }
            SynthesizedKind::Parabolic {
                coset,
                peripheral,
                min_exponent,
            } => {
                np += 1;
                (
                    format!("p{np}"),
                    VertexLabel::ParabolicFamily {
                        coset: coset.clone(),
                        peripheral: *peripheral,
                        exclude: Vec::new(),
                        exclude_below: *min_exponent as u64,
                    },
                )
            }
        };
        vertices.push(Vertex { name, label });
        domains.push(ProperDomain::arc(v.w.center(), v.w.width / 2.0)?);
    }
    let graph = GammaGraph::new(vertices, edges, params.epsilon)?;
    let system = CompatibleSystem::new(domains);
    let certificate = verify_compatibility(&graph, &system, pres, &params.certify)?;
    if !certificate.pass {
        let point = certificate
            .records
            .iter()
            .find(|r| !r.pass)
            .map_or(f64::NAN, |r| verts[r.from].point);
        return Err(failed(
            &format!(
                "compatibility of the synthesized system: {}",
                certificate.first_failure.clone().unwrap_or_default()
            ),
            point,
        ));
    }
    Ok(SynthesisResult {
        graph,
        system,
        vertices: verts,
        certificate,
    })
}
