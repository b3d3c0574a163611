//! Projective points, hyperplanes, flags, lines, affine charts and the
//! cross-ratio on `RP^{d-1}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LinalgError, Matrix};

/// Default incidence tolerance.
pub const INCIDENCE_TOL: f64 = 1e-10;
/// Default minimum opposition margin for an "opposite" verdict.
pub const OPPOSITION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has (numerically) zero norm")]
    DegenerateImage,
    #[error("point is not in the affine chart (margin {margin:e})")]
    NotInChart { margin: f64 },
    #[error("cross-ratio is infinite: a point lies on a reference hyperplane")]
    InfiniteCrossRatio,
    #[error("points coincide")]
    CoincidentPoints,
    #[error("line lies in the hyperplane")]
    LineInHyperplane,
    #[error("point is not incident to the hyperplane (residual {residual:e})")]
    NotIncident { residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ProjError>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Unit vector with its largest-magnitude entry made nonnegative.
fn canonicalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if !(n > 1e-300) || !n.is_finite() {
        return Err(ProjError::DegenerateImage);
    }
    let mut out: Vec<f64> = v.iter().map(|x| x / n).collect();
    let lead = out
        .iter()
        .copied()
        .fold(0.0f64, |b, x| if x.abs() > b.abs() + 1e-14 { x } else { b });
    if lead < 0.0 {
        out.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(out)
}

/// A point of `RP^{d-1}`, stored as a sign-canonical unit vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjPoint {
    coords: Vec<f64>,
}

impl ProjPoint {
    /// Accepts any nonzero homogeneous coordinates.
    pub fn new(coords: &[f64]) -> Result<Self> {
        Ok(Self {
            coords: canonicalize(coords)?,
        })
    }

    /// `[x : 1]`, or `[1 : 0]` for infinite `x`.
    pub fn rp1(x: f64) -> Self {
        if x.is_infinite() {
            Self::new(&[1.0, 0.0]).unwrap()
        } else {
            Self::new(&[x, 1.0]).unwrap()
        }
    }

    /// `[cos θ : sin θ]`.
    pub fn from_angle(theta: f64) -> Self {
        Self::new(&[theta.cos(), theta.sin()]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Angle in `[0, π)` of a point of `RP^1`.
    pub fn angle(&self) -> f64 {
        let t = self.coords[1].atan2(self.coords[0]);
        t.rem_euclid(std::f64::consts::PI)
    }
}

/// A projective hyperplane, stored as a sign-canonical unit covector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjHyperplane {
    covector: Vec<f64>,
}

impl ProjHyperplane {
    pub fn new(covector: &[f64]) -> Result<Self> {
        Ok(Self {
            covector: canonicalize(covector)?,
        })
    }

    /// The hyperplane `{x : ⟨x, p⟩ = 0}` orthogonal to `p`.
    pub fn orthogonal_to(p: &ProjPoint) -> Self {
        Self {
            covector: p.coords.clone(),
        }
    }

    /// In `RP^1`, the functional whose kernel is the point `p`.
    pub fn kernel_of(p: &ProjPoint) -> Self {
        assert_eq!(p.dim(), 2, "kernel_of is defined on RP^1");
        Self::new(&[p.coords[1], -p.coords[0]]).unwrap()
    }

    pub fn dim(&self) -> usize {
        self.covector.len()
    }

    pub fn covector(&self) -> &[f64] {
        &self.covector
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        dot(&self.covector, v)
    }
}

/// A point lying in a hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub point: ProjPoint,
    pub hyperplane: ProjHyperplane,
}

impl Flag {
    pub fn new(point: ProjPoint, hyperplane: ProjHyperplane) -> Result<Self> {
        check_dims(point.dim(), hyperplane.dim())?;
        let residual = opposition_margin(&point, &hyperplane);
        if residual > INCIDENCE_TOL {
            return Err(ProjError::NotIncident { residual });
        }
        Ok(Self { point, hyperplane })
    }

    /// Both cross-pairings exceed `tol`.
    pub fn is_opposite(&self, other: &Flag, tol: f64) -> bool {
        opposition_margin(&self.point, &other.hyperplane) > tol
            && opposition_margin(&other.point, &self.hyperplane) > tol
    }

    pub fn act(&self, m: &Matrix) -> Result<Self> {
        Ok(Self {
            point: act(m, &self.point)?,
            hyperplane: act_dual(m, &self.hyperplane)?,
        })
    }
}

/// The projective line spanned by two points, with an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectiveLine {
    basis: [Vec<f64>; 2],
}

impl ProjectiveLine {
    pub fn basis(&self) -> &[Vec<f64>; 2] {
        &self.basis
    }

    /// The point `cos t · b₀ + sin t · b₁`.
    pub fn point_at(&self, t: f64) -> ProjPoint {
        let v: Vec<f64> = self.basis[0]
            .iter()
            .zip(&self.basis[1])
            .map(|(a, b)| t.cos() * a + t.sin() * b)
            .collect();
        ProjPoint::new(&v).unwrap()
    }
}

fn check_dims(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(ProjError::DimensionMismatch { left, right });
    }
    Ok(())
}

pub fn act(m: &Matrix, p: &ProjPoint) -> Result<ProjPoint> {
    check_dims(m.dim(), p.dim())?;
    ProjPoint::new(&m.mul_vec(&p.coords))
}

/// Inverse-transpose action on hyperplanes, so incidence is preserved.
pub fn act_dual(m: &Matrix, h: &ProjHyperplane) -> Result<ProjHyperplane> {
    check_dims(m.dim(), h.dim())?;
    let inv = m.inverse()?;
    act_dual_with_inverse(&inv, h)
}

/// As [`act_dual`], given `m⁻¹` already.
pub fn act_dual_with_inverse(inverse: &Matrix, h: &ProjHyperplane) -> Result<ProjHyperplane> {
    check_dims(inverse.dim(), h.dim())?;
    ProjHyperplane::new(&inverse.tr_mul_vec(&h.covector))
}

/// `|⟨covector, coords⟩|` for unit representatives.
pub fn opposition_margin(p: &ProjPoint, h: &ProjHyperplane) -> f64 {
    dot(&p.coords, &h.covector).abs()
}

/// An affine chart `Opp(h)` together with the orthonormal completion of `h`
/// used for its coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartFrame {
    hyperplane: ProjHyperplane,
    basis: Vec<Vec<f64>>,
}

impl ChartFrame {
    /// Completes the covector to an orthonormal basis by Gram–Schmidt on the
    /// standard basis, skipping the standard vector most aligned with it.
    pub fn new(h: &ProjHyperplane) -> Self {
        let d = h.dim();
        let c = h.covector();
        let skip = (0..d).fold(0, |best, i| if c[i].abs() > c[best].abs() + 1e-14 { i } else { best });
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
        for j in (0..d).filter(|&j| j != skip) {
            let mut v = vec![0.0; d];
            v[j] = 1.0;
            for _ in 0..2 {
                let a = dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= a * y);
                for b in &basis {
                    let a = dot(&v, b);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= a * y);
                }
            }
            let n = norm(&v);
            v.iter_mut().for_each(|x| *x /= n);
            basis.push(v);
        }
        Self {
            hyperplane: h.clone(),
            basis,
        }
    }

    pub fn hyperplane(&self) -> &ProjHyperplane {
        &self.hyperplane
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// Number of chart coordinates, `d - 1`.
    pub fn chart_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn coords(&self, p: &ProjPoint) -> Result<Vec<f64>> {
        self.coords_of_vector(p.coords())
    }

    pub fn coords_of_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dims(v.len(), self.hyperplane.dim())?;
        let n = norm(v);
        let h = dot(v, self.hyperplane.covector());
        if !(h.abs() > 1e-12 * n) {
            return Err(ProjError::NotInChart { margin: h.abs() / n });
        }
        Ok(self.basis.iter().map(|b| dot(b, v) / h).collect())
    }

    /// Homogeneous lift `h + Σ cᵢ bᵢ` (pairs to 1 with the chart covector).
    pub fn lift(&self, coords: &[f64]) -> Vec<f64> {
        let mut v = self.hyperplane.covector().to_vec();
        for (c, b) in coords.iter().zip(&self.basis) {
            v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
        v
    }

    pub fn point(&self, coords: &[f64]) -> ProjPoint {
        ProjPoint::new(&self.lift(coords)).expect("chart lift is nonzero")
    }

    /// The covector of the affine hyperplane `{u : ⟨normal, u⟩ = offset}`.
    pub fn affine_covector(&self, normal: &[f64], offset: f64) -> Vec<f64> {
        let mut w: Vec<f64> = self.hyperplane.covector().iter().map(|x| -offset * x).collect();
        for (a, b) in normal.iter().zip(&self.basis) {
            w.iter_mut().zip(b).for_each(|(x, y)| *x += a * y);
        }
        w
    }

    /// Transported chart: the image of a point in this chart has the same
    /// coordinates in `m·chart` only up to an affine map; this returns
    /// the frame of the image hyperplane.
    pub fn transported(&self, m: &Matrix) -> Result<Self> {
        Ok(Self::new(&act_dual(m, &self.hyperplane)?))
    }
}

/// Coordinates of `p` in the affine chart `Opp(h)`.
pub fn affine_chart(h: &ProjHyperplane, p: &ProjPoint) -> Result<Vec<f64>> {
    if !(opposition_margin(p, h) > 1e-12) {
        return Err(ProjError::NotInChart {
            margin: opposition_margin(p, h),
        });
    }
    ChartFrame::new(h).coords(p)
}

/// Inverse of [`affine_chart`].
pub fn chart_point(h: &ProjHyperplane, coords: &[f64]) -> ProjPoint {
    ChartFrame::new(h).point(coords)
}

/// `[w₁, w₂; z₁, z₂] = w₁(z₂) w₂(z₁) / (w₁(z₁) w₂(z₂))`.
pub fn cross_ratio(
    w1: &ProjHyperplane,
    w2: &ProjHyperplane,
    z1: &ProjPoint,
    z2: &ProjPoint,
) -> Result<f64> {
    check_dims(w1.dim(), z1.dim())?;
    check_dims(w2.dim(), z2.dim())?;
    cross_ratio_vectors(w1.covector(), w2.covector(), z1.coords(), z2.coords())
}

/// Cross-ratio of raw (unnormalized) lifts.
pub fn cross_ratio_vectors(w1: &[f64], w2: &[f64], z1: &[f64], z2: &[f64]) -> Result<f64> {
    let a = dot(w1, z1) / (norm(w1) * norm(z1));
    let b = dot(w2, z2) / (norm(w2) * norm(z2));
    if a.abs() <= 1e-14 || b.abs() <= 1e-14 {
        return Err(ProjError::InfiniteCrossRatio);
    }
    Ok(dot(w1, z2) * dot(w2, z1) / (dot(w1, z1) * dot(w2, z2)))
}

/// The classical four-point cross-ratio on `RP^1`,
/// `[a, b; c, d] = (d − a)(c − b) / ((c − a)(d − b))`.
pub fn rp1_cross_ratio(a: &ProjPoint, b: &ProjPoint, c: &ProjPoint, d: &ProjPoint) -> Result<f64> {
    cross_ratio(&ProjHyperplane::kernel_of(a), &ProjHyperplane::kernel_of(b), c, d)
}

pub fn line_through(p: &ProjPoint, q: &ProjPoint) -> Result<ProjectiveLine> {
    check_dims(p.dim(), q.dim())?;
    if fubini_study(p, q) <= 1e-10 {
        return Err(ProjError::CoincidentPoints);
    }
    let b0 = p.coords.clone();
    let a = dot(&q.coords, &b0);
    let mut b1: Vec<f64> = q.coords.iter().zip(&b0).map(|(x, y)| x - a * y).collect();
    let n = norm(&b1);
    b1.iter_mut().for_each(|x| *x /= n);
    Ok(ProjectiveLine { basis: [b0, b1] })
}

pub fn intersect(line: &ProjectiveLine, h: &ProjHyperplane) -> Result<ProjPoint> {
    check_dims(line.basis[0].len(), h.dim())?;
    let a = h.eval(&line.basis[0]);
    let b = h.eval(&line.basis[1]);
    if a.hypot(b) < 1e-12 {
        return Err(ProjError::LineInHyperplane);
    }
    let v: Vec<f64> = line.basis[0]
        .iter()
        .zip(&line.basis[1])
        .map(|(x, y)| b * x - a * y)
        .collect();
    ProjPoint::new(&v)
}

/// Fubini–Study distance, `arccos |⟨p, q⟩|`, evaluated stably for close points.
pub fn fubini_study(p: &ProjPoint, q: &ProjPoint) -> f64 {
    fubini_study_vectors(p.coords(), q.coords())
}

/// Fubini–Study distance between the classes of two nonzero vectors.
pub fn fubini_study_vectors(p: &[f64], q: &[f64]) -> f64 {
    let np = norm(p);
    let nq = norm(q);
    let c = dot(p, q) / (np * nq);
    let s = p
        .iter()
        .zip(q)
        .map(|(x, y)| {
            let r = x / np - c * y / nq;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    s.atan2(c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, d: usize) -> ProjPoint {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        ProjPoint::new(&v).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
        Matrix::from_row_major(d, (0..d * d).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn action_examples() {
        let p = ProjPoint::new(&[1.0, 1.0]).unwrap();
        assert!(fubini_study(&act(&Matrix::identity(2), &p).unwrap(), &p) < 1e-15);
        let q = act(&Matrix::diag(&[2.0, 1.0]), &p).unwrap();
        assert!(fubini_study(&q, &ProjPoint::new(&[2.0, 1.0]).unwrap()) < 1e-15);
        let g = Matrix::from_rows(&[vec![1.0, 2.0], vec![-0.5, 3.0]]).unwrap();
        let back = act(&g.inverse().unwrap(), &act(&g, &p).unwrap()).unwrap();
        assert!(fubini_study(&back, &p) < 1e-10);
        assert!(matches!(
            act(&Matrix::identity(3), &p),
            Err(ProjError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dual_action_preserves_incidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = random_matrix(&mut rng, 4);
            let h = ProjHyperplane::new(&(0..4).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let frame = ChartFrame::new(&h);
            // A point in h: any combination of the frame basis.
            let v: Vec<f64> = frame.basis()[0].iter().zip(&frame.basis()[1]).map(|(a, b)| a - 0.3 * b).collect();
            let p = ProjPoint::new(&v).unwrap();
            let flag = Flag::new(p, h).unwrap();
            let moved = flag.act(&m).unwrap();
            assert!(opposition_margin(&moved.point, &moved.hyperplane) <= 1e-9);
        }
        let h = ProjHyperplane::new(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(act_dual(&Matrix::identity(3), &h).unwrap().covector(), h.covector());
        assert_eq!(act_dual(&Matrix::diag(&[2.0, 1.0, 1.0]), &h).unwrap().covector(), h.covector());
    }

    #[test]
    fn opposition_examples() {
        let p = ProjPoint::rp1(f64::INFINITY); // [1:0]
        let h0 = ProjHyperplane::new(&[1.0, 0.0]).unwrap();
        let h1 = ProjHyperplane::new(&[0.0, 1.0]).unwrap();
        assert_eq!(opposition_margin(&p, &h1), 0.0);
        assert_eq!(opposition_margin(&p, &h0), 1.0);
        let q = ProjPoint::new(&[1.0, 1.0]).unwrap();
        assert!((opposition_margin(&q, &h0) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flags_opposition_symmetric_and_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let make = |rng: &mut ChaCha8Rng| {
            let h = ProjHyperplane::new(&(0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let f = ChartFrame::new(&h);
            Flag::new(ProjPoint::new(&f.basis()[0]).unwrap(), h).unwrap()
        };
        for _ in 0..50 {
            let a = make(&mut rng);
            let b = make(&mut rng);
            let m = random_matrix(&mut rng, 3);
            assert_eq!(a.is_opposite(&b, OPPOSITION_TOL), b.is_opposite(&a, OPPOSITION_TOL));
            let (am, bm) = (a.act(&m).unwrap(), b.act(&m).unwrap());
            assert_eq!(a.is_opposite(&b, 1e-3), am.is_opposite(&bm, 1e-3) || !a.is_opposite(&b, 1e-2));
        }
        assert!(Flag::new(ProjPoint::rp1(0.0), ProjHyperplane::new(&[0.0, 1.0]).unwrap()).is_err());
    }

    #[test]
    fn chart_examples() {
        let h = ProjHyperplane::new(&[0.0, 1.0]).unwrap();
        for t in [-3.0, 0.0, 0.25, 7.5] {
            let c = affine_chart(&h, &ProjPoint::rp1(t)).unwrap();
            assert!((c[0] - t).abs() < 1e-14);
        }
        let h3 = ProjHyperplane::new(&[1.0, 2.0, -0.5]).unwrap();
        let origin = ProjPoint::new(h3.covector()).unwrap();
        assert!(affine_chart(&h3, &origin).unwrap().iter().all(|x| x.abs() < 1e-15));
        assert!(matches!(
            affine_chart(&h, &ProjPoint::rp1(f64::INFINITY)),
            Err(ProjError::NotInChart { .. })
        ));
    }

    #[test]
    fn chart_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = ProjHyperplane::new(&[0.3, -1.0, 0.5, 0.2]).unwrap();
        let frame = ChartFrame::new(&h);
        for _ in 0..1000 {
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let p = chart_point(&h, &c);
            let back = frame.coords(&p).unwrap();
            for (a, b) in c.iter().zip(&back) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn chart_image_of_ball_is_bounded() {
        // Points at FS distance ≥ 0.2 from the hyperplane have chart norm ≤ cot(0.2).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = ProjHyperplane::new(&[1.0, 1.0, 0.0]).unwrap();
        let frame = ChartFrame::new(&h);
        for _ in 0..1000 {
            let p = random_point(&mut rng, 3);
            if opposition_margin(&p, &h) > 0.2f64.sin() {
                let c = frame.coords(&p).unwrap();
                assert!(norm(&c) <= 1.0 / 0.2f64.tan() + 1e-9);
            }
        }
    }

    #[test]
    fn cross_ratio_convention() {
        let w0 = ProjHyperplane::kernel_of(&ProjPoint::rp1(0.0));
        let winf = ProjHyperplane::kernel_of(&ProjPoint::rp1(f64::INFINITY));
        let one = ProjPoint::rp1(1.0);
        assert!((cross_ratio(&w0, &winf, &one, &ProjPoint::rp1(5.0)).unwrap() - 5.0).abs() < 1e-12);
        assert!((cross_ratio(&w0, &winf, &one, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            cross_ratio(&w0, &winf, &ProjPoint::rp1(0.0), &one),
            Err(ProjError::InfiniteCrossRatio)
        ));
        // Four-point formula.
        let [a, b, c, d] = [0.5, 2.0, -1.0, 3.0];
        let expect = (d - a) * (c - b) / ((c - a) * (d - b));
        let got = rp1_cross_ratio(
            &ProjPoint::rp1(a),
            &ProjPoint::rp1(b),
            &ProjPoint::rp1(c),
            &ProjPoint::rp1(d),
        )
        .unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn cross_ratio_invariance_and_cocycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let d = 3;
            let w1 = ProjHyperplane::new(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let w2 = ProjHyperplane::new(&(0..d).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let z1 = random_point(&mut rng, d);
            let z2 = random_point(&mut rng, d);
            let Ok(cr) = cross_ratio(&w1, &w2, &z1, &z2) else { continue };
            if cr.abs() > 1e6 || cr.abs() < 1e-6 {
                continue;
            }
            let g = random_matrix(&mut rng, d);
            let moved = cross_ratio(
                &act_dual(&g, &w1).unwrap(),
                &act_dual(&g, &w2).unwrap(),
                &act(&g, &z1).unwrap(),
                &act(&g, &z2).unwrap(),
            )
            .unwrap();
            assert!((moved - cr).abs() <= 1e-9 * cr.abs().max(1.0));
            if let Ok(swapped) = cross_ratio(&w1, &w2, &z2, &z1) {
                assert!((cr * swapped - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lines_and_intersections() {
        let l = line_through(&ProjPoint::new(&[1.0, 0.0, 0.0]).unwrap(), &ProjPoint::new(&[0.0, 1.0, 0.0]).unwrap()).unwrap();
        let h = ProjHyperplane::new(&[1.0, -1.0, 0.0]).unwrap();
        let x = intersect(&l, &h).unwrap();
        assert!(fubini_study(&x, &ProjPoint::new(&[1.0, 1.0, 0.0]).unwrap()) < 1e-12);
        assert!(matches!(
            intersect(&l, &ProjHyperplane::new(&[0.0, 0.0, 1.0]).unwrap()),
            Err(ProjError::LineInHyperplane)
        ));
        let p = ProjPoint::rp1(2.0);
        assert!(matches!(line_through(&p, &p), Err(ProjError::CoincidentPoints)));

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = random_point(&mut rng, 4);
            let q = random_point(&mut rng, 4);
            let l = line_through(&p, &q).unwrap();
            let h1 = ProjHyperplane::new(&(0..4).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let h2 = ProjHyperplane::new(&(0..4).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
            let x1 = intersect(&l, &h1).unwrap();
            let x2 = intersect(&l, &h2).unwrap();
            assert!(opposition_margin(&x1, &h1) <= 1e-10);
            if opposition_margin(&p, &h1) > 1e-3 && opposition_margin(&q, &h2) > 1e-3 && fubini_study(&x1, &x2) > 1e-6 {
                // Kernels of h1, h2 restricted to the line are x1, x2.
                let cr = cross_ratio(&h1, &h2, &p, &q).unwrap();
                assert!(cr.is_finite() && cr != 0.0);
            }
        }
    }

    #[test]
    fn fubini_study_metric() {
        let p = ProjPoint::new(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(fubini_study(&p, &p), 0.0);
        let q = ProjPoint::new(&[0.0, 1.0, 0.0]).unwrap();
        assert!((fubini_study(&p, &q) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        // Small distances keep full relative precision.
        let r = ProjPoint::new(&[1.0, 1e-12, 0.0]).unwrap();
        assert!((fubini_study(&p, &r) - 1e-12).abs() < 1e-24);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let a = random_point(&mut rng, 3);
            let b = random_point(&mut rng, 3);
            let c = random_point(&mut rng, 3);
            assert!(fubini_study(&a, &c) <= fubini_study(&a, &b) + fubini_study(&b, &c) + 1e-12);
        }
    }

    #[test]
    fn action_is_a_group_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let g = random_matrix(&mut rng, 3);
            let h = random_matrix(&mut rng, 3);
            let p = random_point(&mut rng, 3);
            let a = act(&g.mul(&h).unwrap(), &p).unwrap();
            let b = act(&g, &act(&h, &p).unwrap()).unwrap();
            assert!(fubini_study(&a, &b) < 1e-10);
        }
    }
}
