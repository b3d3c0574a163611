//! Dense small-dimension real linear algebra.
//!
//! Everything here works on square matrices of dimension at most
//! [`MAX_DIM`]. The singular value decomposition is a one-sided (Hestenes)
//! Jacobi iteration with a fixed cyclic sweep order, so results are
//! bit-for-bit reproducible for a fixed input.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest supported matrix dimension.
pub const MAX_DIM: usize = 20;
/// Largest supported exterior-power dimension `C(d, k)`.
pub const MAX_EXTERIOR_DIM: usize = 200;
/// Default cap on Jacobi sweeps.
pub const DEFAULT_SWEEP_CAP: usize = 100;
/// Default threshold `T` for flagging a gap trace as divergent (`e^5 ~ 148`).
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular (|det| = {det:e} after scaling)")]
    SingularInput { det: f64 },
    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("exterior degree {k} out of range for dimension {dim}")]
    BadDegree { k: usize, dim: usize },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("malformed matrix: {0}")]
    Malformed(String),
    #[error("empty sequence")]
    EmptySequence,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// A square real matrix, stored row-major.
///
/// When every entry is an integer the matrix also keeps an exact copy, so
/// products of integer matrices stay exact and group elements can be
/// compared by exact equality.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
    exact: Option<Vec<i128>>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.dim {
            list.entry(&self.row(i));
        }
        list.finish()
    }
}

// Entries above this magnitude are not tracked exactly.
const EXACT_LIMIT: i128 = 1 << 100;

impl Matrix {
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(LinalgError::Malformed("zero dimension".into()));
        }
        if dim > MAX_EXTERIOR_DIM {
            return Err(LinalgError::DimensionTooLarge {
                dim,
                max: MAX_EXTERIOR_DIM,
            });
        }
        if data.len() != dim * dim {
            return Err(LinalgError::Malformed(format!(
                "expected {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(LinalgError::Malformed("non-finite entry".into()));
        }
        let exact = if data.iter().all(|x| x.fract() == 0.0 && x.abs() < 1e15) {
            Some(data.iter().map(|&x| x as i128).collect())
        } else {
            None
        };
        Ok(Self { dim, data, exact })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LinalgError::Malformed("matrix is not square".into()));
        }
        Self::from_row_major(dim, rows.iter().flatten().copied().collect())
    }

    pub fn from_int_rows(rows: &[Vec<i64>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LinalgError::Malformed("matrix is not square".into()));
        }
        let exact: Vec<i128> = rows.iter().flatten().map(|&x| x as i128).collect();
        Ok(Self::from_exact(dim, exact))
    }

    fn from_exact(dim: usize, exact: Vec<i128>) -> Self {
        let data = exact.iter().map(|&x| x as f64).collect();
        Self {
            dim,
            data,
            exact: Some(exact),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut exact = vec![0i128; dim * dim];
        for i in 0..dim {
            exact[i * dim + i] = 1;
        }
        Self::from_exact(dim, exact)
    }

    pub fn diag(entries: &[f64]) -> Self {
        let dim = entries.len();
        let mut data = vec![0.0; dim * dim];
        for (i, &x) in entries.iter().enumerate() {
            data[i * dim + i] = x;
        }
        Self::from_row_major(dim, data).expect("finite diagonal")
    }

    /// Block-diagonal matrix with the given blocks along the diagonal.
    pub fn block_diag(blocks: &[&Matrix]) -> Self {
        let dim: usize = blocks.iter().map(|b| b.dim).sum();
        let mut data = vec![0.0; dim * dim];
        let mut offset = 0;
        for b in blocks {
            for i in 0..b.dim {
                for j in 0..b.dim {
                    data[(offset + i) * dim + offset + j] = b.get(i, j);
                }
            }
            offset += b.dim;
        }
        let mut out = Self::from_row_major(dim, data).expect("finite blocks");
        if blocks.iter().all(|b| b.is_exact()) {
            out.exact = Some(out.data.iter().map(|&x| x as i128).collect());
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_entries(&self) -> Option<&[i128]> {
        self.exact.as_deref()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
            exact: if s == 1.0 {
                self.exact.clone()
            } else if s == -1.0 {
                self.exact.as_ref().map(|e| e.iter().map(|x| -x).collect())
            } else {
                None
            },
        }
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                data[j * d + i] = self.data[i * d + j];
            }
        }
        let exact = self.exact.as_ref().map(|e| {
            let mut t = vec![0; d * d];
            for i in 0..d {
                for j in 0..d {
                    t[j * d + i] = e[i * d + j];
                }
            }
            t
        });
        Self { dim: d, data, exact }
    }

    pub fn mul(&self, other: &Matrix) -> Result<Self> {
        if self.dim != other.dim {
            return Err(LinalgError::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let d = self.dim;
        if let (Some(a), Some(b)) = (&self.exact, &other.exact) {
            let mut c = vec![0i128; d * d];
            let mut overflow = false;
            'outer: for i in 0..d {
                for j in 0..d {
                    let mut acc: i128 = 0;
                    for k in 0..d {
                        match a[i * d + k]
                            .checked_mul(b[k * d + j])
                            .and_then(|p| acc.checked_add(p))
                        {
                            Some(v) => acc = v,
                            None => {
                                overflow = true;
                                break 'outer;
                            }
                        }
                    }
                    if acc.abs() > EXACT_LIMIT {
                        overflow = true;
                        break 'outer;
                    }
                    c[i * d + j] = acc;
                }
            }
            if !overflow {
                return Ok(Self::from_exact(d, c));
            }
        }
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self.data[i * d + k];
                if aik == 0.0 {
                    continue;
                }
                for j in 0..d {
                    data[i * d + j] += aik * other.data[k * d + j];
                }
            }
        }
        Ok(Self {
            dim: d,
            data,
            exact: None,
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum())
            .collect()
    }

    /// `self^T v`, i.e. the row vector `v^T self` as a column.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|j| (0..d).map(|i| self.data[i * d + j] * v[i]).sum())
            .collect()
    }

    pub fn det(&self) -> f64 {
        if let Some(e) = &self.exact {
            if let Some(v) = bareiss_det(self.dim, e) {
                return v as f64;
            }
        }
        lu_det(self.dim, &self.data)
    }

    /// Exact determinant for integer matrices.
    pub fn exact_det(&self) -> Option<i128> {
        self.exact.as_ref().and_then(|e| bareiss_det(self.dim, e))
    }

    pub fn inverse(&self) -> Result<Self> {
        if let (Some(e), Some(det)) = (&self.exact, self.exact_det()) {
            if det == 1 || det == -1 {
                if let Some(adj) = exact_adjugate(self.dim, e) {
                    return Ok(Self::from_exact(
                        self.dim,
                        adj.into_iter().map(|x| x * det).collect(),
                    ));
                }
            }
        }
        gauss_jordan_inverse(self)
    }

    /// Integer power; negative exponents use the inverse.
    pub fn pow(&self, n: i64) -> Result<Self> {
        let mut base = if n < 0 { self.inverse()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Self::identity(self.dim);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(acc)
    }

    /// Canonical representative of the projective class: `|det| = 1` and the
    /// first nonzero entry positive.
    pub fn projective_normalize(&self) -> Result<Self> {
        let det = self.det();
        if det.abs() < 1e-300 || !det.is_finite() {
            return Err(LinalgError::SingularInput { det });
        }
        let first = self
            .data
            .iter()
            .copied()
            .find(|x| *x != 0.0)
            .unwrap_or(1.0);
        let sign = if first < 0.0 { -1.0 } else { 1.0 };
        let mag = det.abs().powf(1.0 / self.dim as f64);
        if let Some(exact_det) = self.exact_det() {
            if exact_det.abs() == 1 {
                return Ok(self.scale(sign));
            }
        }
        Ok(self.scale(sign / mag))
    }

    /// Rescales by the sup norm, returning the scale factor that was removed.
    pub fn sup_normalize(&self) -> (Self, f64) {
        let m = self.max_abs();
        if m == 0.0 || m == 1.0 {
            return (self.clone(), 1.0);
        }
        (self.scale(1.0 / m), m)
    }

    /// Entrywise maximum absolute difference.
    pub fn max_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Projective distance between two matrices: the entrywise distance between
    /// their sup-normalized, sign-canonical representatives.
    pub fn projective_diff(&self, other: &Matrix) -> f64 {
        let canon = |m: &Matrix| {
            let (n, _) = m.sup_normalize();
            let first = n.data.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
            if first < 0.0 {
                n.scale(-1.0)
            } else {
                n
            }
        };
        canon(self).max_diff(&canon(other))
    }
}

fn lu_det(d: usize, data: &[f64]) -> f64 {
    let mut a = data.to_vec();
    let mut det = 1.0;
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[piv * d + col].abs() {
                piv = r;
            }
        }
        if a[piv * d + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..d {
                a.swap(piv * d + c, col * d + c);
            }
            det = -det;
        }
        let p = a[col * d + col];
        det *= p;
        for r in col + 1..d {
            let f = a[r * d + col] / p;
            if f != 0.0 {
                for c in col..d {
                    a[r * d + c] -= f * a[col * d + c];
                }
            }
        }
    }
    det
}

/// Fraction-free determinant; `None` on overflow.
fn bareiss_det(d: usize, data: &[i128]) -> Option<i128> {
    let mut a = data.to_vec();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..d {
        if a[k * d + k] == 0 {
            let swap = (k + 1..d).find(|&r| a[r * d + k] != 0)?;
            for c in 0..d {
                a.swap(swap * d + c, k * d + c);
            }
            sign = -sign;
        }
        for i in k + 1..d {
            for j in k + 1..d {
                let v = a[i * d + j]
                    .checked_mul(a[k * d + k])?
                    .checked_sub(a[i * d + k].checked_mul(a[k * d + j])?)?;
                a[i * d + j] = v / prev;
            }
        }
        prev = a[k * d + k];
    }
    Some(sign * a[(d - 1) * d + d - 1])
}

fn exact_adjugate(d: usize, e: &[i128]) -> Option<Vec<i128>> {
    if d == 1 {
        return Some(vec![1]);
    }
    let mut adj = vec![0i128; d * d];
    for i in 0..d {
        for j in 0..d {
            let minor: Vec<i128> = (0..d)
                .filter(|&r| r != i)
                .flat_map(|r| (0..d).filter(move |&c| c != j).map(move |c| e[r * d + c]))
                .collect();
            let m = bareiss_det(d - 1, &minor)?;
            let s = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j * d + i] = s * m;
        }
    }
    Some(adj)
}

fn gauss_jordan_inverse(m: &Matrix) -> Result<Matrix> {
    let d = m.dim;
    let scale = m.max_abs();
    if scale == 0.0 {
        return Err(LinalgError::SingularInput { det: 0.0 });
    }
    let mut a: Vec<f64> = m.data.iter().map(|x| x / scale).collect();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for col in 0..d {
        let mut piv = col;
        for r in col + 1..d {
            if a[r * d + col].abs() > a[piv * d + col].abs() {
                piv = r;
            }
        }
        let p = a[piv * d + col];
        if p.abs() < 1e-300 {
            return Err(LinalgError::SingularInput { det: 0.0 });
        }
        if piv != col {
            for c in 0..d {
                a.swap(piv * d + c, col * d + c);
                inv.swap(piv * d + c, col * d + c);
            }
        }
        for c in 0..d {
            a[col * d + c] /= p;
            inv[col * d + c] /= p;
        }
        for r in 0..d {
            if r == col {
                continue;
            }
            let f = a[r * d + col];
            if f != 0.0 {
                for c in 0..d {
                    a[r * d + c] -= f * a[col * d + c];
                    inv[r * d + c] -= f * inv[col * d + c];
                }
            }
        }
    }
    Matrix::from_row_major(d, inv.into_iter().map(|x| x / scale).collect())
}

/// `m = u · diag(sigma) · vᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularDecomposition {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    /// Max entrywise reconstruction error.
    pub residual: f64,
}

impl SingularDecomposition {
    /// `log(σ_k / σ_{k+1})` for 1-based `k`.
    pub fn log_gap(&self, k: usize) -> f64 {
        (self.sigma[k - 1] / self.sigma[k]).ln()
    }

    pub fn left_vector(&self, j: usize) -> Vec<f64> {
        self.u.column(j)
    }

    pub fn right_vector(&self, j: usize) -> Vec<f64> {
        self.v.column(j)
    }
}

pub fn svd(m: &Matrix) -> Result<SingularDecomposition> {
    svd_with_cap(m, DEFAULT_SWEEP_CAP)
}

pub fn svd_with_cap(m: &Matrix, sweep_cap: usize) -> Result<SingularDecomposition> {
    let d = m.dim;
    let scale = m.max_abs();
    if scale == 0.0 {
        return Err(LinalgError::SingularInput { det: 0.0 });
    }
    let scaled: Vec<f64> = m.data.iter().map(|x| x / scale).collect();
    let det = lu_det(d, &scaled);
    if det.abs() <= 1e-300 {
        return Err(LinalgError::SingularInput { det });
    }

    // Column-major working copies: w[j] is column j.
    let mut w: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| scaled[i * d + j]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..d).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let tol = 1e-15;
    let mut converged = d == 1;
    for _ in 0..sweep_cap {
        let mut rotated = false;
        for p in 0..d {
            for q in p + 1..d {
                let (alpha, beta, gamma) = w[p].iter().zip(&w[q]).fold(
                    (0.0, 0.0, 0.0),
                    |(a, b, g), (x, y)| (a + x * x, b + y * y, g + x * y),
                );
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence { sweeps: sweep_cap });
    }

    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = w
        .into_iter()
        .zip(v)
        .map(|(col, vcol)| {
            let s = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: Vec<f64> = col.iter().map(|x| x / s).collect();
            (s, u, vcol)
        })
        .collect();
    // Stable sort keeps the sweep order for ties.
    triples.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut u_data = vec![0.0; d * d];
    let mut v_data = vec![0.0; d * d];
    let mut sigma = Vec::with_capacity(d);
    for (j, (s, mut ucol, mut vcol)) in triples.into_iter().enumerate() {
        let lead = ucol
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() + 1e-14 { x } else { best });
        if lead < 0.0 {
            ucol.iter_mut().for_each(|x| *x = -*x);
            vcol.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..d {
            u_data[i * d + j] = ucol[i];
            v_data[i * d + j] = vcol[i];
        }
        sigma.push(s * scale);
    }
    let u = Matrix::from_row_major(d, u_data)?;
    let v = Matrix::from_row_major(d, v_data)?;

    let mut residual = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let r: f64 = (0..d).map(|k| u.get(i, k) * sigma[k] * v.get(j, k)).sum();
            residual = residual.max((r - m.get(i, j)).abs());
        }
    }
    Ok(SingularDecomposition {
        u,
        sigma,
        v,
        residual,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *x;
        let b = *y;
        *x = c * a - s * b;
        *y = s * a + c * b;
    }
}

/// Sorted log singular values after unit-determinant normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartanVector {
    pub mu: Vec<f64>,
}

impl CartanVector {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn from_singular_values(sigma: &[f64]) -> Self {
        let logs: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        Self {
            mu: logs.into_iter().map(|l| l - mean).collect(),
        }
    }
}

pub fn cartan_projection(m: &Matrix) -> Result<CartanVector> {
    Ok(CartanVector::from_singular_values(&svd(m)?.sigma))
}

/// Consecutive differences `mu[i] - mu[i+1]`.
pub fn simple_root_gaps(cv: &CartanVector) -> Vec<f64> {
    cv.mu.windows(2).map(|w| w[0] - w[1]).collect()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < n - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// The `k`-th exterior power, indexed by `k`-subsets in lexicographic order.
pub fn exterior_power(m: &Matrix, k: usize) -> Result<Matrix> {
    let d = m.dim;
    if k == 0 || k >= d {
        return Err(LinalgError::BadDegree { k, dim: d });
    }
    if k == 1 {
        return Ok(m.clone());
    }
    let n = binomial(d, k);
    if n > MAX_EXTERIOR_DIM {
        return Err(LinalgError::DimensionTooLarge {
            dim: n,
            max: MAX_EXTERIOR_DIM,
        });
    }
    let subsets = k_subsets(d, k);
    let mut data = vec![0.0; n * n];
    let mut exact = m.exact.as_ref().map(|_| vec![0i128; n * n]);
    let mut exact_ok = exact.is_some();
    let mut buf = vec![0.0; k * k];
    let mut ibuf = vec![0i128; k * k];
    for (a, rows) in subsets.iter().enumerate() {
        for (b, cols) in subsets.iter().enumerate() {
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    buf[i * k + j] = m.get(r, c);
                    if let Some(e) = &m.exact {
                        ibuf[i * k + j] = e[r * d + c];
                    }
                }
            }
            data[a * n + b] = lu_det(k, &buf);
            if exact_ok {
                match bareiss_det(k, &ibuf) {
                    Some(v) => exact.as_mut().unwrap()[a * n + b] = v,
                    None => exact_ok = false,
                }
            }
        }
    }
    match exact {
        Some(e) if exact_ok => Ok(Matrix::from_exact(n, e)),
        _ => Matrix::from_row_major(n, data),
    }
}

/// Wedge product `v_1 ∧ ... ∧ v_k` in the lexicographic basis.
pub fn wedge(vectors: &[Vec<f64>]) -> Vec<f64> {
    let k = vectors.len();
    let d = vectors[0].len();
    let mut buf = vec![0.0; k * k];
    k_subsets(d, k)
        .into_iter()
        .map(|rows| {
            for (i, &r) in rows.iter().enumerate() {
                for (j, v) in vectors.iter().enumerate() {
                    buf[i * k + j] = v[r];
                }
            }
            lu_det(k, &buf)
        })
        .collect()
}

/// Per-element `log(σ_k/σ_{k+1})` of a sequence, with a divergence verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    pub k: usize,
    pub values: Vec<f64>,
    pub threshold: f64,
    pub divergent: bool,
}

pub fn gap_trace(seq: &[Matrix], k: usize) -> Result<GapTrace> {
    gap_trace_with_threshold(seq, k, DEFAULT_DIVERGENCE_THRESHOLD)
}

pub fn gap_trace_with_threshold(seq: &[Matrix], k: usize, threshold: f64) -> Result<GapTrace> {
    let first = seq.first().ok_or(LinalgError::EmptySequence)?;
    let d = first.dim();
    if k == 0 || k >= d {
        return Err(LinalgError::BadDegree { k, dim: d });
    }
    let values = seq
        .iter()
        .map(|m| svd(m).map(|s| s.log_gap(k)))
        .collect::<Result<Vec<_>>>()?;
    let divergent = divergence_flag(&values, threshold);
    Ok(GapTrace {
        k,
        values,
        threshold,
        divergent,
    })
}

/// Finite-sequence proxy for "tends to infinity": every value in the last
/// quartile exceeds `threshold`, and the minimum over the second half of that
/// quartile is strictly larger than the minimum over its first half.
pub fn divergence_flag(values: &[f64], threshold: f64) -> bool {
    let n = values.len();
    let start = n - (n / 4).max(2).min(n);
    let tail = &values[start..];
    if tail.len() < 2 || tail.iter().any(|v| !(*v > threshold)) {
        return false;
    }
    let mid = tail.len() / 2;
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    min(&tail[mid..]) > min(&tail[..mid])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_rows(&[vec![a, b], vec![c, d]]).unwrap()
    }

    #[test]
    fn svd_of_diagonal() {
        let s = svd(&Matrix::diag(&[4.0, 2.0, 1.0])).unwrap();
        assert_eq!(s.sigma, vec![4.0, 2.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((s.u.get(i, j) - e).abs() < 1e-15);
                assert!((s.v.get(i, j) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn svd_of_rotation_is_all_ones() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let r = m2(c, -s, s, c);
        let d = svd(&r).unwrap();
        for x in d.sigma {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_of_shear_matches_quadratic_formula() {
        // mᵀm = [[4,2],[2,2]]: eigenvalues 3 ± √5.
        let s = svd(&m2(2.0, 1.0, 0.0, 1.0)).unwrap();
        let r5 = 5f64.sqrt();
        assert!((s.sigma[0] - (3.0 + r5).sqrt()).abs() < 1e-14);
        assert!((s.sigma[1] - (3.0 - r5).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn svd_rejects_singular() {
        let err = svd(&m2(1.0, 2.0, 2.0, 4.0)).unwrap_err();
        assert!(matches!(err, LinalgError::SingularInput { .. }));
    }

    #[test]
    fn svd_sweep_cap_is_enforced() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.5],
            vec![7.0, 8.0, 10.0],
        ])
        .unwrap();
        assert_eq!(
            svd_with_cap(&m, 0).unwrap_err(),
            LinalgError::NoConvergence { sweeps: 0 }
        );
        assert!(svd_with_cap(&m, 100).is_ok());
    }

    #[test]
    fn column_sign_convention() {
        let m = Matrix::from_rows(&[
            vec![-3.0, 1.0, 0.5],
            vec![0.2, -2.0, 1.0],
            vec![1.0, 0.4, -4.0],
        ])
        .unwrap();
        let s = svd(&m).unwrap();
        for j in 0..3 {
            let col = s.u.column(j);
            let lead = col.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            assert!(lead >= 0.0);
        }
    }

    #[test]
    fn cartan_examples() {
        let e2 = 2f64.exp();
        let cv = cartan_projection(&Matrix::diag(&[e2, 1.0 / e2])).unwrap();
        assert!((cv.mu[0] - 2.0).abs() < 1e-14 && (cv.mu[1] + 2.0).abs() < 1e-14);
        assert_eq!(simple_root_gaps(&cv).len(), 1);
        assert!((simple_root_gaps(&cv)[0] - 4.0).abs() < 1e-13);

        let id = cartan_projection(&Matrix::identity(4)).unwrap();
        assert!(id.mu.iter().all(|x| x.abs() < 1e-15));

        let g = simple_root_gaps(&cartan_projection(&Matrix::diag(&[4.0, 2.0, 1.0])).unwrap());
        assert!((g[0] - 2f64.ln()).abs() < 1e-14 && (g[1] - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cartan_of_unipotent_matches_closed_form() {
        for n in [1.0, 10.0, 1e3, 1e6] {
            let cv = cartan_projection(&m2(1.0, n, 0.0, 1.0)).unwrap();
            // σ₁² = (2 + n² + n√(n²+4))/2 for [[1,n],[0,1]].
            let s1 = ((2.0 + n * n + n * (n * n + 4.0).sqrt()) / 2.0).sqrt();
            assert!((cv.mu[0] - s1.ln()).abs() < 1e-12 * s1.ln().max(1.0));
            assert!((cv.mu.iter().sum::<f64>()).abs() < 1e-9);
        }
    }

    #[test]
    fn exterior_power_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(exterior_power(&m, 1).unwrap(), m);
        let d = exterior_power(&Matrix::diag(&[2.0, 3.0, 5.0]), 2).unwrap();
        assert_eq!(d, Matrix::diag(&[6.0, 10.0, 15.0]));
        assert!(matches!(
            exterior_power(&m, 2),
            Err(LinalgError::BadDegree { k: 2, dim: 2 })
        ));
        assert!(matches!(exterior_power(&m, 0), Err(LinalgError::BadDegree { .. })));
    }

    #[test]
    fn exact_integer_arithmetic() {
        let u = Matrix::from_int_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
        let p = u.pow(-7).unwrap();
        assert_eq!(p.exact_entries().unwrap(), &[1, -7, 0, 1]);
        let s = Matrix::from_int_rows(&[vec![0, -1], vec![1, 0]]).unwrap();
        assert!(s.mul(&p).unwrap().is_exact());
        assert_eq!(s.exact_det(), Some(1));
    }

    #[test]
    fn projective_normalization() {
        let m = Matrix::from_int_rows(&[vec![9, 0], vec![0, 1]]).unwrap();
        let n = m.projective_normalize().unwrap();
        assert!((n.get(0, 0) - 3.0).abs() < 1e-15 && (n.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        let neg = Matrix::from_int_rows(&[vec![0, -1], vec![-1, 0]]).unwrap();
        let n = neg.projective_normalize().unwrap();
        assert_eq!(n.exact_entries().unwrap(), &[0, 1, 1, 0]);
    }

    #[test]
    fn gap_trace_examples() {
        let id = vec![Matrix::identity(3); 10];
        let t = gap_trace(&id, 1).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0) && !t.divergent);

        let g = Matrix::diag(&[2.0, 0.5]);
        let seq: Vec<Matrix> = (1..=40).map(|n| g.pow(n).unwrap()).collect();
        let t = gap_trace(&seq, 1).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!((v - 2.0 * 2f64.ln() * n).abs() < 1e-12 * n);
        }
        assert!(t.divergent);

        // Unipotent powers: gap = 2·log σ₁ with the closed-form σ₁.
        let u = m2(1.0, 1.0, 0.0, 1.0);
        let seq: Vec<Matrix> = (1..=200).map(|n| u.pow(n).unwrap()).collect();
        let t = gap_trace(&seq, 1).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            let n = (i + 1) as f64;
            let s1 = ((2.0 + n * n + n * (n * n + 4.0).sqrt()) / 2.0).sqrt();
            assert!((v - 2.0 * s1.ln()).abs() < 1e-9);
        }
        assert!((t.values[199] - 2.0 * 200f64.ln()).abs() < 1e-3);
        assert!(matches!(gap_trace(&[], 1), Err(LinalgError::EmptySequence)));
    }

    #[test]
    fn jordan_block_gap_grows() {
        let j = Matrix::from_int_rows(&[vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]).unwrap();
        let seq: Vec<Matrix> = (1..=300).map(|n| j.pow(n).unwrap()).collect();
        let t = gap_trace(&seq, 1).unwrap();
        assert!(t.values.windows(2).skip(5).all(|w| w[1] > w[0]));
        assert!(t.values[299] > t.values[99] + 1.0);
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(
            k_subsets(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(binomial(20, 10), 184756);
    }
}
