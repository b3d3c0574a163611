//! Words, coned-off Cayley graphs and relative quasigeodesic checks.
//!
//! A coned-off Cayley graph adds one vertex per coset `gP` of each peripheral
//! subgroup, joined to every element of the coset by an edge of length 1.
//! Cosets are infinite, so cone vertices are expanded lazily and only up to
//! a cap on the peripheral exponent; searches are bidirectional and also
//! meet at a shared cone vertex, so a single long peripheral jump in the
//! middle of a geodesic never needs expanding.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::GroupPresentation;
use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConedError {
    #[error("no path within coned radius {radius}")]
    OutOfBall { radius: usize },
    #[error("letter {0} does not name a generator")]
    BadLetter(i32),
    #[error("cannot parse word: {0}")]
    Parse(String),
    #[error("cannot evaluate word: {0}")]
    Evaluation(String),
}

pub type Result<T> = std::result::Result<T, ConedError>;

/// A word in the generators: letter `i > 0` is generator `i - 1`, and `-i`
/// its inverse.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<i32>,
}

impl Word {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(letters: Vec<i32>) -> Result<Self> {
        if let Some(&bad) = letters.iter().find(|&&l| l == 0) {
            return Err(ConedError::BadLetter(bad));
        }
        Ok(Self { letters })
    }

    /// Generator `index` (0-based), or its inverse.
    pub fn generator(index: usize, inverse: bool) -> Self {
        let l = index as i32 + 1;
        Self {
            letters: vec![if inverse { -l } else { l }],
        }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Self {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Self { letters }
    }

    /// Free reduction.
    pub fn reduced(&self) -> Self {
        let mut out: Vec<i32> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if out.last() == Some(&-l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Self { letters: out }
    }

    pub fn is_reduced(&self) -> bool {
        self.letters.windows(2).all(|w| w[0] != -w[1])
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let mut letters = Vec::with_capacity(base.len() * n.unsigned_abs() as usize);
        for _ in 0..n.unsigned_abs() {
            letters.extend_from_slice(&base.letters);
        }
        Self { letters }
    }

    /// Maximal runs of one generator as `(generator index, exponent)`.
    pub fn syllables(&self) -> Vec<(usize, i64)> {
        let mut out: Vec<(usize, i64)> = Vec::new();
        for &l in &self.letters {
            let g = l.unsigned_abs() as usize - 1;
            let e = l.signum() as i64;
            match out.last_mut() {
                Some((h, k)) if *h == g => *k += e,
                _ => out.push((g, e)),
            }
        }
        out.retain(|(_, k)| *k != 0);
        out
    }

    /// Parses `a b^-1 a^3`; tokens may also be separated by `*` or `.`, and
    /// `id`, `e` or `1` denote the identity.
    pub fn parse(text: &str, names: &[String]) -> Result<Self> {
        let mut letters = Vec::new();
        for token in text
            .split(|c: char| c.is_whitespace() || c == '*' || c == '.')
            .filter(|t| !t.is_empty())
        {
            if matches!(token, "id" | "e" | "1") && !names.iter().any(|n| n == token) {
                continue;
            }
            let (name, exp) = match token.split_once('^') {
                Some((n, e)) => {
                    let e = e
                        .trim_start_matches('(')
                        .trim_end_matches(')')
                        .parse::<i64>()
                        .map_err(|_| ConedError::Parse(format!("bad exponent in {token:?}")))?;
                    (n, e)
                }
                None => (token, 1),
            };
            let idx = names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| ConedError::Parse(format!("unknown generator {name:?}")))?;
            letters.extend(Word::generator(idx, false).pow(exp).letters);
        }
        Ok(Self { letters })
    }

    /// Syllable notation with the given generator names; `id` when empty.
    pub fn display(&self, names: &[String]) -> String {
        let parts: Vec<String> = self
            .syllables()
            .into_iter()
            .map(|(g, k)| {
                let name = names.get(g).cloned().unwrap_or_else(|| format!("g{g}"));
                if k == 1 {
                    name
                } else {
                    format!("{name}^{k}")
                }
            })
            .collect();
        if parts.is_empty() {
            "id".into()
        } else {
            parts.join(" ")
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (0..26).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
        f.write_str(&self.display(&names))
    }
}

/// A group element as the graph sees it.
#[derive(Debug, Clone)]
enum Elem {
    Free(Word),
    Linear(Matrix),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    Elem(Vec<i128>),
    Cone(usize, Vec<i128>),
}

#[derive(Debug, Clone)]
enum Model<'a> {
    /// Free group; each peripheral is generated by one generator.
    Free {
        generators: usize,
        peripheral_letters: Vec<usize>,
    },
    /// Elements compared by normalized matrices.
    Linear { presentation: &'a GroupPresentation },
}

/// Lazily explored coned-off Cayley graph.
#[derive(Debug, Clone)]
pub struct ConedGraph<'a> {
    model: Model<'a>,
    radius: usize,
    cone_cap: i64,
    node_cap: usize,
}

/// Result of a relative quasigeodesic check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasigeodesicReport {
    /// Hausdorff distance between the prefixes and a geodesic.
    pub distance: usize,
    pub pass: bool,
    pub geodesic_length: usize,
    pub farthest_prefix: usize,
}

/// Sign-canonical, sup-normalized entries quantized to `1e-9`.
fn float_key(m: &Matrix) -> Vec<i128> {
    let (n, _) = m.sup_normalize();
    let first = n.as_slice().iter().copied().find(|x| x.abs() > 1e-9).unwrap_or(1.0);
    let s = if first < 0.0 { -1.0 } else { 1.0 };
    n.as_slice().iter().map(|x| (s * x * 1e9).round() as i128).collect()
}

fn matrix_key(m: &Matrix) -> Vec<i128> {
    match m.exact_entries() {
        Some(e) if m.exact_det().map_or(false, |d| d.abs() == 1) => {
            let first = e.iter().copied().find(|&x| x != 0).unwrap_or(1);
            let s = first.signum();
            let mut k: Vec<i128> = e.iter().map(|x| s * x).collect();
            k.push(i128::MAX);
            k
        }
        _ => float_key(m),
    }
}

fn sq_norm(m: &Matrix) -> (Option<i128>, f64) {
    let exact = m
        .exact_entries()
        .and_then(|e| e.iter().try_fold(0i128, |acc, x| x.checked_mul(*x).and_then(|s| acc.checked_add(s))));
    let f = m.frobenius() / m.det().abs().powf(1.0 / m.dim() as f64);
    (exact, f * f)
}

impl<'a> ConedGraph<'a> {
    /// Free group on `generators` letters, coned off along the cyclic
    /// subgroups generated by `peripheral_letters` (0-based).
    pub fn free(generators: usize, peripheral_letters: Vec<usize>, radius: usize) -> Self {
        Self {
            model: Model::Free {
                generators,
                peripheral_letters,
            },
            radius,
            cone_cap: 64,
            node_cap: 4_000_000,
        }
    }

    /// Group given by matrices; elements are identified by normalized exact
    /// integer matrices when available and by quantized entries otherwise.
    pub fn linear(presentation: &'a GroupPresentation, radius: usize) -> Self {
        Self {
            model: Model::Linear { presentation },
            radius,
            cone_cap: 16,
            node_cap: 4_000_000,
        }
    }

    /// Largest peripheral exponent used when expanding a cone vertex.
    pub fn with_cone_cap(mut self, cap: i64) -> Self {
        self.cone_cap = cap;
        self
    }

    pub fn with_node_cap(mut self, cap: usize) -> Self {
        self.node_cap = cap;
        self
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    fn element(&self, w: &Word) -> Result<Elem> {
        match &self.model {
            Model::Free { generators, .. } => {
                if let Some(&l) = w.letters().iter().find(|l| l.unsigned_abs() as usize > *generators) {
                    return Err(ConedError::BadLetter(l));
                }
                Ok(Elem::Free(w.reduced()))
            }
            Model::Linear { presentation } => presentation
                .evaluate(w)
                .map(Elem::Linear)
                .map_err(|e| ConedError::Evaluation(e.to_string())),
        }
    }

    fn key(&self, e: &Elem) -> Vec<i128> {
        match e {
            Elem::Free(w) => w.letters().iter().map(|&l| l as i128).collect(),
            Elem::Linear(m) => matrix_key(m),
        }
    }

    fn letter_count(&self) -> usize {
        match &self.model {
            Model::Free { generators, .. } => *generators,
            Model::Linear { presentation } => presentation.generators().len(),
        }
    }

    fn neighbors(&self, e: &Elem) -> Vec<Elem> {
        let n = self.letter_count() as i32;
        let letters = (1..=n).flat_map(|l| [l, -l]);
        match (e, &self.model) {
            (Elem::Free(w), _) => letters
                .map(|l| Elem::Free(w.concat(&Word { letters: vec![l] }).reduced()))
                .collect(),
            (Elem::Linear(m), Model::Linear { presentation }) => letters
                .filter_map(|l| {
                    let g = presentation.letter_matrix(l).ok()?;
                    let p = m.mul(g).ok()?;
                    Some(Elem::Linear(if p.is_exact() { p } else { p.sup_normalize().0 }))
                })
                .collect(),
            _ => Vec::new(),
        }
    }

    fn peripheral_count(&self) -> usize {
        match &self.model {
            Model::Free { peripheral_letters, .. } => peripheral_letters.len(),
            Model::Linear { presentation } => presentation.peripherals().len(),
        }
    }

    /// Canonical representative of the coset `e·P_i`.
    fn coset_rep(&self, e: &Elem, i: usize) -> Elem {
        match (e, &self.model) {
            (Elem::Free(w), Model::Free { peripheral_letters, .. }) => {
                let g = peripheral_letters[i] as i32 + 1;
                let mut letters = w.letters().to_vec();
                while letters.last().map_or(false, |l| l.abs() == g) {
                    letters.pop();
                }
                Elem::Free(Word { letters })
            }
            (Elem::Linear(m), Model::Linear { presentation }) => {
                Elem::Linear(self.minimal_in_coset(m, &presentation.peripherals()[i].matrices))
            }
            _ => e.clone(),
        }
    }

    /// Element of `m·⟨P⟩` of least normalized Frobenius norm (ties broken by
    /// key), found by coordinate descent on the exponent vector, starting at
    /// the exact minimizer for unipotent generators with `(P - I)² = 0`.
    fn minimal_in_coset(&self, m: &Matrix, gens: &[Matrix]) -> Matrix {
        let better = |a: &Matrix, b: &Matrix| -> bool {
            let (ea, fa) = sq_norm(a);
            let (eb, fb) = sq_norm(b);
            match (ea, eb) {
                (Some(x), Some(y)) if a.exact_det() == b.exact_det() => {
                    x < y || (x == y && matrix_key(a) < matrix_key(b))
                }
                _ => fa < fb * (1.0 - 1e-12) || ((fa - fb).abs() <= 1e-12 * fb && matrix_key(a) < matrix_key(b)),
            }
        };
        let mut cur = m.clone();
        for p in gens {
            let d = p.dim();
            let id = Matrix::identity(d);
            let nil: Vec<f64> = p.as_slice().iter().zip(id.as_slice()).map(|(a, b)| a - b).collect();
            let nil = Matrix::from_row_major(d, nil).unwrap();
            let nil_sq = nil.mul(&nil).unwrap();
            if nil_sq.max_abs() == 0.0 {
                let gn = cur.mul(&nil).unwrap();
                let denom: f64 = gn.as_slice().iter().map(|x| x * x).sum();
                if denom > 0.0 {
                    let num: f64 = cur.as_slice().iter().zip(gn.as_slice()).map(|(a, b)| a * b).sum();
                    let n0 = (-num / denom).floor() as i64;
                    let a = cur.mul(&p.pow(n0).unwrap()).unwrap();
                    let b = a.mul(p).unwrap();
                    cur = if better(&b, &a) { b } else { a };
                }
            }
        }
        let steps: Vec<Matrix> = gens
            .iter()
            .flat_map(|p| [p.clone(), p.inverse().unwrap()])
            .collect();
        for _ in 0..10_000 {
            let next = steps
                .iter()
                .filter_map(|s| cur.mul(s).ok())
                .find(|c| better(c, &cur));
            match next {
                Some(c) => cur = c,
                None => break,
            }
        }
        if cur.is_exact() {
            cur
        } else {
            cur.sup_normalize().0
        }
    }

    fn cone_members(&self, rep: &Elem, i: usize) -> Vec<Elem> {
        let cap = self.cone_cap;
        match (rep, &self.model) {
            (Elem::Free(w), Model::Free { peripheral_letters, .. }) => (-cap..=cap)
                .map(|n| {
                    let g = Word::generator(peripheral_letters[i], false).pow(n);
                    Elem::Free(w.concat(&g).reduced())
                })
                .collect(),
            (Elem::Linear(m), Model::Linear { presentation }) => {
                let per = &presentation.peripherals()[i];
                let mut out = vec![Elem::Linear(m.clone())];
                for p in &per.matrices {
                    let inv = p.inverse().unwrap();
                    let (mut up, mut down) = (m.clone(), m.clone());
                    for _ in 0..cap {
                        up = up.mul(p).unwrap();
                        down = down.mul(&inv).unwrap();
                        out.push(Elem::Linear(up.clone()));
                        out.push(Elem::Linear(down.clone()));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }

    /// Nodes adjacent to `node`, with the element payloads of new elements.
    fn expand(&self, node: &Node, payload: &HashMap<Node, Elem>) -> Vec<(Node, Elem)> {
        let elem = &payload[node];
        match node {
            Node::Elem(_) => {
                let mut out: Vec<(Node, Elem)> = self
                    .neighbors(elem)
                    .into_iter()
                    .map(|e| (Node::Elem(self.key(&e)), e))
                    .collect();
                for i in 0..self.peripheral_count() {
                    let rep = self.coset_rep(elem, i);
                    out.push((Node::Cone(i, self.key(&rep)), rep));
                }
                out
            }
            Node::Cone(i, _) => self
                .cone_members(elem, *i)
                .into_iter()
                .map(|e| (Node::Elem(self.key(&e)), e))
                .collect(),
        }
    }

    /// Bidirectional BFS from a set of sources to one target. Returns the
    /// distance and, on request, a shortest node path.
    fn search(&self, sources: &[Elem], target: &Elem, want_path: bool) -> Result<(usize, Vec<Node>, Vec<Elem>)> {
        let mut payload: HashMap<Node, Elem> = HashMap::new();
        let mut fwd: HashMap<Node, (usize, Option<Node>)> = HashMap::new();
        let mut bwd: HashMap<Node, (usize, Option<Node>)> = HashMap::new();
        let mut ffront: Vec<Node> = Vec::new();
        for s in sources {
            let n = Node::Elem(self.key(s));
            if fwd.insert(n.clone(), (0, None)).is_none() {
                payload.insert(n.clone(), s.clone());
                ffront.push(n);
            }
        }
        let t = Node::Elem(self.key(target));
        payload.entry(t.clone()).or_insert_with(|| target.clone());
        bwd.insert(t.clone(), (0, None));
        let mut bfront = vec![t.clone()];
        let (mut flevel, mut blevel) = (0usize, 0usize);
        let mut meet: Option<(usize, Node)> = fwd.contains_key(&t).then(|| (0, t.clone()));
        while meet.is_none() {
            if flevel + blevel >= self.radius || ffront.is_empty() || bfront.is_empty() {
                return Err(ConedError::OutOfBall { radius: self.radius });
            }
            let forward = ffront.len() <= bfront.len();
            let (front, seen, other, level) = if forward {
                (&mut ffront, &mut fwd, &bwd, &mut flevel)
            } else {
                (&mut bfront, &mut bwd, &fwd, &mut blevel)
            };
            let mut next = Vec::new();
            for node in std::mem::take(front) {
                for (nb, elem) in self.expand(&node, &payload) {
                    if seen.contains_key(&nb) {
                        continue;
                    }
                    seen.insert(nb.clone(), (*level + 1, Some(node.clone())));
                    payload.entry(nb.clone()).or_insert(elem);
                    if let Some((d, _)) = other.get(&nb) {
                        let total = *level + 1 + d;
                        if meet.as_ref().map_or(true, |(m, _)| total < *m) {
                            meet = Some((total, nb.clone()));
                        }
                    }
                    next.push(nb);
                }
            }
            *level += 1;
            *front = next;
            if payload.len() > self.node_cap {
                return Err(ConedError::OutOfBall { radius: self.radius });
            }
        }
        let (dist, mid) = meet.unwrap();
        if dist > self.radius {
            return Err(ConedError::OutOfBall { radius: self.radius });
        }
        if !want_path {
            return Ok((dist, Vec::new(), Vec::new()));
        }
        let mut path = vec![mid.clone()];
        let mut cur = mid.clone();
        while let Some((_, Some(p))) = fwd.get(&cur) {
            path.push(p.clone());
            cur = p.clone();
        }
        path.reverse();
        let mut cur = mid;
        while let Some((_, Some(p))) = bwd.get(&cur) {
            path.push(p.clone());
            cur = p.clone();
        }
        let elems = path
            .iter()
            .filter(|n| matches!(n, Node::Elem(_)))
            .map(|n| payload[n].clone())
            .collect();
        Ok((dist, path, elems))
    }

    /// Shortest-path distance between two words in the coned-off graph.
    pub fn coned_distance(&self, w1: &Word, w2: &Word) -> Result<usize> {
        let a = self.element(w1)?;
        let b = self.element(w2)?;
        Ok(self.search(&[a], &b, false)?.0)
    }

    /// Hausdorff distance between the prefixes (with the identity as base
    /// point) and the element vertices of a geodesic from the identity to the
    /// prefix farthest from it.
    pub fn quasigeodesic_check(&self, prefixes: &[Word], d_max: usize) -> Result<QuasigeodesicReport> {
        let id = self.element(&Word::identity())?;
        let mut pts = vec![id.clone()];
        for w in prefixes {
            pts.push(self.element(w)?);
        }
        let mut far = (0usize, 0usize);
        for (i, p) in pts.iter().enumerate() {
            let d = self.search(std::slice::from_ref(&id), p, false)?.0;
            if d > far.1 {
                far = (i, d);
            }
        }
        let (len, _, geodesic) = self.search(std::slice::from_ref(&id), &pts[far.0], true)?;
        let mut h = 0;
        for p in &pts {
            h = h.max(self.search(&geodesic, p, false)?.0);
        }
        for q in &geodesic {
            h = h.max(self.search(&pts, q, false)?.0);
        }
        Ok(QuasigeodesicReport {
            distance: h,
            pass: h <= d_max,
            geodesic_length: len,
            farthest_prefix: far.0.saturating_sub(1),
        })
    }
}
