use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{AutomatonError, GroupPresentation, Result};
use crate::conedoff::Word;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VertexLabel {
    Singleton {
        word: Word,
    },
    /// `{ g · Π p_i^{n_i} }` over exponent vectors `n`, enumerated by
    /// `|n|₁` then lexicographically, minus `exclude` and every `n` with
    /// `|n|₁ < exclude_below`.
    ParabolicFamily {
        coset: Word,
        peripheral: usize,
        exclude: Vec<Vec<i64>>,
        exclude_below: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub name: String,
    pub label: VertexLabel,
}

/// A finite directed graph with vertices labelled by sets of group elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaGraph {
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    epsilon: f64,
}

/// One element of a vertex label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub word: Word,
    pub matrix: Matrix,
    /// Peripheral exponent vector for family members.
    pub exponent: Option<Vec<i64>>,
    /// `|n|₁` for family members, 0 for singletons.
    pub shell: u64,
}

/// The (truncated) element list of every vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementTable {
    pub per_vertex: Vec<Vec<Element>>,
}

impl GammaGraph {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<(usize, usize)>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(AutomatonError::InvalidGraph(format!("epsilon {epsilon} must be positive")));
        }
        let n = vertices.len();
        if n == 0 {
            return Err(AutomatonError::InvalidGraph("graph has no vertices".into()));
        }
        for v in &vertices {
            if let VertexLabel::Singleton { word } = &v.label {
                if word.reduced().is_empty() {
                    return Err(AutomatonError::InvalidGraph(format!(
                        "vertex {} is labelled by the identity",
                        v.name
                    )));
                }
            }
        }
        let mut seen = HashSet::new();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(AutomatonError::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if !seen.insert((a, b)) {
                return Err(AutomatonError::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
        }
        for (i, v) in vertices.iter().enumerate() {
            if !edges.iter().any(|&(a, _)| a == i) {
                return Err(AutomatonError::InvalidGraph(format!(
                    "vertex {} has no outgoing edge",
                    v.name
                )));
            }
        }
        Ok(Self {
            vertices,
            edges,
            epsilon,
        })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(AutomatonError::InvalidGraph(format!("epsilon {epsilon} must be positive")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.name == name)
    }

    pub fn successors(&self, v: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.0 == v).map(|e| e.1).collect()
    }

    /// Elements of `T_v`, truncated for families.
    pub fn elements(&self, v: usize, pres: &GroupPresentation) -> Result<Vec<Element>> {
        let vertex = &self.vertices[v];
        match &vertex.label {
            VertexLabel::Singleton { word } => {
                let matrix = pres.evaluate(word)?;
                if matrix.projective_diff(&Matrix::identity(pres.dim())) <= 1e-9 {
                    return Err(AutomatonError::InvalidGraph(format!(
                        "vertex {} is labelled by an element acting trivially",
                        vertex.name
                    )));
                }
                Ok(vec![Element {
                    word: word.clone(),
                    matrix,
                    exponent: None,
                    shell: 0,
                }])
            }
            VertexLabel::ParabolicFamily {
                coset,
                peripheral,
                exclude,
                exclude_below,
            } => {
                let per = pres.peripherals().get(*peripheral).ok_or_else(|| {
                    AutomatonError::InvalidGraph(format!(
                        "vertex {} refers to missing peripheral {peripheral}",
                        vertex.name
                    ))
                })?;
                let base = pres.evaluate(coset)?;
                let trivial_coset = coset.reduced().is_empty();
                let rank = per.generators.len();
                let mut out: Vec<Element> = Vec::new();
                let mut keys: Vec<Matrix> = Vec::new();
                let mut exact_keys: HashSet<Vec<i128>> = HashSet::new();
                let mut shell = 0u64;
                // Stop after many empty shells, which only happens when the
                // peripheral is finite.
                let mut barren = 0;
                while out.len() < per.truncation && barren < 64 {
                    let before = out.len();
                    for n in shell_vectors(rank, shell) {
                        if out.len() >= per.truncation {
                            break;
                        }
                        if shell < *exclude_below || exclude.contains(&n) || (trivial_coset && shell == 0) {
                            continue;
                        }
                        let mut word = coset.clone();
                        let mut matrix = base.clone();
                        for (k, &e) in n.iter().enumerate() {
                            word = word.concat(&per.generators[k].pow(e));
                            matrix = matrix.mul(&per.matrices[k].pow(e)?)?;
                        }
                        let fresh = match matrix.projective_normalize().ok().and_then(|m| m.exact_entries().map(|e| e.to_vec())) {
                            Some(e) => exact_keys.insert(e),
                            None => !keys.iter().any(|k| k.projective_diff(&matrix) <= 1e-9),
                        };
                        if !fresh {
                            continue;
                        }
                        keys.push(matrix.clone());
                        out.push(Element {
                            word: word.reduced(),
                            matrix,
                            exponent: Some(n),
                            shell,
                        });
                    }
                    barren = if out.len() == before && shell >= *exclude_below { barren + 1 } else { 0 };
                    shell += 1;
                }
                Ok(out)
            }
        }
    }

    pub fn element_table(&self, pres: &GroupPresentation) -> Result<ElementTable> {
        Ok(ElementTable {
            per_vertex: (0..self.vertices.len())
                .map(|v| self.elements(v, pres))
                .collect::<Result<_>>()?,
        })
    }
}

/// Integer vectors of length `rank` with `|n|₁ = s`, in lexicographic order.
pub(crate) fn shell_vectors(rank: usize, s: u64) -> Vec<Vec<i64>> {
    fn rec(rank: usize, s: i64, prefix: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if rank == 1 {
            let mut vals = vec![-s, s];
            vals.dedup();
            for v in vals {
                prefix.push(v);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for v in -s..=s {
            prefix.push(v);
            rec(rank - 1, s - v.abs(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if rank > 0 {
        rec(rank, s as i64, &mut Vec::new(), &mut out);
    }
    out
}
