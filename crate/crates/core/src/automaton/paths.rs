use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AutomatonError, ElementTable, GammaGraph, Result};
use crate::linalg::Matrix;

/// A path `(v_1, α_1), …, (v_n, α_n)` with `(v_i, v_{i+1})` edges and
/// `α_i ∈ T_{v_i}`; elements are indices into the element table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GPath {
    pub vertices: Vec<usize>,
    pub elements: Vec<usize>,
}

impl GPath {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The vertex `w` that the last element is applied to: the first
    /// successor of `v_n`.
    pub fn tail_vertex(&self, graph: &GammaGraph) -> usize {
        let last = *self.vertices.last().expect("non-empty path");
        graph.successors(last)[0]
    }

    pub fn matrices<'a>(&self, table: &'a ElementTable) -> Vec<&'a Matrix> {
        self.vertices
            .iter()
            .zip(&self.elements)
            .map(|(&v, &k)| &table.per_vertex[v][k].matrix)
            .collect()
    }

    pub fn truncated(&self, n: usize) -> GPath {
        GPath {
            vertices: self.vertices[..n].to_vec(),
            elements: self.elements[..n].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathStrategy {
    /// Every path of the given length, up to `cap` paths.
    Exhaustive { cap: usize },
    /// `count` independent uniform random walks.
    Random { seed: u64, count: usize },
    /// One path following the given `(vertex, element index)` cycle.
    Spine(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnumeration {
    pub paths: Vec<GPath>,
    pub truncated: bool,
}

pub fn enumerate_paths(
    graph: &GammaGraph,
    table: &ElementTable,
    length: usize,
    strategy: &PathStrategy,
) -> Result<PathEnumeration> {
    if length == 0 {
        return Err(AutomatonError::InvalidGraph("paths must have positive length".into()));
    }
    let n = graph.vertices().len();
    if table.per_vertex.len() != n || table.per_vertex.iter().any(|t| t.is_empty()) {
        return Err(AutomatonError::InvalidGraph("every vertex needs at least one element".into()));
    }
    let succ: Vec<Vec<usize>> = (0..n).map(|v| graph.successors(v)).collect();
    match strategy {
        PathStrategy::Exhaustive { cap } => {
            let mut paths = Vec::new();
            let mut truncated = false;
            let mut stack: Vec<GPath> = (0..n)
                .rev()
                .flat_map(|v| {
                    (0..table.per_vertex[v].len()).rev().map(move |k| GPath {
                        vertices: vec![v],
                        elements: vec![k],
                    })
                })
                .collect();
            while let Some(p) = stack.pop() {
                if p.len() == length {
                    if paths.len() >= *cap {
                        truncated = true;
                        break;
                    }
                    paths.push(p);
                    continue;
                }
                let last = *p.vertices.last().unwrap();
                for &w in succ[last].iter().rev() {
                    for k in (0..table.per_vertex[w].len()).rev() {
                        let mut q = p.clone();
                        q.vertices.push(w);
                        q.elements.push(k);
                        stack.push(q);
                    }
                }
            }
            Ok(PathEnumeration { paths, truncated })
        }
        PathStrategy::Random { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let paths = (0..*count)
                .map(|_| {
                    let mut v = rng.gen_range(0..n);
                    let mut p = GPath {
                        vertices: Vec::with_capacity(length),
                        elements: Vec::with_capacity(length),
                    };
                    for i in 0..length {
                        if i > 0 {
                            v = succ[v][rng.gen_range(0..succ[v].len())];
                        }
                        p.vertices.push(v);
                        p.elements.push(rng.gen_range(0..table.per_vertex[v].len()));
                    }
                    p
                })
                .collect();
            Ok(PathEnumeration {
                paths,
                truncated: false,
            })
        }
        PathStrategy::Spine(cycle) => {
            if cycle.is_empty() {
                return Err(AutomatonError::InvalidGraph("empty spine".into()));
            }
            for (i, &(v, k)) in cycle.iter().enumerate() {
                let (w, _) = cycle[(i + 1) % cycle.len()];
                if v >= n || k >= table.per_vertex[v].len() {
                    return Err(AutomatonError::InvalidGraph(format!("spine entry ({v}, {k}) out of range")));
                }
                if !succ[v].contains(&w) {
                    return Err(AutomatonError::InvalidGraph(format!("spine step {v} -> {w} is not an edge")));
                }
            }
            let (vertices, elements) = (0..length).map(|i| cycle[i % cycle.len()]).unzip();
            Ok(PathEnumeration {
                paths: vec![GPath { vertices, elements }],
                truncated: false,
            })
        }
    }
}
