//! Fixtures shared by the benchmarks.

use std::f64::consts::PI;

use flagdyn::automaton::{CertifyOptions, CertifiedSystem, CompatibleSystem, GammaGraph, GroupPresentation, Vertex, VertexLabel};
use flagdyn::domains::ProperDomain;
use flagdyn::linalg::Matrix;
use flagdyn::projgeom::ProjHyperplane;
use flagdyn::Word;

/// Schottky group generated by diag(9, 1) and [[5,4],[4,5]] with arcs of
/// half-width 0.36 about the attracting fixed points.
pub fn schottky() -> CertifiedSystem {
    let pres = GroupPresentation::new(
        2,
        vec![
            ("a".into(), Matrix::from_int_rows(&[vec![9, 0], vec![0, 1]]).unwrap()),
            ("b".into(), Matrix::from_int_rows(&[vec![5, 4], vec![4, 5]]).unwrap()),
        ],
    )
    .unwrap();
    let single = |name: &str, letter: i32| Vertex {
        name: name.into(),
        label: VertexLabel::Singleton {
            word: Word::new(vec![letter]).unwrap(),
        },
    };
    let vertices = vec![single("a", 1), single("A", -1), single("b", 2), single("B", -2)];
    let inverse = [1, 0, 3, 2];
    let edges = (0..4)
        .flat_map(|v| (0..4).filter(move |&w| w != inverse[v]).map(move |w| (v, w)))
        .collect();
    let graph = GammaGraph::new(vertices, edges, 0.01).unwrap();
    let centers = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0];
    let system = CompatibleSystem::new(centers.iter().map(|&c| ProperDomain::arc(c, 0.36).unwrap()).collect());
    CertifiedSystem::certify(graph, system, pres, &CertifyOptions::default()).unwrap()
}

/// A deterministic well-conditioned `d × d` matrix.
pub fn test_matrix(d: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| ((i * 7 + j * 3) as f64).sin() + if i == j { 2.0 } else { 0.0 }).collect())
        .collect();
    Matrix::from_rows(&rows).unwrap()
}

/// Concentric chart balls of radii 0.3 and 0.5 in `RP^2`.
pub fn nested_balls() -> (ProperDomain, ProperDomain) {
    let chart = ProjHyperplane::new(&[0.0, 0.0, 1.0]).unwrap();
    (
        ProperDomain::ball(&chart, vec![0.0, 0.0], 0.3).unwrap(),
        ProperDomain::ball(&chart, vec![0.0, 0.0], 0.5).unwrap(),
    )
}
