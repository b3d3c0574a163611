use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use proptest::prelude::*;

use super::*;
use crate::conedoff::Word;
use crate::domains::{Ball, ProperDomain};
use crate::linalg::Matrix;
use crate::projgeom::ProjHyperplane;

fn m2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
    Matrix::from_rows(&[vec![a, b], vec![c, d]]).unwrap()
}

fn single(name: &str, letters: Vec<i32>) -> Vertex {
    Vertex {
        name: name.into(),
        label: VertexLabel::Singleton {
            word: Word::new(letters).unwrap(),
        },
    }
}

fn single_loop(center: f64) -> (GammaGraph, CompatibleSystem, GroupPresentation) {
    let pres = GroupPresentation::new(2, vec![("g".into(), m2(4.0, 0.0, 0.0, 0.25))]).unwrap();
    let graph = GammaGraph::new(vec![single("v", vec![1])], vec![(0, 0)], 0.01).unwrap();
    let system = CompatibleSystem::new(vec![ProperDomain::arc(center, 0.3).unwrap()]);
    (graph, system, pres)
}

/// `θ ↦ φ + atan(tan(θ − φ) / 9)`: the action of an element with eigenvalue
/// ratio 9 and attracting point `φ`, repelling point `φ + π/2`.
fn contract_about(phi: f64, theta: f64) -> f64 {
    phi + ((theta - phi).tan() / 9.0).atan()
}

const SCHOTTKY_CENTERS: [f64; 4] = [0.0, FRAC_PI_2, FRAC_PI_4, 3.0 * FRAC_PI_4];
const SCHOTTKY_HALF: f64 = 0.36;

fn schottky() -> (GammaGraph, CompatibleSystem, GroupPresentation) {
    let pres = GroupPresentation::new(
        2,
        vec![
            ("a".into(), Matrix::from_int_rows(&[vec![9, 0], vec![0, 1]]).unwrap()),
            ("b".into(), Matrix::from_int_rows(&[vec![5, 4], vec![4, 5]]).unwrap()),
        ],
    )
    .unwrap();
    let vertices = vec![
        single("a", vec![1]),
        single("A", vec![-1]),
        single("b", vec![2]),
        single("B", vec![-2]),
    ];
    let inverse = [1, 0, 3, 2];
    let edges = (0..4)
        .flat_map(|v| (0..4).filter(move |&w| w != inverse[v]).map(move |w| (v, w)))
        .collect();
    let graph = GammaGraph::new(vertices, edges, 0.01).unwrap();
    let system = CompatibleSystem::new(
        SCHOTTKY_CENTERS
            .iter()
            .map(|&c| ProperDomain::arc(c, SCHOTTKY_HALF).unwrap())
            .collect(),
    );
    (graph, system, pres)
}

#[test]
fn graph_validation() {
    let id = Vertex {
        name: "e".into(),
        label: VertexLabel::Singleton {
            word: Word::new(vec![1, -1]).unwrap(),
        },
    };
    assert!(matches!(
        GammaGraph::new(vec![id], vec![(0, 0)], 0.1),
        Err(AutomatonError::InvalidGraph(_))
    ));
    assert!(GammaGraph::new(vec![single("v", vec![1]), single("w", vec![1])], vec![(0, 1)], 0.1).is_err());
    assert!(GammaGraph::new(vec![single("v", vec![1])], vec![(0, 0)], 0.0).is_err());
    assert!(GammaGraph::new(vec![single("v", vec![1])], vec![(0, 0), (0, 0)], 0.1).is_err());
}

#[test]
fn family_enumeration_is_ordered_and_duplicate_free() {
    assert_eq!(
        graph::shell_vectors(2, 1),
        vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]
    );
    assert_eq!(graph::shell_vectors(1, 3), vec![vec![-3], vec![3]]);
    assert_eq!(graph::shell_vectors(3, 2).len(), 18);

    let u = Matrix::from_int_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
    let s = Matrix::from_int_rows(&[vec![0, -1], vec![1, 0]]).unwrap();
    let mut pres = GroupPresentation::new(2, vec![("u".into(), u), ("s".into(), s)]).unwrap();
    pres.add_peripheral("cusp", vec![Word::new(vec![1]).unwrap()], 10, true).unwrap();
    // A second peripheral generated by u^2 repeats elements of u^n.
    pres.add_peripheral(
        "double",
        vec![Word::new(vec![1]).unwrap(), Word::new(vec![1, 1]).unwrap()],
        12,
        true,
    )
    .unwrap();
    let family = |peripheral, below| Vertex {
        name: format!("p{peripheral}"),
        label: VertexLabel::ParabolicFamily {
            coset: Word::new(vec![2]).unwrap(),
            peripheral,
            exclude: vec![vec![2]],
            exclude_below: below,
        },
    };
    let graph = GammaGraph::new(vec![family(0, 1), family(1, 0)], vec![(0, 1), (1, 0)], 0.1).unwrap();
    let els = graph.elements(0, &pres).unwrap();
    assert_eq!(els.len(), 10);
    let exps: Vec<i64> = els.iter().map(|e| e.exponent.as_ref().unwrap()[0]).collect();
    assert_eq!(exps, vec![-1, 1, -2, -3, 3, -4, 4, -5, 5, -6]);
    for e in &els {
        assert_eq!(e.word.letters()[0], 2);
    }
    let els = graph.elements(1, &pres).unwrap();
    assert_eq!(els.len(), 12);
    for i in 0..els.len() {
        for j in i + 1..els.len() {
            assert!(els[i].matrix.projective_diff(&els[j].matrix) > 1e-9);
        }
    }
}

#[test]
fn presentation_checks() {
    let a = m2(2.0, 0.0, 0.0, 0.5);
    let b = m2(1.0, 1.0, 0.0, 1.0);
    let mut pres = GroupPresentation::new(2, vec![("a".into(), a), ("b".into(), b)]).unwrap();
    assert!(pres.inverse_defect() < 1e-12);
    assert!(matches!(
        pres.add_peripheral("x", vec![Word::new(vec![1]).unwrap(), Word::new(vec![2]).unwrap()], 4, true),
        Err(AutomatonError::InvalidPresentation(_))
    ));
    assert!(GroupPresentation::new(2, vec![("a".into(), m2(1.0, 2.0, 2.0, 4.0))]).is_err());
    let w = pres.parse_word("a b^-2").unwrap();
    let direct = m2(2.0, 0.0, 0.0, 0.5).mul(&m2(1.0, -2.0, 0.0, 1.0)).unwrap();
    assert!(pres.evaluate(&w).unwrap().projective_diff(&direct) < 1e-12);
    assert!(matches!(pres.parse_word("c"), Err(AutomatonError::Evaluation(_))));
}

#[test]
fn single_loop_passes_with_closed_form_margin() {
    let (graph, system, pres) = single_loop(0.0);
    let cert = verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert!(cert.pass);
    // x ↦ x / 16 on the affine coordinate x = tan θ.
    let oracle = 0.3 - ((0.31f64).tan() / 16.0).atan();
    assert!((cert.worst_margin - oracle).abs() < 1e-12, "{} vs {oracle}", cert.worst_margin);
    assert!(cert.exact_margins);
}

#[test]
fn repelling_loop_fails() {
    let (graph, system, pres) = single_loop(FRAC_PI_2);
    let cert = verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert!(!cert.pass);
    assert!(cert.worst_margin < 0.0);
    assert!(cert.first_failure.unwrap().contains("v -> v"));
    assert!(matches!(
        CertifiedSystem::certify(graph, system, pres, &CertifyOptions::default()),
        Err(AutomatonError::NotCertified(_))
    ));
}

#[test]
fn missing_domain_is_reported() {
    let (graph, _, pres) = schottky();
    let system = CompatibleSystem::new(vec![ProperDomain::arc(0.0, 0.3).unwrap()]);
    assert!(matches!(
        verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()),
        Err(AutomatonError::MissingDomain { .. })
    ));
}

#[test]
fn schottky_passes_with_closed_form_margins() {
    let (graph, system, pres) = schottky();
    let cert = verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert!(cert.pass);
    assert_eq!(cert.records.len(), 12);
    let eps = graph.epsilon();
    for r in &cert.records {
        let phi = SCHOTTKY_CENTERS[r.from];
        let c = SCHOTTKY_CENTERS[r.to];
        let ends = [c - SCHOTTKY_HALF - eps, c + SCHOTTKY_HALF + eps];
        let oracle = ends
            .iter()
            .map(|&e| SCHOTTKY_HALF - (contract_about(phi, e) - phi).abs())
            .fold(f64::INFINITY, f64::min);
        assert!((r.margin - oracle).abs() < 1e-9, "{r:?} vs {oracle}");
        let width = (contract_about(phi, ends[1]) - contract_about(phi, ends[0])).abs();
        assert!((r.image_diameter - width).abs() < 1e-9);
    }
    let oracle_worst = cert.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    assert!((cert.worst_margin - oracle_worst).abs() < 1e-15);
    assert!(cert.worst_margin > 0.1);
}

#[test]
fn separations_are_checked() {
    let (graph, system, pres) = schottky();
    let gap = FRAC_PI_4 - 2.0 * SCHOTTKY_HALF;
    let ok = system.clone().with_separations(vec![Separation { a: 0, b: 2, delta: gap - 1e-6 }]);
    let cert = verify_compatibility(&graph, &ok, &pres, &CertifyOptions::default()).unwrap();
    assert!(cert.pass);
    assert!((cert.separations[0].distance - gap).abs() < 1e-9);
    let bad = system.with_separations(vec![Separation { a: 0, b: 2, delta: gap + 1e-3 }]);
    let cert = verify_compatibility(&graph, &bad, &pres, &CertifyOptions::default()).unwrap();
    assert!(!cert.pass);
    assert!(cert.first_failure.unwrap().starts_with("separation"));
}

#[test]
fn default_epsilon_is_a_tenth_of_the_smallest_gap() {
    let (_, system, _) = schottky();
    let gap = FRAC_PI_4 - 2.0 * SCHOTTKY_HALF;
    assert!((default_epsilon(&system) - 0.1 * gap).abs() < 1e-9);
}

#[test]
fn schottky_divergence_witnesses() {
    let (graph, system, pres) = schottky();
    let recs = check_divergence(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert_eq!(recs.len(), 12);
    for r in &recs {
        let DivergenceStatus::Witnessed(x) = &r.status else {
            panic!("no witness for {r:?}");
        };
        // The witness lies in U_from but not in α · closure(U_to).
        assert!(system.domains[r.from].contains_vector(x));
        let phi = SCHOTTKY_CENTERS[r.from];
        let c = SCHOTTKY_CENTERS[r.to];
        let lo = contract_about(phi, c - SCHOTTKY_HALF);
        let hi = contract_about(phi, c + SCHOTTKY_HALF);
        let t = x[1].atan2(x[0]);
        let off = (t - phi + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2 + phi;
        assert!(off < lo.min(hi) || off > lo.max(hi));
    }
}

#[test]
fn rotation_has_no_divergence_witness() {
    // Two arcs swapped by the quarter turn, as a union in the chart centred
    // at angle π/4 where the quarter turn reads x ↦ -1/x.
    let chart = ProjHyperplane::new(&[FRAC_PI_4.cos(), FRAC_PI_4.sin()]).unwrap();
    let (lo, hi) = (0.7, 1.0 / 0.7);
    let c = (lo + hi) / 2.0;
    let r = (hi - lo) / 2.0;
    let u = ProperDomain::union(
        &chart,
        vec![
            Ball { center: vec![c], radius: r },
            Ball { center: vec![-c], radius: r },
        ],
    )
    .unwrap();
    let pres = GroupPresentation::new(2, vec![("r".into(), m2(0.0, -1.0, 1.0, 0.0))]).unwrap();
    let graph = GammaGraph::new(vec![single("v", vec![1])], vec![(0, 0)], 0.01).unwrap();
    let system = CompatibleSystem::new(vec![u]);
    let recs = check_divergence(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert_eq!(recs[0].status, DivergenceStatus::NoWitnessFound);
    let cert = verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert!(!cert.pass);
}

#[test]
fn path_counts_and_strategies() {
    let (graph, _, pres) = schottky();
    let table = graph.element_table(&pres).unwrap();
    for n in 1..=6 {
        let e = enumerate_paths(&graph, &table, n, &PathStrategy::Exhaustive { cap: 100_000 }).unwrap();
        assert_eq!(e.paths.len(), 4 * 3usize.pow(n as u32 - 1));
        assert!(!e.truncated);
        for p in &e.paths {
            for w in p.vertices.windows(2) {
                assert!(graph.edges().contains(&(w[0], w[1])));
            }
        }
    }
    let e = enumerate_paths(&graph, &table, 6, &PathStrategy::Exhaustive { cap: 100 }).unwrap();
    assert_eq!(e.paths.len(), 100);
    assert!(e.truncated);

    let (g1, _, p1) = single_loop(0.0);
    let t1 = g1.element_table(&p1).unwrap();
    let e = enumerate_paths(&g1, &t1, 1, &PathStrategy::Exhaustive { cap: 10 }).unwrap();
    assert_eq!(e.paths.len(), 1);

    let strat = PathStrategy::Random { seed: 7, count: 20 };
    let a = enumerate_paths(&graph, &table, 15, &strat).unwrap();
    let b = enumerate_paths(&graph, &table, 15, &strat).unwrap();
    assert_eq!(a, b);
    let c = enumerate_paths(&graph, &table, 15, &PathStrategy::Random { seed: 8, count: 20 }).unwrap();
    assert_ne!(a, c);
    for p in &a.paths {
        for w in p.vertices.windows(2) {
            assert!(graph.edges().contains(&(w[0], w[1])));
        }
    }

    let spine = enumerate_paths(&graph, &table, 5, &PathStrategy::Spine(vec![(0, 0), (2, 0)])).unwrap();
    assert_eq!(spine.paths[0].vertices, vec![0, 2, 0, 2, 0]);
    assert!(enumerate_paths(&graph, &table, 5, &PathStrategy::Spine(vec![(0, 0), (1, 0)])).is_err());
    assert!(enumerate_paths(&graph, &table, 0, &PathStrategy::Exhaustive { cap: 1 }).is_err());
}

#[test]
fn nesting_is_transitive_on_samples() {
    let (graph, system, pres) = schottky();
    let table = graph.element_table(&pres).unwrap();
    let opts = CertifyOptions::default();
    for &(u, v) in graph.edges() {
        for w in graph.successors(v) {
            let ab = table.per_vertex[u][0].matrix.mul(&table.per_vertex[v][0].matrix).unwrap();
            let sample = system.domains[u].boundary_sample(opts.margin_samples);
            for p in system.domains[w].neighborhood_boundary(graph.epsilon(), 64) {
                let x = ab.mul_vec(&p);
                assert!(system.domains[u].signed_margin(&x, &sample) > 0.0);
            }
        }
    }
}

fn loop3(radius: f64, eps: f64) -> (GammaGraph, CompatibleSystem, GroupPresentation) {
    let g = Matrix::diag(&[4.0, 1.0, 0.25]);
    let pres = GroupPresentation::new(3, vec![("g".into(), g)]).unwrap();
    let graph = GammaGraph::new(vec![single("v", vec![1])], vec![(0, 0)], eps).unwrap();
    let chart = ProjHyperplane::new(&[1.0, 0.0, 0.0]).unwrap();
    let system = CompatibleSystem::new(vec![ProperDomain::ball(&chart, vec![0.0, 0.0], radius).unwrap()]);
    (graph, system, pres)
}

#[test]
fn sampled_margins_in_higher_dimension() {
    let (graph, system, pres) = loop3(0.5, 0.01);
    let cert = verify_compatibility(&graph, &system, &pres, &CertifyOptions::default()).unwrap();
    assert!(cert.pass);
    assert!(!cert.exact_margins);
    // The image of the ε-neighbourhood sits within chart radius ~0.53/4 of
    // the centre, so the margin is close to atan(0.5) - atan(0.53/4).
    let rough = 0.5f64.atan() - (0.53f64 / 4.0).atan();
    assert!((cert.worst_margin - rough).abs() < 0.02, "{}", cert.worst_margin);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn finer_sampling_keeps_passing_records(radius in 0.2f64..1.5, eps in 0.001f64..0.05) {
        let (graph, system, pres) = loop3(radius, eps);
        let opts = CertifyOptions { boundary_samples: 64, interior_samples: 16, margin_samples: 256, ..Default::default() };
        let coarse = verify_compatibility(&graph, &system, &pres, &opts).unwrap();
        let fine = verify_compatibility(&graph, &system, &pres, &opts.scaled(4)).unwrap();
        for (c, f) in coarse.records.iter().zip(&fine.records) {
            if c.pass {
                prop_assert!(f.pass);
                prop_assert!(f.margin >= 0.5 * c.margin);
            }
        }
    }
}

fn shrinking_loop(t: f64) -> Result<GroupPresentation> {
    let s = 1.0 - t;
    GroupPresentation::new(2, vec![("g".into(), m2(s.exp(), 0.0, 0.0, (-s).exp()))])
}

#[test]
fn probe_reports_first_failing_parameter() {
    let (graph, system, _) = single_loop(0.0);
    // Passing needs e^{-2s} tan(0.31) < tan(0.3), i.e. s > 0.0175 with s = 1 - t.
    let threshold = 1.0 - 0.5 * ((0.31f64).tan() / (0.3f64).tan()).ln();
    let grid = [0.0, 0.25, 0.5, 0.75, 0.98, 0.99];
    assert!(0.98 < threshold && threshold < 0.99);
    let report = peripheral_stability_probe(&shrinking_loop, &grid, &graph, &system, &CertifyOptions::default()).unwrap();
    assert_eq!(report.first_failing_t, Some(0.99));
    assert_eq!(report.first_failing_t_per_edge, vec![("v -> v".to_string(), Some(0.99))]);
    assert!(report.rows[..5].iter().all(|r| r.pass));

    let (graph, system, _) = single_loop(FRAC_PI_2);
    assert!(matches!(
        peripheral_stability_probe(&shrinking_loop, &grid, &graph, &system, &CertifyOptions::default()),
        Err(AutomatonError::BaseFails)
    ));
}

fn pgl2z() -> GroupPresentation {
    let u = Matrix::from_int_rows(&[vec![1, 1], vec![0, 1]]).unwrap();
    let s = Matrix::from_int_rows(&[vec![0, -1], vec![1, 0]]).unwrap();
    let j = Matrix::from_int_rows(&[vec![-1, 0], vec![0, 1]]).unwrap();
    let mut pres = GroupPresentation::new(2, vec![("u".into(), u), ("s".into(), s), ("j".into(), j)]).unwrap();
    pres.add_peripheral("cusp", vec![Word::new(vec![1]).unwrap()], 32, true).unwrap();
    pres
}

#[test]
fn synthesis_on_pgl2z_certifies() {
    let pres = pgl2z();
    let res = synthesize_rp1(&pres, &SynthesisParams::default()).unwrap();
    assert!(res.certificate.pass);
    let parabolic = res
        .graph
        .vertices()
        .iter()
        .filter(|v| matches!(v.label, VertexLabel::ParabolicFamily { .. }))
        .count();
    assert!(parabolic >= 1);
    assert_eq!(res.certificate.epsilon, SynthesisParams::default().epsilon);
    // Re-certifying the returned system with the same ε passes.
    let again = verify_compatibility(&res.graph, &res.system, &pres, &CertifyOptions::default()).unwrap();
    assert!(again.pass);
    // The V sets cover the circle.
    for k in 0..2000 {
        let t = PI * (k as f64 + 0.5) / 2000.0;
        assert!(res.vertices.iter().any(|v| v.v.contains(t)), "{t} uncovered");
    }
}

#[test]
fn synthesis_on_schottky_limit_points() {
    let (_, _, pres) = schottky();
    let elements: Vec<Matrix> = {
        let mut out = vec![Matrix::identity(2)];
        for l in [1, -1, 2, -2] {
            for m in [1, -1, 2, -2] {
                if l != -m {
                    let w = Word::new(vec![l, m]).unwrap();
                    out.push(pres.evaluate(&w).unwrap());
                }
            }
        }
        out
    };
    let mut points = Vec::new();
    for g in &elements {
        for c in SCHOTTKY_CENTERS {
            let v = g.mul_vec(&[c.cos(), c.sin()]);
            points.push(v[1].atan2(v[0]));
        }
    }
    let params = SynthesisParams {
        points: Some(points),
        search_radius: 8,
        ..Default::default()
    };
    let res = synthesize_rp1(&pres, &params).unwrap();
    assert!(res.certificate.pass);
    assert!(res
        .graph
        .vertices()
        .iter()
        .all(|v| matches!(v.label, VertexLabel::Singleton { .. })));
}

#[test]
fn synthesis_without_generators_fails() {
    let pres = GroupPresentation::new(2, vec![]).unwrap();
    match synthesize_rp1(&pres, &SynthesisParams::default()) {
        Err(AutomatonError::SynthesisFailed { clause, point }) => {
            assert!(clause.contains("conical_limit_neighborhoods"));
            assert_eq!(point, 0.0);
        }
        other => panic!("{other:?}"),
    }
}
