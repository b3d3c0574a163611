//! The subcommands. Each returns the process exit code on success and a
//! [`CliError`] (exit code 2) on bad input.

use std::fmt::Write as _;

use flagdyn::automaton::{
    check_divergence, enumerate_paths, peripheral_stability_probe, synthesize_rp1, verify_compatibility,
    AutomatonError, CertifiedSystem, DivergenceStatus, GroupPresentation, PathStrategy, SynthesizedKind,
    VertexLabel,
};
use flagdyn::conedoff::{ConedGraph, Word};
use flagdyn::domains::{zimmer_metric, DomainError};
use flagdyn::dynamics::{
    contracting_limit_unchecked, fit_rates, limit_set_sample_unchecked, local_to_global_check, DirectionCheck,
    DynamicsError, PathResult,
};
use flagdyn::linalg::{gap_trace, svd, Matrix};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{product, ConfigError, LoadedConfig};
use crate::output::{cloud_csv, cloud_svg, csv, real, Header, OutDir};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Settings shared by all commands.
pub struct Context {
    pub cfg: LoadedConfig,
    pub seed: u64,
    pub out: OutDir,
    pub svg: bool,
    pub skip_certify: bool,
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

/// Input problems become usage errors; anything else is a run failure.
fn is_input_error(e: &AutomatonError) -> bool {
    matches!(
        e,
        AutomatonError::MissingDomain { .. }
            | AutomatonError::InvalidGraph(_)
            | AutomatonError::InvalidPresentation(_)
            | AutomatonError::Evaluation(_)
    )
}

struct Built {
    sys: CertifiedSystem,
}

fn build(ctx: &Context, certify: bool) -> Result<std::result::Result<Built, String>> {
    let c = &ctx.cfg.config;
    let scope = c.scope();
    let pres = c.presentation(&scope)?;
    let system = c.system(&scope)?;
    let graph = c.graph(&pres, &system)?;
    let opts = c.certify.options()?;
    if !certify {
        let sys = CertifiedSystem::uncertified(graph, system, pres).map_err(usage)?;
        return Ok(Ok(Built { sys }));
    }
    match CertifiedSystem::certify(graph, system, pres, &opts) {
        Ok(sys) => Ok(Ok(Built { sys })),
        Err(AutomatonError::NotCertified(msg)) => Ok(Err(msg)),
        Err(e) if is_input_error(&e) => Err(usage(e)),
        Err(e) => Ok(Err(e.to_string())),
    }
}

pub fn certify(ctx: &Context) -> Result<i32> {
    let c = &ctx.cfg.config;
    let scope = c.scope();
    let pres = c.presentation(&scope)?;
    let system = c.system(&scope)?;
    let graph = c.graph(&pres, &system)?;
    let opts = c.certify.options()?;
    let cert = match verify_compatibility(&graph, &system, &pres, &opts) {
        Ok(cert) => cert,
        Err(e) if is_input_error(&e) => return Err(usage(e)),
        Err(e) => {
            eprintln!("certification failed: {e}");
            return Ok(EXIT_FAIL);
        }
    };
    let divergence = if cert.pass {
        check_divergence(&graph, &system, &pres, &opts).map_err(usage)?
    } else {
        Vec::new()
    };
    let header = Header::new("certify", &ctx.cfg, ctx.seed)
        .budget("epsilon", graph.epsilon())
        .budget("boundary_samples", opts.boundary_samples)
        .budget("interior_samples", opts.interior_samples)
        .budget("margin_samples", opts.margin_samples)
        .budget("min_margin", opts.min_margin);
    #[derive(Serialize)]
    struct Out<'a> {
        certificate: &'a flagdyn::automaton::Certificate,
        divergence: &'a [flagdyn::automaton::DivergenceRecord],
    }
    ctx.out.json(
        "certificate.json",
        &header,
        &Out {
            certificate: &cert,
            divergence: &divergence,
        },
    )?;
    let names = |i: usize| graph.vertices()[i].name.clone();
    let mut body = String::new();
    writeln!(body, "pass: {}", cert.pass).unwrap();
    writeln!(body, "worst_margin: {}", real(cert.worst_margin)).unwrap();
    writeln!(body, "exact_margins: {}", cert.exact_margins).unwrap();
    writeln!(body, "records: {}", cert.records.len()).unwrap();
    if let Some(f) = &cert.first_failure {
        writeln!(body, "first_failure: {f}").unwrap();
    }
    for t in &cert.tails {
        writeln!(body, "tail {} -> {}: {}", names(t.from), names(t.to), t.disclosure).unwrap();
    }
    for d in &divergence {
        let status = match d.status {
            DivergenceStatus::Witnessed(_) => "witnessed",
            DivergenceStatus::NoWitnessFound => "no witness found (inconclusive)",
        };
        writeln!(body, "divergence {} -> {}: {status}", names(d.from), names(d.to)).unwrap();
    }
    ctx.out.text("certify_report.txt", &header, &body)?;
    print!("{body}");
    Ok(if cert.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn certified(ctx: &Context) -> Result<std::result::Result<Built, i32>> {
    match build(ctx, !ctx.skip_certify)? {
        Ok(b) => Ok(Ok(b)),
        Err(msg) => {
            eprintln!("refusing to run on an uncertified system ({msg}); pass --skip-certify to override");
            Ok(Err(EXIT_FAIL))
        }
    }
}

fn dyn_failure(e: DynamicsError) -> Result<i32> {
    match e {
        DynamicsError::InvalidPath(_) => Err(usage(e)),
        e => {
            eprintln!("{e}");
            Ok(EXIT_FAIL)
        }
    }
}

pub fn limitset(ctx: &Context) -> Result<i32> {
    let b = match certified(ctx)? {
        Ok(b) => b,
        Err(code) => return Ok(code),
    };
    let c = &ctx.cfg.config;
    let opts = c.dynamics.options()?;
    let cloud = match limit_set_sample_unchecked(&b.sys, c.dynamics.depth, c.dynamics.count, ctx.seed, &opts) {
        Ok(cl) => cl,
        Err(e) => return dyn_failure(e),
    };
    let header = Header::new("limitset", &ctx.cfg, ctx.seed)
        .budget("depth", c.dynamics.depth)
        .budget("count", c.dynamics.count)
        .budget("boundary_samples", opts.boundary_samples)
        .budget("certified", b.sys.is_certified());
    ctx.out.write("limitset.csv", &cloud_csv(&header, &cloud, c.dim))?;
    if ctx.svg {
        match cloud_svg(&header, &cloud, c.dim) {
            Some(svg) => {
                ctx.out.write("limitset.svg", &svg)?;
            }
            None => eprintln!("--svg is only available in dimensions 2 and 3"),
        }
    }
    let worst = cloud.points.iter().map(|p| p.radius).fold(0.0, f64::max);
    println!("points: {}", cloud.points.len());
    println!("max_radius: {}", real(worst));
    Ok(EXIT_PASS)
}

#[derive(Serialize)]
struct RatesOut {
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    r_squared: f64,
    slope: f64,
    depth_range: (usize, usize),
    paths: usize,
    accepted: bool,
    error: Option<String>,
}

pub fn rates(ctx: &Context) -> Result<i32> {
    let b = match certified(ctx)? {
        Ok(b) => b,
        Err(code) => return Ok(code),
    };
    let c = &ctx.cfg.config;
    let opts = c.dynamics.options()?;
    let range = c.dynamics.rate_depths;
    let paths = enumerate_paths(
        &b.sys.graph,
        &b.sys.table,
        range.1,
        &PathStrategy::Random {
            seed: ctx.seed,
            count: c.dynamics.rate_paths,
        },
    )
    .map_err(usage)?
    .paths;
    let results: std::result::Result<Vec<PathResult>, DynamicsError> = paths
        .par_iter()
        .map(|p| contracting_limit_unchecked(&b.sys, p, range.1, &opts))
        .collect();
    let results = match results {
        Ok(r) => r,
        Err(e) => return dyn_failure(e),
    };
    let fit = fit_rates(&results, range);
    let out = match &fit {
        Ok(r) => RatesOut {
            lambda1: Some(r.lambda1),
            lambda2: Some(r.lambda2),
            r_squared: r.r_squared,
            slope: -r.lambda2,
            depth_range: range,
            paths: results.len(),
            accepted: true,
            error: None,
        },
        Err(DynamicsError::FitRejected { r_squared, slope }) => RatesOut {
            lambda1: None,
            lambda2: None,
            r_squared: *r_squared,
            slope: *slope,
            depth_range: range,
            paths: results.len(),
            accepted: false,
            error: Some(fit.as_ref().unwrap_err().to_string()),
        },
        Err(e) => return Err(usage(e)),
    };
    let header = Header::new("rates", &ctx.cfg, ctx.seed)
        .budget("depth_range", format!("{}..={}", range.0, range.1))
        .budget("paths", results.len())
        .budget("certified", b.sys.is_certified());
    ctx.out.json("rates.json", &header, &out)?;
    let mut body = String::new();
    writeln!(body, "accepted: {}", out.accepted).unwrap();
    if let (Some(l1), Some(l2)) = (out.lambda1, out.lambda2) {
        writeln!(body, "bound: diam <= {} * exp(-{} * n)", real(l1), real(l2)).unwrap();
        writeln!(body, "lambda1: {}", real(l1)).unwrap();
        writeln!(body, "lambda2: {}", real(l2)).unwrap();
    }
    writeln!(body, "slope: {}", real(out.slope)).unwrap();
    writeln!(body, "r_squared: {}", real(out.r_squared)).unwrap();
    writeln!(body, "depth_range: {}..={}", range.0, range.1).unwrap();
    ctx.out.text("rates_report.txt", &header, &body)?;
    // Per-depth diameters for inspection.
    let cols: Vec<String> = std::iter::once("path".to_string())
        .chain((1..=range.1).map(|n| format!("d{n}")))
        .collect();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| std::iter::once(r.code.clone()).chain(r.diameters.iter().map(|&d| real(d))).collect())
        .collect();
    ctx.out.write("rates_diameters.csv", &csv(&header, &cols, &rows))?;
    print!("{body}");
    Ok(if out.accepted { EXIT_PASS } else { EXIT_FAIL })
}

pub fn probe(ctx: &Context) -> Result<i32> {
    let c = &ctx.cfg.config;
    let spec = c
        .probe
        .as_ref()
        .ok_or_else(|| usage("config has no [probe] section"))?;
    let scope = c.scope();
    let pres0 = c.presentation(&scope.with("t", 0.0))?;
    let system = c.system(&scope)?;
    let graph = c.graph(&pres0, &system)?;
    let opts = c.certify.options()?;
    let family = |t: f64| -> std::result::Result<GroupPresentation, AutomatonError> {
        c.presentation(&scope.with("t", t))
            .map_err(|e| AutomatonError::InvalidPresentation(e.to_string()))
    };
    let report = match peripheral_stability_probe(&family, &spec.grid, &graph, &system, &opts) {
        Ok(r) => r,
        Err(AutomatonError::BaseFails) => {
            eprintln!("the t = 0 system does not certify");
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(usage(e)),
    };
    let header = Header::new("probe", &ctx.cfg, ctx.seed)
        .budget("grid", format!("{:?}", spec.grid))
        .budget("boundary_samples", opts.boundary_samples)
        .budget("epsilon", graph.epsilon());
    ctx.out.json("probe.json", &header, &report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                real(r.t),
                r.pass.to_string(),
                real(r.worst_margin),
                format!("\"{}\"", r.first_failure.clone().unwrap_or_default().replace('"', "'")),
            ]
        })
        .collect();
    let cols = ["t", "pass", "worst_margin", "first_failure"].map(String::from);
    ctx.out.write("probe.csv", &csv(&header, &cols, &rows))?;
    match report.first_failing_t {
        Some(t) => println!("first_failing_t: {}", real(t)),
        None => println!("first_failing_t: none"),
    }
    for (edge, t) in &report.first_failing_t_per_edge {
        println!("edge {edge}: {}", t.map_or("none".to_string(), real));
    }
    Ok(if report.first_failing_t.is_some() { EXIT_FAIL } else { EXIT_PASS })
}

#[derive(Serialize)]
struct QuasigeodesicOut {
    depth: usize,
    paths: usize,
    d_max: usize,
    max_distance: Option<usize>,
    out_of_ball: usize,
    pass: bool,
}

#[derive(Serialize)]
struct SynthOut<'a> {
    vertices: usize,
    edges: usize,
    parabolic_vertices: usize,
    conical_vertices: usize,
    certificate_pass: bool,
    worst_margin: f64,
    epsilon: f64,
    synthesized: &'a [flagdyn::automaton::SynthesizedVertex],
    edge_list: Vec<(String, String)>,
    quasigeodesic: Option<QuasigeodesicOut>,
}

pub fn synthesize(ctx: &Context) -> Result<i32> {
    let c = &ctx.cfg.config;
    let scope = c.scope();
    let pres = c.presentation(&scope)?;
    let spec = c.synthesize.clone().unwrap_or_default();
    let params = spec.params(c.certify.options()?);
    let res = match synthesize_rp1(&pres, &params) {
        Ok(r) => r,
        Err(e @ AutomatonError::SynthesisFailed { .. }) => {
            eprintln!("{e}");
            return Ok(EXIT_FAIL);
        }
        Err(e) => return Err(usage(e)),
    };
    let parabolic = res
        .graph
        .vertices()
        .iter()
        .filter(|v| matches!(v.label, VertexLabel::ParabolicFamily { .. }))
        .count();
    let conical = res
        .vertices
        .iter()
        .filter(|v| matches!(v.kind, SynthesizedKind::Conical { .. }))
        .count();
    let quasi = match &spec.quasigeodesic {
        Some(q) => Some(quasigeodesic_sample(&res, &pres, q, ctx.seed)?),
        None => None,
    };
    let names: Vec<String> = res.graph.vertices().iter().map(|v| v.name.clone()).collect();
    let out = SynthOut {
        vertices: res.graph.vertices().len(),
        edges: res.graph.edges().len(),
        parabolic_vertices: parabolic,
        conical_vertices: conical,
        certificate_pass: res.certificate.pass,
        worst_margin: res.certificate.worst_margin,
        epsilon: res.graph.epsilon(),
        synthesized: &res.vertices,
        edge_list: res
            .graph
            .edges()
            .iter()
            .map(|&(a, b)| (names[a].clone(), names[b].clone()))
            .collect(),
        quasigeodesic: quasi,
    };
    let header = Header::new("synthesize", &ctx.cfg, ctx.seed)
        .budget("epsilon", params.epsilon)
        .budget("delta", params.delta)
        .budget("search_radius", params.search_radius)
        .budget("parabolic_radius", params.parabolic_radius)
        .budget("grid", params.grid);
    ctx.out.json("synthesis.json", &header, &out)?;
    println!("vertices: {}", out.vertices);
    println!("edges: {}", out.edges);
    println!("parabolic_vertices: {}", out.parabolic_vertices);
    println!("certificate_pass: {}", out.certificate_pass);
    println!("worst_margin: {}", real(out.worst_margin));
    let mut ok = out.certificate_pass;
    if let Some(q) = &out.quasigeodesic {
        println!(
            "quasigeodesic: depth {} max_distance {} (d_max {}, out of ball {})",
            q.depth,
            q.max_distance.map_or("none".into(), |d| d.to_string()),
            q.d_max,
            q.out_of_ball
        );
        ok &= q.pass;
    }
    Ok(if ok { EXIT_PASS } else { EXIT_FAIL })
}

fn quasigeodesic_sample(
    res: &flagdyn::automaton::SynthesisResult,
    pres: &GroupPresentation,
    q: &crate::config::QuasigeodesicSpec,
    seed: u64,
) -> Result<QuasigeodesicOut> {
    let table = res.graph.element_table(pres).map_err(usage)?;
    let paths = enumerate_paths(
        &res.graph,
        &table,
        q.depth,
        &PathStrategy::Random { seed, count: q.paths },
    )
    .map_err(usage)?
    .paths;
    let g = ConedGraph::linear(pres, q.radius).with_cone_cap(q.cone_cap);
    let reports: Vec<Option<usize>> = paths
        .par_iter()
        .map(|p| {
            let mut w = Word::identity();
            let prefixes: Vec<Word> = p
                .vertices
                .iter()
                .zip(&p.elements)
                .map(|(&v, &k)| {
                    w = w.concat(&table.per_vertex[v][k].word).reduced();
                    w.clone()
                })
                .collect();
            g.quasigeodesic_check(&prefixes, q.d_max).ok().map(|r| r.distance)
        })
        .collect();
    let max_distance = reports.iter().flatten().copied().max();
    let out_of_ball = reports.iter().filter(|r| r.is_none()).count();
    Ok(QuasigeodesicOut {
        depth: q.depth,
        paths: paths.len(),
        d_max: q.d_max,
        max_distance,
        out_of_ball,
        pass: out_of_ball == 0 && max_distance.map_or(false, |d| d <= q.d_max),
    })
}

#[derive(Serialize)]
struct GapsOut {
    k: usize,
    gaps: Vec<Vec<f64>>,
    divergent: bool,
    local_global: Option<flagdyn::dynamics::LocalGlobalReport>,
}

pub fn gaps(ctx: &Context) -> Result<i32> {
    let c = &ctx.cfg.config;
    let spec = c.gaps.as_ref().ok_or_else(|| usage("config has no [gaps] section"))?;
    if spec.n_max == 0 || spec.k == 0 || spec.k >= c.dim {
        return Err(usage("gaps needs n_max > 0 and 0 < k < dim"));
    }
    let scope = c.scope();
    let known = c.matrices(&scope)?;
    let seq = (1..=spec.n_max)
        .map(|n| product(&spec.product, c.dim, &scope.with("n", n as f64), &known))
        .collect::<std::result::Result<Vec<Matrix>, _>>()?;
    let all: Vec<Vec<f64>> = seq
        .par_iter()
        .map(|g| {
            let s = svd(g)?;
            Ok((1..c.dim).map(|j| s.log_gap(j)).collect())
        })
        .collect::<std::result::Result<_, flagdyn::linalg::LinalgError>>()
        .map_err(usage)?;
    let opts = spec.local_options();
    let trace = gap_trace(&seq, spec.k).map_err(usage)?;
    let local = match &spec.domain {
        Some(shape) => {
            let u = shape.build(&scope)?;
            Some(local_to_global_check(&seq, &u, spec.k, &opts).map_err(usage)?)
        }
        None => None,
    };
    let divergent = flagdyn::linalg::divergence_flag(&trace.values, opts.gap_threshold);
    let header = Header::new("gaps", &ctx.cfg, ctx.seed)
        .budget("n_max", spec.n_max)
        .budget("k", spec.k)
        .budget("gap_threshold", opts.gap_threshold)
        .budget("diameter_tol", opts.diameter_tol);
    let mut cols = vec!["n".to_string()];
    cols.extend((1..c.dim).map(|j| format!("gap{j}")));
    if local.is_some() {
        cols.push("fs_diameter".into());
    }
    let rows: Vec<Vec<String>> = all
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let mut r = vec![(i + 1).to_string()];
            r.extend(g.iter().map(|&x| real(x)));
            if let Some(l) = &local {
                r.push(real(l.diameters[i]));
            }
            r
        })
        .collect();
    ctx.out.write("gaps.csv", &csv(&header, &cols, &rows))?;
    let out = GapsOut {
        k: spec.k,
        gaps: all,
        divergent,
        local_global: local,
    };
    ctx.out.json("gaps.json", &header, &out)?;
    println!("divergent: {divergent}");
    let mut code = EXIT_PASS;
    if let Some(l) = &out.local_global {
        let show = |d: DirectionCheck| match d {
            DirectionCheck::Pass => "pass",
            DirectionCheck::Fail => "fail",
            DirectionCheck::PremiseNotMet => "premise not met",
        };
        println!("verdict: {:?}", l.verdict);
        println!("contraction implies divergence: {}", show(l.contraction_implies_divergence));
        println!("divergence implies contraction: {}", show(l.divergence_implies_contraction));
        println!(
            "first n with diameter < tol: {}",
            l.first_small_diameter.map_or("none".into(), |n| n.to_string())
        );
        println!(
            "first n with gap > threshold: {}",
            l.first_large_gap.map_or("none".into(), |n| n.to_string())
        );
        if l.contraction_implies_divergence == DirectionCheck::Fail
            || l.divergence_implies_contraction == DirectionCheck::Fail
        {
            code = EXIT_FAIL;
        }
    }
    Ok(code)
}

#[derive(Serialize)]
struct HilbertOut {
    value: f64,
    exact: bool,
    pairs: usize,
}

pub fn hilbert(ctx: &Context) -> Result<i32> {
    let c = &ctx.cfg.config;
    let spec = c.hilbert.as_ref().ok_or_else(|| usage("config has no [hilbert] section"))?;
    let scope = c.scope();
    let omega = spec.domain.build(&scope)?;
    let x = spec.points.0.build(&scope)?;
    let y = spec.points.1.build(&scope)?;
    let v = zimmer_metric(&omega, &x, &y, spec.budget).map_err(|e: DomainError| usage(e))?;
    let header = Header::new("hilbert", &ctx.cfg, ctx.seed).budget("budget", spec.budget);
    let out = HilbertOut {
        value: v.value,
        exact: v.exact,
        pairs: v.pairs,
    };
    ctx.out.json("hilbert.json", &header, &out)?;
    println!("{}", real(v.value));
    Ok(EXIT_PASS)
}
