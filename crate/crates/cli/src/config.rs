//! Run configuration: a TOML file describing a group, a graph, domains and
//! per-command budgets. Matrix entries and other reals may be numbers or
//! expressions over `[params]` (and `t` in probes, `n` in gap sequences).

use std::collections::BTreeMap;
use std::path::Path;

use flagdyn::automaton::{
    CertifyOptions, CompatibleSystem, GammaGraph, GroupPresentation, Separation, SynthesisParams, Vertex,
    VertexLabel,
};
use flagdyn::domains::{Ball, ProperDomain};
use flagdyn::dynamics::{DynamicsOptions, LocalGlobalOptions};
use flagdyn::linalg::Matrix;
use flagdyn::projgeom::{ProjHyperplane, ProjPoint};
use flagdyn::automaton::default_epsilon;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// A real given as a number or an expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Expr(String),
}

/// Variables visible to expressions.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    vars: BTreeMap<String, f64>,
}

impl Scope {
    pub fn with(&self, name: &str, value: f64) -> Scope {
        let mut s = self.clone();
        s.vars.insert(name.to_string(), value);
        s
    }

    pub fn eval(&self, text: &str) -> Result<f64> {
        let expr: meval::Expr = text
            .parse()
            .map_err(|e| invalid(format!("expression `{text}`: {e}")))?;
        let mut ctx = meval::Context::new();
        for (k, v) in &self.vars {
            ctx.var(k.as_str(), *v);
        }
        let v = expr
            .eval_with_context(ctx)
            .map_err(|e| invalid(format!("expression `{text}`: {e}")))?;
        if !v.is_finite() {
            return Err(invalid(format!("expression `{text}` is not finite")));
        }
        Ok(v)
    }

    pub fn int(&self, text: &str) -> Result<i64> {
        let v = self.eval(text)?;
        if v.fract() != 0.0 || v.abs() > 1e15 {
            return Err(invalid(format!("`{text}` = {v} is not an integer")));
        }
        Ok(v as i64)
    }
}

impl Num {
    pub fn eval(&self, scope: &Scope) -> Result<f64> {
        match self {
            Num::Int(i) => Ok(*i as f64),
            Num::Float(f) => Ok(*f),
            Num::Expr(s) => scope.eval(s),
        }
    }
}

fn eval_all(v: &[Num], scope: &Scope) -> Result<Vec<f64>> {
    v.iter().map(|x| x.eval(scope)).collect()
}

/// A matrix given by rows, or as a product of named matrices with integer
/// powers such as `"M A^k M^-1"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub name: String,
    #[serde(default)]
    pub rows: Option<Vec<Vec<Num>>>,
    #[serde(default)]
    pub product: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeripheralSpec {
    pub name: String,
    pub words: Vec<String>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "yes")]
    pub abelian: bool,
}

fn default_truncation() -> usize {
    32
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VertexSpec {
    pub name: String,
    /// Singleton label.
    #[serde(default)]
    pub word: Option<String>,
    /// Parabolic family label `coset · ⟨peripheral⟩`.
    #[serde(default)]
    pub peripheral: Option<String>,
    #[serde(default)]
    pub coset: Option<String>,
    #[serde(default)]
    pub exclude: Vec<Vec<i64>>,
    #[serde(default = "one")]
    pub exclude_below: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// Defaults to a tenth of the smallest gap between domains.
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub vertices: Vec<VertexSpec>,
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<Num>,
    pub radius: Num,
}

/// A proper domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    /// Arc of `RP^1` of angles `center ± half_width` (point `[cos θ : sin θ]`).
    Arc { center: Num, half_width: Num },
    /// Interval `(lo, hi)` of the affine line `x ↦ [x : 1]`.
    Interval { lo: Num, hi: Num },
    /// Euclidean ball in the affine chart opposite the hyperplane `chart`.
    Ball { chart: Vec<Num>, center: Vec<Num>, radius: Num },
    Union { chart: Vec<Num>, balls: Vec<BallSpec> },
    Polytope { chart: Vec<Num>, vertices: Vec<Vec<Num>> },
}

impl Shape {
    pub fn build(&self, scope: &Scope) -> Result<ProperDomain> {
        let chart_of = |c: &[Num]| -> Result<ProjHyperplane> {
            ProjHyperplane::new(&eval_all(c, scope)?).map_err(|e| invalid(e.to_string()))
        };
        let d = match self {
            Shape::Arc { center, half_width } => ProperDomain::arc(center.eval(scope)?, half_width.eval(scope)?),
            Shape::Interval { lo, hi } => {
                let (lo, hi) = (lo.eval(scope)?, hi.eval(scope)?);
                if !(lo < hi) {
                    return Err(invalid(format!("interval ({lo}, {hi}) is empty")));
                }
                let (a, b) = (1f64.atan2(lo), 1f64.atan2(hi));
                ProperDomain::arc((a + b) / 2.0, (a - b) / 2.0)
            }
            Shape::Ball { chart, center, radius } => {
                ProperDomain::ball(&chart_of(chart)?, eval_all(center, scope)?, radius.eval(scope)?)
            }
            Shape::Union { chart, balls } => {
                let balls = balls
                    .iter()
                    .map(|b| {
                        Ok(Ball {
                            center: eval_all(&b.center, scope)?,
                            radius: b.radius.eval(scope)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                ProperDomain::union(&chart_of(chart)?, balls)
            }
            Shape::Polytope { chart, vertices } => {
                let vs = vertices
                    .iter()
                    .map(|v| eval_all(v, scope))
                    .collect::<Result<Vec<_>>>()?;
                ProperDomain::polytope(&chart_of(chart)?, vs)
            }
        };
        d.map_err(|e| invalid(e.to_string()))
    }

    pub fn is_interval(&self) -> bool {
        matches!(self, Shape::Interval { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub vertex: String,
    #[serde(flatten)]
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparationSpec {
    pub a: String,
    pub b: String,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySpec {
    pub boundary_samples: Option<usize>,
    pub interior_samples: Option<usize>,
    pub margin_samples: Option<usize>,
    pub min_margin: Option<f64>,
    pub witness_samples: Option<usize>,
}

impl CertifySpec {
    pub fn options(&self) -> Result<CertifyOptions> {
        let d = CertifyOptions::default();
        let o = CertifyOptions {
            boundary_samples: self.boundary_samples.unwrap_or(d.boundary_samples),
            interior_samples: self.interior_samples.unwrap_or(d.interior_samples),
            margin_samples: self.margin_samples.unwrap_or(d.margin_samples),
            min_margin: self.min_margin.unwrap_or(d.min_margin),
            witness_samples: self.witness_samples.unwrap_or(d.witness_samples),
        };
        if o.boundary_samples == 0 || !(o.min_margin >= 0.0) {
            return Err(invalid("certify budgets must be positive"));
        }
        Ok(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsSpec {
    /// Path length for limit-set clouds.
    pub depth: usize,
    /// Number of random paths in a cloud.
    pub count: usize,
    /// Inclusive depth range of the rate fit.
    pub rate_depths: (usize, usize),
    pub rate_paths: usize,
    pub tol: f64,
    pub boundary_samples: usize,
    pub metric_budget: usize,
    pub k: usize,
}

impl Default for DynamicsSpec {
    fn default() -> Self {
        let o = DynamicsOptions::default();
        Self {
            depth: 20,
            count: 2000,
            rate_depths: (2, 25),
            rate_paths: 100,
            tol: o.tol,
            boundary_samples: o.boundary_samples,
            metric_budget: o.metric_budget,
            k: o.k,
        }
    }
}

impl DynamicsSpec {
    pub fn options(&self) -> Result<DynamicsOptions> {
        if self.depth < 2 || self.count == 0 || !(self.tol > 0.0) || self.boundary_samples == 0 {
            return Err(invalid("dynamics needs depth >= 2, count > 0, tol > 0 and samples > 0"));
        }
        Ok(DynamicsOptions {
            boundary_samples: self.boundary_samples,
            metric_budget: self.metric_budget,
            tol: self.tol,
            k: self.k,
            ..DynamicsOptions::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// Values of `t`; generator expressions may use `t`.
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasigeodesicSpec {
    pub depth: usize,
    pub paths: usize,
    pub radius: usize,
    pub cone_cap: i64,
    pub d_max: usize,
}

impl Default for QuasigeodesicSpec {
    fn default() -> Self {
        Self {
            depth: 3,
            paths: 20,
            radius: 30,
            cone_cap: 20,
            d_max: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub search_radius: Option<usize>,
    pub parabolic_radius: Option<usize>,
    pub grid: Option<usize>,
    pub max_exponent: Option<i64>,
    pub quasigeodesic: Option<QuasigeodesicSpec>,
}

impl SynthSpec {
    pub fn params(&self, certify: CertifyOptions) -> SynthesisParams {
        let d = SynthesisParams::default();
        SynthesisParams {
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            delta: self.delta.unwrap_or(d.delta),
            search_radius: self.search_radius.unwrap_or(d.search_radius),
            parabolic_radius: self.parabolic_radius.unwrap_or(d.parabolic_radius),
            grid: self.grid.unwrap_or(d.grid),
            points: None,
            max_exponent: self.max_exponent.unwrap_or(d.max_exponent),
            certify,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapsSpec {
    /// Product expression for `g_n`, e.g. `"J^n"`.
    pub product: String,
    pub n_max: usize,
    #[serde(default = "one_usize")]
    pub k: usize,
    #[serde(default)]
    pub domain: Option<Shape>,
    #[serde(default)]
    pub diameter_tol: Option<f64>,
    #[serde(default)]
    pub gap_threshold: Option<f64>,
    #[serde(default)]
    pub limit_tol: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

fn one_usize() -> usize {
    1
}

impl GapsSpec {
    pub fn local_options(&self) -> LocalGlobalOptions {
        let d = LocalGlobalOptions::default();
        LocalGlobalOptions {
            diameter_tol: self.diameter_tol.unwrap_or(d.diameter_tol),
            gap_threshold: self.gap_threshold.unwrap_or(d.gap_threshold),
            limit_tol: self.limit_tol.unwrap_or(d.limit_tol),
            samples: self.samples.unwrap_or(d.samples),
        }
    }
}

/// A point: an affine coordinate `x ↦ [x : 1]` or homogeneous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Affine(Num),
    Homogeneous(Vec<Num>),
}

impl PointSpec {
    pub fn build(&self, scope: &Scope) -> Result<ProjPoint> {
        let v = match self {
            PointSpec::Affine(x) => vec![x.eval(scope)?, 1.0],
            PointSpec::Homogeneous(c) => eval_all(c, scope)?,
        };
        ProjPoint::new(&v).map_err(|e| invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertSpec {
    pub domain: Shape,
    pub points: (PointSpec, PointSpec),
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_budget() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub matrices: Vec<MatrixSpec>,
    #[serde(default)]
    pub generators: Vec<MatrixSpec>,
    #[serde(default)]
    pub peripherals: Vec<PeripheralSpec>,
    #[serde(default)]
    pub graph: Option<GraphSpec>,
    #[serde(default)]
    pub domains: Vec<DomainSpec>,
    #[serde(default)]
    pub separations: Vec<SeparationSpec>,
    #[serde(default)]
    pub certify: CertifySpec,
    #[serde(default)]
    pub dynamics: DynamicsSpec,
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
    #[serde(default)]
    pub synthesize: Option<SynthSpec>,
    #[serde(default)]
    pub gaps: Option<GapsSpec>,
    #[serde(default)]
    pub hilbert: Option<HilbertSpec>,
}

/// A parsed config together with the SHA-256 of its bytes.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub hash: String,
    pub path: String,
}

pub fn config_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn load(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let config = parse(&text)?;
    Ok(LoadedConfig {
        config,
        hash: config_hash(&bytes),
        path: path.display().to_string(),
    })
}

pub fn parse(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

impl RunConfig {
    pub fn scope(&self) -> Scope {
        Scope {
            vars: self.params.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(2..=8).contains(&self.dim) {
            return Err(invalid(format!("dimension {} is outside 2..=8", self.dim)));
        }
        let mut names: Vec<&str> = Vec::new();
        for m in self.matrices.iter().chain(&self.generators) {
            if names.contains(&m.name.as_str()) {
                return Err(invalid(format!("matrix name {} is used twice", m.name)));
            }
            if m.rows.is_some() == m.product.is_some() {
                return Err(invalid(format!("matrix {} needs exactly one of rows or product", m.name)));
            }
            names.push(&m.name);
        }
        if let Some(g) = &self.graph {
            for (a, b) in &g.edges {
                for v in [a, b] {
                    if !g.vertices.iter().any(|x| &x.name == v) {
                        return Err(invalid(format!("edge endpoint {v} is not a vertex")));
                    }
                }
            }
            for v in &g.vertices {
                if v.word.is_some() == v.peripheral.is_some() {
                    return Err(invalid(format!("vertex {} needs exactly one of word or peripheral", v.name)));
                }
                if !self.domains.iter().any(|d| d.vertex == v.name) {
                    return Err(invalid(format!("vertex {} has no domain", v.name)));
                }
            }
            for d in &self.domains {
                if !g.vertices.iter().any(|x| x.name == d.vertex) {
                    return Err(invalid(format!("domain for unknown vertex {}", d.vertex)));
                }
            }
        }
        for s in &self.separations {
            if !(s.delta > 0.0) {
                return Err(invalid("separation deltas must be positive"));
            }
        }
        let mut tolerances = vec![("dynamics.tol", Some(self.dynamics.tol))];
        if let Some(g) = &self.graph {
            tolerances.push(("graph.epsilon", g.epsilon));
        }
        if let Some(g) = &self.gaps {
            tolerances.push(("gaps.diameter_tol", g.diameter_tol));
            tolerances.push(("gaps.gap_threshold", g.gap_threshold));
            tolerances.push(("gaps.limit_tol", g.limit_tol));
        }
        if let Some(s) = &self.synthesize {
            tolerances.push(("synthesize.epsilon", s.epsilon));
            tolerances.push(("synthesize.delta", s.delta));
        }
        for (name, v) in tolerances {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(invalid(format!("{name} must be positive")));
                }
            }
        }
        if let Some(p) = &self.probe {
            if p.grid.is_empty() {
                return Err(invalid("probe grid is empty"));
            }
        }
        Ok(())
    }

    /// Named matrices and generators evaluated in declaration order.
    pub fn matrices(&self, scope: &Scope) -> Result<Vec<(String, Matrix)>> {
        let mut out: Vec<(String, Matrix)> = Vec::new();
        for spec in self.matrices.iter().chain(&self.generators) {
            let m = self.matrix(spec, scope, &out)?;
            out.push((spec.name.clone(), m));
        }
        Ok(out)
    }

    fn matrix(&self, spec: &MatrixSpec, scope: &Scope, known: &[(String, Matrix)]) -> Result<Matrix> {
        if let Some(rows) = &spec.rows {
            if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
                return Err(invalid(format!("matrix {} is not {}x{}", spec.name, self.dim, self.dim)));
            }
            let rows = rows
                .iter()
                .map(|r| eval_all(r, scope))
                .collect::<Result<Vec<_>>>()?;
            return Matrix::from_rows(&rows).map_err(|e| invalid(format!("matrix {}: {e}", spec.name)));
        }
        product(spec.product.as_deref().unwrap_or(""), self.dim, scope, known)
            .map_err(|e| invalid(format!("matrix {}: {e}", spec.name)))
    }

    pub fn presentation(&self, scope: &Scope) -> Result<GroupPresentation> {
        let all = self.matrices(scope)?;
        let gens: Vec<(String, Matrix)> = all
            .into_iter()
            .filter(|(n, _)| self.generators.iter().any(|g| &g.name == n))
            .collect();
        let mut pres = GroupPresentation::new(self.dim, gens).map_err(|e| invalid(e.to_string()))?;
        for p in &self.peripherals {
            let words = p
                .words
                .iter()
                .map(|w| pres.parse_word(w))
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| invalid(format!("peripheral {}: {e}", p.name)))?;
            pres.add_peripheral(&p.name, words, p.truncation, p.abelian)
                .map_err(|e| invalid(e.to_string()))?;
        }
        Ok(pres)
    }

    fn graph_spec(&self) -> Result<&GraphSpec> {
        self.graph.as_ref().ok_or_else(|| invalid("config has no [graph]"))
    }

    pub fn system(&self, scope: &Scope) -> Result<CompatibleSystem> {
        let g = self.graph_spec()?;
        let index = |name: &str| g.vertices.iter().position(|v| v.name == name);
        let domains = g
            .vertices
            .iter()
            .map(|v| {
                let spec = self.domains.iter().find(|d| d.vertex == v.name).expect("validated");
                let d = spec.shape.build(scope)?;
                if d.dim() != self.dim {
                    return Err(invalid(format!("domain of {} has dimension {}", v.name, d.dim())));
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        let separations = self
            .separations
            .iter()
            .map(|s| {
                Ok(Separation {
                    a: index(&s.a).ok_or_else(|| invalid(format!("unknown vertex {}", s.a)))?,
                    b: index(&s.b).ok_or_else(|| invalid(format!("unknown vertex {}", s.b)))?,
                    delta: s.delta,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CompatibleSystem::new(domains).with_separations(separations))
    }

    pub fn graph(&self, pres: &GroupPresentation, system: &CompatibleSystem) -> Result<GammaGraph> {
        let g = self.graph_spec()?;
        let index = |name: &str| g.vertices.iter().position(|v| v.name == name).expect("validated");
        let vertices = g
            .vertices
            .iter()
            .map(|v| {
                let label = match (&v.word, &v.peripheral) {
                    (Some(w), _) => VertexLabel::Singleton {
                        word: pres.parse_word(w).map_err(|e| invalid(e.to_string()))?,
                    },
                    (None, Some(p)) => VertexLabel::ParabolicFamily {
                        coset: match &v.coset {
                            Some(c) => pres.parse_word(c).map_err(|e| invalid(e.to_string()))?,
                            None => flagdyn::conedoff::Word::identity(),
                        },
                        peripheral: self
                            .peripherals
                            .iter()
                            .position(|x| &x.name == p)
                            .ok_or_else(|| invalid(format!("unknown peripheral {p}")))?,
                        exclude: v.exclude.clone(),
                        exclude_below: v.exclude_below,
                    },
                    (None, None) => unreachable!("validated"),
                };
                Ok(Vertex {
                    name: v.name.clone(),
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let edges = g.edges.iter().map(|(a, b)| (index(a), index(b))).collect();
        let eps = match g.epsilon {
            Some(e) => e,
            None => default_epsilon(system),
        };
        GammaGraph::new(vertices, edges, eps).map_err(|e| invalid(e.to_string()))
    }
}

/// Evaluates `"A B^2 C^-1"` (factors separated by spaces or `*`, powers are
/// integer expressions) against named matrices.
pub fn product(text: &str, dim: usize, scope: &Scope, known: &[(String, Matrix)]) -> Result<Matrix> {
    let mut acc = Matrix::identity(dim);
    let factors: Vec<&str> = text.split(|c: char| c.is_whitespace() || c == '*').filter(|s| !s.is_empty()).collect();
    if factors.is_empty() {
        return Err(invalid("empty product"));
    }
    for f in factors {
        let (name, power) = match f.split_once('^') {
            Some((n, p)) => (n, scope.int(p)?),
            None => (f, 1),
        };
        let m = known
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| invalid(format!("unknown matrix {name}")))?;
        let p = m.pow(power).map_err(|e| invalid(e.to_string()))?;
        acc = acc.mul(&p).map_err(|e| invalid(e.to_string()))?;
    }
    Ok(acc)
}
