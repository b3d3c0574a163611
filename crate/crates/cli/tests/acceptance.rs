//! Acceptance gate: runs every criterion, prints one line per criterion and
//! exits nonzero if any fails.

use std::f64::consts::{PI, TAU};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use flagdyn::automaton::{enumerate_paths, CertifiedSystem, PathStrategy};
use flagdyn::conedoff::Word;
use flagdyn::domains::{contraction_factor, rp1_contraction_lambda, zimmer_metric, zimmer_metric_sampled, ProperDomain};
use flagdyn::dynamics::{equivariance_check, DynamicsOptions};
use flagdyn::linalg::{exterior_power, svd, Matrix};
use flagdyn::projgeom::{cross_ratio, ProjHyperplane, ProjPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = std::result::Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

/// Runs the binary and returns its exit code, stdout and the output directory.
fn flagdyn(cmd: &str, cfg: &str) -> (i32, String, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_flagdyn"))
        .args([cmd, "--config"])
        .arg(config_path(cfg))
        .arg("--out")
        .arg(dir.path())
        .output()
        .expect("binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned(), dir)
}

fn json(dir: &tempfile::TempDir, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap()
}

fn log_cross_ratio(lo: f64, hi: f64, x: f64, y: f64) -> f64 {
    ((y - lo) * (hi - x) / ((x - lo) * (hi - y))).ln().abs()
}

/// Parameter interval `{s : u + s w inside}` of a convex polygon given in
/// counterclockwise order, for `u` inside.
fn polygon_section(poly: &[[f64; 2]], u: [f64; 2], w: [f64; 2]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        // Inside is to the left of p -> q: n·x >= n·p with n the left normal.
        let n = [p[1] - q[1], q[0] - p[0]];
        let num = n[0] * (p[0] - u[0]) + n[1] * (p[1] - u[1]);
        let den = n[0] * w[0] + n[1] * w[1];
        if den > 0.0 {
            lo = lo.max(num / den);
        } else if den < 0.0 {
            hi = hi.min(num / den);
        }
    }
    (lo, hi)
}

fn inside_polygon(poly: &[[f64; 2]], u: [f64; 2]) -> bool {
    (0..poly.len()).all(|i| {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        (q[0] - p[0]) * (u[1] - p[1]) - (q[1] - p[1]) * (u[0] - p[0]) > 1e-9
    })
}

fn ball_section(r: f64, u: [f64; 2], w: [f64; 2]) -> (f64, f64) {
    let a = w[0] * w[0] + w[1] * w[1];
    let b = u[0] * w[0] + u[1] * w[1];
    let c = u[0] * u[0] + u[1] * u[1] - r * r;
    let disc = (b * b - a * c).sqrt();
    ((-b - disc) / a, (-b + disc) / a)
}

/// Convex polygon with vertices on a random ellipse at stratified angles.
fn random_polygon(rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let n = rng.gen_range(5..=8);
    let (cx, cy) = (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
    let (ra, rb, phi) = (rng.gen_range(0.6..1.4), rng.gen_range(0.6..1.4), rng.gen_range(0.0..PI));
    (0..n)
        .map(|i| {
            let t = (i as f64 + rng.gen_range(0.1..0.9)) * TAU / n as f64;
            let (x, y) = (ra * t.cos(), rb * t.sin());
            [cx + x * phi.cos() - y * phi.sin(), cy + x * phi.sin() + y * phi.cos()]
        })
        .collect()
}

fn chart3() -> ProjHyperplane {
    ProjHyperplane::new(&[0.0, 0.0, 1.0]).unwrap()
}

fn polytope(poly: &[[f64; 2]]) -> ProperDomain {
    ProperDomain::polytope(&chart3(), poly.iter().map(|p| p.to_vec()).collect()).unwrap()
}

fn cross_ratio_convention() -> Check {
    let w0 = ProjHyperplane::kernel_of(&ProjPoint::rp1(0.0));
    let winf = ProjHyperplane::kernel_of(&ProjPoint::rp1(f64::INFINITY));
    let one = ProjPoint::rp1(1.0);
    let mut worst = 0.0f64;
    for z in [-3.0, -1.0, 0.5, 2.0, 10.0] {
        let v = cross_ratio(&w0, &winf, &one, &ProjPoint::rp1(z)).map_err(|e| e.to_string())?;
        worst = worst.max((v - z).abs());
    }
    ensure(worst <= 1e-12, format!("max error {worst:e}"))?;
    Ok(format!("max error {worst:.1e}"))
}

fn zimmer_metric_oracles() -> Check {
    let interval = ProperDomain::ball(&ProjHyperplane::new(&[0.0, 1.0]).unwrap(), vec![0.0], 1.0).unwrap();
    let mut worst_line = 0.0f64;
    for i in 0..50 {
        let t = -0.98 + 1.96 * i as f64 / 49.0;
        if t == 0.0 {
            continue;
        }
        let v = zimmer_metric(&interval, &ProjPoint::rp1(0.0), &ProjPoint::rp1(t), 0)
            .map_err(|e| e.to_string())?
            .value;
        worst_line = worst_line.max((v - log_cross_ratio(-1.0, 1.0, 0.0, t)).abs());
    }
    ensure(worst_line <= 1e-9, format!("interval error {worst_line:e}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rel, mut worst_exact) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let poly = random_polygon(&mut rng);
        let dom = polytope(&poly);
        let sample = |rng: &mut ChaCha8Rng| loop {
            let u = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            if inside_polygon(&poly, u) {
                return u;
            }
        };
        for _ in 0..100 {
            let (x, y) = (sample(&mut rng), sample(&mut rng));
            let (lo, hi) = polygon_section(&poly, x, [y[0] - x[0], y[1] - x[1]]);
            let oracle = log_cross_ratio(lo, hi, 0.0, 1.0);
            let (px, py) = (dom.frame().point(&x), dom.frame().point(&y));
            let exact = zimmer_metric(&dom, &px, &py, 0).map_err(|e| e.to_string())?.value;
            let sampled = zimmer_metric_sampled(&dom, &px, &py, 10_000).map_err(|e| e.to_string())?.value;
            worst_exact = worst_exact.max((exact - oracle).abs() / oracle.max(1e-300));
            worst_rel = worst_rel.max((sampled - oracle).abs() / oracle.max(1e-300));
        }
    }
    ensure(worst_exact <= 1e-9, format!("line-section value off by {worst_exact:e}"))?;
    ensure(worst_rel <= 0.02, format!("sampled sup off by {:.3}%", 100.0 * worst_rel))?;
    Ok(format!(
        "interval error {worst_line:.1e}, polygon sampled sup within {:.3}%",
        100.0 * worst_rel
    ))
}

/// Dense brute force: over a grid of lines through the inner domain, the
/// minimum ratio of inner to outer metric over close pairs of grid points.
fn brute_contraction(
    inner: &dyn Fn([f64; 2], [f64; 2]) -> (f64, f64),
    outer: &dyn Fn([f64; 2], [f64; 2]) -> (f64, f64),
    starts: &[[f64; 2]],
) -> f64 {
    let mut best = f64::INFINITY;
    for &u in starts {
        for k in 0..90 {
            let t = PI * k as f64 / 90.0;
            let w = [t.cos(), t.sin()];
            let (b, c) = inner(u, w);
            let (a, d) = outer(u, w);
            let n = 400;
            let s = |i: usize| b + (c - b) * i as f64 / n as f64;
            for i in 1..n - 1 {
                let (x, y) = (s(i), s(i + 1));
                best = best.min(log_cross_ratio(b, c, x, y) / log_cross_ratio(a, d, x, y));
            }
        }
    }
    best
}

fn contraction_factors() -> Check {
    let ball = |r: f64| ProperDomain::ball(&chart3(), vec![0.0, 0.0], r).unwrap();
    let est = contraction_factor(&ball(0.3), &ball(0.5), 2000).map_err(|e| e.to_string())?.lambda;
    let starts: Vec<[f64; 2]> = (0..30).map(|i| [0.3 * i as f64 / 30.0, 0.0]).collect();
    let oracle = brute_contraction(&|u, w| ball_section(0.3, u, w), &|u, w| ball_section(0.5, u, w), &starts);
    ensure(est > 1.0 + 1e-3, format!("balls: lambda {est}"))?;
    ensure((est - oracle).abs() <= 0.02 * oracle, format!("balls: {est} vs oracle {oracle}"))?;
    let mut worst = (est - oracle).abs() / oracle;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let outer = random_polygon(&mut rng);
        let n = outer.len() as f64;
        let center = outer.iter().fold([0.0, 0.0], |c, p| [c[0] + p[0] / n, c[1] + p[1] / n]);
        let shrink = rng.gen_range(0.4..0.7);
        let inner: Vec<[f64; 2]> = outer
            .iter()
            .map(|p| [center[0] + shrink * (p[0] - center[0]), center[1] + shrink * (p[1] - center[1])])
            .collect();
        let est = contraction_factor(&polytope(&inner), &polytope(&outer), 2000)
            .map_err(|e| e.to_string())?
            .lambda;
        let mut starts = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                let u = [-2.0 + 4.0 * i as f64 / 39.0, -2.0 + 4.0 * j as f64 / 39.0];
                if inside_polygon(&inner, u) {
                    starts.push(u);
                }
            }
        }
        let oracle = brute_contraction(
            &|u, w| polygon_section(&inner, u, w),
            &|u, w| polygon_section(&outer, u, w),
            &starts,
        );
        ensure(est > 1.0 + 1e-3, format!("polygons: lambda {est}"))?;
        ensure((est - oracle).abs() <= 0.02 * oracle, format!("polygons: {est} vs oracle {oracle}"))?;
        worst = worst.max((est - oracle).abs() / oracle);
    }

    let base = rp1_contraction_lambda(-2.0, -1.0, 1.0, 2.0, 512).map_err(|e| e.to_string())?;
    let mut worst_inv = 0.0f64;
    let mut tried = 0;
    while tried < 10 {
        let m: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        if m[0] * m[3] - m[1] * m[2] < 0.1 {
            continue;
        }
        tried += 1;
        let f = |x: f64| {
            let den = m[2] * x + m[3];
            if den == 0.0 {
                f64::INFINITY
            } else {
                (m[0] * x + m[1]) / den
            }
        };
        let l = rp1_contraction_lambda(f(-2.0), f(-1.0), f(1.0), f(2.0), 512).map_err(|e| e.to_string())?;
        worst_inv = worst_inv.max((l - base).abs());
    }
    ensure(worst_inv <= 1e-3, format!("RP^1 lambda moved by {worst_inv:e}"))?;
    Ok(format!(
        "worst relative gap to brute force {:.3}%, RP^1 invariance {worst_inv:.1e}",
        100.0 * worst
    ))
}

const CENTERS: [f64; 4] = [0.0, PI / 2.0, PI / 4.0, 3.0 * PI / 4.0];
const INVERSE: [usize; 4] = [1, 0, 3, 2];

fn mobius(letter: usize, theta: f64) -> f64 {
    let (x, y) = (theta.cos(), theta.sin());
    let (x, y) = match letter {
        0 => (9.0 * x, y),
        1 => (x, 9.0 * y),
        2 => (5.0 * x + 4.0 * y, 4.0 * x + 5.0 * y),
        _ => (5.0 * x - 4.0 * y, -4.0 * x + 5.0 * y),
    };
    y.atan2(x).rem_euclid(PI)
}

fn ping_pong() -> Check {
    let (code, _, dir) = flagdyn("certify", "schottky");
    ensure(code == 0, format!("schottky exit {code}"))?;
    let cert = json(&dir, "certificate.json");
    let worst = cert["result"]["certificate"]["worst_margin"].as_f64().unwrap();
    // Letter v maps the eps-neighborhood of U_w into U_v; the image is an arc
    // whose closest approach to the boundary of U_v is at an endpoint.
    let (h, eps) = (0.36, 0.01);
    let mut oracle = f64::INFINITY;
    for v in 0..4 {
        for w in (0..4).filter(|&w| w != INVERSE[v]) {
            for end in [CENTERS[w] - h - eps, CENTERS[w] + h + eps] {
                let off = (mobius(v, end) - CENTERS[v] + PI / 2.0).rem_euclid(PI) - PI / 2.0;
                oracle = oracle.min(h - off.abs());
            }
        }
    }
    ensure(worst > 0.0, format!("margin {worst}"))?;
    ensure((worst - oracle).abs() <= 1e-6, format!("margin {worst} vs oracle {oracle}"))?;
    let (bad, _, _) = flagdyn("certify", "repelling");
    ensure(bad == 1, format!("repelling exit {bad}"))?;
    Ok(format!("margin {worst:.9} vs oracle {oracle:.9}, negative control exit 1"))
}

fn exponential_shrinking() -> Check {
    let (code, out, dir) = flagdyn("rates", "schottky");
    ensure(code == 0, format!("schottky rates exit {code}: {out}"))?;
    let r = &json(&dir, "rates.json")["result"];
    let (r2, slope) = (r["r_squared"].as_f64().unwrap(), r["slope"].as_f64().unwrap());
    ensure(r["depth_range"] == serde_json::json!([2, 25]), "depth range")?;
    ensure(r2 >= 0.98 && slope <= -0.1, format!("R^2 {r2}, slope {slope}"))?;

    let (code, _, dir) = flagdyn("rates", "single_loop");
    ensure(code == 0, format!("single loop exit {code}"))?;
    let r = &json(&dir, "rates.json")["result"];
    let lambda2 = r["lambda2"].as_f64().unwrap();
    ensure(r["depth_range"][0].as_u64().unwrap() >= 15, "depth range")?;
    // t = tan θ maps by t -> (c + d t)/(a + b t); at the fixed point t = 0 the
    // derivative of diag(4, 1/4) is det / a^2.
    let (a, d) = (4.0f64, 0.25f64);
    let oracle = -(a * d / (a * a)).ln();
    ensure((lambda2 - oracle).abs() <= 0.1 * oracle, format!("lambda2 {lambda2} vs {oracle}"))?;
    Ok(format!("Schottky R^2 {r2:.4} slope {slope:.3}; single loop lambda2 {lambda2:.4} vs {oracle:.4}"))
}

fn local_to_global() -> Check {
    let (code, out, dir) = flagdyn("gaps", "jordan_gaps");
    ensure(code == 0, format!("jordan exit {code}: {out}"))?;
    let l = &json(&dir, "gaps.json")["result"]["local_global"];
    let small = l["first_small_diameter"].as_u64();
    let large = l["first_large_gap"].as_u64();
    ensure(small.is_some_and(|n| n <= 200), format!("diameter below 1e-3 at {small:?}"))?;
    ensure(large.is_some_and(|n| n <= 200), format!("gap above 5 at {large:?}"))?;
    let (code, _, dir) = flagdyn("gaps", "rotation_gaps");
    ensure(code == 0, format!("rotation exit {code}"))?;
    let verdict = json(&dir, "gaps.json")["result"]["local_global"]["verdict"].clone();
    ensure(verdict == "NotPDivergent", format!("rotation verdict {verdict}"))?;
    Ok(format!(
        "diameter < 1e-3 from n = {}, gap > 5 from n = {}, rotation not divergent",
        small.unwrap(),
        large.unwrap()
    ))
}

fn peripheral_stability() -> Check {
    let (code, _, _) = flagdyn("certify", "jordan_at");
    ensure(code == 0, format!("t = 0 certify exit {code}"))?;
    let (code, _, dir) = flagdyn("probe", "jordan_at");
    let r = &json(&dir, "probe.json")["result"];
    ensure(code == 0 && r["first_failing_t"].is_null(), format!("A_t probe: {}", r["first_failing_t"]))?;
    let (code, _, dir) = flagdyn("probe", "jordan_split");
    let t = json(&dir, "probe.json")["result"]["first_failing_t"].as_f64();
    ensure(code == 1 && t == Some(0.01), format!("split probe exit {code}, first failing t {t:?}"))?;
    Ok("A_t certifies on 0..=0.10, split path first fails at t = 0.01".into())
}

fn pgl2z_synthesis() -> Check {
    let (code, out, dir) = flagdyn("synthesize", "pgl2z");
    ensure(code == 0, format!("exit {code}: {out}"))?;
    let r = &json(&dir, "synthesis.json")["result"];
    let (v, e) = (r["vertices"].as_u64().unwrap(), r["edges"].as_u64().unwrap());
    let parabolic = r["parabolic_vertices"].as_u64().unwrap();
    let q = &r["quasigeodesic"];
    let dist = q["max_distance"].as_u64();
    ensure(r["certificate_pass"] == true, "certificate failed")?;
    ensure(parabolic >= 1, "no parabolic vertex")?;
    ensure((v, e) == (132, 3830), format!("counts {v} / {e}"))?;
    ensure(q["depth"].as_u64().unwrap() <= 12 && q["out_of_ball"] == 0, "quasigeodesic sample incomplete")?;
    ensure(dist.is_some_and(|d| d <= 4), format!("D = {dist:?}"))?;
    Ok(format!("{v} vertices, {e} edges, {parabolic} parabolic, D = {}", dist.unwrap()))
}

fn equivariance() -> Check {
    let cfg = flagdyn_cli::config::load(&config_path("schottky")).map_err(|e| e.to_string())?.config;
    let scope = cfg.scope();
    let pres = cfg.presentation(&scope).map_err(|e| e.to_string())?;
    let system = cfg.system(&scope).map_err(|e| e.to_string())?;
    let graph = cfg.graph(&pres, &system).map_err(|e| e.to_string())?;
    let opts = cfg.certify.options().map_err(|e| e.to_string())?;
    let sys = CertifiedSystem::certify(graph, system, pres, &opts).map_err(|e| e.to_string())?;
    let paths = enumerate_paths(&sys.graph, &sys.table, 24, &PathStrategy::Random { seed: 9, count: 100 })
        .map_err(|e| e.to_string())?
        .paths;
    let mut worst: f64 = 0.0;
    for letter in [1, -1, 2, -2] {
        let s = Word::new(vec![letter]).unwrap();
        let rep = equivariance_check(&sys, &s, &paths, 20, &DynamicsOptions::default()).map_err(|e| e.to_string())?;
        ensure(rep.samples.len() == 100, "sample count")?;
        ensure(rep.pass, format!("letter {letter}: max defect {}", rep.max_defect))?;
        worst = worst.max(rep.max_defect);
    }
    Ok(format!("100 paths x 4 generators, max defect {worst:.1e}"))
}

fn exterior_gap_transfer() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for d in [4usize, 5] {
        for _ in 0..200 {
            let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let g = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
            let oracle = nalgebra::DMatrix::from_fn(d, d, |i, j| rows[i][j]).singular_values();
            let mut sigma: Vec<f64> = oracle.iter().copied().collect();
            sigma.sort_by(|a, b| b.total_cmp(a));
            for k in 1..d {
                let e = exterior_power(&g, k).map_err(|e| e.to_string())?;
                let gap0 = svd(&e).map_err(|e| e.to_string())?.log_gap(1);
                let expect = (sigma[k - 1] / sigma[k]).ln();
                worst = worst.max((gap0 - expect).abs() / expect.abs().max(1e-300));
            }
        }
    }
    ensure(worst <= 1e-8, format!("relative error {worst:e}"))?;
    Ok(format!("400 matrices, max relative error {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Check); 10] = [
        ("cross-ratio convention", Duration::from_secs(1), cross_ratio_convention),
        ("Zimmer metric vs oracle", Duration::from_secs(30), zimmer_metric_oracles),
        ("contraction factor", Duration::from_secs(120), contraction_factors),
        ("ping-pong certification", Duration::from_secs(10), ping_pong),
        ("exponential shrinking", Duration::from_secs(60), exponential_shrinking),
        ("local-to-global", Duration::from_secs(60), local_to_global),
        ("Jordan-block peripheral stability", Duration::from_secs(120), peripheral_stability),
        ("PGL(2,Z) synthesis", Duration::from_secs(300), pgl2z_synthesis),
        ("equivariance", Duration::from_secs(60), equivariance),
        ("exterior-power gap transfer", Duration::from_secs(30), exterior_gap_transfer),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} ({elapsed:.1?})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} ({elapsed:.1?})", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
