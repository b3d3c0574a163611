//! Output files. Every file records the tool version and the hash of the
//! config that produced it; nothing time-dependent is written, so identical
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use flagdyn::dynamics::LimitSetCloud;
use serde::Serialize;

use crate::config::LoadedConfig;

pub const TOOL: &str = concat!("flagdyn ", env!("CARGO_PKG_VERSION"));

/// Provenance written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub command: String,
    pub config: String,
    pub config_hash: String,
    pub seed: u64,
    /// Budgets and options in effect, as `key=value` pairs.
    pub budgets: Vec<(String, String)>,
}

impl Header {
    pub fn new(command: &str, cfg: &LoadedConfig, seed: u64) -> Self {
        Self {
            tool: TOOL.to_string(),
            command: command.to_string(),
            config: cfg.config.name.clone(),
            config_hash: cfg.hash.clone(),
            seed,
            budgets: Vec::new(),
        }
    }

    pub fn budget(mut self, key: &str, value: impl ToString) -> Self {
        self.budgets.push((key.to_string(), value.to_string()));
        self
    }

    /// `# `-prefixed lines.
    pub fn comment_lines(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# tool: {}", self.tool).unwrap();
        writeln!(s, "# command: {}", self.command).unwrap();
        writeln!(s, "# config: {}", self.config).unwrap();
        writeln!(s, "# config_hash: {}", self.config_hash).unwrap();
        writeln!(s, "# seed: {}", self.seed).unwrap();
        for (k, v) in &self.budgets {
            writeln!(s, "# {k}: {v}").unwrap();
        }
        s
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    header: &'a Header,
    result: &'a T,
}

pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json<T: Serialize>(&self, name: &str, header: &Header, result: &T) -> std::io::Result<PathBuf> {
        let text = serde_json::to_string_pretty(&Envelope { header, result }).map_err(std::io::Error::other)?;
        self.write(name, &(text + "\n"))
    }

    pub fn text(&self, name: &str, header: &Header, body: &str) -> std::io::Result<PathBuf> {
        self.write(name, &format!("{}{body}", header.comment_lines()))
    }

    pub fn write(&self, name: &str, contents: &str) -> std::io::Result<PathBuf> {
        let p = self.path(name);
        std::fs::write(&p, contents)?;
        Ok(p)
    }
}

/// A real with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a comment header, a column header row and one row per record.
pub fn csv(header: &Header, columns: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.comment_lines();
    s.push_str(&columns.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

pub fn cloud_csv(header: &Header, cloud: &LimitSetCloud, dim: usize) -> String {
    let mut cols: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    cols.push("code".into());
    cols.push("radius".into());
    let rows: Vec<Vec<String>> = cloud
        .points
        .iter()
        .map(|p| {
            let mut r: Vec<String> = p.point.coords().iter().map(|&x| real(x)).collect();
            r.push(p.code.clone());
            r.push(real(p.radius));
            r
        })
        .collect();
    csv(header, &cols, &rows)
}

/// Scatter plot of a cloud. `RP^1` is drawn as a circle through the angle
/// doubling `θ ↦ 2θ`; `RP^2` in the affine chart of the coordinate with the
/// largest mean modulus. The projection is stated in a comment.
pub fn cloud_svg(header: &Header, cloud: &LimitSetCloud, dim: usize) -> Option<String> {
    let (projection, pts): (String, Vec<(f64, f64)>) = match dim {
        2 => (
            "RP^1 as the unit circle, [cos t : sin t] at angle 2t".into(),
            cloud
                .points
                .iter()
                .map(|p| {
                    let t = 2.0 * p.point.angle();
                    (t.cos(), t.sin())
                })
                .collect(),
        ),
        3 => {
            let mut mean = [0.0f64; 3];
            for p in &cloud.points {
                for (m, c) in mean.iter_mut().zip(p.point.coords()) {
                    *m += c.abs();
                }
            }
            let c = (0..3).max_by(|&a, &b| mean[a].total_cmp(&mean[b])).unwrap_or(2);
            let (i, j) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            (
                format!("affine chart x{c} = 1, axes (x{i}/x{c}, x{j}/x{c})"),
                cloud
                    .points
                    .iter()
                    .filter_map(|p| {
                        let x = p.point.coords();
                        (x[c].abs() > 1e-12).then(|| (x[i] / x[c], x[j] / x[c]))
                    })
                    .collect(),
            )
        }
        _ => return None,
    };
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y) in &pts {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    if dim == 2 {
        lo = (-1.0, -1.0);
        hi = (1.0, 1.0);
    }
    let span = (hi.0 - lo.0).max(hi.1 - lo.1).max(1e-12);
    let size = 512.0;
    let pad = 16.0;
    let map = |(x, y): (f64, f64)| {
        let s = (size - 2.0 * pad) / span;
        (pad + (x - lo.0) * s, size - pad - (y - lo.1) * s)
    };
    let mut s = String::new();
    writeln!(s, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>").unwrap();
    writeln!(s, "<!--").unwrap();
    for line in header.comment_lines().lines() {
        writeln!(s, "{}", line.trim_start_matches("# ")).unwrap();
    }
    writeln!(s, "projection: {projection}").unwrap();
    writeln!(s, "-->").unwrap();
    writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">"
    )
    .unwrap();
    writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>").unwrap();
    if dim == 2 {
        let (cx, cy) = map((0.0, 0.0));
        let r = (size - 2.0 * pad) / 2.0;
        writeln!(s, "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{r:.3}\" fill=\"none\" stroke=\"#bbb\"/>").unwrap();
    }
    for &p in &pts {
        let (x, y) = map(p);
        writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"1.5\" fill=\"black\"/>").unwrap();
    }
    writeln!(s, "</svg>").unwrap();
    Some(s)
}

/// The config hash recorded in an output file, if any.
pub fn embedded_hash(contents: &str) -> Option<String> {
    for line in contents.lines() {
        let l = line.trim().trim_start_matches('#').trim();
        if let Some(rest) = l.strip_prefix("config_hash: ") {
            return Some(rest.trim().to_string());
        }
        if let Some(rest) = l.strip_prefix("\"config_hash\": ") {
            return Some(rest.trim().trim_end_matches(',').trim_matches('"').to_string());
        }
    }
    None
}

/// Whether an output was produced from a config other than the current one.
pub fn is_stale(output: &str, config_bytes: &[u8]) -> bool {
    embedded_hash(output).map_or(true, |h| h != crate::config::config_hash(config_bytes))
}
