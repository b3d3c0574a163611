//! Deterministic low-discrepancy samplers.
//!
//! Samples are pure functions of `(seed, index)`, so any subset of a sample
//! stream can be regenerated independently and in parallel.

use std::f64::consts::PI;

/// Root of `x^{n+1} = x + 1`, the generalized golden ratio for dimension `n`.
fn phi(n: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..60 {
        x = (1.0 + x).powf(1.0 / (n as f64 + 1.0));
    }
    x
}

/// Point `index` of the additive recurrence sequence in `[0,1)^dim`, offset by
/// a seed-dependent shift.
pub fn rd_point(dim: usize, seed: u64, index: u64) -> Vec<f64> {
    let g = phi(dim);
    let shift = splitmix(seed) as f64 / u64::MAX as f64;
    (0..dim)
        .map(|j| {
            let alpha = (1.0 / g).powi(j as i32 + 1);
            (shift + alpha * (index as f64 + 1.0)).fract()
        })
        .collect()
}

fn splitmix(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` well-spread unit vectors in `R^dim`.
///
/// Dimension 1 yields `±1`; dimension 2 yields golden-angle steps; higher
/// dimensions push the recurrence sequence through Box–Muller. In dimension
/// at least 2 a shorter request is a prefix of a longer one.
pub fn sphere_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let offset = (splitmix(seed) % 1024) as f64 / 1024.0;
            let step = 1.0 / phi(1);
            (0..count)
                .map(|i| {
                    let t = 2.0 * PI * (offset + step * i as f64).fract();
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            let pairs = dim.div_ceil(2);
            (0..count as u64)
                .map(|i| {
                    let u = rd_point(2 * pairs, seed, i);
                    let mut v: Vec<f64> = (0..pairs)
                        .flat_map(|p| {
                            let r = (-2.0 * (1.0 - u[2 * p]).max(1e-300).ln()).sqrt();
                            let t = 2.0 * PI * u[2 * p + 1];
                            [r * t.cos(), r * t.sin()]
                        })
                        .take(dim)
                        .collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
                    v.iter_mut().for_each(|x| *x /= n);
                    v
                })
                .collect()
        }
    }
}

/// `count` points in the open unit ball of `R^dim`, uniform in radius^dim.
pub fn ball_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dirs = sphere_points(dim, count, seed ^ 0x5A5A);
    (0..count)
        .map(|i| {
            let r = rd_point(1, seed, i as u64)[0].powf(1.0 / dim as f64) * 0.999;
            dirs[i % dirs.len()].iter().map(|x| x * r).collect()
        })
        .collect()
}
