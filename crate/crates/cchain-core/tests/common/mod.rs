//! Independent oracles for the integration tests: adaptive Simpson
//! refinement, nested chain integrals of the two-point factor, Monte Carlo
//! integration, and a bisection normal quantile. Nothing here touches the
//! eigendecomposition path under test.

#![allow(dead_code)]

use cchain_core::model::ModelParams;
use cchain_core::stats::normal_cdf;

/// Recursive adaptive Simpson with Richardson correction.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        left + right + err / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

pub fn q(p: ModelParams, x: f64, y: f64) -> f64 {
    (-p.beta / (2.0 * x) - p.beta / (2.0 * y) - p.gamma / (x + y)).exp()
}

/// `T^1(x, y) = int Q(x, u) Q(u, y) du` by adaptive refinement.
pub fn t1_oracle(p: ModelParams, x: f64, y: f64, tol: f64) -> f64 {
    adaptive_simpson(&|u| q(p, x, u) * q(p, u, y), 0.0, 1.0, tol)
}

/// `T^2(x, y) = int int Q(x, u) Q(u, v) Q(v, y) du dv` by nested refinement.
pub fn t2_oracle(p: ModelParams, x: f64, y: f64, tol: f64) -> f64 {
    adaptive_simpson(
        &|u| q(p, x, u) * adaptive_simpson(&|v| q(p, u, v) * q(p, v, y), 0.0, 1.0, tol / 8.0),
        0.0,
        1.0,
        tol,
    )
}

/// Three-spacing partition function by fully nested adaptive quadrature.
pub fn z3_oracle(p: ModelParams, tol: f64) -> f64 {
    adaptive_simpson(
        &|y1| {
            adaptive_simpson(
                &|y2| {
                    q(p, y1, y2)
                        * adaptive_simpson(&|y3| q(p, y2, y3) * q(p, y3, y1), 0.0, 1.0, tol / 64.0)
                },
                0.0,
                1.0,
                tol / 8.0,
            )
        },
        0.0,
        1.0,
        tol,
    )
}

/// Four-spacing partition function: `Z_4 = int int G(y1, y3)^2 dy1 dy3`
/// with `G` the one-fold chain, all levels adaptive.
pub fn z4_oracle(p: ModelParams, tol: f64) -> f64 {
    adaptive_simpson(
        &|y1| {
            adaptive_simpson(
                &|y3| {
                    let g = t1_oracle(p, y1, y3, tol / 64.0);
                    g * g
                },
                0.0,
                1.0,
                tol / 8.0,
            )
        },
        0.0,
        1.0,
        tol,
    )
}

/// Plain Monte Carlo estimate of `int_{[0,1]^dim} f` with its standard error.
pub fn mc_integral(
    f: impl Fn(&[f64]) -> f64 + Sync,
    dim: usize,
    samples: u64,
    seed: u64,
) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    use rayon::prelude::*;

    const BATCH: u64 = 100_000;
    let batches = samples.div_ceil(BATCH);
    let partials: Vec<(f64, f64, u64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let count = BATCH.min(samples - b * BATCH);
            let mut point = vec![0.0; dim];
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..count {
                for slot in point.iter_mut() {
                    *slot = 1.0 - rng.random::<f64>();
                }
                let v = f(&point);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq, count)
        })
        .collect();
    let total: f64 = partials.iter().map(|p| p.0).sum();
    let total_sq: f64 = partials.iter().map(|p| p.1).sum();
    let count: u64 = partials.iter().map(|p| p.2).sum();
    let mean = total / count as f64;
    let var = (total_sq / count as f64 - mean * mean).max(0.0);
    (mean, (var / count as f64).sqrt())
}

/// Standard normal quantile by bisection on the CDF (oracle-grade, slow).
pub fn normal_quantile(u: f64) -> f64 {
    assert!(u > 0.0 && u < 1.0);
    let (mut lo, mut hi) = (-10.0, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
