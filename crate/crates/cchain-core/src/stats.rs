//! Small statistical helpers shared by the measurement harnesses.

use serde::{Deserialize, Serialize};

/// Standard normal CDF via `erfc` (libm's FDLIBM port, < 1 ulp error).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact two-sided Kolmogorov statistic of a sample against the standard
/// normal, evaluated at the order statistics.
pub fn ks_statistic_normal(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    for (i, &z) in sorted.iter().enumerate() {
        let phi = normal_cdf(z);
        let upper = (i as f64 + 1.0) / n - phi;
        let lower = phi - i as f64 / n;
        sup = sup.max(upper.abs()).max(lower.abs());
    }
    sup
}

/// Ordinary least-squares line through `(x, y)` pairs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).max(0.0) } else { 1.0 };
    LineFit {
        slope,
        intercept,
        r_squared,
    }
}

/// Integrated autocorrelation time of a scalar series with the
/// self-consistent window cutoff (stop once `lag >= 5 * tau`).
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0: f64 = series.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    let max_lag = n / 3;
    for lag in 1..=max_lag {
        let mut c = 0.0;
        for i in 0..n - lag {
            c += (series[i] - mean) * (series[i + lag] - mean);
        }
        c /= (n - lag) as f64;
        tau += 2.0 * c / c0;
        if (lag as f64) >= 5.0 * tau {
            break;
        }
    }
    tau.max(0.5)
}

/// First four standardized sample moments.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

pub fn moment_summary(samples: &[f64]) -> MomentSummary {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in samples {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let sd = m2.sqrt();
    MomentSummary {
        mean,
        variance: m2,
        skewness: if sd > 0.0 { m3 / (sd * sd * sd) } else { 0.0 },
        excess_kurtosis: if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 },
    }
}
