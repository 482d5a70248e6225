//! Central-limit apparatus: block partitions, the normalized spacing sum
//! `zeta`, Kolmogorov distances against the standard normal, rate fitting
//! across chain lengths, and the block-sum diagnostics that mirror the
//! lemma-level quantities of the convergence argument.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, TransferKernel};
use crate::model::{ChainState, IndexCluster, ModelError, ModelParams};
use crate::quad::{QuadratureGrid, DEFAULT_GRID_SIZE};
use crate::sampler::{sample_endpoint, SamplerConfig, SamplerError, SiteInitTable};
use crate::stats::{ks_statistic_normal, linear_fit, moment_summary, MomentSummary};

#[derive(Debug, Error)]
pub enum CltError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("epsilon = {0} outside the open interval (0, 1/4)")]
    EpsilonRange(f64),
    #[error("partition infeasible at n = {n}: p = {p}, q = {q}, k = {k} (need p > q >= 1, k >= 2)")]
    PartitionInfeasible { n: usize, p: usize, q: usize, k: usize },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("n_values must be strictly increasing with at least 2 entries")]
    BadNValues,
    #[error("replicas_per_n = {0} below the 1e4 noise floor")]
    TooFewReplicas(usize),
    #[error("kernel parameters do not match the requested parameters")]
    ParamsMismatch,
    #[error("t grid must exclude zero")]
    ZeroT,
    #[error("sample chain length {got} does not match n = {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Alternating large (`p`) and small (`q`) blocks tiling the circle,
/// with the untiled tail recorded explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPartition {
    pub n: usize,
    pub epsilon: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub p: usize,
    pub q: usize,
    pub k: usize,
    pub v_blocks: Vec<IndexCluster>,
    pub w_blocks: Vec<IndexCluster>,
    pub remainder: Option<IndexCluster>,
}

/// `p = floor(n^(1-2eps))`, `q = floor(n^eps)`, `k = floor(n / (p+q))`;
/// blocks `V_1 W_1 V_2 W_2 ...` from site 0, remainder at the tail.
pub fn build_partition(n: usize, epsilon: f64) -> Result<BlockPartition, CltError> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(CltError::EpsilonRange(epsilon));
    }
    let delta1 = 1.0 - 2.0 * epsilon;
    let delta2 = epsilon;
    let nf = n as f64;
    let p = nf.powf(delta1).floor() as usize;
    let q = nf.powf(delta2).floor() as usize;
    let k = if p + q > 0 { n / (p + q) } else { 0 };
    if q < 1 || p <= q || k < 2 {
        return Err(CltError::PartitionInfeasible { n, p, q, k });
    }
    let mut v_blocks = Vec::with_capacity(k);
    let mut w_blocks = Vec::with_capacity(k);
    for i in 0..k {
        let base = i * (p + q);
        v_blocks.push(IndexCluster::new(base, p, n)?);
        w_blocks.push(IndexCluster::new(base + p, q, n)?);
    }
    let used = k * (p + q);
    let remainder = if used < n {
        Some(IndexCluster::new(used, n - used, n)?)
    } else {
        None
    };
    Ok(BlockPartition {
        n,
        epsilon,
        delta1,
        delta2,
        p,
        q,
        k,
        v_blocks,
        w_blocks,
        remainder,
    })
}

/// `zeta = sum_i (y_i - mean) / sqrt(n sigma_n^2)`.
pub fn zeta_from_sample(state: &ChainState, mean: f64, sigma_n_sq: f64) -> f64 {
    let n = state.n() as f64;
    let centered: f64 = state.spacings().iter().map(|&y| y - mean).sum();
    centered / (n * sigma_n_sq).sqrt()
}

/// Kolmogorov distance of the sample against the standard normal.
/// Below 1000 samples the statistic is all noise floor; refuse.
pub fn ks_distance(zeta_samples: &[f64]) -> Result<f64, CltError> {
    if zeta_samples.len() < 1000 {
        return Err(CltError::TooFewSamples {
            got: zeta_samples.len(),
            need: 1000,
        });
    }
    Ok(ks_statistic_normal(zeta_samples))
}

/// Per-`n` record of one rate-sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltReport {
    pub params: ModelParams,
    pub n: usize,
    pub sigma_n_sq: f64,
    pub num_replicas: usize,
    pub ks_distance: f64,
    pub zeta_samples_digest: MomentSummary,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateSweep {
    pub reports: Vec<CltReport>,
    /// Least-squares slope of `log ks` against `log n`.
    pub fitted_rate: f64,
    /// Percentile bootstrap interval of the slope (200 resampling rounds).
    pub rate_ci: (f64, f64),
}

pub struct RateSweepSamples {
    pub sweep: RateSweep,
    /// One zeta vector per entry of `n_values`, replica-ordered.
    pub zetas: Vec<Vec<f64>>,
}

const BOOTSTRAP_ROUNDS: usize = 200;

/// Replica streams: chain `i` at the `ni`-th chain length runs on ChaCha
/// stream `(ni + 1) << 40 | i`; the bootstrap uses stream `1 << 60`.
fn replica_stream(ni: usize, replica: usize) -> u64 {
    ((ni as u64 + 1) << 40) | replica as u64
}

/// Exact moments per `n`, independent Metropolis replica chains, one zeta
/// per chain endpoint, Kolmogorov distance per `n`, then a log-log rate fit.
pub fn rate_sweep(
    params: ModelParams,
    n_values: &[usize],
    replicas_per_n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<RateSweep, CltError> {
    Ok(rate_sweep_detailed(params, n_values, replicas_per_n, epsilon, seed)?.sweep)
}

/// As [`rate_sweep`], keeping the zeta samples for further diagnostics.
pub fn rate_sweep_detailed(
    params: ModelParams,
    n_values: &[usize],
    replicas_per_n: usize,
    epsilon: f64,
    seed: u64,
) -> Result<RateSweepSamples, CltError> {
    if n_values.len() < 2 || n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CltError::BadNValues);
    }
    if replicas_per_n < 10_000 {
        return Err(CltError::TooFewReplicas(replicas_per_n));
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(CltError::EpsilonRange(epsilon));
    }
    let grid = QuadratureGrid::gauss_legendre(DEFAULT_GRID_SIZE).map_err(KernelError::from)?;
    let kernel = TransferKernel::new(params, grid)?;

    let mut reports = Vec::with_capacity(n_values.len());
    let mut zetas = Vec::with_capacity(n_values.len());
    for (ni, &n) in n_values.iter().enumerate() {
        let moments = kernel.exact_moments(n)?;
        let sigma_n_sq = moments.sigma_n_squared();
        if !(sigma_n_sq > 0.0) {
            return Err(CltError::Kernel(KernelError::NonpositiveSigma {
                value: sigma_n_sq,
            }));
        }
        let config = SamplerConfig::metropolis(params, n, seed);
        let table = SiteInitTable::new(params, config.heat_bath_resolution);
        let z: Vec<f64> = (0..replicas_per_n)
            .into_par_iter()
            .map(|i| {
                sample_endpoint(&config, &table, replica_stream(ni, i))
                    .map(|state| zeta_from_sample(&state, moments.mean, sigma_n_sq))
            })
            .collect::<Result<_, _>>()?;
        let ks = ks_distance(&z)?;
        reports.push(CltReport {
            params,
            n,
            sigma_n_sq,
            num_replicas: replicas_per_n,
            ks_distance: ks,
            zeta_samples_digest: moment_summary(&z),
            epsilon,
        });
        zetas.push(z);
    }

    let log_n: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
    let log_ks: Vec<f64> = reports.iter().map(|r| r.ks_distance.ln()).collect();
    let fitted_rate = linear_fit(&log_n, &log_ks).slope;

    let mut boot_rng = ChaCha8Rng::seed_from_u64(seed);
    boot_rng.set_stream(1u64 << 60);
    let mut slopes = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    let mut resample = Vec::new();
    for _ in 0..BOOTSTRAP_ROUNDS {
        let mut boot_ks = Vec::with_capacity(zetas.len());
        for z in &zetas {
            resample.clear();
            resample.extend((0..z.len()).map(|_| z[boot_rng.random_range(0..z.len())]));
            boot_ks.push(ks_statistic_normal(&resample).ln());
        }
        slopes.push(linear_fit(&log_n, &boot_ks).slope);
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let lo = slopes[(BOOTSTRAP_ROUNDS as f64 * 0.025) as usize];
    let hi = slopes[(BOOTSTRAP_ROUNDS as f64 * 0.975) as usize - 1];

    Ok(RateSweepSamples {
        sweep: RateSweep {
            reports,
            fitted_rate,
            rate_ci: (lo, hi),
        },
        zetas,
    })
}

/// Empirical block-sum quantities mirroring the lemma-level bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LemmaDiagnostics {
    /// `E |sum over W blocks| / sqrt(k q)`.
    pub c3_ratio: f64,
    /// Max over the t grid of the characteristic-function factorization gap
    /// between the joint V-block sum and the product over blocks.
    pub block_dependence_gap: f64,
    /// `|1 - Var(xi_1) / (p sigma_n^2)|`, block-sum variance empirical.
    pub normalization_drift: f64,
    /// `E |xi_1|^3 / p^{1 + eps6/2}` with `eps6 = (1 - eps)/2`.
    pub third_moment_ratio: f64,
    /// `E (sum_{i<=p} X_i)^2 / p`.
    pub variance_lower_ratio: f64,
}

const CF_T_GRID: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

pub fn lemma_diagnostics(
    params: ModelParams,
    n: usize,
    epsilon: f64,
    samples: &[ChainState],
    kernel: &TransferKernel,
) -> Result<LemmaDiagnostics, CltError> {
    if kernel.params() != params {
        return Err(CltError::ParamsMismatch);
    }
    if samples.is_empty() {
        return Err(CltError::TooFewSamples { got: 0, need: 1 });
    }
    for s in samples {
        if s.n() != n {
            return Err(CltError::LengthMismatch { got: s.n(), want: n });
        }
    }
    let partition = build_partition(n, epsilon)?;
    let moments = kernel.exact_moments(n)?;
    let sigma_n_sq = moments.sigma_n_squared();
    if !(sigma_n_sq > 0.0) {
        return Err(CltError::Kernel(KernelError::NonpositiveSigma {
            value: sigma_n_sq,
        }));
    }
    let mean = moments.mean;
    let (p, q, k) = (partition.p, partition.q, partition.k);
    let scale = 1.0 / (n as f64 * sigma_n_sq).sqrt();

    let reps = samples.len() as f64;
    let mut w_abs_sum = 0.0;
    let mut v_sq_sum = 0.0;
    let mut v_cube_sum = 0.0;
    // characteristic functions: [t][block] and joint [t]
    let mut cf_joint = vec![(0.0f64, 0.0f64); CF_T_GRID.len()];
    let mut cf_blocks = vec![vec![(0.0f64, 0.0f64); k]; CF_T_GRID.len()];

    let mut v_sums = vec![0.0f64; k];
    for state in samples {
        let y = state.spacings();
        let mut w_total = 0.0;
        for (l, (vb, wb)) in partition.v_blocks.iter().zip(&partition.w_blocks).enumerate() {
            let mut vs = 0.0;
            for j in vb.indices() {
                vs += y[j] - mean;
            }
            v_sums[l] = vs;
            v_sq_sum += vs * vs;
            v_cube_sum += vs.abs().powi(3);
            for j in wb.indices() {
                w_total += y[j] - mean;
            }
        }
        w_abs_sum += w_total.abs();
        let sv: f64 = v_sums.iter().sum();
        for (ti, &t) in CF_T_GRID.iter().enumerate() {
            let phase = t * sv * scale;
            cf_joint[ti].0 += phase.cos();
            cf_joint[ti].1 += phase.sin();
            for (l, &vs) in v_sums.iter().enumerate() {
                let ph = t * vs * scale;
                cf_blocks[ti][l].0 += ph.cos();
                cf_blocks[ti][l].1 += ph.sin();
            }
        }
    }

    let c3_ratio = w_abs_sum / reps / ((k * q) as f64).sqrt();
    let var_hat = v_sq_sum / (reps * k as f64);
    let normalization_drift = (1.0 - var_hat / (p as f64 * sigma_n_sq)).abs();
    let eps6 = (1.0 - epsilon) / 2.0;
    let third_moment_ratio =
        v_cube_sum / (reps * k as f64) / (p as f64).powf(1.0 + eps6 / 2.0);
    let variance_lower_ratio = var_hat / p as f64;

    let mut block_dependence_gap = 0.0f64;
    for (ti, joint) in cf_joint.iter().enumerate() {
        let joint = (joint.0 / reps, joint.1 / reps);
        let mut prod = (1.0f64, 0.0f64);
        for bl in &cf_blocks[ti] {
            let b = (bl.0 / reps, bl.1 / reps);
            prod = (prod.0 * b.0 - prod.1 * b.1, prod.0 * b.1 + prod.1 * b.0);
        }
        let gap = ((joint.0 - prod.0).powi(2) + (joint.1 - prod.1).powi(2)).sqrt();
        block_dependence_gap = block_dependence_gap.max(gap);
    }

    Ok(LemmaDiagnostics {
        c3_ratio,
        block_dependence_gap,
        normalization_drift,
        third_moment_ratio,
        variance_lower_ratio,
    })
}

/// Smoothing-integrand profile: for each `t`, the gap between the empirical
/// characteristic function of `zeta` and the standard normal one, over `|t|`.
pub fn petrov_integrand_profile(
    zeta_samples: &[f64],
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>, CltError> {
    if zeta_samples.len() < 10_000 {
        return Err(CltError::TooFewSamples {
            got: zeta_samples.len(),
            need: 10_000,
        });
    }
    if t_grid.iter().any(|&t| t == 0.0) {
        return Err(CltError::ZeroT);
    }
    let m = zeta_samples.len() as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let (mut re, mut im) = (0.0, 0.0);
            for &z in zeta_samples {
                re += (t * z).cos();
                im += (t * z).sin();
            }
            let target = (-t * t / 2.0).exp();
            let gap = ((re / m - target).powi(2) + (im / m).powi(2)).sqrt() / t.abs();
            (t, gap)
        })
        .collect())
}
