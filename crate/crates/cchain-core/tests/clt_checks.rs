//! Block partitions, the normalized spacing sum, Kolmogorov distances,
//! rate sweeps and the lemma-level block diagnostics.

mod common;

use cchain_core::clt::{
    build_partition, ks_distance, lemma_diagnostics, petrov_integrand_profile, rate_sweep,
    rate_sweep_detailed, zeta_from_sample, CltError,
};
use cchain_core::kernel::TransferKernel;
use cchain_core::model::{ChainState, ModelParams};
use cchain_core::quad::QuadratureGrid;
use cchain_core::sampler::{sample_endpoint, SamplerConfig, SiteInitTable};
use common::normal_quantile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(beta: f64, gamma: f64) -> ModelParams {
    ModelParams::new(beta, gamma).unwrap()
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn partition_integer_arithmetic() {
    // floor(4096^0.8) = floor(776.046...) = 776, floor(4096^0.1) = 2,
    // floor(4096 / 778) = 5 (values checked against independent arithmetic)
    let p = build_partition(4096, 0.1).unwrap();
    assert_eq!((p.p, p.q, p.k), (776, 2, 5));
    assert_eq!(p.remainder.unwrap().len, 4096 - 5 * 778);

    let p = build_partition(100, 0.24).unwrap();
    assert_eq!((p.p, p.q, p.k), (10, 3, 7));
    assert_eq!(p.remainder.unwrap().len, 9);
}

#[test]
fn partition_tiles_the_circle_exactly() {
    for (n, eps) in [(100usize, 0.24), (512, 0.1), (4096, 0.1), (64, 0.1)] {
        let part = build_partition(n, eps).unwrap();
        let mut seen = vec![0u8; n];
        let clusters = part
            .v_blocks
            .iter()
            .chain(&part.w_blocks)
            .chain(part.remainder.iter());
        for c in clusters {
            for i in c.indices() {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1), "tiling broken at n = {n}");
        assert!(part.v_blocks.iter().all(|b| b.len == part.p));
        assert!(part.w_blocks.iter().all(|b| b.len == part.q));
        assert!(part.p > part.q && part.q >= 1 && part.k >= 2);
    }
}

#[test]
fn partition_rejects_bad_epsilon_and_small_n() {
    assert!(matches!(build_partition(512, 0.3), Err(CltError::EpsilonRange(_))));
    assert!(matches!(build_partition(512, 0.0), Err(CltError::EpsilonRange(_))));
    // n = 8, eps = 0.24: p = 8^0.52 = 2, q = 8^0.24 = 1, k = 2 -> feasible;
    // tiny n makes p <= q
    assert!(build_partition(4, 0.24).is_err());
}

#[test]
fn zeta_centering_and_linearity() {
    let state = ChainState::new(vec![0.37; 10]).unwrap();
    assert_eq!(zeta_from_sample(&state, 0.37, 1.0), 0.0);

    let base = ChainState::new(vec![0.3; 10]).unwrap();
    let shifted = ChainState::new(vec![0.3 + 0.05; 10]).unwrap();
    let sigma_sq = 0.7;
    let z0 = zeta_from_sample(&base, 0.2, sigma_sq);
    let z1 = zeta_from_sample(&shifted, 0.2, sigma_sq);
    let expected_shift = 10.0 * 0.05 / (10.0 * sigma_sq).sqrt();
    assert!((z1 - z0 - expected_shift).abs() < 1e-12);
}

#[test]
fn ks_of_exact_normal_sample_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sample: Vec<f64> = (0..1_000_000).map(|_| box_muller(&mut rng)).collect();
    let d = ks_distance(&sample).unwrap();
    assert!(d < 0.002, "ks = {d}");
}

#[test]
fn ks_of_constant_zero_sample_is_half() {
    let d = ks_distance(&vec![0.0; 2000]).unwrap();
    assert!((d - 0.5).abs() < 1e-12);
}

#[test]
fn ks_of_quantile_stream_is_half_over_n() {
    let n = 100_000;
    let sample: Vec<f64> = (0..n)
        .map(|i| normal_quantile((i as f64 + 0.5) / n as f64))
        .collect();
    let d = ks_distance(&sample).unwrap();
    assert!(d <= 0.5 / n as f64 + 1e-9, "ks = {d}");
}

#[test]
fn ks_rejects_small_samples_and_ignores_permutation() {
    assert!(ks_distance(&vec![0.1; 999]).is_err());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sample: Vec<f64> = (0..5000).map(|_| box_muller(&mut rng)).collect();
    let mut reversed = sample.clone();
    reversed.reverse();
    assert_eq!(
        ks_distance(&sample).unwrap(),
        ks_distance(&reversed).unwrap()
    );
    assert!(ks_distance(&sample).unwrap() > 0.0);
}

#[test]
fn zeta_variance_near_one_at_n64() {
    // exact (mean, sigma^2) normalization makes zeta unit variance up to
    // Monte Carlo error
    let p = params(2.0, 1.0);
    let kernel = TransferKernel::new(p, QuadratureGrid::gauss_legendre(64).unwrap()).unwrap();
    let moments = kernel.exact_moments(64).unwrap();
    let sigma_sq = moments.sigma_n_squared();
    let cfg = SamplerConfig::metropolis(p, 64, 31);
    let table = SiteInitTable::new(p, cfg.heat_bath_resolution);
    use rayon::prelude::*;
    let zetas: Vec<f64> = (0..100_000u64)
        .into_par_iter()
        .map(|i| {
            let st = sample_endpoint(&cfg, &table, (7 << 40) | i).unwrap();
            zeta_from_sample(&st, moments.mean, sigma_sq)
        })
        .collect();
    let var = cchain_core::stats::moment_summary(&zetas).variance;
    assert!(
        (0.95..=1.05).contains(&var),
        "zeta sample variance = {var}"
    );
}

#[test]
fn rate_sweep_gamma0_decreases_with_negative_rate() {
    let sweep = rate_sweep(params(2.0, 0.0), &[8, 16, 32, 64], 20_000, 0.1, 12).unwrap();
    assert_eq!(sweep.reports.len(), 4);
    assert!(sweep.fitted_rate < 0.0, "rate = {}", sweep.fitted_rate);
    assert!(
        sweep.fitted_rate <= -0.2,
        "rate = {} too shallow even for the noise floor",
        sweep.fitted_rate
    );
    assert!(sweep.rate_ci.0 <= sweep.fitted_rate && sweep.fitted_rate <= sweep.rate_ci.1);
    let first = sweep.reports.first().unwrap().ks_distance;
    let last = sweep.reports.last().unwrap().ks_distance;
    assert!(last < first);
    for r in &sweep.reports {
        assert!((0.9..=1.1).contains(&r.zeta_samples_digest.variance));
        assert_eq!(r.epsilon, 0.1);
        assert_eq!(r.num_replicas, 20_000);
    }
}

#[test]
fn rate_sweep_validates_inputs() {
    let p = params(2.0, 1.0);
    assert!(matches!(
        rate_sweep(p, &[64], 20_000, 0.1, 1),
        Err(CltError::BadNValues)
    ));
    assert!(matches!(
        rate_sweep(p, &[64, 32], 20_000, 0.1, 1),
        Err(CltError::BadNValues)
    ));
    assert!(matches!(
        rate_sweep(p, &[32, 64], 500, 0.1, 1),
        Err(CltError::TooFewReplicas(500))
    ));
    assert!(matches!(
        rate_sweep(p, &[32, 64], 20_000, 0.3, 1),
        Err(CltError::EpsilonRange(_))
    ));
}

#[test]
fn lemma_diagnostics_gamma0_factorizes_within_noise() {
    let p = params(2.0, 0.0);
    let kernel = TransferKernel::new(p, QuadratureGrid::gauss_legendre(64).unwrap()).unwrap();
    let n = 64;
    let replicas = 20_000usize;
    let cfg = SamplerConfig::metropolis(p, n, 8);
    let table = SiteInitTable::new(p, cfg.heat_bath_resolution);
    use rayon::prelude::*;
    let samples: Vec<ChainState> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| sample_endpoint(&cfg, &table, (9 << 40) | i).unwrap())
        .collect();
    let diag = lemma_diagnostics(p, n, 0.1, &samples, &kernel).unwrap();
    let noise = 4.0 / (replicas as f64).sqrt();
    assert!(
        diag.block_dependence_gap < noise,
        "gap = {} vs noise bound {noise}",
        diag.block_dependence_gap
    );
    assert!(diag.c3_ratio.is_finite() && diag.c3_ratio >= 0.0);
    assert!(diag.variance_lower_ratio > 0.0);
    assert!(diag.normalization_drift.is_finite());
    assert!(diag.third_moment_ratio.is_finite() && diag.third_moment_ratio >= 0.0);
}

#[test]
fn lemma_diagnostics_rejects_mismatches() {
    let p = params(2.0, 1.0);
    let kernel = TransferKernel::new(p, QuadratureGrid::gauss_legendre(32).unwrap()).unwrap();
    let other = params(2.0, 0.5);
    let samples = vec![ChainState::new(vec![0.5; 64]).unwrap()];
    assert!(matches!(
        lemma_diagnostics(other, 64, 0.1, &samples, &kernel),
        Err(CltError::ParamsMismatch)
    ));
    let wrong_len = vec![ChainState::new(vec![0.5; 32]).unwrap()];
    assert!(lemma_diagnostics(p, 64, 0.1, &wrong_len, &kernel).is_err());
}

#[test]
fn petrov_profile_of_exact_normal_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let sample: Vec<f64> = (0..100_000).map(|_| box_muller(&mut rng)).collect();
    let profile = petrov_integrand_profile(&sample, &[0.01, 1.0]).unwrap();
    let gap_small_t = profile[0].1;
    let gap_one = profile[1].1;
    assert!(
        gap_one <= 3.0 / (sample.len() as f64).sqrt(),
        "gap(1) = {gap_one}"
    );
    // near t = 0 the numerator vanishes linearly; the profile stays bounded
    assert!(gap_small_t < 100.0 * gap_one, "gap(0.01) = {gap_small_t}");
}

#[test]
fn petrov_profile_symmetric_under_sign_flip_augmentation() {
    let mut rng = ChaCha8Rng::seed_from_u64(56);
    let mut sample: Vec<f64> = (0..20_000).map(|_| box_muller(&mut rng)).collect();
    let flipped: Vec<f64> = sample.iter().map(|&z| -z).collect();
    sample.extend(flipped);
    let profile = petrov_integrand_profile(&sample, &[-2.0, -0.5, 0.5, 2.0]).unwrap();
    assert_eq!(profile[0].1, profile[3].1);
    assert_eq!(profile[1].1, profile[2].1);
}

#[test]
fn petrov_profile_validates_inputs() {
    let sample = vec![0.0; 20_000];
    assert!(matches!(
        petrov_integrand_profile(&sample, &[0.0, 1.0]),
        Err(CltError::ZeroT)
    ));
    assert!(petrov_integrand_profile(&sample[..100], &[1.0]).is_err());
}

#[test]
fn rate_sweep_detailed_exposes_replica_ordered_zetas() {
    let detailed = rate_sweep_detailed(params(2.0, 0.0), &[8, 16], 10_000, 0.1, 4).unwrap();
    assert_eq!(detailed.zetas.len(), 2);
    assert_eq!(detailed.zetas[0].len(), 10_000);
    // identical seed reproduces the stream bit-exactly
    let again = rate_sweep_detailed(params(2.0, 0.0), &[8, 16], 10_000, 0.1, 4).unwrap();
    assert_eq!(detailed.zetas, again.zetas);
    assert_eq!(
        detailed.sweep.reports[0].ks_distance,
        again.sweep.reports[0].ks_distance
    );
}
