//! Command implementations. Each returns the list of emitted data files
//! with their digests; `main` wraps them in a manifest.

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use cchain_core::clt::{self, CltError};
use cchain_core::decay::{self, DecayError};
use cchain_core::kernel::{KernelError, TransferKernel};
use cchain_core::model::{IndexCluster, ModelParams};
use cchain_core::quad::QuadratureGrid;
use cchain_core::sampler::{self, Proposal, SampleFileHeader, SamplerConfig, SamplerError};

use crate::jsonio::{fmt_f64, to_json_bytes};
use crate::manifest::digest_file;

/// Exit codes: 2 usage, 3 sampler, 4 degenerate spectral gap, 5 decay-fit
/// failure, 6 nonpositive variance, 1 anything else.
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 1,
            message: format!("io error: {e}"),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        let code = match &e {
            SamplerError::InvalidConfig(_) | SamplerError::Model(_) => 2,
            _ => 3,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        let code = match &e {
            KernelError::NoSpectralGap { .. } | KernelError::DegenerateGap { .. } => 4,
            KernelError::NonpositiveSigma { .. } => 6,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<DecayError> for CliError {
    fn from(e: DecayError) -> Self {
        match e {
            DecayError::Kernel(k) => k.into(),
            DecayError::ClusterSize { .. }
            | DecayError::SeparationTooLarge { .. }
            | DecayError::ContractionRange(_) => CliError {
                code: 2,
                message: e.to_string(),
            },
            DecayError::NonpositiveRatio(_) => CliError {
                code: 5,
                message: format!(
                    "{e}; the factorized (gamma = 0) regime has no exponential fit — use the independence checks instead"
                ),
            },
            _ => CliError {
                code: 5,
                message: e.to_string(),
            },
        }
    }
}

impl From<CltError> for CliError {
    fn from(e: CltError) -> Self {
        match e {
            CltError::Kernel(k) => k.into(),
            CltError::Sampler(s) => s.into(),
            CltError::EpsilonRange(_)
            | CltError::BadNValues
            | CltError::TooFewReplicas(_)
            | CltError::PartitionInfeasible { .. }
            | CltError::Model(_) => CliError {
                code: 2,
                message: e.to_string(),
            },
            _ => CliError {
                code: 1,
                message: e.to_string(),
            },
        }
    }
}

fn parse_params(beta: f64, gamma: f64) -> Result<ModelParams, CliError> {
    ModelParams::new(beta, gamma).map_err(|e| CliError::usage(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Bin,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalArg {
    HeatBath,
    Metropolis,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 2)]
    pub thin: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SampleFormat::Bin)]
    pub format: SampleFormat,
    #[arg(long, value_enum, default_value_t = ProposalArg::HeatBath)]
    pub proposal: ProposalArg,
    #[arg(long, default_value_t = 4096)]
    pub heat_bath_resolution: usize,
}

pub fn run_sample(args: &SampleArgs) -> Result<Vec<(PathBuf, u64)>, CliError> {
    let params = parse_params(args.beta, args.gamma)?;
    let config = SamplerConfig {
        params,
        n: args.n,
        seed: args.seed,
        burn_in_sweeps: args.burn_in,
        thin_sweeps: args.thin,
        proposal: match args.proposal {
            ProposalArg::HeatBath => Proposal::HeatBathGrid,
            ProposalArg::Metropolis => Proposal::MetropolisUniform,
        },
        heat_bath_resolution: args.heat_bath_resolution,
    };
    let (samples, diagnostics) = sampler::run(&config, args.samples)?;

    match args.format {
        SampleFormat::Bin => {
            let header = SampleFileHeader {
                version: sampler::SAMPLE_FORMAT_VERSION,
                n: args.n as u32,
                count: samples.len() as u64,
                seed: args.seed,
                beta: args.beta,
                gamma: args.gamma,
            };
            let mut buf = Vec::new();
            sampler::write_samples(&mut buf, &header, &samples)?;
            fs::write(&args.out, buf)?;
        }
        SampleFormat::Csv => {
            let mut w = Vec::new();
            for s in &samples {
                let row: Vec<String> = s.spacings().iter().map(|&y| fmt_f64(y)).collect();
                writeln!(w, "{}", row.join(","))?;
            }
            fs::write(&args.out, w)?;
        }
    }
    eprintln!(
        "sampler: acceptance {:.3}, tau {:.2}, ess {:.0}",
        diagnostics.acceptance_rate,
        diagnostics.integrated_autocorrelation_time,
        diagnostics.effective_sample_count
    );
    println!("{}", args.out.display());
    Ok(vec![(args.out.clone(), digest_file(&args.out)?)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactAction {
    Zn,
    Moments,
    Marginal,
    Sigma2,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExactArgs {
    #[arg(value_enum)]
    pub action: ExactAction,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Cluster size for the marginal action.
    #[arg(long, default_value_t = 1)]
    pub i_len: usize,
}

#[derive(Serialize)]
struct ZnReport {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n: usize,
    grid: usize,
    zn: f64,
    log_zn: f64,
}

#[derive(Serialize)]
struct MomentsReport {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n: usize,
    grid: usize,
    mean: f64,
    variance: f64,
    /// cov(r) for r = 0 .. min(n-1, 64); cov(0) is the variance.
    cov: Vec<f64>,
    sigma_n_sq: f64,
    /// None when the kernel is separable (gamma = 0): infinite rate.
    spectral_decay_rate: Option<f64>,
}

#[derive(Serialize)]
struct MarginalReport {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n: usize,
    grid: usize,
    i_len: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Row-major over the cluster coordinates, first coordinate slowest.
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Sigma2Report {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n: usize,
    grid: usize,
    sigma_n_sq: f64,
}

pub fn run_exact(args: &ExactArgs) -> Result<Vec<(PathBuf, u64)>, CliError> {
    let params = parse_params(args.beta, args.gamma)?;
    let grid = QuadratureGrid::gauss_legendre(args.grid).map_err(KernelError::from)?;
    let kernel = TransferKernel::new(params, grid)?;
    let bytes = match args.action {
        ExactAction::Zn => to_json_bytes(&ZnReport {
            schema_version: 1,
            beta: args.beta,
            gamma: args.gamma,
            n: args.n,
            grid: args.grid,
            zn: kernel.partition_function(args.n)?,
            log_zn: kernel.log_partition_function(args.n)?,
        }),
        ExactAction::Moments => {
            let moments = kernel.exact_moments(args.n)?;
            let max_lag = (args.n - 1).min(64);
            let decay_rate = match kernel.spectral_decay_rate() {
                Ok(rate) if rate.is_finite() => Some(rate),
                Ok(_) => None,
                Err(e) => return Err(e.into()),
            };
            to_json_bytes(&MomentsReport {
                schema_version: 1,
                beta: args.beta,
                gamma: args.gamma,
                n: args.n,
                grid: args.grid,
                mean: moments.mean,
                variance: moments.variance,
                cov: (0..=max_lag).map(|r| moments.cov(r)).collect(),
                sigma_n_sq: moments.sigma_n_squared(),
                spectral_decay_rate: decay_rate,
            })
        }
        ExactAction::Marginal => {
            let cluster = IndexCluster::new(0, args.i_len, args.n)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let density = kernel.marginal_density(args.n, cluster)?;
            to_json_bytes(&MarginalReport {
                schema_version: 1,
                beta: args.beta,
                gamma: args.gamma,
                n: args.n,
                grid: args.grid,
                i_len: args.i_len,
                nodes: kernel.grid().nodes().to_vec(),
                weights: kernel.grid().weights().to_vec(),
                values: density.values,
            })
        }
        ExactAction::Sigma2 => to_json_bytes(&Sigma2Report {
            schema_version: 1,
            beta: args.beta,
            gamma: args.gamma,
            n: args.n,
            grid: args.grid,
            sigma_n_sq: kernel.sigma_n_squared(args.n)?,
        }),
    };
    fs::write(&args.out, bytes)?;
    println!("{}", args.out.display());
    Ok(vec![(args.out.clone(), digest_file(&args.out)?)])
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DecayArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub i_len: usize,
    #[arg(long, default_value_t = 1)]
    pub j_len: usize,
    #[arg(long)]
    pub r_min: usize,
    #[arg(long)]
    pub r_max: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// CSV of measurements; the fit lands next to it as `<out>.fit.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct FitReport {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n: usize,
    i_len: usize,
    j_len: usize,
    alpha_hat: f64,
    c_hat: f64,
    r_min: usize,
    r_max: usize,
    r_squared: f64,
}

pub fn fit_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".fit.json");
    out.with_file_name(name)
}

pub fn run_decay(args: &DecayArgs) -> Result<Vec<(PathBuf, u64)>, CliError> {
    if args.r_min > args.r_max {
        return Err(CliError::usage(format!(
            "r_min = {} exceeds r_max = {}",
            args.r_min, args.r_max
        )));
    }
    let params = parse_params(args.beta, args.gamma)?;
    let grid = QuadratureGrid::gauss_legendre(args.grid).map_err(KernelError::from)?;
    let kernel = TransferKernel::new(params, grid)?;

    let mut rows = String::from("beta,gamma,n,i_len,j_len,r,sup_ratio\n");
    let mut measurements = Vec::new();
    for r in args.r_min..=args.r_max {
        let m = decay::measure_ratio(&kernel, args.n, args.i_len, args.j_len, r)?;
        rows.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt_f64(m.params.beta),
            fmt_f64(m.params.gamma),
            m.n,
            m.i_len,
            m.j_len,
            m.r,
            fmt_f64(m.sup_ratio)
        ));
        measurements.push(m);
    }
    let fit = decay::fit_decay(&measurements)?;

    fs::write(&args.out, rows)?;
    let fit_out = fit_path(&args.out);
    fs::write(
        &fit_out,
        to_json_bytes(&FitReport {
            schema_version: 1,
            beta: args.beta,
            gamma: args.gamma,
            n: args.n,
            i_len: args.i_len,
            j_len: args.j_len,
            alpha_hat: fit.alpha_hat,
            c_hat: fit.c_hat,
            r_min: fit.r_range.0,
            r_max: fit.r_range.1,
            r_squared: fit.r_squared,
        }),
    )?;
    eprintln!(
        "fit: alpha_hat {:.4}, c_hat {:.4e}, r_squared {:.4}",
        fit.alpha_hat, fit.c_hat, fit.r_squared
    );
    println!("{}", args.out.display());
    println!("{}", fit_out.display());
    Ok(vec![
        (args.out.clone(), digest_file(&args.out)?),
        (fit_out.clone(), digest_file(&fit_out)?),
    ])
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CltArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub gamma: f64,
    /// Comma-separated strictly increasing chain lengths.
    #[arg(long, value_delimiter = ',')]
    pub n_values: Vec<usize>,
    #[arg(long)]
    pub replicas: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct RateReport {
    schema_version: u32,
    beta: f64,
    gamma: f64,
    n_values: Vec<usize>,
    replicas: usize,
    fitted_rate: f64,
    rate_ci_low: f64,
    rate_ci_high: f64,
}

pub fn run_clt(args: &CltArgs) -> Result<Vec<(PathBuf, u64)>, CliError> {
    let params = parse_params(args.beta, args.gamma)?;
    if !(args.epsilon > 0.0 && args.epsilon < 0.25) {
        return Err(CliError::usage(format!(
            "epsilon = {} outside the open interval (0, 1/4)",
            args.epsilon
        )));
    }
    // the lemma diagnostics at the largest n need a feasible partition;
    // fail before any replica work or partial output
    let n_max = *args
        .n_values
        .last()
        .ok_or_else(|| CliError::usage("n_values must not be empty".to_string()))?;
    clt::build_partition(n_max, args.epsilon)?;
    fs::create_dir_all(&args.out_dir)?;
    let detailed =
        clt::rate_sweep_detailed(params, &args.n_values, args.replicas, args.epsilon, args.seed)?;

    let mut outputs = Vec::new();
    for report in &detailed.sweep.reports {
        let path = args.out_dir.join(format!("clt_n{}.json", report.n));
        fs::write(&path, to_json_bytes(report))?;
        println!("{}", path.display());
        outputs.push((path.clone(), digest_file(&path)?));
        eprintln!(
            "n = {:>5}: ks = {:.5}, zeta variance = {:.4}",
            report.n, report.ks_distance, report.zeta_samples_digest.variance
        );
    }

    let rate_file = args.out_dir.join("rate.json");
    fs::write(
        &rate_file,
        to_json_bytes(&RateReport {
            schema_version: 1,
            beta: args.beta,
            gamma: args.gamma,
            n_values: args.n_values.clone(),
            replicas: args.replicas,
            fitted_rate: detailed.sweep.fitted_rate,
            rate_ci_low: detailed.sweep.rate_ci.0,
            rate_ci_high: detailed.sweep.rate_ci.1,
        }),
    )?;
    println!("{}", rate_file.display());
    outputs.push((rate_file.clone(), digest_file(&rate_file)?));

    // lemma diagnostics at the largest n: regenerate the same replica
    // states (identical streams make this deterministic)
    let n_max = *args.n_values.last().expect("validated nonempty");
    let ni = args.n_values.len() - 1;
    let config = SamplerConfig::metropolis(params, n_max, args.seed);
    let table = sampler::SiteInitTable::new(params, config.heat_bath_resolution);
    use rayon::prelude::*;
    let states: Vec<cchain_core::model::ChainState> = (0..args.replicas)
        .into_par_iter()
        .map(|i| sampler::sample_endpoint(&config, &table, ((ni as u64 + 1) << 40) | i as u64))
        .collect::<Result<_, _>>()?;
    let grid = QuadratureGrid::gauss_legendre(cchain_core::quad::DEFAULT_GRID_SIZE)
        .map_err(KernelError::from)?;
    let kernel = TransferKernel::new(params, grid)?;
    let diag = clt::lemma_diagnostics(params, n_max, args.epsilon, &states, &kernel)?;
    let diag_file = args.out_dir.join("lemma_diagnostics.json");
    #[derive(Serialize)]
    struct LemmaReport {
        schema_version: u32,
        n: usize,
        epsilon: f64,
        #[serde(flatten)]
        diagnostics: cchain_core::clt::LemmaDiagnostics,
    }
    fs::write(
        &diag_file,
        to_json_bytes(&LemmaReport {
            schema_version: 1,
            n: n_max,
            epsilon: args.epsilon,
            diagnostics: diag,
        }),
    )?;
    println!("{}", diag_file.display());
    outputs.push((diag_file.clone(), digest_file(&diag_file)?));
    eprintln!("fitted rate {:.4} (ci {:.4} .. {:.4})", detailed.sweep.fitted_rate, detailed.sweep.rate_ci.0, detailed.sweep.rate_ci.1);
    Ok(outputs)
}
