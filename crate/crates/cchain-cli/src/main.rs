//! `cchain` — command-line runner for the circular Coulomb-chain laboratory.
//!
//! Subcommands: `sample` (MCMC sample streams), `exact` (transfer-operator
//! quantities), `decay` (cluster correlation-decay sweeps), `clt`
//! (normalized-sum convergence experiments), `replay` (digest verification
//! of a previous run from its manifest).

mod commands;
mod jsonio;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use commands::{CliError, CltArgs, DecayArgs, ExactArgs, SampleArgs};
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "cchain",
    version,
    about = "Circular Coulomb-chain laboratory: exact transfer-operator statistics, Gibbs sampling, correlation-decay and CLT experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw chain samples by MCMC and write them to a binary or CSV file.
    Sample(SampleArgs),
    /// Exact finite-n quantities from the discretized transfer operator.
    Exact(ExactArgs),
    /// Sweep the conditional-vs-marginal deviation over separations and fit
    /// the exponential decay.
    Decay(DecayArgs),
    /// Rate sweep of the normalized spacing sum against the standard normal,
    /// plus block-sum diagnostics at the largest chain length.
    Clt(CltArgs),
    /// Re-run the command recorded in a manifest and verify output digests.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("CCHAIN_THREADS") {
        match threads.parse::<usize>() {
            Ok(t) if t >= 1 => {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global()
                    .ok();
            }
            _ => {
                eprintln!("CCHAIN_THREADS must be a positive integer, got {threads:?}");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sample(args) => {
            run_with_manifest("sample", &args, args.out.with_extension("manifest.json"), commands::run_sample)
        }
        Command::Exact(args) => {
            run_with_manifest("exact", &args, args.out.with_extension("manifest.json"), commands::run_exact)
        }
        Command::Decay(args) => {
            run_with_manifest("decay", &args, args.out.with_extension("manifest.json"), commands::run_decay)
        }
        Command::Clt(args) => {
            let manifest_path = args.out_dir.join("manifest.json");
            run_with_manifest("clt", &args, manifest_path, commands::run_clt)
        }
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn run_with_manifest<A: serde::Serialize>(
    name: &str,
    args: &A,
    manifest_path: PathBuf,
    run: impl Fn(&A) -> Result<Vec<(PathBuf, u64)>, CliError>,
) -> Result<(), CliError> {
    let started = Instant::now();
    let outputs = run(args)?;
    let manifest = RunManifest::new(
        name,
        serde_json::to_value(args).expect("arg serialization"),
        started.elapsed().as_secs_f64(),
        &outputs,
    );
    manifest.write(&manifest_path)?;
    println!("{}", manifest_path.display());
    Ok(())
}

/// Re-run the recorded command with outputs redirected to a scratch
/// directory and compare data-file digests against the manifest.
fn replay(manifest_path: &PathBuf) -> Result<(), CliError> {
    let recorded = RunManifest::read(manifest_path)?;
    let scratch = std::env::temp_dir().join(format!(
        "cchain-replay-{}-{:08x}",
        std::process::id(),
        manifest::fnv1a64(manifest_path.display().to_string().as_bytes()) as u32
    ));
    std::fs::create_dir_all(&scratch)?;

    let fresh: Vec<(PathBuf, u64)> = match recorded.command.as_str() {
        "sample" => {
            let mut args: SampleArgs = from_args(&recorded.args)?;
            args.out = scratch.join(file_name(&args.out));
            commands::run_sample(&args)?
        }
        "exact" => {
            let mut args: ExactArgs = from_args(&recorded.args)?;
            args.out = scratch.join(file_name(&args.out));
            commands::run_exact(&args)?
        }
        "decay" => {
            let mut args: DecayArgs = from_args(&recorded.args)?;
            args.out = scratch.join(file_name(&args.out));
            commands::run_decay(&args)?
        }
        "clt" => {
            let mut args: CltArgs = from_args(&recorded.args)?;
            args.out_dir = scratch.clone();
            commands::run_clt(&args)?
        }
        other => {
            return Err(CliError::usage(format!("manifest records unknown command {other:?}")));
        }
    };

    let mut failures = Vec::new();
    for (recorded_out, fresh_out) in recorded.outputs.iter().zip(&fresh) {
        let digest = format!("{:016x}", fresh_out.1);
        let matched = digest == recorded_out.fnv1a64;
        println!(
            "{}: recorded {} fresh {} {}",
            recorded_out.path,
            recorded_out.fnv1a64,
            digest,
            if matched { "MATCH" } else { "MISMATCH" }
        );
        if !matched {
            failures.push(recorded_out.path.clone());
        }
    }
    std::fs::remove_dir_all(&scratch).ok();
    if recorded.outputs.len() != fresh.len() {
        return Err(CliError {
            code: 1,
            message: "replay produced a different number of outputs".into(),
        });
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError {
            code: 1,
            message: format!("digest mismatch in: {}", failures.join(", ")),
        })
    }
}

fn from_args<T: serde::de::DeserializeOwned>(value: &serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(value.clone())
        .map_err(|e| CliError::usage(format!("manifest args do not parse: {e}")))
}

fn file_name(path: &PathBuf) -> std::ffi::OsString {
    path.file_name()
        .map(|f| f.to_os_string())
        .unwrap_or_else(|| "out".into())
}
