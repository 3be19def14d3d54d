//! `slowmix`: config-driven runner for the sampling lower-bound experiments.
//!
//! Subcommands: `verify-identities`, `scan`, `mixing`, `resonance`,
//! `measure`, `gap`. Each reads one TOML config (strictly parsed), writes a
//! CSV plus a JSON run manifest, and exits 0 on pass, 1 on assertion
//! failure, 2 on configuration errors.

mod commands;
mod config;
mod manifest;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{FileConfig, Overrides, ResolvedConfig};
use manifest::{digest_file, RunManifest};

#[derive(Parser)]
#[command(name = "slowmix", version, about = "Metropolized sampling lower-bound experiments")]
struct Cli {
    /// Path to the experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<String>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all available).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output path override.
    #[arg(long, global = true)]
    out: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-identity suite and write a per-check CSV.
    VerifyIdentities {
        /// Cap the leapfrog step counts exercised by the polynomial rows.
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Acceptance/escape/gap table over a kernel grid.
    Scan,
    /// Warm-start mixing time series from the small ball.
    Mixing,
    /// Resonance trap: per-step resonant-coordinate magnitude.
    Resonance,
    /// Stationary measure of a witness set.
    Measure,
    /// Dirichlet-form spectral gap witness.
    Gap,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyIdentities { .. } => "verify-identities",
            Command::Scan => "scan",
            Command::Mixing => "mixing",
            Command::Resonance => "resonance",
            Command::Measure => "measure",
            Command::Gap => "gap",
        }
    }

    fn default_output(&self) -> &'static str {
        match self {
            Command::VerifyIdentities { .. } => "identities.csv",
            Command::Scan => "scan.csv",
            Command::Mixing => "mixing.csv",
            Command::Resonance => "resonance.csv",
            Command::Measure => "measure.csv",
            Command::Gap => "gap.csv",
        }
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_ASSERT: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {path}: {e}"))?;
            FileConfig::parse(&text)?
        }
        None => FileConfig::default(),
    };
    let mut resolved = file.resolve(
        cli.command.default_output(),
        Overrides {
            seed: cli.seed,
            threads: cli.threads,
            out: cli.out.as_deref(),
        },
    );
    if let Command::VerifyIdentities { k_max: Some(k) } = &cli.command {
        resolved.identities.k_max = *k;
    }
    if resolved.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(resolved.threads)
            .build_global()
            .map_err(|e| format!("thread pool: {e}"))?;
    }

    let started = Instant::now();
    let outcome = dispatch(&cli.command, &resolved)?;
    let wall_time_s = started.elapsed().as_secs_f64();

    let outputs = outcome
        .outputs
        .iter()
        .map(|p| digest_file(p).map_err(|e| format!("digest {}: {e}", p.display())))
        .collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        resolved_config: resolved.clone(),
        wall_time_s,
        summary: outcome.summary,
        outputs,
    };
    let manifest_path = manifest
        .write(Path::new(&resolved.output))
        .map_err(|e| format!("cannot write manifest: {e}"))?;
    eprintln!(
        "{}: wrote {} and {} in {wall_time_s:.2}s",
        cli.command.name(),
        resolved.output,
        manifest_path.display()
    );
    Ok(if outcome.exit == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ASSERT)
    })
}

fn dispatch(command: &Command, resolved: &ResolvedConfig) -> Result<commands::Outcome, String> {
    match command {
        Command::VerifyIdentities { .. } => commands::verify_identities(resolved),
        Command::Scan => commands::scan(resolved),
        Command::Mixing => commands::mixing(resolved),
        Command::Resonance => commands::resonance(resolved),
        Command::Measure => commands::measure(resolved),
        Command::Gap => commands::gap(resolved),
    }
}
