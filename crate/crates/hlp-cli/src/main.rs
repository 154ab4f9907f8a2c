//! `hlp`: experiment runner for hierarchical long-range percolation.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 config error, 3 budget
//! exhausted.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;
use error::CliError;
use output::Out;

#[derive(Parser, Debug)]
#[command(
    name = "hlp",
    version,
    about = "Hierarchical long-range percolation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; changes wall time only.
    #[arg(long, global = true, env = "HLP_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sample one configuration and dump its edges and cluster sizes
    Sample,
    /// Estimate the dense-cluster probability and mean K_max density
    Theta,
    /// Bisection for the finite-box pseudo-critical λ
    LambdaC,
    /// Label blocks and run the deterministic validators
    Classify,
    /// Iterate the bad-block probability recursion
    Recursion,
    /// Exact bound evaluators against Monte Carlo
    Bounds,
    /// Finite-box θ̂²β table
    InDiagnostic,
    /// Kernel property report
    CheckKernel,
    /// Split CSV columns into x/y series files
    Plotdata,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Theta => "theta",
            Command::LambdaC => "lambda-c",
            Command::Classify => "classify",
            Command::Recursion => "recursion",
            Command::Bounds => "bounds",
            Command::InDiagnostic => "in-diagnostic",
            Command::CheckKernel => "check-kernel",
            Command::Plotdata => "plotdata",
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg = Config::parse(&text, cli.seed)?;
    let mut out = Out::new(&cli.out, &cfg, cli.command.name())?;
    let res = match cli.command {
        Command::Sample => commands::sample_cmd(&cfg, &mut out),
        Command::Theta => commands::theta(&cfg, &mut out),
        Command::LambdaC => commands::lambda_c(&cfg, &mut out),
        Command::Classify => commands::classify(&cfg, &mut out),
        Command::Recursion => commands::recursion(&cfg, &mut out),
        Command::Bounds => commands::bounds(&cfg, &mut out),
        Command::InDiagnostic => commands::diagnostic(&cfg, &mut out),
        Command::CheckKernel => commands::check_kernel(&cfg, &mut out),
        Command::Plotdata => commands::plotdata(&cfg, &mut out),
    };
    res.map(|()| out.written)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hlp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
