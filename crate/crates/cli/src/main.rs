use clap::{Args, Parser, Subcommand};
use nslift_cli::{Pipeline, PipelineError, Stage};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nslift", version, about = "Symbol, kernel and fixed-point checks for the lifted Navier-Stokes system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural identities and the symbol suite.
    SymbolCheck(Common),
    /// Newtonian, heat and factorization oracles.
    KernelCheck(Common),
    /// Bound constants, phi report and forcing admissibility.
    Bounds(Common),
    /// Damped fixed-point iteration; writes iteration CSV and field files.
    Run(Common),
    /// Assemble (u, p) from run outputs and measure the residuals.
    Verify(Common),
    /// Every stage, or the subset given by --stages.
    All(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config and NSLIFT_OUT_DIR.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated subset of symbol-check,kernel-check,bounds,run,verify.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<String>>,
    /// Accepted for interface stability; the kernels run on one thread.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cli: Cli) -> Result<bool, PipelineError> {
    let (common, default_stages): (Common, Vec<Stage>) = match cli.command {
        Command::SymbolCheck(c) => (c, vec![Stage::SymbolCheck]),
        Command::KernelCheck(c) => (c, vec![Stage::KernelCheck]),
        Command::Bounds(c) => (c, vec![Stage::Bounds]),
        Command::Run(c) => (c, vec![Stage::Run]),
        Command::Verify(c) => (c, vec![Stage::Verify]),
        Command::All(c) => (c, Stage::ALL.to_vec()),
    };
    let stages = match &common.stages {
        Some(list) => list
            .iter()
            .map(|s| Stage::parse(s).ok_or_else(|| PipelineError::Config(format!("unknown stage '{s}'"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => default_stages,
    };
    let mut p = Pipeline::from_path(&common.config, common.out, common.seed, common.threads)?;
    let manifest = p.run_stages(&stages)?;
    for s in &manifest.stages {
        for c in &s.checks {
            let mark = if c.passed { "ok  " } else { "FAIL" };
            println!("[{}] {mark} {} {}", s.stage.name(), c.name, c.detail);
        }
    }
    Ok(manifest.stages.iter().all(|s| s.passed))
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
