//! `eigenfem` command-line front end.
//!
//! Exit codes: 0 success (analyze: strict conditions hold), 2 analyze with
//! only weak conditions, 3 analyze with failed conditions, 1 I/O or
//! configuration error, 4 solver failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{RawConfig, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Solver(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(name = "eigenfem", version, about = "P1 finite-element eigenvalue toolkit with M-matrix mesh certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh conditions and matrix certificate; exit 0 strict, 2 weak, 3 fail.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Also write the assembled matrices in MatrixMarket format.
        #[arg(long)]
        matrix_market: bool,
    },
    /// Smallest-modulus eigenpairs and the principal-eigenpair property suite.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        matrix_market: bool,
    },
    /// Principal eigenvalue over a sequence of structured meshes.
    Converge {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Catalog name or path to a JSON descriptor.
    #[arg(long)]
    problem: String,
    /// mesh45, mesh135 or import.
    #[arg(long, default_value = "mesh45")]
    mesh: String,
    /// Mesh points per axis; a comma-separated list for converge.
    #[arg(long = "J")]
    j: Option<String>,
    /// Triangle .node file (with --mesh import).
    #[arg(long)]
    node: Option<PathBuf>,
    /// Triangle .ele file (with --mesh import).
    #[arg(long)]
    ele: Option<PathBuf>,
    /// Number of eigenpairs.
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// consistent or lumped.
    #[arg(long, default_value = "consistent")]
    mass: String,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Reference eigenvalue for converge (defaults to the catalog value).
    #[arg(long = "ref")]
    reference: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "eigenfem-out")]
    out: PathBuf,
}

impl Common {
    fn raw(self, command: &str) -> RawConfig {
        RawConfig {
            command: command.into(),
            problem: self.problem,
            mesh: self.mesh,
            j: self.j,
            node: self.node,
            ele: self.ele,
            k: self.k,
            mass: self.mass,
            tol: self.tol,
            reference: self.reference,
            out: self.out,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("EIGENFEM_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("EIGENFEM_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { common, matrix_market } => {
            commands::cmd_analyze(&RunConfig::validate(common.raw("analyze"))?, matrix_market)
        }
        Command::Solve { common, matrix_market } => {
            commands::cmd_solve(&RunConfig::validate(common.raw("solve"))?, matrix_market)
        }
        Command::Converge { common } => commands::cmd_converge(&RunConfig::validate(common.raw("converge"))?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("eigenfem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
