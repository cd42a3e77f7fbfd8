use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<econ_attractors::Error> for CliError {
    fn from(e: econ_attractors::Error) -> Self {
        use econ_attractors::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidParams(_) | E::Parse(_) => CliError::Config(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "econ-attractors", version, about = "Hidden and self-excited attractors of a 3-D economic model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; defaults are used for anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fractional order, 1 for the integer-order system.
    #[arg(long, global = true)]
    order: Option<f64>,
    #[arg(long = "param-a", global = true, allow_hyphen_values = true)]
    param_a: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria, eigenvalues and saddle classes over a grid of `a`.
    Equilibria,
    /// Integrate each initial condition; trajectories and signatures.
    Run,
    /// Largest Lyapunov exponent for each initial condition.
    Mle,
    /// Bifurcation diagram and coexistence windows.
    Sweep {
        /// a, a-zoom, a-zoom-d, q or q-0.985; replaces the configured
        /// sweep except for its initial conditions.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Basins on lattices and equilibrium spheres, with the hidden or
    /// self-excited verdict.
    Basin,
    /// Every reference case: registries, exponents, verdicts and basins.
    Table1,
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(q) = cli.order {
        cfg.order_q = q;
    }
    if let Some(a) = cli.param_a {
        cfg.system.a = a;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Equilibria => commands::equilibria(&cfg, cli.param_a.is_some()),
        Command::Run => commands::run(&cfg),
        Command::Mle => commands::mle(&cfg),
        Command::Sweep { preset } => commands::sweep(&cfg, preset.as_deref()),
        Command::Basin => commands::basin(&cfg),
        Command::Table1 => commands::table1(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
