//! Command-line front end: `optimize`, `verify`, `compare` and `sweep`.
//!
//! Every command writes its artifacts plus a `manifest.json` into the output
//! directory (`--out`, else `$NELSON_STA_OUT`, else the working directory).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nelson_sta::{CostKind, Error, PhysConsts};

pub mod commands;
pub mod output;
pub mod protocol_file;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "NELSON_STA_OUT";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_VERIFICATION: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Usage(String),
    Convergence(String),
    Verification(String),
    Io(String),
    Parse(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Io(_) | CliError::Parse(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Convergence(m) => write!(f, "convergence failure: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::NoConvergence { .. }
            | Error::SingularityTrap { .. }
            | Error::Singular { .. }
            | Error::Infeasible { .. }
            | Error::IntegrationFailure { .. } => CliError::Convergence(msg),
            Error::Domain(_)
            | Error::Shape(_)
            | Error::InconsistentConstants { .. }
            | Error::InvalidOption(_) => CliError::Usage(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nelson-sta",
    version,
    about = "Optimal shortcut protocols for a trapped quantum particle"
)]
pub struct Cli {
    #[command(flatten)]
    pub units: UnitArgs,

    /// Output directory; defaults to $NELSON_STA_OUT, then the working directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Units {
    /// hbar = gamma = 1, m = 0.5, D = 1.
    #[value(name = "paper", alias = "natural")]
    Natural,
    Custom,
}

#[derive(Debug, Clone, Args)]
pub struct UnitArgs {
    /// Unit system; `custom` takes --hbar, --mass and --gamma.
    #[arg(long, global = true, value_enum, default_value_t = Units::Natural)]
    pub units: Units,
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Only accepted when equal to hbar / (2 m).
    #[arg(long, global = true)]
    pub diffusion: Option<f64>,
}

impl UnitArgs {
    pub fn consts(&self) -> Result<PhysConsts, CliError> {
        let c = match self.units {
            Units::Natural => {
                if self.hbar.is_some() || self.mass.is_some() || self.gamma.is_some() {
                    return Err(CliError::Usage(
                        "--hbar/--mass/--gamma need --units custom".into(),
                    ));
                }
                PhysConsts::natural_units()
            }
            Units::Custom => {
                let (Some(h), Some(m), Some(g)) = (self.hbar, self.mass, self.gamma) else {
                    return Err(CliError::Usage(
                        "--units custom needs --hbar, --mass and --gamma".into(),
                    ));
                };
                PhysConsts::quantum(h, m, g)?
            }
        };
        if let Some(d) = self.diffusion {
            if (d - c.d).abs() > 1e-12 * c.d {
                return Err(Error::InconsistentConstants {
                    diffusion: d,
                    expected: c.d,
                }
                .into());
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CostArg {
    Energy,
    Phase,
    Work,
}

impl From<CostArg> for CostKind {
    fn from(c: CostArg) -> Self {
        match c {
            CostArg::Energy => CostKind::Energy,
            CostArg::Phase => CostKind::Phase,
            CostArg::Work => CostKind::Work,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Ermakov,
    Nelson,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Variance grid size.
    #[arg(long, default_value_t = 2001)]
    pub grid: usize,
    #[arg(long, default_value_t = 50_000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal protocol and write it on variance and time grids.
    Optimize {
        #[arg(long, value_enum)]
        cost: CostArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        si: f64,
        #[arg(long)]
        sf: f64,
        #[command(flatten)]
        solver: SolverArgs,
        /// Samples in protocol_t.csv.
        #[arg(long, default_value_t = 2001)]
        n_time: usize,
    },
    /// Check a protocol_t.csv by Ermakov integration and/or a Nelson ensemble.
    Verify {
        #[arg(long)]
        protocol: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Ermakov)]
        method: Method,
        #[arg(long, default_value_t = 100_000)]
        particles: usize,
        /// Monte Carlo step; defaults to min(gamma/|kbar|max/10, duration/2000).
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        checkpoints: usize,
        /// Ermakov endpoint tolerance on |s - s_f| and |sdot|.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Optimal family versus duration-matched quintic shortcuts.
    Compare {
        #[arg(long, value_enum)]
        cost: CostArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        mu_list: Vec<f64>,
        #[arg(long)]
        si: f64,
        #[arg(long)]
        sf: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// One solve per mu on a log-spaced range `lo:hi:steps`.
    Sweep {
        #[arg(long, value_enum)]
        cost: CostArg,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        mu_range: String,
        #[arg(long)]
        si: f64,
        #[arg(long)]
        sf: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

impl Cli {
    fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Parses `args` (program name first) and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("nelson-sta: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command and returns a one-line summary.
pub fn execute(cli: &Cli) -> Result<String, CliError> {
    let c = cli.units.consts()?;
    let out = cli.out_dir();
    match &cli.command {
        Command::Optimize {
            cost,
            lambda,
            mu,
            si,
            sf,
            solver,
            n_time,
        } => commands::optimize(
            &c,
            &out,
            (*cost).into(),
            *lambda,
            *mu,
            *si,
            *sf,
            solver,
            *n_time,
        ),
        Command::Verify {
            protocol,
            method,
            particles,
            dt,
            seed,
            checkpoints,
            tolerance,
        } => {
            let opts = commands::VerifyOptions {
                method: *method,
                particles: *particles,
                dt: *dt,
                seed: *seed,
                checkpoints: *checkpoints,
                tolerance: *tolerance,
            };
            commands::verify(&c, &out, protocol, &opts)
        }
        Command::Compare {
            cost,
            lambda,
            mu_list,
            si,
            sf,
            solver,
        } => commands::compare(&c, &out, (*cost).into(), *lambda, mu_list, *si, *sf, solver),
        Command::Sweep {
            cost,
            lambda,
            mu_range,
            si,
            sf,
            solver,
        } => {
            let mus = commands::parse_mu_range(mu_range)?;
            commands::sweep(&c, &out, (*cost).into(), *lambda, &mus, *si, *sf, solver)
        }
    }
}
