//! `pbt`: batch front end for the port-based teleportation toolkit.
//!
//! Exit codes: 0 when every check passes, 1 when a verification fails,
//! 2 for usage and input errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pbt_core::optimizer::ResourceMode;
use pbt_core::tolerances::Tolerances;

mod commands;
mod manifest;
mod output;

#[derive(Debug, Parser)]
#[command(name = "pbt", version, about = "Simulate, verify and optimize port-based teleportation protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Number of Haar-random inputs.
    #[arg(long, global = true, default_value_t = 20)]
    pub samples: usize,
    /// Override a tolerance, e.g. `--tolerance fidelity=1e-8`. Repeatable.
    #[arg(long = "tolerance", global = true, value_name = "NAME=VALUE")]
    pub tolerances: Vec<String>,
    /// Output directory; without it the main report goes to stdout.
    #[arg(long, global = true, env = "PBT_OUT_DIR")]
    pub out: Option<PathBuf>,
    /// Run independent sweep items (inputs, ports, table cells) in parallel.
    #[arg(long, global = true)]
    pub parallel: bool,
    /// Record the wall-clock time in the manifest.
    #[arg(long, global = true)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Builtin {
    Bell,
}

#[derive(Debug, Clone, Args)]
pub struct ProtocolSource {
    /// Protocol JSON file.
    #[arg(long, conflicts_with = "builtin")]
    pub protocol: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// Ports of the built-in protocol.
    #[arg(long, default_value_t = 1)]
    pub ports: usize,
    /// Qubits per port of the built-in protocol.
    #[arg(long, default_value_t = 1)]
    pub qubits: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ResourceArg {
    /// `N` maximally entangled pairs.
    Fixed,
    /// Optimize the resource as well.
    Joint,
}

impl From<ResourceArg> for ResourceMode {
    fn from(r: ResourceArg) -> Self {
        match r {
            ResourceArg::Fixed => ResourceMode::Fixed,
            ResourceArg::Joint => ResourceMode::Joint,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Branch probabilities and teleportation fidelities for given inputs.
    Simulate {
        #[command(flatten)]
        source: ProtocolSource,
        /// `haar` (seeded), `basis:K`, or a JSON list of `[re, im]` amplitudes.
        #[arg(long, default_value = "haar")]
        psi: String,
    },
    /// Input independence, port-state decomposition and no-cloning suites.
    Verify {
        #[command(flatten)]
        source: ProtocolSource,
    },
    /// Emit the Pauli-twirled protocol and its port-marginal report.
    Prime {
        #[command(flatten)]
        source: ProtocolSource,
    },
    /// Exact superdense-coding chain plus a Monte Carlo cross-check.
    AuditSignaling {
        #[command(flatten)]
        source: ProtocolSource,
        /// Monte Carlo rounds per port.
        #[arg(long, default_value_t = 100_000)]
        rounds: usize,
    },
    /// Maximize success probability with the SDP solver.
    Optimize {
        #[arg(long, default_value_t = 1)]
        qubits: usize,
        #[arg(long, default_value_t = 2)]
        ports: usize,
        #[arg(long, value_enum, default_value = "joint")]
        resource: ResourceArg,
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// CSV of the success bound over an (n, N) grid.
    BoundTable {
        /// Only this n.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 2)]
        max_n: usize,
        #[arg(long, default_value_t = 5)]
        max_ports: usize,
        /// Fill the optimizer column for cells within the solver's size limit.
        #[arg(long)]
        optimize: bool,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad usage or input: exit 2.
    Input(String),
    /// A verification could not be completed because its premise failed: exit 1.
    Failed(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }
}

impl From<pbt_core::Error> for CliError {
    fn from(e: pbt_core::Error) -> Self {
        match e {
            pbt_core::Error::ChainPrecondition(_) => Self::Failed(e.to_string()),
            _ => Self::Input(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Input(e.to_string())
    }
}

pub struct Context {
    pub common: Common,
    pub tolerances: Tolerances,
    pub overrides: BTreeMap<String, f64>,
}

fn context(common: Common) -> Result<Context, CliError> {
    let mut tolerances = Tolerances::default();
    let mut overrides = BTreeMap::new();
    for spec in &common.tolerances {
        let (name, value) = tolerances.apply_override(spec)?;
        overrides.insert(name, value);
    }
    Ok(Context { common, tolerances, overrides })
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let ctx = context(cli.common)?;
    match cli.command {
        Command::Simulate { source, psi } => commands::simulate(&ctx, &source, &psi),
        Command::Verify { source } => commands::verify(&ctx, &source),
        Command::Prime { source } => commands::prime(&ctx, &source),
        Command::AuditSignaling { source, rounds } => commands::audit_signaling(&ctx, &source, rounds),
        Command::Optimize { qubits, ports, resource, max_iterations } => {
            commands::optimize(&ctx, qubits, ports, resource.into(), max_iterations)
        }
        Command::BoundTable { n, max_n, max_ports, optimize } => {
            commands::bound_table(&ctx, n, max_n, max_ports, optimize)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Failed(msg)) => {
            eprintln!("pbt: verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Input(msg)) => {
            eprintln!("pbt: {msg}");
            ExitCode::from(2)
        }
    }
}
