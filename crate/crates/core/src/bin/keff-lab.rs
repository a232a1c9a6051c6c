use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use keff_lab::geometry::ElementKind;
use keff_lab::lab::config::{parse_levels, LabConfig};
use keff_lab::lab::drivers::{self, RunOptions};
use keff_lab::Error;

#[derive(Parser)]
#[command(
    name = "keff-lab",
    version,
    about = "k-eigenvalue ladders and block-encoding checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble L, A and C and dump them as triplets.
    Assemble(Flags),
    /// Solve one level.
    Eig(Flags),
    /// Convergence ladder with order estimates.
    Ladder(Flags),
    /// Order estimates from a ladder CSV.
    Order {
        /// CSV with header level,N,lambda.
        input: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// FLFT identity and BPX norm checks.
    BpxVerify(Flags),
    /// Oracle, LCU and Hamiltonian-chain checks.
    BlockencVerify(Flags),
    /// Coarse seed, hierarchical state preparation and emulated QPE.
    Stateprep(Flags),
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inclusive range `a..b`.
    #[arg(long)]
    levels: Option<String>,
    #[arg(long)]
    dmax: Option<f64>,
    #[arg(long)]
    element: Option<ElementKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed_level: Option<u32>,
    #[arg(long)]
    epsilon: Option<f64>,
}

impl Flags {
    fn options(self) -> Result<RunOptions, Error> {
        Ok(RunOptions {
            config: self.config.as_deref().map(LabConfig::load).transpose()?,
            levels: self.levels.as_deref().map(parse_levels).transpose()?,
            d_max: self.dmax,
            element: self.element,
            tolerance: self.tol,
            out: self.out,
            workers: self.workers,
            seed_level: self.seed_level,
            epsilon: self.epsilon,
        })
    }
}

fn run(cmd: Command) -> Result<String, Error> {
    match cmd {
        Command::Assemble(f) => drivers::run_assemble(&f.options()?),
        Command::Eig(f) => drivers::run_eig(&f.options()?),
        Command::Ladder(f) => drivers::run_ladder_cmd(&f.options()?),
        Command::Order { input, flags } => drivers::run_order(&flags.options()?, &input),
        Command::BpxVerify(f) => drivers::run_bpx_verify(&f.options()?),
        Command::BlockencVerify(f) => drivers::run_blockenc_verify(&f.options()?),
        Command::Stateprep(f) => drivers::run_stateprep(&f.options()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("keff-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
