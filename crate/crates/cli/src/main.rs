//! `ccm` — command-line front end for the cyclic coordinatewise
//! minimization solvers.
//!
//! Three subcommands assemble a problem from plain-text files, run the
//! solver over one or more penalty weights (in parallel when given a list),
//! and leave behind a solution, per-sweep diagnostics as CSV, and a
//! certification record per run. Exit status: 0 when every run converged and
//! certified, 2 when any run stopped short or failed certification, 1 on
//! input or usage errors.

mod app;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "ccm",
    version,
    about = "Cyclic coordinatewise minimization for l1-penalized convex objectives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparse inverse-covariance estimation from observations or a covariance
    Concord(ConcordArgs),
    /// L1-penalized logistic regression from a feature matrix and +/-1 labels
    Logistic(LogisticArgs),
    /// Quadratic-plus-log-barrier template on an explicit design matrix
    F2Generic(F2Args),
}

#[derive(Args)]
struct ConcordArgs {
    /// Input matrix file
    input: PathBuf,
    /// How to read the input: raw observations (rows) or a covariance matrix
    #[arg(long, value_enum, default_value_t = InputKind::Data)]
    input_kind: InputKind,
    /// Magnitude above which an off-diagonal entry counts as an edge
    #[arg(long, default_value_t = 1e-8)]
    edge_threshold: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct LogisticArgs {
    /// Feature matrix file, one observation per row
    data: PathBuf,
    /// Label vector file, entries +1 or -1
    labels: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct F2Args {
    /// Design matrix file
    matrix: PathBuf,
    /// "all" or a 1-based index list (e.g. "1,3,5") of penalized coordinates;
    /// the rest carry the log barrier
    #[arg(long, default_value = "all")]
    penalized: String,
    /// Starting point file; default is 1 on barrier coordinates, 0 elsewhere
    #[arg(long)]
    x0: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Penalty weight(s); a comma-separated list fans out to parallel runs
    /// with per-value output files
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    lambda: Vec<f64>,
    /// Stop once the Euclidean step between sweeps drops this low
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
    /// Also stop once the KKT residual inf-norm drops below this
    #[arg(long)]
    kkt_stop: Option<f64>,
    /// "natural" or a file holding a 1-based permutation of the coordinates
    #[arg(long, default_value = "natural", conflicts_with = "order_seed")]
    order: String,
    /// Shuffle the coordinate order once from this seed instead
    #[arg(long)]
    order_seed: Option<u64>,
    /// Trace granularity: per-sweep diagnostics CSV, plus a per-update file,
    /// or no trace files at all
    #[arg(long, value_enum, default_value_t = TraceLevel::Sweep)]
    trace: TraceLevel,
    /// Solve a second time under a different coordinate order and report the
    /// gap between the two answers
    #[arg(long)]
    compare_orders: bool,
    /// Input matrix format
    #[arg(long, value_enum, default_value_t = MatrixFormat::Csv)]
    format: MatrixFormat,
    /// Prefix for output files
    #[arg(long, default_value = "ccm")]
    out: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InputKind {
    Data,
    Covariance,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceLevel {
    Off,
    Sweep,
    Coordinate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MatrixFormat {
    Csv,
    MatrixMarket,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version arrive here too; only real usage errors
            // take the input-error exit status.
            let code = u8::from(err.use_stderr());
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match app::run(&cli.command) {
        Ok(app::Outcome::AllCertified) => ExitCode::SUCCESS,
        Ok(app::Outcome::SomeUncertified) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
