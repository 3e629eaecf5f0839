//! `qprl`: generate, solve, bound and benchmark QP-Ratio instances.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "qprl",
    version,
    about = "QP-Ratio solvers, relaxations, oracles and generators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Run one algorithm and print a CSV row.
    Solve(SolveArgs),
    /// Exact optimum by enumeration (refuses above the cap).
    Exact(ExactArgs),
    /// Relaxation bound: eigenvalue, normalized eigenvalue or SDP.
    Relax(RelaxArgs),
    /// Map a k-AND, Unique Games or QP-Intermediate instance forward.
    Reduce(ReduceArgs),
    /// Check feasibility of a Gram solution file.
    Certify(CertifyArgs),
    /// Run a benchmark grid and write CSV (and optionally SVG).
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Star,
    Random,
    BipartiteGap,
    Planted,
    LevelGraph,
    ApxGadget,
    Kand,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    /// Leaves of the star.
    #[arg(long)]
    leaves: Option<usize>,
    /// Size parameter (vertices, right side, or variables).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Edge density for `random`.
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    /// Level-graph parameter, `1/M`.
    #[arg(long)]
    eps: Option<f64>,
    /// MaxCut graph for `apx-gadget` as `u-v,u-v,...`; defaults to the n-cycle.
    #[arg(long)]
    edges: Option<String>,
    /// Clauses for `kand` (default 4n).
    #[arg(long)]
    m: Option<usize>,
    /// Clause width for `kand`.
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Planted clause fraction for `kand`; 0 disables planting.
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Output path; stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// trivial, general, bipartite, trevisan, psd or high-opt.
    #[arg(long)]
    algo: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform diagonal for `psd`; the smallest PSD shift when omitted.
    #[arg(long)]
    psd_shift: Option<f64>,
    /// Degree filter for `high-opt`.
    #[arg(long)]
    eps: Option<f64>,
    /// Largest n scored against the exact optimum instead of the eigenvalue bound.
    #[arg(long, default_value_t = 10)]
    oracle_cap: usize,
    /// Append the row to this CSV file (header written when it is new).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Record wall-clock time in `runtime_ms`.
    #[arg(long)]
    timing: bool,
    /// Also print the assignment as JSON on stderr.
    #[arg(long)]
    show_assignment: bool,
}

#[derive(Args)]
struct ExactArgs {
    instance: PathBuf,
    /// Optimise the degree-normalized objective.
    #[arg(long)]
    normalized: bool,
    #[arg(long, default_value_t = qpratio::exact::DEFAULT_CAP)]
    cap: usize,
    /// Grid accuracy for QP-Intermediate files.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Eig,
    NormalizedEig,
    Sdp,
}

#[derive(Args)]
struct RelaxArgs {
    instance: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Write the SDP vectors to this file.
    #[arg(long)]
    gram_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Kand,
    Ug,
    Intermediate,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    from: Source,
    input: PathBuf,
    /// k-AND denominator weight.
    #[arg(long, default_value_t = 0.25)]
    alpha: f64,
    /// k-AND replication count; `round(alpha m / n)` when omitted.
    #[arg(long)]
    w: Option<usize>,
    /// QP-Intermediate to QP-Ratio accuracy.
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long, default_value_t = 100_000)]
    max_vertices: usize,
    #[arg(long, default_value_t = qpratio::hardness::UG_MAX_R)]
    max_r: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    instance: PathBuf,
    gram: PathBuf,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct BenchArgs {
    config: PathBuf,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// SVG plot of mean ratio against n.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> commands::Result<()> {
        commands::configure_threads()?;
        match cli.cmd {
            Cmd::Gen(a) => commands::gen(a),
            Cmd::Solve(a) => commands::solve(a),
            Cmd::Exact(a) => commands::exact(a),
            Cmd::Relax(a) => commands::relax(a),
            Cmd::Reduce(a) => commands::reduce(a),
            Cmd::Certify(a) => commands::certify(a),
            Cmd::Bench(a) => commands::bench(a),
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("qprl: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("qprl: internal error");
            ExitCode::from(1)
        }
    }
}
