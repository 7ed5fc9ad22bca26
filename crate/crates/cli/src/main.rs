//! `hopcirc`: compile attention constructs to boolean netlists with depth
//! reports, verify netlists against the reference semantics, generate
//! decision-problem instances, and drive retrieval, energy, and
//! word-problem experiments.
//!
//! Exit codes: 0 success, 1 verification or experiment failure, 2 usage
//! error. Every command is deterministic given its flags; all randomness
//! flows from explicit seeds.

mod circuits;
mod experiments;
mod instances;
mod reports;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// A command failure with its process exit code.
#[derive(Debug)]
pub enum AppError {
    /// Bad invocation or malformed user input: exit 2.
    Usage(String),
    /// The work itself failed (divergence, mismatch, I/O): exit 1.
    Failure(String),
}

impl AppError {
    fn usage(msg: impl Into<String>) -> AppError {
        AppError::Usage(msg.into())
    }
    fn failure(msg: impl Into<String>) -> AppError {
        AppError::Failure(msg.into())
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> AppError {
        AppError::Failure(format!("i/o error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "hopcirc",
    version,
    about = "Threshold-circuit compiler and verifier for fixed-precision attention networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower a construct to a netlist; write it with a depth report.
    Compile(CompileArgs),
    /// Re-evaluate a netlist against the reference semantics.
    Verify(VerifyArgs),
    /// Measure a construct's depth and check the closed-form formula.
    Depth(DepthArgs),
    /// Generate decision-problem instances as JSON lines.
    Gen(GenArgs),
    /// Run one-step retrieval diagnostics on random patterns.
    Retrieve(RetrieveArgs),
    /// Run greedy chain-of-thought decoding on an instance or prompt.
    CotRun(CotRunArgs),
    /// Run a named experiment and write CSV/JSON results.
    Experiment(ExperimentArgs),
    /// Summarize report files and re-check their config hashes.
    Report(ReportArgs),
}

/// Shape and seed bundle shared by compile/depth.
#[derive(Args, Clone)]
pub struct ConstructArgs {
    /// Construct tag: matmul | attn | hop_layer | fnn | mhn | kattn | khop | khn.
    #[arg(long)]
    construct: Option<String>,
    /// Load a network description file instead of generating one.
    #[arg(long, conflicts_with = "construct")]
    desc: Option<PathBuf>,
    /// Token count (rows of the state matrix).
    #[arg(short = 'n', long, default_value_t = 2)]
    n: usize,
    /// Model dimension.
    #[arg(short = 'd', long, default_value_t = 2)]
    d: usize,
    /// Blocks in a stacked construct (mhn, khn).
    #[arg(short = 'm', long, default_value_t = 1)]
    m: usize,
    /// Precision in bits.
    #[arg(short = 'p', long, default_value_t = 4)]
    p: u32,
    /// Seed for the generated weights.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct CompileArgs {
    #[command(flatten)]
    construct: ConstructArgs,
    /// Netlist output path.
    #[arg(short = 'o', long, default_value = "out.netlist")]
    out: PathBuf,
    /// Network-description sidecar path (default: <out>.desc.json).
    #[arg(long)]
    desc_out: Option<PathBuf>,
    /// Depth-report path (default: <out>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Netlist to verify.
    netlist: PathBuf,
    /// Network-description sidecar the netlist was compiled from.
    #[arg(long)]
    desc: PathBuf,
    /// Number of random input batches to check.
    #[arg(long, default_value_t = 10)]
    random: usize,
    /// Seed for the random inputs.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fixture file with one input matrix (repeat once per input slot);
    /// replaces the random inputs.
    #[arg(long = "input")]
    inputs: Vec<PathBuf>,
    /// Verification-report path (default: none).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DepthArgs {
    #[command(flatten)]
    construct: ConstructArgs,
    /// Depth-report path (default: none, stdout only).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Problem family: connectivity | tree_iso | s5_word.
    #[arg(long)]
    family: String,
    /// Instances to generate.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Instance size: vertices, nodes, or word length.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Base seed; instance i uses seed + i.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Color the tree nodes (tree_iso only).
    #[arg(long, default_value_t = false)]
    colored: bool,
    /// Output path for the JSON lines (default: stdout).
    #[arg(short = 'o', long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RetrieveArgs {
    /// Pattern dimension.
    #[arg(short = 'd', long, default_value_t = 8)]
    dim: usize,
    /// Stored pattern count.
    #[arg(long, default_value_t = 4)]
    patterns: usize,
    /// Inverse temperature (integer).
    #[arg(long, default_value_t = 32)]
    beta: i64,
    /// Precision in bits.
    #[arg(short = 'p', long, default_value_t = 24)]
    p: u32,
    /// Trials.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Euclidean norm of the query noise.
    #[arg(long, default_value_t = 0.099)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-trial CSV output path (default: none).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CotRunArgs {
    /// Model parameters (JSON description).
    #[arg(long)]
    params: PathBuf,
    /// Problem instance file (JSON); its tokens become the prompt.
    #[arg(long, conflicts_with = "prompt")]
    instance: Option<PathBuf>,
    /// Space-separated prompt tokens, instead of an instance file.
    #[arg(long)]
    prompt: Option<String>,
    /// Decoding steps.
    #[arg(long, default_value_t = 4)]
    steps: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment: retrieval_sweep | energy_trace | s5_harness | oracle_crosscheck.
    name: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Trials (per sweep point where applicable).
    #[arg(long)]
    trials: Option<usize>,
    /// Instance size for the word-problem experiments.
    #[arg(long, default_value_t = 8)]
    size: usize,
    /// Model parameters for s5_harness (default: seeded random model).
    #[arg(long)]
    params: Option<PathBuf>,
    /// Directory for CSV/JSON outputs.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report files to summarize.
    files: Vec<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Compile(a) => circuits::compile(&a.construct, &a.out, a.desc_out, a.report),
        Cmd::Verify(a) => {
            circuits::verify(&a.netlist, &a.desc, a.random, a.seed, &a.inputs, a.report)
        }
        Cmd::Depth(a) => circuits::depth(&a.construct, a.report),
        Cmd::Gen(a) => {
            instances::gen(&a.family, a.count, a.size, a.seed, a.colored, a.out.as_deref())
        }
        Cmd::Retrieve(a) => experiments::retrieve(
            a.dim, a.patterns, a.beta, a.p, a.trials, a.noise, a.seed, a.csv.as_deref(),
        ),
        Cmd::CotRun(a) => {
            instances::cot_run(&a.params, a.instance.as_deref(), a.prompt.as_deref(), a.steps)
        }
        Cmd::Experiment(a) => experiments::run(
            &a.name, a.seed, a.trials, a.size, a.params.as_deref(), &a.out_dir,
        ),
        Cmd::Report(a) => reports::summarize(&a.files),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(AppError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
