//! Experiment runner: generate robot data, fit a model by counting, decode,
//! score and time the length-distribution pass.
//!
//! Every command is deterministic given its flags. Wall-clock timings are
//! kept out of the primary output files and written to a `.meta.json`
//! sidecar next to them.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use compressed_inference::datagen::{OnBlock, DEFAULT_MOVE_PROB};
use compressed_inference::{Error, Normalization};

mod commands;

pub use commands::{
    cmd_bench, cmd_evaluate, cmd_fit, cmd_gen_robot, cmd_infer, BenchRow, DatasetMeta, Diagnostics, EntropyRange,
    FitSummary, InferSummary, MethodReport, PredictionRecord,
};

#[derive(Debug, Parser)]
#[command(
    name = "cinfer",
    version,
    about = "Compressed-sequence inference for linear-chain models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate labeled grid-world robot traces.
    GenRobot(GenRobotArgs),
    /// Estimate a model from labeled data by counting.
    Fit(FitArgs),
    /// Predict compressed state sequences.
    Infer(InferArgs),
    /// Score predictions against labeled data.
    Evaluate(EvaluateArgs),
    /// Time the length-distribution pass over a list of c_max values.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenRobotArgs {
    /// World map (characters b, g, y, r, #). Defaults to the built-in world.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Number of sequences.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub min_len: usize,
    #[arg(long, default_value_t = 300)]
    pub max_len: usize,
    /// Sensor accuracy in percent.
    #[arg(long, default_value_t = 70.0)]
    pub accuracy: f64,
    #[arg(long, default_value_t = DEFAULT_MOVE_PROB)]
    pub move_prob: f64,
    #[arg(long, value_enum, default_value_t = OnBlockArg::Stay)]
    pub on_block: OnBlockArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Additive smoothing for every count.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// One or more methods, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "compressed")]
    pub method: Vec<Method>,
    /// Largest compressed length considered; defaults to min(T, 128) and is
    /// capped at T.
    #[arg(long)]
    pub cmax: Option<usize>,
    #[arg(long, value_enum, default_value_t = NormArg::Exact)]
    pub norm: NormArg,
    /// Enumeration cap for the oracle method.
    #[arg(long, default_value_t = 10_000_000)]
    pub oracle_budget: u64,
    /// Recorded in the metadata sidecar.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Labeled dataset the predictions were made on.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Recorded in every report record.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
    pub cmax: Vec<usize>,
    #[arg(long, value_enum, default_value_t = NormArg::Truncated)]
    pub norm: NormArg,
    /// Repetitions per c_max; the median is reported.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    /// Optional line-record copy of the table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Viterbi path, compressed afterwards.
    Viterbi,
    /// Per-position posterior argmax, compressed afterwards.
    Marginal,
    /// Most probable length, then per-position compressed marginals.
    Compressed,
    /// The compressed decoder by brute-force enumeration.
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Viterbi => "viterbi",
            Method::Marginal => "marginal",
            Method::Compressed => "compressed",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Exact,
    Truncated,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Exact => Normalization::Exact,
            NormArg::Truncated => Normalization::Truncated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnBlockArg {
    Stay,
    Retry,
}

impl From<OnBlockArg> for OnBlock {
    fn from(b: OnBlockArg) -> Self {
        match b {
            OnBlockArg::Stay => OnBlock::Stay,
            OnBlockArg::Retry => OnBlock::Retry,
        }
    }
}

/// Process exit status for an error: 2 for bad arguments or input, 3 for
/// I/O failures, 4 for the oracle budget.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 3,
        Error::ResourceLimit { .. } => 4,
        Error::InvalidArgument(_) | Error::UndefinedConditional(_) | Error::Format { .. } => 2,
    }
}

/// `<path>.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// Runs one command, printing its console summary to stdout.
pub fn run(cli: &Cli) -> compressed_inference::Result<()> {
    match &cli.command {
        Command::GenRobot(a) => {
            let meta = cmd_gen_robot(a)?;
            println!(
                "wrote {} sequences over {} states to {}",
                meta.n,
                meta.states.len(),
                a.out.display()
            );
        }
        Command::Fit(a) => {
            let s = cmd_fit(a)?;
            print!("{s}");
            if s.neg_inf_entries > 0 {
                eprintln!(
                    "warning: model has {} -inf entries (events never seen in the data)",
                    s.neg_inf_entries
                );
            }
        }
        Command::Infer(a) => {
            let s = cmd_infer(a)?;
            println!("wrote {} predictions to {}", s.records, a.out.display());
            if s.adjacent_duplicates > 0 {
                println!(
                    "{} compressed predictions contain adjacent duplicates",
                    s.adjacent_duplicates
                );
            }
        }
        Command::Evaluate(a) => {
            let reports = cmd_evaluate(a)?;
            print!("{}", commands::report_table(&reports));
        }
        Command::Bench(a) => {
            let rows = cmd_bench(a)?;
            print!("{}", commands::bench_table(&rows));
        }
    }
    Ok(())
}
