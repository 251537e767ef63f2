//! Command-line benchmark for the sparse MTTKRP kernel variants.
//!
//! Loads or synthesizes a sparse tensor, times the selected kernel variants
//! across thread counts (inside full CP-ALS iterations by default, or as
//! bare kernel sweeps with `--mttkrp-only`), and writes a CSV or JSON
//! report of effective bandwidth against the machine's STREAM-triad peak.
//!
//! Examples:
//!
//! ```text
//! cpten-bench --dims 300x400x500 --nnz 100000 --rank 16 --iters 10
//! cpten-bench --input tensor.tns --variant perm --variant atomic \
//!     --threads 1 --threads 8 --mttkrp-only --format json --out report.json
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use cpten::bench::{
    emit_report, run_benchmark, write_report, BenchConfig, BenchInput, ReportFormat,
};
use cpten::{Error, MttkrpVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Atomic,
    Blocked,
    Perm,
}

impl From<VariantArg> for MttkrpVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Atomic => MttkrpVariant::Atomic,
            VariantArg::Blocked => MttkrpVariant::Blocked,
            VariantArg::Perm => MttkrpVariant::Permuted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "cpten-bench",
    about = "Benchmark sparse MTTKRP kernel variants inside CP-ALS",
    version
)]
struct Cli {
    /// Read the tensor from a text file: one nonzero per line, 1-based
    /// coordinates, value last.
    #[arg(long, value_name = "PATH", conflicts_with_all = ["dims", "nnz"])]
    input: Option<PathBuf>,

    /// Synthesize a random tensor with these mode lengths, e.g. 300x400x500.
    #[arg(long, value_name = "I1xI2x...", requires = "nnz")]
    dims: Option<String>,

    /// Number of distinct random nonzeros for --dims.
    #[arg(long, value_name = "N", requires = "dims")]
    nnz: Option<usize>,

    /// Seed for the synthetic tensor and the model's initial guess.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Decomposition rank.
    #[arg(long, default_value_t = 16)]
    rank: usize,

    /// Timed iterations (CP-ALS iterations, or kernel repetitions with
    /// --mttkrp-only).
    #[arg(long, default_value_t = 10)]
    iters: usize,

    /// Kernel variant to time; repeat the flag to compare several
    /// (default: all three).
    #[arg(long = "variant", value_name = "VARIANT")]
    variants: Vec<VariantArg>,

    /// Thread count to time; repeat the flag to compare several
    /// (default: all logical CPUs).
    #[arg(long = "threads", value_name = "T")]
    threads: Vec<usize>,

    /// Time bare MTTKRP sweeps instead of full CP-ALS iterations.
    #[arg(long)]
    mttkrp_only: bool,

    /// Skip the STREAM-triad measurement and normalize against this peak
    /// (GB/s).
    #[arg(long, value_name = "GBPS")]
    peak_gbps: Option<f64>,

    /// Bytes per value in the bandwidth and storage models.
    #[arg(long, default_value_t = 8, value_parser = parse_byte_width)]
    float_bytes: u64,

    /// Bytes per coordinate in the bandwidth and storage models.
    #[arg(long, default_value_t = 8, value_parser = parse_byte_width)]
    ordinal_bytes: u64,

    /// Write the report to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

fn parse_byte_width(s: &str) -> Result<u64, String> {
    match s {
        "4" => Ok(4),
        "8" => Ok(8),
        _ => Err(format!("byte width must be 4 or 8, got {s:?}")),
    }
}

fn parse_dims(spec: &str) -> cpten::Result<Vec<usize>> {
    let dims = spec
        .split(['x', 'X'])
        .map(|token| {
            token.parse::<usize>().map_err(|_| {
                Error::InvalidConfig(format!(
                    "invalid mode length {token:?} in --dims {spec:?}"
                ))
            })
        })
        .collect::<cpten::Result<Vec<usize>>>()?;
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "--dims {spec:?} must list positive mode lengths"
        )));
    }
    Ok(dims)
}

fn run(cli: Cli) -> cpten::Result<()> {
    let input = match (&cli.input, &cli.dims) {
        (Some(path), _) => BenchInput::File(path.clone()),
        (None, Some(spec)) => BenchInput::Synthetic {
            dims: parse_dims(spec)?,
            nnz: cli.nnz.expect("clap enforces --nnz with --dims"),
            seed: cli.seed,
        },
        (None, None) => {
            return Err(Error::InvalidConfig(
                "provide --input FILE or --dims I1xI2x... with --nnz N".into(),
            ));
        }
    };

    let mut config = BenchConfig::new(input);
    config.rank = cli.rank;
    config.iters = cli.iters;
    config.mttkrp_only = cli.mttkrp_only;
    config.peak_gbps = cli.peak_gbps;
    config.float_bytes = cli.float_bytes;
    config.ordinal_bytes = cli.ordinal_bytes;
    config.model_seed = cli.seed;
    if !cli.variants.is_empty() {
        config.variants = cli.variants.iter().map(|&v| v.into()).collect();
    }
    config.threads = if cli.threads.is_empty() {
        vec![std::thread::available_parallelism().map_or(1, |n| n.get())]
    } else {
        cli.threads.clone()
    };

    let report = run_benchmark(&config)?;
    eprintln!(
        "peak bandwidth: {:.2} GB/s ({} rows)",
        report.peak_gbps,
        report.rows.len()
    );
    match &cli.out {
        Some(path) => {
            emit_report(&report, cli.format.into(), path)?;
            eprintln!("report written to {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            write_report(&report, cli.format.into(), stdout.lock())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
