//! Benchmark harness: times the kernel variants, converts timings into an
//! effective memory bandwidth, and reports it against a measured machine
//! peak.
//!
//! The bandwidth model charges each stored nonzero its compulsory traffic
//! for one rank-`R` MTTKRP over a `d`-way tensor — `d * R` factor reads,
//! one value read, one output read-modify-write (2 accesses), and `d`
//! coordinate reads:
//!
//! ```text
//! bytes = ((d * R + 3) * float_bytes + d * ordinal_bytes) * nnz
//! ```
//!
//! Dividing by measured kernel seconds gives bytes per second; the report
//! expresses it in GB/s (1e9 bytes) and as a fraction of the STREAM-triad
//! peak, which bounds what any bandwidth-limited kernel can reach.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cpals::{cp_als, AlsOptions};
use crate::error::{Error, Result};
use crate::ktensor::KTensor;
use crate::mttkrp::{blocking_policy, mttkrp, MttkrpVariant, Profile};
use crate::sptensor::{build_perm, read_tns, SparseTensor};

/// Default total working-set size for the peak-bandwidth measurement.
pub const STREAM_DEFAULT_BYTES: usize = 256 << 20;

/// Default repetitions for the peak-bandwidth measurement.
pub const STREAM_DEFAULT_REPS: usize = 5;

/// Where the benchmark tensor comes from.
#[derive(Debug, Clone)]
pub enum BenchInput {
    /// A whitespace-separated text file (see [`read_tns`]).
    File(PathBuf),
    /// A uniformly random tensor generated in-process.
    Synthetic {
        dims: Vec<usize>,
        nnz: usize,
        seed: u64,
    },
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub input: BenchInput,
    /// Decomposition rank.
    pub rank: usize,
    /// Timed iterations: CP-ALS iterations, or per-mode kernel repetitions
    /// when `mttkrp_only` is set.
    pub iters: usize,
    /// Kernel variants to compare.
    pub variants: Vec<MttkrpVariant>,
    /// Thread counts to compare.
    pub threads: Vec<usize>,
    /// Time bare MTTKRP sweeps instead of full CP-ALS iterations.
    pub mttkrp_only: bool,
    /// Peak bandwidth in GB/s; `None` measures it with the STREAM triad.
    pub peak_gbps: Option<f64>,
    /// Bytes per value in the bandwidth and storage models.
    pub float_bytes: u64,
    /// Bytes per coordinate in the bandwidth and storage models.
    pub ordinal_bytes: u64,
    /// Seed for the model's random initial guess.
    pub model_seed: u64,
}

impl BenchConfig {
    /// Defaults: rank 16, 10 iterations, all variants, one thread, full
    /// CP-ALS timing, measured peak, 8-byte values and coordinates.
    pub fn new(input: BenchInput) -> Self {
        BenchConfig {
            input,
            rank: 16,
            iters: 10,
            variants: MttkrpVariant::ALL.to_vec(),
            threads: vec![1],
            mttkrp_only: false,
            peak_gbps: None,
            float_bytes: 8,
            ordinal_bytes: 8,
            model_seed: 0,
        }
    }
}

/// One `(variant, mode, threads)` measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub variant: MttkrpVariant,
    pub mode: usize,
    pub threads: usize,
    /// Timed iterations behind this row.
    pub iters: usize,
    /// Total seconds across all iterations of this mode's MTTKRP.
    pub seconds: f64,
    /// Effective bandwidth of one mean MTTKRP call, in GB/s.
    pub gbps: f64,
    /// `gbps` relative to the machine peak.
    pub peak_fraction: f64,
    /// One-time permutation build seconds (permuted variant only).
    pub sort_seconds: Option<f64>,
    /// Permutation build time over mean iteration time (permuted only).
    pub sort_ratio: Option<f64>,
    /// Tensor bytes without permutations.
    pub storage_base_bytes: u64,
    /// Tensor bytes including per-mode permutations.
    pub storage_perm_bytes: u64,
}

/// All rows of a run plus the peak they are normalized against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    /// STREAM-triad peak (or the override), in GB/s.
    pub peak_gbps: f64,
    pub rows: Vec<BenchRow>,
}

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidConfig(format!(
                "unknown format {other:?}; expected csv or json"
            ))),
        }
    }
}

/// Modelled bytes per second of one MTTKRP call that took `seconds`:
/// `((d * R + 3) * float_bytes + d * ordinal_bytes) * nnz / seconds`.
pub fn bandwidth_estimate(
    ndims: usize,
    rank: usize,
    nnz: usize,
    float_bytes: u64,
    ordinal_bytes: u64,
    seconds: f64,
) -> Result<f64> {
    if !(seconds > 0.0) {
        return Err(Error::InvalidConfig(
            "elapsed seconds must be positive".into(),
        ));
    }
    let per_nonzero = (ndims as u128 * rank as u128 + 3) * float_bytes as u128
        + ndims as u128 * ordinal_bytes as u128;
    Ok((per_nonzero * nnz as u128) as f64 / seconds)
}

/// One STREAM-triad bandwidth sample (bytes per second) per repetition.
///
/// Three arrays splitting `total_bytes` are allocated and `a = b + 3.0 * c`
/// is timed over the whole index space, counting three memory streams.
pub fn stream_triad_timings(
    total_bytes: usize,
    repetitions: usize,
    threads: usize,
) -> Result<Vec<f64>> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig(
            "at least one repetition is required".into(),
        ));
    }
    let n = (total_bytes / (3 * std::mem::size_of::<f64>())).max(1);
    let mut a = try_filled(n, 0.0)?;
    let b = try_filled(n, 1.5)?;
    let c = try_filled(n, 0.5)?;
    let alpha = 3.0;

    let bytes_per_pass = (3 * n * std::mem::size_of::<f64>()) as f64;
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let timer = Instant::now();
        triad(&mut a, &b, &c, alpha, threads);
        let seconds = timer.elapsed().as_secs_f64().max(1e-9);
        samples.push(bytes_per_pass / seconds);
    }
    // Defeat dead-store elimination across the timed region.
    std::hint::black_box(a.iter().sum::<f64>());
    Ok(samples)
}

/// Peak bandwidth in bytes per second: the best triad repetition, since
/// transient interference only ever lowers a sample.
pub fn measure_peak_bandwidth(
    total_bytes: usize,
    repetitions: usize,
    threads: usize,
) -> Result<f64> {
    let samples = stream_triad_timings(total_bytes, repetitions, threads)?;
    Ok(best_sample(&samples))
}

/// The maximum of a non-empty sample set.
fn best_sample(samples: &[f64]) -> f64 {
    samples.iter().fold(f64::NEG_INFINITY, |a, &s| a.max(s))
}

fn try_filled(n: usize, value: f64) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = Vec::new();
    v.try_reserve_exact(n).map_err(|_| Error::AllocationFailed {
        bytes: n * std::mem::size_of::<f64>(),
    })?;
    v.resize(n, value);
    Ok(v)
}

fn triad(a: &mut [f64], b: &[f64], c: &[f64], alpha: f64, threads: usize) {
    let threads = threads.max(1);
    if threads == 1 {
        for i in 0..a.len() {
            a[i] = b[i] + alpha * c[i];
        }
        return;
    }
    let chunk = a.len().div_ceil(threads);
    thread::scope(|scope| {
        for (k, a_chunk) in a.chunks_mut(chunk).enumerate() {
            let offset = k * chunk;
            let b_chunk = &b[offset..offset + a_chunk.len()];
            let c_chunk = &c[offset..offset + a_chunk.len()];
            scope.spawn(move || {
                for i in 0..a_chunk.len() {
                    a_chunk[i] = b_chunk[i] + alpha * c_chunk[i];
                }
            });
        }
    });
}

/// Runs the configured sweep and collects one row per
/// `(variant, threads, mode)` combination.
///
/// In the default CP-ALS mode each row times that mode's MTTKRP inside full
/// ALS iterations (fixed iteration count, no early stopping). With
/// [`BenchConfig::mttkrp_only`] the kernels are timed back-to-back against
/// a fixed random model instead. Permuted rows carry the one-time
/// permutation build cost and its ratio to the mean iteration time; for
/// bare-kernel runs the denominator is the mean all-modes sweep time.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    if config.rank == 0 {
        return Err(Error::ZeroRank);
    }
    if config.iters == 0 {
        return Err(Error::InvalidConfig("iters must be at least 1".into()));
    }
    if config.variants.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one variant is required".into(),
        ));
    }
    if config.threads.is_empty() || config.threads.contains(&0) {
        return Err(Error::InvalidConfig(
            "thread counts must be positive and non-empty".into(),
        ));
    }
    for &width in [config.float_bytes, config.ordinal_bytes].iter() {
        if width != 4 && width != 8 {
            return Err(Error::InvalidConfig(format!(
                "byte widths must be 4 or 8, got {width}"
            )));
        }
    }

    let x = match &config.input {
        BenchInput::File(path) => read_tns(BufReader::new(File::open(path)?))?,
        BenchInput::Synthetic { dims, nnz, seed } => {
            SparseTensor::random_sparse(dims, *nnz, *seed)?
        }
    };
    let d = x.ndims();
    let nnz = x.nnz();

    let peak_gbps = match config.peak_gbps {
        Some(peak) if peak > 0.0 => peak,
        Some(peak) => {
            return Err(Error::InvalidConfig(format!(
                "peak bandwidth must be positive, got {peak}"
            )));
        }
        None => {
            let cpus = thread::available_parallelism().map_or(1, |n| n.get());
            measure_peak_bandwidth(STREAM_DEFAULT_BYTES, STREAM_DEFAULT_REPS, cpus)? / 1e9
        }
    };

    let storage_base_bytes = x.storage_bytes(false, config.float_bytes, config.ordinal_bytes);
    let storage_perm_bytes = x.storage_bytes(true, config.float_bytes, config.ordinal_bytes);
    let policy = blocking_policy(config.rank, Profile::CpuLike, nnz, 0)?;

    let mut rows = Vec::new();
    for &variant in &config.variants {
        // The permutation build is one-time preprocessing per tensor; it is
        // timed once here and reported on every row of this variant.
        let (perms, sort_seconds) = if variant == MttkrpVariant::Permuted {
            let timer = Instant::now();
            let perms = build_perm(&x);
            (Some(perms), Some(timer.elapsed().as_secs_f64()))
        } else {
            (None, None)
        };

        for &threads in &config.threads {
            if config.mttkrp_only {
                let model = KTensor::random(x.dims(), config.rank, config.model_seed)?;
                // Warm-up sweep: fault pages in and settle caches, untimed.
                for mode in 0..d {
                    mttkrp(&x, &model, mode, variant, &policy, perms.as_ref(), threads)?;
                }
                let mut per_mode = vec![0.0; d];
                for _ in 0..config.iters {
                    for (mode, total) in per_mode.iter_mut().enumerate() {
                        let timer = Instant::now();
                        mttkrp(&x, &model, mode, variant, &policy, perms.as_ref(), threads)?;
                        *total += timer.elapsed().as_secs_f64();
                    }
                }
                let sweep_mean: f64 =
                    per_mode.iter().map(|t| t / config.iters as f64).sum();
                for (mode, &total) in per_mode.iter().enumerate() {
                    rows.push(make_row(
                        config,
                        variant,
                        mode,
                        threads,
                        config.iters,
                        total,
                        d,
                        nnz,
                        peak_gbps,
                        sort_seconds,
                        sort_seconds.map(|s| s / sweep_mean),
                        storage_base_bytes,
                        storage_perm_bytes,
                    )?);
                }
            } else {
                let opts = AlsOptions {
                    rank: config.rank,
                    max_iters: config.iters,
                    fit_tolerance: 0.0,
                    variant,
                    threads,
                    seed: config.model_seed,
                    regularization: 0.0,
                };
                // Warm-up call before the timed decomposition.
                let model = KTensor::random(x.dims(), config.rank, config.model_seed)?;
                mttkrp(&x, &model, 0, variant, &policy, perms.as_ref(), threads)?;

                let (_, trace) = cp_als(&x, &opts)?;
                let iters_done = trace.iterations();
                let iter_mean: f64 =
                    trace.iteration_seconds.iter().sum::<f64>() / iters_done as f64;
                for mode in 0..d {
                    let total: f64 = trace.mttkrp_seconds.iter().map(|per| per[mode]).sum();
                    rows.push(make_row(
                        config,
                        variant,
                        mode,
                        threads,
                        iters_done,
                        total,
                        d,
                        nnz,
                        peak_gbps,
                        trace.sort_seconds,
                        trace.sort_seconds.map(|s| s / iter_mean),
                        storage_base_bytes,
                        storage_perm_bytes,
                    )?);
                }
            }
        }
    }
    Ok(BenchReport {
        peak_gbps,
        rows,
    })
}

#[allow(clippy::too_many_arguments)]
fn make_row(
    config: &BenchConfig,
    variant: MttkrpVariant,
    mode: usize,
    threads: usize,
    iters: usize,
    seconds: f64,
    ndims: usize,
    nnz: usize,
    peak_gbps: f64,
    sort_seconds: Option<f64>,
    sort_ratio: Option<f64>,
    storage_base_bytes: u64,
    storage_perm_bytes: u64,
) -> Result<BenchRow> {
    let mean_seconds = (seconds / iters as f64).max(1e-9);
    let gbps = bandwidth_estimate(
        ndims,
        config.rank,
        nnz,
        config.float_bytes,
        config.ordinal_bytes,
        mean_seconds,
    )? / 1e9;
    Ok(BenchRow {
        variant,
        mode,
        threads,
        iters,
        seconds,
        gbps,
        peak_fraction: gbps / peak_gbps,
        sort_seconds,
        sort_ratio,
        storage_base_bytes,
        storage_perm_bytes,
    })
}

/// Writes the report rows to `writer` in the chosen format. CSV carries one
/// header plus one line per row; JSON is an array of row objects with the
/// same fields.
pub fn write_report<W: Write>(
    report: &BenchReport,
    format: ReportFormat,
    writer: W,
) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            let mut csv_writer = csv::Writer::from_writer(writer);
            for row in &report.rows {
                csv_writer.serialize(row)?;
            }
            csv_writer.flush().map_err(|e| Error::Report(e.to_string()))?;
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(writer, &report.rows)?;
        }
    }
    Ok(())
}

/// Writes the report to a file (see [`write_report`]).
pub fn emit_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_report(report, format, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Reads rows back from CSV produced by [`write_report`].
pub fn read_csv_rows<R: Read>(reader: R) -> Result<Vec<BenchRow>> {
    let mut csv_reader = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for row in csv_reader.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
