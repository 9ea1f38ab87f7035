//! `fftconv`: verification suites, benchmark sweeps, cost-model exploration,
//! and file-based convolutions over the tensor format.
//!
//! Exit codes: 0 success, 1 verification or benchmark failure, 2 usage error.

mod bench;
mod convcmd;
mod plancmd;
mod util;
mod verify;

use anyhow::Result;
use clap::{Parser, Subcommand};

use fftconv_core::dft::ConvMode;
use fftconv_core::plan::Precision;
use fftconv_core::sparse::FrequencySparsityPattern;

#[derive(Parser)]
#[command(name = "fftconv", version, about = "Monarch-decomposed FFT convolution toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run oracle-backed property suites; exit 0 only if every property passes.
    Verify {
        /// Suite: fft, conv, sparse, grad, tensor, cost, or all.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Lengths for the conv suite, e.g. `256..4096`.
        #[arg(long)]
        n: Option<String>,
        /// Seed for all randomized instances (printed in the report).
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Time convolution configurations; CSV on stdout.
    Bench {
        /// Lengths, e.g. `4096` or `1024..16384` (powers of two).
        #[arg(long)]
        n: String,
        /// Decomposition orders, e.g. `2,3`.
        #[arg(long, default_value = "3")]
        p: String,
        /// Convolution modes: circular, causal, or both (comma separated).
        #[arg(long, default_value = "circular")]
        mode: String,
        /// Use the real-input packing path.
        #[arg(long)]
        real: bool,
        /// Bench the gated convolution.
        #[arg(long)]
        gated: bool,
        /// Frequency-sparsity pattern, e.g. `dims=16,16,16,16;keep=8,8,16,16`.
        /// Also emits the dense row for comparison.
        #[arg(long)]
        pattern: Option<String>,
        /// Timed repetitions per configuration (minimum 3).
        #[arg(long, default_value_t = 5)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        hidden: usize,
        /// Execution precision: f32 or f64.
        #[arg(long, default_value = "f32")]
        precision: String,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Verify each configuration against the direct oracle (slow for
        /// large lengths).
        #[arg(long)]
        check: bool,
        /// Also time the O(N^2) direct convolution as a baseline row.
        #[arg(long)]
        direct: bool,
        /// Skip configurations whose estimated footprint exceeds this cap.
        #[arg(long, default_value_t = 8.0)]
        mem_cap_gb: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Hardware profile for the modeled-time column: `a100` or a
        /// key=value file.
        #[arg(long, default_value = "a100")]
        profile: String,
        /// Matmul tile extent (uniform). Sparse-skip granularity follows it.
        #[arg(long, default_value_t = 16)]
        tile: usize,
    },
    /// Cost-model sweep: modeled seconds per order plus the selected order.
    Plan {
        /// Length or range, e.g. `4096..32768`.
        #[arg(long)]
        n: String,
        /// Hardware profile: `a100` or a key=value file.
        #[arg(long, default_value = "a100")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        hidden: usize,
        /// Output format: csv or json.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Convolve tensors from files and write the output tensor.
    Conv {
        #[arg(long)]
        input: String,
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        out: String,
        /// circular or causal.
        #[arg(long, default_value = "circular")]
        mode: String,
        /// Decomposition order (default: cost-model selection).
        #[arg(long)]
        p: Option<usize>,
        /// Use the real-input packing path.
        #[arg(long)]
        real: bool,
        /// Gate tensors: v (output gate) and w (input gate).
        #[arg(long, num_args = 2, value_names = ["V", "W"])]
        gated: Option<Vec<String>>,
        /// Frequency-sparsity pattern applied to the kernel spectrum.
        #[arg(long)]
        pattern: Option<String>,
        /// f32 or f64.
        #[arg(long, default_value = "f64")]
        precision: String,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also compare against the direct-summation oracle.
        #[arg(long)]
        check: bool,
    },
}

fn parse_precision(s: &str) -> Result<Precision> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        other => anyhow::bail!("unknown precision `{other}` (expected f32 or f64)"),
    }
}

fn parse_modes(s: &str) -> Result<Vec<ConvMode>> {
    s.split(',')
        .map(|m| match m.trim() {
            "circular" => Ok(ConvMode::Circular),
            "causal" => Ok(ConvMode::Causal),
            other => anyhow::bail!("unknown mode `{other}`"),
        })
        .collect()
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify { suite, n, seed } => {
            if !verify::SUITES.contains(&suite.as_str()) {
                anyhow::bail!(
                    "unknown suite `{suite}` (expected one of {:?})",
                    verify::SUITES
                );
            }
            let lengths = n.as_deref().map(util::parse_lengths).transpose()?;
            verify::run(&suite, seed, lengths)
        }
        Command::Bench {
            n,
            p,
            mode,
            real,
            gated,
            pattern,
            reps,
            batch,
            hidden,
            precision,
            threads,
            check,
            direct,
            mem_cap_gb,
            seed,
            profile,
            tile,
        } => {
            if tile == 0 {
                anyhow::bail!("tile extent must be positive");
            }
            let args = bench::BenchArgs {
                lengths: util::parse_lengths(&n)?,
                orders: util::parse_orders(&p)?,
                modes: parse_modes(&mode)?,
                real,
                gated,
                pattern: pattern
                    .as_deref()
                    .map(FrequencySparsityPattern::parse)
                    .transpose()?,
                reps: reps.max(3),
                batch,
                hidden,
                precision: parse_precision(&precision)?,
                threads,
                check,
                direct,
                mem_cap_bytes: (mem_cap_gb * (1u64 << 30) as f64) as u64,
                seed,
                params: util::load_profile(&profile)?,
                tiles: fftconv_core::exec::BlockedMatmulConfig {
                    tile_rows: tile,
                    tile_cols: tile,
                    tile_inner: tile,
                },
            };
            bench::run(&args).map_err(|e| util::run_failure(format!("{e:#}")))
        }
        Command::Plan {
            n,
            profile,
            batch,
            hidden,
            format,
        } => {
            let lengths = util::parse_lengths(&n)?;
            let params = util::load_profile(&profile)?;
            let json = match format.as_str() {
                "json" => true,
                "csv" => false,
                other => anyhow::bail!("unknown format `{other}`"),
            };
            plancmd::run(&lengths, &params, batch, hidden, json)
        }
        Command::Conv {
            input,
            kernel,
            out,
            mode,
            p,
            real,
            gated,
            pattern,
            precision,
            threads,
            check,
        } => {
            let mode = match mode.as_str() {
                "circular" => ConvMode::Circular,
                "causal" => ConvMode::Causal,
                other => anyhow::bail!("unknown mode `{other}`"),
            };
            let gated = gated.map(|v| (v[0].clone(), v[1].clone()));
            let args = convcmd::ConvArgs {
                input,
                kernel,
                out,
                mode,
                order: p,
                real,
                gated,
                pattern: pattern
                    .as_deref()
                    .map(FrequencySparsityPattern::parse)
                    .transpose()?,
                precision: parse_precision(&precision)?,
                threads,
                check,
            };
            convcmd::run(&args)
        }
    }
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        let code = if err.downcast_ref::<util::RunFailure>().is_some() {
            1
        } else {
            2
        };
        std::process::exit(code);
    }
}
