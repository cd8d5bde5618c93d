//! offsim CLI: analytical predictions and simulation sweeps for layerwise
//! weight offloading, with CSV tables and optional SVG charts.

mod commands;
mod csvout;
mod svg;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "offsim",
    version,
    about = "Layerwise-offload prefetch planner and PCIe contention simulator"
)]
struct Cli {
    /// JSON configuration file (built-in presets when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/SVG artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Also emit SVG charts next to the CSV tables.
    #[arg(long, global = true)]
    svg: bool,
    /// Validate every simulated trace; any violation exits with code 4.
    #[arg(long, global = true)]
    validate: bool,
    /// Write simulated traces as JSON lines to this path.
    #[arg(long = "json-trace", global = true)]
    json_trace: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical prediction: critical workload, roofline point, critical
    /// configuration, and minimum residency.
    Predict {
        model: String,
        /// Workload value (frames or batch) for the residency estimate;
        /// defaults to the model's smallest swept configuration.
        #[arg(long)]
        value: Option<u64>,
    },
    /// Simulate a workload sweep under several offload policies.
    Sweep {
        model: String,
        /// Swept values, comma-separated; defaults to the model's grid.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<u64>>,
        /// Policies: no-offload, whole-layer, chunked.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<String>>,
        /// Chunk size in bytes for the chunked policy.
        #[arg(long)]
        chunk_bytes: Option<f64>,
        /// Residency fraction in [0,1] for the chunked policy.
        #[arg(long)]
        residency: Option<f64>,
    },
    /// Per-step latency decomposition for one configuration.
    Breakdown {
        model: String,
        #[arg(long)]
        value: u64,
        /// no-offload, whole-layer, or chunked; the configuration's
        /// default policy when omitted.
        #[arg(long)]
        policy: Option<String>,
    },
    /// Step time across chunk sizes at one workload value.
    ChunkSweep {
        model: String,
        #[arg(long)]
        value: u64,
        /// Chunk sizes in bytes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        chunks: Option<Vec<f64>>,
    },
    /// Step time and peak memory across residency fractions.
    ResidencySweep {
        model: String,
        #[arg(long)]
        value: u64,
        /// Residency fractions in [0,1], comma-separated.
        #[arg(long, value_delimiter = ',')]
        residencies: Option<Vec<f64>>,
    },
    /// Roofline arms, the turning point, and per-configuration markers.
    Roofline { model: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match commands::Context::new(
        cli.config.as_deref(),
        &cli.out,
        cli.svg,
        cli.validate,
        cli.json_trace.as_deref(),
    ) {
        Ok(ctx) => ctx,
        Err(e) => return fail(e),
    };
    let result = match cli.command {
        Command::Predict { model, value } => commands::cmd_predict(&ctx, &model, value),
        Command::Sweep {
            model,
            values,
            policies,
            chunk_bytes,
            residency,
        } => commands::cmd_sweep(&ctx, &model, values, policies, chunk_bytes, residency),
        Command::Breakdown {
            model,
            value,
            policy,
        } => commands::cmd_breakdown(&ctx, &model, value, policy.as_deref()),
        Command::ChunkSweep {
            model,
            value,
            chunks,
        } => commands::cmd_chunk_sweep(&ctx, &model, value, chunks),
        Command::ResidencySweep {
            model,
            value,
            residencies,
        } => commands::cmd_residency_sweep(&ctx, &model, value, residencies),
        Command::Roofline { model } => commands::cmd_roofline(&ctx, &model),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: commands::CmdError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code())
}
