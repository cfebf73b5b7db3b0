use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stacksim_cli::commands;
use stacksim_cli::output::OutputFormat;

/// Trace-driven simulator of die-stacked DRAM organizations.
#[derive(Parser)]
#[command(name = "stacksim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a binary trace from a synthetic trace spec.
    GenTrace {
        /// Trace spec JSON (schema stacksim-trace-v1).
        #[arg(long)]
        spec: PathBuf,
        /// Output trace file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Count accesses per page over a trace file.
    Profile {
        #[arg(long)]
        trace: PathBuf,
        /// Page size in bytes; defaults to the trace header's page size.
        #[arg(long)]
        page_size: Option<u64>,
        /// Output counts JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the memory fraction from saved page counts.
    Partition {
        /// Counts JSON produced by `profile`.
        #[arg(long)]
        counts: PathBuf,
        /// Total hits of the full-cache run over the same trace.
        #[arg(long)]
        cache_hits: u64,
        /// Stacked DRAM frames.
        #[arg(long)]
        frames: u64,
        /// Output plan JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "both")]
        format: OutputFormat,
    },
    /// Run several configs over the identical trace and rank them.
    Compare {
        /// Experiment configs; repeat the flag, at least twice.
        #[arg(long, required = true)]
        config: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "both")]
        format: OutputFormat,
    },
    /// Batch experiments along one axis (partition, dram_size,
    /// sample_size, or stability).
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> stacksim_core::Result<()> {
    match cli.command {
        Command::GenTrace { spec, out } => {
            let written = commands::gen_trace(&spec, &out)?;
            println!("wrote {written} records to {}", out.display());
        }
        Command::Profile { trace, page_size, out } => {
            let counts = commands::profile_cmd(&trace, page_size, &out)?;
            println!(
                "profiled {} accesses over {} pages into {}",
                counts.total_accesses(),
                counts.pages(),
                out.display()
            );
        }
        Command::Partition { counts, cache_hits, frames, out } => {
            let fraction = commands::partition_cmd(&counts, cache_hits, frames, &out)?;
            println!("memory fraction {fraction} written to {}", out.display());
        }
        Command::Simulate { config, out_dir, seed, format } => {
            let report = commands::simulate_cmd(&config, &out_dir, seed, format)?;
            println!("{}", commands::one_line(&report));
        }
        Command::Compare { config, out_dir, seed, format } => {
            let reports = commands::compare_cmd(&config, &out_dir, seed, format)?;
            print!("{}", commands::ranked_summary(&reports));
        }
        Command::Sweep { config, out_dir, seed } => {
            let path = commands::sweep_cmd(&config, &out_dir, seed)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // STACKSIM_THREADS caps how many runs execute concurrently.
    if let Ok(threads) = std::env::var("STACKSIM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(stacksim_cli::exit_code(&e) as u8)
        }
    }
}
