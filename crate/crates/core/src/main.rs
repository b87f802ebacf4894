use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crimesim::cli::{cmd_build_env, cmd_calibrate, cmd_evaluate, cmd_report, cmd_simulate, cmd_synth};
use crimesim::config::RunConfig;
use crimesim::synthcity::SynthSpec;
use crimesim::{Error, Result};

/// Data-driven agent-based simulator of urban crime on a gridded city.
#[derive(Debug, Parser)]
#[command(name = "crimesim", version, about)]
struct Cli {
    /// JSON configuration file; omitted keys fall back to built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master random seed (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications per sweep configuration (overrides the configuration).
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Patrol strategy: static, random, or top_power.
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Worker threads for parallel replications (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Assemble the grid and per-cell yearly counts from raw CSV inputs.
    BuildEnv,
    /// Generate a synthetic city (crimes, grid, districts, ground truth).
    Synth {
        #[arg(long, default_value_t = 20)]
        rows: usize,
        #[arg(long, default_value_t = 20)]
        cols: usize,
        #[arg(long, default_value_t = 4)]
        districts: usize,
        /// Number of consecutive years of data to generate.
        #[arg(long, default_value_t = 9)]
        years: usize,
    },
    /// Simulate the target year on a built environment.
    Simulate,
    /// Sweep the latent parameters against the held-out year.
    Calibrate,
    /// Score a simulated raster against an observed one.
    Evaluate {
        /// Simulated counts matrix CSV.
        #[arg(long)]
        sim: PathBuf,
        /// Observed counts matrix CSV.
        #[arg(long)]
        real: PathBuf,
    },
    /// Render a counts matrix as a grayscale heatmap image.
    Report {
        /// Counts matrix CSV.
        #[arg(long)]
        counts: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }

    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.replications = reps;
    }
    if let Some(strategy) = &cli.strategy {
        cfg.strategy = strategy.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;

    match cli.command {
        Cmd::BuildEnv => {
            let report = cmd_build_env(&cfg)?;
            println!(
                "built environment in {}: {} records located, {} out of bounds, {} malformed skipped, {} filtered by category, years {}..={}",
                cfg.out_dir.display(),
                report.located,
                report.dropped_out_of_bounds,
                report.skipped_malformed,
                report.dropped_category,
                report.year_start,
                report.year_end,
            );
        }
        Cmd::Synth { rows, cols, districts, years } => {
            let spec = SynthSpec::hotspot_demo(rows, cols, districts, years, cfg.seed);
            let summary = cmd_synth(&spec, &cfg.out_dir)?;
            println!(
                "synthesized {} records over years {}..={} into {} ({} districts, downtown {})",
                summary.n_records,
                summary.year_start,
                summary.year_end,
                cfg.out_dir.display(),
                summary.n_districts,
                summary.downtown_district,
            );
        }
        Cmd::Simulate => {
            let summary = cmd_simulate(&cfg)?;
            println!(
                "simulated year {} with seed {}: {} crimes ({} citizens, {} police units, {} strategy)",
                summary.target_year,
                summary.seed,
                summary.total_crimes,
                summary.n_citizens,
                summary.n_police_units,
                summary.strategy,
            );
        }
        Cmd::Calibrate => {
            let reports = cmd_calibrate(&cfg)?;
            let best = reports
                .iter()
                .find(|r| r.rank == 1)
                .expect("sweep returns at least one configuration");
            println!(
                "calibrated {} configurations x {} replications; selected configuration {}: mu={}, nearby={}, downtown={}",
                reports.len(),
                best.replications,
                best.config.id,
                best.config.mu,
                best.config.nearby,
                best.config.downtown,
            );
        }
        Cmd::Evaluate { sim, real } => {
            let report = cmd_evaluate(&cfg, &sim, &real)?;
            for c in &report.coverage {
                println!(
                    "coverage {:>3.0}%: PAI {:.4} PAI* {:.4} PEI {:.4} FAI {:.4}",
                    c.coverage * 100.0,
                    c.pai,
                    c.pai_star,
                    c.pei,
                    c.fai,
                );
            }
        }
        Cmd::Report { counts } => {
            let path = cmd_report(&counts, &cfg.out_dir)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Rust ignores SIGPIPE by default, turning `crimesim ... | head` into a
    // stdout panic; restore the usual silent death instead.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
