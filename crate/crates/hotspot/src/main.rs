use clap::{Parser, Subcommand};
use hotspot::pipeline::{self, RunOptions};
use hotspot::{scenario, Error, PipelineConfig, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hotspot", version, about = "PM2.5 hotspot detection from mobile-sensor data")]
struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, short, global = true, default_value = "hotspot.toml")]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Run even if upstream outputs were produced under a different config.
    #[arg(long, global = true)]
    allow_stale: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and clean raw CSV files.
    Ingest,
    /// Subtract the rolling-median background.
    Normalize {
        /// Also write the window-length smoothness table.
        #[arg(long)]
        window_sweep: bool,
    },
    /// Diurnal-profile roughness for candidate window lengths.
    WindowSweep,
    /// Fit the GP ensemble and score every tile.
    FitScore,
    /// Generate synthetic observations from a raster, road graph and station series.
    Simulate,
    /// Compare hotspot scores on a simulated campaign with ground truth.
    Evaluate,
    /// Write a small synthetic raster, street grid and station series.
    Scenario {
        /// Directory for the generated files.
        dir: PathBuf,
    },
}

fn load(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(dir) = &cli.output_dir {
        cfg.paths.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let opts = RunOptions { allow_stale: cli.allow_stale };
    match &cli.command {
        Command::Scenario { dir } => {
            let files = scenario::write(dir, &scenario::build(&scenario::ScenarioParams::default())?)?;
            log::info!("wrote {}", files.raster.display());
            return Ok(());
        }
        Command::Ingest => {
            let s = pipeline::ingest(&load(cli)?)?;
            log::info!("retained {} of {} records", s.stats.retained, s.stats.input);
        }
        Command::Normalize { window_sweep } => {
            let cfg = load(cli)?;
            let s = pipeline::normalize_stage(&cfg, opts)?;
            log::info!("normalized {} observations, median_y = {:?}", s.observations.len(), s.median_y);
            if *window_sweep {
                pipeline::window_sweep(&cfg, opts)?;
            }
        }
        Command::WindowSweep => {
            for (w, r) in pipeline::window_sweep(&load(cli)?, opts)? {
                log::info!("window {w} min: roughness {r}");
            }
        }
        Command::FitScore => {
            let s = pipeline::fit_score(&load(cli)?, opts)?;
            log::info!("scored {} tiles, median_y = {}", s.hotspots.grid.len(), s.median_y);
        }
        Command::Simulate => {
            let n = pipeline::simulate(&load(cli)?)?;
            log::info!("simulated {n} observations");
        }
        Command::Evaluate => {
            let ev = pipeline::evaluate(&load(cli)?, opts)?;
            log::info!(
                "spearman {:?}, ECE {:.4} -> {:.4}, Brier {:.4} -> {:.4}",
                ev.spearman,
                ev.ece_before,
                ev.ece_after,
                ev.brier_before,
                ev.brier_after
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
