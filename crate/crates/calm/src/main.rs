use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use calm::config::FleetConfig;
use calm::experiment::{self, Grid};
use calm::formats;
use calm::wire;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calm", version, about = "QoS-aware routing over a simulated model fleet")]
struct Cli {
    /// Override the seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve the configured fleet over TCP until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Listen address; defaults to the config's `bind`, then 127.0.0.1:7070.
        #[arg(long)]
        bind: Option<String>,
    },
    /// Run one experiment and write requests.csv, summary.json and trace.tsv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid and write sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the summary of a finished run directory.
    Report {
        #[arg(long = "in")]
        dir: PathBuf,
    },
    /// Generate the workload trace for a config without running it.
    GenTrace {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<FleetConfig> {
    let mut cfg = FleetConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Serve { config, bind } => {
            let cfg = load(&config, cli.seed)?;
            let addr = bind
                .or_else(|| cfg.bind.clone())
                .unwrap_or_else(|| "127.0.0.1:7070".into());
            let server = wire::spawn(
                experiment::build_orchestrator(&cfg)?,
                &addr,
                wire::server_options(&cfg),
            )?;
            log::info!("listening on {}", server.addr());
            println!("listening on {}", server.addr());
            loop {
                std::thread::park();
            }
        }
        Command::Run { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let Some(out) = out.or_else(|| cfg.output.as_ref().map(|p| cfg.resolve(p))) else {
                bail!("no output directory: pass --out or set `output` in the config");
            };
            let result = experiment::run_experiment(&cfg)?;
            result.write_to(&out)?;
            print!("{}", experiment::format_summary(&result.summary));
            if !result.decision_times_ms.is_empty() {
                println!("{:<22} {:.3}", "mean route time (ms)", result.mean_decision_ms());
            }
            Ok(())
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load(&config, cli.seed)?;
            let text = std::fs::read_to_string(&grid).with_context(|| grid.display().to_string())?;
            let grid = Grid::from_json(&text)?;
            let outcome = experiment::sweep(&cfg, &grid);
            experiment::write_sweep(&out, &outcome.rows)?;
            print!("{}", String::from_utf8_lossy(&formats::summaries_to_csv(&outcome.rows)?));
            if let Some((point, err)) = outcome.failure {
                bail!("grid point `{point}` failed after {} rows: {err}", outcome.rows.len());
            }
            Ok(())
        }
        Command::Report { dir } => {
            let summary = experiment::summarize_dir(&dir)?;
            print!("{}", experiment::format_summary(&summary));
            Ok(())
        }
        Command::GenTrace { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let trace = experiment::load_trace(&cfg)?;
            formats::write_trace(&out, &trace)?;
            println!("{} entries written to {}", trace.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
