use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use anytime_prune::harness::{self, RunConfig};
use anytime_prune::io;

#[derive(Parser)]
#[command(name = "anytime-prune", version, about = "Progressive pruning experiments over megabatch streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config.
    Run {
        config: PathBuf,
        /// Output directory (default: runs/<run_id>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the master seed and re-derive all per-role seeds.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every *.toml config in a directory.
    Sweep {
        dir: PathBuf,
        /// Parent directory for per-config outputs (default: runs/).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of configs to run concurrently.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Re-render the SVG plots of a finished run from its CSV files.
    Plot { run_dir: PathBuf },
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<anytime_prune::Error>() {
            Some(inner) if inner.is_config() => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let parsed = io::parse_config(path).and_then(|c| match seed {
        Some(s) => c.with_seed(s),
        None => Ok(c),
    });
    parsed
        .with_context(|| format!("reading config {}", path.display()))
        .map_err(Failure::Config)
}

fn execute(config: &RunConfig, out: Option<&Path>) -> anyhow::Result<PathBuf> {
    let started = Instant::now();
    let log = harness::run(config)?;
    let seconds = started.elapsed().as_secs_f64();
    let dir = out.map_or_else(|| Path::new("runs").join(&log.run_id), Path::to_path_buf);
    let summary = io::write_run(&log, &dir).with_context(|| format!("writing {}", dir.display()))?;
    fs::write(dir.join("timing.json"), format!("{{\"wall_clock_seconds\": {seconds}}}\n"))?;
    println!(
        "{}: test acc {:.2}%, CER {}, gap {:.2} pp, kept {}/{} ({seconds:.1}s) -> {}",
        summary.run_id,
        summary.results.final_test_acc,
        summary.results.cer,
        summary.results.final_gen_gap,
        summary.results.kept_counts.last().copied().unwrap_or_default(),
        summary.results.dense_prunable,
        dir.display()
    );
    Ok(dir)
}

fn sweep_configs(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))
        .map_err(Failure::Config)?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Config(anyhow!("no *.toml configs in {}", dir.display())));
    }
    Ok(paths)
}

#[cfg(feature = "parallel")]
fn run_all(jobs: &[(RunConfig, PathBuf)], parallel: usize) -> Vec<anyhow::Result<PathBuf>> {
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(parallel.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| jobs.par_iter().map(|(c, o)| execute(c, Some(o))).collect()),
        Err(e) => vec![Err(e.into())],
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(jobs: &[(RunConfig, PathBuf)], parallel: usize) -> Vec<anyhow::Result<PathBuf>> {
    if parallel > 1 {
        log::warn!("built without the `parallel` feature; running configs one at a time");
    }
    jobs.iter().map(|(c, o)| execute(c, Some(o))).collect()
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let config = load_config(&config, seed)?;
            execute(&config, out.as_deref())?;
        }
        Command::Sweep { dir, out, parallel } => {
            let out = out.unwrap_or_else(|| PathBuf::from("runs"));
            let mut jobs = Vec::new();
            for path in sweep_configs(&dir)? {
                let stem = path.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
                jobs.push((load_config(&path, None)?, out.join(stem)));
            }
            let failed: Vec<String> = run_all(&jobs, parallel)
                .into_iter()
                .zip(&jobs)
                .filter_map(|(r, (_, o))| r.err().map(|e| format!("{}: {e:#}", o.display())))
                .collect();
            if !failed.is_empty() {
                return Err(Failure::Runtime(anyhow!("{} run(s) failed:\n{}", failed.len(), failed.join("\n"))));
            }
        }
        Command::Plot { run_dir } => {
            if !run_dir.join("curves.csv").exists() {
                return Err(Failure::Runtime(anyhow!("{} holds no curves.csv", run_dir.display())));
            }
            io::plot::plot_run_dir(&run_dir).with_context(|| format!("plotting {}", run_dir.display()))?;
            println!("plots written to {}", run_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
