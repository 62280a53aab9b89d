use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use ehlora::harness::{emit_csv, emit_summary_csv, harvest_rates, run_sweep, run_trial, write_figures, SeedSpec};
use ehlora::{geometry::sample_topology, Error, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "ehlora", version, about = "Energy-harvesting LoRa uplink simulator")]
struct Cli {
    /// Scenario file (TOML). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for `topology`/`trial`; first seed of the range for `sweep`/`figures`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config override, e.g. `geometry.cell_radius_m=50`. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample one topology and write topology.csv.
    Topology,
    /// Run one trial and print its rate report as JSON.
    Trial,
    /// Density sweep; writes sweep.csv and sweep_summary.csv.
    Sweep,
    /// Write the per-figure CSV tables.
    Figures,
}

/// Message tagged with the failing pipeline stage, or with the CLI step.
fn tagged(err: &anyhow::Error) -> String {
    for cause in err.chain() {
        if let Some(Error::Stage { stage, source }) = cause.downcast_ref::<Error>() {
            return format!("[{stage}] {source}");
        }
    }
    let step = err.to_string();
    match err.source() {
        Some(src) => format!("[{step}] {src}"),
        None => format!("[{step}]"),
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    cfg.apply_overrides(&cli.overrides)?;
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut cfg = load_config(cli).context("config")?;
    let first_seed = cfg.seed_list()[0];
    match cli.command {
        Command::Topology => {
            let seed = cli.seed.unwrap_or(first_seed);
            let topo = sample_topology(&cfg.geometry, seed).context("topology")?;
            let harvest = harvest_rates(&cfg, &topo);
            ensure_dir(&cli.out).context("output")?;
            let path = cli.out.join("topology.csv");
            topo.write_csv(&path, Some(&harvest)).context("output")?;
            println!(
                "{} users, {} beacons -> {}",
                topo.users.len(),
                topo.beacons.len(),
                path.display()
            );
        }
        Command::Trial => {
            let seed = cli.seed.unwrap_or(first_seed);
            let t = run_trial(&cfg, seed, cfg.geometry.user_density_per_km2).context("trial")?;
            let summary = serde_json::json!({
                "seed": t.seed,
                "density_per_km2": t.density_per_km2,
                "users": t.users,
                "active": t.active,
                "sf_counts": t.sf_counts,
                "t_star_nats": t.t_star_nats,
                "min_rate_nats": t.rates.min_rate_nats,
                "min_rate_bits": t.rates.min_rate_bits(),
                "mean_rate_nats": t.rates.mean_rate_nats(),
                "mean_rate_bits": t.rates.mean_rate_bits(),
                "solver_evaluations": t.solver_evaluations,
                "solver_converged": t.solver_converged,
            });
            println!("{}", serde_json::to_string_pretty(&summary).context("output")?);
        }
        Command::Sweep => {
            if let Some(s) = cli.seed {
                cfg.seeds = SeedSpec::Range {
                    start: s,
                    count: cfg.seed_list().len() as u64,
                };
            }
            let result = run_sweep(&cfg).context("sweep")?;
            ensure_dir(&cli.out).context("output")?;
            let rows = cli.out.join("sweep.csv");
            let summary = cli.out.join("sweep_summary.csv");
            emit_csv(&result, &rows).context("output")?;
            emit_summary_csv(&result, &summary).context("output")?;
            println!("{} trials -> {}, {}", result.len(), rows.display(), summary.display());
        }
        Command::Figures => {
            if let Some(s) = cli.seed {
                cfg.seeds = SeedSpec::Range {
                    start: s,
                    count: cfg.seed_list().len() as u64,
                };
            }
            for p in write_figures(&cfg, &cli.out).context("figures")? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", tagged(&e));
            ExitCode::FAILURE
        }
    }
}
