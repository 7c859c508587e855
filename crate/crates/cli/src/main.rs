//! Command-line entry point: train the learned controller, run test
//! episodes for any controller, or dump the intersection layout.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use aim_core::config::{ControllerKind, ExperimentConfig, FlowSpec, RunMode};
use aim_core::geometry::build_layout;
use aim_core::runner::run_experiment;

#[derive(Parser)]
#[command(name = "aim", version, about = "Unsignalized-intersection simulator and controller harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the learned speed-control policy and write a checkpoint.
    Train(RunArgs),
    /// Evaluate a controller over one or more seeded test episodes.
    Test(RunArgs),
    /// Export the intersection layout (trajectories, conflict points) as JSON.
    LayoutDump(LayoutArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (TOML). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Controller: dhal, ft, lqf, fcfs, platoon.
    #[arg(long)]
    controller: Option<ControllerKind>,
    /// Traffic demand: low, medium, high, or an explicit rate in veh/h.
    #[arg(long)]
    flow: Option<FlowSpec>,
    /// Base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replication seeds for test mode (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Desk-scale factor in (0, 1]: scales arrival rates and the training
    /// epoch budget.
    #[arg(long)]
    desk_scale: Option<f64>,
    /// Output directory for run artifacts.
    #[arg(long, default_value = "runs/out")]
    out: PathBuf,
    /// Checkpoint file (required to test the learned controller).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct LayoutArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => {
            ExperimentConfig::load(p).with_context(|| format!("loading config {}", p.display()))
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_overrides(config: &mut ExperimentConfig, args: &RunArgs, mode: RunMode) {
    config.mode = mode;
    if let Some(c) = args.controller {
        config.controller = c;
    }
    if mode == RunMode::Train {
        config.controller = ControllerKind::Dhal;
    }
    if let Some(f) = args.flow {
        config.flow = f;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if let Some(d) = args.desk_scale {
        config.desk_scale = d;
    }
    if let Some(ckpt) = &args.checkpoint {
        config.checkpoint = Some(ckpt.clone());
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let mut config = load_config(&args.config)?;
            apply_overrides(&mut config, &args, RunMode::Train);
            let artifacts = run_experiment(&config, &args.out).context("training run failed")?;
            let summary = artifacts.training.expect("train mode produces a summary");
            println!(
                "trained {} epochs ({} updates); checkpoint at {}",
                summary.epochs,
                summary.updates,
                summary.checkpoint.display()
            );
            if let Some(reason) = summary.aborted {
                eprintln!("warning: training aborted early: {reason}");
            }
        }
        Command::Test(args) => {
            let mut config = load_config(&args.config)?;
            apply_overrides(&mut config, &args, RunMode::Test);
            let artifacts = run_experiment(&config, &args.out).context("test run failed")?;
            for r in &artifacts.seed_reports {
                let fmt = |v: Option<f64>| {
                    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into())
                };
                println!(
                    "seed {}: PR {:.1}% SR {:.1}% ATT {} DTT {} AFC {} (collisions: {})",
                    r.seed,
                    r.report.pr,
                    r.report.sr,
                    fmt(r.report.att),
                    fmt(r.report.dtt),
                    fmt(r.report.afc),
                    r.collision_events,
                );
            }
            if let Some(agg) = &artifacts.aggregate {
                let fmt = |v: &Option<(f64, f64)>| {
                    v.map(|(m, s)| format!("{m:.2}+/-{s:.2}")).unwrap_or_else(|| "-".into())
                };
                println!(
                    "aggregate over {} seeds: PR {:.1}+/-{:.1} SR {:.1}+/-{:.1} ATT {} DTT {} AFC {}",
                    agg.seeds,
                    agg.pr.0,
                    agg.pr.1,
                    agg.sr.0,
                    agg.sr.1,
                    fmt(&agg.att),
                    fmt(&agg.dtt),
                    fmt(&agg.afc),
                );
            }
            println!("artifacts in {}", artifacts.out_dir.display());
        }
        Command::LayoutDump(args) => {
            let config = load_config(&args.config)?;
            let layout = build_layout(&config.layout).context("building layout")?;
            let json = serde_json::to_string_pretty(&layout.dump())?;
            match args.out {
                Some(path) => {
                    std::fs::write(&path, json)
                        .with_context(|| format!("writing {}", path.display()))?;
                    println!("layout written to {}", path.display());
                }
                None => println!("{json}"),
            }
        }
    }
    Ok(())
}
