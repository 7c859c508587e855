//! Experiment orchestration: seeding, controller assembly, episode
//! replication, metric aggregation, and artifact export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baselines::{FcfsController, FixedTimeController, LqfController, PlatoonController, SignalPlan};
use crate::config::{ConfigError, ControllerKind, ExperimentConfig, RunMode};
use crate::dhal::controller::DhalController;
use crate::dhal::encoding::EncodingSpec;
use crate::dhal::nets::{DhalNets, NetSizes};
use crate::dhal::training::{run_training, TrainConfig, TrainOutput};
use crate::episode::{run_episode, Controller, EngineConfig, EpisodeResult};
use crate::geometry::{build_layout, Layout, LayoutError};
use crate::metrics::{compute_report, mean_std, MetricsReport, TripRecord};
use crate::simcore::admission::GateMode;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("test-mode dhal run requires a checkpoint file")]
    MissingCheckpoint,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("metrics: {0}")]
    Metrics(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Everything a run leaves behind.
#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub seed_reports: Vec<SeedReport>,
    pub aggregate: Option<AggregateReport>,
    pub training: Option<TrainingSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub code_version: String,
    pub config_hash: String,
    pub mode: RunMode,
    pub controller: ControllerKind,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub flow_veh_h: f64,
    pub report: MetricsReport,
    pub collision_events: usize,
    pub boundary_clamps: usize,
}

/// Mean and spread of each metric over seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AggregateReport {
    pub controller: ControllerKind,
    pub flow_veh_h: f64,
    pub seeds: usize,
    pub pr: (f64, f64),
    pub sr: (f64, f64),
    pub att: Option<(f64, f64)>,
    pub dtt: Option<(f64, f64)>,
    pub afc: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub updates: usize,
    pub checkpoint: PathBuf,
    pub aborted: Option<String>,
}

/// Hash of the canonical TOML form of a config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canonical = config.to_toml_string();
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        write!(out, "{byte:02x}").expect("writing to a string");
    }
    out
}

fn engine_config(config: &ExperimentConfig, mode: GateMode, length: f64) -> EngineConfig {
    EngineConfig {
        sim: config.sim_params(),
        table: config.table_params(),
        gate_mode: mode,
        episode_length: length,
        drain_period: config.drain_period,
    }
}

/// Assemble the controller named by the config.
pub fn build_controller(
    config: &ExperimentConfig,
    layout: &Arc<Layout>,
) -> Result<Box<dyn Controller>, RunError> {
    Ok(match config.controller {
        ControllerKind::Ft => {
            let cycle = config.ft_cycle.unwrap_or_else(|| config.flow.ft_cycle());
            Box::new(FixedTimeController { plan: SignalPlan::four_phase(layout, cycle) })
        }
        ControllerKind::Lqf => {
            let cycle = config.ft_cycle.unwrap_or_else(|| config.flow.ft_cycle());
            Box::new(LqfController::new(
                SignalPlan::four_phase(layout, cycle),
                config.lqf_min_green,
            ))
        }
        ControllerKind::Fcfs => Box::new(FcfsController::new()),
        ControllerKind::Platoon => Box::new(PlatoonController::new(config.platoon_config())),
        ControllerKind::Dhal => {
            let path = config.checkpoint.as_ref().ok_or(RunError::MissingCheckpoint)?;
            let bytes = std::fs::read(path).map_err(io_err(path))?;
            let nets =
                DhalNets::from_bundle(&bytes).map_err(|e| RunError::Checkpoint(e.to_string()))?;
            let spec = EncodingSpec::from_layout(layout);
            if nets.actor.g_dim() != spec.g_dim() {
                return Err(RunError::Checkpoint(format!(
                    "checkpoint raster dim {} does not match layout ({})",
                    nets.actor.g_dim(),
                    spec.g_dim()
                )));
            }
            Box::new(DhalController { nets, spec, params: config.dhal_params() })
        }
    })
}

/// Run one test episode for a seed.
pub fn run_test_episode(
    config: &ExperimentConfig,
    layout: &Arc<Layout>,
    seed: u64,
) -> Result<EpisodeResult, RunError> {
    let mut controller = build_controller(config, layout)?;
    Ok(run_episode(
        engine_config(config, GateMode::Enforced, config.episode_length_test),
        layout.clone(),
        ChaCha8Rng::seed_from_u64(seed),
        config.scaled_flow(),
        controller.as_mut(),
    ))
}

/// Execute the configured experiment and write all artifacts under `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts, RunError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let layout = Arc::new(build_layout(&config.layout)?);

    let manifest = Manifest {
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(config),
        mode: config.mode,
        controller: config.controller,
        seeds: config.test_seeds(),
        config: config.clone(),
    };

    let mut artifacts = RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        manifest: manifest.clone(),
        seed_reports: Vec::new(),
        aggregate: None,
        training: None,
    };

    match config.mode {
        RunMode::Test => {
            for &seed in &manifest.seeds {
                let result = run_test_episode(config, &layout, seed)?;
                write_trip_csv(&out_dir.join(format!("trips_seed{seed}.csv")), &result.trips)?;
                write_collision_csv(
                    &out_dir.join(format!("collisions_seed{seed}.csv")),
                    &result,
                )?;
                let report = compute_report(&result.trips)
                    .map_err(|e| RunError::Metrics(e.to_string()))?;
                artifacts.seed_reports.push(SeedReport {
                    seed,
                    flow_veh_h: config.scaled_flow(),
                    report,
                    collision_events: result.collision_events.len(),
                    boundary_clamps: result.boundary_clamps,
                });
            }
            artifacts.aggregate = Some(aggregate(config, &artifacts.seed_reports));
            write_metrics_csv(&out_dir.join("metrics.csv"), config, &artifacts.seed_reports)?;
            write_json(&out_dir.join("metrics.json"), &artifacts.aggregate)?;
        }
        RunMode::Train => {
            let train_config = TrainConfig {
                epochs: config.effective_epochs(),
                episode_length: config.episode_length_train,
                desk_scale: config.desk_scale,
                seed: config.seed,
                sim: config.sim_params(),
                table: config.table_params(),
                params: config.dhal_params(),
                sizes: NetSizes::default(),
            };
            let output = run_training(&train_config, layout.clone());
            let checkpoint = out_dir.join("checkpoint.bin");
            std::fs::write(&checkpoint, output.nets.to_bundle())
                .map_err(io_err(&checkpoint))?;
            write_curves_csv(&out_dir.join("curves.csv"), &output)?;
            write_epochs_csv(&out_dir.join("epochs.csv"), &output)?;
            artifacts.training = Some(TrainingSummary {
                epochs: output.epochs.len(),
                updates: output.curves.len(),
                checkpoint,
                aborted: output.aborted.clone(),
            });
        }
    }

    write_json(&out_dir.join("manifest.json"), &manifest)?;
    Ok(artifacts)
}

fn aggregate(config: &ExperimentConfig, reports: &[SeedReport]) -> AggregateReport {
    let collect = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Option<(f64, f64)> {
        let values: Vec<f64> = reports.iter().filter_map(|r| f(&r.report)).collect();
        if values.len() == reports.len() && !values.is_empty() {
            Some(mean_std(&values))
        } else {
            None
        }
    };
    AggregateReport {
        controller: config.controller,
        flow_veh_h: config.scaled_flow(),
        seeds: reports.len(),
        pr: collect(&|r| Some(r.pr)).unwrap_or((0.0, 0.0)),
        sr: collect(&|r| Some(r.sr)).unwrap_or((0.0, 0.0)),
        att: collect(&|r| r.att),
        dtt: collect(&|r| r.dtt),
        afc: collect(&|r| r.afc),
    }
}

/// Documented column set of the metrics CSV.
pub const METRICS_CSV_HEADER: &str =
    "controller,flow_veh_h,seed,n_total,n_passed,n_collided,n_unfinished,n_stopped,pr,sr,att,dtt,afc";

fn write_metrics_csv(
    path: &Path,
    config: &ExperimentConfig,
    reports: &[SeedReport],
) -> Result<(), RunError> {
    let mut out = String::new();
    out.push_str(METRICS_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            config.controller,
            r.flow_veh_h,
            r.seed,
            r.report.n_total,
            r.report.n_passed,
            r.report.n_collided,
            r.report.n_unfinished,
            r.report.n_stopped,
            r.report.pr,
            r.report.sr,
            opt(r.report.att),
            opt(r.report.dtt),
            opt(r.report.afc),
        )
        .expect("writing to a string");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

pub const TRIPS_CSV_HEADER: &str =
    "vehicle,trajectory,spawn_time,t_enter_prep,t_exit_cross,outcome,stopped,fuel_ml,travel_time";

fn write_trip_csv(path: &Path, trips: &[TripRecord]) -> Result<(), RunError> {
    let mut out = String::new();
    out.push_str(TRIPS_CSV_HEADER);
    out.push('\n');
    for t in trips {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let outcome = match t.outcome {
            crate::metrics::TripOutcome::Passed => "passed",
            crate::metrics::TripOutcome::Collided => "collided",
            crate::metrics::TripOutcome::Unfinished => "unfinished",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            t.vehicle,
            t.trajectory,
            t.spawn_time,
            opt(t.t_enter_prep),
            opt(t.t_exit_cross),
            outcome,
            t.stopped,
            t.fuel_ml,
            opt(t.travel_time()),
        )
        .expect("writing to a string");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_collision_csv(path: &Path, result: &EpisodeResult) -> Result<(), RunError> {
    let mut out = String::from("t,vehicle_a,vehicle_b,x,y\n");
    for c in &result.collision_events {
        writeln!(out, "{},{},{},{},{}", c.t, c.a, c.b, c.position.x, c.position.y)
            .expect("writing to a string");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_curves_csv(path: &Path, output: &TrainOutput) -> Result<(), RunError> {
    let mut out = String::from("step,actor_loss,immediate_bce,final_bce\n");
    for row in &output.curves {
        writeln!(out, "{},{},{},{}", row.step, row.actor_loss, row.immediate_bce, row.final_bce)
            .expect("writing to a string");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_epochs_csv(path: &Path, output: &TrainOutput) -> Result<(), RunError> {
    let mut out = String::from("epoch,flow_veh_h,trips,passed,collisions,palace_size\n");
    for e in &output.epochs {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            e.epoch, e.flow_veh_h, e.trips, e.passed, e.collisions, e.palace_size
        )
        .expect("writing to a string");
    }
    std::fs::write(path, out).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text).map_err(io_err(path))
}

/// Read back an exported aggregate report.
pub fn read_metrics_json(path: &Path) -> Result<Option<AggregateReport>, RunError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| RunError::Metrics(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FlowSpec;

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 2;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn missing_checkpoint_fails_dhal_test_mode() {
        let mut config = ExperimentConfig::default();
        config.controller = ControllerKind::Dhal;
        let layout = Arc::new(build_layout(&config.layout).unwrap());
        match build_controller(&config, &layout) {
            Err(RunError::MissingCheckpoint) => {}
            Err(other) => panic!("expected MissingCheckpoint, got {other:?}"),
            Ok(_) => panic!("expected MissingCheckpoint, got a controller"),
        }
    }

    #[test]
    fn small_test_run_exports_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ExperimentConfig::default();
        config.controller = ControllerKind::Fcfs;
        config.flow = FlowSpec::RateVehH(1800.0);
        config.episode_length_test = 40.0;
        config.drain_period = 60.0;
        config.seeds = vec![1, 2];
        let artifacts = run_experiment(&config, dir.path()).unwrap();
        assert_eq!(artifacts.seed_reports.len(), 2);
        assert!(dir.path().join("manifest.json").exists());
        assert!(dir.path().join("metrics.csv").exists());
        assert!(dir.path().join("metrics.json").exists());
        assert!(dir.path().join("trips_seed1.csv").exists());
        assert!(dir.path().join("collisions_seed2.csv").exists());

        // CSV schema matches the documented header exactly.
        let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().next().unwrap(), METRICS_CSV_HEADER);
        let trips = std::fs::read_to_string(dir.path().join("trips_seed1.csv")).unwrap();
        assert_eq!(trips.lines().next().unwrap(), TRIPS_CSV_HEADER);

        // Round-trip of the JSON report.
        let loaded = read_metrics_json(&dir.path().join("metrics.json")).unwrap().unwrap();
        let orig = artifacts.aggregate.unwrap();
        assert_eq!(loaded.pr, orig.pr);
        assert_eq!(loaded.att, orig.att);
    }

    #[test]
    fn identical_config_and_seed_reproduce_byte_identical_trip_logs() {
        let run = |dir: &Path| {
            let mut config = ExperimentConfig::default();
            config.controller = ControllerKind::Fcfs;
            config.flow = FlowSpec::RateVehH(2400.0);
            config.episode_length_test = 30.0;
            config.drain_period = 60.0;
            config.seed = 77;
            run_experiment(&config, dir).unwrap();
            std::fs::read(dir.join("trips_seed77.csv")).unwrap()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        assert_eq!(run(d1.path()), run(d2.path()));
    }
}
