//! Experiment configuration: every model and environment parameter with its
//! default, the flow levels, and the TOML config-file format.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::PlatoonConfig;
use crate::dhal::DhalParams;
use crate::geometry::LayoutConfig;
use crate::reservation::{TableParams, WindowForm};
use crate::simcore::SimParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Dhal,
    Ft,
    Lqf,
    Fcfs,
    Platoon,
}

impl std::str::FromStr for ControllerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "dhal" => ControllerKind::Dhal,
            "ft" => ControllerKind::Ft,
            "lqf" => ControllerKind::Lqf,
            "fcfs" => ControllerKind::Fcfs,
            "platoon" => ControllerKind::Platoon,
            other => return Err(format!("unknown controller {other:?}")),
        })
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ControllerKind::Dhal => "dhal",
            ControllerKind::Ft => "ft",
            ControllerKind::Lqf => "lqf",
            ControllerKind::Fcfs => "fcfs",
            ControllerKind::Platoon => "platoon",
        };
        write!(f, "{s}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    Train,
    Test,
}

/// Traffic demand: a named level or an explicit rate in veh/h.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FlowSpec {
    Level(FlowLevel),
    RateVehH(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowLevel {
    Low,
    Medium,
    High,
}

impl FlowSpec {
    /// Total demand in veh/h before desk scaling.
    pub fn rate_veh_h(&self) -> f64 {
        match self {
            FlowSpec::Level(FlowLevel::Low) => 5400.0,
            FlowSpec::Level(FlowLevel::Medium) => 7200.0,
            FlowSpec::Level(FlowLevel::High) => 9000.0,
            FlowSpec::RateVehH(r) => *r,
        }
    }

    /// Fixed-time cycle length for this demand.
    pub fn ft_cycle(&self) -> f64 {
        match self {
            FlowSpec::Level(FlowLevel::Low) => 60.0,
            FlowSpec::Level(FlowLevel::Medium) => 90.0,
            FlowSpec::Level(FlowLevel::High) => 120.0,
            FlowSpec::RateVehH(r) if *r <= 6000.0 => 60.0,
            FlowSpec::RateVehH(r) if *r <= 8100.0 => 90.0,
            FlowSpec::RateVehH(_) => 120.0,
        }
    }
}

impl std::str::FromStr for FlowSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "low" => FlowSpec::Level(FlowLevel::Low),
            "medium" => FlowSpec::Level(FlowLevel::Medium),
            "high" => FlowSpec::Level(FlowLevel::High),
            other => FlowSpec::RateVehH(
                other.parse::<f64>().map_err(|_| format!("unknown flow {other:?}"))?,
            ),
        })
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// The complete experiment configuration. Defaults reproduce every published
/// parameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub controller: ControllerKind,
    pub mode: RunMode,
    pub flow: FlowSpec,
    /// Scales arrival rates and the training epoch budget into desk-sized
    /// runs; geometry and hyperparameters are never scaled.
    pub desk_scale: f64,
    pub seed: u64,
    /// Test-mode replication seeds; falls back to `[seed]` when empty.
    pub seeds: Vec<u64>,

    // Environment parameters.
    pub episode_length_train: f64,
    pub episode_length_test: f64,
    pub drain_period: f64,
    pub control_distance: f64,
    pub sim_step: f64,
    pub action_step: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub a_min: f64,
    pub spawn_distance: f64,
    pub min_crossing_speed: f64,

    // Model parameters.
    pub max_epochs: usize,
    pub batch_size: usize,
    pub buffer_size: usize,
    pub actor_lr: f64,
    pub discriminator_lr: f64,
    pub alpha: f64,
    pub gamma_initial: f64,
    pub gamma_start: f64,
    pub reservation_horizon: f64,
    pub table_dt: f64,
    pub eps_buffer: f64,
    pub exact_window_form: bool,
    pub v_keep: f64,
    pub mask_lookahead: usize,
    pub update_every: usize,
    pub fresh_window: usize,

    // Baseline parameters.
    pub ft_cycle: Option<f64>,
    pub lqf_min_green: f64,
    pub platoon_max_size: usize,
    pub platoon_join_gap: f64,
    pub platoon_headway: f64,

    pub layout: LayoutConfig,
    /// Trained networks for test-mode dhal runs.
    pub checkpoint: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            controller: ControllerKind::Fcfs,
            mode: RunMode::Test,
            flow: FlowSpec::Level(FlowLevel::Medium),
            desk_scale: 1.0,
            seed: 1,
            seeds: Vec::new(),
            episode_length_train: 300.0,
            episode_length_test: 10_000.0,
            drain_period: 120.0,
            control_distance: 100.0,
            sim_step: 0.1,
            action_step: 0.2,
            vehicle_length: 5.0,
            vehicle_width: 1.8,
            v_max: 15.0,
            a_max: 4.0,
            a_min: -4.0,
            spawn_distance: 200.0,
            min_crossing_speed: 3.0,
            max_epochs: 100,
            batch_size: 256,
            buffer_size: 1_000_000,
            actor_lr: 1e-5,
            discriminator_lr: 1e-5,
            alpha: 0.6,
            gamma_initial: 0.2,
            gamma_start: 0.9,
            reservation_horizon: 100.0,
            table_dt: 0.2,
            eps_buffer: 1.0,
            exact_window_form: false,
            v_keep: 3.0,
            mask_lookahead: 5,
            update_every: 16,
            fresh_window: 4096,
            ft_cycle: None,
            lqf_min_green: 5.0,
            platoon_max_size: 8,
            platoon_join_gap: 20.0,
            platoon_headway: 1.0,
            layout: LayoutConfig::default(),
            checkpoint: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = toml::from_str(s)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.desk_scale > 0.0 && self.desk_scale <= 1.0) {
            return err(format!("desk_scale {} outside (0, 1]", self.desk_scale));
        }
        if self.layout.lane_width <= self.vehicle_width {
            return err("lane width must exceed vehicle width".into());
        }
        if self.a_min >= 0.0 || self.a_max <= 0.0 {
            return err("acceleration bounds must straddle zero".into());
        }
        if self.flow.rate_veh_h() < 0.0 {
            return err("negative flow".into());
        }
        if self.sim_step <= 0.0 || self.action_step < self.sim_step {
            return err("action step must be at least one sim step".into());
        }
        let ratio = self.action_step / self.sim_step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return err("action step must be a multiple of the sim step".into());
        }
        if self.mode == RunMode::Train && self.controller != ControllerKind::Dhal {
            return err(format!("controller {} cannot be trained", self.controller));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return err("alpha outside [0, 1]".into());
        }
        Ok(())
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            dt_sim: self.sim_step,
            substeps_per_action: (self.action_step / self.sim_step).round() as usize,
            v_max: self.v_max,
            a_max: self.a_max,
            a_min: self.a_min,
            vehicle_length: self.vehicle_length,
            vehicle_width: self.vehicle_width,
            min_crossing_speed: self.min_crossing_speed,
            spawn_distance: self.spawn_distance,
            spawn_speed: self.v_max,
            hold_setback: 4.0,
        }
    }

    pub fn table_params(&self) -> TableParams {
        TableParams {
            dt: self.table_dt,
            t_r: self.reservation_horizon,
            vehicle_length: self.vehicle_length,
            form: if self.exact_window_form {
                WindowForm::Exact { vehicle_width: self.vehicle_width }
            } else {
                WindowForm::Buffered { eps: self.eps_buffer }
            },
        }
    }

    pub fn dhal_params(&self) -> DhalParams {
        DhalParams {
            alpha: self.alpha,
            a_min: self.a_min,
            a_max: self.a_max,
            d_min: 0.0,
            d_max: self.control_distance,
            gamma: self.gamma_initial,
            gamma_start: self.gamma_start,
            v_keep: self.v_keep,
            mask_lookahead: self.mask_lookahead,
            actor_lr: self.actor_lr,
            discriminator_lr: self.discriminator_lr,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_size,
            update_every: self.update_every,
            fresh_window: self.fresh_window,
        }
    }

    pub fn platoon_config(&self) -> PlatoonConfig {
        PlatoonConfig {
            max_size: self.platoon_max_size,
            join_gap: self.platoon_join_gap,
            headway: self.platoon_headway,
        }
    }

    /// Training epoch budget after desk scaling.
    pub fn effective_epochs(&self) -> usize {
        ((self.max_epochs as f64 * self.desk_scale).round() as usize).max(1)
    }

    /// Replication seeds for test mode.
    pub fn test_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.seed]
        } else {
            self.seeds.clone()
        }
    }

    /// Demand after desk scaling, veh/h.
    pub fn scaled_flow(&self) -> f64 {
        self.flow.rate_veh_h() * self.desk_scale
    }
}
