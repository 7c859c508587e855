//! Evaluation metrics: passing ratio, stopping ratio, travel-time statistics,
//! and an instantaneous power-demand fuel model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::VehicleId;

/// Idle fuel burn in mL/s.
pub const FUEL_IDLE_RATE: f64 = 0.15;
/// Vehicle mass in kg.
pub const FUEL_MASS: f64 = 1500.0;
/// Constant rolling-resistance force in N.
pub const FUEL_C0: f64 = 150.0;
/// Aerodynamic drag coefficient in N s^2/m^2.
pub const FUEL_C1: f64 = 0.4;
/// Fuel per unit of positive traction energy: 1 kJ is roughly 0.03 mL.
pub const FUEL_PER_JOULE: f64 = 0.03e-3;

/// Instantaneous fuel rate in mL/s for speed `v` (m/s) and acceleration `a`
/// (m/s^2). Braking and coasting never go below idle.
pub fn fuel_rate(v: f64, a: f64) -> f64 {
    debug_assert!(v >= 0.0);
    let traction_power = (FUEL_MASS * a + FUEL_C0 + FUEL_C1 * v * v) * v;
    FUEL_IDLE_RATE + FUEL_PER_JOULE * traction_power.max(0.0)
}

/// How a vehicle's trip ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TripOutcome {
    Passed,
    Collided,
    Unfinished,
}

/// Completed (or terminated) record for one vehicle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TripRecord {
    pub vehicle: VehicleId,
    pub trajectory: usize,
    pub spawn_time: f64,
    /// Entry into the preparation zone; `None` if the vehicle never got there.
    pub t_enter_prep: Option<f64>,
    /// Exit from the crossing zone for passed trips.
    pub t_exit_cross: Option<f64>,
    /// Ever slower than 0.1 m/s inside the preparation zone.
    pub stopped: bool,
    pub outcome: TripOutcome,
    /// Integrated fuel over the whole trip, mL.
    pub fuel_ml: f64,
}

impl TripRecord {
    pub fn travel_time(&self) -> Option<f64> {
        match (self.t_enter_prep, self.t_exit_cross) {
            (Some(a), Some(b)) if self.outcome == TripOutcome::Passed => Some(b - a),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot compute metrics over an empty trip set")]
    EmptyTripSet,
}

/// The five evaluation metrics over one episode's trips.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Passing ratio, percent.
    pub pr: f64,
    /// Stopping ratio, percent.
    pub sr: f64,
    /// Average travel time of passed trips, seconds. Absent without passes.
    pub att: Option<f64>,
    /// Population standard deviation of passed travel times, seconds.
    pub dtt: Option<f64>,
    /// Average fuel consumption of passed trips, mL/vehicle.
    pub afc: Option<f64>,
    pub n_total: usize,
    pub n_passed: usize,
    pub n_collided: usize,
    pub n_unfinished: usize,
    pub n_stopped: usize,
}

pub fn compute_report(trips: &[TripRecord]) -> Result<MetricsReport, MetricsError> {
    if trips.is_empty() {
        return Err(MetricsError::EmptyTripSet);
    }
    let n_total = trips.len();
    let n_passed = trips.iter().filter(|t| t.outcome == TripOutcome::Passed).count();
    let n_collided = trips.iter().filter(|t| t.outcome == TripOutcome::Collided).count();
    let n_unfinished = trips.iter().filter(|t| t.outcome == TripOutcome::Unfinished).count();
    let n_stopped = trips.iter().filter(|t| t.stopped).count();

    let times: Vec<f64> = trips.iter().filter_map(|t| t.travel_time()).collect();
    let (att, dtt, afc) = if times.is_empty() {
        (None, None, None)
    } else {
        let mean = times.iter().sum::<f64>() / times.len() as f64;
        let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / times.len() as f64;
        let fuel: f64 = trips
            .iter()
            .filter(|t| t.outcome == TripOutcome::Passed)
            .map(|t| t.fuel_ml)
            .sum::<f64>()
            / n_passed as f64;
        (Some(mean), Some(var.sqrt()), Some(fuel))
    };

    Ok(MetricsReport {
        pr: 100.0 * n_passed as f64 / n_total as f64,
        sr: 100.0 * n_stopped as f64 / n_total as f64,
        att,
        dtt,
        afc,
        n_total,
        n_passed,
        n_collided,
        n_unfinished,
        n_stopped,
    })
}

/// Mean and population standard deviation of a metric across episode reports.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
