//! Core library: intersection geometry, microscopic vehicle simulation,
//! reservation-based conflict checking, a minimal neural-network engine, the
//! hierarchical adversarial learning stack, rule-based baseline controllers,
//! evaluation metrics, and the experiment harness.

pub mod baselines;
pub mod config;
pub mod dhal;
pub mod episode;
pub mod geometry;
pub mod nnet;
pub mod metrics;
pub mod reservation;
pub mod runner;
pub mod simcore;

use serde::{Deserialize, Serialize};

/// Unique vehicle identifier, assigned in spawn order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VehicleId(pub u64);

impl std::fmt::Display for VehicleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
