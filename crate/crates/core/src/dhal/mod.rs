//! Hierarchical adversarial learning: state encoding, the actor and four
//! discriminator networks, label fusion, the adversarial actor loss, the
//! memory palace, behavioral mechanisms, and the training loop.

pub mod controller;
pub mod encoding;
pub mod losses;
pub mod mechanisms;
pub mod nets;
pub mod palace;
pub mod training;

use serde::{Deserialize, Serialize};

/// Learning hyperparameters and loss constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DhalParams {
    /// Fusion weight between raw and reconstructed role labels.
    pub alpha: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Control boundaries for the potential-energy weight.
    pub d_min: f64,
    pub d_max: f64,
    /// Final value of the potential-energy discount.
    pub gamma: f64,
    /// Schedule start; decays linearly to `gamma` over the first half of
    /// training.
    pub gamma_start: f64,
    /// Speed threshold for state maintenance.
    pub v_keep: f64,
    /// Action-mask lookahead in action steps.
    pub mask_lookahead: usize,
    pub actor_lr: f64,
    pub discriminator_lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Environment action steps between training rounds.
    pub update_every: usize,
    /// Newest-experience window the actor draws fresh states from.
    pub fresh_window: usize,
}

impl Default for DhalParams {
    fn default() -> Self {
        DhalParams {
            alpha: 0.6,
            a_min: -4.0,
            a_max: 4.0,
            d_min: 0.0,
            d_max: 100.0,
            gamma: 0.2,
            gamma_start: 0.9,
            v_keep: 3.0,
            mask_lookahead: 5,
            actor_lr: 1e-5,
            discriminator_lr: 1e-5,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            update_every: 16,
            fresh_window: 4096,
        }
    }
}

/// Potential-energy discount at a given training progress: linear decay from
/// `gamma_start` to `gamma` over the first half of training, then constant.
pub fn gamma_at(params: &DhalParams, step: u64, total_steps: u64) -> f64 {
    let frac = if total_steps == 0 { 1.0 } else { step as f64 / total_steps as f64 };
    if frac >= 0.5 {
        params.gamma
    } else {
        params.gamma_start - (params.gamma_start - params.gamma) * (frac / 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_schedule_endpoints() {
        let p = DhalParams::default();
        assert!((gamma_at(&p, 0, 1000) - 0.9).abs() < 1e-12);
        assert!((gamma_at(&p, 500, 1000) - 0.2).abs() < 1e-12);
        assert!((gamma_at(&p, 1000, 1000) - 0.2).abs() < 1e-12);
        // Midpoint of the decay phase.
        assert!((gamma_at(&p, 250, 1000) - 0.55).abs() < 1e-12);
    }
}
