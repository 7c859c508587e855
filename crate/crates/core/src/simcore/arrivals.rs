//! Poisson vehicle arrivals with uneven directional loading.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

/// Per-trajectory Poisson arrival streams. Inter-arrival times are
/// exponential; arrivals blocked at the spawn point stay pending until the
/// spawn gap clears.
#[derive(Clone, Debug)]
pub struct ArrivalProcess {
    /// veh/s per trajectory.
    rates: Vec<f64>,
    next_time: Vec<f64>,
    pending: Vec<usize>,
    rng: ChaCha8Rng,
}

impl ArrivalProcess {
    /// Even split of `total_rate` (veh/h) across `n` trajectories.
    pub fn uniform(total_rate_veh_h: f64, n: usize, rng: ChaCha8Rng) -> Self {
        Self::with_shares(total_rate_veh_h, vec![1.0; n], rng)
    }

    /// Uneven directional loading: per-trajectory shares drawn once as
    /// `1 +/- 30%` perturbations around uniform, then normalized.
    pub fn uneven(total_rate_veh_h: f64, n: usize, mut rng: ChaCha8Rng) -> Self {
        let shares: Vec<f64> = (0..n).map(|_| 1.0 + rng.random_range(-0.3..0.3)).collect();
        Self::with_shares(total_rate_veh_h, shares, rng)
    }

    pub fn with_shares(total_rate_veh_h: f64, shares: Vec<f64>, mut rng: ChaCha8Rng) -> Self {
        assert!(!shares.is_empty());
        let sum: f64 = shares.iter().sum();
        let rates: Vec<f64> =
            shares.iter().map(|s| total_rate_veh_h / 3600.0 * s / sum).collect();
        let mut next_time = vec![f64::INFINITY; rates.len()];
        for (j, &rate) in rates.iter().enumerate() {
            if rate > 0.0 {
                next_time[j] = Exp::new(rate).unwrap().sample(&mut rng);
            }
        }
        let pending = vec![0; next_time.len()];
        ArrivalProcess { rates, next_time, pending, rng }
    }

    pub fn total_rate_veh_s(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn rates_veh_s(&self) -> &[f64] {
        &self.rates
    }

    /// Advance to time `t`, moving due arrivals into the pending queues.
    pub fn poll(&mut self, t: f64) {
        for j in 0..self.rates.len() {
            while self.next_time[j] <= t {
                self.pending[j] += 1;
                let gap = Exp::new(self.rates[j]).unwrap().sample(&mut self.rng);
                self.next_time[j] += gap;
            }
        }
    }

    /// Number of vehicles waiting to spawn on a trajectory.
    pub fn pending(&self, trajectory: usize) -> usize {
        self.pending[trajectory]
    }

    /// Consume one pending arrival after a successful spawn.
    pub fn take(&mut self, trajectory: usize) {
        debug_assert!(self.pending[trajectory] > 0);
        self.pending[trajectory] -= 1;
    }

    pub fn n_trajectories(&self) -> usize {
        self.rates.len()
    }

    /// Draw a raw inter-arrival sample for trajectory `j` (test support for
    /// distribution checks; does not touch the schedule).
    pub fn sample_interarrival(&mut self, j: usize) -> f64 {
        Exp::new(self.rates[j]).unwrap().sample(&mut self.rng)
    }
}
