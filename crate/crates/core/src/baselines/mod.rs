//! Rule-based comparison controllers sharing the episode engine: fixed-time
//! and longest-queue-first signals, first-come-first-serve reservations, and
//! FCFS with platooning.

pub mod reservation_based;
pub mod signal;

pub use reservation_based::{FcfsController, PlatoonConfig, PlatoonController};
pub use signal::{FixedTimeController, LqfController, SignalPlan};

use crate::simcore::{SimParams, VehicleState};

/// Intelligent-driver-model car following used by every rule-based
/// controller. `gap` and `dv` describe the leader (gap to its rear bumper,
/// closing speed); `None` means free road.
pub fn idm_acceleration(
    sim: &SimParams,
    v: f64,
    leader: Option<(f64, f64)>,
    time_headway: f64,
) -> f64 {
    let comfort_decel = 3.0;
    let min_gap = 2.0;
    let free = 1.0 - (v / sim.v_max).powi(4);
    let interaction = match leader {
        Some((gap, dv)) => {
            let desired =
                min_gap + v * time_headway + v * dv / (2.0 * (sim.a_max * comfort_decel).sqrt());
            let g = gap.max(0.1);
            (desired.max(0.0) / g).powi(2)
        }
        None => 0.0,
    };
    (sim.a_max * (free - interaction)).clamp(sim.a_min, sim.a_max)
}

/// Gap and closing speed to the nearest same-trajectory leader.
pub fn leader_gap(sim: &SimParams, vehicle: &VehicleState, leader: Option<&VehicleState>) -> Option<(f64, f64)> {
    leader.map(|l| (l.s - sim.vehicle_length - vehicle.s, vehicle.v - l.v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idm_accelerates_on_free_road_and_brakes_on_short_gap() {
        let sim = SimParams::default();
        assert!(idm_acceleration(&sim, 5.0, None, 1.5) > 2.0);
        // Near standstill gap: hard braking.
        assert!(idm_acceleration(&sim, 10.0, Some((3.0, 10.0)), 1.5) <= sim.a_min + 1e-9);
        // At the speed limit the free term vanishes.
        assert!(idm_acceleration(&sim, 15.0, None, 1.5).abs() < 1e-9);
    }
}
