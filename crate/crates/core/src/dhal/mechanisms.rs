//! Behavioral mechanisms wrapped around the raw actor output: state
//! maintenance (hold speed while conflict-free) and the action mask (veto
//! actions that manufacture new persistent reservation conflicts).

use std::collections::BTreeSet;

use crate::geometry::Layout;
use crate::reservation::{occupancy_window, TableParams, VehicleProbe, V_FLOOR};
use crate::simcore::SimParams;
use crate::VehicleId;

/// Hold the previous speed when conflict-free and fast enough.
pub fn state_maintenance(l_c: bool, v: f64, v_keep: f64, a_proposed: f64) -> f64 {
    if !l_c && v >= v_keep {
        0.0
    } else {
        a_proposed
    }
}

/// Would `a_proposed`, held for `lookahead` action steps, create a conflict
/// pair for `ego` that does not exist now and is still present at the
/// horizon? Transient conflicts that clear within the lookahead (passage
/// order swaps) are allowed.
///
/// Opponents are propagated at constant current speed; the ego follows the
/// proposed acceleration. Returns the masked action: 0 (hold speed) when the
/// veto fires, otherwise the proposal.
pub fn action_mask(
    layout: &Layout,
    table: &TableParams,
    sim: &SimParams,
    probes: &[VehicleProbe],
    current_pairs: &BTreeSet<(VehicleId, VehicleId)>,
    ego: VehicleId,
    a_proposed: f64,
    lookahead: usize,
) -> f64 {
    let Some(ego_probe) = probes.iter().find(|p| p.id == ego) else {
        return a_proposed;
    };
    let dt = sim.dt_action();
    let horizon = lookahead as f64 * dt;

    // Ego state at the horizon under the proposed acceleration.
    let mut ego_v = ego_probe.v;
    let mut ego_s = ego_probe.s;
    for _ in 0..lookahead {
        ego_v = (ego_v + a_proposed * dt).clamp(0.0, sim.v_max);
        ego_s += ego_v * dt;
    }

    let ego_steps = |probe_s: f64, probe_v: f64, cp_id: usize| -> Option<(usize, usize)> {
        let cp = &layout.conflicts.points[cp_id];
        let s_cp = cp.arc_on(ego_probe.trajectory)?;
        let d = s_cp - probe_s;
        if d + table.vehicle_length < 0.0 {
            return None;
        }
        let eps = table.form.buffer(cp.theta);
        let w = occupancy_window(d, table.vehicle_length, probe_v.max(0.0), eps, table.t_r);
        table.step_range(&w)
    };

    for other in probes {
        if other.id == ego {
            continue;
        }
        let key = if other.id < ego { (other.id, ego) } else { (ego, other.id) };
        if current_pairs.contains(&key) {
            continue; // existing conflicts are the actor's to resolve
        }
        let shared: Vec<usize> = if other.trajectory == ego_probe.trajectory {
            layout.conflicts.by_trajectory[ego_probe.trajectory].clone()
        } else {
            layout.conflicts.shared_points(ego_probe.trajectory, other.trajectory)
        };
        if shared.is_empty() {
            continue;
        }
        let other_s = other.s + other.v * horizon;
        for cp_id in shared {
            let cp = &layout.conflicts.points[cp_id];
            let (Some(we), Some(wo)) = (
                ego_steps(ego_s, ego_v.max(V_FLOOR), cp_id),
                {
                    let s_cp = cp.arc_on(other.trajectory).unwrap();
                    let d = s_cp - other_s;
                    if d + table.vehicle_length < 0.0 {
                        None
                    } else {
                        let eps = table.form.buffer(cp.theta);
                        let w = occupancy_window(
                            d,
                            table.vehicle_length,
                            other.v.max(V_FLOOR),
                            eps,
                            table.t_r,
                        );
                        table.step_range(&w)
                    }
                },
            ) else {
                continue;
            };
            if we.0 <= wo.1 && wo.0 <= we.1 {
                return 0.0;
            }
        }
    }
    a_proposed
}
