//! Crossing-zone admission: the gate decision, the ledger of reserved
//! occupancy windows held by admitted vehicles, and launch plans for vehicles
//! restarting from a hold.
//!
//! A vehicle is admitted only with a complete crossing plan (constant speed,
//! or a full-throttle ramp to a constant speed). The plan's occupancy windows
//! are recorded in absolute time; admission requires them to be disjoint from
//! every reserved window at shared conflict points. In permissive mode the
//! window checks are skipped and only kinematic feasibility is enforced;
//! whatever happens inside the zone is then ground truth for learning.

use std::collections::BTreeMap;

use crate::geometry::Layout;
use crate::reservation::TableParams;
use crate::simcore::{SimParams, VehicleState, WorldState, Zone};
use crate::VehicleId;

/// Whether the gate enforces window disjointness or only kinematic entry
/// conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GateMode {
    Enforced,
    Permissive,
}

/// A reserved crossing: absolute-time occupancy windows plus the committed
/// speed profile.
#[derive(Clone, Debug)]
pub struct ReservedPlan {
    pub vehicle: VehicleId,
    pub trajectory: usize,
    pub crossing_speed: f64,
    /// `(conflict point, t_start, t_end)` in absolute simulation time.
    pub windows: Vec<(usize, f64, f64)>,
    /// Launch ramp target if the plan starts from low speed.
    pub launch_target: Option<f64>,
}

/// Windows currently reserved by admitted, still-active vehicles.
#[derive(Clone, Debug, Default)]
pub struct AdmissionLedger {
    plans: BTreeMap<VehicleId, ReservedPlan>,
}

impl AdmissionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, plan: ReservedPlan) {
        self.plans.insert(plan.vehicle, plan);
    }

    pub fn remove(&mut self, vehicle: VehicleId) {
        self.plans.remove(&vehicle);
    }

    pub fn contains(&self, vehicle: VehicleId) -> bool {
        self.plans.contains_key(&vehicle)
    }

    pub fn plan(&self, vehicle: VehicleId) -> Option<&ReservedPlan> {
        self.plans.get(&vehicle)
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }

    /// Does the candidate plan overlap any reserved window at a shared
    /// conflict point? `exclude` ignores one vehicle's own prior reservation.
    pub fn conflicts_with(&self, candidate: &ReservedPlan, exclude: Option<VehicleId>) -> bool {
        for plan in self.plans.values() {
            if Some(plan.vehicle) == exclude || plan.vehicle == candidate.vehicle {
                continue;
            }
            for &(cp, t1, t2) in &candidate.windows {
                for &(ocp, o1, o2) in &plan.windows {
                    if cp == ocp && t1 <= o2 && o1 <= t2 {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn plans(&self) -> impl Iterator<Item = &ReservedPlan> {
        self.plans.values()
    }
}

#[derive(Clone, Debug)]
pub enum GateDecision {
    Admit(ReservedPlan),
    Hold,
}

/// Extra clearance beyond the thin-line `w/2 * cot(theta) + w/2` model. The
/// model ignores body corners and the heading rotation of turning vehicles
/// near the crossing; both reach a few decimeters past it.
const CORNER_PAD: f64 = 0.75;

/// Buffer used for admission windows: at least the configured one, never
/// below the geometric cot-form term, plus the corner pad.
fn admission_buffer(table: &TableParams, sim: &SimParams, theta: f64) -> f64 {
    let configured = table.form.buffer(theta);
    let exact = crate::reservation::WindowForm::Exact { vehicle_width: sim.vehicle_width }
        .buffer(theta);
    configured.max(exact) + CORNER_PAD
}

/// Time for a constant-speed vehicle to cover `dist`, rounded up to whole
/// substeps to match the integrator (speed update first, then position).
fn constant_time_to_cover(sim: &SimParams, v: f64, dist: f64) -> f64 {
    if dist <= 0.0 {
        return 0.0;
    }
    sim.dt_sim * (dist / (v * sim.dt_sim)).ceil()
}

/// Occupancy windows for a constant-speed crossing from the vehicle's current
/// state, in absolute time.
pub fn constant_speed_windows(
    layout: &Layout,
    table: &TableParams,
    sim: &SimParams,
    vehicle: &VehicleState,
    v: f64,
    now: f64,
) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for &cp_id in &layout.conflicts.by_trajectory[vehicle.trajectory] {
        let cp = &layout.conflicts.points[cp_id];
        let s_cp = cp.arc_on(vehicle.trajectory).unwrap();
        let d = s_cp - vehicle.s;
        if d + table.vehicle_length < 0.0 {
            continue;
        }
        let eps = admission_buffer(table, sim, cp.theta);
        let t1 = constant_time_to_cover(sim, v, d - eps);
        let t2 = constant_time_to_cover(sim, v, d + table.vehicle_length + eps);
        out.push((cp_id, now + t1, now + t2));
    }
    out
}

/// Discrete launch profile: full throttle from `v0` up to `target`, then
/// constant. Returns the time needed to cover `dist`, matching the simulation
/// integrator exactly (speed update first, then position).
pub fn launch_time_to_cover(sim: &SimParams, v0: f64, target: f64, dist: f64) -> f64 {
    if dist <= 0.0 {
        return 0.0;
    }
    let dt = sim.dt_sim;
    let mut v = v0;
    let mut s = 0.0;
    let mut t = 0.0;
    let max_t = 200.0;
    while s < dist && t < max_t {
        if v < target {
            v = (v + sim.a_max.min((target - v) / dt) * dt).min(target);
        }
        s += v * dt;
        t += dt;
    }
    t
}

/// Occupancy windows for a launch plan, in absolute time.
pub fn launch_windows(
    layout: &Layout,
    table: &TableParams,
    sim: &SimParams,
    vehicle: &VehicleState,
    target: f64,
    now: f64,
) -> Vec<(usize, f64, f64)> {
    let mut out = Vec::new();
    for &cp_id in &layout.conflicts.by_trajectory[vehicle.trajectory] {
        let cp = &layout.conflicts.points[cp_id];
        let s_cp = cp.arc_on(vehicle.trajectory).unwrap();
        let d = s_cp - vehicle.s;
        if d + table.vehicle_length < 0.0 {
            continue;
        }
        let eps = admission_buffer(table, sim, cp.theta);
        let t1 = launch_time_to_cover(sim, vehicle.v, target, d - eps);
        let t2 = launch_time_to_cover(sim, vehicle.v, target, d + table.vehicle_length + eps);
        out.push((cp_id, now + t1, now + t2));
    }
    out
}

/// Same-trajectory spacing check: at constant committed speeds the candidate
/// must keep at least `margin` clear of every admitted vehicle ahead until
/// that vehicle exits.
fn headway_ok(
    layout: &Layout,
    sim: &SimParams,
    world: &WorldState,
    ledger: &AdmissionLedger,
    vehicle: &VehicleState,
    candidate_speed: f64,
) -> bool {
    let margin = 1.0;
    for other in world.vehicles.values() {
        if other.id == vehicle.id
            || other.trajectory != vehicle.trajectory
            || other.s <= vehicle.s
        {
            continue;
        }
        let Some(plan) = ledger.plan(other.id) else { continue };
        // Lower bound on the leader's speed: launch plans only speed up.
        let lead_v = if plan.launch_target.is_some() {
            other.v.max(0.1)
        } else {
            plan.crossing_speed
        };
        let gap_now = other.s - sim.vehicle_length - vehicle.s;
        if gap_now < margin {
            return false;
        }
        if candidate_speed > lead_v {
            let exit_s = layout.trajectories[other.trajectory].exit_s;
            let t_exit = (exit_s - other.s).max(0.0) / lead_v.max(0.1);
            let gap_at_exit = gap_now + (lead_v - candidate_speed) * t_exit;
            if gap_at_exit < margin {
                return false;
            }
        }
    }
    true
}

/// Is any same-trajectory vehicle ahead still unadmitted? Admission is
/// granted strictly in lane order so a committed vehicle can never run into
/// an uncommitted one.
pub fn has_unadmitted_leader(world: &WorldState, vehicle: &VehicleState) -> bool {
    world.vehicles.values().any(|o| {
        o.id != vehicle.id
            && o.trajectory == vehicle.trajectory
            && o.s > vehicle.s
            && o.zone != Zone::Crossing
            && !o.is_admitted()
    })
}

/// The admission gate for a moving vehicle: admit at the current speed or
/// hold. In enforced mode the constant-current-speed windows must be disjoint
/// from every reserved window and in-lane spacing must stay safe.
pub fn crossing_gate(
    layout: &Layout,
    table: &TableParams,
    world: &WorldState,
    ledger: &AdmissionLedger,
    vehicle: &VehicleState,
    mode: GateMode,
) -> GateDecision {
    let sim = &world.params;
    if vehicle.v < sim.min_crossing_speed {
        return GateDecision::Hold;
    }
    if has_unadmitted_leader(world, vehicle) {
        return GateDecision::Hold;
    }
    let plan = ReservedPlan {
        vehicle: vehicle.id,
        trajectory: vehicle.trajectory,
        crossing_speed: vehicle.v,
        windows: constant_speed_windows(layout, table, sim, vehicle, vehicle.v, world.t),
        launch_target: None,
    };
    if mode == GateMode::Enforced {
        if ledger.conflicts_with(&plan, Some(vehicle.id)) {
            return GateDecision::Hold;
        }
        if !headway_ok(layout, sim, world, ledger, vehicle, vehicle.v) {
            return GateDecision::Hold;
        }
    }
    GateDecision::Admit(plan)
}

/// Admission for a held (slow or stopped) vehicle via a launch ramp. The ramp
/// target is the fastest speed reachable before the crossing boundary.
pub fn launch_gate(
    layout: &Layout,
    table: &TableParams,
    world: &WorldState,
    ledger: &AdmissionLedger,
    vehicle: &VehicleState,
    mode: GateMode,
) -> GateDecision {
    let sim = &world.params;
    let boundary = layout.trajectories[vehicle.trajectory].crossing_entry_s;
    let d_b = boundary - vehicle.s;
    if d_b <= 0.0 {
        return GateDecision::Hold;
    }
    let reachable = (vehicle.v * vehicle.v + 2.0 * sim.a_max * (d_b - 0.3).max(0.0)).sqrt();
    let target = reachable.min(sim.v_max);
    if target < sim.min_crossing_speed {
        return GateDecision::Hold;
    }
    if has_unadmitted_leader(world, vehicle) {
        return GateDecision::Hold;
    }
    let plan = ReservedPlan {
        vehicle: vehicle.id,
        trajectory: vehicle.trajectory,
        crossing_speed: target,
        windows: launch_windows(layout, table, sim, vehicle, target, world.t),
        launch_target: Some(target),
    };
    if mode == GateMode::Enforced {
        if ledger.conflicts_with(&plan, Some(vehicle.id)) {
            return GateDecision::Hold;
        }
        if !headway_ok(layout, sim, world, ledger, vehicle, target) {
            return GateDecision::Hold;
        }
    }
    GateDecision::Admit(plan)
}

/// Distance to the boundary at which an unadmitted vehicle must either be
/// admitted or start braking toward the hold point.
pub fn decision_distance(sim: &SimParams, v: f64) -> f64 {
    sim.hold_setback + sim.stopping_distance(v) + v * sim.dt_action() + 0.7
}
