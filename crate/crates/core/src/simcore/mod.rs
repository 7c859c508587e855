//! World state and time: vehicle kinematics, zone transitions, crossing-zone
//! speed enforcement, rear-end safety override, and ground-truth collision
//! detection.
//!
//! Time advances in 0.1 s substeps; controllers act every second substep.
//! Vehicles committed to a crossing plan (constant speed, or a launch ramp to
//! a constant speed) follow the plan exactly; everyone else follows the
//! clamped controller action.

pub mod admission;
pub mod arrivals;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Layout, Vec2};
use crate::metrics::{fuel_rate, TripOutcome, TripRecord};
use crate::VehicleId;

/// Simulation constants. Lengths in meters, times in seconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt_sim: f64,
    pub substeps_per_action: usize,
    pub v_max: f64,
    pub a_max: f64,
    pub a_min: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    /// Slowest speed at which the crossing zone may be entered.
    pub min_crossing_speed: f64,
    /// Spawn point distance upstream of the stop line.
    pub spawn_distance: f64,
    pub spawn_speed: f64,
    /// Held vehicles aim to stop this far short of the crossing boundary so a
    /// restart can reach the minimum crossing speed before the boundary.
    pub hold_setback: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt_sim: 0.1,
            substeps_per_action: 2,
            v_max: 15.0,
            a_max: 4.0,
            a_min: -4.0,
            vehicle_length: 5.0,
            vehicle_width: 1.8,
            min_crossing_speed: 3.0,
            spawn_distance: 200.0,
            spawn_speed: 15.0,
            hold_setback: 4.0,
        }
    }
}

impl SimParams {
    pub fn dt_action(&self) -> f64 {
        self.dt_sim * self.substeps_per_action as f64
    }

    /// Distance needed to brake from `v` to a stop at full deceleration.
    pub fn stopping_distance(&self, v: f64) -> f64 {
        v * v / (2.0 * self.a_min.abs())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Zone {
    Upstream,
    Preparation,
    Crossing,
    Done,
}

/// A crossing commitment fixed at admission. Once committed the vehicle's
/// motion is fully determined until it exits, so its reserved occupancy
/// windows stay truthful.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Commitment {
    /// Hold current speed to the exit.
    Constant,
    /// Accelerate at full throttle to `target`, then hold it to the exit.
    Launch { target: f64 },
}

#[derive(Clone, Debug)]
pub struct VehicleState {
    pub id: VehicleId,
    pub trajectory: usize,
    /// Arc position of the front bumper.
    pub s: f64,
    pub v: f64,
    pub spawn_time: f64,
    pub zone: Zone,
    /// Constant speed fixed at crossing-zone admission.
    pub crossing_speed: Option<f64>,
    pub commitment: Option<Commitment>,
    pub t_enter_prep: Option<f64>,
    pub stopped_in_prep: bool,
    pub fuel_ml: f64,
}

impl VehicleState {
    pub fn is_admitted(&self) -> bool {
        self.commitment.is_some()
    }
}

/// Events produced by one action step.
#[derive(Clone, Debug, Default)]
pub struct StepResult {
    pub exited: Vec<TripRecord>,
    pub collisions: Vec<CollisionEvent>,
    /// Vehicles that reached the crossing boundary without being admitted and
    /// were held there. Should stay empty when the hold machinery works.
    pub boundary_clamps: Vec<VehicleId>,
    /// Vehicles whose commanded acceleration was outside the allowed range.
    pub clamped_actions: Vec<VehicleId>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub a: VehicleId,
    pub b: VehicleId,
    pub position: Vec2,
}

/// The simulated world. Mutated only by [`WorldState::step`] and spawning.
#[derive(Clone, Debug)]
pub struct WorldState {
    pub t: f64,
    pub params: SimParams,
    pub vehicles: BTreeMap<VehicleId, VehicleState>,
    next_id: u64,
    pub action_steps: u64,
}

impl WorldState {
    pub fn new(params: SimParams) -> Self {
        WorldState { t: 0.0, params, vehicles: BTreeMap::new(), next_id: 0, action_steps: 0 }
    }

    pub fn allocate_id(&mut self) -> VehicleId {
        let id = VehicleId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Insert a vehicle at the spawn point of its trajectory.
    pub fn spawn_vehicle(&mut self, layout: &Layout, trajectory: usize) -> VehicleId {
        let id = self.allocate_id();
        let spawn_s = layout.trajectories[trajectory].stop_line_s - self.params.spawn_distance;
        self.vehicles.insert(
            id,
            VehicleState {
                id,
                trajectory,
                s: spawn_s,
                v: self.params.spawn_speed,
                spawn_time: self.t,
                zone: Zone::Upstream,
                crossing_speed: None,
                commitment: None,
                t_enter_prep: None,
                stopped_in_prep: false,
                fuel_ml: 0.0,
            },
        );
        id
    }

    /// Is the spawn point of `trajectory` clear of traffic?
    ///
    /// The gap must cover the spawn-speed stopping envelope so a fresh vehicle
    /// never starts inside its leader's braking margin.
    pub fn spawn_clear(&self, layout: &Layout, trajectory: usize) -> bool {
        let spawn_s = layout.trajectories[trajectory].stop_line_s - self.params.spawn_distance;
        let needed = self.params.stopping_distance(self.params.spawn_speed)
            + self.params.vehicle_length
            + 2.0;
        self.vehicles
            .values()
            .filter(|v| v.trajectory == trajectory && v.zone != Zone::Done)
            .all(|v| v.s - spawn_s >= needed || v.s < spawn_s)
    }

    /// Nearest same-trajectory vehicle ahead of `vehicle`, if any.
    pub fn leader_of(&self, vehicle: &VehicleState) -> Option<&VehicleState> {
        self.vehicles
            .values()
            .filter(|o| {
                o.id != vehicle.id && o.trajectory == vehicle.trajectory && o.s > vehicle.s
            })
            .min_by(|a, b| a.s.partial_cmp(&b.s).unwrap())
    }

    /// Advance one action step: every commanded acceleration is held for
    /// `substeps_per_action` substeps. Vehicles missing from `actions` hold
    /// zero acceleration.
    pub fn step(
        &mut self,
        layout: &Layout,
        actions: &BTreeMap<VehicleId, f64>,
    ) -> StepResult {
        let mut result = StepResult::default();
        let p = self.params;

        // Flag out-of-range commands once per action step.
        for (&id, &a) in actions {
            if a < p.a_min - 1e-9 || a > p.a_max + 1e-9 {
                result.clamped_actions.push(id);
            }
        }

        for _ in 0..p.substeps_per_action {
            self.t += p.dt_sim;

            let ids: Vec<VehicleId> = self.vehicles.keys().copied().collect();
            for id in ids {
                let vehicle = self.vehicles.get_mut(&id).unwrap();
                let traj = &layout.trajectories[vehicle.trajectory];
                let boundary = traj.crossing_entry_s;

                let v_before = vehicle.v;
                let a = match vehicle.zone {
                    Zone::Crossing => 0.0,
                    _ => match vehicle.commitment {
                        Some(Commitment::Constant) => 0.0,
                        Some(Commitment::Launch { target }) => {
                            if vehicle.v < target {
                                p.a_max.min((target - vehicle.v) / p.dt_sim)
                            } else {
                                0.0
                            }
                        }
                        None => actions.get(&id).copied().unwrap_or(0.0).clamp(p.a_min, p.a_max),
                    },
                };

                match vehicle.zone {
                    Zone::Crossing => {
                        let cs = vehicle.crossing_speed.expect("crossing vehicle has fixed speed");
                        debug_assert!(
                            (vehicle.v - cs).abs() < 1e-9,
                            "vehicle {id} changed speed inside the crossing zone"
                        );
                        vehicle.s += cs * p.dt_sim;
                    }
                    Zone::Upstream | Zone::Preparation => {
                        vehicle.v = (vehicle.v + a * p.dt_sim).clamp(0.0, p.v_max);
                        let new_s = vehicle.s + vehicle.v * p.dt_sim;
                        if new_s >= boundary {
                            if vehicle.is_admitted() {
                                let cs = vehicle
                                    .crossing_speed
                                    .expect("admitted vehicle has a crossing speed");
                                debug_assert!(
                                    (vehicle.v - cs).abs() < 0.5,
                                    "vehicle {id} entered the crossing zone off its plan"
                                );
                                vehicle.v = cs;
                                vehicle.s = new_s;
                                vehicle.zone = Zone::Crossing;
                            } else {
                                // Unadmitted vehicles never enter; hold at the
                                // boundary.
                                vehicle.s = boundary - 1e-6;
                                vehicle.v = 0.0;
                                if !result.boundary_clamps.contains(&id) {
                                    result.boundary_clamps.push(id);
                                }
                            }
                        } else {
                            vehicle.s = new_s;
                        }
                        if vehicle.zone == Zone::Upstream && vehicle.s >= 0.0 {
                            vehicle.zone = Zone::Preparation;
                            vehicle.t_enter_prep = Some(self.t);
                        }
                        if vehicle.zone == Zone::Preparation && vehicle.v < 0.1 {
                            vehicle.stopped_in_prep = true;
                        }
                    }
                    Zone::Done => {}
                }

                // Trapezoidal fuel integration over the substep.
                let rate0 = fuel_rate(v_before, a);
                let rate1 = fuel_rate(vehicle.v, a);
                vehicle.fuel_ml += 0.5 * (rate0 + rate1) * p.dt_sim;
            }

            // Exits.
            let exited: Vec<VehicleId> = self
                .vehicles
                .values()
                .filter(|v| v.zone == Zone::Crossing && v.s >= layout.trajectories[v.trajectory].exit_s)
                .map(|v| v.id)
                .collect();
            for id in exited {
                let v = self.vehicles.remove(&id).unwrap();
                result.exited.push(trip_record(&v, TripOutcome::Passed, self.t));
            }

            // Ground-truth collision check at substep resolution; collided
            // vehicles are removed so wreckage does not block the episode.
            // One substep can yield several pairs sharing a vehicle (pileup),
            // so positions are captured before any removal.
            let collisions = detect_collisions(self, layout);
            let mut involved = Vec::new();
            for (a, b) in collisions {
                let va = &self.vehicles[&a];
                let pos = layout.trajectories[va.trajectory].point_at(va.s);
                result.collisions.push(CollisionEvent { t: self.t, a, b, position: pos });
                involved.push(a);
                involved.push(b);
            }
            for id in involved {
                if let Some(v) = self.vehicles.remove(&id) {
                    result.exited.push(trip_record(&v, TripOutcome::Collided, self.t));
                }
            }
        }

        self.action_steps += 1;
        result
    }

    /// Terminate all remaining vehicles as unfinished (end of episode).
    pub fn drain_unfinished(&mut self) -> Vec<TripRecord> {
        let t = self.t;
        let out: Vec<TripRecord> = self
            .vehicles
            .values()
            .map(|v| trip_record(v, TripOutcome::Unfinished, t))
            .collect();
        self.vehicles.clear();
        out
    }
}

fn trip_record(v: &VehicleState, outcome: TripOutcome, now: f64) -> TripRecord {
    TripRecord {
        vehicle: v.id,
        trajectory: v.trajectory,
        spawn_time: v.spawn_time,
        t_enter_prep: v.t_enter_prep,
        t_exit_cross: if outcome == TripOutcome::Passed { Some(now) } else { None },
        stopped: v.stopped_in_prep,
        outcome,
        fuel_ml: v.fuel_ml,
    }
}

/// Braking command that stops the vehicle `d_remaining` meters ahead,
/// slightly short and never beyond.
pub fn brake_cmd(sim: &SimParams, v: f64, d_remaining: f64) -> f64 {
    if v <= 0.0 {
        return sim.a_min;
    }
    let d = (d_remaining - 0.2).max(0.05);
    (-v * v / (2.0 * d)).clamp(sim.a_min, 0.0)
}

/// Rear-end guard for the preparation zone: when the gap to a same-trajectory
/// leader is inside the stopping envelope, command full braking.
pub fn safety_override(
    params: &SimParams,
    vehicle: &VehicleState,
    leader: Option<&VehicleState>,
    proposed_a: f64,
) -> f64 {
    let Some(leader) = leader else { return proposed_a };
    let gap = leader.s - params.vehicle_length - vehicle.s;
    let envelope = params.stopping_distance(vehicle.v) + 2.0;
    if gap < envelope {
        params.a_min
    } else {
        proposed_a
    }
}

/// Anticipatory variant used by the engine: the guard only reacts at action
/// steps, so the envelope must also cover the travel and speed gained during
/// one step under the proposed command.
pub fn safety_override_anticipatory(
    params: &SimParams,
    vehicle: &VehicleState,
    leader: Option<&VehicleState>,
    proposed_a: f64,
) -> f64 {
    let Some(leader) = leader else { return proposed_a };
    let gap = leader.s - params.vehicle_length - vehicle.s;
    let dt = params.dt_action();
    let v_next = (vehicle.v + proposed_a.max(0.0) * dt).clamp(0.0, params.v_max);
    let envelope = params.stopping_distance(v_next) + v_next * dt + 2.0;
    if gap < envelope {
        params.a_min
    } else {
        proposed_a
    }
}

/// Oriented bounding box of a vehicle: front bumper at `point_at(s)`, body
/// extending backward along the path tangent.
#[derive(Clone, Copy, Debug)]
pub struct Footprint {
    pub center: Vec2,
    pub axis: Vec2,
    pub half_l: f64,
    pub half_w: f64,
}

pub fn footprint(params: &SimParams, layout: &Layout, vehicle: &VehicleState) -> Footprint {
    let traj = &layout.trajectories[vehicle.trajectory];
    let tangent = traj.tangent_at(vehicle.s);
    let front = traj.point_at(vehicle.s);
    Footprint {
        center: front.sub(tangent.scale(params.vehicle_length / 2.0)),
        axis: tangent,
        half_l: params.vehicle_length / 2.0,
        half_w: params.vehicle_width / 2.0,
    }
}

/// Separating-axis test for two oriented rectangles.
pub fn footprints_overlap(a: &Footprint, b: &Footprint) -> bool {
    let axes = [a.axis, a.axis.perp(), b.axis, b.axis.perp()];
    let d = b.center.sub(a.center);
    for axis in axes {
        let ra = a.half_l * a.axis.dot(axis).abs() + a.half_w * a.axis.perp().dot(axis).abs();
        let rb = b.half_l * b.axis.dot(axis).abs() + b.half_w * b.axis.perp().dot(axis).abs();
        if d.dot(axis).abs() > ra + rb {
            return false;
        }
    }
    true
}

/// All overlapping vehicle pairs at the current substep.
pub fn detect_collisions(world: &WorldState, layout: &Layout) -> Vec<(VehicleId, VehicleId)> {
    let states: Vec<&VehicleState> =
        world.vehicles.values().filter(|v| v.zone != Zone::Done).collect();
    let prints: Vec<Footprint> =
        states.iter().map(|v| footprint(&world.params, layout, v)).collect();
    let reach = world.params.vehicle_length + world.params.vehicle_width;
    let mut out = Vec::new();
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            if prints[i].center.dist(prints[j].center) > reach {
                continue;
            }
            if footprints_overlap(&prints[i], &prints[j]) {
                out.push((states[i].id, states[j].id));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_layout, LayoutConfig};
    use approx::assert_relative_eq;

    fn layout() -> Layout {
        build_layout(&LayoutConfig::default()).unwrap()
    }

    fn world_with_vehicle(layout: &Layout, trajectory: usize, s: f64, v: f64) -> (WorldState, VehicleId) {
        let mut world = WorldState::new(SimParams::default());
        let id = world.spawn_vehicle(layout, trajectory);
        let vehicle = world.vehicles.get_mut(&id).unwrap();
        vehicle.s = s;
        vehicle.v = v;
        if s >= 0.0 {
            vehicle.zone = Zone::Preparation;
            vehicle.t_enter_prep = Some(0.0);
        }
        (world, id)
    }

    #[test]
    fn integrator_matches_stated_arithmetic() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, 10.0, 5.0);
        let actions = BTreeMap::from([(id, 2.0)]);
        world.step(&layout, &actions);
        let v = &world.vehicles[&id];
        assert_relative_eq!(v.v, 5.4, epsilon = 1e-12);
        assert_relative_eq!(v.s, 11.06, epsilon = 1e-12);
    }

    #[test]
    fn speed_floor_and_cap() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, 10.0, 0.0);
        world.step(&layout, &BTreeMap::from([(id, -4.0)]));
        assert_relative_eq!(world.vehicles[&id].v, 0.0);
        assert_relative_eq!(world.vehicles[&id].s, 10.0);

        let (mut world, id) = world_with_vehicle(&layout, 1, 10.0, 14.9);
        world.step(&layout, &BTreeMap::from([(id, 4.0)]));
        assert_relative_eq!(world.vehicles[&id].v, 15.0);
    }

    #[test]
    fn out_of_range_actions_are_clamped_and_flagged() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, 10.0, 5.0);
        let result = world.step(&layout, &BTreeMap::from([(id, 9.0)]));
        assert_eq!(result.clamped_actions, vec![id]);
        // Clamped to a_max = 4.
        assert_relative_eq!(world.vehicles[&id].v, 5.8, epsilon = 1e-12);
    }

    #[test]
    fn unadmitted_vehicle_holds_at_the_boundary() {
        let layout = layout();
        let boundary = layout.trajectories[1].crossing_entry_s;
        let (mut world, id) = world_with_vehicle(&layout, 1, boundary - 0.5, 10.0);
        let result = world.step(&layout, &BTreeMap::from([(id, 0.0)]));
        assert!(result.boundary_clamps.contains(&id));
        let v = &world.vehicles[&id];
        assert!(v.s < boundary);
        assert_relative_eq!(v.v, 0.0);
        assert_eq!(v.zone, Zone::Preparation);
    }

    #[test]
    fn admitted_vehicle_crosses_at_constant_speed_and_exits() {
        let layout = layout();
        let boundary = layout.trajectories[1].crossing_entry_s;
        let (mut world, id) = world_with_vehicle(&layout, 1, boundary - 1.0, 10.0);
        {
            let v = world.vehicles.get_mut(&id).unwrap();
            v.commitment = Some(Commitment::Constant);
            v.crossing_speed = Some(10.0);
        }
        let mut exited = Vec::new();
        for _ in 0..40 {
            let r = world.step(&layout, &BTreeMap::from([(id, 3.0)]));
            if let Some(v) = world.vehicles.get(&id) {
                if v.zone == Zone::Crossing {
                    assert_relative_eq!(v.v, 10.0);
                }
            }
            exited.extend(r.exited);
        }
        assert_eq!(exited.len(), 1);
        assert_eq!(exited[0].outcome, TripOutcome::Passed);
        assert!(exited[0].travel_time().is_some());
    }

    #[test]
    fn launch_commitment_ramps_then_holds() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, 50.0, 0.0);
        world.vehicles.get_mut(&id).unwrap().commitment = Some(Commitment::Launch { target: 6.0 });
        world.vehicles.get_mut(&id).unwrap().crossing_speed = Some(6.0);
        for _ in 0..10 {
            world.step(&layout, &BTreeMap::new());
        }
        assert_relative_eq!(world.vehicles[&id].v, 6.0, epsilon = 1e-9);
    }

    #[test]
    fn upstream_vehicles_enter_preparation_at_s_zero() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, -1.0, 15.0);
        assert_eq!(world.vehicles[&id].zone, Zone::Upstream);
        world.step(&layout, &BTreeMap::from([(id, 0.0)]));
        let v = &world.vehicles[&id];
        assert_eq!(v.zone, Zone::Preparation);
        assert!(v.t_enter_prep.is_some());
    }

    #[test]
    fn colocated_vehicles_collide_and_distant_ones_do_not() {
        let layout = layout();
        let mut world = WorldState::new(SimParams::default());
        let a = world.spawn_vehicle(&layout, 1);
        let b = world.spawn_vehicle(&layout, 4);
        // Place both on top of a shared conflict point.
        let cp = &layout.conflicts.points[layout.conflicts.shared_points(1, 4)[0]];
        world.vehicles.get_mut(&a).unwrap().s = cp.arc_on(1).unwrap();
        world.vehicles.get_mut(&b).unwrap().s = cp.arc_on(4).unwrap();
        let pairs = detect_collisions(&world, &layout);
        assert_eq!(pairs.len(), 1);

        world.vehicles.get_mut(&b).unwrap().s = cp.arc_on(4).unwrap() - 50.0;
        assert!(detect_collisions(&world, &layout).is_empty());
    }

    #[test]
    fn near_graze_matches_dense_sat_oracle() {
        // Two perpendicular straights with lateral offsets scanned across the
        // touching threshold. The detector must agree with a fine-grained
        // corner-distance oracle at every offset.
        let layout = layout();
        let params = SimParams::default();
        let cp = &layout.conflicts.points[layout.conflicts.shared_points(1, 4)[0]];
        for i in 0..200 {
            let offset = 2.0 + 4.0 * i as f64 / 199.0; // meters along b's path
            let mut world = WorldState::new(params);
            let a = world.spawn_vehicle(&layout, 1);
            let b = world.spawn_vehicle(&layout, 4);
            world.vehicles.get_mut(&a).unwrap().s = cp.arc_on(1).unwrap();
            world.vehicles.get_mut(&b).unwrap().s = cp.arc_on(4).unwrap() - offset;
            let detected = !detect_collisions(&world, &layout).is_empty();

            // Oracle: sample both rectangles densely and test point-in-rect
            // both ways.
            let fa = footprint(&params, &layout, &world.vehicles[&a]);
            let fb = footprint(&params, &layout, &world.vehicles[&b]);
            let expected = dense_overlap_oracle(&fa, &fb);
            assert_eq!(detected, expected, "offset {offset}");
        }
    }

    fn dense_overlap_oracle(a: &Footprint, b: &Footprint) -> bool {
        let inside = |f: &Footprint, p: Vec2| -> bool {
            let d = p.sub(f.center);
            d.dot(f.axis).abs() <= f.half_l && d.dot(f.axis.perp()).abs() <= f.half_w
        };
        let sample = |f: &Footprint| -> Vec<Vec2> {
            let mut out = Vec::new();
            let n = 60;
            for i in 0..=n {
                for j in 0..=n {
                    let u = -1.0 + 2.0 * i as f64 / n as f64;
                    let w = -1.0 + 2.0 * j as f64 / n as f64;
                    out.push(
                        f.center
                            .add(f.axis.scale(u * f.half_l))
                            .add(f.axis.perp().scale(w * f.half_w)),
                    );
                }
            }
            out
        };
        sample(a).into_iter().any(|p| inside(b, p)) || sample(b).into_iter().any(|p| inside(a, p))
    }

    #[test]
    fn safety_override_cases() {
        let params = SimParams::default();
        let layout = layout();
        let mut world = WorldState::new(params);
        let id = world.spawn_vehicle(&layout, 1);
        world.vehicles.get_mut(&id).unwrap().s = 20.0;
        world.vehicles.get_mut(&id).unwrap().v = 10.0;

        // No leader: proposal unchanged.
        let me = world.vehicles[&id].clone();
        assert_relative_eq!(safety_override(&params, &me, None, 2.0), 2.0);

        // Gap of 1 m at 10 m/s: inside the envelope, full braking.
        let lead = world.spawn_vehicle(&layout, 1);
        world.vehicles.get_mut(&lead).unwrap().s = 20.0 + params.vehicle_length + 1.0;
        let leader = world.vehicles[&lead].clone();
        assert_relative_eq!(safety_override(&params, &me, Some(&leader), 2.0), params.a_min);

        // Gap exactly at the envelope: strict inequality keeps the proposal.
        let envelope = params.stopping_distance(10.0) + 2.0;
        world.vehicles.get_mut(&lead).unwrap().s = 20.0 + params.vehicle_length + envelope;
        let leader = world.vehicles[&lead].clone();
        assert_relative_eq!(safety_override(&params, &me, Some(&leader), 2.0), 2.0);
    }

    #[test]
    fn monotone_zone_progression() {
        let layout = layout();
        let (mut world, id) = world_with_vehicle(&layout, 1, -5.0, 15.0);
        {
            let v = world.vehicles.get_mut(&id).unwrap();
            v.commitment = Some(Commitment::Constant);
            v.crossing_speed = Some(15.0);
        }
        let mut last = Zone::Upstream;
        for _ in 0..100 {
            world.step(&layout, &BTreeMap::new());
            let zone = world.vehicles.get(&id).map(|v| v.zone).unwrap_or(Zone::Done);
            assert!(zone >= last, "zone regressed from {last:?} to {zone:?}");
            last = zone;
            if last == Zone::Done {
                break;
            }
        }
    }

    #[test]
    fn spawn_blocked_until_leader_clears() {
        let layout = layout();
        let mut world = WorldState::new(SimParams::default());
        let first = world.spawn_vehicle(&layout, 1);
        assert!(!world.spawn_clear(&layout, 1));
        // Move the leader far ahead; the spawn point clears.
        world.vehicles.get_mut(&first).unwrap().s += 60.0;
        assert!(world.spawn_clear(&layout, 1));
    }
}
