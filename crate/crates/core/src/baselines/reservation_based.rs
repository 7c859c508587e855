//! Reservation-based baselines: first-come-first-serve crossing order and
//! FCFS with platooning.
//!
//! Priority is the order of arrival at the crossing-zone boundary
//! (operationally: the first step a vehicle needs an admission decision). A
//! vehicle may cross only when its occupancy windows conflict with no
//! higher-priority vehicle that has not yet exited; non-conflicting vehicles
//! cross simultaneously.

use std::collections::{BTreeMap, BTreeSet};

use crate::episode::{ControlOutput, Controller, Engine};
use crate::simcore::admission::decision_distance;
use crate::simcore::Zone;
use crate::VehicleId;

use super::{idm_acceleration, leader_gap};

/// Arrival bookkeeping shared by FCFS and the platoon variant.
#[derive(Debug, Default)]
struct ArrivalOrder {
    seq: BTreeMap<VehicleId, u64>,
    next: u64,
}

impl ArrivalOrder {
    /// Stamp vehicles entering the decision region, in id order within a
    /// step (id order is spawn order).
    fn stamp_arrivals(&mut self, engine: &Engine) {
        let sim = &engine.config.sim;
        for vehicle in engine.world.vehicles.values() {
            if vehicle.zone != Zone::Preparation || self.seq.contains_key(&vehicle.id) {
                continue;
            }
            let boundary = engine.layout.trajectories[vehicle.trajectory].crossing_entry_s;
            let d = boundary - vehicle.s;
            if d <= decision_distance(sim, vehicle.v) + 5.0 {
                self.seq.insert(vehicle.id, self.next);
                self.next += 1;
            }
        }
    }

    fn forget_exited(&mut self, engine: &Engine) {
        self.seq.retain(|id, _| engine.world.vehicles.contains_key(id));
    }

    fn priority(&self, id: VehicleId) -> Option<u64> {
        self.seq.get(&id).copied()
    }
}

/// Vehicles that must defer: their current-table windows conflict with a
/// strictly higher-priority, unexited vehicle.
fn fcfs_holds(engine: &Engine, priority_of: &dyn Fn(VehicleId) -> Option<u64>) -> BTreeSet<VehicleId> {
    let mut hold = BTreeSet::new();
    for (a, b) in engine.tables().update.conflicting_pairs() {
        let pa = priority_of(a);
        let pb = priority_of(b);
        let admitted =
            |id: VehicleId| engine.world.vehicles.get(&id).map(|v| v.is_admitted()).unwrap_or(true);
        match (pa, pb) {
            (Some(x), Some(y)) => {
                let (lower, _higher) = if x > y { (a, b) } else { (b, a) };
                if !admitted(lower) {
                    hold.insert(lower);
                }
            }
            // Unstamped vehicles rank behind every stamped one.
            (Some(_), None) => {
                if !admitted(b) {
                    hold.insert(b);
                }
            }
            (None, Some(_)) => {
                if !admitted(a) {
                    hold.insert(a);
                }
            }
            (None, None) => {}
        }
    }
    hold
}

/// Car-following actions for every controllable vehicle.
fn following_actions(engine: &Engine, time_headway: f64) -> BTreeMap<VehicleId, f64> {
    let sim = &engine.config.sim;
    engine
        .controllable()
        .iter()
        .map(|vehicle| {
            let leader = engine.world.leader_of(vehicle);
            let a = idm_acceleration(sim, vehicle.v, leader_gap(sim, vehicle, leader), time_headway);
            (vehicle.id, a)
        })
        .collect()
}

/// First-come-first-serve reservation controller.
#[derive(Default)]
pub struct FcfsController {
    order: ArrivalOrder,
}

impl FcfsController {
    pub fn new() -> Self {
        Self::default()
    }

    /// Exposed for tests: the current priority sequence.
    pub fn priorities(&self) -> Vec<(VehicleId, u64)> {
        self.order.seq.iter().map(|(k, v)| (*k, *v)).collect()
    }
}

impl Controller for FcfsController {
    fn control(&mut self, engine: &Engine) -> ControlOutput {
        self.order.forget_exited(engine);
        self.order.stamp_arrivals(engine);
        let actions = following_actions(engine, 1.5);
        let order = &self.order;
        let hold = fcfs_holds(engine, &|id| order.priority(id));
        let launch_ok = engine
            .launch_candidates()
            .into_iter()
            .filter(|id| !hold.contains(id))
            .collect();
        ControlOutput { actions, launch_ok, hold }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PlatoonConfig {
    pub max_size: usize,
    /// Joining requires a gap to the predecessor below this threshold.
    pub join_gap: f64,
    /// Intra-platoon time headway for followers.
    pub headway: f64,
}

impl Default for PlatoonConfig {
    fn default() -> Self {
        PlatoonConfig { max_size: 8, join_gap: 20.0, headway: 1.0 }
    }
}

/// FCFS with platooning: close followers join their predecessor's platoon
/// (size-capped) and inherit the leader's priority, so the platoon crosses as
/// a unit under the leader's slot.
pub struct PlatoonController {
    pub config: PlatoonConfig,
    order: ArrivalOrder,
    /// member -> platoon leader (leaders map to themselves).
    platoon_of: BTreeMap<VehicleId, VehicleId>,
    size_of: BTreeMap<VehicleId, usize>,
}

impl PlatoonController {
    pub fn new(config: PlatoonConfig) -> Self {
        PlatoonController {
            config,
            order: ArrivalOrder::default(),
            platoon_of: BTreeMap::new(),
            size_of: BTreeMap::new(),
        }
    }

    pub fn platoon_sizes(&self) -> Vec<usize> {
        self.size_of.values().copied().collect()
    }

    fn update_platoons(&mut self, engine: &Engine) {
        // Drop exited members.
        let alive: BTreeSet<VehicleId> = engine.world.vehicles.keys().copied().collect();
        self.platoon_of.retain(|id, _| alive.contains(id));
        self.size_of = {
            let mut sizes: BTreeMap<VehicleId, usize> = BTreeMap::new();
            for leader in self.platoon_of.values() {
                *sizes.entry(*leader).or_insert(0) += 1;
            }
            sizes
        };

        // Every unassigned vehicle in the intersection area leads itself.
        let sim = &engine.config.sim;
        for vehicle in engine.world.vehicles.values() {
            if vehicle.zone == Zone::Upstream || self.platoon_of.contains_key(&vehicle.id) {
                continue;
            }
            self.platoon_of.insert(vehicle.id, vehicle.id);
            *self.size_of.entry(vehicle.id).or_insert(0) += 1;
        }

        // Join rule: close enough to the predecessor and the predecessor's
        // platoon has room.
        for vehicle in engine.world.vehicles.values() {
            if vehicle.zone == Zone::Upstream {
                continue;
            }
            let id = vehicle.id;
            if self.platoon_of.get(&id) != Some(&id) || self.size_of.get(&id) != Some(&1) {
                continue; // already in a multi-vehicle platoon or leading one
            }
            let Some(pred) = engine.world.leader_of(vehicle) else { continue };
            if pred.trajectory != vehicle.trajectory || pred.zone == Zone::Upstream {
                continue;
            }
            let gap = pred.s - sim.vehicle_length - vehicle.s;
            let Some(&pred_leader) = self.platoon_of.get(&pred.id) else { continue };
            let pred_size = self.size_of.get(&pred_leader).copied().unwrap_or(1);
            if gap < self.config.join_gap && pred_size < self.config.max_size {
                self.platoon_of.insert(id, pred_leader);
                *self.size_of.entry(pred_leader).or_insert(0) += 1;
                *self.size_of.entry(id).or_insert(1) -= 1;
                self.size_of.remove_if(&id);
            }
        }
    }
}

trait RemoveIfZero {
    fn remove_if(&mut self, key: &VehicleId);
}

impl RemoveIfZero for BTreeMap<VehicleId, usize> {
    fn remove_if(&mut self, key: &VehicleId) {
        if self.get(key) == Some(&0) {
            self.remove(key);
        }
    }
}

impl Controller for PlatoonController {
    fn control(&mut self, engine: &Engine) -> ControlOutput {
        self.order.forget_exited(engine);
        self.order.stamp_arrivals(engine);
        self.update_platoons(engine);

        // Followers track tighter than lone vehicles.
        let sim = &engine.config.sim;
        let mut actions = BTreeMap::new();
        for vehicle in engine.controllable() {
            let is_follower = self.platoon_of.get(&vehicle.id) != Some(&vehicle.id);
            let headway = if is_follower { self.config.headway } else { 1.5 };
            let leader = engine.world.leader_of(vehicle);
            let a = idm_acceleration(sim, vehicle.v, leader_gap(sim, vehicle, leader), headway);
            actions.insert(vehicle.id, a);
        }

        // Members inherit their platoon leader's arrival priority.
        let platoon_of = &self.platoon_of;
        let order = &self.order;
        let priority = |id: VehicleId| -> Option<u64> {
            let leader = platoon_of.get(&id).copied().unwrap_or(id);
            order.priority(leader).or_else(|| order.priority(id))
        };
        let hold = fcfs_holds(engine, &priority);
        let launch_ok = engine
            .launch_candidates()
            .into_iter()
            .filter(|id| !hold.contains(id))
            .collect();
        ControlOutput { actions, launch_ok, hold }
    }
}
