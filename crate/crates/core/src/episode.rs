//! Episode engine: the per-action-step pipeline shared by every controller.
//!
//! Each action step: poll arrivals and spawn, rebuild the reservation table,
//! resolve priorities and labels, collect controller accelerations, apply the
//! rear-end safety override and the admission machinery, then advance the
//! world. The previous-step table is kept for Rule 1.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::geometry::Layout;
use crate::metrics::TripRecord;
use crate::reservation::{
    labels_for_all, resolve_priorities, update_table, ConflictLabels, PriorityDecision,
    ReservationTable, TableParams, TableUpdate, VehicleProbe,
};
use crate::simcore::admission::{
    crossing_gate, decision_distance, launch_gate, AdmissionLedger, GateDecision, GateMode,
};
use crate::simcore::arrivals::ArrivalProcess;
use crate::simcore::{
    brake_cmd, safety_override_anticipatory, CollisionEvent, Commitment, SimParams, VehicleState, WorldState,
    Zone,
};
use crate::VehicleId;

#[derive(Clone, Debug)]
pub struct EngineConfig {
    pub sim: SimParams,
    pub table: TableParams,
    pub gate_mode: GateMode,
    /// Seconds during which vehicles spawn.
    pub episode_length: f64,
    /// Extra time at the end for traffic to clear before unfinished vehicles
    /// are counted.
    pub drain_period: f64,
}

/// Reservation context for the current action step.
#[derive(Clone, Debug)]
pub struct StepTables {
    pub probes: Vec<VehicleProbe>,
    pub update: TableUpdate,
    pub decisions: Vec<PriorityDecision>,
    pub labels: BTreeMap<VehicleId, ConflictLabels>,
    /// Conflict partners per vehicle in the current table.
    pub partners: BTreeMap<VehicleId, BTreeSet<VehicleId>>,
}

impl StepTables {
    pub fn labels_of(&self, id: VehicleId) -> ConflictLabels {
        self.labels.get(&id).copied().unwrap_or_default()
    }
}

/// What the controller returns for one action step.
#[derive(Clone, Debug, Default)]
pub struct ControlOutput {
    /// Accelerations for uncommitted preparation-zone vehicles.
    pub actions: BTreeMap<VehicleId, f64>,
    /// Held vehicles cleared by the controller to attempt a launch.
    pub launch_ok: BTreeSet<VehicleId>,
    /// Vehicles the controller forbids admission for this step (red phases,
    /// first-come-first-serve ordering). They brake toward the hold point
    /// instead of being gate-checked.
    pub hold: BTreeSet<VehicleId>,
}

pub trait Controller {
    fn begin_episode(&mut self, _engine: &Engine) {}
    fn control(&mut self, engine: &Engine) -> ControlOutput;
}

/// Events of one engine step.
#[derive(Clone, Debug, Default)]
pub struct StepEvents {
    pub exited: Vec<TripRecord>,
    pub collisions: Vec<CollisionEvent>,
    pub admitted: Vec<VehicleId>,
    pub boundary_clamps: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub trips: Vec<TripRecord>,
    pub collision_events: Vec<CollisionEvent>,
    pub action_steps: u64,
    pub boundary_clamps: usize,
    pub clamped_actions: usize,
}

pub struct Engine {
    pub config: EngineConfig,
    pub layout: Arc<Layout>,
    pub world: WorldState,
    arrivals: ArrivalProcess,
    pub ledger: AdmissionLedger,
    previous_table: ReservationTable,
    current: Option<StepTables>,
    trips: Vec<TripRecord>,
    collision_events: Vec<CollisionEvent>,
    boundary_clamps: usize,
    clamped_actions: usize,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        layout: Arc<Layout>,
        arrivals_rng: ChaCha8Rng,
        total_flow_veh_h: f64,
    ) -> Self {
        let arrivals =
            ArrivalProcess::uneven(total_flow_veh_h, layout.n_trajectories(), arrivals_rng);
        let world = WorldState::new(config.sim);
        let previous_table =
            ReservationTable::empty(config.table, layout.conflicts.n_points(), 0.0);
        Engine {
            config,
            layout,
            world,
            arrivals,
            ledger: AdmissionLedger::new(),
            previous_table,
            current: None,
            trips: Vec::new(),
            collision_events: Vec::new(),
            boundary_clamps: 0,
            clamped_actions: 0,
        }
    }

    pub fn tables(&self) -> &StepTables {
        self.current.as_ref().expect("begin_step before reading tables")
    }

    /// True once the spawn phase is over and all traffic has cleared (or the
    /// drain period ran out).
    pub fn finished(&self) -> bool {
        let t = self.world.t;
        t >= self.config.episode_length + self.config.drain_period
            || (t >= self.config.episode_length && self.world.vehicles.is_empty())
    }

    /// Spawn due arrivals and rebuild the reservation context for this step.
    pub fn begin_step(&mut self) {
        if self.world.t < self.config.episode_length {
            self.arrivals.poll(self.world.t);
            for trajectory in 0..self.arrivals.n_trajectories() {
                while self.arrivals.pending(trajectory) > 0
                    && self.world.spawn_clear(&self.layout, trajectory)
                {
                    self.world.spawn_vehicle(&self.layout, trajectory);
                    self.arrivals.take(trajectory);
                }
            }
        }

        let probes: Vec<VehicleProbe> = self
            .world
            .vehicles
            .values()
            .filter(|v| matches!(v.zone, Zone::Preparation | Zone::Crossing))
            .map(|v| VehicleProbe { id: v.id, trajectory: v.trajectory, s: v.s, v: v.v })
            .collect();
        let update = update_table(&probes, &self.layout, self.config.table, self.world.t);
        let decisions = resolve_priorities(&update, &probes, &self.previous_table, &self.layout);
        let labels = labels_for_all(&update, &decisions, &probes);
        let mut partners: BTreeMap<VehicleId, BTreeSet<VehicleId>> = BTreeMap::new();
        for (a, b) in update.conflicting_pairs() {
            partners.entry(a).or_default().insert(b);
            partners.entry(b).or_default().insert(a);
        }
        self.current = Some(StepTables { probes, update, decisions, labels, partners });
    }

    /// Uncommitted preparation-zone vehicles (the ones a controller steers).
    pub fn controllable(&self) -> Vec<&VehicleState> {
        self.world
            .vehicles
            .values()
            .filter(|v| v.zone == Zone::Preparation && !v.is_admitted())
            .collect()
    }

    /// Held vehicles eligible for a launch attempt this step: unadmitted,
    /// below minimum crossing speed, inside the hold region.
    pub fn launch_candidates(&self) -> Vec<VehicleId> {
        let sim = &self.config.sim;
        self.world
            .vehicles
            .values()
            .filter(|v| {
                v.zone == Zone::Preparation
                    && !v.is_admitted()
                    && v.v < sim.min_crossing_speed
                    && self.distance_to_boundary(v) <= decision_distance(sim, v.v) + 2.0
            })
            .map(|v| v.id)
            .collect()
    }

    fn distance_to_boundary(&self, v: &VehicleState) -> f64 {
        self.layout.trajectories[v.trajectory].crossing_entry_s - v.s
    }

    /// Free-road default for vehicles without a controller action: approach
    /// the speed limit, backing off smoothly near it.
    pub fn default_action(&self, v: &VehicleState) -> f64 {
        let sim = &self.config.sim;
        sim.a_max * (1.0 - (v.v / sim.v_max).powi(4))
    }

    /// Apply controller output: run the admission machinery, then advance one
    /// action step.
    ///
    /// Admissions are granted sequentially in vehicle-id order and enter the
    /// ledger immediately, so two vehicles admitted in the same action step
    /// see each other's reservations.
    pub fn apply(&mut self, output: &ControlOutput) -> StepEvents {
        let sim = self.config.sim;
        let mode = self.config.gate_mode;
        let mut final_actions: BTreeMap<VehicleId, f64> = BTreeMap::new();
        let mut admitted_ids = Vec::new();

        let ids: Vec<VehicleId> = self.world.vehicles.keys().copied().collect();
        for id in ids {
            let vehicle = self.world.vehicles[&id].clone();
            if vehicle.zone == Zone::Crossing || vehicle.is_admitted() {
                continue;
            }
            let proposed = output
                .actions
                .get(&id)
                .copied()
                .unwrap_or_else(|| self.default_action(&vehicle))
                .clamp(sim.a_min, sim.a_max);
            let leader = self.world.leader_of(&vehicle);
            let mut a = safety_override_anticipatory(&sim, &vehicle, leader, proposed);

            if vehicle.zone == Zone::Preparation {
                let d_boundary = self.distance_to_boundary(&vehicle);
                let must_decide = d_boundary <= decision_distance(&sim, vehicle.v);
                if must_decide {
                    let decision = if output.hold.contains(&id) {
                        GateDecision::Hold
                    } else if vehicle.v >= sim.min_crossing_speed {
                        crossing_gate(
                            &self.layout,
                            &self.config.table,
                            &self.world,
                            &self.ledger,
                            &vehicle,
                            mode,
                        )
                    } else if output.launch_ok.contains(&id) {
                        launch_gate(
                            &self.layout,
                            &self.config.table,
                            &self.world,
                            &self.ledger,
                            &vehicle,
                            mode,
                        )
                    } else {
                        GateDecision::Hold
                    };
                    match decision {
                        GateDecision::Admit(plan) => {
                            let commitment = match plan.launch_target {
                                Some(target) => Commitment::Launch { target },
                                None => Commitment::Constant,
                            };
                            let state = self.world.vehicles.get_mut(&id).unwrap();
                            debug_assert!(
                                state.crossing_speed.is_none(),
                                "crossing speed set twice"
                            );
                            state.commitment = Some(commitment);
                            state.crossing_speed = Some(plan.crossing_speed);
                            self.ledger.insert(plan);
                            admitted_ids.push(id);
                            continue;
                        }
                        GateDecision::Hold => {
                            let d_hold = d_boundary - sim.hold_setback;
                            a = a.min(brake_cmd(&sim, vehicle.v, d_hold));
                        }
                    }
                }
            }
            final_actions.insert(id, a);
        }

        let result = self.world.step(&self.layout, &final_actions);
        for trip in &result.exited {
            self.ledger.remove(trip.vehicle);
        }
        self.trips.extend(result.exited.iter().cloned());
        self.collision_events.extend(result.collisions.iter().cloned());
        self.boundary_clamps += result.boundary_clamps.len();
        self.clamped_actions += result.clamped_actions.len();

        let events = StepEvents {
            exited: result.exited,
            collisions: result.collisions,
            admitted: admitted_ids,
            boundary_clamps: result.boundary_clamps.len(),
        };

        // Current table becomes Rule 1's "last step" table.
        if let Some(step) = self.current.take() {
            self.previous_table = step.update.table;
        }
        events
    }

    /// Terminate the episode: drain leftovers as unfinished trips.
    pub fn finish(mut self) -> EpisodeResult {
        let unfinished = self.world.drain_unfinished();
        self.trips.extend(unfinished);
        EpisodeResult {
            trips: self.trips,
            collision_events: self.collision_events,
            action_steps: self.world.action_steps,
            boundary_clamps: self.boundary_clamps,
            clamped_actions: self.clamped_actions,
        }
    }
}

/// Run one full episode under a controller.
pub fn run_episode(
    config: EngineConfig,
    layout: Arc<Layout>,
    arrivals_rng: ChaCha8Rng,
    flow_veh_h: f64,
    controller: &mut dyn Controller,
) -> EpisodeResult {
    let mut engine = Engine::new(config, layout, arrivals_rng, flow_veh_h);
    controller.begin_episode(&engine);
    while !engine.finished() {
        engine.begin_step();
        let output = controller.control(&engine);
        engine.apply(&output);
    }
    engine.finish()
}

/// Controller that never touches the pedals: every vehicle drives the
/// free-road default and the gate machinery does the rest. Useful as a
/// baseline sanity check and in gate-safety tests.
pub struct CoastController;

impl Controller for CoastController {
    fn control(&mut self, engine: &Engine) -> ControlOutput {
        ControlOutput {
            actions: BTreeMap::new(),
            launch_ok: engine.launch_candidates().into_iter().collect(),
            hold: BTreeSet::new(),
        }
    }
}
