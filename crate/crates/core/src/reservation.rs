//! Spatio-temporal reservation table: occupancy windows, per-step conflict
//! detection, priority rules, and ground-truth conflict labels.
//!
//! The table is an `N_c x N_t` grid of vehicle-id sets. Each step it is
//! rebuilt from scratch: every active vehicle books, for every conflict point
//! on its trajectory, the time cells it would occupy if it kept its current
//! speed. Two vehicles booking the same cell are in conflict.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::geometry::Layout;
use crate::VehicleId;

/// Speed below which a vehicle's arrival time is unbounded; its windows
/// degrade to worst-case whole-horizon occupancy.
pub const V_FLOOR: f64 = 0.1;

/// Time interval during which a vehicle occupies one conflict point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyWindow {
    pub t1: f64,
    pub t2: f64,
    pub eps: f64,
}

/// How the safety buffer around a conflict point is computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WindowForm {
    /// Fixed buffer `eps` on both sides (the simplified form).
    Buffered { eps: f64 },
    /// Geometry-dependent buffer `w1/2 * cot(theta) + w2/2` from the crossing
    /// angle and both vehicle widths.
    Exact { vehicle_width: f64 },
}

impl Default for WindowForm {
    fn default() -> Self {
        WindowForm::Buffered { eps: 1.0 }
    }
}

impl WindowForm {
    /// Effective buffer length in meters for a crossing at angle `theta`.
    pub fn buffer(&self, theta: f64) -> f64 {
        match *self {
            WindowForm::Buffered { eps } => eps,
            WindowForm::Exact { vehicle_width } => {
                // Fold the crossing angle to the acute line angle and keep it
                // away from zero so cot stays finite.
                let folded = theta.min(std::f64::consts::PI - theta).max(0.1);
                let half = vehicle_width / 2.0;
                half * folded.tan().recip() + half
            }
        }
    }
}

/// Occupancy window for a conflict point `d` meters ahead of the front
/// bumper, at constant speed `v`, clamped into `[0, t_r]`.
///
/// Speeds below [`V_FLOOR`] give the worst-case window `[0, t_r]`; callers
/// that care can detect the case with [`is_worst_case`].
pub fn occupancy_window(d: f64, l: f64, v: f64, eps: f64, t_r: f64) -> OccupancyWindow {
    if v < V_FLOOR {
        return OccupancyWindow { t1: 0.0, t2: t_r, eps };
    }
    let t1 = ((d - eps) / v).clamp(0.0, t_r);
    let t2 = ((d + l + eps) / v).clamp(0.0, t_r);
    OccupancyWindow { t1, t2, eps }
}

pub fn is_worst_case(v: f64) -> bool {
    v < V_FLOOR
}

/// Table dimensions and window parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableParams {
    /// Cell time resolution in seconds (one action step).
    pub dt: f64,
    /// Recorded horizon in seconds.
    pub t_r: f64,
    /// Vehicle length used for occupancy, in meters.
    pub vehicle_length: f64,
    pub form: WindowForm,
}

impl Default for TableParams {
    fn default() -> Self {
        TableParams { dt: 0.2, t_r: 100.0, vehicle_length: 5.0, form: WindowForm::default() }
    }
}

impl TableParams {
    pub fn n_steps(&self) -> usize {
        (self.t_r / self.dt).ceil() as usize
    }

    /// Inclusive cell-step range for a window, or `None` when the window
    /// starts at/after the horizon and books nothing.
    pub fn step_range(&self, w: &OccupancyWindow) -> Option<(usize, usize)> {
        let n = self.n_steps();
        let s1 = (w.t1 / self.dt).floor() as usize;
        if s1 >= n {
            return None;
        }
        let s2 = ((w.t2 / self.dt).floor() as usize).min(n - 1);
        Some((s1, s2.max(s1)))
    }
}

/// Minimal view of a vehicle needed to book reservations.
#[derive(Clone, Copy, Debug)]
pub struct VehicleProbe {
    pub id: VehicleId,
    pub trajectory: usize,
    /// Front-bumper arc position on the trajectory.
    pub s: f64,
    pub v: f64,
}

/// The reservation table for one step.
#[derive(Clone, Debug)]
pub struct ReservationTable {
    pub params: TableParams,
    /// Simulation time at which this table was generated.
    pub generated_at: f64,
    n_points: usize,
    /// `n_points * n_steps` cells, each the set of vehicles booking it.
    cells: Vec<Vec<VehicleId>>,
    /// Booked step range per (vehicle, conflict point).
    windows: HashMap<(VehicleId, usize), (usize, usize)>,
}

impl ReservationTable {
    pub fn empty(params: TableParams, n_points: usize, generated_at: f64) -> Self {
        ReservationTable {
            params,
            generated_at,
            n_points,
            cells: vec![Vec::new(); n_points * params.n_steps()],
            windows: HashMap::new(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn occupants(&self, cp: usize, step: usize) -> &[VehicleId] {
        &self.cells[cp * self.params.n_steps() + step]
    }

    /// Booked step range of a vehicle at a conflict point, if any.
    pub fn window_steps(&self, vehicle: VehicleId, cp: usize) -> Option<(usize, usize)> {
        self.windows.get(&(vehicle, cp)).copied()
    }

    fn book(&mut self, vehicle: VehicleId, cp: usize, steps: (usize, usize)) -> Vec<VehicleId> {
        let mut clashing = Vec::new();
        let n = self.params.n_steps();
        for step in steps.0..=steps.1 {
            let cell = &mut self.cells[cp * n + step];
            for &other in cell.iter() {
                if other != vehicle && !clashing.contains(&other) {
                    clashing.push(other);
                }
            }
            cell.push(vehicle);
        }
        self.windows.insert((vehicle, cp), steps);
        clashing
    }

    /// Sparse dump (conflict point, step, occupants) for debugging.
    pub fn sparse_cells(&self) -> Vec<(usize, usize, Vec<VehicleId>)> {
        let n = self.params.n_steps();
        let mut out = Vec::new();
        for cp in 0..self.n_points {
            for step in 0..n {
                let cell = &self.cells[cp * n + step];
                if !cell.is_empty() {
                    out.push((cp, step, cell.clone()));
                }
            }
        }
        out
    }
}

/// Every window a vehicle books, given the layout's conflict map.
pub fn vehicle_windows(
    probe: &VehicleProbe,
    layout: &Layout,
    params: &TableParams,
) -> Vec<(usize, OccupancyWindow)> {
    let mut out = Vec::new();
    for &cp_id in &layout.conflicts.by_trajectory[probe.trajectory] {
        let cp = &layout.conflicts.points[cp_id];
        let s_cp = cp.arc_on(probe.trajectory).expect("map lists cp on trajectory");
        let d = s_cp - probe.s;
        if d + params.vehicle_length < 0.0 {
            // Fully past this conflict point.
            continue;
        }
        let eps = params.form.buffer(cp.theta);
        out.push((cp_id, occupancy_window(d, params.vehicle_length, probe.v, eps, params.t_r)));
    }
    out
}

/// Result of one table rebuild.
#[derive(Clone, Debug)]
pub struct TableUpdate {
    pub table: ReservationTable,
    /// `H'`: every vehicle sharing at least one cell with another vehicle.
    pub in_conflict: BTreeSet<VehicleId>,
    /// Distinct conflicting pairs with the conflict point they clash at,
    /// ordered `(low id, high id)`.
    pub pairs: BTreeSet<(VehicleId, VehicleId, usize)>,
}

impl TableUpdate {
    /// Conflict points at which the two vehicles clash in this table.
    pub fn pair_points(&self, a: VehicleId, b: VehicleId) -> Vec<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.pairs
            .iter()
            .filter(|(x, y, _)| (*x, *y) == key)
            .map(|(_, _, cp)| *cp)
            .collect()
    }

    /// Distinct conflicting pairs, without conflict-point detail.
    pub fn conflicting_pairs(&self) -> BTreeSet<(VehicleId, VehicleId)> {
        self.pairs.iter().map(|(a, b, _)| (*a, *b)).collect()
    }
}

/// Rebuild the table from scratch and detect all conflicts.
///
/// Vehicles are booked in the order given; the result does not depend on that
/// order beyond cell-internal id ordering.
pub fn update_table(
    probes: &[VehicleProbe],
    layout: &Layout,
    params: TableParams,
    now: f64,
) -> TableUpdate {
    let mut table = ReservationTable::empty(params, layout.conflicts.n_points(), now);
    let mut in_conflict = BTreeSet::new();
    let mut pairs = BTreeSet::new();

    for probe in probes {
        for (cp_id, window) in vehicle_windows(probe, layout, &params) {
            let Some(steps) = params.step_range(&window) else { continue };
            let clashing = table.book(probe.id, cp_id, steps);
            if !clashing.is_empty() {
                in_conflict.insert(probe.id);
                for other in clashing {
                    in_conflict.insert(other);
                    let key = if other < probe.id {
                        (other, probe.id, cp_id)
                    } else {
                        (probe.id, other, cp_id)
                    };
                    pairs.insert(key);
                }
            }
        }
    }

    TableUpdate { table, in_conflict, pairs }
}

/// Which rule decided a priority.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PriorityRule {
    /// Rule 1: the vehicle that held the conflict point first in the
    /// previous-step table keeps priority.
    PreviousTable,
    /// Rule 2: on adjacent approaches the right-hand vehicle has priority.
    RightHand,
    /// Rule 3: on opposite approaches the straight-going vehicle has priority.
    StraightFirst,
    /// Deterministic residual tie-break (lower trajectory id, then lower
    /// vehicle id).
    Tie,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriorityDecision {
    pub leader: VehicleId,
    pub follower: VehicleId,
    pub rule: PriorityRule,
}

/// Resolve priority for a conflicting pair.
///
/// `cps` are the conflict points at which the pair currently clashes; Rule 1
/// consults the previous-step table at the first of them. Vehicles without a
/// previous window (fresh entries) fall through to Rules 2 and 3.
pub fn assign_priority(
    a: &VehicleProbe,
    b: &VehicleProbe,
    cps: &[usize],
    previous: &ReservationTable,
    layout: &Layout,
) -> PriorityDecision {
    assert!(!cps.is_empty(), "assign_priority requires a conflicting pair");

    // Rule 1 against the previous-step table.
    let cp = cps[0];
    if let (Some(wa), Some(wb)) = (previous.window_steps(a.id, cp), previous.window_steps(b.id, cp)) {
        if wb.0 > wa.1 {
            return PriorityDecision { leader: a.id, follower: b.id, rule: PriorityRule::PreviousTable };
        }
        if wa.0 > wb.1 {
            return PriorityDecision { leader: b.id, follower: a.id, rule: PriorityRule::PreviousTable };
        }
    }

    let ta = &layout.trajectories[a.trajectory];
    let tb = &layout.trajectories[b.trajectory];

    // Rule 2: adjacent approaches, right-hand vehicle first.
    if ta.approach.is_adjacent(tb.approach) {
        if tb.approach == ta.approach.right_neighbor() {
            return PriorityDecision { leader: b.id, follower: a.id, rule: PriorityRule::RightHand };
        }
        return PriorityDecision { leader: a.id, follower: b.id, rule: PriorityRule::RightHand };
    }

    // Rule 3: opposite approaches, straight goes first.
    if ta.approach == tb.approach.opposite() {
        use crate::geometry::Movement;
        let a_straight = ta.movement == Movement::Straight;
        let b_straight = tb.movement == Movement::Straight;
        if a_straight && !b_straight {
            return PriorityDecision { leader: a.id, follower: b.id, rule: PriorityRule::StraightFirst };
        }
        if b_straight && !a_straight {
            return PriorityDecision { leader: b.id, follower: a.id, rule: PriorityRule::StraightFirst };
        }
    }

    // Residual tie: lower trajectory id first, then lower vehicle id.
    let a_first = (a.trajectory, a.id) < (b.trajectory, b.id);
    let (leader, follower) = if a_first { (a.id, b.id) } else { (b.id, a.id) };
    PriorityDecision { leader, follower, rule: PriorityRule::Tie }
}

/// Ground-truth conflict labels for one vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictLabels {
    /// In conflict with anyone this step.
    pub l_c: bool,
    /// Follows (lacks priority) in at least one conflict.
    pub l_ac: bool,
    /// Leads (has priority) in at least one conflict.
    pub l_pc: bool,
}

/// Aggregate pairwise priorities into per-vehicle labels.
pub fn conflict_labels(
    vehicle: VehicleId,
    update: &TableUpdate,
    decisions: &[PriorityDecision],
) -> ConflictLabels {
    let l_c = update.in_conflict.contains(&vehicle);
    let mut l_ac = false;
    let mut l_pc = false;
    for d in decisions {
        if d.leader == vehicle {
            l_pc = true;
        }
        if d.follower == vehicle {
            l_ac = true;
        }
    }
    ConflictLabels { l_c, l_ac, l_pc }
}

/// Resolve priorities for every conflicting pair in a table update.
pub fn resolve_priorities(
    update: &TableUpdate,
    probes: &[VehicleProbe],
    previous: &ReservationTable,
    layout: &Layout,
) -> Vec<PriorityDecision> {
    let by_id: BTreeMap<VehicleId, &VehicleProbe> = probes.iter().map(|p| (p.id, p)).collect();
    update
        .conflicting_pairs()
        .into_iter()
        .map(|(a, b)| {
            let cps = update.pair_points(a, b);
            assign_priority(by_id[&a], by_id[&b], &cps, previous, layout)
        })
        .collect()
}

/// Per-vehicle labels for everyone in the probe set.
pub fn labels_for_all(
    update: &TableUpdate,
    decisions: &[PriorityDecision],
    probes: &[VehicleProbe],
) -> BTreeMap<VehicleId, ConflictLabels> {
    probes
        .iter()
        .map(|p| {
            let mine: Vec<PriorityDecision> = decisions
                .iter()
                .filter(|d| d.leader == p.id || d.follower == p.id)
                .copied()
                .collect();
            (p.id, conflict_labels(p.id, update, &mine))
        })
        .collect()
}
