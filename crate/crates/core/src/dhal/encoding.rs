//! Actor input encoding: the global trajectory raster plus the ego one-hot
//! triple, all features scaled into [-1, 1].
//!
//! States are kept as compact snapshots (a few floats per visible vehicle)
//! and expanded to the full feature vector on demand, so the replay buffer
//! stays small.

use serde::{Deserialize, Serialize};

use crate::episode::Engine;
use crate::geometry::Layout;
use crate::nnet::Real;
use crate::simcore::Zone;
use crate::VehicleId;

/// Raster and one-hot bin layout. Derived once from the layout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub n_trajectories: usize,
    pub cells_per_trajectory: usize,
    pub segment_length: f64,
    pub n_dist_bins: usize,
    pub dist_bin_length: f64,
    pub n_speed_bins: usize,
    pub speed_bin_length: f64,
    pub v_max: f64,
    /// Distance-to-stop-line normalizer (the preparation-zone depth).
    pub dist_norm: f64,
}

impl EncodingSpec {
    pub fn from_layout(layout: &Layout) -> Self {
        let segment_length = 5.0;
        EncodingSpec {
            n_trajectories: layout.n_trajectories(),
            cells_per_trajectory: (layout.max_exit_s() / segment_length).ceil() as usize,
            segment_length,
            n_dist_bins: 25,
            dist_bin_length: 5.0,
            n_speed_bins: 15,
            speed_bin_length: 1.0,
            v_max: 15.0,
            dist_norm: layout.config.prep_depth,
        }
    }

    pub fn g_dim(&self) -> usize {
        self.n_trajectories * self.cells_per_trajectory * 4
    }

    pub fn ego_dim(&self) -> usize {
        self.n_trajectories + (self.n_dist_bins + 1) + (self.n_speed_bins + 1)
    }

    pub fn state_dim(&self) -> usize {
        self.g_dim() + self.ego_dim()
    }
}

/// One visible vehicle in a snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeenVehicle {
    pub trajectory: u8,
    pub s: f32,
    pub v: f32,
    /// Conflicts with the ego vehicle in the current reservation table.
    pub conflicts_ego: bool,
}

/// Compact, layout-independent record of everything the encoder needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSnapshot {
    pub ego_trajectory: u8,
    pub ego_s: f32,
    pub ego_v: f32,
    /// All vehicles between preparation entry and crossing exit (ego
    /// included).
    pub seen: Vec<SeenVehicle>,
}

impl CompactSnapshot {
    /// Distance from the ego's front bumper to its stop line, clamped to the
    /// actor-loss control range.
    pub fn ego_stop_line_distance(&self, layout: &Layout) -> f64 {
        let traj = &layout.trajectories[self.ego_trajectory as usize];
        (traj.stop_line_s - self.ego_s as f64).clamp(0.0, layout.config.prep_depth)
    }
}

/// Capture the encoder view for one ego vehicle from the live engine state.
pub fn snapshot(engine: &Engine, ego: VehicleId) -> CompactSnapshot {
    let world = &engine.world;
    let ego_state = &world.vehicles[&ego];
    let partners = engine.tables().partners.get(&ego);
    let seen = world
        .vehicles
        .values()
        .filter(|v| matches!(v.zone, Zone::Preparation | Zone::Crossing))
        .map(|v| SeenVehicle {
            trajectory: v.trajectory as u8,
            s: v.s as f32,
            v: v.v as f32,
            conflicts_ego: v.id != ego
                && partners.map(|p| p.contains(&v.id)).unwrap_or(false),
        })
        .collect();
    CompactSnapshot {
        ego_trajectory: ego_state.trajectory as u8,
        ego_s: ego_state.s as f32,
        ego_v: ego_state.v as f32,
        seen,
    }
}

/// Expand a snapshot into the flat feature vector `[G | x_r | x_d | x_v]`.
pub fn encode<T: Real>(spec: &EncodingSpec, layout: &Layout, snap: &CompactSnapshot) -> Vec<T> {
    let mut out = vec![T::zero(); spec.state_dim()];
    let neg = T::from_f64(-1.0);

    // Raster: sentinel everywhere, then one vehicle per occupied cell. When
    // two vehicles share a cell the one further along (nearer the exit) wins.
    for cell in out[..spec.g_dim()].chunks_mut(4) {
        cell[0] = neg;
        cell[1] = neg;
        cell[2] = neg;
        cell[3] = T::zero();
    }
    let mut best_s: Vec<f32> = vec![f32::NEG_INFINITY; spec.n_trajectories * spec.cells_per_trajectory];
    for seen in &snap.seen {
        let traj = seen.trajectory as usize;
        if (seen.s as f64) < 0.0 {
            continue;
        }
        let cell = ((seen.s as f64 / spec.segment_length) as usize)
            .min(spec.cells_per_trajectory - 1);
        let slot = traj * spec.cells_per_trajectory + cell;
        if seen.s <= best_s[slot] {
            continue;
        }
        best_s[slot] = seen.s;
        let path = &layout.trajectories[traj];
        let d_stop = (path.stop_line_s - seen.s as f64) / spec.dist_norm;
        let heading = path.heading_at(seen.s as f64) / std::f64::consts::PI;
        let base = slot * 4;
        out[base] = T::from_f64(d_stop.clamp(-1.0, 1.0));
        out[base + 1] = T::from_f64((seen.v as f64 / spec.v_max).clamp(0.0, 1.0));
        out[base + 2] = T::from_f64(heading.clamp(-1.0, 1.0));
        out[base + 3] = if seen.conflicts_ego { T::one() } else { T::zero() };
    }

    // Ego one-hot triple.
    let ego_base = spec.g_dim();
    out[ego_base + snap.ego_trajectory as usize] = T::one();

    let path = &layout.trajectories[snap.ego_trajectory as usize];
    let d_exit = (path.exit_s - snap.ego_s as f64).max(0.0);
    let dist_base = ego_base + spec.n_trajectories;
    let bin = ((d_exit / spec.dist_bin_length) as usize).min(spec.n_dist_bins - 1);
    out[dist_base + bin] = T::one();
    let dist_range = spec.n_dist_bins as f64 * spec.dist_bin_length;
    out[dist_base + spec.n_dist_bins] = T::from_f64((d_exit / dist_range).clamp(0.0, 1.0));

    let speed_base = dist_base + spec.n_dist_bins + 1;
    let vbin = ((snap.ego_v as f64 / spec.speed_bin_length) as usize).min(spec.n_speed_bins - 1);
    out[speed_base + vbin] = T::one();
    out[speed_base + spec.n_speed_bins] =
        T::from_f64((snap.ego_v as f64 / spec.v_max).clamp(0.0, 1.0));

    out
}
