//! Acting path shared by training rollouts and test episodes: encode every
//! controllable vehicle, run the actor once as a batch, then apply state
//! maintenance and the action mask.

use std::collections::{BTreeMap, BTreeSet};

use crate::episode::{ControlOutput, Controller, Engine};
use crate::nnet::Matrix;
use crate::VehicleId;

use super::encoding::{encode, snapshot, CompactSnapshot, EncodingSpec};
use super::losses::project_action;
use super::mechanisms::{action_mask, state_maintenance};
use super::nets::DhalNets;
use super::DhalParams;

/// One vehicle's decision this step, kept for experience collection.
#[derive(Clone, Debug)]
pub struct Decision {
    pub vehicle: VehicleId,
    pub snapshot: CompactSnapshot,
    /// Final acceleration after maintenance and masking.
    pub action: f64,
}

/// Encode, act, maintain, mask: the per-step policy for every controllable
/// vehicle.
pub fn decide(
    nets: &DhalNets<f32>,
    spec: &EncodingSpec,
    params: &DhalParams,
    engine: &Engine,
) -> Vec<Decision> {
    let vehicles: Vec<(VehicleId, f64)> =
        engine.controllable().iter().map(|v| (v.id, v.v)).collect();
    if vehicles.is_empty() {
        return Vec::new();
    }

    let snapshots: Vec<CompactSnapshot> =
        vehicles.iter().map(|(id, _)| snapshot(engine, *id)).collect();
    let rows: Vec<Vec<f32>> =
        snapshots.iter().map(|s| encode::<f32>(spec, &engine.layout, s)).collect();
    let batch = Matrix::from_rows(&rows);
    let (tanh_out, _) = nets.actor.forward_batch(&batch).expect("actor dimensions");

    let tables = engine.tables();
    let pairs = tables.update.conflicting_pairs();
    vehicles
        .into_iter()
        .zip(snapshots)
        .zip(tanh_out)
        .map(|(((id, v), snap), y)| {
            let raw = project_action(y as f64, params.a_min, params.a_max);
            let labels = tables.labels_of(id);
            let maintained = state_maintenance(labels.l_c, v, params.v_keep, raw);
            let masked = action_mask(
                &engine.layout,
                &engine.config.table,
                &engine.config.sim,
                &tables.probes,
                &pairs,
                id,
                maintained,
                params.mask_lookahead,
            );
            Decision { vehicle: id, snapshot: snap, action: masked }
        })
        .collect()
}

/// Test-time controller wrapping a trained (or fresh) network set.
pub struct DhalController {
    pub nets: DhalNets<f32>,
    pub spec: EncodingSpec,
    pub params: DhalParams,
}

impl Controller for DhalController {
    fn control(&mut self, engine: &Engine) -> ControlOutput {
        let decisions = decide(&self.nets, &self.spec, &self.params, engine);
        let actions: BTreeMap<VehicleId, f64> =
            decisions.into_iter().map(|d| (d.vehicle, d.action)).collect();
        ControlOutput {
            actions,
            launch_ok: engine.launch_candidates().into_iter().collect(),
            hold: BTreeSet::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::episode::{run_episode, EngineConfig};
    use crate::geometry::{build_layout, LayoutConfig};
    use crate::reservation::TableParams;
    use crate::simcore::admission::GateMode;
    use crate::simcore::SimParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn untrained_controller_runs_a_safe_test_episode() {
        let layout = Arc::new(build_layout(&LayoutConfig::default()).unwrap());
        let spec = EncodingSpec::from_layout(&layout);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sizes = super::super::nets::NetSizes { g_hidden: [32, 16, 8], joint_hidden: [16, 8] };
        let mut controller = DhalController {
            nets: DhalNets::new(&spec, sizes, &mut rng),
            spec,
            params: DhalParams::default(),
        };
        let result = run_episode(
            EngineConfig {
                sim: SimParams::default(),
                table: TableParams::default(),
                gate_mode: GateMode::Enforced,
                episode_length: 60.0,
                drain_period: 120.0,
            },
            layout,
            ChaCha8Rng::seed_from_u64(2),
            3600.0,
            &mut controller,
        );
        assert!(result.collision_events.is_empty());
        assert!(result.trips.iter().any(|t| t.outcome == crate::metrics::TripOutcome::Passed));
    }
}
