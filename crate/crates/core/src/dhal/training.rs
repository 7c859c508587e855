//! Training: binary-cross-entropy updates for the four discriminators and
//! the adversarial actor update, with gradients flowing through the frozen
//! discriminators into the action.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::episode::{ControlOutput, Engine, EngineConfig};
use crate::geometry::Layout;
use crate::nnet::{Matrix, Real};
use crate::reservation::TableParams;
use crate::simcore::admission::GateMode;
use crate::simcore::SimParams;
use crate::VehicleId;

use super::controller::decide;
use super::encoding::{encode, CompactSnapshot, EncodingSpec};
use super::losses::{
    actor_loss, actor_loss_grad, beta, fuse_labels, fuse_labels_grad, project_action,
};
use super::nets::{DhalNets, NetSizes, TbAdam, TwoBranchNet};
use super::palace::{Experience, MemoryPalace};
use super::{gamma_at, DhalParams};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at update {update} (step {step})")]
    NonFinite { update: u64, step: u64 },
}

/// One curve sample per training round.
#[derive(Clone, Copy, Debug)]
pub struct CurveRow {
    pub step: u64,
    pub actor_loss: f64,
    pub immediate_bce: f64,
    pub final_bce: f64,
}

#[derive(Clone, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub flow_veh_h: f64,
    pub trips: usize,
    pub passed: usize,
    pub collisions: usize,
    pub palace_size: usize,
}

pub struct TrainOutput {
    pub nets: DhalNets<f32>,
    pub curves: Vec<CurveRow>,
    pub epochs: Vec<EpochStats>,
    /// Set when training aborted on a non-finite loss; the networks hold the
    /// last finite state.
    pub aborted: Option<String>,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub episode_length: f64,
    pub desk_scale: f64,
    pub seed: u64,
    pub sim: SimParams,
    pub table: TableParams,
    pub params: DhalParams,
    pub sizes: NetSizes,
}

/// Flow band for one epoch of the 15-epoch traffic curriculum, in veh/h
/// before desk scaling.
pub fn curriculum_flow<R: Rng>(epoch: usize, rng: &mut R) -> f64 {
    let (lo, hi) = match epoch % 15 {
        0..=8 => (6000.0, 7200.0),
        9..=11 => (7200.0, 8400.0),
        _ => (8400.0, 9600.0),
    };
    rng.random_range(lo..hi)
}

/// Binary cross-entropy with the output clamped away from saturation.
fn bce_loss_and_dout<T: Real>(p: T, y: T, n: usize) -> (T, T) {
    let lo = T::from_f64(1e-6);
    let hi = T::one() - lo;
    let pc = p.max(lo).min(hi);
    let loss = -(y * pc.ln() + (T::one() - y) * (T::one() - pc).ln());
    // d loss / d p; the sigmoid derivative in backward turns this into p - y.
    let d = (pc - y) / (pc * (T::one() - pc)) / T::from_f64(n as f64);
    (loss, d)
}

/// One BCE Adam step for a single discriminator. Returns the mean loss.
fn train_one_discriminator<T: Real>(
    net: &mut TwoBranchNet<T>,
    adam: &mut TbAdam<T>,
    inputs: &Matrix<T>,
    targets: &[T],
) -> T {
    let n = targets.len();
    let (out, cache) = net.forward_batch(inputs).expect("discriminator dimensions");
    let mut total = T::zero();
    let mut d_out = Vec::with_capacity(n);
    for (&p, &y) in out.iter().zip(targets) {
        let (l, d) = bce_loss_and_dout(p, y, n);
        total += l;
        d_out.push(d);
    }
    let (grads, _) = net.backward_batch(&cache, &d_out);
    adam.step(net, &grads);
    total / T::from_f64(n as f64)
}

pub struct DiscriminatorLosses {
    pub conflict: f64,
    pub active: f64,
    pub passive: f64,
    pub final_net: f64,
}

impl DiscriminatorLosses {
    pub fn immediate_mean(&self) -> f64 {
        (self.conflict + self.active + self.passive) / 3.0
    }
}

/// Optimizer states for all five networks.
pub struct DhalAdam<T> {
    pub actor: TbAdam<T>,
    pub conflict: TbAdam<T>,
    pub active: TbAdam<T>,
    pub passive: TbAdam<T>,
    pub final_net: TbAdam<T>,
}

impl<T: Real> DhalAdam<T> {
    pub fn new(nets: &DhalNets<T>, params: &DhalParams) -> Self {
        let alr = T::from_f64(params.actor_lr);
        let dlr = T::from_f64(params.discriminator_lr);
        DhalAdam {
            actor: TbAdam::new(&nets.actor, alr),
            conflict: TbAdam::new(&nets.conflict, dlr),
            active: TbAdam::new(&nets.active, dlr),
            passive: TbAdam::new(&nets.passive, dlr),
            final_net: TbAdam::new(&nets.final_net, dlr),
        }
    }
}

/// Build the `[state | action]` discriminator input for a batch of
/// experiences.
fn disc_inputs<T: Real>(
    spec: &EncodingSpec,
    layout: &Layout,
    params: &DhalParams,
    batch: &[&Experience],
) -> Matrix<T> {
    let rows: Vec<Vec<T>> = batch
        .iter()
        .map(|e| {
            let mut row = encode::<T>(spec, layout, &e.snapshot);
            row.push(T::from_f64(e.action as f64 / params.a_max));
            row
        })
        .collect();
    Matrix::from_rows(&rows)
}

/// One training round for all four discriminators on a palace sample.
pub fn train_discriminators<T: Real, R: Rng>(
    nets: &mut DhalNets<T>,
    adam: &mut DhalAdam<T>,
    palace: &MemoryPalace,
    spec: &EncodingSpec,
    layout: &Layout,
    params: &DhalParams,
    rng: &mut R,
) -> DiscriminatorLosses {
    let batch = palace.sample(rng, params.batch_size);
    let inputs = disc_inputs::<T>(spec, layout, params, &batch);
    let to_t = |b: bool| if b { T::one() } else { T::zero() };
    let l_c: Vec<T> = batch.iter().map(|e| to_t(e.l_c())).collect();
    let l_ac: Vec<T> = batch.iter().map(|e| to_t(e.l_ac)).collect();
    let l_pc: Vec<T> = batch.iter().map(|e| to_t(e.l_pc)).collect();
    let d_c: Vec<T> = batch.iter().map(|e| to_t(e.delta_c)).collect();

    DiscriminatorLosses {
        conflict: train_one_discriminator(&mut nets.conflict, &mut adam.conflict, &inputs, &l_c)
            .to_f64_val(),
        active: train_one_discriminator(&mut nets.active, &mut adam.active, &inputs, &l_ac)
            .to_f64_val(),
        passive: train_one_discriminator(&mut nets.passive, &mut adam.passive, &inputs, &l_pc)
            .to_f64_val(),
        final_net: train_one_discriminator(&mut nets.final_net, &mut adam.final_net, &inputs, &d_c)
            .to_f64_val(),
    }
}

/// Mean composite actor loss over a batch of states and its gradients for the
/// actor parameters. Discriminators are frozen; gradients flow through them
/// into the action and on into the actor.
pub fn actor_loss_batch<T: Real>(
    nets: &DhalNets<T>,
    spec: &EncodingSpec,
    layout: &Layout,
    params: &DhalParams,
    gamma: f64,
    snapshots: &[&CompactSnapshot],
) -> (T, super::nets::TbGradients<T>) {
    let n = snapshots.len();
    assert!(n > 0);
    let a_min = T::from_f64(params.a_min);
    let a_max = T::from_f64(params.a_max);
    let alpha = T::from_f64(params.alpha);
    let gamma_t = T::from_f64(gamma);
    let d_min = T::from_f64(params.d_min);
    let d_max = T::from_f64(params.d_max);

    let state_rows: Vec<Vec<T>> =
        snapshots.iter().map(|s| encode::<T>(spec, layout, s)).collect();
    let states = Matrix::from_rows(&state_rows);
    let (tanh_out, actor_cache) = nets.actor.forward_batch(&states).expect("actor dims");
    let actions: Vec<T> =
        tanh_out.iter().map(|&y| project_action(y, a_min, a_max)).collect();

    // [state | a / a_max] for the discriminators.
    let mut disc_rows = state_rows;
    for (row, &a) in disc_rows.iter_mut().zip(&actions) {
        row.push(a / a_max);
    }
    let disc_in = Matrix::from_rows(&disc_rows);
    let (l_c, c_cache) = nets.conflict.forward_batch(&disc_in).expect("disc dims");
    let (l_ac_raw, ac_cache) = nets.active.forward_batch(&disc_in).expect("disc dims");
    let (l_pc_raw, pc_cache) = nets.passive.forward_batch(&disc_in).expect("disc dims");
    let (delta, f_cache) = nets.final_net.forward_batch(&disc_in).expect("disc dims");

    let inv_n = T::from_f64(1.0 / n as f64);
    let mut total = T::zero();
    let mut d_c = vec![T::zero(); n];
    let mut d_ac_raw = vec![T::zero(); n];
    let mut d_pc_raw = vec![T::zero(); n];
    let mut d_delta = vec![T::zero(); n];
    let mut d_a_direct = vec![T::zero(); n];

    for i in 0..n {
        let (l_ac, l_pc) = fuse_labels(l_c[i], l_ac_raw[i], l_pc_raw[i], alpha);
        let d_stop = T::from_f64(snapshots[i].ego_stop_line_distance(layout));
        let b = beta(d_stop, d_min, d_max, gamma_t);
        total += actor_loss(actions[i], l_pc, l_ac, delta[i], b, a_min, a_max);

        let (g_a, g_lpc, g_lac, g_delta) =
            actor_loss_grad(actions[i], l_pc, l_ac, delta[i], b, a_min, a_max);
        let (f_ac, f_pc) = fuse_labels_grad(l_c[i], l_ac_raw[i], l_pc_raw[i], alpha);
        d_c[i] = (g_lac * f_ac[0] + g_lpc * f_pc[0]) * inv_n;
        d_ac_raw[i] = (g_lac * f_ac[1] + g_lpc * f_pc[1]) * inv_n;
        d_pc_raw[i] = (g_lac * f_ac[2] + g_lpc * f_pc[2]) * inv_n;
        d_delta[i] = g_delta * inv_n;
        d_a_direct[i] = g_a * inv_n;
    }
    let mean_loss = total * inv_n;

    // Flow the label gradients through the frozen discriminators back to the
    // action column (the last `rest` input).
    let rest_cols = spec.ego_dim() + 1;
    let mut d_action = d_a_direct;
    for (net, cache, d_out) in [
        (&nets.conflict, &c_cache, &d_c),
        (&nets.active, &ac_cache, &d_ac_raw),
        (&nets.passive, &pc_cache, &d_pc_raw),
        (&nets.final_net, &f_cache, &d_delta),
    ] {
        let d_rest = net.backward_rest_only(cache, d_out);
        debug_assert_eq!(d_rest.cols(), rest_cols);
        for i in 0..n {
            // input feature is a / a_max.
            d_action[i] += d_rest.get(i, rest_cols - 1) / a_max;
        }
    }

    // Through the projection onto [a_min, a_max]: da/dy = (a_max - a_min)/2.
    let half_range = (a_max - a_min) / T::from_f64(2.0);
    let d_tanh: Vec<T> = d_action.iter().map(|&d| d * half_range).collect();
    let (grads, _) = nets.actor.backward_batch(&actor_cache, &d_tanh);
    (mean_loss, grads)
}

/// One actor update on fresh states. Returns the mean loss.
pub fn train_actor<T: Real, R: Rng>(
    nets: &mut DhalNets<T>,
    adam: &mut DhalAdam<T>,
    palace: &MemoryPalace,
    spec: &EncodingSpec,
    layout: &Layout,
    params: &DhalParams,
    gamma: f64,
    rng: &mut R,
) -> T {
    let batch = palace.sample_recent(rng, params.batch_size, params.fresh_window);
    let snapshots: Vec<&CompactSnapshot> = batch.iter().map(|e| &e.snapshot).collect();
    let (loss, grads) = actor_loss_batch(nets, spec, layout, params, gamma, &snapshots);
    adam.actor.step(&mut nets.actor, &grads);
    loss
}

/// Run the full training process: curriculum episodes in permissive-gate
/// mode, experience collection, and interleaved discriminator/actor updates.
pub fn run_training(config: &TrainConfig, layout: Arc<Layout>) -> TrainOutput {
    let spec = EncodingSpec::from_layout(&layout);
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nets: DhalNets<f32> = DhalNets::new(&spec, config.sizes, &mut init_rng);
    let mut adam = DhalAdam::new(&nets, &config.params);
    let mut palace = MemoryPalace::new(config.params.buffer_capacity);
    let mut sampler = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5a5a));
    let mut flow_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0xf10f));

    let steps_per_epoch = (config.episode_length / config.sim.dt_action()).round() as u64;
    let total_steps = config.epochs as u64 * steps_per_epoch;
    let mut curves = Vec::new();
    let mut epochs = Vec::new();
    let mut global_step = 0u64;
    let mut updates = 0u64;
    let mut aborted = None;

    'training: for epoch in 0..config.epochs {
        let flow = curriculum_flow(epoch, &mut flow_rng) * config.desk_scale;
        let engine_config = EngineConfig {
            sim: config.sim,
            table: config.table,
            gate_mode: GateMode::Permissive,
            episode_length: config.episode_length,
            drain_period: 0.0,
        };
        let mut engine = Engine::new(
            engine_config,
            layout.clone(),
            ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(31).wrapping_add(epoch as u64)),
            flow,
        );

        // Per-vehicle record of the step taken last action step, waiting for
        // its next-step conflict labels.
        let mut pending: BTreeMap<VehicleId, (CompactSnapshot, f32)> = BTreeMap::new();
        // Completed labeled steps per vehicle, waiting for the trip outcome.
        let mut open: BTreeMap<VehicleId, Vec<(CompactSnapshot, f32, bool, bool)>> =
            BTreeMap::new();
        let mut epoch_trips = 0usize;
        let mut epoch_passed = 0usize;
        let mut epoch_collisions = 0usize;

        while !engine.finished() {
            engine.begin_step();

            // The labels of an action are read from the table one step later.
            let pending_now = std::mem::take(&mut pending);
            for (id, (snap, action)) in pending_now {
                let labels = engine.tables().labels_of(id);
                open.entry(id).or_default().push((snap, action, labels.l_ac, labels.l_pc));
            }

            let decisions = decide(&nets, &spec, &config.params, &engine);
            let mut actions = BTreeMap::new();
            for d in decisions {
                actions.insert(d.vehicle, d.action);
                pending.insert(d.vehicle, (d.snapshot, d.action as f32));
            }
            let output = ControlOutput {
                actions,
                launch_ok: engine.launch_candidates().into_iter().collect(),
                hold: BTreeSet::new(),
            };
            let events = engine.apply(&output);

            for trip in &events.exited {
                let id = trip.vehicle;
                let collided = trip.outcome == crate::metrics::TripOutcome::Collided;
                epoch_trips += 1;
                if collided {
                    epoch_collisions += 1;
                } else if trip.outcome == crate::metrics::TripOutcome::Passed {
                    epoch_passed += 1;
                }
                // The final pending step has no next table; close it with
                // zero labels (the vehicle no longer books any cell).
                let mut steps = open.remove(&id).unwrap_or_default();
                if let Some((snap, action)) = pending.remove(&id) {
                    steps.push((snap, action, false, false));
                }
                if !steps.is_empty() {
                    palace.push_trajectory(steps, collided);
                }
            }

            global_step += 1;
            if global_step % config.params.update_every as u64 == 0
                && palace.len() >= config.params.batch_size
            {
                let gamma = gamma_at(&config.params, global_step, total_steps);
                let disc = train_discriminators(
                    &mut nets,
                    &mut adam,
                    &palace,
                    &spec,
                    &layout,
                    &config.params,
                    &mut sampler,
                );
                let actor = train_actor(
                    &mut nets,
                    &mut adam,
                    &palace,
                    &spec,
                    &layout,
                    &config.params,
                    gamma,
                    &mut sampler,
                );
                updates += 1;
                let row = CurveRow {
                    step: global_step,
                    actor_loss: actor as f64,
                    immediate_bce: disc.immediate_mean(),
                    final_bce: disc.final_net,
                };
                if !row.actor_loss.is_finite()
                    || !row.immediate_bce.is_finite()
                    || !row.final_bce.is_finite()
                {
                    aborted = Some(
                        TrainError::NonFinite { update: updates, step: global_step }.to_string(),
                    );
                    curves.push(row);
                    break 'training;
                }
                curves.push(row);
            }
        }

        // Vehicles still driving at episode end never collided.
        let leftovers: Vec<VehicleId> = open.keys().copied().collect();
        for id in leftovers {
            let mut steps = open.remove(&id).unwrap_or_default();
            if let Some((snap, action)) = pending.remove(&id) {
                steps.push((snap, action, false, false));
            }
            if !steps.is_empty() {
                palace.push_trajectory(steps, false);
            }
        }
        pending.clear();

        epochs.push(EpochStats {
            epoch,
            flow_veh_h: flow,
            trips: epoch_trips,
            passed: epoch_passed,
            collisions: epoch_collisions,
            palace_size: palace.len(),
        });
    }

    TrainOutput { nets, curves, epochs, aborted }
}
