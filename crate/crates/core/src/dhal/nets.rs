//! The five networks: an actor and four discriminators, each a two-branch
//! perceptron. A three-layer MLP digests the global raster; its features are
//! concatenated with the ego vector (and, for discriminators, the action) and
//! pushed through a second three-layer MLP.

use rand::Rng;

use crate::nnet::{Activation, AdamState, Gradients, Matrix, Mlp, NnetError, Real};

use super::encoding::EncodingSpec;

#[derive(Clone, Debug)]
pub struct TwoBranchNet<T> {
    pub g_branch: Mlp<T>,
    pub joint: Mlp<T>,
    g_dim: usize,
}

#[derive(Clone, Debug)]
pub struct TbCache<T> {
    g: crate::nnet::Cache<T>,
    joint: crate::nnet::Cache<T>,
    rest_cols: usize,
}

#[derive(Clone, Debug)]
pub struct TbGradients<T> {
    pub g_branch: Gradients<T>,
    pub joint: Gradients<T>,
}

pub struct TbAdam<T> {
    pub g_branch: AdamState<T>,
    pub joint: AdamState<T>,
}

impl<T: Real> TwoBranchNet<T> {
    /// `input = [G | rest]`; the joint net sees `[g_features | rest]`.
    pub fn new<R: Rng>(
        g_dims: &[usize],
        rest_dim: usize,
        joint_hidden: &[usize],
        output_act: Activation,
        rng: &mut R,
    ) -> Self {
        let g_branch = Mlp::new(g_dims, &vec![Activation::Relu; g_dims.len() - 1], rng);
        let mut joint_dims = vec![g_dims[g_dims.len() - 1] + rest_dim];
        joint_dims.extend_from_slice(joint_hidden);
        joint_dims.push(1);
        let mut joint_acts = vec![Activation::Relu; joint_dims.len() - 2];
        joint_acts.push(output_act);
        let joint = Mlp::new(&joint_dims, &joint_acts, rng);
        TwoBranchNet { g_branch, joint, g_dim: g_dims[0] }
    }

    pub fn g_dim(&self) -> usize {
        self.g_dim
    }

    pub fn input_dim(&self) -> usize {
        self.g_dim + (self.joint.input_dim() - self.g_branch.output_dim())
    }

    pub fn n_params(&self) -> usize {
        self.g_branch.n_params() + self.joint.n_params()
    }

    /// Scalar outputs for a batch of `[G | rest]` rows.
    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<(Vec<T>, TbCache<T>), NnetError> {
        if input.cols() != self.input_dim() {
            return Err(NnetError::DimensionMismatch {
                got: input.cols(),
                expected: self.input_dim(),
            });
        }
        let (g_in, rest) = input.split_cols(self.g_dim);
        let (g_out, g_cache) = self.g_branch.forward_batch(&g_in)?;
        let joint_in = Matrix::concat_cols(&g_out, &rest);
        let (out, joint_cache) = self.joint.forward_batch(&joint_in)?;
        let scalars = (0..out.rows()).map(|i| out.get(i, 0)).collect();
        Ok((scalars, TbCache { g: g_cache, joint: joint_cache, rest_cols: rest.cols() }))
    }

    /// Full parameter gradients plus the gradient at the `rest` columns of
    /// the input (the action sits there for discriminators).
    pub fn backward_batch(
        &self,
        cache: &TbCache<T>,
        d_out: &[T],
    ) -> (TbGradients<T>, Matrix<T>) {
        let d = Matrix::from_vec(d_out.len(), 1, d_out.to_vec());
        let (joint_grads, d_joint_in) = self.joint.backward_batch(&cache.joint, &d);
        let (d_g_out, d_rest) = d_joint_in.split_cols(self.g_branch.output_dim());
        let (g_grads, _) = self.g_branch.backward_batch(&cache.g, &d_g_out);
        (TbGradients { g_branch: g_grads, joint: joint_grads }, d_rest)
    }

    /// Gradient at the `rest` input columns only (frozen network).
    pub fn backward_rest_only(&self, cache: &TbCache<T>, d_out: &[T]) -> Matrix<T> {
        let d = Matrix::from_vec(d_out.len(), 1, d_out.to_vec());
        let d_joint_in = self.joint.backward_batch_input_only(&cache.joint, &d);
        let (_, d_rest) = d_joint_in.split_cols(self.g_branch.output_dim());
        debug_assert_eq!(d_rest.cols(), cache.rest_cols);
        d_rest
    }
}

impl<T: Real> TbAdam<T> {
    pub fn new(net: &TwoBranchNet<T>, lr: T) -> Self {
        TbAdam { g_branch: AdamState::new(&net.g_branch, lr), joint: AdamState::new(&net.joint, lr) }
    }

    pub fn step(&mut self, net: &mut TwoBranchNet<T>, grads: &TbGradients<T>) -> bool {
        let ok_g = self.g_branch.step(&mut net.g_branch, &grads.g_branch);
        let ok_j = self.joint.step(&mut net.joint, &grads.joint);
        ok_g && ok_j
    }
}

/// Architecture constants shared by the five networks.
#[derive(Clone, Copy, Debug)]
pub struct NetSizes {
    pub g_hidden: [usize; 3],
    pub joint_hidden: [usize; 2],
}

impl Default for NetSizes {
    fn default() -> Self {
        NetSizes { g_hidden: [512, 256, 128], joint_hidden: [256, 128] }
    }
}

/// The actor and the four discriminators.
pub struct DhalNets<T> {
    pub actor: TwoBranchNet<T>,
    /// Predicts the current-step conflict label.
    pub conflict: TwoBranchNet<T>,
    /// Predicts the active-conflict (must-yield) label.
    pub active: TwoBranchNet<T>,
    /// Predicts the passive-conflict (has-priority) label.
    pub passive: TwoBranchNet<T>,
    /// Predicts the end-of-trajectory collision label.
    pub final_net: TwoBranchNet<T>,
}

impl<T: Real> DhalNets<T> {
    pub fn new<R: Rng>(spec: &EncodingSpec, sizes: NetSizes, rng: &mut R) -> Self {
        let g_dims = [
            spec.g_dim(),
            sizes.g_hidden[0],
            sizes.g_hidden[1],
            sizes.g_hidden[2],
        ];
        let actor =
            TwoBranchNet::new(&g_dims, spec.ego_dim(), &sizes.joint_hidden, Activation::Tanh, rng);
        let disc = |rng: &mut R| {
            TwoBranchNet::new(
                &g_dims,
                spec.ego_dim() + 1,
                &sizes.joint_hidden,
                Activation::Sigmoid,
                rng,
            )
        };
        DhalNets {
            actor,
            conflict: disc(rng),
            active: disc(rng),
            passive: disc(rng),
            final_net: disc(rng),
        }
    }

    pub fn discriminators(&self) -> [&TwoBranchNet<T>; 4] {
        [&self.conflict, &self.active, &self.passive, &self.final_net]
    }
}

impl DhalNets<f32> {
    const NAMES: [&'static str; 10] = [
        "actor.g",
        "actor.joint",
        "conflict.g",
        "conflict.joint",
        "active.g",
        "active.joint",
        "passive.g",
        "passive.joint",
        "final.g",
        "final.joint",
    ];

    pub fn to_bundle(&self) -> Vec<u8> {
        let nets = [
            (&self.actor, 0),
            (&self.conflict, 2),
            (&self.active, 4),
            (&self.passive, 6),
            (&self.final_net, 8),
        ];
        let mut named: Vec<(&str, &Mlp<f32>)> = Vec::new();
        for (net, base) in nets {
            named.push((Self::NAMES[base], &net.g_branch));
            named.push((Self::NAMES[base + 1], &net.joint));
        }
        crate::nnet::checkpoint::encode_bundle(&named)
    }

    pub fn from_bundle(bytes: &[u8]) -> Result<Self, NnetError> {
        let loaded = crate::nnet::checkpoint::decode_bundle(bytes)?;
        let find = |name: &str| -> Result<Mlp<f32>, NnetError> {
            loaded
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m.clone())
                .ok_or_else(|| NnetError::Checkpoint(format!("missing net {name}")))
        };
        let assemble = |g: Mlp<f32>, joint: Mlp<f32>| -> TwoBranchNet<f32> {
            let g_dim = g.input_dim();
            TwoBranchNet { g_branch: g, joint, g_dim }
        };
        Ok(DhalNets {
            actor: assemble(find("actor.g")?, find("actor.joint")?),
            conflict: assemble(find("conflict.g")?, find("conflict.joint")?),
            active: assemble(find("active.g")?, find("active.joint")?),
            passive: assemble(find("passive.g")?, find("passive.joint")?),
            final_net: assemble(find("final.g")?, find("final.joint")?),
        })
    }
}
