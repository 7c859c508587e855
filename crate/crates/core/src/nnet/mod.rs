//! Minimal neural-network engine: multilayer perceptrons with exact
//! reverse-mode gradients, bias-corrected Adam, finite-difference gradient
//! checking, and a bit-exact binary checkpoint format.
//!
//! Everything is generic over [`Real`]; training runs in `f32`, the
//! finite-difference oracles in `f64`.

pub mod checkpoint;
pub mod matrix;

use rand::Rng;
use thiserror::Error;

pub use matrix::Matrix;

/// Floating-point element type for network parameters and activations.
pub trait Real:
    num_traits::Float + num_traits::NumAssign + Send + Sync + std::fmt::Debug + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64_val(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64_val(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64_val(self) -> f64 {
        self
    }
}

#[derive(Debug, Error)]
pub enum NnetError {
    #[error("input dimension {got} does not match first layer ({expected})")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Relu => {
                if x > T::zero() {
                    x
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
            Activation::Identity => T::one(),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Identity => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Identity,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug)]
pub struct Layer<T> {
    /// Weights, `out x in` row-major.
    pub w: Matrix<T>,
    pub b: Vec<T>,
    pub act: Activation,
}

/// A plain multilayer perceptron.
#[derive(Clone, Debug)]
pub struct Mlp<T> {
    pub layers: Vec<Layer<T>>,
}

/// Post-activation outputs of every layer for one batch, kept for backward.
#[derive(Clone, Debug)]
pub struct Cache<T> {
    input: Matrix<T>,
    outputs: Vec<Matrix<T>>,
}

impl<T: Real> Cache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.outputs.last().expect("cache has at least one layer")
    }
}

/// Parameter gradients, shapes mirroring the network.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    pub d_w: Vec<Matrix<T>>,
    pub d_b: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(mlp: &Mlp<T>) -> Self {
        Gradients {
            d_w: mlp.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            d_b: mlp.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: T) {
        for m in &mut self.d_w {
            for x in m.data_mut() {
                *x *= k;
            }
        }
        for b in &mut self.d_b {
            for x in b {
                *x *= k;
            }
        }
    }

    pub fn add(&mut self, other: &Gradients<T>) {
        for (a, b) in self.d_w.iter_mut().zip(&other.d_w) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.d_b.iter_mut().zip(&other.d_b) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_w.iter().all(|m| m.data().iter().all(|x| x.is_finite()))
            && self.d_b.iter().all(|b| b.iter().all(|x| x.is_finite()))
    }
}

impl<T: Real> Mlp<T> {
    /// Xavier-uniform initialization: weights in +/- sqrt(6 / (fan_in + fan_out)).
    pub fn new<R: Rng>(dims: &[usize], acts: &[Activation], rng: &mut R) -> Self {
        assert!(dims.len() >= 2);
        assert_eq!(acts.len(), dims.len() - 1);
        let mut layers = Vec::new();
        for (i, &act) in acts.iter().enumerate() {
            let (fan_in, fan_out) = (dims[i], dims[i + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<T> = (0..fan_in * fan_out)
                .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                .collect();
            layers.push(Layer {
                w: Matrix::from_vec(fan_out, fan_in, data),
                b: vec![T::zero(); fan_out],
                act,
            });
        }
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().w.rows()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.rows() * l.w.cols() + l.b.len()).sum()
    }

    /// Batched forward pass; the cache keeps every layer's activations.
    pub fn forward_batch(&self, input: &Matrix<T>) -> Result<(Matrix<T>, Cache<T>), NnetError> {
        if input.cols() != self.input_dim() {
            return Err(NnetError::DimensionMismatch {
                got: input.cols(),
                expected: self.input_dim(),
            });
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let mut z = current.matmul_nt(&layer.w);
            z.add_bias(&layer.b);
            for x in z.data_mut() {
                *x = layer.act.apply(*x);
            }
            outputs.push(z.clone());
            current = z;
        }
        Ok((current, Cache { input: input.clone(), outputs }))
    }

    /// Single-sample forward.
    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, Cache<T>), NnetError> {
        let m = Matrix::from_vec(1, input.len(), input.to_vec());
        let (out, cache) = self.forward_batch(&m)?;
        Ok((out.row(0).to_vec(), cache))
    }

    /// Exact reverse-mode gradients of a scalar loss with the given
    /// output-gradient, for all parameters and the input.
    pub fn backward_batch(
        &self,
        cache: &Cache<T>,
        d_output: &Matrix<T>,
    ) -> (Gradients<T>, Matrix<T>) {
        assert_eq!(cache.outputs.len(), self.layers.len(), "stale cache");
        assert_eq!(d_output.rows(), cache.input.rows(), "stale cache");
        assert_eq!(d_output.cols(), self.output_dim());

        let mut grads = Gradients {
            d_w: Vec::with_capacity(self.layers.len()),
            d_b: Vec::with_capacity(self.layers.len()),
        };
        let mut delta = d_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            // delta currently holds dL/d(activation output) of this layer.
            let y = &cache.outputs[idx];
            for (d, &out) in delta.data_mut().iter_mut().zip(y.data()) {
                *d = *d * layer.act.derivative_from_output(out);
            }
            let below: &Matrix<T> =
                if idx == 0 { &cache.input } else { &cache.outputs[idx - 1] };
            grads.d_w.push(delta.matmul_tn(below));
            grads.d_b.push(delta.col_sums());
            delta = delta.matmul_nn(&layer.w);
        }
        grads.d_w.reverse();
        grads.d_b.reverse();
        (grads, delta)
    }

    pub fn backward(&self, cache: &Cache<T>, d_output: &[T]) -> (Gradients<T>, Vec<T>) {
        let d = Matrix::from_vec(1, d_output.len(), d_output.to_vec());
        let (grads, d_in) = self.backward_batch(cache, &d);
        (grads, d_in.row(0).to_vec())
    }

    /// Input gradient only, skipping parameter gradients. Used when this
    /// network is frozen and gradients merely flow through it.
    pub fn backward_batch_input_only(&self, cache: &Cache<T>, d_output: &Matrix<T>) -> Matrix<T> {
        assert_eq!(cache.outputs.len(), self.layers.len(), "stale cache");
        let mut delta = d_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.outputs[idx];
            for (d, &out) in delta.data_mut().iter_mut().zip(y.data()) {
                *d = *d * layer.act.derivative_from_output(out);
            }
            delta = delta.matmul_nn(&layer.w);
        }
        delta
    }

    /// Flat views used by checkpointing and gradient checks.
    pub fn param(&self, flat_index: usize) -> T {
        let (layer, offset) = self.locate(flat_index);
        let l = &self.layers[layer];
        let nw = l.w.rows() * l.w.cols();
        if offset < nw {
            l.w.data()[offset]
        } else {
            l.b[offset - nw]
        }
    }

    pub fn param_mut(&mut self, flat_index: usize) -> &mut T {
        let (layer, offset) = self.locate(flat_index);
        let l = &mut self.layers[layer];
        let nw = l.w.rows() * l.w.cols();
        if offset < nw {
            &mut l.w.data_mut()[offset]
        } else {
            &mut l.b[offset - nw]
        }
    }

    fn locate(&self, flat_index: usize) -> (usize, usize) {
        let mut remaining = flat_index;
        for (i, l) in self.layers.iter().enumerate() {
            let n = l.w.rows() * l.w.cols() + l.b.len();
            if remaining < n {
                return (i, remaining);
            }
            remaining -= n;
        }
        panic!("parameter index out of range");
    }
}

/// Adam optimizer state: first/second moments per parameter plus a shared
/// step counter.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    m_w: Vec<Matrix<T>>,
    v_w: Vec<Matrix<T>>,
    m_b: Vec<Vec<T>>,
    v_b: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(mlp: &Mlp<T>, lr: T) -> Self {
        AdamState {
            lr,
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            step: 0,
            m_w: mlp.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            v_w: mlp.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            m_b: mlp.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
            v_b: mlp.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
        }
    }

    /// One bias-corrected Adam update. Non-finite gradients skip the step and
    /// report `false`.
    pub fn step(&mut self, mlp: &mut Mlp<T>, grads: &Gradients<T>) -> bool {
        if !grads.is_finite() {
            return false;
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        let one = T::one();

        for (i, layer) in mlp.layers.iter_mut().enumerate() {
            let (m, v) = (&mut self.m_w[i], &mut self.v_w[i]);
            for ((w, &g), (m, v)) in layer
                .w
                .data_mut()
                .iter_mut()
                .zip(grads.d_w[i].data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut()))
            {
                *m = self.beta1 * *m + (one - self.beta1) * g;
                *v = self.beta2 * *v + (one - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w = *w - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            for ((b, &g), (m, v)) in layer
                .b
                .iter_mut()
                .zip(&grads.d_b[i])
                .zip(self.m_b[i].iter_mut().zip(self.v_b[i].iter_mut()))
            {
                *m = self.beta1 * *m + (one - self.beta1) * g;
                *v = self.beta2 * *v + (one - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *b = *b - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        true
    }
}

/// Result of a finite-difference check.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub coordinates: usize,
}

/// Compare analytic parameter gradients against central finite differences at
/// `n_coords` randomly sampled coordinates.
///
/// `loss` maps the network output vector to a scalar loss and its gradient.
/// Coordinates whose perturbation flips a relu activation state are skipped
/// (the loss is not differentiable there); they do not count toward the
/// sample budget.
pub fn grad_check<T: Real, R: Rng>(
    mlp: &Mlp<T>,
    input: &[T],
    loss: impl Fn(&[T]) -> (T, Vec<T>),
    n_coords: usize,
    h: f64,
    rng: &mut R,
) -> GradCheck {
    let (out, cache) = mlp.forward(input).expect("dimension mismatch in grad_check");
    let (_, d_out) = loss(&out);
    let (analytic, _) = mlp.backward(&cache, &d_out);

    let flat_analytic = |idx: usize| -> f64 {
        // Mirror the flat parameter layout.
        let mut remaining = idx;
        for (i, l) in mlp.layers.iter().enumerate() {
            let nw = l.w.rows() * l.w.cols();
            let n = nw + l.b.len();
            if remaining < n {
                return if remaining < nw {
                    analytic.d_w[i].data()[remaining].to_f64_val()
                } else {
                    analytic.d_b[i][remaining - nw].to_f64_val()
                };
            }
            remaining -= n;
        }
        unreachable!()
    };

    let n_params = mlp.n_params();
    let mut max_rel = 0.0f64;
    let mut checked = 0;
    let mut attempts = 0;
    let relu_mask = |cache: &Cache<T>| -> Vec<bool> {
        let mut mask = Vec::new();
        for (l, out) in mlp.layers.iter().zip(&cache.outputs) {
            if l.act == Activation::Relu {
                mask.extend(out.data().iter().map(|&x| x > T::zero()));
            }
        }
        mask
    };

    while checked < n_coords && attempts < n_coords * 20 {
        attempts += 1;
        let idx = rng.random_range(0..n_params);
        let mut plus = mlp.clone();
        *plus.param_mut(idx) += T::from_f64(h);
        let mut minus = mlp.clone();
        *minus.param_mut(idx) -= T::from_f64(h);
        let (out_p, cache_p) = plus.forward(input).unwrap();
        let (out_m, cache_m) = minus.forward(input).unwrap();
        if relu_mask(&cache_p) != relu_mask(&cache_m) {
            continue; // straddles a relu kink; resample
        }
        let (lp, _) = loss(&out_p);
        let (lm, _) = loss(&out_m);
        let fd = (lp.to_f64_val() - lm.to_f64_val()) / (2.0 * h);
        let an = flat_analytic(idx);
        let denom = an.abs().max(fd.abs()).max(1e-8);
        max_rel = max_rel.max((an - fd).abs() / denom);
        checked += 1;
    }
    GradCheck { max_rel_error: max_rel, coordinates: checked }
}
