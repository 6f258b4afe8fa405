use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;

/// Activation applied after the last affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OutputActivation {
    Identity,
    /// `lo + (hi - lo) * (tanh(z) + 1) / 2`
    ScaledTanh { lo: f64, hi: f64 },
}

/// Dense layer with row-major weights of shape `n_out × n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// ReLU hidden layers and a configurable output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub output: OutputActivation,
}

/// Gradients shaped like the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            w: net.layers.iter().map(|l| vec![0.0; l.w.len()]).collect(),
            b: net.layers.iter().map(|l| vec![0.0; l.b.len()]).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.w.iter().chain(&self.b).flatten().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[i + 1]` the post-activation output of layer `i`.
    pub acts: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    pub pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("cache holds the input")
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    rsc: usize,
) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for x in c.iter_mut() {
            *x *= beta;
        }
        return;
    }
    // SAFETY: the callers size every buffer from the same (m, k, n) and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

impl Mlp {
    /// Uniform ±1/√fan_in initialization; the last layer is further scaled by `last_scale`.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: OutputActivation, last_scale: f64, rng: &mut R) -> Self {
        assert!(dims.len() >= 2, "an MLP needs at least input and output dims");
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let (n_in, n_out) = (dims[i], dims[i + 1]);
                let bound = 1.0 / (n_in as f64).sqrt() * if i == n - 1 { last_scale } else { 1.0 };
                let mut draw = || rng.gen_range(-bound..=bound);
                let w = (0..n_in * n_out).map(|_| draw()).collect();
                let b = (0..n_out).map(|_| draw()).collect();
                Layer { n_in, n_out, w, b }
            })
            .collect();
        Self { layers, output }
    }

    pub fn zeros(dims: &[usize], output: OutputActivation) -> Self {
        let layers = dims
            .windows(2)
            .map(|d| Layer { n_in: d[0], n_out: d[1], w: vec![0.0; d[0] * d[1]], b: vec![0.0; d[1]] })
            .collect();
        Self { layers, output }
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.layers[0].n_in];
        d.extend(self.layers.iter().map(|l| l.n_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.w.iter().chain(&l.b).all(|x| x.is_finite()))
    }

    fn check_shapes(&self) -> Result<(), NeuralError> {
        for w in self.layers.windows(2) {
            if w[0].n_out != w[1].n_in {
                return Err(NeuralError::ShapeMismatch { expected: w[0].n_out, got: w[1].n_in });
            }
        }
        for l in &self.layers {
            if l.w.len() != l.n_in * l.n_out || l.b.len() != l.n_out {
                return Err(NeuralError::ShapeMismatch { expected: l.n_in * l.n_out, got: l.w.len() });
            }
        }
        Ok(())
    }

    fn activate_output(&self, z: &[f64], out: &mut [f64]) {
        match self.output {
            OutputActivation::Identity => out.copy_from_slice(z),
            OutputActivation::ScaledTanh { lo, hi } => {
                for (o, &v) in out.iter_mut().zip(z) {
                    *o = lo + (hi - lo) * 0.5 * (v.tanh() + 1.0);
                }
            }
        }
    }

    /// Batched forward pass over `batch` row-major inputs, keeping activations.
    pub fn forward_cached(&self, input: &[f64], batch: usize) -> Result<ForwardCache, NeuralError> {
        self.check_shapes()?;
        let n_in = self.input_dim();
        if input.len() != n_in * batch {
            return Err(NeuralError::ShapeMismatch { expected: n_in * batch, got: input.len() });
        }
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let x = &acts[i];
            let mut z = Vec::with_capacity(batch * l.n_out);
            if batch == 1 {
                // Single input: row dot products beat packing the whole weight matrix.
                z.extend(l.w.chunks_exact(l.n_in).zip(&l.b).map(|(row, b)| b + dot(row, x)));
            } else {
                for _ in 0..batch {
                    z.extend_from_slice(&l.b);
                }
                gemm(batch, l.n_in, l.n_out, x, (l.n_in, 1), &l.w, (1, l.n_in), 1.0, &mut z, l.n_out);
            }
            let mut a = vec![0.0; z.len()];
            if i == last {
                self.activate_output(&z, &mut a);
            } else {
                for (o, &v) in a.iter_mut().zip(&z) {
                    *o = if v > 0.0 { v } else { 0.0 };
                }
            }
            pre.push(z);
            acts.push(a);
        }
        Ok(ForwardCache { batch, acts, pre })
    }

    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Vec<f64>, NeuralError> {
        let mut c = self.forward_cached(input, batch)?;
        Ok(c.acts.pop().unwrap_or_default())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.forward_batch(input, 1)
    }

    /// Reverse-mode pass. `upstream` is dL/d(output), one row per batch item.
    /// Returns parameter gradients summed over the batch and dL/d(input).
    pub fn backward_cached(&self, cache: &ForwardCache, upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NeuralError> {
        let batch = cache.batch;
        let n_out = self.output_dim();
        if upstream.len() != n_out * batch {
            return Err(NeuralError::ShapeMismatch { expected: n_out * batch, got: upstream.len() });
        }
        let mut grads = Gradients::zeros_like(self);
        let last = self.layers.len() - 1;
        // dL/dz of the current layer
        let mut dz: Vec<f64> = match self.output {
            OutputActivation::Identity => upstream.to_vec(),
            OutputActivation::ScaledTanh { lo, hi } => upstream
                .iter()
                .zip(&cache.pre[last])
                .map(|(&g, &z)| {
                    let t = z.tanh();
                    g * 0.5 * (hi - lo) * (1.0 - t * t)
                })
                .collect(),
        };
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let x = &cache.acts[i];
            // dW = dzᵀ · x
            gemm(l.n_out, batch, l.n_in, &dz, (1, l.n_out), x, (l.n_in, 1), 0.0, &mut grads.w[i], l.n_in);
            let gb = &mut grads.b[i];
            for row in dz.chunks_exact(l.n_out) {
                for (g, &d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dx = dz · W
            let mut dx = vec![0.0; batch * l.n_in];
            gemm(batch, l.n_out, l.n_in, &dz, (l.n_out, 1), &l.w, (l.n_in, 1), 0.0, &mut dx, l.n_in);
            if i > 0 {
                // ReLU of the previous layer; subgradient 0 at exactly 0.
                for (d, &z) in dx.iter_mut().zip(&cache.pre[i - 1]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            dz = dx;
        }
        Ok((grads, dz))
    }

    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Gradients, Vec<f64>), NeuralError> {
        let batch = input.len() / self.input_dim().max(1);
        let cache = self.forward_cached(input, batch)?;
        self.backward_cached(&cache, upstream)
    }

    /// `self ← (1 - tau) self + tau other`, written as `a + tau (b - a)` so that
    /// equal parameters stay bit-identical.
    pub fn soft_update_from(&mut self, other: &Mlp, tau: f64) {
        for (t, s) in self.layers.iter_mut().zip(&other.layers) {
            for (a, &b) in t.w.iter_mut().zip(&s.w) {
                *a += tau * (b - *a);
            }
            for (a, &b) in t.b.iter_mut().zip(&s.b) {
                *a += tau * (b - *a);
            }
        }
    }

    pub fn same_architecture(&self, other: &Mlp) -> bool {
        self.dims() == other.dims() && self.output == other.output
    }

    pub fn param_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.w.iter().chain(l.b.iter()))
    }
}
