//! Fully connected ReLU network with hand-written reverse- and forward-mode
//! derivatives.
//!
//! Parameters live in one flat vector, layer by layer: the `out × in`
//! weight block (row-major) followed by the `out` biases. Hidden layers use
//! ReLU with subgradient 0 at the kink; the output layer is affine.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty")
    }
}

fn layout(sizes: &[usize]) -> Result<Vec<usize>> {
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(invalid("layer sizes need at least two non-zero entries"));
    }
    let mut offsets = Vec::with_capacity(sizes.len());
    let mut off = 0;
    for w in sizes.windows(2) {
        offsets.push(off);
        off += w[0] * w[1] + w[1];
    }
    offsets.push(off);
    Ok(offsets)
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        let offsets = layout(sizes)?;
        let n = *offsets.last().unwrap();
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            params: vec![0.0; n],
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn glorot(sizes: &[usize], rng: &mut RngStream) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        for k in 0..net.n_layers() {
            let (fan_in, fan_out) = (sizes[k], sizes[k + 1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            for w in net.weights_mut(k) {
                *w = rng.uniform_in(-limit, limit);
            }
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let offsets = layout(sizes)?;
        let n = *offsets.last().unwrap();
        if params.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            offsets,
            params,
        })
    }

    /// Builds a network from explicit `(weights, biases)` per layer.
    pub fn from_layers(layers: &[(Matrix, Vec<f64>)]) -> Result<Self> {
        let mut sizes = Vec::with_capacity(layers.len() + 1);
        let mut params = Vec::new();
        for (k, (w, b)) in layers.iter().enumerate() {
            if k == 0 {
                sizes.push(w.cols());
            } else if w.cols() != sizes[k] {
                return Err(Error::DimensionMismatch {
                    expected: sizes[k],
                    found: w.cols(),
                });
            }
            if b.len() != w.rows() {
                return Err(Error::DimensionMismatch {
                    expected: w.rows(),
                    found: b.len(),
                });
            }
            sizes.push(w.rows());
            params.extend_from_slice(w.as_slice());
            params.extend_from_slice(b);
        }
        Self::from_params(&sizes, params)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn weight_range(&self, k: usize) -> core::ops::Range<usize> {
        let start = self.offsets[k];
        start..start + self.sizes[k] * self.sizes[k + 1]
    }

    fn bias_range(&self, k: usize) -> core::ops::Range<usize> {
        let start = self.offsets[k] + self.sizes[k] * self.sizes[k + 1];
        start..start + self.sizes[k + 1]
    }

    /// Row-major `out × in` weights of layer `k`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.params[self.weight_range(k)]
    }

    pub fn weights_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.weight_range(k);
        &mut self.params[r]
    }

    pub fn biases(&self, k: usize) -> &[f64] {
        &self.params[self.bias_range(k)]
    }

    pub fn biases_mut(&mut self, k: usize) -> &mut [f64] {
        let r = self.bias_range(k);
        &mut self.params[r]
    }

    pub fn weight_matrix(&self, k: usize) -> Matrix {
        Matrix::from_vec(self.sizes[k + 1], self.sizes[k], self.weights(k).to_vec())
            .expect("layout is consistent")
    }

    fn is_hidden(&self, k: usize) -> bool {
        k + 1 < self.n_layers()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for k in 0..self.n_layers() {
            a = self.layer(k, &a);
        }
        a
    }

    fn layer(&self, k: usize, a: &[f64]) -> Vec<f64> {
        let n_in = self.sizes[k];
        let w = self.weights(k);
        let b = self.biases(k);
        let hidden = self.is_hidden(k);
        b.iter()
            .enumerate()
            .map(|(o, &bo)| {
                let row = &w[o * n_in..(o + 1) * n_in];
                let z = bo + row.iter().zip(a).map(|(p, q)| p * q).sum::<f64>();
                if hidden && !(z > 0.0) {
                    0.0
                } else {
                    z
                }
            })
            .collect()
    }

    pub(crate) fn forward_cache(&self, x: &[f64]) -> ForwardCache {
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(x.to_vec());
        for k in 0..self.n_layers() {
            let next = self.layer(k, &acts[k]);
            acts.push(next);
        }
        ForwardCache { acts }
    }

    /// ReLU derivative mask of hidden layer `k` (its output activation).
    #[inline]
    fn active(cache: &ForwardCache, k: usize, o: usize) -> bool {
        cache.acts[k + 1][o] > 0.0
    }

    /// Accumulates `scale * ∂(adjᵀ · output)/∂θ` into `grad`.
    pub(crate) fn backprop_output(
        &self,
        cache: &ForwardCache,
        adjoint: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let mut g: Vec<f64> = adjoint.iter().map(|v| v * scale).collect();
        for k in (0..self.n_layers()).rev() {
            if self.is_hidden(k) {
                for (o, go) in g.iter_mut().enumerate() {
                    if !Self::active(cache, k, o) {
                        *go = 0.0;
                    }
                }
            }
            let n_in = self.sizes[k];
            let a_in = &cache.acts[k];
            let wr = self.weight_range(k);
            let br = self.bias_range(k);
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                let gw = &mut grad[wr.start + o * n_in..wr.start + (o + 1) * n_in];
                for (gwi, ai) in gw.iter_mut().zip(a_in) {
                    *gwi += go * ai;
                }
                grad[br.start + o] += go;
            }
            if k > 0 {
                g = self.transpose_apply(k, &g);
            }
        }
    }

    fn transpose_apply(&self, k: usize, g: &[f64]) -> Vec<f64> {
        let n_in = self.sizes[k];
        let w = self.weights(k);
        let mut out = vec![0.0; n_in];
        for (o, &go) in g.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            for (oi, wi) in out.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                *oi += go * wi;
            }
        }
        out
    }

    /// Forward-mode tangent propagation of input direction `dir` with the
    /// ReLU pattern frozen at `cache`. Returns the tangent entering every
    /// layer (`t[0] = dir`) and, as the last element, `J · dir`.
    pub(crate) fn jvp(&self, cache: &ForwardCache, dir: &[f64]) -> Vec<Vec<f64>> {
        let mut ts = Vec::with_capacity(self.sizes.len());
        ts.push(dir.to_vec());
        for k in 0..self.n_layers() {
            let n_in = self.sizes[k];
            let w = self.weights(k);
            let t_in = &ts[k];
            let hidden = self.is_hidden(k);
            let t_out: Vec<f64> = (0..self.sizes[k + 1])
                .map(|o| {
                    if hidden && !Self::active(cache, k, o) {
                        0.0
                    } else {
                        w[o * n_in..(o + 1) * n_in]
                            .iter()
                            .zip(t_in)
                            .map(|(p, q)| p * q)
                            .sum()
                    }
                })
                .collect();
            ts.push(t_out);
        }
        ts
    }

    /// Accumulates `scale * ∂(uᵀ J w)/∂θ` given the tangents of `w` from
    /// [`Mlp::jvp`]. Biases do not enter `J` (away from kinks) so only
    /// weight gradients are touched.
    pub(crate) fn backprop_tangent(
        &self,
        cache: &ForwardCache,
        tangents: &[Vec<f64>],
        u: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let mut g: Vec<f64> = u.iter().map(|v| v * scale).collect();
        for k in (0..self.n_layers()).rev() {
            if self.is_hidden(k) {
                for (o, go) in g.iter_mut().enumerate() {
                    if !Self::active(cache, k, o) {
                        *go = 0.0;
                    }
                }
            }
            let n_in = self.sizes[k];
            let t_in = &tangents[k];
            let wr = self.weight_range(k);
            for (o, &go) in g.iter().enumerate() {
                if go == 0.0 {
                    continue;
                }
                let gw = &mut grad[wr.start + o * n_in..wr.start + (o + 1) * n_in];
                for (gwi, ti) in gw.iter_mut().zip(t_in) {
                    *gwi += go * ti;
                }
            }
            if k > 0 {
                g = self.transpose_apply(k, &g);
            }
        }
    }

    /// Full input Jacobian (`out × in`) at `x`, one tangent pass per input
    /// coordinate.
    pub fn input_jacobian(&self, x: &[f64]) -> Matrix {
        let cache = self.forward_cache(x);
        let (n_in, n_out) = (self.input_dim(), self.output_dim());
        let mut j = Matrix::zeros(n_out, n_in);
        let mut e = vec![0.0; n_in];
        for c in 0..n_in {
            e[c] = 1.0;
            let ts = self.jvp(&cache, &e);
            for (r, v) in ts.last().unwrap().iter().enumerate() {
                j[(r, c)] = *v;
            }
            e[c] = 0.0;
        }
        j
    }
}
