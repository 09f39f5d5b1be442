//! Dense multilayer perceptrons with hand-written backpropagation, and the
//! Adam optimizer.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (row-major, `out x in`) followed by the bias. Hidden layers use Swish,
//! the output layer is linear.

mod adam;

pub use adam::{Adam, AdamState};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

#[inline]
pub fn swish<S: Real>(x: S) -> S {
    x * sigmoid(x)
}

#[inline]
pub fn swish_grad<S: Real>(x: S) -> S {
    let s = sigmoid(x);
    s + x * s * (S::one() - s)
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<S: Real>(x: S) -> S {
    if x > S::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Real")]
pub struct Mlp<S> {
    sizes: Vec<usize>,
    pub params: Vec<S>,
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Cache<S> {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<S>>,
    /// Pre-activations of each layer.
    pre: Vec<Vec<S>>,
}

impl<S: Real> Cache<S> {
    pub fn output(&self) -> &[S] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

#[inline]
fn dot<S: Real>(a: &[S], b: &[S]) -> S {
    let mut acc = [S::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

impl<S: Real> Mlp<S> {
    /// Network with all parameters zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!("invalid layer sizes {sizes:?}")));
        }
        Ok(Self { sizes: sizes.to_vec(), params: vec![S::zero(); param_count(sizes)] })
    }

    /// Glorot-uniform weights, zero biases; the output layer's weights are
    /// additionally multiplied by `output_scale`.
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], output_scale: f64, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes)?;
        let layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt() * if l + 1 == layers { output_scale } else { 1.0 };
            for w in &mut net.params[off..off + n_in * n_out] {
                *w = S::lit(rng.random_range(-1.0..1.0) * limit);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<S>) -> Result<Self> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(Error::config(format!(
                "layer sizes {sizes:?} need {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        Ok(Self { params, ..net })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("at least two sizes")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[S]) -> Vec<S> {
        let mut cache = Cache::default();
        self.forward_cached(x, &mut cache);
        cache.acts.pop().unwrap_or_default()
    }

    /// Forward pass recording activations into `cache`; returns the output.
    pub fn forward_cached<'c>(&self, x: &[S], cache: &'c mut Cache<S>) -> &'c [S] {
        assert_eq!(x.len(), self.input_dim(), "input dimension");
        let layers = self.sizes.len() - 1;
        cache.acts.resize_with(layers + 1, Vec::new);
        cache.pre.resize_with(layers, Vec::new);
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            off += n_in * n_out + n_out;
            let (before, after) = cache.acts.split_at_mut(l + 1);
            let input = &before[l];
            let z = &mut cache.pre[l];
            z.clear();
            z.extend((0..n_out).map(|o| b[o] + dot(&w[o * n_in..(o + 1) * n_in], input)));
            let a = &mut after[0];
            a.clear();
            if l + 1 == layers {
                a.extend_from_slice(z);
            } else {
                a.extend(z.iter().map(|&v| swish(v)));
            }
        }
        cache.output()
    }

    /// Accumulates parameter gradients of `grad_out . output` into `grads`
    /// (same layout as `params`). When `grad_in` is given it receives the
    /// gradient with respect to the input.
    pub fn backward(&self, cache: &Cache<S>, grad_out: &[S], grads: &mut [S], grad_in: Option<&mut Vec<S>>) {
        let layers = self.sizes.len() - 1;
        debug_assert_eq!(grads.len(), self.params.len());
        let mut delta = grad_out.to_vec();
        let mut next = Vec::new();
        let mut end = self.params.len();
        let mut grad_in = grad_in;
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = end - (n_in * n_out + n_out);
            end = off;
            let input = &cache.acts[l];
            {
                let (gw, gb) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = delta[o];
                    if d == S::zero() {
                        continue;
                    }
                    gb[o] += d;
                    for (g, &x) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * x;
                    }
                }
            }
            if l == 0 && grad_in.is_none() {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            next.clear();
            next.resize(n_in, S::zero());
            for o in 0..n_out {
                let d = delta[o];
                if d == S::zero() {
                    continue;
                }
                for (g, &wv) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *g += d * wv;
                }
            }
            if l == 0 {
                if let Some(gi) = grad_in.take() {
                    gi.clear();
                    gi.extend_from_slice(&next);
                }
                break;
            }
            for (g, &z) in next.iter_mut().zip(&cache.pre[l - 1]) {
                *g *= swish_grad(z);
            }
            std::mem::swap(&mut delta, &mut next);
        }
    }

    /// Converts the parameters to another scalar type.
    pub fn cast<T: Real>(&self) -> Mlp<T> {
        Mlp { sizes: self.sizes.clone(), params: self.params.iter().map(|p| T::lit(p.as_f64())).collect() }
    }
}
