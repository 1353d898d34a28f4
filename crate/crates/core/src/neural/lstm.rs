use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// One LSTM layer. Gate rows are stacked `[input, forget, cell, output]`; the
/// weight matrix acts on `[x; h_prev]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer<T> {
    pub input_dim: usize,
    pub hidden: usize,
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Scalar> LstmLayer<T> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self { input_dim, hidden, w: Matrix::zeros(4 * hidden, input_dim + hidden), b: vec![T::zero(); 4 * hidden] }
    }

    /// Weights and biases uniform in ±1/√n_h.
    pub fn random(input_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let a = 1.0 / (hidden as f64).sqrt();
        let w = Matrix::from_fn(4 * hidden, input_dim + hidden, |_, _| T::of(rng.gen_range(-a..a)));
        let b = (0..4 * hidden).map(|_| T::of(rng.gen_range(-a..a))).collect();
        Self { input_dim, hidden, w, b }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    pub layers: Vec<LstmLayer<T>>,
}

/// Per-layer hidden and cell vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState<T> {
    pub h: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
}

impl<T: Scalar> HiddenState<T> {
    pub fn zeros(layers: usize, hidden: usize) -> Self {
        Self { h: vec![vec![T::zero(); hidden]; layers], c: vec![vec![T::zero(); hidden]; layers] }
    }

    pub fn top(&self) -> &[T] {
        self.h.last().expect("at least one layer")
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).flatten().all(|x| x.is_finite())
    }
}

#[derive(Clone, Debug)]
struct LayerCache<T> {
    xh: Vec<T>,
    /// activated gates `[i, f, g, o]`
    gates: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
}

/// Forward intermediates of one time step, consumed by [`LstmParams::step_backward`].
#[derive(Clone, Debug)]
pub struct StepCache<T> {
    layers: Vec<LayerCache<T>>,
}

impl<T: Scalar> LstmParams<T> {
    pub fn zeros(input_dim: usize, hidden: usize, layers: usize) -> Self {
        assert!(layers >= 1);
        let layers = (0..layers).map(|l| LstmLayer::zeros(if l == 0 { input_dim } else { hidden }, hidden)).collect();
        Self { layers }
    }

    pub fn random(input_dim: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        assert!(layers >= 1);
        let layers =
            (0..layers).map(|l| LstmLayer::random(if l == 0 { input_dim } else { hidden }, hidden, rng)).collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].hidden
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn zero_state(&self) -> HiddenState<T> {
        HiddenState::zeros(self.depth(), self.hidden())
    }

    pub fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "LSTM input has {} entries, layer 0 expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// One stacked step; returns the new state and the cache needed for backprop.
    pub fn step(&self, x: &[T], state: &HiddenState<T>) -> (HiddenState<T>, StepCache<T>) {
        debug_assert_eq!(x.len(), self.input_dim());
        let mut next = HiddenState { h: Vec::with_capacity(self.depth()), c: Vec::with_capacity(self.depth()) };
        let mut caches = Vec::with_capacity(self.depth());
        let mut input = x.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let nh = layer.hidden;
            let mut xh = input;
            xh.extend_from_slice(&state.h[l]);
            let mut a = layer.b.clone();
            layer.w.mul_vec_acc(&xh, &mut a);
            for k in 0..nh {
                a[k] = sigmoid(a[k]);
                a[nh + k] = sigmoid(a[nh + k]);
                a[2 * nh + k] = a[2 * nh + k].tanh();
                a[3 * nh + k] = sigmoid(a[3 * nh + k]);
            }
            let c_prev = state.c[l].clone();
            let c: Vec<T> = (0..nh).map(|k| a[nh + k] * c_prev[k] + a[k] * a[2 * nh + k]).collect();
            let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
            let h: Vec<T> = (0..nh).map(|k| a[3 * nh + k] * tanh_c[k]).collect();
            input = h.clone();
            next.h.push(h);
            next.c.push(c);
            caches.push(LayerCache { xh, gates: a, c_prev, tanh_c });
        }
        (next, StepCache { layers: caches })
    }

    /// Step without keeping the cache.
    pub fn step_inference(&self, x: &[T], state: &HiddenState<T>) -> HiddenState<T> {
        self.step(x, state).0
    }

    /// Reverse of [`step`](Self::step).
    ///
    /// On entry `carry` holds ∂L/∂h_t and ∂L/∂c_t arriving from later steps; `dh_top`
    /// is added to the top layer's hidden gradient. On exit `carry` holds the
    /// gradients with respect to the previous state. Parameter gradients are
    /// accumulated into `grads`; the input gradient is returned.
    pub fn step_backward(
        &self,
        cache: &StepCache<T>,
        dh_top: &[T],
        carry: &mut HiddenState<T>,
        grads: &mut LstmParams<T>,
    ) -> Vec<T> {
        let top = self.depth() - 1;
        for (a, b) in carry.h[top].iter_mut().zip(dh_top) {
            *a += *b;
        }
        let mut dx = Vec::new();
        for l in (0..self.depth()).rev() {
            let layer = &self.layers[l];
            let lc = &cache.layers[l];
            let nh = layer.hidden;
            let g = &lc.gates;
            let mut da = vec![T::zero(); 4 * nh];
            for k in 0..nh {
                let (i, f, gg, o) = (g[k], g[nh + k], g[2 * nh + k], g[3 * nh + k]);
                let dh = carry.h[l][k];
                let tc = lc.tanh_c[k];
                let dc = carry.c[l][k] + dh * o * (T::one() - tc * tc);
                da[k] = dc * gg * i * (T::one() - i);
                da[nh + k] = dc * lc.c_prev[k] * f * (T::one() - f);
                da[2 * nh + k] = dc * i * (T::one() - gg * gg);
                da[3 * nh + k] = dh * tc * o * (T::one() - o);
                carry.c[l][k] = dc * f;
            }
            let gl = &mut grads.layers[l];
            gl.w.add_outer(&da, &lc.xh);
            for (b, d) in gl.b.iter_mut().zip(&da) {
                *b += *d;
            }
            let mut dxh = vec![T::zero(); layer.input_dim + nh];
            layer.w.mul_t_vec_acc(&da, &mut dxh);
            carry.h[l].copy_from_slice(&dxh[layer.input_dim..]);
            dxh.truncate(layer.input_dim);
            if l > 0 {
                for (a, b) in carry.h[l - 1].iter_mut().zip(&dxh) {
                    *a += *b;
                }
            } else {
                dx = dxh;
            }
        }
        dx
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.w.data.as_slice(), l.b.as_slice()]).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| [l.w.data.as_mut_slice(), l.b.as_mut_slice()]).collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self { layers: self.layers.iter().map(|l| LstmLayer::zeros(l.input_dim, l.hidden)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Runs the stack over a sequence from `h0`; returns the top-layer hidden sequence,
/// the final state and the per-step caches.
pub fn lstm_forward<T: Scalar>(
    params: &LstmParams<T>,
    inputs: &[Vec<T>],
    h0: &HiddenState<T>,
) -> Result<(Vec<Vec<T>>, HiddenState<T>, Vec<StepCache<T>>)> {
    let mut state = h0.clone();
    let mut hs = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for x in inputs {
        params.check_input(x)?;
        let (next, cache) = params.step(x, &state);
        hs.push(next.top().to_vec());
        caches.push(cache);
        state = next;
    }
    Ok((hs, state, caches))
}
