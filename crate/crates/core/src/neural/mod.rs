//! Stacked LSTM corrector: initializer network, projection, output-range constraint,
//! backpropagation through time and Adam.

mod lstm;

pub use lstm::{lstm_forward, HiddenState, LstmLayer, LstmParams, StepCache};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Per-dimension bound on the corrector output, in normalized units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub enum OutputConstraint {
    #[default]
    Unconstrained,
    /// `β ⊙ tanh(raw ⊘ β)`; `β_i = ∞` passes through, `β_i = 0` blocks the dimension.
    Bounded(#[serde(with = "unbounded_as_null")] Vec<f64>),
}

/// JSON has no infinity; unbounded dimensions are stored as `null`.
mod unbounded_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let o: Vec<Option<f64>> = v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect();
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let o: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(o.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

impl OutputConstraint {
    pub fn bounded(beta: Vec<f64>) -> Result<Self> {
        if beta.iter().any(|b| !(*b >= 0.0)) {
            return Err(Error::Domain(format!("constraint bounds must be ≥ 0, got {beta:?}")));
        }
        Ok(OutputConstraint::Bounded(beta))
    }

    pub fn bounds(&self) -> Option<&[f64]> {
        match self {
            OutputConstraint::Unconstrained => None,
            OutputConstraint::Bounded(b) => Some(b),
        }
    }

    /// Constrained output and its elementwise derivative with respect to `raw`.
    pub fn apply_with_slope<T: Scalar>(&self, raw: &[T]) -> (Vec<T>, Vec<T>) {
        match self {
            OutputConstraint::Unconstrained => (raw.to_vec(), vec![T::one(); raw.len()]),
            OutputConstraint::Bounded(beta) => {
                debug_assert_eq!(beta.len(), raw.len());
                raw.iter()
                    .zip(beta)
                    .map(|(&x, &b)| {
                        if b == f64::INFINITY {
                            (x, T::one())
                        } else if b == 0.0 {
                            (T::zero(), T::zero())
                        } else {
                            let bt = T::of(b);
                            let t = (x / bt).tanh();
                            // tanh rounds to ±1 far from zero; keep the bound strict
                            let lim = bt * (T::one() - T::epsilon());
                            let y = bt * t;
                            let y = if y.abs() > lim { lim * x.signum() } else { y };
                            (y, T::one() - t * t)
                        }
                    })
                    .unzip()
            }
        }
    }
}

pub fn constrain_output<T: Scalar>(raw: &[T], constraint: &OutputConstraint) -> Vec<T> {
    constraint.apply_with_slope(raw).0
}

/// Predictor LSTM, initializer LSTM and the bias-free output projection `W^hx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrector<T> {
    pub predictor: LstmParams<T>,
    pub initializer: LstmParams<T>,
    pub projection: Matrix<T>,
    /// initialization window length in steps
    pub window: usize,
}

impl<T: Scalar> Corrector<T> {
    /// Seeded initialization; the initializer mirrors the predictor's depth and width.
    pub fn random(
        predictor_input: usize,
        initializer_input: usize,
        output: usize,
        hidden: usize,
        layers: usize,
        window: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let predictor = LstmParams::random(predictor_input, hidden, layers, &mut rng);
        let initializer = LstmParams::random(initializer_input, hidden, layers, &mut rng);
        let a = 1.0 / (hidden as f64).sqrt();
        let projection = Matrix::from_fn(output, hidden, |_, _| T::of(rng.gen_range(-a..a)));
        Self { predictor, initializer, projection, window }
    }

    pub fn zeros(
        predictor_input: usize,
        initializer_input: usize,
        output: usize,
        hidden: usize,
        layers: usize,
        window: usize,
    ) -> Self {
        Self {
            predictor: LstmParams::zeros(predictor_input, hidden, layers),
            initializer: LstmParams::zeros(initializer_input, hidden, layers),
            projection: Matrix::zeros(output, hidden),
            window,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            predictor: self.predictor.zeros_like(),
            initializer: self.initializer.zeros_like(),
            projection: Matrix::zeros(self.projection.rows, self.projection.cols),
            window: self.window,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.projection.rows
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut v = self.predictor.tensors();
        v.extend(self.initializer.tensors());
        v.push(&self.projection.data);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut v = self.predictor.tensors_mut();
        v.extend(self.initializer.tensors_mut());
        v.push(&mut self.projection.data);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// `W^hx h`
    pub fn project(&self, h: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.projection.rows];
        self.projection.mul_vec_acc(h, &mut out);
        out
    }

    /// Adds `scale·other` to every parameter.
    pub fn axpy(&mut self, scale: T, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * *y;
            }
        }
    }
}

/// Runs the initializer over the window from a zero state; its final hidden and cell
/// states seed the predictor.
pub fn encode_initial_state<T: Scalar>(
    corrector: &Corrector<T>,
    window: &[Vec<T>],
) -> Result<(HiddenState<T>, Vec<StepCache<T>>)> {
    if window.len() != corrector.window {
        return Err(Error::Dimension(format!(
            "initialization window has {} steps, expected {}",
            window.len(),
            corrector.window
        )));
    }
    if corrector.initializer.depth() != corrector.predictor.depth()
        || corrector.initializer.hidden() != corrector.predictor.hidden()
    {
        return Err(Error::Dimension("initializer and predictor layer shapes differ".into()));
    }
    let (_, state, caches) = lstm_forward(&corrector.initializer, window, &corrector.initializer.zero_state())?;
    Ok((state, caches))
}

/// Backpropagates ∂L/∂(h0, c0) of the predictor through the initializer window.
pub fn initializer_backward<T: Scalar>(
    initializer: &LstmParams<T>,
    caches: &[StepCache<T>],
    d_state: HiddenState<T>,
    grads: &mut LstmParams<T>,
) {
    let mut carry = d_state;
    let zero = vec![T::zero(); initializer.hidden()];
    for cache in caches.iter().rev() {
        initializer.step_backward(cache, &zero, &mut carry, grads);
    }
}

/// Gradients of a standalone network `y_t = constrain(W^hx h_t)`.
#[derive(Clone, Debug)]
pub struct BpttGradients<T> {
    pub lstm: LstmParams<T>,
    pub projection: Matrix<T>,
    /// gradient with respect to the initial state
    pub d_h0: HiddenState<T>,
    pub d_inputs: Vec<Vec<T>>,
}

/// Reverse-mode gradients of `Σ_t ⟨dy_t, y_t⟩` given the caches and top-layer hidden
/// sequence of a forward pass.
pub fn bptt_gradients<T: Scalar>(
    params: &LstmParams<T>,
    projection: &Matrix<T>,
    constraint: &OutputConstraint,
    caches: &[StepCache<T>],
    hidden_seq: &[Vec<T>],
    dy: &[Vec<T>],
) -> BpttGradients<T> {
    assert_eq!(caches.len(), dy.len());
    assert_eq!(hidden_seq.len(), dy.len());
    let mut grads = params.zeros_like();
    let mut d_proj = Matrix::zeros(projection.rows, projection.cols);
    let mut carry = params.zero_state();
    let mut d_inputs = vec![Vec::new(); dy.len()];
    for t in (0..dy.len()).rev() {
        let mut raw = vec![T::zero(); projection.rows];
        projection.mul_vec_acc(&hidden_seq[t], &mut raw);
        let (_, slope) = constraint.apply_with_slope(&raw);
        let d_raw: Vec<T> = dy[t].iter().zip(&slope).map(|(a, b)| *a * *b).collect();
        d_proj.add_outer(&d_raw, &hidden_seq[t]);
        let mut dh = vec![T::zero(); projection.cols];
        projection.mul_t_vec_acc(&d_raw, &mut dh);
        d_inputs[t] = params.step_backward(&caches[t], &dh, &mut carry, &mut grads);
    }
    BpttGradients { lstm: grads, projection: d_proj, d_h0: carry, d_inputs }
}

/// Scales all gradients so their joint Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: Vec<&mut [T]>, max_norm: f64) -> f64 {
    let norm = grads.iter().flat_map(|g| g.iter()).map(|x| x.value_f64().powi(2)).sum::<f64>().sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = T::of(max_norm / norm);
        for g in grads {
            for x in g.iter_mut() {
                *x *= s;
            }
        }
    }
    norm
}

/// Adam with bias correction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_moments(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_moments(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn update(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>) {
        assert_eq!(params.len(), grads.len());
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let (b1, b2) = (T::of(self.beta1), T::of(self.beta2));
        let c1 = T::one() - T::of(self.beta1.powi(self.t as i32));
        let c2 = T::one() - T::of(self.beta2.powi(self.t as i32));
        let (lr, eps) = (T::of(self.lr), T::of(self.eps));
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len());
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}
