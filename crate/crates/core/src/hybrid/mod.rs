//! Residual hybrid model: physical step plus LSTM correction, with teacher-forced and
//! free-running rollouts and their exact gradients.

mod checkpoint;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use train::{history_csv, train_one_phase, train_two_phase, EpochRecord, Phase, TrainingConfig, TrainingOutcome};

use serde::{Deserialize, Serialize};

use crate::dataset::{Normalizer, PredictionSample};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::neural::{encode_initial_state, initializer_backward, Corrector, HiddenState, OutputConstraint, StepCache};
use crate::physical::PhysicalModel;
use crate::scalar::Scalar;

/// A prediction whose normalized deviation from the state mean exceeds this is treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridModel<T> {
    pub physical: PhysicalModel,
    pub corrector: Corrector<T>,
    pub constraint: OutputConstraint,
    pub normalizer: Normalizer,
}

/// Output of one hybrid step.
#[derive(Clone, Debug)]
pub struct HybridStep<T> {
    pub z_hat: Vec<T>,
    pub z_phy: Vec<T>,
    /// corrector output in normalized units
    pub z_lstm: Vec<T>,
    pub hidden: HiddenState<T>,
}

struct StepTrace<T> {
    cache: StepCache<T>,
    h_top: Vec<T>,
    slope: Vec<T>,
}

impl<T: Scalar> HybridModel<T> {
    /// Corrector with seeded random weights sized for `physical`'s vehicle.
    pub fn new(
        physical: PhysicalModel,
        normalizer: Normalizer,
        hidden: usize,
        layers: usize,
        window: usize,
        seed: u64,
    ) -> Result<Self> {
        let v = physical.vehicle();
        let (nz, nc) = (v.state_dim(), v.control_dim());
        if normalizer.state_mean.len() != nz || normalizer.control_mean.len() != nc {
            return Err(Error::Dimension("normalizer does not match the vehicle".into()));
        }
        if physical.history_len() > window {
            return Err(Error::Domain(format!(
                "physical model needs {} past states but the window has {window}",
                physical.history_len()
            )));
        }
        let corrector = Corrector::random(nc + nz, nz + nc, nz, hidden, layers, window, seed);
        Ok(Self { physical, corrector, constraint: OutputConstraint::Unconstrained, normalizer })
    }

    pub fn state_dim(&self) -> usize {
        self.physical.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.physical.vehicle().control_dim()
    }

    fn sigma(&self, i: usize) -> T {
        T::of(self.normalizer.state_std[i])
    }

    fn predictor_input(&self, c: &[f64], z_phy: &[T]) -> Vec<T> {
        let n = &self.normalizer;
        let mut x: Vec<T> = n.control(c).into_iter().map(T::of).collect();
        x.extend(z_phy.iter().enumerate().map(|(i, z)| (*z - T::of(n.state_mean[i])) / T::of(n.state_std[i])));
        x
    }

    fn correct(&self, c: &[f64], z_phy: Vec<T>, h: &HiddenState<T>) -> (HybridStep<T>, StepTrace<T>) {
        let x = self.predictor_input(c, &z_phy);
        let (hidden, cache) = self.corrector.predictor.step(&x, h);
        let h_top = hidden.top().to_vec();
        let raw = self.corrector.project(&h_top);
        let (z_lstm, slope) = self.constraint.apply_with_slope(&raw);
        let z_hat = (0..z_phy.len()).map(|i| z_phy[i] + self.sigma(i) * z_lstm[i]).collect();
        (HybridStep { z_hat, z_phy, z_lstm, hidden }, StepTrace { cache, h_top, slope })
    }

    /// Initializer input rows `[norm(z), norm(c)]` of a window.
    pub fn window_inputs(&self, states: &[Vec<f64>], controls: &[Vec<f64>]) -> Vec<Vec<T>> {
        states
            .iter()
            .zip(controls)
            .map(|(z, c)| self.normalizer.state(z).into_iter().chain(self.normalizer.control(c)).map(T::of).collect())
            .collect()
    }

    fn is_diverged(&self, z: &[T]) -> bool {
        runaway(z, &self.normalizer)
    }

    pub fn zero_corrector(&mut self) {
        self.corrector = self.corrector.zeros_like();
    }
}

/// One step: `z^phy = physical(history)`, LSTM on `[c_t, norm(z^phy)]`, `ẑ = z^phy + σ ⊙ constrain(W^hx h)`.
pub fn hybrid_step<T: Scalar>(
    model: &HybridModel<T>,
    state_history: &[Vec<T>],
    control_history: &[Vec<f64>],
    hidden: &HiddenState<T>,
) -> Result<HybridStep<T>> {
    let h = model.physical.history_len();
    if state_history.len() < h || control_history.len() < h {
        return Err(Error::Dimension(format!("hybrid step needs {h} history steps")));
    }
    let z_phy = model.physical.step(state_history, control_history);
    let (out, _) = model.correct(control_history.last().unwrap(), z_phy, hidden);
    if model.is_diverged(&out.z_hat) {
        return Err(Error::TrainingDiverged("non-finite or runaway hybrid prediction".into()));
    }
    Ok(out)
}

/// A sample converted once into the working precision.
#[derive(Clone, Debug)]
pub struct PreparedSample<T> {
    pub init_inputs: Vec<Vec<T>>,
    pub window_states: Vec<Vec<T>>,
    /// window controls except the last, followed by the horizon controls
    pub controls: Vec<Vec<f64>>,
    pub targets: Vec<Vec<T>>,
    pub window: usize,
}

impl<T: Scalar> PreparedSample<T> {
    pub fn new(model: &HybridModel<T>, s: &PredictionSample) -> Self {
        let w = s.window_states.len();
        let mut controls = s.window_controls[..w - 1].to_vec();
        controls.extend_from_slice(&s.horizon_controls);
        Self {
            init_inputs: model.window_inputs(&s.window_states, &s.window_controls),
            window_states: s.window_states.iter().map(|z| z.iter().map(|&x| T::of(x)).collect()).collect(),
            controls,
            targets: s.horizon_states.iter().map(|z| z.iter().map(|&x| T::of(x)).collect()).collect(),
            window: w,
        }
    }

    pub fn horizon(&self) -> usize {
        self.targets.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Feedback {
    /// the physical model consumes the true previous state
    TeacherForced,
    /// the physical model consumes the previous prediction
    FreeRunning,
}

#[derive(Clone, Debug)]
pub struct Rollout<T> {
    /// mean over steps and state dimensions of the squared normalized error
    pub loss: f64,
    pub predictions: Vec<Vec<T>>,
    pub z_phy: Vec<Vec<T>>,
    pub z_lstm: Vec<Vec<T>>,
    /// first step whose prediction was non-finite or runaway
    pub diverged_at: Option<usize>,
    pub gradients: Option<Corrector<T>>,
}

/// Rolls the hybrid model over the first `steps` horizon steps of `sample`.
///
/// With `with_gradients`, the gradient of the loss with respect to every corrector
/// parameter (predictor, initializer, projection) is returned. In free-running mode
/// it includes the path through the physical model's input via its exact Jacobian.
pub fn rollout<T: Scalar>(
    model: &HybridModel<T>,
    sample: &PreparedSample<T>,
    steps: usize,
    feedback: Feedback,
    with_gradients: bool,
) -> Result<Rollout<T>> {
    let horizon = steps.min(sample.horizon());
    if horizon == 0 {
        return Err(Error::Domain("rollout horizon must be ≥ 1".into()));
    }
    let w = sample.window;
    let nz = model.state_dim();
    let hl = model.physical.history_len();
    if hl > w {
        return Err(Error::Domain("window shorter than the physical model's history".into()));
    }
    let (h0, init_caches) = encode_initial_state(&model.corrector, &sample.init_inputs)?;
    let mut states: Vec<Vec<T>> = sample.window_states.clone();
    let mut hidden = h0;
    let mut out = Rollout {
        loss: 0.0,
        predictions: Vec::with_capacity(horizon),
        z_phy: Vec::with_capacity(horizon),
        z_lstm: Vec::with_capacity(horizon),
        diverged_at: None,
        gradients: None,
    };
    let mut traces = Vec::new();
    let mut jacobians: Vec<Vec<Matrix<T>>> = Vec::new();
    let need_jac = with_gradients && feedback == Feedback::FreeRunning;
    let norm = T::of(1.0 / (horizon * nz) as f64);
    let mut loss = T::zero();
    for k in 0..horizon {
        let p = w - 1 + k;
        let zs = &states[p + 1 - hl..=p];
        let cs = &sample.controls[p + 1 - hl..=p];
        let z_phy = if need_jac {
            let sj = model.physical.step_jacobian(zs, cs);
            jacobians.push(sj.jacobians);
            sj.value
        } else {
            model.physical.step(zs, cs)
        };
        let (step, trace) = model.correct(&sample.controls[p], z_phy, &hidden);
        if model.is_diverged(&step.z_hat) {
            out.diverged_at = Some(k);
            out.loss = f64::INFINITY;
            return Ok(out);
        }
        for i in 0..nz {
            let e = (sample.targets[k][i] - step.z_hat[i]) / model.sigma(i);
            loss += e * e;
        }
        match feedback {
            Feedback::TeacherForced => states.push(sample.targets[k].clone()),
            Feedback::FreeRunning => states.push(step.z_hat.clone()),
        }
        out.predictions.push(step.z_hat);
        out.z_phy.push(step.z_phy);
        out.z_lstm.push(step.z_lstm);
        hidden = step.hidden;
        if with_gradients {
            traces.push(trace);
        }
    }
    out.loss = (loss * norm).value_f64();
    if !with_gradients {
        return Ok(out);
    }

    let nc = model.control_dim();
    let corr = &model.corrector;
    let mut grads = corr.zeros_like();
    let mut carry = corr.predictor.zero_state();
    let mut g_zhat = vec![vec![T::zero(); nz]; horizon];
    let two = T::of(2.0);
    for k in (0..horizon).rev() {
        let mut g = std::mem::take(&mut g_zhat[k]);
        for i in 0..nz {
            let sig = model.sigma(i);
            g[i] -= two * norm * (sample.targets[k][i] - out.predictions[k][i]) / (sig * sig);
        }
        let tr = &traces[k];
        let g_raw: Vec<T> = (0..nz).map(|i| model.sigma(i) * g[i] * tr.slope[i]).collect();
        grads.projection.add_outer(&g_raw, &tr.h_top);
        let mut dh = vec![T::zero(); corr.projection.cols];
        corr.projection.mul_t_vec_acc(&g_raw, &mut dh);
        let dx = corr.predictor.step_backward(&tr.cache, &dh, &mut carry, &mut grads.predictor);
        if need_jac {
            let g_phy: Vec<T> = (0..nz).map(|i| g[i] + dx[nc + i] / model.sigma(i)).collect();
            // history position j of step k holds state index w - hl + k + j
            for (j, jac) in jacobians[k].iter().enumerate() {
                let pos = w - hl + k + j;
                if pos < w {
                    continue;
                }
                let target = &mut g_zhat[pos - w];
                jac.mul_t_vec_acc(&g_phy, target);
            }
        }
    }
    initializer_backward(&corr.initializer, &init_caches, carry, &mut grads.initializer);
    out.gradients = Some(grads);
    Ok(out)
}

pub fn rollout_teacher_forced<T: Scalar>(model: &HybridModel<T>, sample: &PreparedSample<T>) -> Result<Rollout<T>> {
    rollout(model, sample, usize::MAX, Feedback::TeacherForced, false)
}

pub fn rollout_free_running<T: Scalar>(model: &HybridModel<T>, sample: &PreparedSample<T>) -> Result<Rollout<T>> {
    rollout(model, sample, usize::MAX, Feedback::FreeRunning, false)
}

/// Non-finite, or farther than [`DIVERGENCE_LIMIT`] standard deviations from the state mean.
pub fn runaway<T: Scalar>(z: &[T], normalizer: &Normalizer) -> bool {
    z.iter().enumerate().any(|(i, v)| {
        let x = v.value_f64();
        !x.is_finite() || ((x - normalizer.state_mean[i]) / normalizer.state_std[i]).abs() > DIVERGENCE_LIMIT
    })
}

/// Free-running prediction of the physical model alone, in raw units; `None` on divergence.
pub fn rollout_physical(
    physical: &PhysicalModel,
    normalizer: &Normalizer,
    sample: &PredictionSample,
) -> Option<Vec<Vec<f64>>> {
    let w = sample.window_states.len();
    let hl = physical.history_len();
    let mut states = sample.window_states.clone();
    let mut controls = sample.window_controls[..w - 1].to_vec();
    controls.extend_from_slice(&sample.horizon_controls);
    let mut out = Vec::with_capacity(sample.horizon());
    for k in 0..sample.horizon() {
        let p = w - 1 + k;
        let z = physical.step(&states[p + 1 - hl..=p], &controls[p + 1 - hl..=p]);
        if runaway(&z, normalizer) {
            return None;
        }
        states.push(z.clone());
        out.push(z);
    }
    Some(out)
}

/// Free-running hybrid prediction of one sample in raw `f64` units; `None` on divergence.
pub fn predict<T: Scalar>(model: &HybridModel<T>, sample: &PredictionSample) -> Result<Option<Vec<Vec<f64>>>> {
    let prepared = PreparedSample::new(model, sample);
    let r = rollout(model, &prepared, usize::MAX, Feedback::FreeRunning, false)?;
    if r.diverged_at.is_some() {
        return Ok(None);
    }
    Ok(Some(r.predictions.iter().map(|z| z.iter().map(|x| x.value_f64()).collect()).collect()))
}

#[cfg(test)]
mod tests;
