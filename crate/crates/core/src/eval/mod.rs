//! Prediction metrics: per-state RMSE, dead-reckoned trajectory error, and the relative threshold
//! of an output-range constraint.

mod report;
mod sweep;

pub use report::{per_minute_csv, report_csv, sweep_csv, EvalSummary, REPORT_HEADER};
pub use sweep::{threshold_sweep, SweepMode, SweepRow, FINE_TUNE_EPOCHS};

use serde::{Deserialize, Serialize};

use crate::dataset::{Episode, Normalizer, PredictionSample, Vehicle};
use crate::error::{Error, Result};
use crate::hybrid::{predict, rollout_physical, HybridModel};
use crate::neural::OutputConstraint;
use crate::physical::PhysicalModel;
use crate::scalar::Scalar;
use crate::sim::quad::euler_rates;
use crate::sim::ship::{kinematics, wrap_angle};

/// Number of leading pose components that form the position used for trajectory distances.
pub fn position_dim(vehicle: Vehicle) -> usize {
    match vehicle {
        Vehicle::Ship => 2,
        Vehicle::Quad => 3,
    }
}

fn check_aligned(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Degenerate("no samples to evaluate".into()));
    }
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("{} predicted vs {} true sequences", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if x.is_empty() || x.len() != y.len() || x.iter().zip(y).any(|(p, q)| p.len() != q.len()) {
            return Err(Error::Dimension("predicted and true sequences are not aligned".into()));
        }
    }
    Ok(())
}

/// Per-dimension `√(mean over samples and steps of (prediction − truth)²)`.
pub fn state_rmse(predictions: &[Vec<Vec<f64>>], truths: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    check_aligned(predictions, truths)?;
    let n = predictions[0][0].len();
    let mut sum = vec![0.0; n];
    let mut count = 0usize;
    for (p, t) in predictions.iter().zip(truths) {
        for (a, b) in p.iter().zip(t) {
            for i in 0..n {
                sum[i] += (a[i] - b[i]).powi(2);
            }
            count += 1;
        }
    }
    Ok(sum.iter().map(|s| (s / count as f64).sqrt()).collect())
}

/// Sum of per-state RMSEs in units of the training standard deviations; a single
/// model-selection score.
pub fn normalized_rmse_sum(rmse: &[f64], state_std: &[f64]) -> f64 {
    rmse.iter().zip(state_std).map(|(r, s)| r / s).sum()
}

fn pose_rate(vehicle: Vehicle, pose: &[f64], v: &[f64]) -> Vec<f64> {
    match vehicle {
        Vehicle::Ship => kinematics(&[pose[0], pose[1], pose[2], pose[3]], &[v[0], v[1], v[2], v[3]]).to_vec(),
        Vehicle::Quad => {
            let e = euler_rates(&[pose[3], pose[4], pose[5]], &[v[3], v[4], v[5]]);
            vec![v[0], v[1], v[2], e[0], e[1], e[2]]
        }
    }
}

/// Dead reckoning: integrates the pose from `initial_pose` through the velocities
/// `initial_state, states[0], states[1], …` (one sample interval apart) with the midpoint rule,
/// velocities linearly interpolated. Returns one pose per entry of `states`.
pub fn reconstruct_trajectory(
    vehicle: Vehicle,
    initial_pose: &[f64],
    initial_state: &[f64],
    states: &[Vec<f64>],
    dt: f64,
) -> Vec<Vec<f64>> {
    let mut pose = initial_pose.to_vec();
    let mut prev = initial_state;
    let mut out = Vec::with_capacity(states.len());
    for next in states {
        let k1 = pose_rate(vehicle, &pose, prev);
        let mid_pose: Vec<f64> = pose.iter().zip(&k1).map(|(e, d)| e + 0.5 * dt * d).collect();
        let mid_v: Vec<f64> = prev.iter().zip(next).map(|(a, b)| 0.5 * (a + b)).collect();
        let k2 = pose_rate(vehicle, &mid_pose, &mid_v);
        for (e, d) in pose.iter_mut().zip(&k2) {
            *e += dt * d;
        }
        let yaw = pose.len() - 1;
        if pose[yaw].abs() > std::f64::consts::PI {
            pose[yaw] = wrap_angle(pose[yaw]);
        }
        out.push(pose.clone());
        prev = next;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    /// mean over samples of the per-sample mean position distance
    pub mean: f64,
    /// half-width of the normal-approximation 95% interval of `mean`
    pub ci95: f64,
    pub per_sample: Vec<f64>,
    /// `per_segment[sample][j]`: mean distance within the `j`-th segment of the horizon
    pub per_segment: Vec<Vec<f64>>,
}

/// Mean Euclidean distance over the first `position_dims` pose components, per sample, with a
/// 95% interval over samples and a breakdown into segments of `segment` steps.
pub fn trajectory_rmse(
    predicted: &[Vec<Vec<f64>>],
    truth: &[Vec<Vec<f64>>],
    position_dims: usize,
    segment: usize,
) -> Result<TrajectoryReport> {
    check_aligned(predicted, truth)?;
    if segment == 0 || position_dims == 0 || predicted[0][0].len() < position_dims {
        return Err(Error::Domain("segment length and position dimension must fit the poses".into()));
    }
    let mut per_sample = Vec::with_capacity(predicted.len());
    let mut per_segment = Vec::with_capacity(predicted.len());
    for (p, t) in predicted.iter().zip(truth) {
        let d: Vec<f64> = p
            .iter()
            .zip(t)
            .map(|(a, b)| (0..position_dims).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt())
            .collect();
        per_sample.push(d.iter().sum::<f64>() / d.len() as f64);
        per_segment.push(d.chunks(segment).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect());
    }
    let (mean, ci95) = mean_ci95(&per_sample);
    Ok(TrajectoryReport { mean, ci95, per_sample, per_segment })
}

/// Mean and `1.96·s/√n` with the sample standard deviation `s` (zero for a single value).
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Percentile `q ∈ [0, 1]` of sorted data, linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 2.5th and 97.5th percentiles of the physical model's one-step outputs, per state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalOutputRange {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl PhysicalOutputRange {
    /// One-step outputs of `physical` on every step of `episodes` with a full history.
    pub fn fit(physical: &PhysicalModel, episodes: &[Episode]) -> Result<Self> {
        let n = physical.state_dim();
        let hl = physical.history_len();
        let mut outputs: Vec<Vec<f64>> = vec![Vec::new(); n];
        for ep in episodes {
            for t in hl - 1..ep.len().saturating_sub(1) {
                let z = physical.try_step(&ep.states[t + 1 - hl..=t], &ep.controls[t + 1 - hl..=t])?;
                for (o, v) in outputs.iter_mut().zip(z) {
                    o.push(v);
                }
            }
        }
        if outputs[0].is_empty() {
            return Err(Error::Degenerate("no one-step outputs to take percentiles of".into()));
        }
        let mut low = Vec::with_capacity(n);
        let mut high = Vec::with_capacity(n);
        for mut o in outputs {
            if o.iter().any(|x| !x.is_finite()) {
                return Err(Error::Degenerate("physical model produced non-finite outputs".into()));
            }
            o.sort_by(f64::total_cmp);
            low.push(percentile(&o, 0.025));
            high.push(percentile(&o, 0.975));
        }
        Ok(Self { low, high })
    }

    pub fn width(&self) -> Vec<f64> {
        self.high.iter().zip(&self.low).map(|(h, l)| h - l).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeThreshold {
    /// `2β_i / (high_i − low_i)` in percent
    pub per_state: Vec<f64>,
    /// mean of `per_state`
    pub aggregate: f64,
}

/// Relative threshold of per-state bounds `beta` given in state units.
pub fn relative_threshold(range: &PhysicalOutputRange, beta: &[f64]) -> Result<RelativeThreshold> {
    if beta.len() != range.low.len() {
        return Err(Error::Dimension("bound count does not match the range".into()));
    }
    let width = range.width();
    if width.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Degenerate("physical output range has zero size".into()));
    }
    let per_state: Vec<f64> = beta.iter().zip(&width).map(|(b, w)| 100.0 * 2.0 * b / w).collect();
    let aggregate = per_state.iter().sum::<f64>() / per_state.len() as f64;
    Ok(RelativeThreshold { per_state, aggregate })
}

/// Bounds in state units of a model's constraint (`σ_i·β_i`; infinite when unconstrained).
pub fn constraint_in_state_units(constraint: &OutputConstraint, normalizer: &Normalizer) -> Vec<f64> {
    match constraint.bounds() {
        Some(b) => b.iter().zip(&normalizer.state_std).map(|(b, s)| b * s).collect(),
        None => vec![f64::INFINITY; normalizer.state_std.len()],
    }
}

/// Normalized corrector bounds realizing a relative threshold of `percent` on every state:
/// `β_i = (percent/100)·(high_i − low_i) / (2σ_i)`.
pub fn bounds_for_threshold(range: &PhysicalOutputRange, percent: f64, normalizer: &Normalizer) -> Result<Vec<f64>> {
    if !(percent >= 0.0) {
        return Err(Error::Domain(format!("relative threshold must be ≥ 0, got {percent}")));
    }
    Ok(range.width().iter().zip(&normalizer.state_std).map(|(w, s)| percent / 100.0 * w / (2.0 * s)).collect())
}

/// Metrics of one predictor on a sample set. Samples whose rollout diverged are counted and
/// left out of the averages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub vehicle: Vehicle,
    pub samples: usize,
    pub diverged: usize,
    pub state_rmse: Vec<f64>,
    pub trajectory: TrajectoryReport,
}

impl Evaluation {
    /// Trajectory error used for comparisons: infinite when any sample diverged.
    pub fn trajectory_score(&self) -> f64 {
        if self.diverged > 0 {
            f64::INFINITY
        } else {
            self.trajectory.mean
        }
    }

    pub fn is_divergent(&self) -> bool {
        self.diverged > 0
    }
}

/// Segment length for per-minute breakdowns, capped at the horizon.
pub fn minute_steps(dt: f64, horizon: usize) -> usize {
    ((60.0 / dt).round() as usize).clamp(1, horizon.max(1))
}

/// Scores free-running predictions (`None` = diverged) against the samples' recorded states and poses.
pub fn evaluate_predictions(
    vehicle: Vehicle,
    dt: f64,
    samples: &[PredictionSample],
    predictions: Vec<Option<Vec<Vec<f64>>>>,
) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::Degenerate("no samples to evaluate".into()));
    }
    if samples.len() != predictions.len() {
        return Err(Error::Dimension("one prediction per sample required".into()));
    }
    let mut pred_states = Vec::new();
    let mut true_states = Vec::new();
    let mut pred_poses = Vec::new();
    let mut true_poses = Vec::new();
    let mut diverged = 0;
    for (s, p) in samples.iter().zip(predictions) {
        let Some(p) = p else {
            diverged += 1;
            continue;
        };
        pred_poses.push(reconstruct_trajectory(vehicle, &s.initial_pose, s.initial_state(), &p, dt));
        true_poses.push(s.horizon_poses.clone());
        pred_states.push(p);
        true_states.push(s.horizon_states.clone());
    }
    let horizon = samples[0].horizon();
    let segment = minute_steps(dt, horizon);
    let (state_rmse, trajectory) = if pred_states.is_empty() {
        let inf =
            TrajectoryReport { mean: f64::INFINITY, ci95: f64::INFINITY, per_sample: vec![], per_segment: vec![] };
        (vec![f64::INFINITY; vehicle.state_dim()], inf)
    } else {
        (
            state_rmse(&pred_states, &true_states)?,
            trajectory_rmse(&pred_poses, &true_poses, position_dim(vehicle), segment)?,
        )
    };
    Ok(Evaluation { vehicle, samples: samples.len(), diverged, state_rmse, trajectory })
}

pub fn evaluate_model<T: Scalar>(model: &HybridModel<T>, samples: &[PredictionSample], dt: f64) -> Result<Evaluation> {
    let preds = samples.iter().map(|s| predict(model, s)).collect::<Result<Vec<_>>>()?;
    evaluate_predictions(model.physical.vehicle(), dt, samples, preds)
}

pub fn evaluate_physical(
    physical: &PhysicalModel,
    normalizer: &Normalizer,
    samples: &[PredictionSample],
    dt: f64,
) -> Result<Evaluation> {
    let preds = samples.iter().map(|s| rollout_physical(physical, normalizer, s)).collect();
    evaluate_predictions(physical.vehicle(), dt, samples, preds)
}
