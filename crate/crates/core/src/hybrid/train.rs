use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::PredictionSample;
use crate::error::{Error, Result};
use crate::hybrid::{rollout, Feedback, HybridModel, PreparedSample};
use crate::neural::{clip_global_norm, Adam, Corrector};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// teacher-forced epochs (phase 1)
    pub phase1_epochs: usize,
    /// free-running epochs (phase 2)
    pub phase2_epochs: usize,
    /// initial free-running rollout length; doubled on validation plateau
    pub truncation: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// early-stopping patience on the validation free-running loss
    pub patience: usize,
    /// epochs without improvement that count as a plateau (phase 1 end, truncation growth)
    pub plateau: usize,
    /// abort when more than this fraction of an epoch's batches diverge
    pub max_divergent_fraction: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            phase1_epochs: 20,
            phase2_epochs: 30,
            truncation: 25,
            learning_rate: 2e-3,
            clip_norm: 5.0,
            batch_size: 16,
            seed: 0,
            patience: 10,
            plateau: 3,
            max_divergent_fraction: 0.5,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.truncation == 0 {
            return Err(Error::Domain("batch size and truncation must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Domain("learning rate and clip norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    TeacherForced,
    FreeRunning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    /// epoch counter across both phases, from 1
    pub epoch: usize,
    pub truncation: usize,
    pub train_loss: f64,
    /// validation loss under the phase's own objective (full horizon)
    pub val_loss: f64,
    pub divergent_batches: usize,
    pub batches: usize,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome<T> {
    pub model: HybridModel<T>,
    pub history: Vec<EpochRecord>,
    /// diagnostic when training stopped because too many batches diverged
    pub aborted: Option<String>,
    /// best validation free-running loss (the restored parameters)
    pub best_val_loss: f64,
}

struct EpochStats {
    loss: f64,
    divergent: usize,
    batches: usize,
}

fn prepare<T: Scalar>(model: &HybridModel<T>, samples: &[PredictionSample]) -> Vec<PreparedSample<T>> {
    samples.iter().map(|s| PreparedSample::new(model, s)).collect()
}

/// Mean loss over `samples`; infinite when any sample diverges.
fn evaluate_loss<T: Scalar>(model: &HybridModel<T>, samples: &[PreparedSample<T>], feedback: Feedback) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for s in samples {
        let r = rollout(model, s, usize::MAX, feedback, false)?;
        if r.diverged_at.is_some() {
            return Ok(f64::INFINITY);
        }
        total += r.loss;
    }
    Ok(total / samples.len() as f64)
}

fn run_epoch<T: Scalar>(
    model: &mut HybridModel<T>,
    adam: &mut Adam<T>,
    samples: &[PreparedSample<T>],
    steps: usize,
    feedback: Feedback,
    cfg: &TrainingConfig,
    epoch: usize,
) -> Result<EpochStats> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let mut stats = EpochStats { loss: 0.0, divergent: 0, batches: 0 };
    let mut counted = 0usize;
    for batch in order.chunks(cfg.batch_size) {
        stats.batches += 1;
        let mut acc: Option<Corrector<T>> = None;
        let mut ok = 0usize;
        let mut flagged = false;
        for &i in batch {
            let r = rollout(model, &samples[i], steps, feedback, true)?;
            match (r.diverged_at, r.gradients) {
                (None, Some(g)) if g.is_finite() => {
                    stats.loss += r.loss;
                    counted += 1;
                    ok += 1;
                    match acc.as_mut() {
                        None => acc = Some(g),
                        Some(a) => a.axpy(T::one(), &g),
                    }
                }
                _ => flagged = true,
            }
        }
        if flagged {
            stats.divergent += 1;
        }
        let Some(mut grads) = acc else { continue };
        let scale = T::of(1.0 / ok as f64);
        for t in grads.tensors_mut() {
            for x in t.iter_mut() {
                *x *= scale;
            }
        }
        clip_global_norm(grads.tensors_mut(), cfg.clip_norm);
        adam.update(model.corrector.tensors_mut(), grads.tensors());
    }
    stats.loss = if counted > 0 { stats.loss / counted as f64 } else { f64::INFINITY };
    Ok(stats)
}

fn check_sets(train: &[PredictionSample], val: &[PredictionSample]) -> Result<()> {
    if train.is_empty() {
        return Err(Error::Degenerate("no training samples".into()));
    }
    if val.is_empty() {
        return Err(Error::Degenerate("no validation samples".into()));
    }
    Ok(())
}

/// Free-running epochs with early stopping; shared by both schedules.
#[allow(clippy::too_many_arguments)]
fn free_running_stage<T: Scalar>(
    model: &mut HybridModel<T>,
    adam: &mut Adam<T>,
    train: &[PreparedSample<T>],
    val: &[PreparedSample<T>],
    epochs: usize,
    start_truncation: usize,
    curriculum: bool,
    cfg: &TrainingConfig,
    history: &mut Vec<EpochRecord>,
) -> Result<(f64, Option<String>)> {
    let horizon = train.iter().map(|s| s.horizon()).max().unwrap_or(1);
    let mut steps = if curriculum { start_truncation.min(horizon) } else { horizon };
    let mut best = evaluate_loss(model, val, Feedback::FreeRunning)?;
    let mut best_params = model.corrector.clone();
    let mut since_best = 0usize;
    let mut level_best = f64::INFINITY;
    let mut since_level_best = 0usize;
    let mut aborted = None;
    for _ in 0..epochs {
        let epoch = history.len() + 1;
        let stats = run_epoch(model, adam, train, steps, Feedback::FreeRunning, cfg, epoch)?;
        let val_loss = evaluate_loss(model, val, Feedback::FreeRunning)?;
        history.push(EpochRecord {
            phase: Phase::FreeRunning,
            epoch,
            truncation: steps,
            train_loss: stats.loss,
            val_loss,
            divergent_batches: stats.divergent,
            batches: stats.batches,
        });
        if stats.divergent as f64 > cfg.max_divergent_fraction * stats.batches as f64 {
            aborted = Some(format!(
                "{} of {} batches diverged in epoch {epoch} (rollout length {steps})",
                stats.divergent, stats.batches
            ));
            break;
        }
        if val_loss < best {
            best = val_loss;
            best_params = model.corrector.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        if val_loss < level_best {
            level_best = val_loss;
            since_level_best = 0;
        } else {
            since_level_best += 1;
        }
        if steps < horizon && since_level_best >= cfg.plateau {
            steps = (2 * steps).min(horizon);
            level_best = f64::INFINITY;
            since_level_best = 0;
            since_best = 0;
            continue;
        }
        if steps == horizon && since_best >= cfg.patience {
            break;
        }
    }
    model.corrector = best_params;
    Ok((best, aborted))
}

/// Teacher-forced phase followed by a free-running phase on rollouts that grow to the full horizon.
pub fn train_two_phase<T: Scalar>(
    model: HybridModel<T>,
    train: &[PredictionSample],
    val: &[PredictionSample],
    cfg: &TrainingConfig,
) -> Result<TrainingOutcome<T>> {
    cfg.validate()?;
    let mut model = model;
    let mut history = Vec::new();
    if cfg.phase1_epochs == 0 && cfg.phase2_epochs == 0 {
        return Ok(TrainingOutcome { model, history, aborted: None, best_val_loss: f64::NAN });
    }
    check_sets(train, val)?;
    let tr = prepare(&model, train);
    let va = prepare(&model, val);
    let mut adam = Adam::new(cfg.learning_rate);

    let mut best_tf = f64::INFINITY;
    let mut since = 0usize;
    for _ in 0..cfg.phase1_epochs {
        let epoch = history.len() + 1;
        let stats = run_epoch(&mut model, &mut adam, &tr, usize::MAX, Feedback::TeacherForced, cfg, epoch)?;
        let val_loss = evaluate_loss(&model, &va, Feedback::TeacherForced)?;
        history.push(EpochRecord {
            phase: Phase::TeacherForced,
            epoch,
            truncation: tr[0].horizon(),
            train_loss: stats.loss,
            val_loss,
            divergent_batches: stats.divergent,
            batches: stats.batches,
        });
        if val_loss < best_tf {
            best_tf = val_loss;
            since = 0;
        } else {
            since += 1;
            if since >= cfg.plateau {
                break;
            }
        }
    }

    let (best, aborted) = free_running_stage(
        &mut model,
        &mut adam,
        &tr,
        &va,
        cfg.phase2_epochs,
        cfg.truncation,
        true,
        cfg,
        &mut history,
    )?;
    Ok(TrainingOutcome { model, history, aborted, best_val_loss: best })
}

/// Free-running training on the full horizon from the first epoch, for `E1 + E2` epochs.
pub fn train_one_phase<T: Scalar>(
    model: HybridModel<T>,
    train: &[PredictionSample],
    val: &[PredictionSample],
    cfg: &TrainingConfig,
) -> Result<TrainingOutcome<T>> {
    cfg.validate()?;
    let mut model = model;
    let mut history = Vec::new();
    let epochs = cfg.phase1_epochs + cfg.phase2_epochs;
    if epochs == 0 {
        return Ok(TrainingOutcome { model, history, aborted: None, best_val_loss: f64::NAN });
    }
    check_sets(train, val)?;
    let tr = prepare(&model, train);
    let va = prepare(&model, val);
    let mut adam = Adam::new(cfg.learning_rate);
    let (best, aborted) =
        free_running_stage(&mut model, &mut adam, &tr, &va, epochs, usize::MAX, false, cfg, &mut history)?;
    Ok(TrainingOutcome { model, history, aborted, best_val_loss: best })
}

/// Per-epoch history as CSV.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,phase,truncation,train_loss,val_loss,divergent_batches,batches\n");
    for r in history {
        let phase = match r.phase {
            Phase::TeacherForced => "teacher_forced",
            Phase::FreeRunning => "free_running",
        };
        out.push_str(&format!(
            "{},{},{},{:.9e},{:.9e},{},{}\n",
            r.epoch, phase, r.truncation, r.train_loss, r.val_loss, r.divergent_batches, r.batches
        ));
    }
    out
}
