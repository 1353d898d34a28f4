use serde::{Deserialize, Serialize};

use crate::dataset::PredictionSample;
use crate::error::Result;
use crate::eval::{bounds_for_threshold, evaluate_model, Evaluation, PhysicalOutputRange};
use crate::hybrid::{train_one_phase, HybridModel, TrainingConfig};
use crate::neural::OutputConstraint;
use crate::scalar::Scalar;

/// Free-running fine-tuning budget after a constraint is imposed.
pub const FINE_TUNE_EPOCHS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepMode {
    /// the trained model without output bounds
    Unconstrained,
    /// bounds imposed on the trained weights, no retraining
    Clamped,
    /// bounds imposed, then fine-tuned under them
    FineTuned,
}

impl SweepMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepMode::Unconstrained => "unconstrained",
            SweepMode::Clamped => "clamped",
            SweepMode::FineTuned => "fine_tuned",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mode: SweepMode,
    /// relative threshold in percent; infinite for the unconstrained row
    pub threshold: f64,
    pub evaluation: Evaluation,
}

/// Error against relative threshold. For every threshold the bounds are set from `range`, the
/// clamped model is evaluated, then fine-tuned for [`FINE_TUNE_EPOCHS`] free-running epochs
/// (optimizer settings from `cfg`) and evaluated again. The first row is the unconstrained model.
#[allow(clippy::too_many_arguments)]
pub fn threshold_sweep<T: Scalar>(
    model: &HybridModel<T>,
    range: &PhysicalOutputRange,
    thresholds: &[f64],
    train: &[PredictionSample],
    val: &[PredictionSample],
    eval: &[PredictionSample],
    dt: f64,
    cfg: &TrainingConfig,
) -> Result<Vec<SweepRow>> {
    let mut base = model.clone();
    base.constraint = OutputConstraint::Unconstrained;
    let mut rows = vec![SweepRow {
        mode: SweepMode::Unconstrained,
        threshold: f64::INFINITY,
        evaluation: evaluate_model(&base, eval, dt)?,
    }];
    let tune = TrainingConfig { phase1_epochs: 0, phase2_epochs: FINE_TUNE_EPOCHS, ..cfg.clone() };
    for &pct in thresholds {
        let mut clamped = base.clone();
        clamped.constraint = OutputConstraint::bounded(bounds_for_threshold(range, pct, &base.normalizer)?)?;
        rows.push(SweepRow {
            mode: SweepMode::Clamped,
            threshold: pct,
            evaluation: evaluate_model(&clamped, eval, dt)?,
        });
        let tuned = train_one_phase(clamped, train, val, &tune)?.model;
        rows.push(SweepRow {
            mode: SweepMode::FineTuned,
            threshold: pct,
            evaluation: evaluate_model(&tuned, eval, dt)?,
        });
    }
    Ok(rows)
}
