use std::fmt;
use std::str::FromStr;

use crate::dataset::Vehicle;
use crate::error::{Error, Result};
use crate::physical::{FirstPrinciplesKind, RegressionKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingSchedule {
    OnePhase,
    TwoPhase,
    /// physics only; the corrector is not trained or used
    None,
}

/// Parsed model string `FIRSTPRINCIPLES+REGRESSION-PHASE`, e.g. `Min+Lin-2P`, `Hyd-1P`, `QLag`,
/// `LSTM-2P` (no physical part). A missing phase means `none`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModelSpec {
    pub first_principles: FirstPrinciplesKind,
    pub regression: RegressionKind,
    pub training: TrainingSchedule,
}

fn fp_from(s: &str) -> Option<FirstPrinciplesKind> {
    Some(match s.to_ascii_lowercase().as_str() {
        "min" => FirstPrinciplesKind::Min,
        "pro" => FirstPrinciplesKind::Pro,
        "minq" => FirstPrinciplesKind::MinQ,
        "full" => FirstPrinciplesKind::Full,
        _ => return None,
    })
}

fn reg_from(s: &str) -> Option<RegressionKind> {
    Some(match s.to_ascii_lowercase().as_str() {
        "lin" => RegressionKind::Lin,
        "hyd" => RegressionKind::Hyd,
        "qua" => RegressionKind::Qua,
        "qlag" => RegressionKind::QLag,
        _ => return None,
    })
}

fn reg_name(k: RegressionKind) -> &'static str {
    match k {
        RegressionKind::None => "none",
        RegressionKind::Lin => "Lin",
        RegressionKind::Hyd => "Hyd",
        RegressionKind::Qua => "Qua",
        RegressionKind::QLag => "QLag",
    }
}

impl ModelSpec {
    pub fn has_physics(&self) -> bool {
        self.first_principles != FirstPrinciplesKind::None || self.regression != RegressionKind::None
    }

    /// Rejects parts that belong to the other vehicle.
    pub fn check_vehicle(&self, vehicle: Vehicle) -> Result<()> {
        let ok = match vehicle {
            Vehicle::Ship => self.first_principles != FirstPrinciplesKind::MinQ,
            Vehicle::Quad => {
                matches!(self.first_principles, FirstPrinciplesKind::None | FirstPrinciplesKind::MinQ)
                    && self.regression != RegressionKind::Hyd
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("model {self} is not available for the {} vehicle", vehicle.as_str())))
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::Domain(format!("invalid model string {s:?}: {why}"));
        let (phys, phase) = match s.rsplit_once('-') {
            Some((p, ph)) => (p, Some(ph)),
            None => (s, None),
        };
        let training = match phase.map(str::to_ascii_lowercase).as_deref() {
            None | Some("none") => TrainingSchedule::None,
            Some("1p") => TrainingSchedule::OnePhase,
            Some("2p") => TrainingSchedule::TwoPhase,
            Some(_) => return Err(bad("phase must be 1P, 2P or none")),
        };
        let mut fp = FirstPrinciplesKind::None;
        let mut reg = RegressionKind::None;
        let lower = phys.to_ascii_lowercase();
        if lower != "none" && lower != "lstm" {
            for part in phys.split('+') {
                if let Some(k) = fp_from(part) {
                    if fp != FirstPrinciplesKind::None {
                        return Err(bad("more than one first-principles part"));
                    }
                    fp = k;
                } else if let Some(k) = reg_from(part) {
                    if reg != RegressionKind::None {
                        return Err(bad("more than one regression part"));
                    }
                    reg = k;
                } else {
                    return Err(bad(&format!("unknown part {part:?}")));
                }
            }
        }
        let spec = ModelSpec { first_principles: fp, regression: reg, training };
        if !spec.has_physics() && training == TrainingSchedule::None {
            return Err(bad("no model part"));
        }
        Ok(spec)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let phys = match (self.first_principles, self.regression) {
            (FirstPrinciplesKind::None, RegressionKind::None) => "LSTM".to_string(),
            (FirstPrinciplesKind::None, r) => reg_name(r).to_string(),
            (p, RegressionKind::None) => p.name().to_string(),
            (p, r) => format!("{}+{}", p.name(), reg_name(r)),
        };
        let phase = match self.training {
            TrainingSchedule::OnePhase => "1P",
            TrainingSchedule::TwoPhase => "2P",
            TrainingSchedule::None => "none",
        };
        write!(f, "{phys}-{phase}")
    }
}
