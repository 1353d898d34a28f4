use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hybrid::{HybridModel, TrainingConfig};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: &str = "vessel-hybrid-checkpoint/1";

/// Everything needed to rerun a trained model: parameters, normalizer, physical
/// coefficients, constraint and the configuration that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub version: String,
    /// model string such as `Min+Lin-2P`
    pub model_name: String,
    pub window: usize,
    pub horizon: usize,
    pub training: Option<TrainingConfig>,
    /// `false` for physics-only baselines, whose corrector is ignored
    pub use_corrector: bool,
    pub model: HybridModel<T>,
}

impl<T: Scalar + Serialize + DeserializeOwned> Checkpoint<T> {
    pub fn new(
        model_name: &str,
        model: HybridModel<T>,
        window: usize,
        horizon: usize,
        training: Option<TrainingConfig>,
        use_corrector: bool,
    ) -> Self {
        Self {
            version: CHECKPOINT_VERSION.into(),
            model_name: model_name.into(),
            window,
            horizon,
            training,
            use_corrector,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Domain(format!("checkpoint serialization: {e}")))
    }

    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Tag {
            version: String,
        }
        let tag: Tag = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        if tag.version != CHECKPOINT_VERSION {
            return Err(Error::Version { expected: CHECKPOINT_VERSION.into(), found: tag.version });
        }
        serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }
}
