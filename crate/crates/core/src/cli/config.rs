use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::cli::model_spec::ModelSpec;
use crate::dataset::Vehicle;
use crate::error::{Error, Result};
use crate::hybrid::TrainingConfig;
use crate::physical::DEFAULT_LAG;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "VESSEL_HYBRID_OUT";

/// Every recognized configuration key, in serialization order.
pub const KEYS: &[&str] = &[
    "vehicle",
    "out_dir",
    "data_dir",
    "seed",
    "hours",
    "episode_seconds",
    "sample_rate",
    "split",
    "model",
    "window",
    "horizon",
    "train_stride",
    "eval_stride",
    "hidden",
    "layers",
    "lag",
    "phase1_epochs",
    "phase2_epochs",
    "truncation",
    "learning_rate",
    "clip_norm",
    "batch_size",
    "patience",
    "plateau",
    "thresholds",
    "checkpoint",
    "manifest",
];

/// One experiment's settings. Built from vehicle defaults, then a config file, then flags.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub vehicle: Vehicle,
    pub out_dir: PathBuf,
    /// dataset directory; `<out_dir>/data` unless set
    pub data_dir: PathBuf,
    pub seed: u64,
    /// total simulated time
    pub hours: f64,
    pub episode_seconds: f64,
    pub sample_rate: f64,
    pub split: [f64; 3],
    pub model: ModelSpec,
    pub window: usize,
    pub horizon: usize,
    pub train_stride: usize,
    /// stride of validation and test samples; the model's horizon unless set
    pub eval_stride: Option<usize>,
    pub hidden: usize,
    pub layers: usize,
    pub lag: usize,
    pub training: TrainingConfig,
    pub thresholds: Vec<f64>,
    pub checkpoint: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(vehicle: Vehicle) -> Self {
        let out_dir = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
        let (episode_seconds, sample_rate, window, horizon, train_stride) = match vehicle {
            Vehicle::Ship => (3600.0, 1.0, 60, 900, 60),
            Vehicle::Quad => (60.0, 100.0, 100, 100, 20),
        };
        Self {
            vehicle,
            data_dir: out_dir.join("data"),
            out_dir,
            seed: 0,
            hours: 96.0,
            episode_seconds,
            sample_rate,
            split: [0.6, 0.1, 0.3],
            model: "Lin-2P".parse().expect("valid default"),
            window,
            horizon,
            train_stride,
            eval_stride: None,
            hidden: 32,
            layers: 1,
            lag: DEFAULT_LAG,
            training: TrainingConfig::default(),
            thresholds: vec![0.0, 5.0, 10.0, 15.0, 25.0, 50.0, 100.0],
            checkpoint: None,
            manifest: None,
        }
    }

    /// Applies `entries` (file entries first, then flag overrides) on top of vehicle defaults.
    pub fn from_entries(entries: &BTreeMap<String, String>) -> Result<Self> {
        for k in entries.keys() {
            if !KEYS.contains(&k.as_str()) {
                return Err(Error::Domain(format!("unknown configuration key {k:?}")));
            }
        }
        let vehicle = match entries.get("vehicle") {
            Some(v) => Vehicle::parse(v).ok_or_else(|| Error::Domain(format!("unknown vehicle {v:?}")))?,
            None => Vehicle::Ship,
        };
        let mut c = Self::defaults(vehicle);
        let mut data_dir_set = false;
        for key in KEYS {
            let Some(v) = entries.get(*key) else { continue };
            let v = v.trim();
            match *key {
                "vehicle" => {}
                "out_dir" => c.out_dir = PathBuf::from(v),
                "data_dir" => {
                    c.data_dir = PathBuf::from(v);
                    data_dir_set = true;
                }
                "seed" => c.seed = num(key, v)?,
                "hours" => c.hours = num(key, v)?,
                "episode_seconds" => c.episode_seconds = num(key, v)?,
                "sample_rate" => c.sample_rate = num(key, v)?,
                "split" => {
                    let xs: Vec<f64> = list(key, v)?;
                    c.split = xs.try_into().map_err(|_| Error::Domain("split needs three ratios".into()))?;
                }
                "model" => c.model = v.parse()?,
                "window" => c.window = num(key, v)?,
                "horizon" => c.horizon = num(key, v)?,
                "train_stride" => c.train_stride = num(key, v)?,
                "eval_stride" => c.eval_stride = Some(num(key, v)?),
                "hidden" => c.hidden = num(key, v)?,
                "layers" => c.layers = num(key, v)?,
                "lag" => c.lag = num(key, v)?,
                "phase1_epochs" => c.training.phase1_epochs = num(key, v)?,
                "phase2_epochs" => c.training.phase2_epochs = num(key, v)?,
                "truncation" => c.training.truncation = num(key, v)?,
                "learning_rate" => c.training.learning_rate = num(key, v)?,
                "clip_norm" => c.training.clip_norm = num(key, v)?,
                "batch_size" => c.training.batch_size = num(key, v)?,
                "patience" => c.training.patience = num(key, v)?,
                "plateau" => c.training.plateau = num(key, v)?,
                "thresholds" => c.thresholds = list(key, v)?,
                "checkpoint" => c.checkpoint = Some(PathBuf::from(v)),
                "manifest" => c.manifest = Some(PathBuf::from(v)),
                _ => unreachable!("key list and match arms agree"),
            }
        }
        if !data_dir_set {
            c.data_dir = c.out_dir.join("data");
        }
        c.training.seed = c.seed;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hours > 0.0) || !(self.episode_seconds > 0.0) || !(self.sample_rate > 0.0) {
            return Err(Error::Domain("hours, episode_seconds and sample_rate must be positive".into()));
        }
        if self.window == 0 || self.horizon == 0 || self.train_stride == 0 || self.eval_stride == Some(0) {
            return Err(Error::Domain("window, horizon and strides must be ≥ 1".into()));
        }
        if self.hidden == 0 || self.layers == 0 || self.lag == 0 {
            return Err(Error::Domain("hidden, layers and lag must be ≥ 1".into()));
        }
        if self.split.iter().any(|r| !(*r >= 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("split ratios must be non-negative and sum to 1".into()));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::Domain("thresholds must be finite and ≥ 0".into()));
        }
        self.model.check_vehicle(self.vehicle)?;
        self.training.validate()
    }

    /// Canonical `key = value` text of every setting.
    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let t = &self.training;
        let mut rows: Vec<(&str, String)> = vec![
            ("vehicle", self.vehicle.as_str().into()),
            ("out_dir", self.out_dir.display().to_string()),
            ("data_dir", self.data_dir.display().to_string()),
            ("seed", self.seed.to_string()),
            ("hours", self.hours.to_string()),
            ("episode_seconds", self.episode_seconds.to_string()),
            ("sample_rate", self.sample_rate.to_string()),
            ("split", join(&self.split)),
            ("model", self.model.to_string()),
            ("window", self.window.to_string()),
            ("horizon", self.horizon.to_string()),
            ("train_stride", self.train_stride.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("lag", self.lag.to_string()),
            ("phase1_epochs", t.phase1_epochs.to_string()),
            ("phase2_epochs", t.phase2_epochs.to_string()),
            ("truncation", t.truncation.to_string()),
            ("learning_rate", t.learning_rate.to_string()),
            ("clip_norm", t.clip_norm.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("patience", t.patience.to_string()),
            ("plateau", t.plateau.to_string()),
            ("thresholds", join(&self.thresholds)),
        ];
        if let Some(s) = self.eval_stride {
            rows.push(("eval_stride", s.to_string()));
        }
        if let Some(p) = &self.checkpoint {
            rows.push(("checkpoint", p.display().to_string()));
        }
        if let Some(p) = &self.manifest {
            rows.push(("manifest", p.display().to_string()));
        }
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Domain(format!("invalid value {v:?} for {key}")))
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(|s| num(key, s.trim())).collect()
}

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are rejected.
pub fn parse_config_text(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim().replace('-', "_");
        if out.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::format(path, format!("line {}: duplicate key {k}", i + 1)));
        }
    }
    Ok(out)
}
