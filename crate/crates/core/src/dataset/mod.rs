//! Episode persistence, splitting, normalization and sample extraction.

mod episode;

pub use episode::{fmt_sig9, Episode, Vehicle};

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Episode counts per split by largest-remainder apportionment; ties go to the
/// earlier split (train before val before test).
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| *r < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("split ratios must be nonnegative and sum to 1, got {ratios:?}")));
    }
    let exact = ratios.map(|r| r * n as f64);
    let mut counts = exact.map(|e| (e + 1e-9).floor() as usize);
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // fractional parts rounded to suppress representation noise (0.6·96 = 57.599…)
    let frac = |i: usize| ((exact[i] - counts[i] as f64) * 1e9).round() as i64;
    order.sort_by(|&a, &b| frac(b).cmp(&frac(a)).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            counts[i] += 1;
            rest -= 1;
        }
    }
    let required = ratios.iter().filter(|r| **r > 0.0).count();
    if (0..3).any(|i| ratios[i] > 0.0 && counts[i] == 0) {
        return Err(Error::TooFewEpisodes { available: n, required });
    }
    Ok(counts)
}

/// Seeded shuffle, then partition at episode granularity.
pub fn split_dataset<T>(items: Vec<T>, ratios: [f64; 3], seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let [n_train, n_val, _] = split_counts(items.len(), ratios)?;
    let mut items = items;
    items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut it = items.into_iter();
    let train: Vec<T> = it.by_ref().take(n_train).collect();
    let val: Vec<T> = it.by_ref().take(n_val).collect();
    let test: Vec<T> = it.collect();
    Ok((train, val, test))
}

/// Initialization window plus prediction horizon cut from one episode.
///
/// With window start `s`: the window covers rows `s..s+W`; the prediction starts
/// from the last window row (`initial_state`, `initial_pose`) and covers rows
/// `s+W..s+W+H`, driven by controls `s+W-1..s+W+H-1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSample {
    pub episode_seed: u64,
    pub start: usize,
    pub window_states: Vec<Vec<f64>>,
    pub window_controls: Vec<Vec<f64>>,
    pub horizon_controls: Vec<Vec<f64>>,
    pub horizon_states: Vec<Vec<f64>>,
    pub horizon_poses: Vec<Vec<f64>>,
    pub initial_pose: Vec<f64>,
}

impl PredictionSample {
    pub fn initial_state(&self) -> &[f64] {
        self.window_states.last().expect("window is non-empty")
    }

    pub fn horizon(&self) -> usize {
        self.horizon_states.len()
    }

    /// First `steps` steps of the horizon.
    pub fn truncated(&self, steps: usize) -> PredictionSample {
        let h = steps.min(self.horizon());
        PredictionSample {
            horizon_controls: self.horizon_controls[..h].to_vec(),
            horizon_states: self.horizon_states[..h].to_vec(),
            horizon_poses: self.horizon_poses[..h].to_vec(),
            ..self.clone()
        }
    }
}

pub fn sample_count(len: usize, window: usize, horizon: usize, stride: usize) -> usize {
    if window + horizon > len || stride == 0 {
        0
    } else {
        (len - window - horizon) / stride + 1
    }
}

/// Sliding (W, H) samples at the given stride; an episode that is too short yields none.
pub fn extract_samples(ep: &Episode, window: usize, horizon: usize, stride: usize) -> Vec<PredictionSample> {
    assert!(window >= 1 && horizon >= 1 && stride >= 1, "window, horizon and stride must be ≥ 1");
    let n = sample_count(ep.len(), window, horizon, stride);
    (0..n)
        .map(|k| {
            let s = k * stride;
            let w_end = s + window;
            PredictionSample {
                episode_seed: ep.seed,
                start: s,
                window_states: ep.states[s..w_end].to_vec(),
                window_controls: ep.controls[s..w_end].to_vec(),
                horizon_controls: ep.controls[w_end - 1..w_end - 1 + horizon].to_vec(),
                horizon_states: ep.states[w_end..w_end + horizon].to_vec(),
                horizon_poses: ep.poses[w_end..w_end + horizon].to_vec(),
                initial_pose: ep.poses[w_end - 1].clone(),
            }
        })
        .collect()
}

pub fn extract_all(eps: &[Episode], window: usize, horizon: usize, stride: usize) -> Vec<PredictionSample> {
    eps.iter().flat_map(|e| extract_samples(e, window, horizon, stride)).collect()
}

/// Per-dimension z-score statistics of states and controls (training split only).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub state_mean: Vec<f64>,
    pub state_std: Vec<f64>,
    pub control_mean: Vec<f64>,
    pub control_std: Vec<f64>,
}

fn moments(rows: &mut dyn Iterator<Item = &Vec<f64>>, what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows: Vec<&Vec<f64>> = rows.collect();
    if rows.is_empty() {
        return Err(Error::Degenerate(format!("no {what} rows to normalize")));
    }
    let d = rows[0].len();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in &rows {
        for k in 0..d {
            mean[k] += r[k];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in &rows {
        for k in 0..d {
            var[k] += (r[k] - mean[k]).powi(2);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    if let Some(k) = std.iter().position(|s| !(*s > 1e-12 * (1.0 + mean.iter().map(|m| m.abs()).fold(0.0, f64::max)))) {
        return Err(Error::Degenerate(format!("{what} dimension {k} has zero variance")));
    }
    Ok((mean, std))
}

impl Normalizer {
    pub fn fit(train: &[Episode]) -> Result<Self> {
        let (state_mean, state_std) = moments(&mut train.iter().flat_map(|e| e.states.iter()), "state")?;
        let (control_mean, control_std) = moments(&mut train.iter().flat_map(|e| e.controls.iter()), "control")?;
        Ok(Self { state_mean, state_std, control_mean, control_std })
    }

    pub fn state(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.state_mean).zip(&self.state_std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn state_inv(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.state_mean).zip(&self.state_std).map(|((x, m), s)| x * s + m).collect()
    }

    pub fn control(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.control_mean).zip(&self.control_std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn control_inv(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.control_mean).zip(&self.control_std).map(|((x, m), s)| x * s + m).collect()
    }

    /// Normalizes every state and control row of a sample (poses untouched).
    pub fn apply(&self, s: &PredictionSample) -> PredictionSample {
        PredictionSample {
            window_states: s.window_states.iter().map(|z| self.state(z)).collect(),
            window_controls: s.window_controls.iter().map(|c| self.control(c)).collect(),
            horizon_controls: s.horizon_controls.iter().map(|c| self.control(c)).collect(),
            horizon_states: s.horizon_states.iter().map(|z| self.state(z)).collect(),
            ..s.clone()
        }
    }

    pub fn invert(&self, s: &PredictionSample) -> PredictionSample {
        PredictionSample {
            window_states: s.window_states.iter().map(|z| self.state_inv(z)).collect(),
            window_controls: s.window_controls.iter().map(|c| self.control_inv(c)).collect(),
            horizon_controls: s.horizon_controls.iter().map(|c| self.control_inv(c)).collect(),
            horizon_states: s.horizon_states.iter().map(|z| self.state_inv(z)).collect(),
            ..s.clone()
        }
    }
}

/// On-disk dataset: one CSV per episode plus `train.txt` / `val.txt` / `test.txt` manifests.
#[derive(Clone, Debug)]
pub struct DatasetDir {
    pub root: PathBuf,
}

impl DatasetDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn episode_file_name(index: usize) -> String {
        format!("episode_{index:04}.csv")
    }

    pub fn manifest_path(&self, split: &str) -> PathBuf {
        self.root.join(format!("{split}.txt"))
    }

    pub fn write_manifest(&self, split: &str, files: &[String]) -> Result<()> {
        let path = self.manifest_path(split);
        let mut text = files.join("\n");
        if !text.is_empty() {
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(|l| dir.join(l)).collect())
    }

    pub fn load_split(&self, split: &str) -> Result<Vec<Episode>> {
        Self::load_manifest(&self.manifest_path(split))
    }

    pub fn load_manifest(path: &Path) -> Result<Vec<Episode>> {
        Self::read_manifest(path)?.iter().map(|p| Episode::read(p)).collect()
    }
}
