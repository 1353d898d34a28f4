use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cli::config::ExperimentConfig;
use crate::cli::model_spec::{ModelSpec, TrainingSchedule};
use crate::dataset::{extract_all, split_dataset, DatasetDir, Episode, Normalizer, Vehicle, SPLIT_NAMES};
use crate::error::{Error, Result};
use crate::eval::{
    constraint_in_state_units, evaluate_model, evaluate_physical, per_minute_csv, relative_threshold, report_csv,
    sweep_csv, threshold_sweep, EvalSummary, Evaluation, PhysicalOutputRange, RelativeThreshold, SweepRow,
};
use crate::hybrid::{history_csv, train_one_phase, train_two_phase, Checkpoint, EpochRecord, HybridModel};
use crate::physical::{fit_regression, FirstPrinciplesModel, PhysicalModel, RegressionKind, RegressionModel};
use crate::sim::quad::{QuadScenario, QuadTruthParams};
use crate::sim::ship::ShipTruthParams;
use crate::sim::{simulate_quad_episode, simulate_ship_episode, ShipScenario};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn episode_count(cfg: &ExperimentConfig) -> usize {
    (cfg.hours * 3600.0 / cfg.episode_seconds - 1e-9).ceil().max(1.0) as usize
}

/// Seed of the `i`-th episode of a dataset generated with `seed`.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(1_000_003).wrapping_add(i as u64)
}

/// Generates the configured episodes in memory. Any divergence fails the whole run, listing seeds.
pub fn simulate_episodes(cfg: &ExperimentConfig) -> Result<Vec<Episode>> {
    let n = episode_count(cfg);
    let mut episodes = Vec::with_capacity(n);
    let mut failed = Vec::new();
    for i in 0..n {
        let seed = episode_seed(cfg.seed, i);
        let ep = match cfg.vehicle {
            Vehicle::Ship => simulate_ship_episode(
                cfg.episode_seconds,
                cfg.sample_rate,
                seed,
                &ShipTruthParams::patrol_vessel(),
                &ShipScenario::default(),
            ),
            Vehicle::Quad => simulate_quad_episode(
                cfg.episode_seconds,
                cfg.sample_rate,
                seed,
                &QuadTruthParams::default(),
                &QuadScenario::default(),
            ),
        };
        match ep {
            Ok(e) => episodes.push(e),
            Err(Error::Divergence { seed, time, reason }) => failed.push(format!("{seed} (t = {time:.1} s: {reason})")),
            Err(e) => return Err(e),
        }
    }
    if !failed.is_empty() {
        return Err(Error::Divergence {
            seed: cfg.seed,
            time: 0.0,
            reason: format!("{} episode(s) diverged, seeds: {}", failed.len(), failed.join("; ")),
        });
    }
    Ok(episodes)
}

/// Writes episodes and split manifests to `cfg.data_dir`.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<String> {
    let episodes = simulate_episodes(cfg)?;
    let names: Vec<String> = (0..episodes.len()).map(DatasetDir::episode_file_name).collect();
    let (train, val, test) = split_dataset(names.clone(), cfg.split, cfg.seed)?;
    let dir = DatasetDir::new(&cfg.data_dir);
    fs::create_dir_all(&dir.root).map_err(|e| Error::io(&dir.root, e))?;
    for (ep, name) in episodes.iter().zip(&names) {
        ep.write(&dir.root.join(name))?;
    }
    for (split, files) in SPLIT_NAMES.iter().zip([&train, &val, &test]) {
        dir.write_manifest(split, files)?;
    }
    write(&dir.root.join("config.txt"), &cfg.to_text())?;
    Ok(format!(
        "simulated {} {} episode(s), 0 diverged; split train/val/test = {}/{}/{} in {}",
        episodes.len(),
        cfg.vehicle.as_str(),
        train.len(),
        val.len(),
        test.len(),
        dir.root.display()
    ))
}

/// First-principles part for `spec` plus, if requested, a regression part fitted on its residual.
pub fn build_physical(
    spec: &ModelSpec,
    vehicle: Vehicle,
    dt: f64,
    lag: usize,
    train: &[Episode],
) -> Result<PhysicalModel> {
    spec.check_vehicle(vehicle)?;
    let fp = match vehicle {
        Vehicle::Ship => FirstPrinciplesModel::ship(spec.first_principles, &ShipTruthParams::patrol_vessel(), dt)?,
        Vehicle::Quad => FirstPrinciplesModel::quad(spec.first_principles, &QuadTruthParams::default(), dt)?,
    };
    let reg = match spec.regression {
        RegressionKind::None => RegressionModel::none(vehicle),
        kind => fit_regression(kind, lag, &fp, train)?,
    };
    PhysicalModel::new(fp, reg)
}

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub checkpoint: Checkpoint<f64>,
    pub history: Vec<EpochRecord>,
    pub aborted: Option<String>,
    pub best_val_loss: f64,
}

fn check_vehicle(eps: &[Episode], vehicle: Vehicle) -> Result<f64> {
    let first = eps.first().ok_or_else(|| Error::Degenerate("no episodes".into()))?;
    if eps.iter().any(|e| e.vehicle != vehicle) {
        return Err(Error::Domain(format!("dataset is not a {} dataset", vehicle.as_str())));
    }
    if eps.iter().any(|e| e.dt != first.dt) {
        return Err(Error::Format {
            path: PathBuf::from("<dataset>"),
            msg: "episodes have different sample intervals".into(),
        });
    }
    Ok(first.dt)
}

/// Fits the physical part, then trains the corrector according to the model's schedule.
pub fn train_experiment(cfg: &ExperimentConfig, train: &[Episode], val: &[Episode]) -> Result<TrainedModel> {
    let dt = check_vehicle(train, cfg.vehicle)?;
    check_vehicle(val, cfg.vehicle)?;
    let normalizer = Normalizer::fit(train)?;
    let physical = build_physical(&cfg.model, cfg.vehicle, dt, cfg.lag, train)?;
    let model = HybridModel::new(physical, normalizer, cfg.hidden, cfg.layers, cfg.window, cfg.seed)?;
    let train_samples = extract_all(train, cfg.window, cfg.horizon, cfg.train_stride);
    let val_samples = extract_all(val, cfg.window, cfg.horizon, cfg.eval_stride.unwrap_or(cfg.horizon));
    let name = cfg.model.to_string();
    let o = match cfg.model.training {
        TrainingSchedule::TwoPhase => train_two_phase(model, &train_samples, &val_samples, &cfg.training)?,
        TrainingSchedule::OnePhase => train_one_phase(model, &train_samples, &val_samples, &cfg.training)?,
        TrainingSchedule::None => {
            let mut m = model;
            m.zero_corrector();
            let ck = Checkpoint::new(&name, m, cfg.window, cfg.horizon, None, false);
            return Ok(TrainedModel { checkpoint: ck, history: vec![], aborted: None, best_val_loss: f64::NAN });
        }
    };
    let ck = Checkpoint::new(&name, o.model, cfg.window, cfg.horizon, Some(cfg.training.clone()), true);
    Ok(TrainedModel { checkpoint: ck, history: o.history, aborted: o.aborted, best_val_loss: o.best_val_loss })
}

/// Scores a checkpoint on `episodes` with non-overlapping (or `stride`-spaced) samples.
pub fn evaluate_checkpoint(ck: &Checkpoint<f64>, episodes: &[Episode], stride: Option<usize>) -> Result<Evaluation> {
    let dt = check_vehicle(episodes, ck.model.physical.vehicle())?;
    let samples = extract_all(episodes, ck.window, ck.horizon, stride.unwrap_or(ck.horizon));
    if samples.is_empty() {
        return Err(Error::Degenerate("episodes are too short for a single prediction sample".into()));
    }
    if ck.use_corrector {
        evaluate_model(&ck.model, &samples, dt)
    } else {
        evaluate_physical(&ck.model.physical, &ck.model.normalizer, &samples, dt)
    }
}

pub fn run_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.join(cfg.model.to_string())
}

fn checkpoint_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.checkpoint.clone().unwrap_or_else(|| run_dir(cfg).join(CHECKPOINT_FILE))
}

#[derive(Serialize, Deserialize)]
struct TrainingSummary {
    model: String,
    epochs: usize,
    best_val_loss: f64,
    aborted: Option<String>,
    parameters: usize,
}

/// Writes checkpoint, history, config and a training summary to `<out_dir>/<model>/`.
/// An aborted run still writes everything, then reports the divergence.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<String> {
    let dir = DatasetDir::new(&cfg.data_dir);
    let train = dir.load_split("train")?;
    let val = dir.load_split("val")?;
    let t = train_experiment(cfg, &train, &val)?;
    let out = run_dir(cfg);
    let path = cfg.checkpoint.clone().unwrap_or_else(|| out.join(CHECKPOINT_FILE));
    write(&path, &t.checkpoint.to_json()?)?;
    let mut hist = history_csv(&t.history);
    if let Some(a) = &t.aborted {
        hist.push_str(&format!("# aborted: {a}\n"));
    }
    write(&out.join("history.csv"), &hist)?;
    write(&out.join("config.txt"), &cfg.to_text())?;
    let summary = TrainingSummary {
        model: t.checkpoint.model_name.clone(),
        epochs: t.history.len(),
        best_val_loss: t.best_val_loss,
        aborted: t.aborted.clone(),
        parameters: t.checkpoint.model.corrector.parameter_count(),
    };
    write(&out.join("training.json"), &json(&summary)?)?;
    if let Some(a) = t.aborted {
        return Err(Error::TrainingDiverged(a));
    }
    if t.history.is_empty() {
        return Ok(format!(
            "fitted {} (no corrector training); checkpoint {}",
            t.checkpoint.model_name,
            path.display()
        ));
    }
    Ok(format!(
        "trained {} for {} epoch(s), best validation loss {:.6e}; checkpoint {}",
        t.checkpoint.model_name,
        t.history.len(),
        t.best_val_loss,
        path.display()
    ))
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Domain(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn output_range(ck: &Checkpoint<f64>, cfg: &ExperimentConfig) -> Result<PhysicalOutputRange> {
    let dir = DatasetDir::new(&cfg.data_dir);
    let mut eps = dir.load_split("train")?;
    eps.extend(dir.load_split("val")?);
    PhysicalOutputRange::fit(&ck.model.physical, &eps)
}

/// Writes `report.csv`, `per_minute.csv` and `summary.json` next to the checkpoint.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<String> {
    let path = checkpoint_path(cfg);
    let ck = Checkpoint::<f64>::load(&path)?;
    let manifest = cfg.manifest.clone().unwrap_or_else(|| DatasetDir::new(&cfg.data_dir).manifest_path("test"));
    let episodes = DatasetDir::load_manifest(&manifest)?;
    if episodes.is_empty() {
        return Err(Error::Domain(format!("manifest {} lists no episodes", manifest.display())));
    }
    let eval = evaluate_checkpoint(&ck, &episodes, cfg.eval_stride)?;
    let threshold: Option<RelativeThreshold> = if ck.use_corrector && ck.model.constraint.bounds().is_some() {
        let range = output_range(&ck, cfg)?;
        Some(relative_threshold(&range, &constraint_in_state_units(&ck.model.constraint, &ck.model.normalizer))?)
    } else {
        None
    };
    let out = path.parent().map(Path::to_path_buf).unwrap_or_default();
    write(&out.join("report.csv"), &report_csv(&eval, threshold.as_ref()))?;
    write(&out.join("per_minute.csv"), &per_minute_csv(&eval))?;
    let summary = EvalSummary::new(&ck.model_name, &eval, &ck.model.normalizer.state_std, threshold.as_ref());
    write(&out.join("summary.json"), &json(&summary)?)?;
    Ok(format!(
        "{}: trajectory error {:.3} ± {:.3} m over {} sample(s), {} diverged; reports in {}",
        ck.model_name,
        eval.trajectory.mean,
        eval.trajectory.ci95,
        eval.samples,
        eval.diverged,
        out.display()
    ))
}

/// Relative-threshold sweep of a trained checkpoint; writes `sweep.csv` and `range.json`.
pub fn sweep_experiment(ck: &Checkpoint<f64>, cfg: &ExperimentConfig) -> Result<(PhysicalOutputRange, Vec<SweepRow>)> {
    if !ck.use_corrector {
        return Err(Error::Domain(format!("{} has no trained corrector to constrain", ck.model_name)));
    }
    let dir = DatasetDir::new(&cfg.data_dir);
    let train = dir.load_split("train")?;
    let val = dir.load_split("val")?;
    let test = dir.load_split("test")?;
    let dt = check_vehicle(&test, ck.model.physical.vehicle())?;
    let mut both = train.clone();
    both.extend(val.iter().cloned());
    let range = PhysicalOutputRange::fit(&ck.model.physical, &both)?;
    let stride = cfg.eval_stride.unwrap_or(ck.horizon);
    let tr = extract_all(&train, ck.window, ck.horizon, cfg.train_stride);
    let va = extract_all(&val, ck.window, ck.horizon, stride);
    let te = extract_all(&test, ck.window, ck.horizon, stride);
    let training = ck.training.clone().unwrap_or_else(|| cfg.training.clone());
    let rows = threshold_sweep(&ck.model, &range, &cfg.thresholds, &tr, &va, &te, dt, &training)?;
    Ok((range, rows))
}

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<String> {
    let path = checkpoint_path(cfg);
    let ck = Checkpoint::<f64>::load(&path)?;
    let (range, rows) = sweep_experiment(&ck, cfg)?;
    let out = path.parent().map(Path::to_path_buf).unwrap_or_default();
    write(&out.join("sweep.csv"), &sweep_csv(&rows))?;
    write(&out.join("range.json"), &json(&range)?)?;
    Ok(format!("{}: {} sweep row(s) written to {}", ck.model_name, rows.len(), out.join("sweep.csv").display()))
}
