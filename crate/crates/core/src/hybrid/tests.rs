use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::dataset::{extract_all, Episode, Vehicle};
use crate::physical::{FirstPrinciplesKind, FirstPrinciplesModel, RegressionKind, RegressionModel};
use crate::sim::sea::SeaState;
use crate::sim::ship::ShipTruthParams;
use crate::sim::{simulate_ship_episode, simulate_ship_episode_in, ShipScenario};

fn calm_episodes(n: u64, secs: f64) -> Vec<Episode> {
    let p = ShipTruthParams::patrol_vessel();
    (0..n)
        .map(|s| simulate_ship_episode_in(&SeaState::calm(), secs, 1.0, 100 + s, &p, &ShipScenario::default()).unwrap())
        .collect()
}

fn wavy_episodes(n: u64, secs: f64) -> Vec<Episode> {
    let p = ShipTruthParams::patrol_vessel();
    (0..n).map(|s| simulate_ship_episode(secs, 1.0, 200 + s, &p, &ShipScenario::default()).unwrap()).collect()
}

fn physical(fp: FirstPrinciplesKind, reg: RegressionModel) -> PhysicalModel {
    let p = ShipTruthParams::patrol_vessel();
    PhysicalModel::new(FirstPrinciplesModel::ship(fp, &p, 1.0).unwrap(), reg).unwrap()
}

fn random_regression(kind: RegressionKind, lag: usize, scale: f64, seed: u64) -> RegressionModel {
    let mut r = RegressionModel::zeros(kind, Vehicle::Ship, lag).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for w in r.weights.iter_mut().flatten() {
        *w = rng.gen_range(-scale..scale);
    }
    r
}

/// Lin regression with `diag` added on the current-state weights. Standalone, `0.9` makes a
/// contracting predictor; on top of a first-principles part, `-0.1` acts as extra damping.
fn lin_with_diag(seed: u64, diag: f64) -> RegressionModel {
    let mut r = random_regression(RegressionKind::Lin, 1, 0.02, seed);
    for (i, w) in r.weights.iter_mut().enumerate() {
        w[4 + i] += diag;
    }
    r
}

fn stable_lin(seed: u64) -> RegressionModel {
    lin_with_diag(seed, 0.9)
}

fn damping_lin(seed: u64) -> RegressionModel {
    lin_with_diag(seed, -0.1)
}

fn model(phys: PhysicalModel, eps: &[Episode], hidden: usize, window: usize, seed: u64) -> HybridModel<f64> {
    HybridModel::new(phys, Normalizer::fit(eps).unwrap(), hidden, 1, window, seed).unwrap()
}

#[test]
fn zero_corrector_reproduces_physical_rollout_exactly() {
    let eps = wavy_episodes(2, 500.0);
    let mut m = model(physical(FirstPrinciplesKind::Pro, damping_lin(1)), &eps, 6, 20, 3);
    m.zero_corrector();
    for s in extract_all(&eps, 20, 200, 150) {
        let hyb = predict(&m, &s).unwrap().unwrap();
        let phy = rollout_physical(&m.physical, &m.normalizer, &s).unwrap();
        assert_eq!(hyb, phy);
        let r = rollout_free_running(&m, &PreparedSample::new(&m, &s)).unwrap();
        assert_eq!(r.predictions, r.z_phy);
    }
}

#[test]
fn zero_bound_blocks_any_corrector() {
    let eps = wavy_episodes(1, 300.0);
    let mut m = model(physical(FirstPrinciplesKind::Min, damping_lin(2)), &eps, 5, 10, 4);
    m.constraint = OutputConstraint::bounded(vec![0.0; 5]).unwrap();
    let s = &extract_all(&eps, 10, 50, 50)[0];
    let r = rollout_free_running(&m, &PreparedSample::new(&m, s)).unwrap();
    assert_eq!(r.predictions, r.z_phy);
    assert!(r.z_lstm.iter().flatten().all(|x| *x == 0.0));
}

#[test]
fn step_equals_component_composition() {
    let eps = wavy_episodes(1, 300.0);
    let m = model(physical(FirstPrinciplesKind::Pro, damping_lin(3)), &eps, 4, 10, 5);
    let s = &extract_all(&eps, 10, 5, 50)[1];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let h =
        HiddenState { h: vec![(0..4).map(|_| rng.gen_range(-0.5..0.5)).collect()], c: vec![vec![0.1, -0.2, 0.3, 0.0]] };
    let zs = vec![s.initial_state().to_vec()];
    let cs = vec![s.horizon_controls[0].clone()];
    let out = hybrid_step(&m, &zs, &cs, &h).unwrap();

    let z_phy = m.physical.step(&zs, &cs);
    let mut x = m.normalizer.control(&cs[0]);
    x.extend(m.normalizer.state(&z_phy));
    let (hs, _, _) = crate::neural::lstm_forward(&m.corrector.predictor, &[x], &h).unwrap();
    let raw = m.corrector.project(&hs[0]);
    for i in 0..5 {
        let expect = z_phy[i] + m.normalizer.state_std[i] * raw[i];
        assert!((out.z_hat[i] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn teacher_forced_loss_matches_hand_computation() {
    let eps = wavy_episodes(1, 200.0);
    let mut m = model(physical(FirstPrinciplesKind::Min, RegressionModel::none(Vehicle::Ship)), &eps, 3, 5, 6);
    m.zero_corrector();
    let s = &extract_all(&eps, 5, 3, 10)[2];
    let r = rollout_teacher_forced(&m, &PreparedSample::new(&m, s)).unwrap();
    let mut prev = s.initial_state().to_vec();
    let mut acc = 0.0;
    for k in 0..3 {
        let phy = crate::physical::min_step(&prev, &ShipTruthParams::patrol_vessel().rigid, 1.0);
        for i in 0..5 {
            acc += ((s.horizon_states[k][i] - phy[i]) / m.normalizer.state_std[i]).powi(2);
        }
        prev = s.horizon_states[k].clone();
    }
    assert!((r.loss - acc / 15.0).abs() < 1e-12 * (1.0 + acc));
}

#[test]
fn horizon_one_teacher_forced_equals_free_running() {
    let eps = wavy_episodes(1, 300.0);
    let m = model(physical(FirstPrinciplesKind::Pro, damping_lin(7)), &eps, 6, 10, 8);
    for s in extract_all(&eps, 10, 1, 37) {
        let p = PreparedSample::new(&m, &s);
        let tf = rollout(&m, &p, 1, Feedback::TeacherForced, false).unwrap();
        let fr = rollout(&m, &p, 1, Feedback::FreeRunning, false).unwrap();
        assert_eq!(tf.loss, fr.loss);
    }
}

#[test]
fn perfect_physics_tracks_truth_over_the_horizon() {
    let eps = calm_episodes(2, 1200.0);
    let mut m = model(physical(FirstPrinciplesKind::Full, RegressionModel::none(Vehicle::Ship)), &eps, 4, 60, 9);
    m.zero_corrector();
    for s in extract_all(&eps, 60, 900, 900) {
        let pred = predict(&m, &s).unwrap().unwrap();
        for (a, b) in pred.iter().flatten().zip(s.horizon_states.iter().flatten()) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()), "{a} vs {b}");
        }
        let tf = rollout_teacher_forced(&m, &PreparedSample::new(&m, &s)).unwrap();
        assert!(tf.loss < 1e-20);
    }
}

#[test]
fn unstable_linear_physics_is_flagged() {
    let eps = wavy_episodes(1, 400.0);
    let mut lin = RegressionModel::zeros(RegressionKind::Lin, Vehicle::Ship, 1).unwrap();
    for (i, w) in lin.weights.iter_mut().enumerate() {
        w[4 + i] = 1.5;
    }
    let mut m = model(physical(FirstPrinciplesKind::None, lin), &eps, 4, 10, 1);
    m.zero_corrector();
    let s = &extract_all(&eps, 10, 300, 300)[0];
    let r = rollout_free_running(&m, &PreparedSample::new(&m, s)).unwrap();
    let k = r.diverged_at.expect("runaway prediction must be flagged");
    assert!(k < 300);
    assert_eq!(r.loss, f64::INFINITY);
    assert!(predict(&m, s).unwrap().is_none());
}

fn gradient_check(phys: PhysicalModel, feedback: Feedback, constraint: OutputConstraint, seed: u64) -> f64 {
    let eps = wavy_episodes(1, 200.0);
    let mut m = model(phys, &eps, 4, 6, seed);
    m.constraint = constraint;
    let s = &extract_all(&eps, 6, 10, 40)[1];
    let p = PreparedSample::new(&m, s);
    let g = rollout(&m, &p, 10, feedback, true).unwrap().gradients.unwrap();
    let mut worst: f64 = 0.0;
    let n = m.corrector.tensors().len();
    for ti in 0..n {
        for k in 0..m.corrector.tensors()[ti].len() {
            let mut a = m.clone();
            a.corrector.tensors_mut()[ti][k] += 1e-6;
            let mut b = m.clone();
            b.corrector.tensors_mut()[ti][k] -= 1e-6;
            let fd = (rollout(&a, &p, 10, feedback, false).unwrap().loss
                - rollout(&b, &p, 10, feedback, false).unwrap().loss)
                / 2e-6;
            let an = g.tensors()[ti][k];
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-4));
        }
    }
    worst
}

#[test]
fn free_running_gradients_match_finite_differences() {
    let lin = physical(FirstPrinciplesKind::None, stable_lin(11));
    let w = gradient_check(lin.clone(), Feedback::FreeRunning, OutputConstraint::Unconstrained, 1);
    assert!(w < 1e-4, "linear physics: {w:e}");
    let w = gradient_check(lin, Feedback::TeacherForced, OutputConstraint::Unconstrained, 2);
    assert!(w < 1e-4, "teacher forced: {w:e}");
    let mut qlag = random_regression(RegressionKind::QLag, 3, 0.01, 12);
    for (i, w) in qlag.weights.iter_mut().enumerate() {
        w[10 + i] -= 0.5;
    }
    let nonlinear = physical(FirstPrinciplesKind::Pro, qlag);
    let bounded = OutputConstraint::bounded(vec![0.5, 1.0, 2.0, 0.3, f64::INFINITY]).unwrap();
    let w = gradient_check(nonlinear, Feedback::FreeRunning, bounded, 3);
    assert!(w < 1e-4, "Pro+QLag with bound: {w:e}");
}

fn quick_config() -> TrainingConfig {
    TrainingConfig {
        phase1_epochs: 3,
        phase2_epochs: 4,
        truncation: 5,
        batch_size: 4,
        patience: 3,
        plateau: 2,
        ..Default::default()
    }
}

#[test]
fn no_epochs_is_a_no_op() {
    let eps = wavy_episodes(1, 200.0);
    let m = model(physical(FirstPrinciplesKind::Min, damping_lin(1)), &eps, 4, 10, 1);
    let cfg = TrainingConfig { phase1_epochs: 0, phase2_epochs: 0, ..Default::default() };
    let out = train_two_phase(m.clone(), &[], &[], &cfg).unwrap();
    assert_eq!(out.model, m);
    assert!(out.history.is_empty());
}

#[test]
fn perfect_physics_stops_early_at_zero_loss() {
    let eps = calm_episodes(2, 400.0);
    let mut m = model(physical(FirstPrinciplesKind::Full, RegressionModel::none(Vehicle::Ship)), &eps, 4, 10, 2);
    m.zero_corrector();
    let tr = extract_all(&eps[..1], 10, 40, 30);
    let va = extract_all(&eps[1..], 10, 40, 40);
    let cfg =
        TrainingConfig { phase1_epochs: 5, phase2_epochs: 40, truncation: 10, batch_size: 4, ..Default::default() };
    let out = train_two_phase(m.clone(), &tr, &va, &cfg).unwrap();
    assert!(out.best_val_loss < 1e-18);
    assert!(out.history.len() < 45, "early stopping did not trigger");
    assert_eq!(out.model.corrector, m.corrector);
}

#[test]
fn schedules_share_the_free_running_machinery() {
    let eps = wavy_episodes(2, 300.0);
    let m = model(physical(FirstPrinciplesKind::Pro, damping_lin(4)), &eps, 4, 10, 3);
    let tr = extract_all(&eps[..1], 10, 20, 30);
    let va = extract_all(&eps[1..], 10, 20, 60);
    let two = TrainingConfig { phase1_epochs: 0, truncation: 20, ..quick_config() };
    let a = train_two_phase(m.clone(), &tr, &va, &two).unwrap();
    let b = train_one_phase(m, &tr, &va, &TrainingConfig { phase1_epochs: 0, ..quick_config() }).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
}

#[test]
fn training_is_deterministic_and_records_both_phases() {
    let eps = wavy_episodes(2, 300.0);
    let m = model(physical(FirstPrinciplesKind::Min, damping_lin(5)), &eps, 4, 10, 4);
    let tr = extract_all(&eps[..1], 10, 20, 30);
    let va = extract_all(&eps[1..], 10, 20, 60);
    let a = train_two_phase(m.clone(), &tr, &va, &quick_config()).unwrap();
    let b = train_two_phase(m, &tr, &va, &quick_config()).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    assert!(a.history.iter().any(|r| r.phase == Phase::TeacherForced));
    assert!(a.history.iter().any(|r| r.phase == Phase::FreeRunning));
    assert!(a.history.iter().all(|r| r.train_loss.is_finite()));
}

#[test]
fn checkpoint_round_trips_bitwise() {
    let eps = wavy_episodes(1, 200.0);
    let mut m = model(physical(FirstPrinciplesKind::Pro, damping_lin(6)), &eps, 4, 10, 5);
    m.constraint = OutputConstraint::bounded(vec![0.1, f64::INFINITY, 0.0, 1.0 / 3.0, 2.0]).unwrap();
    let ck = Checkpoint::new("Pro+Lin-2P", m, 10, 20, Some(quick_config()), true);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ck.save(&path).unwrap();
    let back = Checkpoint::<f64>::load(&path).unwrap();
    assert_eq!(back, ck);

    let text = std::fs::read_to_string(&path).unwrap().replace(CHECKPOINT_VERSION, "vessel-hybrid-checkpoint/0");
    assert!(matches!(Checkpoint::<f64>::from_json(&text, &path), Err(Error::Version { .. })));
}
