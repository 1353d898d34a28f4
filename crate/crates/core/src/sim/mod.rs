//! Ground-truth simulators: a 4-DOF patrol ship in wind and waves, and a quadcopter.

pub mod operator;
pub mod quad;
pub mod sea;
pub mod ship;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Episode, Vehicle};
use crate::error::{Error, Result};
use quad::{simulate_quad_flight, QuadScenario, QuadTruthParams};
use sea::{SeaScenario, SeaState};
use ship::{
    join_state, rk4_ship_step, truth_derivative, wrap_angle, Envelope, ShipControl, ShipState, ShipTruthParams,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShipScenario {
    pub sea: SeaScenario,
    /// RK4 step (s)
    pub internal_dt: f64,
    pub initial_surge: (f64, f64),
    pub envelope: Envelope,
}

impl Default for ShipScenario {
    fn default() -> Self {
        Self { sea: SeaScenario::default(), internal_dt: 0.1, initial_surge: (2.0, 8.0), envelope: Envelope::default() }
    }
}

/// Sub-step record used for kinematic replay: time, state and its derivative.
#[derive(Clone, Debug)]
pub struct SubStep {
    pub t: f64,
    pub state: ShipState<f64>,
    pub derivative: ShipState<f64>,
}

#[derive(Clone, Debug)]
pub struct ShipRun {
    /// state at every sample time (unwrapped heading)
    pub states: Vec<ShipState<f64>>,
    pub trace: Vec<SubStep>,
}

/// Integrates the truth model under zero-order-hold controls (one per sample).
pub fn simulate_ship(
    initial: ShipState<f64>,
    controls: &[ShipControl<f64>],
    sea: &SeaState,
    sample_dt: f64,
    internal_dt: f64,
    params: &ShipTruthParams,
    envelope: &Envelope,
    keep_trace: bool,
) -> Result<ShipRun> {
    let ratio = sample_dt / internal_dt;
    let substeps = ratio.round() as usize;
    if substeps == 0 || (ratio - substeps as f64).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "sample interval {sample_dt} s is not a multiple of the integrator step {internal_dt} s"
        )));
    }
    let mut s = initial;
    let mut run = ShipRun { states: Vec::with_capacity(controls.len()), trace: Vec::new() };
    run.states.push(s);
    for (i, c) in controls.iter().enumerate().take(controls.len().saturating_sub(1)) {
        let c = c.clamped();
        let t0 = i as f64 * sample_dt;
        for k in 0..substeps {
            let t = t0 + k as f64 * internal_dt;
            if keep_trace {
                run.trace.push(SubStep { t, state: s, derivative: truth_derivative(t, &s, &c, sea, params) });
            }
            s = rk4_ship_step(&s, &c, sea, t, internal_dt, params, envelope)?;
        }
        if keep_trace {
            let t = t0 + sample_dt;
            run.trace.push(SubStep { t, state: s, derivative: truth_derivative(t, &s, &c, sea, params) });
        }
        run.states.push(s);
    }
    Ok(run)
}

/// One hour-style episode: random sea state, operator controls, RK4 at `internal_dt`,
/// recorded at `sample_rate` (`duration·rate` samples plus the initial state).
pub fn simulate_ship_episode(
    duration: f64,
    sample_rate: f64,
    seed: u64,
    params: &ShipTruthParams,
    scenario: &ShipScenario,
) -> Result<Episode> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::Domain("duration and sample rate must be positive".into()));
    }
    let sea = SeaState::random(&scenario.sea, seed)?;
    simulate_ship_episode_in(&sea, duration, sample_rate, seed, params, scenario)
}

/// As [`simulate_ship_episode`] but in a given sea state (e.g. [`SeaState::calm`]).
pub fn simulate_ship_episode_in(
    sea: &SeaState,
    duration: f64,
    sample_rate: f64,
    seed: u64,
    params: &ShipTruthParams,
    scenario: &ShipScenario,
) -> Result<Episode> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::Domain("duration and sample rate must be positive".into()));
    }
    let sample_dt = 1.0 / sample_rate;
    let controls = operator::operator_controls(duration, sample_dt, seed.wrapping_add(0x0C0_47A1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let u0 = rng.gen_range(scenario.initial_surge.0..=scenario.initial_surge.1);
    let psi0 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let initial = join_state(&[0.0, 0.0, 0.0, psi0], &[u0, 0.0, 0.0, 0.0]);
    let run =
        simulate_ship(initial, &controls, sea, sample_dt, scenario.internal_dt, params, &scenario.envelope, false)?;
    Ok(ship_episode_from_run(&run, &controls, sample_dt, seed))
}

pub fn ship_episode_from_run(run: &ShipRun, controls: &[ShipControl<f64>], dt: f64, seed: u64) -> Episode {
    let states = run.states.iter().map(|s| vec![s[4], s[5], s[6], s[7], s[2]]).collect();
    let poses = run.states.iter().map(|s| vec![s[0], s[1], s[2], wrap_angle(s[3])]).collect();
    let controls = controls.iter().take(run.states.len()).map(|c| c.to_vec()).collect();
    Episode { vehicle: Vehicle::Ship, seed, dt, states, controls, poses }
}

pub fn simulate_quad_episode(
    duration: f64,
    sample_rate: f64,
    seed: u64,
    params: &QuadTruthParams,
    scenario: &QuadScenario,
) -> Result<Episode> {
    let run = simulate_quad_flight(duration, sample_rate, seed, params, scenario, false)?;
    Ok(Episode {
        vehicle: Vehicle::Quad,
        seed,
        dt: 1.0 / sample_rate,
        states: run.states.iter().map(|s| vec![s[3], s[4], s[5], s[9], s[10], s[11]]).collect(),
        poses: run.states.iter().map(|s| vec![s[0], s[1], s[2], s[6], s[7], wrap_angle(s[8])]).collect(),
        controls: run.controls.iter().map(|c| c.to_vec()).collect(),
    })
}
