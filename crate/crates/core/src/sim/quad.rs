//! Rigid-body quadcopter ("+" rotor layout, z up) flown by a scripted rate-loop pilot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::scalar::Scalar;

pub type Vec3<S> = [S; 3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadTruthParams {
    pub mass: f64,
    /// diagonal inertia (kg·m²)
    pub inertia: Vec3<f64>,
    pub arm_length: f64,
    /// thrust per rotor at full speed (N); thrust ∝ speed²
    pub thrust_coeff: f64,
    /// reaction torque per rotor at full speed (N·m)
    pub torque_coeff: f64,
    /// linear drag per inertial axis (N·s/m)
    pub drag: Vec3<f64>,
    pub gravity: f64,
}

impl Default for QuadTruthParams {
    fn default() -> Self {
        Self {
            mass: 0.5,
            inertia: [2.3e-3, 2.3e-3, 4.0e-3],
            arm_length: 0.17,
            thrust_coeff: 3.4,
            torque_coeff: 0.068,
            drag: [0.10, 0.10, 0.15],
            gravity: 9.81,
        }
    }
}

impl QuadTruthParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) || self.inertia.iter().any(|i| !(*i > 0.0)) || !(self.thrust_coeff > 0.0) {
            return Err(Error::Domain("quadcopter mass, inertia and thrust coefficient must be positive".into()));
        }
        Ok(())
    }

    /// Rotor speed fraction at which total thrust equals weight.
    pub fn hover_speed(&self) -> f64 {
        (self.mass * self.gravity / (4.0 * self.thrust_coeff)).sqrt()
    }
}

/// `[x, y, z, vx, vy, vz, φ, θ, ψ, p, q, r]`
pub type QuadState = [f64; 12];

/// Angular acceleration of a torque-free rigid body, `I⁻¹(−ω × Iω)`.
#[inline]
pub fn gyroscopic<S: Scalar>(inertia: &Vec3<f64>, w: &Vec3<S>) -> Vec3<S> {
    let i = inertia.map(S::of);
    let iw = [i[0] * w[0], i[1] * w[1], i[2] * w[2]];
    let cross = [w[1] * iw[2] - w[2] * iw[1], w[2] * iw[0] - w[0] * iw[2], w[0] * iw[1] - w[1] * iw[0]];
    [-cross[0] / i[0], -cross[1] / i[1], -cross[2] / i[2]]
}

/// Total thrust and body torques `[T, τx, τy, τz]` for rotor speeds in `[0, 1]`.
pub fn rotor_wrench(rotors: &[f64; 4], p: &QuadTruthParams) -> [f64; 4] {
    let sq = rotors.map(|w| w * w);
    let t = sq.map(|s| p.thrust_coeff * s);
    [
        t.iter().sum(),
        p.arm_length * (t[1] - t[3]),
        p.arm_length * (t[2] - t[0]),
        p.torque_coeff * (-sq[0] + sq[1] - sq[2] + sq[3]),
    ]
}

pub fn quad_derivative(s: &QuadState, rotors: &[f64; 4], p: &QuadTruthParams) -> QuadState {
    let [_, _, _, vx, vy, vz, phi, theta, psi, wp, wq, wr] = *s;
    let [thrust, tx, ty, tz] = rotor_wrench(rotors, p);
    let (sf, cf) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = psi.sin_cos();
    let m = p.mass;
    let ax = (thrust * (cp * st * cf + sp * sf) - p.drag[0] * vx) / m;
    let ay = (thrust * (sp * st * cf - cp * sf) - p.drag[1] * vy) / m;
    let az = (thrust * ct * cf - p.drag[2] * vz) / m - p.gravity;
    let gyro = gyroscopic(&p.inertia, &[wp, wq, wr]);
    let dp = gyro[0] + tx / p.inertia[0];
    let dq = gyro[1] + ty / p.inertia[1];
    let dr = gyro[2] + tz / p.inertia[2];
    let [dphi, dtheta, dpsi] = euler_rates(&[phi, theta, psi], &[wp, wq, wr]);
    [vx, vy, vz, ax, ay, az, dphi, dtheta, dpsi, dp, dq, dr]
}

/// ZYX Euler-angle rates from body rates `[p, q, r]`.
pub fn euler_rates(angles: &Vec3<f64>, w: &Vec3<f64>) -> Vec3<f64> {
    let (sf, cf) = angles[0].sin_cos();
    let (st, ct) = angles[1].sin_cos();
    let s = w[1] * sf + w[2] * cf;
    [w[0] + s * st / ct, w[1] * cf - w[2] * sf, s / ct]
}

/// Settings of the scripted pilot and integrator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadScenario {
    pub max_tilt: f64,
    pub max_yaw_rate: f64,
    pub max_climb: f64,
    pub hold_range: (f64, f64),
    pub substeps: usize,
}

impl Default for QuadScenario {
    fn default() -> Self {
        Self { max_tilt: 0.5, max_yaw_rate: 1.5, max_climb: 1.0, hold_range: (0.2, 1.0), substeps: 4 }
    }
}

/// Attitude/climb setpoints tracked by an angle-P → rate-PD inner loop.
struct Pilot {
    rng: ChaCha8Rng,
    setpoint: [f64; 4],
    next_switch: f64,
    prev_err: Option<[f64; 3]>,
}

impl Pilot {
    fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), setpoint: [0.0; 4], next_switch: 0.0, prev_err: None }
    }

    fn command(&mut self, t: f64, dt: f64, s: &QuadState, p: &QuadTruthParams, sc: &QuadScenario) -> [f64; 4] {
        while t >= self.next_switch {
            self.setpoint = [
                self.rng.gen_range(-sc.max_tilt..=sc.max_tilt),
                self.rng.gen_range(-sc.max_tilt..=sc.max_tilt),
                self.rng.gen_range(-sc.max_yaw_rate..=sc.max_yaw_rate),
                self.rng.gen_range(-sc.max_climb..=sc.max_climb),
            ];
            self.next_switch += self.rng.gen_range(sc.hold_range.0..=sc.hold_range.1);
        }
        let [roll_d, pitch_d, yaw_rate_d, climb_d] = self.setpoint;
        let rate_d = [(6.0 * (roll_d - s[6])).clamp(-4.0, 4.0), (6.0 * (pitch_d - s[7])).clamp(-4.0, 4.0), yaw_rate_d];
        let err = [rate_d[0] - s[9], rate_d[1] - s[10], rate_d[2] - s[11]];
        let derr = match self.prev_err {
            Some(pe) => [(err[0] - pe[0]) / dt, (err[1] - pe[1]) / dt, (err[2] - pe[2]) / dt],
            None => [0.0; 3],
        };
        self.prev_err = Some(err);
        let (kp, kd) = (18.0, 0.4);
        let torque: [f64; 3] = std::array::from_fn(|k| p.inertia[k] * (kp * err[k] + kd * derr[k]));
        let tilt = (s[6].cos() * s[7].cos()).max(0.5);
        let max_total = 4.0 * p.thrust_coeff;
        let thrust = (p.mass * (p.gravity + 2.0 * (climb_d - s[5])) / tilt).clamp(0.15 * max_total, 0.9 * max_total);
        mix(thrust, &torque, p)
    }
}

/// Rotor speeds realizing total thrust and body torques, clipped to `[0, 1]`.
pub fn mix(thrust: f64, torque: &[f64; 3], p: &QuadTruthParams) -> [f64; 4] {
    let kappa = p.torque_coeff / p.thrust_coeff;
    let s24 = 0.5 * (thrust + torque[2] / kappa);
    let s13 = 0.5 * (thrust - torque[2] / kappa);
    let tx = torque[0] / p.arm_length;
    let ty = torque[1] / p.arm_length;
    let t = [0.5 * (s13 - ty), 0.5 * (s24 + tx), 0.5 * (s13 + ty), 0.5 * (s24 - tx)];
    t.map(|ti| (ti / p.thrust_coeff).clamp(0.0, 1.0).sqrt())
}

/// Recorded quadcopter flight at `sample_rate`, plus the sub-step trace when requested.
#[derive(Clone, Debug)]
pub struct QuadRun {
    pub states: Vec<QuadState>,
    pub controls: Vec<[f64; 4]>,
    pub trace: Vec<(f64, QuadState)>,
}

fn check(s: &QuadState, t: f64, seed: u64) -> Result<()> {
    if !s.iter().all(|x| x.is_finite()) || s[6].abs() > 1.4 || s[7].abs() > 1.4 {
        return Err(Error::Divergence { seed, time: t, reason: "quadcopter attitude/state out of envelope".into() });
    }
    Ok(())
}

/// Integrates with RK4 (`substeps` per sample), the controller choosing rotor speeds at each
/// sample from the current state; rotor speeds are held constant in between.
pub fn fly_quad(
    initial: QuadState,
    n_samples: usize,
    dt: f64,
    seed: u64,
    params: &QuadTruthParams,
    scenario: &QuadScenario,
    mut controller: impl FnMut(f64, &QuadState) -> [f64; 4],
    keep_trace: bool,
) -> Result<QuadRun> {
    params.validate()?;
    let h = dt / scenario.substeps as f64;
    let mut s = initial;
    let mut run = QuadRun { states: Vec::with_capacity(n_samples + 1), controls: Vec::new(), trace: Vec::new() };
    for i in 0..=n_samples {
        let t = i as f64 * dt;
        let c = controller(t, &s).map(|w| w.clamp(0.0, 1.0));
        run.states.push(s);
        run.controls.push(c);
        if i == n_samples {
            break;
        }
        if keep_trace {
            run.trace.push((t, s));
        }
        for k in 0..scenario.substeps {
            s = rk4_step(&s, 0.0, h, |_, x| quad_derivative(x, &c, params));
            if keep_trace && k + 1 < scenario.substeps {
                run.trace.push((t + (k + 1) as f64 * h, s));
            }
        }
        check(&s, t + dt, seed)?;
    }
    if keep_trace {
        run.trace.push((n_samples as f64 * dt, s));
    }
    Ok(run)
}

pub fn simulate_quad_flight(
    duration: f64,
    sample_rate: f64,
    seed: u64,
    params: &QuadTruthParams,
    scenario: &QuadScenario,
    keep_trace: bool,
) -> Result<QuadRun> {
    if !(duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::Domain("duration and sample rate must be positive".into()));
    }
    let dt = 1.0 / sample_rate;
    let n = (duration * sample_rate).round() as usize;
    let mut pilot = Pilot::new(seed);
    let mut initial = [0.0; 12];
    initial[2] = 10.0;
    fly_quad(initial, n, dt, seed, params, scenario, |t, s| pilot.command(t, dt, s, params, scenario), keep_trace)
}
