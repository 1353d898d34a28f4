//! 4-DOF (surge, sway, roll, yaw) maneuvering model of a patrol vessel.
//!
//! Conventions: inertial pose `η = [x, y, φ, ψ]`, body velocity `ν = [u, w, p, r]`,
//! z-axis pointing down (so a centre of gravity above the origin has `zg < 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::rk4_step;
use crate::scalar::Scalar;
use crate::sim::sea::{environment_forces, SeaState};

pub type Vec4<S> = [S; 4];
pub type Mat4<S> = [[S; 4]; 4];

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose<S> {
    pub x: S,
    pub y: S,
    pub phi: S,
    pub psi: S,
}

impl<S: Scalar> Pose<S> {
    pub fn to_array(self) -> Vec4<S> {
        [self.x, self.y, self.phi, self.psi]
    }
    pub fn from_array(a: Vec4<S>) -> Self {
        Self { x: a[0], y: a[1], phi: a[2], psi: a[3] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BodyVelocity<S> {
    pub u: S,
    pub w: S,
    pub p: S,
    pub r: S,
}

impl<S: Scalar> BodyVelocity<S> {
    pub fn to_array(self) -> Vec4<S> {
        [self.u, self.w, self.p, self.r]
    }
    pub fn from_array(a: Vec4<S>) -> Self {
        Self { u: a[0], w: a[1], p: a[2], r: a[3] }
    }
}

/// Actuator commands: per-unit propeller revolutions (fraction of max) and rudder angles (rad).
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ShipControl<S> {
    pub revolutions: [S; 2],
    pub rudder: [S; 2],
}

pub const MAX_RUDDER: f64 = 35.0 * std::f64::consts::PI / 180.0;

impl<S: Scalar> ShipControl<S> {
    pub fn clamped(self) -> Self {
        let lim = S::of(MAX_RUDDER);
        Self {
            revolutions: self.revolutions.map(|n| n.max(S::zero()).min(S::one())),
            rudder: self.rudder.map(|d| d.max(-lim).min(lim)),
        }
    }

    /// Column order used in episode files: `c1, c2` revolutions, `c3, c4` rudder angles.
    pub fn to_vec(self) -> Vec<S> {
        vec![self.revolutions[0], self.revolutions[1], self.rudder[0], self.rudder[1]]
    }

    pub fn from_slice(c: &[S]) -> Self {
        Self { revolutions: [c[0], c[1]], rudder: [c[2], c[3]] }
    }
}

/// Mass, inertia, rigid-body Coriolis and hydrostatic roll restoring.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyParams {
    pub mass: f64,
    /// vertical position of the centre of gravity (positive down)
    pub zg: f64,
    /// rigid-body plus added mass, symmetric positive definite
    pub mass_matrix: Mat4<f64>,
    pub mass_inverse: Mat4<f64>,
    /// linearized roll restoring coefficient G₃₃ (N·m/rad)
    pub roll_restoring: f64,
}

impl RigidBodyParams {
    pub fn new(mass: f64, zg: f64, mass_matrix: Mat4<f64>, roll_restoring: f64) -> Result<Self> {
        let mass_inverse = invert_spd4(&mass_matrix)
            .ok_or_else(|| Error::Domain("mass matrix is not symmetric positive definite".into()))?;
        Ok(Self { mass, zg, mass_matrix, mass_inverse, roll_restoring })
    }
}

/// Linear plus diagonal quadratic hydrodynamic damping, `D(ν) = D_l + diag(d_q ⊙ |ν|)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampingParams {
    pub linear: Mat4<f64>,
    pub quadratic: Vec4<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActuatorParams {
    /// bollard thrust per unit at full revolutions (N)
    pub thrust_coeff: f64,
    pub wake_fraction: f64,
    /// advance speed at which thrust vanishes, per unit revolution (m/s)
    pub pitch_speed: f64,
    /// rudder lift per squared inflow speed (N·s²/m²)
    pub rudder_lift: f64,
    /// slipstream contribution to squared rudder inflow per newton of thrust
    pub slipstream: f64,
    /// rudder drag as a fraction of lift·sin δ
    pub rudder_drag: f64,
    /// longitudinal position of the units (negative = aft)
    pub x_unit: f64,
    /// lateral offset of each unit from the centreline (units at ±y)
    pub y_unit: f64,
    /// depth of the rudder centre of effort below the CG
    pub z_rudder: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindParams {
    pub air_density: f64,
    pub frontal_area: f64,
    pub lateral_area: f64,
    /// height of the lateral area centroid above the CG
    pub lateral_height: f64,
    pub length: f64,
    /// C_X(γ) = Σ cx[k]·cos((2k+1)γ)
    pub cx: [f64; 3],
    /// C_Y(γ) = Σ cy[k]·sin((2k+1)γ)
    pub cy: [f64; 3],
    /// C_K(γ) = Σ ck[k]·sin((2k+1)γ)
    pub ck: [f64; 3],
    /// C_N(γ) = Σ cn[k]·sin(2(k+1)γ)
    pub cn: [f64; 3],
}

/// First-order wave force gains per metre of component amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveGains {
    pub surge: f64,
    pub sway: f64,
    pub roll: f64,
    pub yaw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShipTruthParams {
    pub rigid: RigidBodyParams,
    pub damping: DampingParams,
    pub actuators: ActuatorParams,
    pub wind: WindParams,
    pub waves: WaveGains,
}

impl ShipTruthParams {
    /// Committed configuration of a ~50 m, ~360 t patrol vessel.
    pub fn patrol_vessel() -> Self {
        let m = 360e3;
        let zg = -1.0;
        let ixx = 3.4e6;
        let izz = 5.6e7;
        let mass_matrix = [
            [m + 0.05 * m, 0.0, 0.0, 0.0],
            [0.0, m + 0.9 * m, -m * zg, 0.0],
            [0.0, -m * zg, ixx * 1.25, 0.0],
            [0.0, 0.0, 0.0, izz * 1.6],
        ];
        let rigid = RigidBodyParams::new(m, zg, mass_matrix, 2.4e6).expect("committed mass matrix is SPD");
        Self {
            rigid,
            damping: DampingParams {
                linear: [
                    [3.0e3, 0.0, 0.0, 0.0],
                    [0.0, 2.0e5, 0.0, 5.0e5],
                    [0.0, 0.0, 5.3e5, 0.0],
                    [0.0, 5.0e5, 0.0, 1.5e7],
                ],
                quadratic: [1.44e3, 5.0e4, 3.0e5, 2.0e8],
            },
            actuators: ActuatorParams {
                thrust_coeff: 110e3,
                wake_fraction: 0.25,
                pitch_speed: 12.0,
                rudder_lift: 600.0,
                slipstream: 2.3e-4,
                rudder_drag: 0.5,
                x_unit: -22.0,
                y_unit: 2.5,
                z_rudder: 2.5,
            },
            wind: WindParams {
                air_density: 1.225,
                frontal_area: 80.0,
                lateral_area: 300.0,
                lateral_height: 4.0,
                length: 50.0,
                cx: [-0.60, -0.10, 0.05],
                cy: [-0.80, 0.08, -0.02],
                ck: [-0.80, 0.08, -0.02],
                cn: [-0.10, 0.03, -0.01],
            },
            waves: WaveGains { surge: 2.0e4, sway: 8.0e4, roll: 1.0e5, yaw: 8.0e5 },
        }
    }
}

fn invert_spd4(m: &Mat4<f64>) -> Option<Mat4<f64>> {
    for i in 0..4 {
        for j in 0..4 {
            if (m[i][j] - m[j][i]).abs() > 1e-9 * (m[i][i].abs() + m[j][j].abs()) {
                return None;
            }
        }
    }
    let g: Vec<f64> = m.iter().flatten().copied().collect();
    let mut inv = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut e = [0.0; 4];
        e[j] = 1.0;
        let col = crate::linalg::solve_spd(&g, &e, 0.0, 1, 1e14).ok()?;
        for i in 0..4 {
            inv[i][j] = col[i];
        }
    }
    Some(inv)
}

#[inline]
pub(crate) fn mat_vec<S: Scalar>(m: &Mat4<f64>, v: &Vec4<S>) -> Vec4<S> {
    let mut out = [S::zero(); 4];
    for i in 0..4 {
        for j in 0..4 {
            if m[i][j] != 0.0 {
                out[i] += S::of(m[i][j]) * v[j];
            }
        }
    }
    out
}

/// Body-to-inertial velocity map `J(η)`: `ẋ = u cosψ − w cosφ sinψ`, `ẏ = u sinψ + w cosφ cosψ`,
/// `φ̇ = p`, `ψ̇ = r cosφ`.
pub fn rotation_body_to_inertial<S: Scalar>(pose: &Pose<S>) -> Mat4<S> {
    let (sp, cp) = pose.psi.sin_cos();
    let cf = pose.phi.cos();
    let z = S::zero();
    [[cp, -cf * sp, z, z], [sp, cf * cp, z, z], [z, z, S::one(), z], [z, z, z, cf]]
}

#[inline]
pub fn kinematics<S: Scalar>(pose: &Vec4<S>, v: &Vec4<S>) -> Vec4<S> {
    let (sp, cp) = pose[3].sin_cos();
    let cf = pose[2].cos();
    [v[0] * cp - v[1] * cf * sp, v[0] * sp + v[1] * cf * cp, v[2], v[3] * cf]
}

/// Rigid-body Coriolis/centripetal matrix; skew-symmetric, so `νᵀC(ν)ν = 0`.
pub fn coriolis<S: Scalar>(rigid: &RigidBodyParams, v: &Vec4<S>) -> Mat4<S> {
    let m = S::of(rigid.mass);
    let mzr = m * S::of(rigid.zg) * v[3];
    let z = S::zero();
    [[z, z, mzr, -m * v[1]], [z, z, z, m * v[0]], [-mzr, z, z, z], [m * v[1], -m * v[0], z, z]]
}

#[inline]
pub(crate) fn coriolis_force<S: Scalar>(rigid: &RigidBodyParams, v: &Vec4<S>) -> Vec4<S> {
    let c = coriolis(rigid, v);
    let mut out = [S::zero(); 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += c[i][j] * v[j];
        }
    }
    out
}

pub fn damping_matrix<S: Scalar>(d: &DampingParams, v: &Vec4<S>) -> Mat4<S> {
    let mut out = [[S::zero(); 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = S::of(d.linear[i][j]);
        }
        out[i][i] += S::of(d.quadratic[i]) * v[i].abs();
    }
    out
}

#[inline]
pub(crate) fn damping_force<S: Scalar>(d: &DampingParams, v: &Vec4<S>) -> Vec4<S> {
    let mut out = mat_vec(&d.linear, v);
    for i in 0..4 {
        out[i] += S::of(d.quadratic[i]) * v[i].abs() * v[i];
    }
    out
}

#[inline]
pub(crate) fn restoring_force<S: Scalar>(rigid: &RigidBodyParams, phi: S) -> Vec4<S> {
    [S::zero(), S::zero(), S::of(rigid.roll_restoring) * phi, S::zero()]
}

/// `M⁻¹(τ_control + τ_env − D(ν)ν − C_rb(ν)ν − G·η)` with restoring acting on roll only.
pub fn truth_acceleration<S: Scalar>(
    v: &BodyVelocity<S>,
    pose: &Pose<S>,
    tau_control: &Vec4<S>,
    tau_env: &Vec4<S>,
    params: &ShipTruthParams,
) -> Result<Vec4<S>> {
    let a = acceleration(&v.to_array(), pose.phi, tau_control, tau_env, &params.rigid, Some(&params.damping));
    if a.iter().all(|x| x.is_finite()) {
        Ok(a)
    } else {
        Err(Error::Divergence { seed: 0, time: f64::NAN, reason: "non-finite acceleration".into() })
    }
}

#[inline]
pub(crate) fn acceleration<S: Scalar>(
    v: &Vec4<S>,
    phi: S,
    tau_control: &Vec4<S>,
    tau_env: &Vec4<S>,
    rigid: &RigidBodyParams,
    damping: Option<&DampingParams>,
) -> Vec4<S> {
    let c = coriolis_force(rigid, v);
    let g = restoring_force(rigid, phi);
    let mut f = [S::zero(); 4];
    for i in 0..4 {
        f[i] = tau_control[i] + tau_env[i] - c[i] - g[i];
    }
    if let Some(d) = damping {
        let dv = damping_force(d, v);
        for i in 0..4 {
            f[i] -= dv[i];
        }
    }
    mat_vec(&rigid.mass_inverse, &f)
}

/// Forces of the two rudder-propeller units, mapped to `[X, Y, K, N]`.
pub fn propulsion_force<S: Scalar>(control: &ShipControl<S>, v: &BodyVelocity<S>, act: &ActuatorParams) -> Vec4<S> {
    propulsion_force_arr(control, &v.to_array(), act)
}

#[inline]
pub(crate) fn propulsion_force_arr<S: Scalar>(control: &ShipControl<S>, v: &Vec4<S>, act: &ActuatorParams) -> Vec4<S> {
    let u = v[0];
    let eps = S::of(1e-3);
    let mut tau = [S::zero(); 4];
    for unit in 0..2 {
        let n = control.revolutions[unit];
        let delta = control.rudder[unit];
        let thrust = S::of(act.thrust_coeff)
            * n
            * n.abs()
            * (S::one() - S::of(act.wake_fraction) * u / (n * S::of(act.pitch_speed) + eps));
        let inflow_sq = u * u + S::of(act.slipstream) * thrust;
        let sd = delta.sin();
        let lift = S::of(act.rudder_lift) * inflow_sq * sd;
        let drag = S::of(act.rudder_drag) * lift * sd;
        let y_i = if unit == 0 { S::of(act.y_unit) } else { S::of(-act.y_unit) };
        let fx = thrust - drag;
        let fy = lift;
        tau[0] += fx;
        tau[1] += fy;
        tau[2] -= S::of(act.z_rudder) * fy;
        tau[3] += S::of(act.x_unit) * fy - y_i * fx;
    }
    tau
}

/// Combined state `[x, y, φ, ψ, u, w, p, r]`.
pub type ShipState<S> = [S; 8];

pub fn split_state<S: Scalar>(s: &ShipState<S>) -> (Vec4<S>, Vec4<S>) {
    ([s[0], s[1], s[2], s[3]], [s[4], s[5], s[6], s[7]])
}

pub fn join_state<S: Scalar>(pose: &Vec4<S>, v: &Vec4<S>) -> ShipState<S> {
    [pose[0], pose[1], pose[2], pose[3], v[0], v[1], v[2], v[3]]
}

/// Time derivative of the full truth model.
pub fn truth_derivative(
    t: f64,
    s: &ShipState<f64>,
    control: &ShipControl<f64>,
    sea: &SeaState,
    params: &ShipTruthParams,
) -> ShipState<f64> {
    let (eta, v) = split_state(s);
    let tau_c = propulsion_force_arr(control, &v, &params.actuators);
    let tau_e = environment_forces(sea, &Pose::from_array(eta), &BodyVelocity::from_array(v), t, params);
    let a = acceleration(&v, eta[2], &tau_c, &tau_e, &params.rigid, Some(&params.damping));
    join_state(&kinematics(&eta, &v), &a)
}

/// Envelope of the patrol-ship scenario; leaving it is treated as divergence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub max_surge: f64,
    pub max_sway: f64,
    pub max_roll: f64,
}

impl Default for Envelope {
    fn default() -> Self {
        Self { max_surge: 30.0, max_sway: 10.0, max_roll: std::f64::consts::FRAC_PI_2 }
    }
}

impl Envelope {
    pub fn check(&self, s: &ShipState<f64>) -> std::result::Result<(), String> {
        if !s.iter().all(|x| x.is_finite()) {
            return Err("non-finite state".into());
        }
        if s[4].abs() >= self.max_surge {
            return Err(format!("surge {:.2} m/s outside envelope", s[4]));
        }
        if s[5].abs() >= self.max_sway {
            return Err(format!("sway {:.2} m/s outside envelope", s[5]));
        }
        if s[2].abs() >= self.max_roll {
            return Err(format!("roll {:.3} rad: capsized", s[2]));
        }
        Ok(())
    }
}

/// One RK4 step of the coupled kinematics/kinetics; environment evaluated at every stage time.
pub fn rk4_ship_step(
    state: &ShipState<f64>,
    control: &ShipControl<f64>,
    sea: &SeaState,
    t: f64,
    dt: f64,
    params: &ShipTruthParams,
    envelope: &Envelope,
) -> Result<ShipState<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("integrator step must be positive, got {dt}")));
    }
    let next = rk4_step(state, t, dt, |tt, s| truth_derivative(tt, s, control, sea, params));
    envelope.check(&next).map_err(|reason| Error::Divergence { seed: sea.seed, time: t + dt, reason })?;
    Ok(next)
}

/// Kinetic plus roll-restoring potential energy.
pub fn mechanical_energy(s: &ShipState<f64>, rigid: &RigidBodyParams) -> f64 {
    let (eta, v) = split_state(s);
    let mv = mat_vec(&rigid.mass_matrix, &v);
    0.5 * (0..4).map(|i| v[i] * mv[i]).sum::<f64>() + 0.5 * rigid.roll_restoring * eta[2] * eta[2]
}

pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}
