//! Discrete one-step physical predictors: reduced first-principles models and
//! regression models fitted on their residual.

mod regression;

pub use regression::{
    fit_regression, hyd_terms, regression_features, RegressionKind, RegressionModel, DEFAULT_LAG, MAX_CONDITION, RIDGE,
};

use serde::{Deserialize, Serialize};

use crate::dataset::Vehicle;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ode::rk4_integrate;
use crate::scalar::Scalar;
use crate::sim::quad::{gyroscopic, QuadTruthParams, Vec3};
use crate::sim::sea::{wind_forces, SeaState};
use crate::sim::ship::{
    acceleration, propulsion_force_arr, ActuatorParams, BodyVelocity, DampingParams, Pose, RigidBodyParams,
    ShipControl, ShipTruthParams, WindParams,
};

pub const DEFAULT_SUBSTEPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FirstPrinciplesKind {
    None,
    Min,
    Pro,
    MinQ,
    /// Ship truth dynamics in still air and calm water.
    Full,
}

impl FirstPrinciplesKind {
    pub fn name(self) -> &'static str {
        match self {
            FirstPrinciplesKind::None => "None",
            FirstPrinciplesKind::Min => "Min",
            FirstPrinciplesKind::Pro => "Pro",
            FirstPrinciplesKind::MinQ => "MinQ",
            FirstPrinciplesKind::Full => "Full",
        }
    }
}

/// Parameter sets of the first-principles variants. `Min` and `Pro` carry no damping and no
/// environment parameters at all.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FirstPrinciples {
    None,
    Min { rigid: RigidBodyParams },
    Pro { rigid: RigidBodyParams, actuators: ActuatorParams },
    MinQ { inertia: Vec3<f64>, gravity: f64 },
    Full { rigid: RigidBodyParams, damping: DampingParams, actuators: ActuatorParams, wind: WindParams },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirstPrinciplesModel {
    pub vehicle: Vehicle,
    pub part: FirstPrinciples,
    /// prediction interval (s)
    pub dt: f64,
    pub substeps: usize,
}

impl FirstPrinciplesModel {
    pub fn none(vehicle: Vehicle, dt: f64) -> Self {
        Self { vehicle, part: FirstPrinciples::None, dt, substeps: DEFAULT_SUBSTEPS }
    }

    pub fn ship(kind: FirstPrinciplesKind, truth: &ShipTruthParams, dt: f64) -> Result<Self> {
        let rigid = truth.rigid.clone();
        let part = match kind {
            FirstPrinciplesKind::None => FirstPrinciples::None,
            FirstPrinciplesKind::Min => FirstPrinciples::Min { rigid },
            FirstPrinciplesKind::Pro => FirstPrinciples::Pro { rigid, actuators: truth.actuators.clone() },
            FirstPrinciplesKind::Full => FirstPrinciples::Full {
                rigid,
                damping: truth.damping.clone(),
                actuators: truth.actuators.clone(),
                wind: truth.wind.clone(),
            },
            FirstPrinciplesKind::MinQ => return Err(Error::Domain("MinQ is a quadcopter model".into())),
        };
        Self::checked(Vehicle::Ship, part, dt)
    }

    pub fn quad(kind: FirstPrinciplesKind, truth: &QuadTruthParams, dt: f64) -> Result<Self> {
        let part = match kind {
            FirstPrinciplesKind::None => FirstPrinciples::None,
            FirstPrinciplesKind::MinQ => FirstPrinciples::MinQ { inertia: truth.inertia, gravity: truth.gravity },
            other => return Err(Error::Domain(format!("{} is a ship model", other.name()))),
        };
        Self::checked(Vehicle::Quad, part, dt)
    }

    fn checked(vehicle: Vehicle, part: FirstPrinciples, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("prediction interval must be positive, got {dt}")));
        }
        Ok(Self { vehicle, part, dt, substeps: DEFAULT_SUBSTEPS })
    }

    pub fn kind(&self) -> FirstPrinciplesKind {
        match self.part {
            FirstPrinciples::None => FirstPrinciplesKind::None,
            FirstPrinciples::Min { .. } => FirstPrinciplesKind::Min,
            FirstPrinciples::Pro { .. } => FirstPrinciplesKind::Pro,
            FirstPrinciples::MinQ { .. } => FirstPrinciplesKind::MinQ,
            FirstPrinciples::Full { .. } => FirstPrinciplesKind::Full,
        }
    }

    /// One prediction interval of the model from state `z` under held control `c`
    /// (RK4, `substeps` sub-steps). `None` contributes a zero vector.
    pub fn step<S: Scalar>(&self, z: &[S], c: &[f64]) -> Vec<S> {
        let h = S::of(self.dt / self.substeps as f64);
        let n = self.substeps;
        match &self.part {
            FirstPrinciples::None => vec![S::zero(); z.len()],
            FirstPrinciples::Min { rigid } => ship_integrate(z, h, n, |x| ship_derivative(x, rigid, None, None)),
            FirstPrinciples::Pro { rigid, actuators } => {
                let ctrl = ShipControl::<S>::from_slice(&lift(c));
                ship_integrate(z, h, n, |x| ship_derivative(x, rigid, None, Some((&ctrl, actuators))))
            }
            FirstPrinciples::Full { rigid, damping, actuators, wind } => {
                let ctrl = ShipControl::<S>::from_slice(&lift(c));
                let calm = SeaState::calm();
                ship_integrate(z, h, n, |x| {
                    // hull windage from the vessel's own motion
                    let v = BodyVelocity { u: x[0], w: x[1], p: x[2], r: x[3] };
                    let air = still_air_forces(&calm, &v, wind);
                    let mut d = ship_derivative_with(x, rigid, Some(damping), Some((&ctrl, actuators)), &air);
                    d[4] = x[2];
                    d
                })
            }
            FirstPrinciples::MinQ { inertia, gravity } => {
                let x0: [S; 6] = std::array::from_fn(|i| z[i]);
                let g = S::of(*gravity);
                let out = rk4_integrate(&x0, S::zero(), h, n, |_, x| {
                    let w = gyroscopic(inertia, &[x[3], x[4], x[5]]);
                    [S::zero(), S::zero(), -g, w[0], w[1], w[2]]
                });
                out.to_vec()
            }
        }
    }
}

fn still_air_forces<S: Scalar>(calm: &SeaState, v: &BodyVelocity<S>, wind: &WindParams) -> [S; 4] {
    wind_forces(calm, &Pose { x: S::zero(), y: S::zero(), phi: S::zero(), psi: S::zero() }, v, wind)
}

fn lift<S: Scalar>(c: &[f64]) -> Vec<S> {
    c.iter().map(|&x| S::of(x)).collect()
}

fn ship_integrate<S: Scalar>(z: &[S], h: S, n: usize, f: impl Fn(&[S; 5]) -> [S; 5]) -> Vec<S> {
    let x0: [S; 5] = std::array::from_fn(|i| z[i]);
    rk4_integrate(&x0, S::zero(), h, n, |_, x| f(x)).to_vec()
}

/// `[u̇, ẇ, ṗ, ṙ, φ̇]` of the reduced ship model.
fn ship_derivative<S: Scalar>(
    x: &[S; 5],
    rigid: &RigidBodyParams,
    damping: Option<&DampingParams>,
    control: Option<(&ShipControl<S>, &ActuatorParams)>,
) -> [S; 5] {
    ship_derivative_with(x, rigid, damping, control, &[S::zero(); 4])
}

fn ship_derivative_with<S: Scalar>(
    x: &[S; 5],
    rigid: &RigidBodyParams,
    damping: Option<&DampingParams>,
    control: Option<(&ShipControl<S>, &ActuatorParams)>,
    tau_e: &[S; 4],
) -> [S; 5] {
    let v = [x[0], x[1], x[2], x[3]];
    let tau_c = match control {
        Some((c, act)) => propulsion_force_arr(c, &v, act),
        None => [S::zero(); 4],
    };
    let a = acceleration(&v, x[4], &tau_c, tau_e, rigid, damping);
    [a[0], a[1], a[2], a[3], x[2]]
}

/// Reduced model with mass, inertia, rigid-body Coriolis and linear roll restoring; controls ignored.
pub fn min_step(z: &[f64], rigid: &RigidBodyParams, dt: f64) -> Vec<f64> {
    let m = FirstPrinciplesModel {
        vehicle: Vehicle::Ship,
        part: FirstPrinciples::Min { rigid: rigid.clone() },
        dt,
        substeps: DEFAULT_SUBSTEPS,
    };
    m.step(z, &[0.0; 4])
}

/// [`min_step`] plus propeller/rudder forces.
pub fn pro_step(z: &[f64], c: &[f64], rigid: &RigidBodyParams, actuators: &ActuatorParams, dt: f64) -> Vec<f64> {
    let m = FirstPrinciplesModel {
        vehicle: Vehicle::Ship,
        part: FirstPrinciples::Pro { rigid: rigid.clone(), actuators: actuators.clone() },
        dt,
        substeps: DEFAULT_SUBSTEPS,
    };
    m.step(z, c)
}

/// First-principles part plus regression part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalModel {
    pub first_principles: FirstPrinciplesModel,
    pub regression: RegressionModel,
}

/// Physical step value and its Jacobians with respect to each history state.
#[derive(Clone, Debug)]
pub struct StepJacobian<T> {
    pub value: Vec<T>,
    /// `jacobians[k]` is ∂z^phy/∂zs[k] (same ordering as the history, oldest first)
    pub jacobians: Vec<Matrix<T>>,
}

impl PhysicalModel {
    pub fn new(first_principles: FirstPrinciplesModel, regression: RegressionModel) -> Result<Self> {
        if first_principles.vehicle != regression.vehicle {
            return Err(Error::Domain("physical model parts are for different vehicles".into()));
        }
        Ok(Self { first_principles, regression })
    }

    pub fn vehicle(&self) -> Vehicle {
        self.first_principles.vehicle
    }

    pub fn state_dim(&self) -> usize {
        self.vehicle().state_dim()
    }

    /// Number of past states (including the current one) the step consumes.
    pub fn history_len(&self) -> usize {
        self.regression.history_len().max(1)
    }

    pub fn is_zero(&self) -> bool {
        self.first_principles.kind() == FirstPrinciplesKind::None && self.regression.kind == RegressionKind::None
    }

    pub fn name(&self) -> String {
        match (self.first_principles.kind(), self.regression.kind) {
            (FirstPrinciplesKind::None, RegressionKind::None) => "None".into(),
            (f, RegressionKind::None) => f.name().into(),
            (FirstPrinciplesKind::None, r) => r.name().into(),
            (f, r) => format!("{}+{}", f.name(), r.name()),
        }
    }

    /// `z^phy_{t+1}` from histories ordered oldest → newest (at least [`history_len`](Self::history_len) entries).
    pub fn step<S: Scalar>(&self, zs: &[Vec<S>], cs: &[Vec<f64>]) -> Vec<S> {
        let z = zs.last().expect("non-empty history");
        let c = cs.last().expect("non-empty history");
        let fp = self.first_principles.step(z, c);
        let reg = self.regression.predict(&zs[zs.len() - self.history_len()..], &cs[cs.len() - self.history_len()..]);
        fp.iter().zip(&reg).map(|(a, b)| *a + *b).collect()
    }

    /// Checked variant of [`step`](Self::step).
    pub fn try_step(&self, zs: &[Vec<f64>], cs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let h = self.history_len();
        if zs.len() < h || cs.len() < h {
            return Err(Error::Dimension(format!("physical step needs {h} history steps")));
        }
        let nc = self.vehicle().control_dim();
        if zs.iter().any(|z| z.len() != self.state_dim()) || cs.iter().any(|c| c.len() != nc) {
            return Err(Error::Dimension("history row width does not match vehicle".into()));
        }
        Ok(self.step(zs, cs))
    }

    /// Step value plus exact Jacobians, by forward-mode differentiation through the same code.
    pub fn step_jacobian<T: Scalar>(&self, zs: &[Vec<T>], cs: &[Vec<f64>]) -> StepJacobian<T> {
        let h = self.history_len();
        let zs = &zs[zs.len() - h..];
        let cs = &cs[cs.len() - h..];
        let n = self.state_dim();
        let value = self.step(zs, cs);
        let mut jacobians = vec![Matrix::zeros(n, n); h];
        let consts: Vec<Vec<Dual<T>>> = zs.iter().map(|z| z.iter().map(|&x| Dual::constant(x)).collect()).collect();
        let has_fp = self.first_principles.kind() != FirstPrinciplesKind::None;
        let has_reg = self.regression.kind != RegressionKind::None;
        for k in 0..h {
            let newest = k + 1 == h;
            if !(has_reg || (newest && has_fp)) {
                continue;
            }
            for j in 0..n {
                let mut seeded = consts.clone();
                seeded[k][j].d = T::one();
                let mut col = vec![T::zero(); n];
                if newest && has_fp {
                    for (c, v) in col.iter_mut().zip(self.first_principles.step(&seeded[k], &cs[h - 1])) {
                        *c += v.d;
                    }
                }
                if has_reg {
                    for (c, v) in col.iter_mut().zip(self.regression.predict(&seeded, cs)) {
                        *c += v.d;
                    }
                }
                for i in 0..n {
                    jacobians[k].set(i, j, col[i]);
                }
            }
        }
        StepJacobian { value, jacobians }
    }
}

/// One step of `model`; see [`PhysicalModel::step`].
pub fn physical_step(model: &PhysicalModel, zs: &[Vec<f64>], cs: &[Vec<f64>]) -> Result<Vec<f64>> {
    model.try_step(zs, cs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::rk4_integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ship() -> ShipTruthParams {
        ShipTruthParams::patrol_vessel()
    }

    fn random_state(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![
            rng.gen_range(0.0..8.0),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.05..0.05),
            rng.gen_range(-0.03..0.03),
            rng.gen_range(-0.1..0.1),
        ]
    }

    #[test]
    fn min_equilibrium_and_restoring_sign() {
        let rigid = ship().rigid;
        assert_eq!(min_step(&[0.0; 5], &rigid, 1.0), vec![0.0; 5]);
        let out = min_step(&[0.0, 0.0, 0.0, 0.0, 0.1], &rigid, 1.0);
        assert!(out[2] < 0.0);
        assert!(out[0].abs() < 1e-12 && out[3].abs() < 1e-12);
    }

    /// Independent fine-step reference: Euler-free RK4 at dt/100 on a hand-written right-hand side.
    fn reference(z: &[f64], c: &[f64], truth: &ShipTruthParams, with_control: bool) -> Vec<f64> {
        let rb = &truth.rigid;
        let m = rb.mass;
        let x0 = [z[0], z[1], z[2], z[3], z[4]];
        let out = rk4_integrate(&x0, 0.0, 0.01, 100, |_, x| {
            let (u, w, p, r, phi) = (x[0], x[1], x[2], x[3], x[4]);
            let coriolis = [m * rb.zg * r * p - m * w * r, m * u * r, -m * rb.zg * r * u, m * w * u - m * u * w];
            let mut f = [-coriolis[0], -coriolis[1], -coriolis[2] - rb.roll_restoring * phi, -coriolis[3]];
            if with_control {
                let tc = crate::sim::ship::propulsion_force(
                    &ShipControl::from_slice(c),
                    &crate::sim::ship::BodyVelocity { u, w, p, r },
                    &truth.actuators,
                );
                for i in 0..4 {
                    f[i] += tc[i];
                }
            }
            let mut a = [0.0; 5];
            for i in 0..4 {
                for j in 0..4 {
                    a[i] += rb.mass_inverse[i][j] * f[j];
                }
            }
            a[4] = p;
            a
        });
        out.to_vec()
    }

    #[test]
    fn min_and_pro_match_fine_reference() {
        let truth = ship();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let z = random_state(&mut rng);
            let c = vec![
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            ];
            let a = min_step(&z, &truth.rigid, 1.0);
            let b = reference(&z, &c, &truth, false);
            let p = pro_step(&z, &c, &truth.rigid, &truth.actuators, 1.0);
            let q = reference(&z, &c, &truth, true);
            for i in 0..5 {
                assert!((a[i] - b[i]).abs() < 1e-6, "min dim {i}: {} vs {}", a[i], b[i]);
                assert!((p[i] - q[i]).abs() < 1e-6, "pro dim {i}: {} vs {}", p[i], q[i]);
            }
        }
    }

    #[test]
    fn pro_reduces_to_min_without_control_and_thrusts_forward() {
        let truth = ship();
        let z = vec![3.0, 0.1, 0.01, 0.02, 0.05];
        assert_eq!(pro_step(&z, &[0.0; 4], &truth.rigid, &truth.actuators, 1.0), min_step(&z, &truth.rigid, 1.0));
        let out = pro_step(&[0.0; 5], &[1.0, 1.0, 0.0, 0.0], &truth.rigid, &truth.actuators, 1.0);
        assert!(out[0] > 0.0);
        for v in &out[1..] {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn additivity_and_composition() {
        let truth = ship();
        let fp = FirstPrinciplesModel::ship(FirstPrinciplesKind::Min, &truth, 1.0).unwrap();
        let zero_lin = RegressionModel::zeros(RegressionKind::Lin, Vehicle::Ship, 1).unwrap();
        let m = PhysicalModel::new(fp.clone(), zero_lin.clone()).unwrap();
        let z = vec![vec![3.0, 0.1, 0.01, 0.02, 0.05]];
        let c = vec![vec![0.4, 0.5, 0.1, -0.1]];
        assert_eq!(m.step(&z, &c), min_step(&z[0], &truth.rigid, 1.0));

        let mut lin = zero_lin;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for w in lin.weights.iter_mut().flatten() {
            *w = rng.gen_range(-1.0..1.0);
        }
        let pure = PhysicalModel::new(FirstPrinciplesModel::none(Vehicle::Ship, 1.0), lin.clone()).unwrap();
        let expect: Vec<f64> = (0..5)
            .map(|i| {
                let w = &lin.weights[i];
                (0..4).map(|k| w[k] * c[0][k]).sum::<f64>() + (0..5).map(|k| w[4 + k] * z[0][k]).sum::<f64>() + w[9]
            })
            .collect();
        for (a, b) in pure.step(&z, &c).iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let pro = FirstPrinciplesModel::ship(FirstPrinciplesKind::Pro, &truth, 1.0).unwrap();
        let both = PhysicalModel::new(pro.clone(), lin).unwrap();
        let parts: Vec<f64> = pro.step(&z[0], &c[0]).iter().zip(&expect).map(|(a, b)| a + b).collect();
        for (a, b) in both.step(&z, &c).iter().zip(&parts) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let truth = ship();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut qlag = RegressionModel::zeros(RegressionKind::QLag, Vehicle::Ship, 3).unwrap();
        for w in qlag.weights.iter_mut().flatten() {
            *w = rng.gen_range(-0.1..0.1);
        }
        let mut hyd = RegressionModel::zeros(RegressionKind::Hyd, Vehicle::Ship, 1).unwrap();
        for w in hyd.weights.iter_mut().flatten() {
            *w = rng.gen_range(-0.1..0.1);
        }
        for (fk, reg) in [(FirstPrinciplesKind::Pro, qlag), (FirstPrinciplesKind::Min, hyd)] {
            let m = PhysicalModel::new(FirstPrinciplesModel::ship(fk, &truth, 1.0).unwrap(), reg).unwrap();
            let h = m.history_len();
            let zs: Vec<Vec<f64>> = (0..h).map(|_| random_state(&mut rng)).collect();
            let cs: Vec<Vec<f64>> = (0..h).map(|_| vec![0.6, 0.7, 0.1, 0.2]).collect();
            let jac = m.step_jacobian(&zs, &cs);
            assert_eq!(jac.value, m.step(&zs, &cs));
            for k in 0..h {
                for j in 0..5 {
                    let mut p = zs.clone();
                    p[k][j] += 1e-6;
                    let mut q = zs.clone();
                    q[k][j] -= 1e-6;
                    let (fp, fq) = (m.step(&p, &cs), m.step(&q, &cs));
                    for i in 0..5 {
                        let fd = (fp[i] - fq[i]) / 2e-6;
                        let an = jac.jacobians[k].get(i, j);
                        assert!((fd - an).abs() <= 1e-6 * (1.0 + an.abs()), "k{k} ({i},{j}): {fd} vs {an}");
                    }
                }
            }
        }
    }

    #[test]
    fn min_q_free_fall_and_torque_free_spin() {
        let q = QuadTruthParams::default();
        let m = FirstPrinciplesModel::quad(FirstPrinciplesKind::MinQ, &q, 0.01).unwrap();
        let out: Vec<f64> = m.step(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.3], &[0.5; 4]);
        assert!((out[2] + 9.81 * 0.01).abs() < 1e-12);
        assert_eq!(out[0], 1.0);
        assert!((out[5] - 0.3).abs() < 1e-15);
        assert!(FirstPrinciplesModel::quad(FirstPrinciplesKind::Min, &q, 0.01).is_err());
    }
}
