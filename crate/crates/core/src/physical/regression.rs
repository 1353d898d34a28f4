use serde::{Deserialize, Serialize};

use crate::dataset::{Episode, Vehicle};
use crate::error::{Error, Result};
use crate::linalg::solve_spd;
use crate::physical::FirstPrinciplesModel;
use crate::scalar::Scalar;

pub const RIDGE: f64 = 1e-8;
/// Largest accepted condition estimate of the unit-diagonal normal matrix.
pub const MAX_CONDITION: f64 = 1e7;
pub const DEFAULT_LAG: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegressionKind {
    None,
    Lin,
    Hyd,
    Qua,
    QLag,
}

impl RegressionKind {
    pub fn name(self) -> &'static str {
        match self {
            RegressionKind::None => "None",
            RegressionKind::Lin => "Lin",
            RegressionKind::Hyd => "Hyd",
            RegressionKind::Qua => "Qua",
            RegressionKind::QLag => "QLag",
        }
    }
}

/// Hydrodynamic (polynomial and absolute-value) terms for one ship output `[u, w, p, r, φ]`.
pub fn hyd_terms<S: Scalar>(output: usize, z: &[S]) -> Vec<S> {
    let (u, w, p, r, phi) = (z[0], z[1], z[2], z[3], z[4]);
    match output {
        0 => vec![u, u.abs() * u, w * r],
        1 => vec![w, u.abs() * w, u * r, w.abs() * w, r.abs() * w, w.abs() * r, (u * w).abs() * phi, u * u * phi],
        2 => vec![p],
        3 => vec![r, u.abs() * w, w.abs() * r, u.abs() * r, r.abs() * r, (u * phi).abs() * phi, r.abs() * u * phi],
        4 => vec![p, phi],
        _ => panic!("ship state has 5 outputs"),
    }
}

/// Regression part of a physical model. Weights are stored per output dimension and
/// act on the feature vector of [`regression_features`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: RegressionKind,
    pub vehicle: Vehicle,
    /// history depth used by `QLag`
    pub lag: usize,
    pub weights: Vec<Vec<f64>>,
}

/// Feature vector for output `output` from histories ordered oldest → newest.
///
/// `Lin`: `[c_t, z_t, 1]`; `Qua`: `[c_t, z_t, c_t², z_t², 1]`; `QLag`: `[z_{t−H+1..t},
/// c_{t−H+1..t}, c_t², 1]`; `Hyd`: `[c_t, hydrodynamic terms of the output, 1]`.
pub fn regression_features<S: Scalar>(
    kind: RegressionKind,
    lag: usize,
    output: usize,
    zs: &[Vec<S>],
    cs: &[Vec<f64>],
) -> Result<Vec<S>> {
    let need = history_len(kind, lag);
    if zs.len() < need || cs.len() < need {
        return Err(Error::Dimension(format!(
            "{} needs {need} history steps, got {}",
            kind.name(),
            zs.len().min(cs.len())
        )));
    }
    Ok(features_unchecked(kind, lag, output, zs, cs))
}

pub(crate) fn history_len(kind: RegressionKind, lag: usize) -> usize {
    match kind {
        RegressionKind::None => 0,
        RegressionKind::QLag => lag,
        _ => 1,
    }
}

pub(crate) fn features_unchecked<S: Scalar>(
    kind: RegressionKind,
    lag: usize,
    output: usize,
    zs: &[Vec<S>],
    cs: &[Vec<f64>],
) -> Vec<S> {
    let z = zs.last().expect("history");
    let c: Vec<S> = cs.last().expect("history").iter().map(|&x| S::of(x)).collect();
    let mut f = Vec::new();
    match kind {
        RegressionKind::None => return f,
        RegressionKind::Lin => {
            f.extend_from_slice(&c);
            f.extend_from_slice(z);
        }
        RegressionKind::Qua => {
            f.extend_from_slice(&c);
            f.extend_from_slice(z);
            f.extend(c.iter().map(|x| *x * *x));
            f.extend(z.iter().map(|x| *x * *x));
        }
        RegressionKind::QLag => {
            for zk in &zs[zs.len() - lag..] {
                f.extend_from_slice(zk);
            }
            for ck in &cs[cs.len() - lag..] {
                f.extend(ck.iter().map(|&x| S::of(x)));
            }
            f.extend(c.iter().map(|x| *x * *x));
        }
        RegressionKind::Hyd => {
            f.extend_from_slice(&c);
            f.extend(hyd_terms(output, z));
        }
    }
    f.push(S::one());
    f
}

impl RegressionModel {
    pub fn none(vehicle: Vehicle) -> Self {
        Self { kind: RegressionKind::None, vehicle, lag: 1, weights: vec![Vec::new(); vehicle.state_dim()] }
    }

    /// All-zero weights of the right shapes.
    pub fn zeros(kind: RegressionKind, vehicle: Vehicle, lag: usize) -> Result<Self> {
        if kind == RegressionKind::Hyd && vehicle != Vehicle::Ship {
            return Err(Error::Domain("Hyd features are defined for the ship state only".into()));
        }
        if kind == RegressionKind::QLag && lag == 0 {
            return Err(Error::Domain("QLag window must be ≥ 1".into()));
        }
        let nz = vehicle.state_dim();
        let h = history_len(kind, lag).max(1);
        let zs = vec![vec![0.0; nz]; h];
        let cs = vec![vec![0.0; vehicle.control_dim()]; h];
        let weights = (0..nz).map(|o| vec![0.0; features_unchecked::<f64>(kind, lag, o, &zs, &cs).len()]).collect();
        Ok(Self { kind, vehicle, lag, weights })
    }

    pub fn history_len(&self) -> usize {
        history_len(self.kind, self.lag)
    }

    pub fn feature_len(&self, output: usize) -> usize {
        self.weights[output].len()
    }

    /// Regression contribution to the next state; zero for `None`.
    pub fn predict<S: Scalar>(&self, zs: &[Vec<S>], cs: &[Vec<f64>]) -> Vec<S> {
        let nz = self.vehicle.state_dim();
        if self.kind == RegressionKind::None {
            return vec![S::zero(); nz];
        }
        let shared = self.kind != RegressionKind::Hyd;
        let common = if shared { features_unchecked(self.kind, self.lag, 0, zs, cs) } else { Vec::new() };
        (0..nz)
            .map(|o| {
                let f = if shared { common.clone() } else { features_unchecked(self.kind, self.lag, o, zs, cs) };
                f.iter().zip(&self.weights[o]).map(|(x, w)| *x * S::of(*w)).sum()
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite())
    }
}

/// Least-squares fit of the regression part on the one-step residual of the
/// first-principles part (`None` first principles: the next state itself).
pub fn fit_regression(
    kind: RegressionKind,
    lag: usize,
    first_principles: &FirstPrinciplesModel,
    episodes: &[Episode],
) -> Result<RegressionModel> {
    let vehicle = episodes.first().ok_or_else(|| Error::Degenerate("no training episodes".into()))?.vehicle;
    let mut model = RegressionModel::zeros(kind, vehicle, lag)?;
    if kind == RegressionKind::None {
        return Ok(model);
    }
    let nz = vehicle.state_dim();
    let h = model.history_len();
    let nf: Vec<usize> = (0..nz).map(|o| model.feature_len(o)).collect();
    let mut gram: Vec<Vec<f64>> = nf.iter().map(|n| vec![0.0; n * n]).collect();
    let mut rhs: Vec<Vec<f64>> = nf.iter().map(|n| vec![0.0; *n]).collect();
    let shared = kind != RegressionKind::Hyd;
    let mut rows = 0usize;
    for ep in episodes {
        if ep.vehicle != vehicle {
            return Err(Error::Dimension("training episodes mix vehicle kinds".into()));
        }
        for t in h - 1..ep.len().saturating_sub(1) {
            let zs = &ep.states[t + 1 - h..=t];
            let cs = &ep.controls[t + 1 - h..=t];
            let base = first_principles.step(&ep.states[t], &ep.controls[t]);
            let target: Vec<f64> = ep.states[t + 1].iter().zip(&base).map(|(a, b)| a - b).collect();
            let common = if shared { features_unchecked(kind, lag, 0, zs, cs) } else { Vec::new() };
            for o in 0..nz {
                if shared && o > 0 {
                    rhs[o].iter_mut().zip(&common).for_each(|(r, f)| *r += f * target[o]);
                    continue;
                }
                let f = if shared { common.clone() } else { features_unchecked(kind, lag, o, zs, cs) };
                let n = f.len();
                let g = &mut gram[o];
                for i in 0..n {
                    if f[i] == 0.0 {
                        continue;
                    }
                    for j in i..n {
                        g[i * n + j] += f[i] * f[j];
                    }
                }
                rhs[o].iter_mut().zip(&f).for_each(|(r, fi)| *r += fi * target[o]);
            }
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(Error::Degenerate("episodes too short for regression".into()));
    }
    for o in 0..nz {
        let g = if shared { &gram[0] } else { &gram[o] };
        let n = nf[o];
        let mut full = g.clone();
        for i in 0..n {
            for j in 0..i {
                full[i * n + j] = full[j * n + i];
            }
        }
        model.weights[o] = solve_spd(&full, &rhs[o], RIDGE, 4, MAX_CONDITION)
            .map_err(|s| Error::RankDeficient { output: o, condition: s.condition })?;
    }
    if !model.is_finite() {
        return Err(Error::Degenerate("regression produced non-finite weights".into()));
    }
    Ok(model)
}
