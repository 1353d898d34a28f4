//! Irregular sea (JONSWAP) and wind loads on the hull.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::ship::{BodyVelocity, Pose, ShipTruthParams, Vec4, WindParams};

pub const JONSWAP_GAMMA: f64 = 3.3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveComponent {
    /// rad/s
    pub frequency: f64,
    /// m
    pub amplitude: f64,
    /// rad, in [0, 2π)
    pub phase: f64,
    /// propagation direction in the inertial frame (rad)
    pub direction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeaState {
    pub significant_height: f64,
    pub peak_period: f64,
    pub mean_direction: f64,
    pub components: Vec<WaveComponent>,
    pub wind_speed: f64,
    /// direction the wind blows from, inertial frame (rad)
    pub wind_direction: f64,
    pub seed: u64,
}

/// Ranges from which episode sea states are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeaScenario {
    pub height_range: (f64, f64),
    pub period_range: (f64, f64),
    pub wind_range: (f64, f64),
    pub components: usize,
    /// half-width of the uniform directional spread around the mean direction
    pub spread: f64,
}

impl Default for SeaScenario {
    fn default() -> Self {
        Self {
            height_range: (0.5, 4.0),
            period_range: (6.0, 12.0),
            wind_range: (0.0, 15.0),
            components: 64,
            spread: PI / 8.0,
        }
    }
}

/// JONSWAP spectral density S(ω) (m²·s/rad) with peak enhancement γ = 3.3.
pub fn jonswap_density(omega: f64, hs: f64, tp: f64) -> f64 {
    if omega <= 0.0 {
        return 0.0;
    }
    let wp = 2.0 * PI / tp;
    let sigma = if omega <= wp { 0.07 } else { 0.09 };
    let norm = 1.0 - 0.287 * JONSWAP_GAMMA.ln();
    let pm = 5.0 / 16.0 * hs * hs * wp.powi(4) * omega.powi(-5) * (-1.25 * (wp / omega).powi(4)).exp();
    let r = (-(omega - wp).powi(2) / (2.0 * sigma * sigma * wp * wp)).exp();
    norm * pm * JONSWAP_GAMMA.powf(r)
}

/// Discretizes the spectrum into `n` equal bins over `[0.5ωp, 3ωp]` (bin midpoints),
/// `aᵢ = √(2 S(ωᵢ) Δω)`, with uniform random phases.
pub fn jonswap_amplitudes(hs: f64, tp: f64, n: usize, seed: u64) -> Result<Vec<WaveComponent>> {
    if !(hs > 0.0) || !(tp > 0.0) {
        return Err(Error::Domain(format!("JONSWAP needs Hs > 0 and Tp > 0, got Hs={hs}, Tp={tp}")));
    }
    if n < 16 {
        return Err(Error::Domain(format!("at least 16 wave components required, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wp = 2.0 * PI / tp;
    let (lo, hi) = (0.5 * wp, 3.0 * wp);
    let dw = (hi - lo) / n as f64;
    Ok((0..n)
        .map(|i| {
            let w = lo + (i as f64 + 0.5) * dw;
            WaveComponent {
                frequency: w,
                amplitude: (2.0 * jonswap_density(w, hs, tp) * dw).sqrt(),
                phase: rng.gen_range(0.0..2.0 * PI),
                direction: 0.0,
            }
        })
        .collect())
}

/// Variance of the discretized surface elevation, `Σ aᵢ²/2`.
pub fn discrete_variance(components: &[WaveComponent]) -> f64 {
    components.iter().map(|c| 0.5 * c.amplitude * c.amplitude).sum()
}

impl SeaState {
    pub fn calm() -> Self {
        Self {
            significant_height: 0.0,
            peak_period: 8.0,
            mean_direction: 0.0,
            components: vec![WaveComponent { frequency: 1.0, amplitude: 0.0, phase: 0.0, direction: 0.0 }],
            wind_speed: 0.0,
            wind_direction: 0.0,
            seed: 0,
        }
    }

    pub fn jonswap(
        hs: f64,
        tp: f64,
        mean_direction: f64,
        spread: f64,
        n: usize,
        wind_speed: f64,
        wind_direction: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut components = jonswap_amplitudes(hs, tp, n, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d1ec);
        for c in &mut components {
            c.direction = mean_direction + if spread > 0.0 { rng.gen_range(-spread..spread) } else { 0.0 };
        }
        Ok(Self {
            significant_height: hs,
            peak_period: tp,
            mean_direction,
            components,
            wind_speed,
            wind_direction,
            seed,
        })
    }

    pub fn random(scenario: &SeaScenario, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hs = rng.gen_range(scenario.height_range.0..=scenario.height_range.1);
        let tp = rng.gen_range(scenario.period_range.0..=scenario.period_range.1);
        let dir = rng.gen_range(-PI..PI);
        let wind = rng.gen_range(scenario.wind_range.0..=scenario.wind_range.1);
        let wind_dir = dir + rng.gen_range(-PI / 4.0..PI / 4.0);
        Self::jonswap(hs, tp, dir, scenario.spread, scenario.components, wind, wind_dir, seed)
    }

    /// Mirror image about the inertial x-axis.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        m.mean_direction = -m.mean_direction;
        m.wind_direction = -m.wind_direction;
        for c in &mut m.components {
            c.direction = -c.direction;
        }
        m
    }
}

/// First-order wave loads: per-axis gain × (cos β, sin β, sin β, sin 2β) × aᵢ cos(ωᵢt + θᵢ),
/// β the component heading relative to the bow.
pub fn wave_forces<S: Scalar>(sea: &SeaState, psi: S, t: S, params: &ShipTruthParams) -> Vec4<S> {
    let g = &params.waves;
    let mut tau = [S::zero(); 4];
    for c in &sea.components {
        if c.amplitude == 0.0 {
            continue;
        }
        let elev = S::of(c.amplitude) * (S::of(c.frequency) * t + S::of(c.phase)).cos();
        let beta = S::of(c.direction) - psi;
        let (sb, cb) = beta.sin_cos();
        let s2b = S::of(2.0) * sb * cb;
        tau[0] += S::of(g.surge) * cb * elev;
        tau[1] += S::of(g.sway) * sb * elev;
        tau[2] += S::of(g.roll) * sb * elev;
        tau[3] += S::of(g.yaw) * s2b * elev;
    }
    tau
}

/// Wind loads from the relative wind: `½ρV²[C_X A_F, C_Y A_L, C_K A_L H, C_N A_L L]`.
pub fn wind_forces<S: Scalar>(sea: &SeaState, pose: &Pose<S>, v: &BodyVelocity<S>, wp: &WindParams) -> Vec4<S> {
    let rel_dir = S::of(sea.wind_direction) - pose.psi;
    let (sd, cd) = rel_dir.sin_cos();
    let vw = S::of(sea.wind_speed);
    // velocity of the air relative to the hull, body axes
    let u_rel = -vw * cd - v.u;
    let w_rel = -vw * sd - v.w;
    let v_sq = u_rel * u_rel + w_rel * w_rel;
    if v_sq.is_zero() {
        return [S::zero(); 4];
    }
    let gamma = (-w_rel).atan2(-u_rel);
    let odd = |c: &[f64; 3], base: usize, step: usize| -> S {
        (0..3).map(|k| S::of(c[k]) * (S::of((base + step * k) as f64) * gamma).sin()).sum()
    };
    let c_x: S = (0..3).map(|k| S::of(wp.cx[k]) * (S::of((2 * k + 1) as f64) * gamma).cos()).sum();
    let c_y = odd(&wp.cy, 1, 2);
    let c_k = odd(&wp.ck, 1, 2);
    let c_n = odd(&wp.cn, 2, 2);
    let q = S::of(0.5 * wp.air_density) * v_sq;
    [
        q * c_x * S::of(wp.frontal_area),
        q * c_y * S::of(wp.lateral_area),
        q * c_k * S::of(wp.lateral_area * wp.lateral_height),
        q * c_n * S::of(wp.lateral_area * wp.length),
    ]
}

pub fn environment_forces<S: Scalar>(
    sea: &SeaState,
    pose: &Pose<S>,
    v: &BodyVelocity<S>,
    t: S,
    params: &ShipTruthParams,
) -> Vec4<S> {
    let w = wave_forces(sea, pose.psi, t, params);
    let a = wind_forces(sea, pose, v, &params.wind);
    [w[0] + a[0], w[1] + a[1], w[2] + a[2], w[3] + a[3]]
}
