//! Open-loop "human operator" producing smooth actuator commands.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::ship::ShipControl;

pub const REVOLUTION_RANGE: (f64, f64) = (0.3, 1.0);
pub const RUDDER_TARGET_LIMIT: f64 = 30.0 * std::f64::consts::PI / 180.0;
pub const HOLD_RANGE: (f64, f64) = (30.0, 300.0);
pub const LAG_TIME_CONSTANT: f64 = 5.0;

/// Piecewise-constant target generator for one actuator channel.
#[derive(Debug)]
pub struct TargetChannel {
    lo: f64,
    hi: f64,
}

impl TargetChannel {
    /// Draws `(target, hold duration)`.
    pub fn next_segment(&self, rng: &mut impl Rng) -> (f64, f64) {
        let target = rng.gen_range(self.lo..=self.hi);
        let hold = rng.gen_range(HOLD_RANGE.0..=HOLD_RANGE.1);
        (target, hold)
    }
}

fn channels() -> [TargetChannel; 4] {
    let rev = || TargetChannel { lo: REVOLUTION_RANGE.0, hi: REVOLUTION_RANGE.1 };
    let rud = || TargetChannel { lo: -RUDDER_TARGET_LIMIT, hi: RUDDER_TARGET_LIMIT };
    [rev(), rev(), rud(), rud()]
}

/// Commands sampled every `dt` seconds over `duration` (`⌊duration/dt⌋ + 1` samples).
///
/// Each of the four channels holds a uniformly drawn target for a uniform 30–300 s,
/// and the commanded value follows the target through a first-order lag (τ = 5 s).
pub fn operator_controls(duration: f64, dt: f64, seed: u64) -> Vec<ShipControl<f64>> {
    assert!(duration > 0.0 && dt > 0.0, "duration and dt must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chans = channels();
    let n = (duration / dt).round() as usize + 1;
    let alpha = 1.0 - (-dt / LAG_TIME_CONSTANT).exp();

    let mut target = [0.0; 4];
    let mut switch_at = [0.0; 4];
    let mut value = [0.0; 4];
    for k in 0..4 {
        let (tg, hold) = chans[k].next_segment(&mut rng);
        target[k] = tg;
        value[k] = tg;
        switch_at[k] = hold;
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        for k in 0..4 {
            while t >= switch_at[k] {
                let (tg, hold) = chans[k].next_segment(&mut rng);
                target[k] = tg;
                switch_at[k] += hold;
            }
        }
        out.push(ShipControl { revolutions: [value[0], value[1]], rudder: [value[2], value[3]] }.clamped());
        for k in 0..4 {
            value[k] += alpha * (target[k] - value[k]);
        }
    }
    out
}
