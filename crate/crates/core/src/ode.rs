//! Classical fourth-order Runge–Kutta on fixed-size states.

use crate::scalar::Scalar;

/// Stage values of one RK4 step, kept for replay/consistency checks.
#[derive(Clone, Debug)]
pub struct Rk4Stages<S, const N: usize> {
    pub k: [[S; N]; 4],
}

#[inline]
fn axpy<S: Scalar, const N: usize>(x: &[S; N], a: S, k: &[S; N]) -> [S; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

/// One RK4 step of `ẋ = f(t, x)`; `f` is evaluated at `t`, `t + dt/2` (twice) and `t + dt`.
#[inline]
pub fn rk4_step<S: Scalar, const N: usize>(x: &[S; N], t: S, dt: S, mut f: impl FnMut(S, &[S; N]) -> [S; N]) -> [S; N] {
    rk4_step_with_stages(x, t, dt, &mut f).0
}

pub fn rk4_step_with_stages<S: Scalar, const N: usize>(
    x: &[S; N],
    t: S,
    dt: S,
    mut f: impl FnMut(S, &[S; N]) -> [S; N],
) -> ([S; N], Rk4Stages<S, N>) {
    let half = dt * S::of(0.5);
    let k1 = f(t, x);
    let k2 = f(t + half, &axpy(x, half, &k1));
    let k3 = f(t + half, &axpy(x, half, &k2));
    let k4 = f(t + dt, &axpy(x, dt, &k3));
    let sixth = dt / S::of(6.0);
    let mut out = *x;
    for i in 0..N {
        out[i] += sixth * (k1[i] + S::of(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
    (out, Rk4Stages { k: [k1, k2, k3, k4] })
}

/// Integrates over `[t0, t0 + n·dt]` with `n` equal RK4 steps.
pub fn rk4_integrate<S: Scalar, const N: usize>(
    x0: &[S; N],
    t0: S,
    dt: S,
    n: usize,
    mut f: impl FnMut(S, &[S; N]) -> [S; N],
) -> [S; N] {
    let mut x = *x0;
    for i in 0..n {
        x = rk4_step(&x, t0 + dt * S::of(i as f64), dt, &mut f);
    }
    x
}
