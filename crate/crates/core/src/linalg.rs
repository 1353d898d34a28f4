//! Small dense linear algebra: a row-major matrix and a regularized SPD solver.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `out += A x`
    #[inline]
    pub fn mul_vec_acc(&self, x: &[T], out: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            let mut s = T::zero();
            for (a, b) in row.iter().zip(x) {
                s += *a * *b;
            }
            *o += s;
        }
    }

    /// `out += Aᵀ y`
    #[inline]
    pub fn mul_t_vec_acc(&self, y: &[T], out: &mut [T]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (yi, row) in y.iter().zip(self.data.chunks_exact(self.cols)) {
            if yi.is_zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += *a * *yi;
            }
        }
    }

    /// `A += a bᵀ`
    #[inline]
    pub fn add_outer(&mut self, a: &[T], b: &[T]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ai.is_zero() {
                continue;
            }
            for (r, bj) in row.iter_mut().zip(b) {
                *r += *ai * *bj;
            }
        }
    }

    pub fn map<S>(&self, f: impl Fn(T) -> S) -> Matrix<S> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

/// Outcome of a failed SPD solve: the matrix is numerically singular.
#[derive(Debug, Clone, Copy)]
pub struct Singular {
    pub condition: f64,
}

/// Solves `(G + ridge·I) x = rhs` for symmetric positive semi-definite `G` (n×n, row-major),
/// then refines toward the unregularized solution.
///
/// `G` is first scaled to unit diagonal so the ridge and the singularity test are
/// scale-free. The condition estimate is the ratio of largest to smallest squared
/// Cholesky pivot of the scaled matrix; above `max_condition` the system is rejected.
pub fn solve_spd<T: Scalar>(
    g: &[T],
    rhs: &[T],
    ridge: f64,
    refinement_steps: usize,
    max_condition: f64,
) -> Result<Vec<T>, Singular> {
    let n = rhs.len();
    assert_eq!(g.len(), n * n);
    let scale: Vec<T> = (0..n)
        .map(|i| {
            let d = g[i * n + i];
            if d > T::zero() {
                d.sqrt().recip()
            } else {
                T::one()
            }
        })
        .collect();
    let gs: Vec<T> = (0..n * n).map(|k| g[k] * scale[k / n] * scale[k % n]).collect();
    let mut l = gs.clone();
    for i in 0..n {
        l[i * n + i] += T::of(ridge);
    }
    // in-place lower Cholesky
    let mut pivots = Vec::with_capacity(n);
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > T::zero()) {
            return Err(Singular { condition: f64::INFINITY });
        }
        pivots.push(d.value_f64());
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    let pmax = pivots.iter().cloned().fold(0.0, f64::max);
    let pmin = pivots.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = pmax / pmin;
    if !(condition < max_condition) {
        return Err(Singular { condition });
    }

    let chol_solve = |b: &[T]| -> Vec<T> {
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    };

    let bs: Vec<T> = rhs.iter().zip(&scale).map(|(b, s)| *b * *s).collect();
    let mut x = chol_solve(&bs);
    for _ in 0..refinement_steps {
        let resid: Vec<T> = (0..n)
            .map(|i| {
                let mut s = bs[i];
                for k in 0..n {
                    s -= gs[i * n + k] * x[k];
                }
                s
            })
            .collect();
        let dx = chol_solve(&resid);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    Ok(x.iter().zip(&scale).map(|(xi, s)| *xi * *s).collect())
}
