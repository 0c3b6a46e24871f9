//! Compressed sparse rows and a Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Builds the pattern from per-row sorted, deduplicated column lists; values start at zero.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let values = vec![T::zero(); col_idx.len()];
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        cols.binary_search(&c).ok().map(|p| self.row_ptr[r] + p)
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.position(r, c)
            .map(|p| self.values[p])
            .unwrap_or_else(T::zero)
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = T::zero();
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// Off-diagonal entries of row `r`.
    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[inline]
pub fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct CgOptions<T> {
    pub rel_tol: T,
    pub max_iters: usize,
}

impl<T: Real> Default for CgOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10).max(T::tolerance_floor()),
            max_iters: 10_000,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CgInfo {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `a x = b` for SPD `a`, starting from the incoming `x`.
///
/// Stops once `‖b − a x‖ <= rel_tol · ‖b‖`. A zero right-hand side yields `x = 0`.
pub fn pcg<T: Real>(a: &CsrMatrix<T>, b: &[T], x: &mut [T], opts: CgOptions<T>) -> Result<CgInfo> {
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(CgInfo {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { d.recip() } else { T::one() })
        .collect();
    let mut r = a.mul_vec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let target = opts.rel_tol * bnorm;
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(CgInfo {
            iterations: 0,
            rel_residual: (rnorm / bnorm).to_f64_lossy(),
        });
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=opts.max_iters {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target {
            // Confirm against the true residual; recurrences drift.
            let ax = a.mul_vec(x);
            let true_r: T = norm2(
                &b.iter()
                    .zip(&ax)
                    .map(|(&bi, &axi)| bi - axi)
                    .collect::<Vec<_>>(),
            );
            if true_r <= target * T::lit(10.0) {
                return Ok(CgInfo {
                    iterations: it,
                    rel_residual: (true_r / bnorm).to_f64_lossy(),
                });
            }
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = (rnorm / bnorm).to_f64_lossy();
    Err(Error::SolverFailure {
        iterations: opts.max_iters,
        residual: rel,
        history: vec![rel],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix<f64> {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = CsrMatrix::from_pattern(rows);
        for i in 0..n {
            let p = a.position(i, i).unwrap();
            a.values_mut()[p] = 2.0;
            if i > 0 {
                let p = a.position(i, i - 1).unwrap();
                a.values_mut()[p] = -1.0;
            }
            if i + 1 < n {
                let p = a.position(i, i + 1).unwrap();
                a.values_mut()[p] = -1.0;
            }
        }
        a
    }

    #[test]
    fn cg_solves_tridiagonal() {
        let n = 50;
        let a = laplace_1d(n);
        let exact: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.mul_vec(&exact);
        let mut x = vec![0.0; n];
        let info = pcg(&a, &b, &mut x, CgOptions::default()).unwrap();
        assert!(info.rel_residual <= 1e-9);
        for (u, v) in x.iter().zip(&exact) {
            assert!((u - v).abs() < 1e-7);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(5);
        let mut x = vec![1.0; 5];
        pcg(&a, &[0.0; 5], &mut x, CgOptions::default()).unwrap();
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn iteration_cap_reports_failure() {
        let a = laplace_1d(200);
        let b = vec![1.0; 200];
        let mut x = vec![0.0; 200];
        let opts = CgOptions {
            rel_tol: 1e-14,
            max_iters: 3,
        };
        assert!(matches!(
            pcg(&a, &b, &mut x, opts),
            Err(Error::SolverFailure { .. })
        ));
    }
}
