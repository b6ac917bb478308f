//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver.
//!
//! All systems in the crate are symmetric positive definite (the elasticity
//! cell problems after gauge fixing, and the extension operator `M + β²K`),
//! so PCG with a diagonal preconditioner is used throughout. This keeps the
//! solver dependency-free and identical between native and wasm builds.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build a zero matrix with a prescribed sparsity pattern. `rows[i]` must
    /// be sorted and duplicate-free.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        for r in &rows {
            debug_assert!(r.windows(2).all(|w| w[0] < w[1]));
            cols.extend_from_slice(r);
            row_ptr.push(cols.len());
        }
        let vals = vec![0.0; cols.len()];
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn zero_values(&mut self) {
        self.vals.fill(0.0);
    }

    /// Add to entry (row, col); the slot must exist in the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        let slice = &self.cols[lo..hi];
        match slice.binary_search(&col) {
            Ok(k) => self.vals[lo + k] += v,
            Err(_) => panic!("entry ({row}, {col}) outside sparsity pattern"),
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[row] = acc;
        }
    }

    /// `xᵀ A y`
    pub fn quadratic(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut total = 0.0;
        for row in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                acc += self.vals[k] * y[self.cols[k]];
            }
            total += x[row] * acc;
        }
        total
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.cols[k] == row {
                    d[row] = self.vals[k];
                }
            }
        }
        d
    }

    /// Zero out row and column `dof` and put a unit on the diagonal. Used to
    /// pin rigid-body translations; the pinned value is zero so the right
    /// hand side needs no correction beyond `b[dof] = 0`.
    pub fn pin_dof(&mut self, dof: usize) {
        for row in 0..self.n {
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if row == dof || self.cols[k] == dof {
                    self.vals[k] = if row == dof && self.cols[k] == dof {
                        1.0
                    } else {
                        0.0
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients. `x` holds the initial guess on
/// entry and the solution on exit. Convergence is
/// `‖r‖₂ ≤ max(rtol ‖b‖₂, atol)`; the absolute floor keeps noise-level right
/// hand sides (e.g. the balanced loads of a uniform cell) from spinning.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    atol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.n();
    let bnorm = norm2(b);
    if bnorm <= atol {
        x.fill(0.0);
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut res = norm2(&r);
    if res <= rtol * bnorm {
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: res / bnorm,
        });
    }
    for it in 1..=max_iter {
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            return Err(Error::Solver(format!(
                "matrix not positive definite in CG (pᵀAp = {pq} at iteration {it})"
            )));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        res = norm2(&r);
        if res <= rtol * bnorm {
            return Ok(SolveStats {
                iterations: it,
                rel_residual: res / bnorm,
            });
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
    Err(Error::Solver(format!(
        "CG did not reach rtol {rtol:.1e} in {max_iter} iterations (rel residual {:.3e})",
        res / bnorm
    )))
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
