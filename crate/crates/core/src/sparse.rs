//! Compressed sparse row matrices and a projected preconditioned conjugate
//! gradient solver for symmetric matrices that are positive definite on the
//! zero-mean subspace (periodic stiffness matrices, whose kernel holds the
//! constants).

use std::sync::Arc;

use crate::error::SolverError;

/// Sparsity structure shared by every matrix assembled on one mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Builds the pattern of an `n × n` matrix from (possibly repeated)
    /// `(row, col)` entries.
    pub fn from_entries(n: usize, mut entries: Vec<(usize, usize)>) -> Self {
        entries.sort_unstable();
        entries.dedup();
        let mut row_ptr = vec![0; n + 1];
        for &(r, _) in &entries {
            row_ptr[r + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = entries.into_iter().map(|(_, c)| c).collect();
        Self { n, row_ptr, col_idx }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Storage position of entry `(row, col)`, if it is in the pattern.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.row_ptr[row];
        let cols = &self.col_idx[start..self.row_ptr[row + 1]];
        cols.binary_search(&col).ok().map(|k| start + k)
    }

    pub fn row(&self, row: usize) -> std::ops::Range<usize> {
        self.row_ptr[row]..self.row_ptr[row + 1]
    }

    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &CsrPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.get(i, i)).collect()
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: f64) {
        for i in 0..self.n() {
            let k = self.pattern.position(i, i).expect("diagonal in pattern");
            self.values[k] += shift;
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self
                .pattern
                .row(i)
                .map(|k| self.values[k] * x[self.pattern.col_idx[k]])
                .sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.pattern.row(i).map(|k| self.values[k]).sum()).collect()
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for k in self.pattern.row(i) {
                let j = self.pattern.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Settings of the projected PCG solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Target `‖b - A x‖ / ‖b‖`.
    pub rel_tol: f64,
    /// Iteration cap is `ceil(cap_factor · √n)`.
    pub cap_factor: f64,
    /// Allowed component of the right-hand side along constants, relative to
    /// its norm.
    pub compat_tol: f64,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, cap_factor: 50.0, compat_tol: 1e-8 }
    }
}

/// Outcome of a successful solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Solves `A u = b` for the zero-mean `u`, with `A` symmetric and positive
/// definite on the zero-mean subspace.
pub fn solve_spd(matrix: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
    solve_spd_with(matrix, rhs, 0.0, &CgOptions::default()).map(|s| s.x)
}

/// As [`solve_spd`]. `rhs_scale` is the gross magnitude of the terms summed
/// into `rhs`; the compatibility check then tolerates the rounding left by
/// cancellation, which is relative to that scale rather than to `‖rhs‖`.
pub fn solve_spd_with(
    matrix: &CsrMatrix,
    rhs: &[f64],
    rhs_scale: f64,
    opts: &CgOptions,
) -> Result<CgSolution, SolverError> {
    let n = matrix.n();
    assert_eq!(rhs.len(), n, "right-hand side length");

    let norm = norm2(rhs);
    let component = rhs.iter().sum::<f64>() / (n as f64).sqrt();
    if component.abs() > opts.compat_tol * norm + 1e-12 * rhs_scale {
        return Err(SolverError::Incompatible { component, norm });
    }

    let mut b = rhs.to_vec();
    project(&mut b);
    let b_norm = norm2(&b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(CgSolution { x, iterations: 0, rel_residual: 0.0 });
    }

    let inv_diag: Vec<f64> = matrix
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        for i in 0..n {
            z[i] = inv_diag[i] * r[i];
        }
        project(z);
    };

    let cap = (opts.cap_factor * (n as f64).sqrt()).ceil() as usize;
    let mut r = b;
    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;

    for it in 1..=cap {
        matrix.mul_vec_into(&p, &mut q);
        project(&mut q);
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(SolverError::Breakdown { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        rel = norm2(&r) / b_norm;
        if rel <= opts.rel_tol {
            project(&mut x);
            return Ok(CgSolution { x, iterations: it, rel_residual: rel });
        }
        precondition(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolverError::NotConverged { iterations: cap, residual: rel })
}

/// Removes the mean.
pub fn project(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
