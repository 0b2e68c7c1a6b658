//! Structured periodic P1 triangulation of `Q_N = (-N/2, N/2)²`.
//!
//! Each unit cell is cut into `(1/h)²` squares, and every square is split along
//! its bottom-left to top-right diagonal. Nodes on opposite faces of `Q_N` are
//! identified, so the mesh has `(N/h)²` nodes and `2 (N/h)²` triangles. Since
//! `1/h` is an integer every triangle lies inside a single coefficient cell.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sparse::CsrPattern;

/// Nodal values of a continuous piecewise-affine periodic function.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Field(pub Vec<f64>);

impl P1Field {
    pub fn zeros(n: usize) -> Self {
        P1Field(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    /// The zero-mean representative; gradients are unchanged.
    pub fn zero_mean(mut self) -> Self {
        let m = self.mean();
        self.0.iter_mut().for_each(|v| *v -= m);
        self
    }
}

/// Hat-function gradients on the two triangle shapes, in units of `1/h`.
///
/// Lower triangle: `(0,0), (h,0), (h,h)`; upper: `(0,0), (h,h), (0,h)`.
const LOWER_GRADS: [[f64; 2]; 3] = [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]];
const UPPER_GRADS: [[f64; 2]; 3] = [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]];

#[derive(Debug, Clone)]
pub struct PeriodicMesh {
    side: usize,
    steps_per_cell: usize,
    h: f64,
    triangles: Vec<[usize; 3]>,
    cell_of_triangle: Vec<usize>,
    /// Position of each local `(a, b)` pair of a triangle in the CSR pattern.
    slots: Vec<[usize; 9]>,
    pattern: Arc<CsrPattern>,
}

impl PeriodicMesh {
    /// Builds the mesh of `Q_N` with `N = side` and mesh size `h`; `1/h` must
    /// be an integer and `dim` must be 2.
    pub fn build(side: usize, h: f64, dim: usize) -> Result<Self> {
        if dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "periodic P1 mesh is two-dimensional, got d = {dim}"
            )));
        }
        if side == 0 {
            return Err(Error::InvalidParameter("domain side must be >= 1".into()));
        }
        let steps = steps_per_cell(h)?;
        let m = side * steps;
        let node = |i: usize, j: usize| (i % m) * m + (j % m);

        let mut triangles = Vec::with_capacity(2 * m * m);
        let mut cell_of_triangle = Vec::with_capacity(2 * m * m);
        for i in 0..m {
            for j in 0..m {
                let cell = (i / steps) * side + j / steps;
                triangles.push([node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
                triangles.push([node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
                cell_of_triangle.push(cell);
                cell_of_triangle.push(cell);
            }
        }

        let mut entries = Vec::with_capacity(9 * triangles.len());
        for t in &triangles {
            for &r in t {
                for &c in t {
                    entries.push((r, c));
                }
            }
        }
        let pattern = CsrPattern::from_entries(m * m, entries);
        let slots = triangles
            .iter()
            .map(|t| {
                let mut s = [0; 9];
                for (a, &r) in t.iter().enumerate() {
                    for (b, &c) in t.iter().enumerate() {
                        s[3 * a + b] = pattern.position(r, c).expect("entry in pattern");
                    }
                }
                s
            })
            .collect();

        Ok(Self {
            side,
            steps_per_cell: steps,
            h: 1.0 / steps as f64,
            triangles,
            cell_of_triangle,
            slots,
            pattern: Arc::new(pattern),
        })
    }

    /// `N`, the number of unit cells per side.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps_per_cell(&self) -> usize {
        self.steps_per_cell
    }

    pub fn nodes_per_side(&self) -> usize {
        self.side * self.steps_per_cell
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_side().pow(2)
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle_area(&self) -> f64 {
        0.5 * self.h * self.h
    }

    /// `|Q_N| = N²`.
    pub fn volume(&self) -> f64 {
        (self.side * self.side) as f64
    }

    /// Lattice index `k1 * N + k2` of the coefficient cell containing triangle `t`.
    pub fn cell_of_triangle(&self, t: usize) -> usize {
        self.cell_of_triangle[t]
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub(crate) fn slots(&self, t: usize) -> &[usize; 9] {
        &self.slots[t]
    }

    /// Coordinates of node `n` in `[-N/2, N/2)²`.
    pub fn node_coords(&self, n: usize) -> [f64; 2] {
        let m = self.nodes_per_side();
        let origin = -0.5 * self.side as f64;
        [origin + (n / m) as f64 * self.h, origin + (n % m) as f64 * self.h]
    }

    /// Hat-function gradients of the three vertices of triangle `t`.
    pub fn shape_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let reference = if t.is_multiple_of(2) { &LOWER_GRADS } else { &UPPER_GRADS };
        let inv_h = 1.0 / self.h;
        reference.map(|g| [g[0] * inv_h, g[1] * inv_h])
    }

    /// Unwrapped vertex coordinates of triangle `t` (the first vertex is the
    /// square's bottom-left corner).
    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let base = self.node_coords(self.triangles[t][0]);
        let h = self.h;
        if t.is_multiple_of(2) {
            [base, [base[0] + h, base[1]], [base[0] + h, base[1] + h]]
        } else {
            [base, [base[0] + h, base[1] + h], [base[0], base[1] + h]]
        }
    }

    /// Constant gradient of `field` on triangle `t`.
    pub fn element_gradient(&self, field: &P1Field, t: usize) -> [f64; 2] {
        let grads = self.shape_gradients(t);
        let mut g = [0.0; 2];
        for (a, &n) in self.triangles[t].iter().enumerate() {
            g[0] += field.0[n] * grads[a][0];
            g[1] += field.0[n] * grads[a][1];
        }
        g
    }

    /// Gradients of `field` on every triangle.
    pub fn gradients(&self, field: &P1Field) -> Vec<[f64; 2]> {
        (0..self.n_triangles()).map(|t| self.element_gradient(field, t)).collect()
    }

    /// P1 interpolant of a `Q_N`-periodic function.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> f64) -> P1Field {
        P1Field((0..self.n_nodes()).map(|n| f(self.node_coords(n))).collect())
    }

    /// Plain-text dump: `node x y` rows, then `tri i j k` rows.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for n in 0..self.n_nodes() {
            let [x, y] = self.node_coords(n);
            let _ = writeln!(out, "node {x} {y}");
        }
        for [i, j, k] in &self.triangles {
            let _ = writeln!(out, "tri {i} {j} {k}");
        }
        out
    }
}

fn steps_per_cell(h: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidParameter(format!("mesh size h = {h} must lie in (0, 1]")));
    }
    let inv = 1.0 / h;
    let steps = inv.round();
    if (inv - steps).abs() > 1e-9 * inv {
        return Err(Error::InvalidParameter(format!("1/h must be an integer, got h = {h}")));
    }
    Ok(steps as usize)
}

/// Checks that `1/h` is a positive integer.
pub fn validate_mesh_size(h: f64) -> Result<()> {
    steps_per_cell(h).map(|_| ())
}
