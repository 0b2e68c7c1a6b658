//! Assembly of the cell energy
//!
//! ```text
//! J(w) = (1/|Q_N|) ∫_{Q_N} W(y, ξ + ∇w(y)) dy
//! ```
//!
//! and of its first and second variations `D_w(φ_i)`, `H_w(φ_i, φ_j)` on the
//! periodic P1 space. Coefficients and P1 gradients are constant on every
//! triangle, so one evaluation per triangle integrates exactly. The variations
//! are not normalized by `|Q_N|`: they are the exact partial derivatives of
//! `|Q_N| · J` with respect to the nodal values.

use crate::error::{Error, Result};
use crate::mesh::{P1Field, PeriodicMesh};
use crate::randomfield::CoefficientField;
use crate::sparse::CsrMatrix;

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// A mesh paired with a coefficient field and the exponent `p`.
#[derive(Debug, Clone, Copy)]
pub struct CellProblem<'a> {
    mesh: &'a PeriodicMesh,
    field: &'a CoefficientField,
    p: f64,
}

impl<'a> CellProblem<'a> {
    pub fn new(mesh: &'a PeriodicMesh, field: &'a CoefficientField, p: f64) -> Result<Self> {
        if field.dim() != 2 {
            return Err(Error::InvalidParameter(format!(
                "2D mesh needs a 2D field, got d = {}",
                field.dim()
            )));
        }
        if field.side() != mesh.side() {
            return Err(Error::SizeMismatch {
                expected: mesh.side() * mesh.side(),
                found: field.n_cells(),
            });
        }
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::InvalidParameter(format!("exponent p must be >= 2, got {p}")));
        }
        Ok(Self { mesh, field, p })
    }

    pub fn mesh(&self) -> &'a PeriodicMesh {
        self.mesh
    }

    pub fn field(&self) -> &'a CoefficientField {
        self.field
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn n_nodes(&self) -> usize {
        self.mesh.n_nodes()
    }

    fn check(&self, w: &P1Field) -> Result<()> {
        if w.len() != self.mesh.n_nodes() {
            return Err(Error::SizeMismatch { expected: self.mesh.n_nodes(), found: w.len() });
        }
        Ok(())
    }

    /// `ξ + ∇w` on every triangle.
    pub fn strains(&self, xi: &Vec2, w: &P1Field) -> Result<Vec<Vec2>> {
        self.check(w)?;
        Ok((0..self.mesh.n_triangles())
            .map(|t| {
                let g = self.mesh.element_gradient(w, t);
                [xi[0] + g[0], xi[1] + g[1]]
            })
            .collect())
    }

    fn energy_at(&self, t: usize) -> crate::energy::EnergyParams {
        self.field.energy(self.mesh.cell_of_triangle(t), self.p)
    }

    /// `(1/|Q_N|) Σ_t |t| W(cell(t), ξ + ∇w_t)`.
    pub fn energy(&self, xi: &Vec2, w: &P1Field) -> Result<f64> {
        let strains = self.strains(xi, w)?;
        Ok(self.average(&strains, |t, z| self.energy_at(t).value(z)))
    }

    /// Cell average of a per-triangle scalar.
    pub(crate) fn average(&self, strains: &[Vec2], f: impl Fn(usize, &Vec2) -> f64) -> f64 {
        let sum: f64 = strains.iter().enumerate().map(|(t, z)| f(t, z)).sum();
        sum * self.mesh.triangle_area() / self.mesh.volume()
    }

    /// `D_w(φ_i) = Σ_t |t| ∇φ_i · ∂_ξW(ξ + ∇w_t)`.
    pub fn residual(&self, xi: &Vec2, w: &P1Field) -> Result<Vec<f64>> {
        let strains = self.strains(xi, w)?;
        Ok(self.residual_from_strains(&strains).0)
    }

    /// Residual and the gross magnitude of the summed contributions.
    pub(crate) fn residual_from_strains(&self, strains: &[Vec2]) -> (Vec<f64>, f64) {
        let fluxes: Vec<Vec2> =
            strains.iter().enumerate().map(|(t, z)| self.energy_at(t).gradient(z)).collect();
        self.load(&fluxes)
    }

    /// Assembles `Σ_t |t| ∇φ_i · f_t` for one vector `f_t` per triangle, and
    /// returns the gross magnitude `Σ_t Σ_a |t| |∇φ_a · f_t|` alongside.
    pub(crate) fn load(&self, per_triangle: &[Vec2]) -> (Vec<f64>, f64) {
        let area = self.mesh.triangle_area();
        let mut out = vec![0.0; self.mesh.n_nodes()];
        let mut gross = 0.0;
        for (t, f) in per_triangle.iter().enumerate() {
            let grads = self.mesh.shape_gradients(t);
            for (a, &n) in self.mesh.triangles()[t].iter().enumerate() {
                let v = area * (grads[a][0] * f[0] + grads[a][1] * f[1]);
                out[n] += v;
                gross += v.abs();
            }
        }
        (out, gross)
    }

    /// `H_w(φ_i, φ_j) = Σ_t |t| ∇φ_iᵀ ∂²_ξW(ξ + ∇w_t) ∇φ_j`.
    pub fn hessian(&self, xi: &Vec2, w: &P1Field) -> Result<CsrMatrix> {
        let strains = self.strains(xi, w)?;
        Ok(self.hessian_from_strains(&strains))
    }

    pub(crate) fn hessian_from_strains(&self, strains: &[Vec2]) -> CsrMatrix {
        let tangents: Vec<Mat2> =
            strains.iter().enumerate().map(|(t, z)| self.energy_at(t).hessian(z)).collect();
        self.stiffness(&tangents)
    }

    /// Stiffness matrix `Σ_t |t| ∇φ_iᵀ K_t ∇φ_j` for one 2×2 tensor per triangle.
    pub fn stiffness(&self, tensors: &[Mat2]) -> CsrMatrix {
        let area = self.mesh.triangle_area();
        let mut m = CsrMatrix::zeros(self.mesh.pattern().clone());
        let values = m.values_mut();
        for (t, k) in tensors.iter().enumerate() {
            let grads = self.mesh.shape_gradients(t);
            let kg = grads.map(|g| [k[0][0] * g[0] + k[0][1] * g[1], k[1][0] * g[0] + k[1][1] * g[1]]);
            let slots = self.mesh.slots(t);
            for a in 0..3 {
                for b in 0..3 {
                    values[slots[3 * a + b]] +=
                        area * (grads[a][0] * kg[b][0] + grads[a][1] * kg[b][1]);
                }
            }
        }
        m
    }

    /// Per-triangle `(a + c) Id`, the tensor of the linearized initial problem.
    pub fn scalar_tensors(&self) -> Vec<Mat2> {
        (0..self.mesh.n_triangles())
            .map(|t| {
                let cell = self.mesh.cell_of_triangle(t);
                let k = self.field.a_cells()[cell] + self.field.c_cells()[cell];
                [[k, 0.0], [0.0, k]]
            })
            .collect()
    }
}
