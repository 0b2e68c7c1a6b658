//! One-dimensional homogenization, solved semi-analytically.
//!
//! In 1D the flux `ζ = W_i'(ξ + w')` is constant across cells, so the strain
//! in cell `i` is `ψ_i(ζ)` with `ψ_i` the inverse of `W_i'`. Periodicity of the
//! corrector fixes `ζ = ∂W*_N(ξ)` through
//!
//! ```text
//! ξ = (1/N) Σ_i ψ_i(ζ)
//! ```
//!
//! and differentiating in ξ gives `1/∂²W*_N(ξ) = (1/N) Σ_i 1/W_i''(ψ_i(ζ))`.

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::randomfield::CoefficientField;

#[derive(Debug, Clone, PartialEq)]
pub struct OneDProblem {
    cells: Vec<EnergyParams>,
    p: f64,
}

impl OneDProblem {
    /// One `(a, c)` pair per unit cell.
    pub fn new(cells: &[(f64, f64)], p: f64) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::InvalidParameter("at least one cell is required".into()));
        }
        let cells = cells
            .iter()
            .map(|&(a, c)| EnergyParams::new(p, a, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cells, p })
    }

    pub fn from_field(field: &CoefficientField, p: f64) -> Result<Self> {
        if field.dim() != 1 {
            return Err(Error::InvalidParameter(format!("expected a 1D field, got d = {}", field.dim())));
        }
        let pairs: Vec<_> = field.a_cells().iter().copied().zip(field.c_cells().iter().copied()).collect();
        Self::new(&pairs, p)
    }

    pub fn cells(&self) -> &[EnergyParams] {
        &self.cells
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn mean_strain(&self, zeta: f64) -> f64 {
        self.cells.iter().map(|w| w.psi(zeta)).sum::<f64>() / self.cells.len() as f64
    }

    fn mean_compliance(&self, zeta: f64) -> f64 {
        self.cells
            .iter()
            .map(|w| 1.0 / w.second_derivative_1d(w.psi(zeta)))
            .sum::<f64>()
            / self.cells.len() as f64
    }

    /// `∂W*_N(ξ)`: the flux `ζ` with `(1/N) Σ_i ψ_i(ζ) = ξ`.
    pub fn grad_wstar(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            return 0.0;
        }
        let target = xi.abs();
        let a_max = self.cells.iter().fold(0.0f64, |m, w| m.max(w.a()));
        let c_max = self.cells.iter().fold(0.0f64, |m, w| m.max(w.c()));
        let mut lo = 0.0;
        let mut hi = a_max * target * (1.0 + target).powf(self.p - 2.0) + c_max * target + 1.0;
        let tol = 1e-13 * (1.0 + target);

        let mut zeta = 0.5 * hi;
        for _ in 0..500 {
            let f = self.mean_strain(zeta) - target;
            if f.abs() <= tol {
                break;
            }
            if f > 0.0 {
                hi = zeta;
            } else {
                lo = zeta;
            }
            let slope = self.mean_compliance(zeta);
            let newton = zeta - f / slope;
            zeta = if slope.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
        }
        zeta.copysign(xi)
    }

    /// `W*_N(ξ) = (1/N) Σ_i W_i(ψ_i(ζ))`.
    pub fn value_wstar(&self, xi: f64) -> f64 {
        let zeta = self.grad_wstar(xi);
        self.cells.iter().map(|w| w.value(&[w.psi(zeta)])).sum::<f64>() / self.cells.len() as f64
    }

    /// `∂²W*_N(ξ)`, the harmonic mean of the cell curvatures at the common
    /// flux. Returns 0 where some cell curvature vanishes (ξ = 0 with c = 0
    /// and p > 2), the limit value; see [`OneDProblem::is_degenerate_at`].
    pub fn hess_wstar(&self, xi: f64) -> f64 {
        if self.is_degenerate_at(xi) {
            return 0.0;
        }
        1.0 / self.mean_compliance(self.grad_wstar(xi))
    }

    /// Whether some cell has zero curvature at the flux `∂W*_N(ξ)`.
    pub fn is_degenerate_at(&self, xi: f64) -> bool {
        let zeta = self.grad_wstar(xi);
        self.cells.iter().any(|w| w.second_derivative_1d(w.psi(zeta)) == 0.0)
    }

    /// Per-cell corrector slope `ψ_i(ζ) - ξ`.
    pub fn corrector_slopes(&self, xi: f64) -> Vec<f64> {
        let zeta = self.grad_wstar(xi);
        self.cells.iter().map(|w| w.psi(zeta) - xi).collect()
    }
}
