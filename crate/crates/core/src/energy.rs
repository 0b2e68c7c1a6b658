//! The two-term energy density family
//!
//! ```text
//! W(ξ) = a |ξ|^p / p + c |ξ|² / 2,     p ≥ 2, a > 0, c ≥ 0,
//! ```
//!
//! evaluated pointwise with its first and second ξ-derivatives, and (in 1D)
//! the inverse of ξ ↦ ∂W(ξ). Every density in the family is strictly convex
//! and attains its minimum at ξ = 0.

use crate::error::{Error, Result};

/// Coefficients of `W(ξ) = a|ξ|^p/p + c|ξ|²/2` at one point of the material.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    p: f64,
    a: f64,
    c: f64,
}

impl EnergyParams {
    pub fn new(p: f64, a: f64, c: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 2.0) {
            return Err(Error::InvalidParameter(format!("exponent p must be >= 2, got {p}")));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidParameter(format!("coefficient a must be > 0, got {a}")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidParameter(format!("coefficient c must be >= 0, got {c}")));
        }
        Ok(Self { p, a, c })
    }

    /// Constructor for values already validated by the caller (coefficient
    /// fields check their cells once at construction).
    pub(crate) fn new_unchecked(p: f64, a: f64, c: f64) -> Self {
        debug_assert!(p >= 2.0 && a > 0.0 && c >= 0.0);
        Self { p, a, c }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `W(ξ)`.
    pub fn value<const D: usize>(&self, xi: &[f64; D]) -> f64 {
        let r2 = norm_sq(xi);
        self.a * r2.powf(0.5 * self.p) / self.p + 0.5 * self.c * r2
    }

    /// `∂_ξ W(ξ) = a|ξ|^{p-2} ξ + c ξ`.
    pub fn gradient<const D: usize>(&self, xi: &[f64; D]) -> [f64; D] {
        let scale = self.a * radial_power(norm_sq(xi), self.p - 2.0) + self.c;
        xi.map(|x| scale * x)
    }

    /// `∂²_ξ W(ξ) = a(|ξ|^{p-2} Id + (p-2)|ξ|^{p-4} ξξᵀ) + c Id`.
    ///
    /// The rank-one term is taken as zero at ξ = 0, its limit for p > 2.
    pub fn hessian<const D: usize>(&self, xi: &[f64; D]) -> [[f64; D]; D] {
        let r2 = norm_sq(xi);
        let diag = self.a * radial_power(r2, self.p - 2.0) + self.c;
        let rank_one = if r2 > 0.0 {
            self.a * (self.p - 2.0) * radial_power(r2, self.p - 4.0)
        } else {
            0.0
        };
        let mut h = [[0.0; D]; D];
        for i in 0..D {
            for j in 0..D {
                h[i][j] = rank_one * xi[i] * xi[j];
            }
            h[i][i] += diag;
        }
        h
    }

    /// Scalar derivative `W'(ξ)` in one dimension.
    pub fn derivative_1d(&self, xi: f64) -> f64 {
        self.gradient(&[xi])[0]
    }

    /// Scalar second derivative `W''(ξ) = (p-1) a |ξ|^{p-2} + c` in one dimension.
    pub fn second_derivative_1d(&self, xi: f64) -> f64 {
        (self.p - 1.0) * self.a * radial_power(xi * xi, self.p - 2.0) + self.c
    }

    /// Inverse of `ξ ↦ W'(ξ)` in one dimension: the unique ξ with
    /// `a ξ|ξ|^{p-2} + c ξ = ζ`.
    pub fn psi(&self, zeta: f64) -> f64 {
        if zeta == 0.0 {
            return 0.0;
        }
        let target = zeta.abs();
        let f = |t: f64| self.a * t.powf(self.p - 1.0) + self.c * t - target;
        let df = |t: f64| (self.p - 1.0) * self.a * t.powf(self.p - 2.0) + self.c;

        let mut lo = 0.0_f64;
        let mut hi = (target / self.a).powf(1.0 / (self.p - 1.0)) + target / self.c.max(self.a);
        // Start from whichever term dominates.
        let mut t = (target / self.a)
            .powf(1.0 / (self.p - 1.0))
            .min(target / self.c.max(f64::MIN_POSITIVE));
        if !(t > lo && t < hi) {
            t = 0.5 * (lo + hi);
        }
        let tol = 1e-14 * target.max(1.0);
        for _ in 0..200 {
            let ft = f(t);
            if ft.abs() <= tol {
                break;
            }
            if ft > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let d = df(t);
            let newton = t - ft / d;
            t = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        t.copysign(zeta)
    }
}

/// `(r²)^{e/2}` with `0^0 = 1` and `0^e = 0` for e > 0.
///
/// Only non-negative exponents reach this in the gradient and Hessian, except
/// the rank-one Hessian term, whose caller excludes r = 0.
fn radial_power(r2: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        1.0
    } else if r2 == 0.0 {
        0.0
    } else {
        r2.powf(0.5 * exponent)
    }
}

fn norm_sq<const D: usize>(xi: &[f64; D]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(p: f64, a: f64, c: f64) -> EnergyParams {
        EnergyParams::new(p, a, c).unwrap()
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(EnergyParams::new(1.5, 1.0, 0.0).is_err());
        assert!(EnergyParams::new(4.0, 0.0, 0.0).is_err());
        assert!(EnergyParams::new(4.0, 1.0, -1.0).is_err());
        assert!(EnergyParams::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn value_examples() {
        assert_relative_eq!(params(4.0, 3.0, 0.0).value(&[1.0, 1.0]), 3.0, max_relative = 1e-15);
        assert_eq!(params(4.0, 1.0, 2.0).value(&[0.0, 0.0]), 0.0);
        assert_relative_eq!(params(4.0, 23.0, 1.0).value(&[1.0, 0.0]), 6.25, max_relative = 1e-15);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(params(4.0, 3.0, 0.0).gradient(&[1.0, 0.0]), [3.0, 0.0]);
        assert_eq!(params(4.0, 1.0, 1.0).gradient(&[0.0, 0.0]), [0.0, 0.0]);
        let g = params(4.0, 2.0, 0.0).gradient(&[1.0, 1.0]);
        assert_relative_eq!(g[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(g[1], 4.0, max_relative = 1e-15);
        // no NaN from 0^{p-2} for non-integer p
        let g = params(2.5, 1.0, 0.0).gradient(&[0.0, 0.0]);
        assert_eq!(g, [0.0, 0.0]);
    }

    #[test]
    fn hessian_examples() {
        assert_eq!(params(4.0, 1.0, 0.0).hessian(&[1.0, 0.0]), [[3.0, 0.0], [0.0, 1.0]]);
        assert_eq!(params(4.0, 1.0, 5.0).hessian(&[0.0, 0.0]), [[5.0, 0.0], [0.0, 5.0]]);
        assert_eq!(params(2.5, 1.0, 5.0).hessian(&[0.0, 0.0]), [[5.0, 0.0], [0.0, 5.0]]);

        // finite differences of the gradient, step 1e-6
        let w = params(4.0, 2.0, 1.0);
        let xi = [1.0, 1.0];
        let h = 1e-6;
        let mut fd = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut xp = xi;
            let mut xm = xi;
            xp[j] += h;
            xm[j] -= h;
            let (gp, gm) = (w.gradient(&xp), w.gradient(&xm));
            for i in 0..2 {
                fd[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let expected = [[9.0, 4.0], [4.0, 9.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((fd[i][j] - expected[i][j]).abs() < 1e-4);
            }
        }
        let exact = w.hessian(&xi);
        for i in 0..2 {
            for j in 0..2 {
                assert_relative_eq!(exact[i][j], expected[i][j], max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn psi_examples() {
        assert_relative_eq!(params(4.0, 2.0, 0.0).psi(16.0), 2.0, max_relative = 1e-14);
        assert_eq!(params(4.0, 2.0, 0.0).psi(0.0), 0.0);
        assert_eq!(params(2.7, 5.0, 3.0).psi(0.0), 0.0);
        assert_relative_eq!(params(4.0, 3.0, 1.0).psi(4.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(params(4.0, 3.0, 1.0).psi(-4.0), -1.0, max_relative = 1e-14);
    }

    #[test]
    fn growth_bounds_on_grid() {
        for &(p, a, c) in &[(4.0, 3.0, 0.0), (4.0, 23.0, 1.0), (2.5, 1.0, 3.0), (2.0, 2.0, 2.0)] {
            let w = params(p, a, c);
            let c1 = a / p;
            let c2 = a / p + c / 2.0 + c / 2.0;
            for i in -20..=20 {
                for j in -20..=20 {
                    let xi = [i as f64 * 0.37, j as f64 * 0.21];
                    let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                    let v = w.value(&xi);
                    assert!(c1 * r.powf(p) <= v * (1.0 + 1e-14));
                    assert!(v <= c2 * (1.0 + r.powf(p)));
                }
            }
        }
    }

    fn arb_params() -> impl Strategy<Value = EnergyParams> {
        (2.0..6.0f64, 0.1..30.0f64, 0.0..5.0f64).prop_map(|(p, a, c)| params(p, a, c))
    }

    fn arb_xi() -> impl Strategy<Value = [f64; 2]> {
        (-7.0..7.0f64, -7.0..7.0f64).prop_map(|(x, y)| [x, y])
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(w in arb_params(), xi in arb_xi()) {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            let h = 1e-5 * (1.0 + r);
            let g = w.gradient(&xi);
            let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            for j in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[j] += h;
                xm[j] -= h;
                let fd = (w.value(&xp) - w.value(&xm)) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() <= 1e-6 * gnorm.max(1.0));
            }
        }

        #[test]
        fn hessian_matches_finite_differences(w in arb_params(), xi in arb_xi()) {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            prop_assume!(r > if w.p() < 3.0 { 1e-3 } else { 1e-2 });
            let h = 1e-6 * (1.0 + r);
            let hess = w.hessian(&xi);
            let scale = hess.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            for j in 0..2 {
                let mut xp = xi;
                let mut xm = xi;
                xp[j] += h;
                xm[j] -= h;
                let (gp, gm) = (w.gradient(&xp), w.gradient(&xm));
                for i in 0..2 {
                    let fd = (gp[i] - gm[i]) / (2.0 * h);
                    prop_assert!((fd - hess[i][j]).abs() <= 1e-5 * scale);
                }
            }
        }

        #[test]
        fn hessian_is_positive_definite(w in arb_params(), xi in arb_xi(), eta in arb_xi()) {
            let r_eta = eta[0].abs() + eta[1].abs();
            prop_assume!(r_eta > 1e-6);
            prop_assume!(w.c() > 0.0 || xi[0] != 0.0 || xi[1] != 0.0);
            let h = w.hessian(&xi);
            let q = eta[0] * (h[0][0] * eta[0] + h[0][1] * eta[1])
                + eta[1] * (h[1][0] * eta[0] + h[1][1] * eta[1]);
            prop_assert!(q > 0.0);
        }

        #[test]
        fn psi_inverts_derivative(w in arb_params(), zeta in -1e3..1e3f64) {
            let x = w.psi(zeta);
            prop_assert_eq!(x.signum(), if zeta == 0.0 { x.signum() } else { zeta.signum() });
            let back = w.derivative_1d(x);
            prop_assert!((back - zeta).abs() <= 1e-10 * zeta.abs().max(1e-300));
        }

        #[test]
        fn homogeneous_identities(p in 2.0..6.0f64, a in 0.1..30.0f64, xi in arb_xi()) {
            let w = params(p, a, 0.0);
            let v = w.value(&xi);
            let g = w.gradient(&xi);
            let h = w.hessian(&xi);
            let first = xi[0] * g[0] + xi[1] * g[1];
            let second = xi[0] * (h[0][0] * xi[0] + h[0][1] * xi[1])
                + xi[1] * (h[1][0] * xi[0] + h[1][1] * xi[1]);
            prop_assert!((first - p * v).abs() <= 1e-12 * (p * v).max(1e-300));
            prop_assert!((second - p * (p - 1.0) * v).abs() <= 1e-12 * (p * (p - 1.0) * v).max(1e-300));
        }
    }
}
