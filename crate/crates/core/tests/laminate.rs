//! Fields varying along y₁ only: the 2D solver must agree with the exact 1D
//! reduction, since the corrector is then piecewise affine in y₁ with kinks on
//! mesh lines.

use homav_core::{full_pipeline, CoefficientField, NewtonConfig, OneDProblem, PeriodicMesh};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn check(profile: &[(f64, f64)], p: f64, xi1: f64, h: f64) {
    let field = CoefficientField::laminate(profile).unwrap();
    let mesh = PeriodicMesh::build(profile.len(), h, 2).unwrap();
    let cfg = NewtonConfig::with_tol(1e-10);
    let out = full_pipeline(&field, p, &[xi1, 0.0], &mesh, &cfg).unwrap();
    let oned = OneDProblem::new(profile, p).unwrap();

    assert!(rel(out.value, oned.value_wstar(xi1)) < 1e-6, "value {} vs {}", out.value, oned.value_wstar(xi1));
    assert!(rel(out.grad[0], oned.grad_wstar(xi1)) < 1e-6, "grad {} vs {}", out.grad[0], oned.grad_wstar(xi1));
    assert!(rel(out.hess[0][0], oned.hess_wstar(xi1)) < 1e-6, "hess {} vs {}", out.hess[0][0], oned.hess_wstar(xi1));
    // reflection y₂ → -y₂ leaves the field unchanged
    assert!(out.grad[1].abs() < 1e-8 * out.grad[0].abs());
    assert!(out.hess[0][1].abs() < 1e-7 * out.hess[0][0].abs());
}

#[test]
fn two_phase_laminate_without_linear_part() {
    check(&[(3.0, 0.0), (23.0, 0.0), (3.0, 0.0), (23.0, 0.0)], 4.0, 1.0, 0.25);
}

#[test]
fn random_looking_laminate_with_linear_part() {
    let profile = [(3.0, 1.0), (23.0, 3.0), (23.0, 1.0), (3.0, 3.0), (3.0, 1.0)];
    check(&profile, 4.0, 0.8, 0.2);
    check(&profile, 2.5, -1.3, 0.2);
}

#[test]
fn laminate_across_the_second_axis_is_not_one_dimensional_along_the_first() {
    // ξ along the laminate direction sees the harmonic-type mean; ξ across
    // it sees the arithmetic mean of the pointwise derivative.
    let profile = [(3.0, 0.0), (23.0, 0.0)];
    let field = CoefficientField::laminate(&profile).unwrap();
    let mesh = PeriodicMesh::build(2, 0.25, 2).unwrap();
    let out = full_pipeline(&field, 4.0, &[0.0, 1.0], &mesh, &NewtonConfig::with_tol(1e-10)).unwrap();
    assert!(rel(out.grad[1], 13.0) < 1e-8);
    assert!(rel(out.value, 13.0 / 4.0) < 1e-8);
}
