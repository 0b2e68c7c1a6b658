//! Newton's method for the discrete corrector problem
//!
//! ```text
//! min_{w ∈ V_h, ∫w = 0}  (1/|Q_N|) ∫_{Q_N} W(y, ξ + ∇w) dy
//! ```
//!
//! Each step solves `H_{w^m}(w^{m+1} - w^m, θ) = -D_{w^m}(θ)` for all `θ ∈ V_h`.
//! Iterates start from the solution of the linear periodic problem with
//! coefficient `a + c` and stop when the relative `W^{1,p}` increment drops
//! below `tol`.

use serde::{Deserialize, Serialize};

use crate::assembly::{CellProblem, Vec2};
use crate::error::{Error, Result, SolverError};
use crate::mesh::{P1Field, PeriodicMesh};
use crate::sparse::{self, CgOptions, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    /// Relative `W^{1,p}` increment at which iterations stop.
    pub tol: f64,
    pub max_iterations: usize,
    /// Tolerance used for derivative-verification runs.
    pub fd_grade_tol: f64,
    /// Diagonal shift `ε_H · h²` always added to the Hessian.
    pub hessian_regularization: f64,
    pub cg: CgOptions,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-5,
            max_iterations: 50,
            fd_grade_tol: 1e-10,
            hessian_regularization: 0.0,
            cg: CgOptions::default(),
        }
    }
}

impl NewtonConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    /// The same configuration with `tol` tightened to `fd_grade_tol`.
    pub fn fd_grade(&self) -> Self {
        Self { tol: self.fd_grade_tol, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidParameter(format!("newton tol must be > 0, got {}", self.tol)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(self.hessian_regularization >= 0.0) {
            return Err(Error::InvalidParameter("hessian_regularization must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-solve record, serialized into experiment manifests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonLog {
    pub iterations: usize,
    pub converged: bool,
    /// Relative `W^{1,p}` increments, one per step.
    pub increments: Vec<f64>,
    /// Energy `J` after each step.
    pub energies: Vec<f64>,
    pub cg_iterations: usize,
    /// Steps that needed halving to decrease the energy.
    pub damped_steps: usize,
    /// Whether a Hessian had to be regularized after a CG failure.
    pub regularized: bool,
    /// `‖D_w‖_∞` at the returned iterate.
    pub final_residual: f64,
}

impl NewtonLog {
    pub fn final_increment(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorState {
    /// Zero-mean corrector.
    pub w: P1Field,
    pub iterations: usize,
    pub converged: bool,
    pub final_increment: f64,
    pub log: NewtonLog,
}

/// `(Σ_t |t| (|w̄_t|^p + |∇w_t|^p))^{1/p}` with `w̄_t` the vertex average.
pub fn w1p_norm(mesh: &PeriodicMesh, w: &P1Field, p: f64) -> f64 {
    let area = mesh.triangle_area();
    let sum: f64 = (0..mesh.n_triangles())
        .map(|t| {
            let [i, j, k] = mesh.triangles()[t];
            let avg = (w.0[i] + w.0[j] + w.0[k]) / 3.0;
            let g = mesh.element_gradient(w, t);
            avg.abs().powf(p) + (g[0] * g[0] + g[1] * g[1]).powf(0.5 * p)
        })
        .sum();
    (area * sum).powf(1.0 / p)
}

/// Solves `-div[(a + c)(ξ + ∇w₀)] = 0` with periodic boundary conditions.
pub fn initial_guess(problem: &CellProblem<'_>, xi: &Vec2, cfg: &NewtonConfig) -> Result<P1Field> {
    let tensors = problem.scalar_tensors();
    let stiffness = problem.stiffness(&tensors);
    let fluxes: Vec<Vec2> = tensors.iter().map(|k| [-k[0][0] * xi[0], -k[1][1] * xi[1]]).collect();
    let (rhs, gross) = problem.load(&fluxes);
    let sol = sparse::solve_spd_with(&stiffness, &rhs, gross, &cfg.cg)?;
    Ok(P1Field(sol.x))
}

/// Newton solve started from [`initial_guess`].
pub fn solve_corrector(problem: &CellProblem<'_>, xi: &Vec2, cfg: &NewtonConfig) -> Result<CorrectorState> {
    let w0 = initial_guess(problem, xi, cfg)?;
    solve_corrector_from(problem, xi, w0, cfg)
}

/// Newton solve from an arbitrary starting field.
///
/// Returns a state with `converged = false` when `max_iterations` is reached;
/// linear-solver failures are errors.
pub fn solve_corrector_from(
    problem: &CellProblem<'_>,
    xi: &Vec2,
    start: P1Field,
    cfg: &NewtonConfig,
) -> Result<CorrectorState> {
    cfg.validate()?;
    if start.len() != problem.n_nodes() {
        return Err(Error::SizeMismatch { expected: problem.n_nodes(), found: start.len() });
    }
    let mesh = problem.mesh();
    let p = problem.p();
    let a_scale = problem.field().a_cells().iter().fold(0.0f64, |m, &a| m.max(a));
    let lumped_mass = mesh.h() * mesh.h();

    let mut w = start.zero_mean();
    let mut energy = problem.energy(xi, &w)?;
    let mut log = NewtonLog::default();

    for _ in 0..cfg.max_iterations {
        let strains = problem.strains(xi, &w)?;
        let (residual, gross) = problem.residual_from_strains(&strains);
        let mut hessian = problem.hessian_from_strains(&strains);
        if cfg.hessian_regularization > 0.0 {
            hessian.shift_diagonal(cfg.hessian_regularization * lumped_mass);
        }
        let rhs: Vec<f64> = residual.iter().map(|r| -r).collect();
        let delta = newton_direction(&mut hessian, &rhs, gross, 1e-10 * a_scale * lumped_mass, cfg, &mut log)?;

        // energy-decreasing step, halving at most 20 times
        let slack = 1e-12 * energy.abs().max(1.0);
        let mut step = 1.0;
        let mut candidate = axpy(&w, step, &delta);
        let mut cand_energy = problem.energy(xi, &candidate)?;
        let mut halvings = 0;
        while cand_energy > energy + slack && halvings < 20 {
            step *= 0.5;
            halvings += 1;
            candidate = axpy(&w, step, &delta);
            cand_energy = problem.energy(xi, &candidate)?;
        }
        if halvings > 0 {
            log.damped_steps += 1;
        }

        let diff = P1Field(delta.iter().map(|d| step * d).collect());
        let increment = w1p_norm(mesh, &diff, p);
        let ratio = increment / w1p_norm(mesh, &w, p).max(1e-14);

        w = candidate.zero_mean();
        energy = cand_energy;
        log.iterations += 1;
        log.increments.push(ratio);
        log.energies.push(energy);

        if ratio <= cfg.tol || increment <= cfg.tol * 1e-8 {
            log.converged = true;
            break;
        }
    }

    let residual = problem.residual(xi, &w)?;
    log.final_residual = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(CorrectorState {
        w,
        iterations: log.iterations,
        converged: log.converged,
        final_increment: log.final_increment(),
        log,
    })
}

/// Solves `H δ = rhs`, retrying once with a regularized Hessian if CG breaks
/// down or stalls.
fn newton_direction(
    hessian: &mut CsrMatrix,
    rhs: &[f64],
    gross: f64,
    fallback_shift: f64,
    cfg: &NewtonConfig,
    log: &mut NewtonLog,
) -> Result<Vec<f64>> {
    match sparse::solve_spd_with(hessian, rhs, gross, &cfg.cg) {
        Ok(sol) => {
            log.cg_iterations += sol.iterations;
            Ok(sol.x)
        }
        Err(SolverError::Breakdown { .. } | SolverError::NotConverged { .. }) => {
            hessian.shift_diagonal(fallback_shift);
            log.regularized = true;
            let sol = sparse::solve_spd_with(hessian, rhs, gross, &cfg.cg)?;
            log.cg_iterations += sol.iterations;
            Ok(sol.x)
        }
        Err(e) => Err(e.into()),
    }
}

fn axpy(w: &P1Field, step: f64, delta: &[f64]) -> P1Field {
    P1Field(w.0.iter().zip(delta).map(|(wi, di)| wi + step * di).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randomfield::CoefficientField;

    fn tc2_like(side: usize) -> CoefficientField {
        let n = side * side;
        let a = (0..n).map(|k| if (k * 7 + k / 3) % 5 < 2 { 3.0 } else { 23.0 }).collect();
        CoefficientField::new(side, 2, a, vec![1.0; n]).unwrap()
    }

    #[test]
    fn w1p_norm_examples() {
        let mesh = PeriodicMesh::build(2, 0.5, 2).unwrap();
        assert_eq!(w1p_norm(&mesh, &P1Field::zeros(mesh.n_nodes()), 4.0), 0.0);
        let k = 1.7;
        let constant = P1Field(vec![k; mesh.n_nodes()]);
        assert!((w1p_norm(&mesh, &constant, 4.0) - k * mesh.volume().powf(0.25)).abs() < 1e-14);

        let w = mesh.interpolate(|y| (y[0] * std::f64::consts::PI).sin() * y[1].cos());
        let lambda = -3.25;
        let scaled = P1Field(w.0.iter().map(|v| lambda * v).collect());
        let (n1, n2) = (w1p_norm(&mesh, &w, 4.0), w1p_norm(&mesh, &scaled, 4.0));
        assert!((n2 - lambda.abs() * n1).abs() <= 1e-12 * n2);
    }

    #[test]
    fn constant_coefficients_need_no_correction() {
        let mesh = PeriodicMesh::build(3, 0.5, 2).unwrap();
        let f = CoefficientField::uniform(3, 2, 5.0, 0.0).unwrap();
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let cfg = NewtonConfig::default();
        let w0 = initial_guess(&prob, &[1.0, 1.0], &cfg).unwrap();
        assert!(w0.0.iter().all(|v| v.abs() < 1e-12));
        let s = solve_corrector(&prob, &[1.0, 1.0], &cfg).unwrap();
        assert!(s.converged);
        assert!(s.iterations <= 1);
        assert!(s.w.0.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn zero_macroscopic_gradient_gives_zero_guess() {
        let mesh = PeriodicMesh::build(3, 0.5, 2).unwrap();
        let f = tc2_like(3);
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let w0 = initial_guess(&prob, &[0.0, 0.0], &NewtonConfig::default()).unwrap();
        assert!(w0.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_guess_on_laminate_matches_harmonic_mean() {
        // coefficients vary along y1 only: d w0/d y1 = K/(a+c) - 1 per cell,
        // K the harmonic mean of a + c
        let profile = [(3.0, 1.0), (23.0, 1.0), (3.0, 0.0), (10.0, 2.0)];
        let f = CoefficientField::laminate(&profile).unwrap();
        let mesh = PeriodicMesh::build(4, 0.25, 2).unwrap();
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let w0 = initial_guess(&prob, &[1.0, 0.0], &NewtonConfig::default()).unwrap();
        let k = profile.len() as f64 / profile.iter().map(|(a, c)| 1.0 / (a + c)).sum::<f64>();
        for t in 0..mesh.n_triangles() {
            let cell = mesh.cell_of_triangle(t);
            let (a, c) = profile[cell / 4];
            let g = mesh.element_gradient(&w0, t);
            assert!((g[0] - (k / (a + c) - 1.0)).abs() < 1e-8, "t={t} g={g:?}");
            assert!(g[1].abs() < 1e-8);
        }
    }

    #[test]
    fn newton_converges_on_test_case_two_pattern() {
        let mesh = PeriodicMesh::build(5, 0.2, 2).unwrap();
        let f = tc2_like(5);
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let s = solve_corrector(&prob, &[1.0, 1.0], &NewtonConfig::default()).unwrap();
        assert!(s.converged);
        assert!((2..=12).contains(&s.iterations), "iterations {}", s.iterations);
        assert!(s.w.mean().abs() < 1e-12);
        // energy never increases
        let mut prev = prob.energy(&[1.0, 1.0], &initial_guess(&prob, &[1.0, 1.0], &NewtonConfig::default()).unwrap()).unwrap();
        for &e in &s.log.energies {
            assert!(e <= prev + 1e-12 * prev.max(1.0));
            prev = e;
        }
    }

    #[test]
    fn tight_tolerance_reaches_optimality() {
        let mesh = PeriodicMesh::build(3, 0.25, 2).unwrap();
        let f = tc2_like(3);
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let s = solve_corrector(&prob, &[1.0, 1.0], &NewtonConfig::default().fd_grade()).unwrap();
        assert!(s.converged);
        // scale: size of the pointwise flux times a hat-gradient integral
        let scale = 23.0 * 2.0f64.powf(1.5) * mesh.h();
        assert!(s.log.final_residual <= 1e-8 * scale, "{}", s.log.final_residual);
    }

    #[test]
    fn quadratic_energy_is_solved_by_the_linear_guess() {
        // p = 2 makes W quadratic with coefficient a + c, the same problem as
        // the initialization, so one Newton step confirms convergence
        let mesh = PeriodicMesh::build(4, 0.25, 2).unwrap();
        let f = tc2_like(4);
        let prob = CellProblem::new(&mesh, &f, 2.0).unwrap();
        let s = solve_corrector(&prob, &[1.0, 0.3], &NewtonConfig::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 1);

        // from w = 0 the first step lands on the minimizer
        let z = solve_corrector_from(&prob, &[1.0, 0.3], P1Field::zeros(mesh.n_nodes()), &NewtonConfig::default())
            .unwrap();
        assert!(z.converged);
        assert_eq!(z.iterations, 2);
        assert!(z.log.increments[1] < 1e-8);
    }

    #[test]
    fn minimizer_does_not_depend_on_start() {
        let mesh = PeriodicMesh::build(3, 0.25, 2).unwrap();
        let f = tc2_like(3);
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let cfg = NewtonConfig::default().fd_grade();
        let xi = [1.0, 1.0];
        let a = solve_corrector(&prob, &xi, &cfg).unwrap();
        let b = solve_corrector_from(&prob, &xi, P1Field::zeros(mesh.n_nodes()), &cfg).unwrap();
        let (ea, eb) = (prob.energy(&xi, &a.w).unwrap(), prob.energy(&xi, &b.w).unwrap());
        assert!((ea - eb).abs() <= 1e-9 * ea);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let mesh = PeriodicMesh::build(3, 0.25, 2).unwrap();
        let f = tc2_like(3);
        let prob = CellProblem::new(&mesh, &f, 4.0).unwrap();
        let cfg = NewtonConfig { max_iterations: 1, tol: 1e-14, ..NewtonConfig::default() };
        let s = solve_corrector(&prob, &[1.0, 1.0], &cfg).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn invalid_config_is_rejected() {
        assert!(NewtonConfig::with_tol(0.0).validate().is_err());
        assert!(NewtonConfig { max_iterations: 0, ..Default::default() }.validate().is_err());
    }
}
