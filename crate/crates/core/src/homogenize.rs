//! Homogenized quantities of one realization, read off a converged corrector.
//!
//! With `z_t = ξ + ∇w_t` the strain on triangle `t`:
//!
//! * `W*_N(ξ)   = ⟨W(z)⟩`
//! * `∂W*_N(ξ)  = ⟨∂_ξW(z)⟩` (the corrector's own ξ-derivative is not needed)
//! * `g_j = ∂w/∂ξ_j` solves `H g_j = -Σ_t |t| ∇φ_iᵀ ∂²_ξW(z_t) e_j`
//! * `∂²W*_N(ξ) = ⟨(Id + G) ∂²_ξW(z) (Id + G)ᵀ⟩`, `G_jk = ∂_k g_j`
//!
//! where `⟨·⟩` is the average over `Q_N`.

use serde::{Deserialize, Serialize};

use crate::assembly::{CellProblem, Mat2, Vec2};
use crate::error::{Error, Result, SolverError, Stage};
use crate::mesh::{P1Field, PeriodicMesh};
use crate::newton::{self, CorrectorState, NewtonConfig, NewtonLog};
use crate::randomfield::CoefficientField;
use crate::sparse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogenizedOutputs {
    pub xi: Vec2,
    /// `W*_N(ξ)`.
    pub value: f64,
    /// `∂_ξ W*_N(ξ)`.
    pub grad: Vec2,
    /// `∂²_ξ W*_N(ξ)`, symmetric.
    pub hess: Mat2,
    /// `ξ · ∂_ξ W*_N`.
    pub axial_first: f64,
    /// `ξᵀ ∂²_ξ W*_N ξ`.
    pub axial_second: f64,
    pub newton: NewtonLog,
}

fn require_converged(corrector: &CorrectorState) -> Result<()> {
    if corrector.converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            iterations: corrector.iterations,
            last_increment: corrector.final_increment,
        })
    }
}

pub fn homogenized_value(problem: &CellProblem<'_>, xi: &Vec2, corrector: &CorrectorState) -> Result<f64> {
    require_converged(corrector)?;
    problem.energy(xi, &corrector.w)
}

pub fn homogenized_gradient(problem: &CellProblem<'_>, xi: &Vec2, corrector: &CorrectorState) -> Result<Vec2> {
    require_converged(corrector)?;
    let strains = problem.strains(xi, &corrector.w)?;
    let mesh = problem.mesh();
    let field = problem.field();
    let p = problem.p();
    let mut sum = [0.0; 2];
    for (t, z) in strains.iter().enumerate() {
        let g = field.energy(mesh.cell_of_triangle(t), p).gradient(z);
        sum[0] += g[0];
        sum[1] += g[1];
    }
    let scale = mesh.triangle_area() / mesh.volume();
    Ok([sum[0] * scale, sum[1] * scale])
}

fn pointwise_hessians(problem: &CellProblem<'_>, strains: &[Vec2]) -> Vec<Mat2> {
    let mesh = problem.mesh();
    strains
        .iter()
        .enumerate()
        .map(|(t, z)| problem.field().energy(mesh.cell_of_triangle(t), problem.p()).hessian(z))
        .collect()
}

/// Loads `Σ_t |t| ∇φ_iᵀ ∂²_ξW(z_t) e_j` for `j = 1, 2`, with their gross scales.
fn sensitivity_loads(problem: &CellProblem<'_>, tangents: &[Mat2]) -> [(Vec<f64>, f64); 2] {
    [0, 1].map(|j| {
        let columns: Vec<Vec2> = tangents.iter().map(|h| [h[0][j], h[1][j]]).collect();
        problem.load(&columns)
    })
}

/// The fields `g_j = ∂w/∂ξ_j`, zero-mean.
pub fn corrector_sensitivities(
    problem: &CellProblem<'_>,
    xi: &Vec2,
    corrector: &CorrectorState,
    cfg: &NewtonConfig,
) -> Result<[P1Field; 2]> {
    require_converged(corrector)?;
    let strains = problem.strains(xi, &corrector.w)?;
    let tangents = pointwise_hessians(problem, &strains);
    let mut hessian = problem.stiffness(&tangents);
    let mesh = problem.mesh();
    let lumped_mass = mesh.h() * mesh.h();
    if cfg.hessian_regularization > 0.0 {
        hessian.shift_diagonal(cfg.hessian_regularization * lumped_mass);
    }
    let loads = sensitivity_loads(problem, &tangents);

    let mut out = [P1Field(Vec::new()), P1Field(Vec::new())];
    let mut shifted = false;
    for (j, (load, gross)) in loads.iter().enumerate() {
        let rhs: Vec<f64> = load.iter().map(|v| -v).collect();
        let sol = match sparse::solve_spd_with(&hessian, &rhs, *gross, &cfg.cg) {
            Ok(sol) => sol,
            Err(SolverError::Breakdown { .. } | SolverError::NotConverged { .. }) if !shifted => {
                let a_scale = problem.field().a_cells().iter().fold(0.0f64, |m, &a| m.max(a));
                hessian.shift_diagonal(1e-10 * a_scale * lumped_mass);
                shifted = true;
                sparse::solve_spd_with(&hessian, &rhs, *gross, &cfg.cg)?
            }
            Err(e) => return Err(e.into()),
        };
        out[j] = P1Field(sol.x);
    }
    Ok(out)
}

/// Norms of `H g_j + load_j` relative to `‖load_j‖`, i.e. how well the
/// differentiated optimality condition holds, for `j = 1, 2`.
pub fn sensitivity_residuals(
    problem: &CellProblem<'_>,
    xi: &Vec2,
    corrector: &CorrectorState,
    sensitivities: &[P1Field; 2],
) -> Result<[f64; 2]> {
    let strains = problem.strains(xi, &corrector.w)?;
    let tangents = pointwise_hessians(problem, &strains);
    let mesh = problem.mesh();
    let mut out = [0.0; 2];
    for j in 0..2 {
        // Σ_t |t| ∇φ_iᵀ ∂²W (e_j + ∇g_j)
        let per_triangle: Vec<Vec2> = tangents
            .iter()
            .enumerate()
            .map(|(t, h)| {
                let g = mesh.element_gradient(&sensitivities[j], t);
                let v = [(j == 0) as u8 as f64 + g[0], (j == 1) as u8 as f64 + g[1]];
                [h[0][0] * v[0] + h[0][1] * v[1], h[1][0] * v[0] + h[1][1] * v[1]]
            })
            .collect();
        let (combined, _) = problem.load(&per_triangle);
        let columns: Vec<Vec2> = tangents.iter().map(|h| [h[0][j], h[1][j]]).collect();
        let (load, _) = problem.load(&columns);
        let load_norm = sparse::norm2(&load);
        let r = sparse::norm2(&combined);
        out[j] = if load_norm > 0.0 { r / load_norm } else { r };
    }
    Ok(out)
}

pub fn homogenized_hessian(
    problem: &CellProblem<'_>,
    xi: &Vec2,
    corrector: &CorrectorState,
    sensitivities: &[P1Field; 2],
) -> Result<Mat2> {
    require_converged(corrector)?;
    let strains = problem.strains(xi, &corrector.w)?;
    let tangents = pointwise_hessians(problem, &strains);
    let mesh = problem.mesh();
    let mut sum = [[0.0; 2]; 2];
    for (t, h) in tangents.iter().enumerate() {
        let g1 = mesh.element_gradient(&sensitivities[0], t);
        let g2 = mesh.element_gradient(&sensitivities[1], t);
        // rows of Id + G
        let m = [[1.0 + g1[0], g1[1]], [g2[0], 1.0 + g2[1]]];
        let hm = [0, 1].map(|r| [h[0][0] * m[r][0] + h[0][1] * m[r][1], h[1][0] * m[r][0] + h[1][1] * m[r][1]]);
        for i in 0..2 {
            for j in i..2 {
                sum[i][j] += m[i][0] * hm[j][0] + m[i][1] * hm[j][1];
            }
        }
    }
    let scale = mesh.triangle_area() / mesh.volume();
    let off = sum[0][1] * scale;
    Ok([[sum[0][0] * scale, off], [off, sum[1][1] * scale]])
}

/// Initial guess, Newton solve, and every derived quantity for one field.
pub fn full_pipeline(
    field: &CoefficientField,
    p: f64,
    xi: &Vec2,
    mesh: &PeriodicMesh,
    cfg: &NewtonConfig,
) -> Result<HomogenizedOutputs> {
    let problem = CellProblem::new(mesh, field, p)?;
    let w0 = newton::initial_guess(&problem, xi, cfg).map_err(|e| e.at(Stage::InitialGuess))?;
    let corrector = newton::solve_corrector_from(&problem, xi, w0, cfg).map_err(|e| e.at(Stage::Newton))?;
    require_converged(&corrector).map_err(|e| e.at(Stage::Newton))?;

    let value = homogenized_value(&problem, xi, &corrector)?;
    let grad = homogenized_gradient(&problem, xi, &corrector)?;
    let sens = corrector_sensitivities(&problem, xi, &corrector, cfg).map_err(|e| e.at(Stage::Sensitivities))?;
    let hess = homogenized_hessian(&problem, xi, &corrector, &sens)?;

    let axial_first = xi[0] * grad[0] + xi[1] * grad[1];
    let axial_second = xi[0] * (hess[0][0] * xi[0] + hess[0][1] * xi[1])
        + xi[1] * (hess[1][0] * xi[0] + hess[1][1] * xi[1]);
    Ok(HomogenizedOutputs {
        xi: *xi,
        value,
        grad,
        hess,
        axial_first,
        axial_second,
        newton: corrector.log,
    })
}
