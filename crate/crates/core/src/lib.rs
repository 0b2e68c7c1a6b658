//! Apparent homogenized energy densities `W*_N(ω, ξ)` of random nonlinear
//! materials with checkerboard coefficients, their first and second
//! ξ-derivatives, and antithetic variance reduction for their expectations.
//!
//! The pipeline for one realization is
//! [`randomfield`] → [`mesh`]/[`assembly`] → [`newton`] → [`homogenize`];
//! [`montecarlo`] repeats it over plain and antithetic samples, and [`oned`]
//! provides the exact one-dimensional counterpart.

pub mod assembly;
pub mod energy;
pub mod error;
pub mod homogenize;
pub mod mesh;
pub mod montecarlo;
pub mod newton;
pub mod oned;
pub mod randomfield;
pub mod sparse;

pub use assembly::{CellProblem, Mat2, Vec2};
pub use energy::EnergyParams;
pub use error::{Error, Result, SolverError, Stage};
pub use homogenize::{full_pipeline, HomogenizedOutputs};
pub use mesh::{P1Field, PeriodicMesh};
pub use montecarlo::{
    compare, compare_with_bootstrap, run_av, run_mc, AvRun, ComparisonReport, EstimatorStats, McRun,
    QuantityComparison, QuantityKey, SampleTable, SolveRecord, StudyConfig,
};
pub use newton::{CorrectorState, NewtonConfig, NewtonLog};
pub use oned::OneDProblem;
pub use randomfield::{
    draw_uniforms, realize_field, Arm, CoefficientField, DistributionSpec, UniformDraws,
};
