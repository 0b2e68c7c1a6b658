//! Fixtures shared by the benchmarks.

use homav_core::randomfield::{draw_uniforms, realize_field};
use homav_core::{CoefficientField, DistributionSpec, PeriodicMesh};

pub const DIST_A: DistributionSpec = DistributionSpec::Bernoulli { lo: 3.0, hi: 23.0 };
pub const DIST_C: DistributionSpec = DistributionSpec::Constant(1.0);

/// Random checkerboard on `Q_N` with `2N = two_n`, and its mesh at `h = 0.2`.
pub fn fixture(two_n: usize, realization: u64) -> (CoefficientField, PeriodicMesh) {
    let side = two_n / 2;
    let draws = draw_uniforms(7, realization, side * side).expect("draws");
    let field = realize_field(&DIST_A, &DIST_C, &draws, side, 2).expect("field");
    let mesh = PeriodicMesh::build(side, 0.2, 2).expect("mesh");
    (field, mesh)
}
