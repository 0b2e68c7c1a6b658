//! Checkerboard coefficient fields built from uniform draws.
//!
//! Every unit cell of `Q_N = (-N/2, N/2)^d` carries one uniform per channel
//! (one for `a`, one for `c`). Coefficients are obtained through monotone
//! inverse CDFs, so the antithetic map `U ↦ 1 - U` produces a field with the
//! same law whose coefficients move in the opposite direction.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};

/// Law of a per-cell coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionSpec {
    Constant(f64),
    /// Two-point law taking `lo` and `hi` with probability 1/2 each.
    Bernoulli { lo: f64, hi: f64 },
}

impl DistributionSpec {
    /// Generalized inverse CDF. The Bernoulli threshold sends `x = 1/2` to `hi`.
    pub fn inverse_cdf(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("uniform draw {x} outside [0, 1]")));
        }
        Ok(self.quantile(x))
    }

    fn quantile(&self, x: f64) -> f64 {
        match *self {
            DistributionSpec::Constant(v) => v,
            DistributionSpec::Bernoulli { lo, hi } => {
                if x < 0.5 {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        match *self {
            DistributionSpec::Constant(v) => v,
            DistributionSpec::Bernoulli { lo, .. } => lo,
        }
    }

    pub fn max_value(&self) -> f64 {
        match *self {
            DistributionSpec::Constant(v) => v,
            DistributionSpec::Bernoulli { hi, .. } => hi,
        }
    }

    /// Checks the law is admissible for the `a` coefficient (strictly positive).
    pub fn validate_for_a(&self) -> Result<()> {
        self.validate("a", |v| v > 0.0)
    }

    /// Checks the law is admissible for the `c` coefficient (non-negative).
    pub fn validate_for_c(&self) -> Result<()> {
        self.validate("c", |v| v >= 0.0)
    }

    fn validate(&self, name: &str, admissible: impl Fn(f64) -> bool) -> Result<()> {
        let ok = match *self {
            DistributionSpec::Constant(v) => v.is_finite() && admissible(v),
            DistributionSpec::Bernoulli { lo, hi } => {
                lo.is_finite() && hi.is_finite() && admissible(lo) && lo <= hi
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid distribution for {name}: {self:?}")))
        }
    }
}

impl std::fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DistributionSpec::Constant(v) => write!(f, "constant({v})"),
            DistributionSpec::Bernoulli { lo, hi } => write!(f, "bernoulli({lo}, {hi})"),
        }
    }
}

/// Which experiment arm a realization belongs to. The arms draw from disjoint
/// streams so that the plain and antithetic experiments are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Plain,
    Antithetic,
}

impl Arm {
    fn tag(self) -> u64 {
        match self {
            Arm::Plain => 0,
            Arm::Antithetic => 1,
        }
    }
}

const CHANNEL_A: u64 = 0;
const CHANNEL_C: u64 = 1;

/// One uniform per cell and channel for a single realization.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformDraws {
    pub seed: u64,
    pub realization: u64,
    pub antithetic: bool,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
}

impl UniformDraws {
    pub fn n_cells(&self) -> usize {
        self.a.len()
    }

    /// Companion draws `1 - U`, channel-wise.
    pub fn antithetic(&self) -> UniformDraws {
        UniformDraws {
            seed: self.seed,
            realization: self.realization,
            antithetic: !self.antithetic,
            a: self.a.iter().map(|u| 1.0 - u).collect(),
            c: self.c.iter().map(|u| 1.0 - u).collect(),
        }
    }
}

fn keyed_rng(seed: u64, arm: Arm, realization: u64, channel: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&realization.to_le_bytes());
    key[16..24].copy_from_slice(&arm.tag().to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(channel);
    rng
}

fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// The uniform for one `(seed, arm, realization, cell, channel)` tuple, computed
/// without any sequential state.
pub fn uniform_at(seed: u64, arm: Arm, realization: u64, cell: usize, channel: u64) -> f64 {
    let mut rng = keyed_rng(seed, arm, realization, channel);
    // each u64 consumes two 32-bit words
    rng.set_word_pos(2 * cell as u128);
    to_unit(rng.next_u64())
}

/// Uniform draws of the plain arm for realization `realization`.
pub fn draw_uniforms(seed: u64, realization: u64, n_cells: usize) -> Result<UniformDraws> {
    draw_uniforms_for(seed, Arm::Plain, realization, n_cells)
}

pub fn draw_uniforms_for(seed: u64, arm: Arm, realization: u64, n_cells: usize) -> Result<UniformDraws> {
    if n_cells == 0 {
        return Err(Error::InvalidParameter("at least one cell is required".into()));
    }
    let channel = |ch| {
        let mut rng = keyed_rng(seed, arm, realization, ch);
        (0..n_cells).map(|_| to_unit(rng.next_u64())).collect::<Vec<_>>()
    };
    Ok(UniformDraws {
        seed,
        realization,
        antithetic: false,
        a: channel(CHANNEL_A),
        c: channel(CHANNEL_C),
    })
}

/// Piecewise-constant coefficients on the unit cells of `Q_N = (-N/2, N/2)^d`.
///
/// Cells are stored in lexicographic order of their lattice coordinates
/// `(k1, ..., kd)`, each `k_i` in `0..N`, counted from the corner `-N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    side: usize,
    dim: usize,
    a: Vec<f64>,
    c: Vec<f64>,
}

impl CoefficientField {
    pub fn new(side: usize, dim: usize, a: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::InvalidParameter("domain side must be >= 1".into()));
        }
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not supported")));
        }
        let cells = side.pow(dim as u32);
        for v in [&a, &c] {
            if v.len() != cells {
                return Err(Error::SizeMismatch { expected: cells, found: v.len() });
            }
        }
        if let Some(bad) = a.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidParameter(format!("coefficient a must be > 0, got {bad}")));
        }
        if let Some(bad) = c.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("coefficient c must be >= 0, got {bad}")));
        }
        Ok(Self { side, dim, a, c })
    }

    /// Field with the same `(a, c)` in every cell.
    pub fn uniform(side: usize, dim: usize, a: f64, c: f64) -> Result<Self> {
        let n = side.pow(dim as u32);
        Self::new(side, dim, vec![a; n], vec![c; n])
    }

    /// 2D field varying only along the first coordinate: cell `(k1, k2)` takes
    /// `profile[k1]`.
    pub fn laminate(profile: &[(f64, f64)]) -> Result<Self> {
        let side = profile.len();
        let mut a = Vec::with_capacity(side * side);
        let mut c = Vec::with_capacity(side * side);
        for &(ak, ck) in profile {
            for _ in 0..side {
                a.push(ak);
                c.push(ck);
            }
        }
        Self::new(side, 2, a, c)
    }

    /// `N`, the number of unit cells per side of `Q_N`.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.a.len()
    }

    /// `|Q_N| = N^d`.
    pub fn volume(&self) -> f64 {
        self.n_cells() as f64
    }

    pub fn a_cells(&self) -> &[f64] {
        &self.a
    }

    pub fn c_cells(&self) -> &[f64] {
        &self.c
    }

    /// Index of the cell with lattice coordinates `(k1, k2)` in a 2D field.
    pub fn cell_index(&self, k1: usize, k2: usize) -> usize {
        k1 * self.side + k2
    }

    pub fn energy(&self, cell: usize, p: f64) -> EnergyParams {
        EnergyParams::new_unchecked(p, self.a[cell], self.c[cell])
    }

    /// Periodic shift of a 2D field by `(s1, s2)` cells.
    pub fn shifted(&self, s1: usize, s2: usize) -> Self {
        assert_eq!(self.dim, 2, "shift is defined for 2D fields");
        let n = self.side;
        let mut a = vec![0.0; self.a.len()];
        let mut c = vec![0.0; self.c.len()];
        for k1 in 0..n {
            for k2 in 0..n {
                let src = self.cell_index(k1, k2);
                let dst = self.cell_index((k1 + s1) % n, (k2 + s2) % n);
                a[dst] = self.a[src];
                c[dst] = self.c[src];
            }
        }
        Self { side: n, dim: 2, a, c }
    }

    /// Plain-text dump, one row `k1 k2 a c` (or `k a c` in 1D) per cell in
    /// lexicographic order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (idx, (a, c)) in self.a.iter().zip(&self.c).enumerate() {
            if self.dim == 2 {
                let _ = writeln!(out, "{} {} {} {}", idx / self.side, idx % self.side, a, c);
            } else {
                let _ = writeln!(out, "{idx} {a} {c}");
            }
        }
        out
    }
}

/// Maps uniform draws to coefficients through the inverse CDFs.
pub fn realize_field(
    spec_a: &DistributionSpec,
    spec_c: &DistributionSpec,
    draws: &UniformDraws,
    side: usize,
    dim: usize,
) -> Result<CoefficientField> {
    spec_a.validate_for_a()?;
    spec_c.validate_for_c()?;
    let cells = side.pow(dim as u32);
    if draws.a.len() != cells || draws.c.len() != cells {
        return Err(Error::SizeMismatch {
            expected: cells,
            found: draws.a.len().min(draws.c.len()),
        });
    }
    let a = draws.a.iter().map(|&u| spec_a.inverse_cdf(u)).collect::<Result<Vec<_>>>()?;
    let c = draws.c.iter().map(|&u| spec_c.inverse_cdf(u)).collect::<Result<Vec<_>>>()?;
    CoefficientField::new(side, dim, a, c)
}
