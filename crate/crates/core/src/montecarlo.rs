//! Equal-cost comparison of plain Monte Carlo and antithetic estimators.
//!
//! The plain arm solves `2M` independent realizations. The antithetic arm
//! solves `M` pairs `(U, 1 - U)` and keeps the pair averages, so both arms pay
//! for `2M` corrector problems. Variances are compared through
//! `V_MC = Var[q]/2`, `V_AV = Var[(q(U) + q(1-U))/2]` and `R = V_MC / V_AV`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::homogenize::{self, HomogenizedOutputs};
use crate::mesh::{self, PeriodicMesh};
use crate::newton::{NewtonConfig, NewtonLog};
use crate::randomfield::{self, Arm, DistributionSpec, UniformDraws};

/// The eight reported quantities, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantityKey {
    Value,
    Grad1,
    Grad2,
    Hess11,
    Hess12,
    Hess22,
    AxialFirst,
    AxialSecond,
}

impl QuantityKey {
    pub const ALL: [QuantityKey; 8] = [
        QuantityKey::Value,
        QuantityKey::Grad1,
        QuantityKey::Grad2,
        QuantityKey::Hess11,
        QuantityKey::Hess12,
        QuantityKey::Hess22,
        QuantityKey::AxialFirst,
        QuantityKey::AxialSecond,
    ];

    pub fn name(self) -> &'static str {
        match self {
            QuantityKey::Value => "value",
            QuantityKey::Grad1 => "grad_1",
            QuantityKey::Grad2 => "grad_2",
            QuantityKey::Hess11 => "hess_11",
            QuantityKey::Hess12 => "hess_12",
            QuantityKey::Hess22 => "hess_22",
            QuantityKey::AxialFirst => "axial_first",
            QuantityKey::AxialSecond => "axial_second",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn extract(self, out: &HomogenizedOutputs) -> f64 {
        match self {
            QuantityKey::Value => out.value,
            QuantityKey::Grad1 => out.grad[0],
            QuantityKey::Grad2 => out.grad[1],
            QuantityKey::Hess11 => out.hess[0][0],
            QuantityKey::Hess12 => out.hess[0][1],
            QuantityKey::Hess22 => out.hess[1][1],
            QuantityKey::AxialFirst => out.axial_first,
            QuantityKey::AxialSecond => out.axial_second,
        }
    }
}

impl std::fmt::Display for QuantityKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything needed to turn a realization index into homogenized outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub p: f64,
    pub xi: [f64; 2],
    /// `N`: `Q_N = (-N/2, N/2)²` holds `N²` unit cells.
    pub side: usize,
    pub mesh_h: f64,
    pub newton: NewtonConfig,
    pub seed: u64,
    pub dist_a: DistributionSpec,
    pub dist_c: DistributionSpec,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 2, got {}", self.p)));
        }
        if self.side == 0 {
            return Err(Error::InvalidParameter("domain side must be >= 1".into()));
        }
        mesh::validate_mesh_size(self.mesh_h)?;
        self.newton.validate()?;
        self.dist_a.validate_for_a()?;
        self.dist_c.validate_for_c()
    }

    pub fn build_mesh(&self) -> Result<PeriodicMesh> {
        PeriodicMesh::build(self.side, self.mesh_h, 2)
    }

    pub fn n_cells(&self) -> usize {
        self.side * self.side
    }

    /// Outputs of the realization driven by `draws`.
    pub fn evaluate(&self, mesh: &PeriodicMesh, draws: &UniformDraws) -> Result<HomogenizedOutputs> {
        let field = randomfield::realize_field(&self.dist_a, &self.dist_c, draws, self.side, 2)?;
        homogenize::full_pipeline(&field, self.p, &self.xi, mesh, &self.newton)
    }
}

/// Log entry of one corrector solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub arm: Arm,
    pub realization: u64,
    /// For the antithetic arm: whether this is the `1 - U` member.
    pub reflected: bool,
    pub newton: NewtonLog,
    pub wall_time_s: f64,
}

/// One sample column per quantity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleTable {
    columns: [Vec<f64>; 8],
}

impl SampleTable {
    pub fn from_outputs<'a>(outputs: impl IntoIterator<Item = &'a HomogenizedOutputs>) -> Self {
        let mut table = SampleTable::default();
        for out in outputs {
            for key in QuantityKey::ALL {
                table.columns[key.index()].push(key.extract(out));
            }
        }
        table
    }

    pub fn from_columns(columns: [Vec<f64>; 8]) -> Self {
        Self { columns }
    }

    pub fn get(&self, key: QuantityKey) -> &[f64] {
        &self.columns[key.index()]
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Element-wise average of two tables of equal length.
    pub fn midpoint(&self, other: &SampleTable) -> SampleTable {
        let columns = std::array::from_fn(|k| {
            self.columns[k].iter().zip(&other.columns[k]).map(|(x, y)| 0.5 * (x + y)).collect()
        });
        SampleTable { columns }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McRun {
    pub samples: SampleTable,
    pub solves: Vec<SolveRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvRun {
    /// `(q(U_k) + q(1 - U_k)) / 2`.
    pub pair_means: SampleTable,
    /// `q(U_k)`.
    pub direct: SampleTable,
    /// `q(1 - U_k)`.
    pub reflected: SampleTable,
    pub solves: Vec<SolveRecord>,
}

fn timed_solve(
    cfg: &StudyConfig,
    mesh: &PeriodicMesh,
    draws: &UniformDraws,
    arm: Arm,
    reflected: bool,
) -> Result<(HomogenizedOutputs, SolveRecord)> {
    let start = Instant::now();
    let out = cfg.evaluate(mesh, draws).map_err(|e| Error::Realization {
        index: draws.realization as usize,
        source: Box::new(e),
    })?;
    let record = SolveRecord {
        arm,
        realization: draws.realization,
        reflected,
        newton: out.newton.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((out, record))
}

/// First error in index order, so failures are reported deterministically.
fn first_error<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// `2M` independent realizations `0..2M` of the plain arm.
pub fn run_mc(cfg: &StudyConfig, mesh: &PeriodicMesh, two_m: usize) -> Result<McRun> {
    cfg.validate()?;
    let results: Vec<Result<_>> = (0..two_m as u64)
        .into_par_iter()
        .map(|r| {
            let draws = randomfield::draw_uniforms_for(cfg.seed, Arm::Plain, r, cfg.n_cells())?;
            timed_solve(cfg, mesh, &draws, Arm::Plain, false)
        })
        .collect();
    let (outputs, solves): (Vec<_>, Vec<_>) = first_error(results)?.into_iter().unzip();
    Ok(McRun { samples: SampleTable::from_outputs(&outputs), solves })
}

/// `M` antithetic pairs: pair `k` uses draws `U_k` of the antithetic stream
/// and their reflection `1 - U_k`.
pub fn run_av(cfg: &StudyConfig, mesh: &PeriodicMesh, m: usize) -> Result<AvRun> {
    cfg.validate()?;
    let results: Vec<Result<_>> = (0..m as u64)
        .into_par_iter()
        .map(|k| {
            let draws = randomfield::draw_uniforms_for(cfg.seed, Arm::Antithetic, k, cfg.n_cells())?;
            let reflected = draws.antithetic();
            let (a, b) = rayon::join(
                || timed_solve(cfg, mesh, &draws, Arm::Antithetic, false),
                || timed_solve(cfg, mesh, &reflected, Arm::Antithetic, true),
            );
            Ok((a?, b?))
        })
        .collect();
    let pairs = first_error(results)?;
    let mut direct = Vec::with_capacity(m);
    let mut refl = Vec::with_capacity(m);
    let mut solves = Vec::with_capacity(2 * m);
    for ((o1, s1), (o2, s2)) in pairs {
        direct.push(o1);
        refl.push(o2);
        solves.push(s1);
        solves.push(s2);
    }
    let direct = SampleTable::from_outputs(&direct);
    let reflected = SampleTable::from_outputs(&refl);
    Ok(AvRun { pair_means: direct.midpoint(&reflected), direct, reflected, solves })
}

/// Mean, unbiased variance and 95% confidence half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorStats {
    pub n_samples: usize,
    pub mean: f64,
    pub variance: f64,
    pub ci_halfwidth: f64,
}

impl EstimatorStats {
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::TooFewSamples { required: 2, found: n });
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let variance = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self { n_samples: n, mean, variance, ci_halfwidth: 1.96 * (variance / n as f64).sqrt() })
    }
}

fn sample_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Sample covariance of two paired samples.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityComparison {
    pub key: QuantityKey,
    pub mc: EstimatorStats,
    pub av: EstimatorStats,
    /// `Var_mc / 2`.
    pub v_mc: f64,
    /// `Var_av`.
    pub v_av: f64,
    /// `V_MC / V_AV`; NaN when `V_AV = 0`.
    pub ratio: f64,
    /// False when `V_AV = 0`, e.g. for degenerate distributions.
    pub ratio_defined: bool,
    /// Bootstrap 95% percentile interval of `R`, when requested.
    pub ratio_ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub quantities: Vec<QuantityComparison>,
}

impl ComparisonReport {
    pub fn get(&self, key: QuantityKey) -> &QuantityComparison {
        &self.quantities[key.index()]
    }
}

fn ratio_of(v_mc: f64, v_av: f64) -> (f64, bool) {
    if v_av > 0.0 {
        (v_mc / v_av, true)
    } else {
        (f64::NAN, false)
    }
}

/// Statistics of both arms for every quantity.
pub fn compare(mc: &SampleTable, av: &SampleTable) -> Result<ComparisonReport> {
    let quantities = QuantityKey::ALL
        .iter()
        .map(|&key| {
            let mc_stats = EstimatorStats::from_samples(mc.get(key))?;
            let av_stats = EstimatorStats::from_samples(av.get(key))?;
            let v_mc = 0.5 * mc_stats.variance;
            let v_av = av_stats.variance;
            let (ratio, ratio_defined) = ratio_of(v_mc, v_av);
            Ok(QuantityComparison {
                key,
                mc: mc_stats,
                av: av_stats,
                v_mc,
                v_av,
                ratio,
                ratio_defined,
                ratio_ci: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport { quantities })
}

/// [`compare`], plus percentile bootstrap intervals for `R` from `resamples`
/// independent resamplings of both arms.
pub fn compare_with_bootstrap(
    mc: &SampleTable,
    av: &SampleTable,
    resamples: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    let mut report = compare(mc, av)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_mc, n_av) = (mc.len(), av.len());
    let draws: Vec<(Vec<usize>, Vec<usize>)> = (0..resamples)
        .map(|_| {
            let i: Vec<usize> = (0..n_mc).map(|_| rng.random_range(0..n_mc)).collect();
            let j: Vec<usize> = (0..n_av).map(|_| rng.random_range(0..n_av)).collect();
            (i, j)
        })
        .collect();
    for q in &mut report.quantities {
        if !q.ratio_defined {
            continue;
        }
        let (xs, ys) = (mc.get(q.key), av.get(q.key));
        let mut ratios: Vec<f64> = draws
            .iter()
            .filter_map(|(i, j)| {
                let a: Vec<f64> = i.iter().map(|&k| xs[k]).collect();
                let b: Vec<f64> = j.iter().map(|&k| ys[k]).collect();
                let (r, ok) = ratio_of(0.5 * sample_variance(&a), sample_variance(&b));
                ok.then_some(r)
            })
            .collect();
        if ratios.is_empty() {
            continue;
        }
        ratios.sort_by(f64::total_cmp);
        let pick = |f: f64| ratios[((f * (ratios.len() - 1) as f64).round() as usize).min(ratios.len() - 1)];
        q.ratio_ci = Some((pick(0.025), pick(0.975)));
    }
    Ok(report)
}
