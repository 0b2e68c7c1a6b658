//! Runs both arms for every configured size and writes the results.
//!
//! Output layout under the output directory:
//!
//! * `results.csv`: one row per (quantity, size).
//! * `manifest.json`: config echo, per-solve Newton logs and wall times,
//!   bootstrap intervals for the ratios, versions.
//! * `plots/`: per-quantity series, when requested.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use homav_core::{
    compare_with_bootstrap, run_av, run_mc, ComparisonReport, QuantityKey, SolveRecord,
};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};

pub const CSV_HEADER: &str = "quantity,two_n,mc_mean,mc_var,mc_ci,av_mean,av_var,av_ci,v_mc,v_av,ratio";
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("2N = {two_n}: {source}")]
    Solver {
        two_n: usize,
        #[source]
        source: homav_core::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver { .. } => 3,
            RunError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeResult {
    pub two_n: usize,
    pub report: ComparisonReport,
    pub mc_solves: Vec<SolveRecord>,
    pub av_solves: Vec<SolveRecord>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub sizes: Vec<SizeResult>,
}

/// Bootstrap stream, kept apart from the realization streams.
fn bootstrap_seed(seed: u64, two_n: usize) -> u64 {
    seed ^ 0x6a09_e667_f3bc_c908 ^ (two_n as u64).rotate_left(32)
}

/// Runs every size without touching the file system.
pub fn run_sizes(cfg: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<ExperimentResults, RunError> {
    cfg.validate()?;
    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    for &two_n in &cfg.sizes {
        let start = Instant::now();
        let study = cfg.study(two_n);
        let solver = |source| RunError::Solver { two_n, source };
        let mesh = study.build_mesh().map_err(solver)?;
        progress(&format!("2N = {two_n}: {} plain realizations", cfg.samples_2m));
        let mc = run_mc(&study, &mesh, cfg.samples_2m).map_err(solver)?;
        progress(&format!("2N = {two_n}: {} antithetic pairs", cfg.samples_2m / 2));
        let av = run_av(&study, &mesh, cfg.samples_2m / 2).map_err(solver)?;
        let report = compare_with_bootstrap(
            &mc.samples,
            &av.pair_means,
            BOOTSTRAP_RESAMPLES,
            bootstrap_seed(cfg.seed, two_n),
        )
        .map_err(solver)?;
        sizes.push(SizeResult {
            two_n,
            report,
            mc_solves: mc.solves,
            av_solves: av.solves,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ExperimentResults { config: cfg.clone(), sizes })
}

/// Rows of `results.csv`, header included.
pub fn csv_rows(results: &ExperimentResults) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for key in QuantityKey::ALL {
        for size in &results.sizes {
            let q = size.report.get(key);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                key, size.two_n, q.mc.mean, q.mc.variance, q.mc.ci_halfwidth, q.av.mean, q.av.variance,
                q.av.ci_halfwidth, q.v_mc, q.v_av, q.ratio
            ));
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    seed: u64,
    threads: usize,
    versions: Versions,
    determinism: &'static str,
    sizes: Vec<ManifestSize<'a>>,
}

#[derive(Serialize)]
struct Versions {
    homav: &'static str,
    target_arch: &'static str,
    target_os: &'static str,
}

#[derive(Serialize)]
struct ManifestSize<'a> {
    two_n: usize,
    wall_time_s: f64,
    median_newton_iterations: f64,
    ratio_ci: Vec<RatioInterval>,
    solves: Vec<&'a SolveRecord>,
}

#[derive(Serialize)]
struct RatioInterval {
    quantity: QuantityKey,
    ratio: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn manifest_json(results: &ExperimentResults) -> String {
    let sizes = results
        .sizes
        .iter()
        .map(|s| {
            let solves: Vec<&SolveRecord> = s.mc_solves.iter().chain(&s.av_solves).collect();
            ManifestSize {
                two_n: s.two_n,
                wall_time_s: s.wall_time_s,
                median_newton_iterations: median(solves.iter().map(|r| r.newton.iterations as f64).collect()),
                ratio_ci: s
                    .report
                    .quantities
                    .iter()
                    .map(|q| RatioInterval {
                        quantity: q.key,
                        ratio: q.ratio_defined.then_some(q.ratio),
                        lo: q.ratio_ci.map(|c| c.0),
                        hi: q.ratio_ci.map(|c| c.1),
                    })
                    .collect(),
                solves,
            }
        })
        .collect();
    let manifest = Manifest {
        config: &results.config,
        seed: results.config.seed,
        threads: rayon::current_num_threads(),
        versions: Versions {
            homav: env!("CARGO_PKG_VERSION"),
            target_arch: std::env::consts::ARCH,
            target_os: std::env::consts::OS,
        },
        determinism: "results.csv depends only on the config; bit-identical across thread counts, \
                      but may differ across platforms whose libm powf differs",
        sizes,
    };
    serde_json::to_string_pretty(&manifest).expect("manifest is serializable")
}

fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(contents.as_bytes()).map_err(io_err(path))
}

/// Writes `results.csv` and `manifest.json` into `dir`.
pub fn write_results(results: &ExperimentResults, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_file(&dir.join("results.csv"), &csv_rows(results))?;
    write_file(&dir.join("manifest.json"), &manifest_json(results))
}

/// Per quantity, `variance_<q>.csv` with `two_n,abs_q,v_mc,v_av,flag` and
/// `mean_<q>.csv` with `two_n,abs_q,mc_mean,mc_ci,av_mean,av_ci`. Rows whose
/// variances are not positive carry `flag = zero`, so log-scale plots can
/// skip them. Returns the written paths.
pub fn emit_plot_data(results: &ExperimentResults, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(2 * QuantityKey::ALL.len());
    for key in QuantityKey::ALL {
        let mut var = String::from("two_n,abs_q,v_mc,v_av,flag\n");
        let mut mean = String::from("two_n,abs_q,mc_mean,mc_ci,av_mean,av_ci\n");
        for size in &results.sizes {
            let q = size.report.get(key);
            let abs_q = (size.two_n / 2).pow(2);
            let flag = if q.v_mc > 0.0 && q.v_av > 0.0 { "ok" } else { "zero" };
            var.push_str(&format!("{},{},{},{},{}\n", size.two_n, abs_q, q.v_mc, q.v_av, flag));
            mean.push_str(&format!(
                "{},{},{},{},{},{}\n",
                size.two_n, abs_q, q.mc.mean, q.mc.ci_halfwidth, q.av.mean, q.av.ci_halfwidth
            ));
        }
        for (name, body) in [(format!("variance_{key}.csv"), var), (format!("mean_{key}.csv"), mean)] {
            let path = dir.join(name);
            write_file(&path, &body)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Full run: solve, then write results (and plot series if asked).
pub fn run_experiment(
    cfg: &ExperimentConfig,
    emit_plots: bool,
    progress: impl FnMut(&str),
) -> Result<ExperimentResults, RunError> {
    let results = run_sizes(cfg, progress)?;
    write_results(&results, &cfg.output_dir)?;
    if emit_plots {
        emit_plot_data(&results, &cfg.output_dir.join("plots"))?;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_str;

    fn tiny(extra: &str) -> ExperimentConfig {
        parse_str(&format!("test_case = tc2, sizes = [2, 4], samples_2m = 6, mesh_h = 0.5, seed = 3\n{extra}")).unwrap()
    }

    #[test]
    fn csv_has_eight_rows_per_size() {
        let res = run_sizes(&tiny(""), |_| {}).unwrap();
        let csv = csv_rows(&res);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 8 * 2);
        assert!(lines[1].starts_with("value,2,"));
        assert!(lines[2].starts_with("value,4,"));
        assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 11));
    }

    #[test]
    fn degenerate_law_is_flagged() {
        let res = run_sizes(
            &parse_str("test_case = custom, sizes = [2], samples_2m = 4, mesh_h = 0.5, dist_a = constant(2)").unwrap(),
            |_| {},
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_plot_data(&res, dir.path()).unwrap();
        assert_eq!(files.len(), 16);
        let var = fs::read_to_string(dir.path().join("variance_value.csv")).unwrap();
        assert_eq!(var.lines().nth(1).unwrap(), "2,1,0,0,zero");
        assert!(csv_rows(&res).lines().nth(1).unwrap().ends_with(",NaN"));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(ConfigError::Missing("test_case")).exit_code(), 2);
        let solver = RunError::Solver { two_n: 10, source: homav_core::Error::InvalidParameter("x".into()) };
        assert_eq!(solver.exit_code(), 3);
        let io = RunError::Io { path: "x".into(), source: std::io::Error::other("x") };
        assert_eq!(io.exit_code(), 4);
    }
}
