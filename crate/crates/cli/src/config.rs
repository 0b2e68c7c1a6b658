//! Experiment configuration: a flat `key = value` file.
//!
//! ```text
//! # comments start with '#'
//! test_case = tc1
//! seed = 42
//! sizes = [10, 20]
//! dist_c = bernoulli(1, 3)
//! ```
//!
//! Entries are separated by newlines or by top-level commas, so
//! `test_case = tc1, seed = 42` is a complete file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use homav_core::mesh::validate_mesh_size;
use homav_core::{DistributionSpec, NewtonConfig, StudyConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` given more than once")]
    DuplicateKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{key}: {message}")]
    Field { key: &'static str, message: String },
}

fn field_err(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { key, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestCase {
    Tc1,
    Tc2,
    Tc3,
    Custom,
}

impl TestCase {
    /// The law of `c` fixed by the test case, `None` for `custom`.
    pub fn dist_c(self) -> Option<DistributionSpec> {
        match self {
            TestCase::Tc1 => Some(DistributionSpec::Constant(0.0)),
            TestCase::Tc2 => Some(DistributionSpec::Constant(1.0)),
            TestCase::Tc3 => Some(DistributionSpec::Bernoulli { lo: 1.0, hi: 3.0 }),
            TestCase::Custom => None,
        }
    }
}

impl FromStr for TestCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tc1" => Ok(TestCase::Tc1),
            "tc2" => Ok(TestCase::Tc2),
            "tc3" => Ok(TestCase::Tc3),
            "custom" => Ok(TestCase::Custom),
            _ => Err(format!("expected one of tc1, tc2, tc3, custom; got `{s}`")),
        }
    }
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestCase::Tc1 => "tc1",
            TestCase::Tc2 => "tc2",
            TestCase::Tc3 => "tc3",
            TestCase::Custom => "custom",
        })
    }
}

pub const DEFAULT_DIST_A: DistributionSpec = DistributionSpec::Bernoulli { lo: 3.0, hi: 23.0 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub test_case: TestCase,
    pub p: f64,
    pub d: usize,
    pub xi: [f64; 2],
    /// Values of `2N`; the domain `Q_N` has `N = 2N/2` unit cells per side.
    pub sizes: Vec<usize>,
    pub samples_2m: usize,
    pub mesh_h: f64,
    pub newton_tol: f64,
    pub seed: u64,
    pub dist_a: DistributionSpec,
    pub dist_c: DistributionSpec,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for a test case; `custom` starts from `c = 0`.
    pub fn defaults(test_case: TestCase) -> Self {
        Self {
            test_case,
            p: 4.0,
            d: 2,
            xi: [1.0, 1.0],
            sizes: vec![10, 20, 40],
            samples_2m: 100,
            mesh_h: 0.2,
            newton_tol: 1e-5,
            seed: 0,
            dist_a: DEFAULT_DIST_A,
            dist_c: test_case.dist_c().unwrap_or(DistributionSpec::Constant(0.0)),
            output_dir: PathBuf::from("results"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.p.is_finite() && self.p >= 2.0) {
            return Err(field_err("p", format!("must be >= 2, got {}", self.p)));
        }
        if self.d != 2 {
            return Err(field_err("d", format!("only d = 2 is supported, got {}", self.d)));
        }
        if !self.xi.iter().all(|x| x.is_finite()) {
            return Err(field_err("xi", "components must be finite"));
        }
        if self.sizes.is_empty() {
            return Err(field_err("sizes", "at least one size is required"));
        }
        if let Some(s) = self.sizes.iter().find(|&&s| s < 2 || !s.is_multiple_of(2)) {
            return Err(field_err("sizes", format!("2N values must be even and >= 2, got {s}")));
        }
        if self.samples_2m < 4 || !self.samples_2m.is_multiple_of(2) {
            return Err(field_err("samples_2m", format!("must be even and >= 4, got {}", self.samples_2m)));
        }
        validate_mesh_size(self.mesh_h).map_err(|e| field_err("mesh_h", e.to_string()))?;
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return Err(field_err("newton_tol", format!("must be positive, got {}", self.newton_tol)));
        }
        self.dist_a.validate_for_a().map_err(|e| field_err("dist_a", e.to_string()))?;
        self.dist_c.validate_for_c().map_err(|e| field_err("dist_c", e.to_string()))?;
        Ok(())
    }

    /// Single-size study for `2N = two_n`.
    pub fn study(&self, two_n: usize) -> StudyConfig {
        StudyConfig {
            p: self.p,
            xi: self.xi,
            side: two_n / 2,
            mesh_h: self.mesh_h,
            newton: NewtonConfig::with_tol(self.newton_tol),
            seed: self.seed,
            dist_a: self.dist_a,
            dist_c: self.dist_c,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse_str(&text)
}

/// Splits on top-level commas, leaving those inside brackets and parentheses.
fn split_entries(line: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in line.char_indices() {
        match ch {
            '[' | '(' => depth += 1,
            ']' | ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(&line[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&line[start..]);
    out
}

const KEYS: [&str; 12] = [
    "test_case", "p", "d", "xi", "sizes", "samples_2m", "mesh_h", "newton_tol", "seed", "dist_a", "dist_c",
    "output_dir",
];

pub fn parse_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        for entry in split_entries(content) {
            let entry = entry.trim();
            if entry.is_empty() {
                continue;
            }
            let (key, value) = entry
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{entry}`") })?;
            let key = key.trim();
            let known = KEYS
                .iter()
                .find(|&&k| k == key)
                .ok_or_else(|| ConfigError::UnknownKey { line, key: key.to_string() })?;
            if entries.insert(known, (line, value.trim().to_string())).is_some() {
                return Err(ConfigError::DuplicateKey { line, key: key.to_string() });
            }
        }
    }

    let test_case: TestCase = match entries.get("test_case") {
        Some((_, v)) => v.parse().map_err(|m| field_err("test_case", m))?,
        None => return Err(ConfigError::Missing("test_case")),
    };
    let mut cfg = ExperimentConfig::defaults(test_case);
    for (&key, (_, value)) in &entries {
        let v = value.as_str();
        match key {
            "test_case" => {}
            "p" => cfg.p = parse_real(key, v)?,
            "d" => cfg.d = parse_int(key, v)?,
            "xi" => {
                let xs = parse_list(key, v, |s| parse_real(key, s))?;
                cfg.xi = xs
                    .try_into()
                    .map_err(|xs: Vec<f64>| field_err(key, format!("expected 2 components, got {}", xs.len())))?;
            }
            "sizes" => cfg.sizes = parse_list(key, v, |s| parse_int(key, s))?,
            "samples_2m" => cfg.samples_2m = parse_int(key, v)?,
            "mesh_h" => cfg.mesh_h = parse_real(key, v)?,
            "newton_tol" => cfg.newton_tol = parse_real(key, v)?,
            "seed" => cfg.seed = parse_int(key, v)?,
            "dist_a" => cfg.dist_a = parse_distribution(key, v)?,
            "dist_c" => cfg.dist_c = parse_distribution(key, v)?,
            "output_dir" => cfg.output_dir = PathBuf::from(unquote(v)),
            _ => unreachable!("key list and match arms disagree"),
        }
    }
    if let Some(fixed) = test_case.dist_c() {
        if cfg.dist_c != fixed {
            return Err(field_err("dist_c", format!("{test_case} fixes dist_c = {fixed}; use test_case = custom")));
        }
        if cfg.dist_a != DEFAULT_DIST_A {
            return Err(field_err("dist_a", format!("{test_case} fixes dist_a = {DEFAULT_DIST_A}; use test_case = custom")));
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

fn parse_real(key: &'static str, s: &str) -> Result<f64, ConfigError> {
    s.trim().parse().map_err(|_| field_err(key, format!("expected a number, got `{}`", s.trim())))
}

fn parse_int<T: FromStr>(key: &'static str, s: &str) -> Result<T, ConfigError> {
    s.trim().parse().map_err(|_| field_err(key, format!("expected a non-negative integer, got `{}`", s.trim())))
}

/// `[x, y, ...]` or `(x, y, ...)`.
fn parse_list<T>(
    key: &'static str,
    s: &str,
    item: impl Fn(&str) -> Result<T, ConfigError>,
) -> Result<Vec<T>, ConfigError> {
    let s = s.trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .or_else(|| s.strip_prefix('(').and_then(|r| r.strip_suffix(')')))
        .ok_or_else(|| field_err(key, format!("expected a bracketed list, got `{s}`")))?;
    if inner.trim().is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(item).collect()
}

/// `constant(v)` or `bernoulli(lo, hi)`.
pub fn parse_distribution(key: &'static str, s: &str) -> Result<DistributionSpec, ConfigError> {
    let s = s.trim();
    let bad = || field_err(key, format!("expected constant(v) or bernoulli(lo, hi), got `{s}`"));
    let (name, rest) = s.split_once('(').ok_or_else(bad)?;
    let args = parse_list(key, &format!("({rest}"), |v| parse_real(key, v))?;
    match (name.trim(), args.as_slice()) {
        ("constant", &[v]) => Ok(DistributionSpec::Constant(v)),
        ("bernoulli", &[lo, hi]) => Ok(DistributionSpec::Bernoulli { lo, hi }),
        _ => Err(bad()),
    }
}
