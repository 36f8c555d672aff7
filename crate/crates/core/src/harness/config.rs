use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envgen::DEFAULT_NOISE;
use crate::error::{Error, Result};
use crate::oracle::OracleOptions;

/// Smallest horizon a cell may use.
pub const MIN_HORIZON: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Horizons; may be empty.
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub d: usize,
    /// Seeds `seed_base .. seed_base + seeds` per horizon.
    #[serde(default = "default_seeds")]
    pub seeds: u64,
    #[serde(default)]
    pub seed_base: u64,
    pub environment: EnvironmentConfig,
    /// Required whenever `n` is nonempty.
    #[serde(default)]
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    /// Write per-round cumulative regret for every cell.
    #[serde(default)]
    pub traces: bool,
    /// Output directory; the command line may override it.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub budget: BudgetSchedule,
    pub kinks: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

/// `C_n` as a function of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BudgetSchedule {
    Fixed(f64),
    /// `scale * n^exponent`.
    Power { scale: f64, exponent: f64 },
}

impl BudgetSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            BudgetSchedule::Fixed(c) => c,
            BudgetSchedule::Power { scale, exponent } => scale * (n as f64).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmConfig {
    /// FLH over SIONS experts with monomial covariates.
    FlhSions {
        /// Defaults to the losses' certified exp-concavity factor.
        sigma: Option<f64>,
        epsilon: Option<f64>,
        clip: Option<f64>,
    },
    /// FLH over experts that fit constants.
    FlhConstant { sigma: Option<f64> },
    /// Projected OGD, best step in hindsight over `{scale * n^-exponent}`.
    Ogd {
        #[serde(default = "default_ogd_scales")]
        scales: Vec<f64>,
        #[serde(default = "default_ogd_exponents")]
        exponents: Vec<f64>,
    },
}

impl AlgorithmConfig {
    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmConfig::FlhSions { .. } => "flh-sions",
            AlgorithmConfig::FlhConstant { .. } => "flh-constant",
            AlgorithmConfig::Ogd { .. } => "ogd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Allowed shortfall of offline-optimal regret below comparator regret.
    #[serde(default = "default_dominance_tol")]
    pub dominance_tol: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            tol: default_tol(),
            dominance_tol: default_dominance_tol(),
        }
    }
}

impl OracleConfig {
    pub fn options(&self) -> OracleOptions {
        OracleOptions {
            tol: self.tol,
            ..OracleOptions::default()
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn one() -> usize {
    1
}
fn default_seeds() -> u64 {
    5
}
fn default_noise() -> f64 {
    DEFAULT_NOISE
}
fn yes() -> bool {
    true
}
fn default_tol() -> f64 {
    1e-8
}
fn default_dominance_tol() -> f64 {
    1e-6
}
pub fn default_ogd_scales() -> Vec<f64> {
    vec![0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]
}
pub fn default_ogd_exponents() -> Vec<f64> {
    vec![0.0, 0.25, 0.5]
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let Some(n) = self.n.iter().find(|&&n| n < MIN_HORIZON) {
            return bad(format!("horizon {n} is below {MIN_HORIZON}"));
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.seeds == 0 && !self.n.is_empty() {
            return bad("seeds must be positive".into());
        }
        if !self.n.is_empty() && self.algorithms.is_empty() {
            return bad("no algorithms listed".into());
        }
        let env = &self.environment;
        if !(env.noise >= 0.0 && env.noise.is_finite()) {
            return bad(format!("noise {} must be nonnegative", env.noise));
        }
        for &n in &self.n {
            let c = env.budget.at(n);
            if !(c >= 0.0 && c.is_finite()) {
                return bad(format!("budget {c} at n = {n} must be nonnegative"));
            }
            if env.kinks == 0 && c > 0.0 {
                return bad(format!("budget {c} at n = {n} needs at least one kink"));
            }
            if env.kinks > n - 2 {
                return bad(format!("{} kinks do not fit n = {n}", env.kinks));
            }
        }
        for a in &self.algorithms {
            let positive = |name: &str, v: Option<f64>| match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(Error::Config(format!("{}: {name} = {x} must be positive", a.label())))
                }
                _ => Ok(()),
            };
            match a {
                AlgorithmConfig::FlhSions { sigma, epsilon, clip } => {
                    positive("sigma", *sigma)?;
                    positive("epsilon", *epsilon)?;
                    positive("clip", *clip)?;
                }
                AlgorithmConfig::FlhConstant { sigma } => positive("sigma", *sigma)?,
                AlgorithmConfig::Ogd { scales, exponents } => {
                    if scales.is_empty() || exponents.is_empty() {
                        return bad("ogd: empty step grid".into());
                    }
                    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                        return bad("ogd: scales must be positive".into());
                    }
                    if exponents.iter().any(|e| !e.is_finite()) {
                        return bad("ogd: exponents must be finite".into());
                    }
                }
            }
        }
        if !(self.oracle.tol > 0.0) || !(self.oracle.dominance_tol >= 0.0) {
            return bad("oracle tolerances must be positive".into());
        }
        Ok(())
    }
}
