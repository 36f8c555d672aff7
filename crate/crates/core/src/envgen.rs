//! Synthetic piecewise-linear environments and CSV series ingestion.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{make_scaled_squared_loss, LossOracle};

pub const DEFAULT_NOISE: f64 = 0.05;

/// Attempts at drawing a kink layout whose shape fits in the box.
const MAX_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseLinearSpec {
    pub n: usize,
    #[serde(default = "one")]
    pub d: usize,
    pub kinks: usize,
    /// Target `n ||D^2 w||_1`, summed over coordinates.
    pub budget: f64,
    #[serde(rename = "box", default = "unit")]
    pub box_radius: f64,
    /// Half-width of the uniform target noise.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

fn unit() -> f64 {
    1.0
}

fn default_noise() -> f64 {
    DEFAULT_NOISE
}

impl PiecewiseLinearSpec {
    pub fn new(n: usize, kinks: usize, budget: f64, seed: u64) -> Self {
        Self {
            n,
            d: 1,
            kinks,
            budget,
            box_radius: 1.0,
            noise: DEFAULT_NOISE,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::domain(format!("horizon {} must be at least 3", self.n)));
        }
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(self.budget >= 0.0 && self.budget.is_finite()) {
            return Err(Error::domain(format!("budget {} must be nonnegative", self.budget)));
        }
        if !(self.box_radius > 0.0 && self.box_radius <= 1.0) {
            return Err(Error::domain(format!(
                "box {} must lie in (0, 1]",
                self.box_radius
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::domain(format!("noise {} must be nonnegative", self.noise)));
        }
        if self.kinks > self.n - 2 {
            return Err(Error::domain(format!(
                "{} kinks do not fit in {} interior rounds",
                self.kinks,
                self.n - 2
            )));
        }
        if self.kinks == 0 && self.budget > 0.0 {
            return Err(Error::domain("a positive budget needs at least one kink"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Environment {
    /// Generating comparator, `[t][coordinate]`.
    pub comparator: Vec<Vec<f64>>,
    /// Noisy loss targets, `[t][coordinate]`.
    pub targets: Vec<Vec<f64>>,
    pub losses: Vec<LossOracle>,
}

/// Shape with the given slope changes: zero start, zero initial slope.
fn integrate(n: usize, changes: &[(usize, f64)]) -> Vec<f64> {
    let mut jump = vec![0.0; n];
    for &(at, m) in changes {
        jump[at] += m;
    }
    let mut w = vec![0.0; n];
    let mut slope = 0.0;
    for t in 1..n {
        // A change at t - 1 bends the step from t - 1 to t.
        slope += jump[t - 1];
        w[t] = w[t - 1] + slope;
    }
    w
}

fn subtract_ls_line(w: &mut [f64]) {
    let n = w.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = w.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in w.iter().enumerate() {
        sxy += (t as f64 - mx) * (v - my);
        sxx += (t as f64 - mx) * (t as f64 - mx);
    }
    let b = sxy / sxx;
    for (t, v) in w.iter_mut().enumerate() {
        *v -= my + b * (t as f64 - mx);
    }
}

/// Comparator with `kinks` slope changes at distinct interior rounds, whose
/// magnitudes are a symmetric Dirichlet split of `budget / n` with random
/// signs, centred by removing its least-squares line and shifted by a random
/// line that keeps it inside the box. Targets add uniform noise and are
/// clipped to the box.
pub fn gen_piecewise_linear(spec: &PiecewiseLinearSpec) -> Result<Environment> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.budget / n as f64;
    let mut comparator = vec![vec![0.0; d]; n];
    let mut fitted = false;
    let mut worst = f64::INFINITY;
    for _ in 0..MAX_ATTEMPTS {
        // Interior rounds 1..=n-2 (0-based); a change at t is (D^2 w)_{t-1}.
        let places: Vec<usize> = if spec.kinks == 0 {
            Vec::new()
        } else {
            sample(&mut rng, n - 2, spec.kinks).into_iter().map(|i| i + 1).collect()
        };
        let shares = dirichlet(&mut rng, spec.kinks * d)?;
        let mut cols = Vec::with_capacity(d);
        let mut peak: f64 = 0.0;
        for k in 0..d {
            let changes: Vec<(usize, f64)> = places
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    (t, sign * total * shares[i * d + k])
                })
                .collect();
            let mut w = integrate(n, &changes);
            subtract_ls_line(&mut w);
            peak = peak.max(w.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            cols.push(w);
        }
        worst = worst.min(peak);
        if peak > spec.box_radius {
            continue;
        }
        let slack = spec.box_radius - peak;
        for (k, w) in cols.iter().enumerate() {
            let e0 = rng.random_range(-slack..=slack);
            let e1 = rng.random_range(-slack..=slack);
            for t in 0..n {
                let frac = t as f64 / (n - 1) as f64;
                comparator[t][k] = (w[t] + e0 + (e1 - e0) * frac).clamp(-spec.box_radius, spec.box_radius);
            }
        }
        fitted = true;
        break;
    }
    if !fitted {
        return Err(Error::domain(format!(
            "budget {} with {} kinks does not fit the box: smallest centred peak {worst:.3} over {MAX_ATTEMPTS} draws exceeds {}",
            spec.budget, spec.kinks, spec.box_radius
        )));
    }
    let mut targets = comparator.clone();
    if spec.noise > 0.0 {
        for row in &mut targets {
            for v in row.iter_mut() {
                *v = (*v + rng.random_range(-spec.noise..=spec.noise)).clamp(-1.0, 1.0);
            }
        }
    }
    let losses = targets
        .iter()
        .map(|y| make_scaled_squared_loss(y))
        .collect::<Result<Vec<_>>>()?;
    Ok(Environment {
        comparator,
        targets,
        losses,
    })
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Ok(Vec::new());
    }
    let gamma = Gamma::new(1.0, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    Ok(draws.iter().map(|g| g / sum).collect())
}

/// Writes `t, w1.., y1..` rows with 1-based `t`.
pub fn write_environment_csv<W: Write>(env: &Environment, out: W) -> Result<()> {
    let d = env.comparator.first().map_or(0, |r| r.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=d).map(|k| format!("w{k}")));
    header.extend((1..=d).map(|k| format!("y{k}")));
    w.write_record(&header)?;
    for (t, (c, y)) in env.comparator.iter().zip(&env.targets).enumerate() {
        let mut row = vec![(t + 1).to_string()];
        row.extend(c.iter().map(|v| format!("{v:e}")));
        row.extend(y.iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    #[default]
    MinMax,
}

/// Affine map `x -> scale * x + shift` applied to one column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMap {
    pub scale: f64,
    pub shift: f64,
}

impl ColumnMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.shift
    }

    pub fn invert(&self, y: f64) -> f64 {
        if self.scale == 0.0 {
            -self.shift
        } else {
            (y - self.shift) / self.scale
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// `[t][column]`.
    pub values: Vec<Vec<f64>>,
    pub columns: Vec<String>,
    pub name: String,
    pub source: String,
    pub timestamps: Option<Vec<String>>,
    /// One map per column, from raw to stored values.
    pub maps: Vec<ColumnMap>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[k]).collect()
    }

    /// Maps stored values of column `k` back to raw units.
    pub fn denormalize(&self, k: usize, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| self.maps[k].invert(*v)).collect()
    }
}

/// Reads the named numeric columns (and optionally a timestamp column kept as
/// text) from a CSV file with a header row. Rows are numbered from 1 after the
/// header in error messages.
pub fn ingest_csv(
    path: impl AsRef<Path>,
    columns: &[String],
    timestamp: Option<&str>,
    normalization: Normalization,
) -> Result<Series> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile {
            path: path.display().to_string(),
        });
    }
    if columns.is_empty() {
        return Err(Error::EmptySelection("no value columns selected".into()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::EmptySelection(format!("column `{name}` not in header")))
    };
    let idx = columns.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let ts_idx = timestamp.map(find).transpose()?;

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = idx
            .iter()
            .zip(columns)
            .map(|(&j, name)| {
                let cell = rec.get(j).unwrap_or("").trim();
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::NonNumeric {
                        row: i + 1,
                        column: name.clone(),
                        value: cell.to_string(),
                    }),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        values.push(row);
        if let Some(j) = ts_idx {
            stamps.push(rec.get(j).unwrap_or("").to_string());
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySelection(format!("{} has no data rows", path.display())));
    }
    let maps: Vec<ColumnMap> = (0..columns.len())
        .map(|k| match normalization {
            Normalization::None => ColumnMap { scale: 1.0, shift: 0.0 },
            Normalization::MinMax => {
                let (lo, hi) = values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[k]), hi.max(r[k])));
                if hi > lo {
                    let scale = 2.0 / (hi - lo);
                    ColumnMap { scale, shift: -1.0 - scale * lo }
                } else {
                    // A constant column maps to 0; inverting returns the constant.
                    ColumnMap { scale: 0.0, shift: -lo }
                }
            }
        })
        .collect();
    for row in &mut values {
        for (v, m) in row.iter_mut().zip(&maps) {
            *v = if m.scale == 0.0 { 0.0 } else { m.apply(*v).clamp(-1.0, 1.0) };
        }
    }
    Ok(Series {
        values,
        columns: columns.to_vec(),
        name: path
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        source: path.display().to_string(),
        timestamps: ts_idx.map(|_| stamps),
        maps,
    })
}
