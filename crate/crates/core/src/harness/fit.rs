use std::collections::BTreeMap;

use super::runner::RegretRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// `(n, median regret)` pairs that entered the fit.
    pub points: Vec<(usize, f64)>,
    /// Samples dropped for nonpositive or non-finite regret.
    pub excluded: usize,
    pub warnings: Vec<String>,
}

impl ScalingFit {
    pub fn predict(&self, n: usize) -> f64 {
        (self.intercept + self.slope * (n as f64).ln()).exp()
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    })
}

/// Least squares of `log(median regret)` on `log n` over `(n, regret)` samples.
pub fn fit_scaling_slope(samples: &[(usize, f64)]) -> Result<ScalingFit> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut excluded = 0;
    let mut warnings = Vec::new();
    for &(n, r) in samples {
        if r > 0.0 && r.is_finite() {
            groups.entry(n).or_default().push(r);
        } else {
            excluded += 1;
            warnings.push(format!("excluded regret {r} at n = {n}"));
        }
    }
    let points: Vec<(usize, f64)> = groups
        .into_iter()
        .filter_map(|(n, mut v)| median(&mut v).map(|m| (n, m)))
        .collect();
    if points.len() < 4 {
        return Err(Error::domain(format!(
            "scaling fit needs at least 4 distinct horizons with positive regret, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, r)| r.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(ScalingFit {
        slope,
        intercept,
        r2,
        points,
        excluded,
        warnings,
    })
}

/// Which final regret a scaling fit uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Against {
    Comparator,
    Offline,
}

/// `(n, regret)` samples of one algorithm from successful cells.
pub fn scaling_samples(records: &[RegretRecord], algorithm: &str, against: Against) -> Vec<(usize, f64)> {
    records
        .iter()
        .filter(|r| r.ok() && r.algorithm == algorithm)
        .filter_map(|r| {
            let v = match against {
                Against::Comparator => r.regret_comparator,
                Against::Offline => r.regret_offline,
            };
            v.map(|v| (r.n, v))
        })
        .collect()
}
