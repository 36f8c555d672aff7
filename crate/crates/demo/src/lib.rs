//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported function is a thin wrapper over a plain Rust function so the
//! same paths are exercised by native tests.

use flhsions::baselines::{best_tuned_ogd, ogd_step_grid};
use flhsions::envgen::{gen_piecewise_linear, PiecewiseLinearSpec};
use flhsions::flh::{flh_run, FlhConfig};
use flhsions::oracle::{l1_trend_filter, solve_offline, OracleOptions, VariationBudget};
use flhsions::partition::greedy_partition;
use flhsions::Result;
use wasm_bindgen::prelude::*;

/// Largest horizon the page accepts; FLH keeps one expert per round.
pub const MAX_ROUNDS: usize = 2000;

fn js(e: flhsions::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Trend filter of raw values, fitted on their min-max image in `[-1, 1]`
/// and mapped back.
pub fn trend(values: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(hi > lo) {
        return l1_trend_filter(values, lambda);
    }
    let scale = 2.0 / (hi - lo);
    let norm: Vec<f64> = values.iter().map(|v| (v - lo) * scale - 1.0).collect();
    let fit = l1_trend_filter(&norm, lambda)?;
    Ok(fit.iter().map(|v| (v + 1.0) / scale + lo).collect())
}

#[wasm_bindgen]
pub fn trend_filter(values: Vec<f64>, lambda: f64) -> std::result::Result<Vec<f64>, JsError> {
    trend(&values, lambda).map_err(js)
}

/// One synthetic environment with learner tracks.
#[wasm_bindgen]
pub struct Tracking {
    comparator: Vec<f64>,
    targets: Vec<f64>,
    flh: Vec<f64>,
    ogd: Vec<f64>,
    offline: Vec<f64>,
    regret_flh: Vec<f64>,
    regret_ogd: Vec<f64>,
    bin_starts: Vec<u32>,
}

#[wasm_bindgen]
impl Tracking {
    #[wasm_bindgen(getter)]
    pub fn comparator(&self) -> Vec<f64> {
        self.comparator.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn targets(&self) -> Vec<f64> {
        self.targets.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn flh(&self) -> Vec<f64> {
        self.flh.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn ogd(&self) -> Vec<f64> {
        self.ogd.clone()
    }
    /// Offline optimum at the generating budget.
    #[wasm_bindgen(getter)]
    pub fn offline(&self) -> Vec<f64> {
        self.offline.clone()
    }
    /// Cumulative regret against the offline optimum.
    #[wasm_bindgen(getter)]
    pub fn regret_flh(&self) -> Vec<f64> {
        self.regret_flh.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn regret_ogd(&self) -> Vec<f64> {
        self.regret_ogd.clone()
    }
    /// 0-based first rounds of the greedy bins of the offline optimum.
    #[wasm_bindgen(getter)]
    pub fn bin_starts(&self) -> Vec<u32> {
        self.bin_starts.clone()
    }
}

pub fn tracking(n: usize, kinks: usize, budget: f64, noise: f64, seed: u64) -> Result<Tracking> {
    if n > MAX_ROUNDS {
        return Err(flhsions::Error::Domain(format!("at most {MAX_ROUNDS} rounds")));
    }
    let mut spec = PiecewiseLinearSpec::new(n, kinks, budget, seed);
    spec.noise = noise;
    let env = gen_piecewise_linear(&spec)?;
    let losses = &env.losses;
    let sigma = losses[0].constants().sigma;
    let flh = flh_run(FlhConfig::new(1, sigma), losses)?;
    let grid = ogd_step_grid(n, &[0.1, 0.5, 1.0, 2.0], &[0.0, 0.25, 0.5]);
    let (_, ogd) = best_tuned_ogd(losses, &grid, losses[0].constants().box_radius)?;
    let sol = solve_offline(losses, VariationBudget::new(budget, n)?, &OracleOptions::default())?;
    let part = greedy_partition(&sol.u)?;
    let offline_loss: Vec<f64> = losses
        .iter()
        .zip(&sol.u)
        .map(|(l, u)| l.value(u))
        .collect::<Result<_>>()?;
    let cumulate = |learner: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        learner
            .iter()
            .zip(&offline_loss)
            .map(|(a, b)| {
                acc += a - b;
                acc
            })
            .collect()
    };
    let first = |rows: &[Vec<f64>]| rows.iter().map(|r| r[0]).collect::<Vec<f64>>();
    Ok(Tracking {
        comparator: first(&env.comparator),
        targets: first(&env.targets),
        regret_flh: cumulate(&flh.losses),
        regret_ogd: cumulate(&ogd.losses),
        flh: first(&flh.predictions),
        ogd: first(&ogd.predictions),
        offline: sol.coordinate(0),
        bin_starts: part.bins.iter().map(|b| b.start as u32).collect(),
    })
}

#[wasm_bindgen]
pub fn track(n: usize, kinks: usize, budget: f64, noise: f64, seed: u32) -> std::result::Result<Tracking, JsError> {
    tracking(n, kinks, budget, noise, seed as u64).map_err(js)
}

/// Greedy bins of an arbitrary sequence, as 0-based start indices.
#[wasm_bindgen]
pub fn partition_starts(values: Vec<f64>) -> std::result::Result<Vec<u32>, JsError> {
    let rows: Vec<Vec<f64>> = values.iter().map(|v| vec![*v]).collect();
    let p = greedy_partition(&rows).map_err(js)?;
    Ok(p.bins.iter().map(|b| b.start as u32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trend_keeps_lines() {
        let v: Vec<f64> = (0..40).map(|t| 3.0 + 0.5 * t as f64).collect();
        let f = trend(&v, 5.0).unwrap();
        for (a, b) in f.iter().zip(&v) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn tracking_smoke() {
        let t = tracking(200, 3, 4.0, 0.05, 7).unwrap();
        assert_eq!(t.flh.len(), 200);
        assert_eq!(t.bin_starts[0], 0);
        assert!(t.regret_flh.last().unwrap().is_finite());
        assert!(tracking(MAX_ROUNDS + 1, 1, 1.0, 0.0, 1).is_err());
    }
}
