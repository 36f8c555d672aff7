//! Reference learners: projected OGD and FLH over constant-predictor experts,
//! plus the smooth stochastic environment on which OGD is provably slow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::flh::{flh_run, CovariateMode, FlhConfig, Trajectory};
use crate::losses::LossOracle;

/// Projected online gradient descent on a box.
///
/// The step moves along `grad / weight`, the gradient of the unit-curvature
/// squared error, so `step` is the fraction of the way to the target covered
/// per round: `w <- clip(w - step * (w - y))`.
#[derive(Debug, Clone, PartialEq)]
pub struct OgdState {
    pub w: Vec<f64>,
    pub step: f64,
    pub box_radius: f64,
}

impl OgdState {
    /// Starts at the origin. Requires `0 < step < 1`.
    pub fn new(d: usize, step: f64, box_radius: f64) -> Result<Self> {
        if !(step > 0.0 && step < 1.0) {
            return Err(Error::domain(format!("OGD step {step} must lie in (0, 1)")));
        }
        if !(box_radius > 0.0) {
            return Err(Error::domain("box radius must be positive"));
        }
        if d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        Ok(Self {
            w: vec![0.0; d],
            step,
            box_radius,
        })
    }
}

/// One gradient step followed by a coordinate-wise clip. Returns whether the
/// clip changed anything.
pub fn ogd_step(state: &mut OgdState, loss: &LossOracle) -> Result<bool> {
    let g = loss.gradient(&state.w)?;
    let scale = state.step / loss.weight();
    let r = state.box_radius;
    let mut clipped = false;
    for (w, gk) in state.w.iter_mut().zip(g) {
        let z = *w - scale * gk;
        let c = z.clamp(-r, r);
        clipped |= c != z;
        *w = c;
    }
    Ok(clipped)
}

#[derive(Debug, Clone)]
pub struct OgdTrajectory {
    pub predictions: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    /// Rounds whose update needed the clip.
    pub clipped_rounds: usize,
    /// Largest iterate magnitude over all rounds, including the last update.
    pub max_abs_iterate: f64,
}

pub fn ogd_run(losses: &[LossOracle], step: f64, box_radius: f64) -> Result<OgdTrajectory> {
    let d = losses
        .first()
        .ok_or_else(|| Error::domain("ogd_run needs at least one loss"))?
        .dimension();
    let mut state = OgdState::new(d, step, box_radius)?;
    let mut predictions = Vec::with_capacity(losses.len());
    let mut values = Vec::with_capacity(losses.len());
    let mut clipped_rounds = 0;
    let mut max_abs: f64 = 0.0;
    for loss in losses {
        values.push(loss.value(&state.w)?);
        predictions.push(state.w.clone());
        if ogd_step(&mut state, loss)? {
            clipped_rounds += 1;
        }
        max_abs = state.w.iter().fold(max_abs, |m, x| m.max(x.abs()));
    }
    Ok(OgdTrajectory {
        predictions,
        losses: values,
        clipped_rounds,
        max_abs_iterate: max_abs,
    })
}

/// Step grid `{c * n^-a}` restricted to `(0, 1)`, sorted and deduplicated.
pub fn ogd_step_grid(n: usize, scales: &[f64], exponents: &[f64]) -> Vec<f64> {
    let mut grid: Vec<f64> = scales
        .iter()
        .flat_map(|c| exponents.iter().map(move |a| c * (n as f64).powf(-a)))
        .filter(|eta| *eta > 0.0 && *eta < 1.0)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Runs OGD for every step in `grid` and keeps the one with the smallest
/// cumulative loss. Returns `(step, trajectory)`.
pub fn best_tuned_ogd(
    losses: &[LossOracle],
    grid: &[f64],
    box_radius: f64,
) -> Result<(f64, OgdTrajectory)> {
    let mut best: Option<(f64, f64, OgdTrajectory)> = None;
    for &eta in grid {
        let run = ogd_run(losses, eta, box_radius)?;
        let total: f64 = run.losses.iter().sum();
        if best.as_ref().is_none_or(|(_, b, _)| total < *b) {
            best = Some((eta, total, run));
        }
    }
    best.map(|(eta, _, run)| (eta, run))
        .ok_or_else(|| Error::domain("empty OGD step grid"))
}

/// FLH whose experts all see the covariate `[1, 0]`, i.e. fit constants.
pub fn flh_constant_experts_run(sigma: f64, losses: &[LossOracle]) -> Result<Trajectory> {
    let d = losses
        .first()
        .ok_or_else(|| Error::domain("flh_constant_experts_run needs at least one loss"))?
        .dimension();
    let config = FlhConfig::new(d, sigma).with_covariates(CovariateMode::Constant);
    flh_run(config, losses)
}

/// Constants of the smooth stochastic environment.
pub mod linsmooth {
    /// `sqrt(2.2)`.
    pub fn root() -> f64 {
        2.2f64.sqrt()
    }
    /// Bound on the mean sequence and on the noise: `1 / (8 sqrt 2.2)`.
    pub fn theta_bound() -> f64 {
        1.0 / (8.0 * root())
    }
    /// Bound on the labels: `1 / (4 sqrt 2.2)`.
    pub fn label_bound() -> f64 {
        1.0 / (4.0 * root())
    }
    /// Decision box half-width: `1 / (2 sqrt 2.2)`.
    pub fn box_radius() -> f64 {
        1.0 / (2.0 * root())
    }
    /// `f(x) = (2 sqrt 2.2 / 3)(y - x)^2` has curvature weight `4 sqrt 2.2 / 3`.
    pub fn weight() -> f64 {
        4.0 * root() / 3.0
    }
}

#[derive(Debug, Clone)]
pub struct LinsmoothEnvironment {
    /// Mean sequence, with `n ||D^2 theta||_1 <= 1`.
    pub theta: Vec<f64>,
    pub labels: Vec<f64>,
    pub losses: Vec<LossOracle>,
}

/// Piecewise-linear mean of unit TV^1 budget sampled at `t / n`, uniform noise,
/// and losses `(2 sqrt 2.2 / 3)(y - x)^2` on the box `|x| <= 1 / (2 sqrt 2.2)`.
///
/// The mean shape depends only on the seed, so the same seed at different `n`
/// samples the same underlying function.
pub fn linsmooth_environment(n: usize, seed: u64) -> Result<LinsmoothEnvironment> {
    if n == 0 {
        return Err(Error::domain("horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinks = rng.random_range(1..=4usize);
    let mut knots: Vec<f64> = (0..kinks).map(|_| rng.random_range(0.05..0.95)).collect();
    knots.sort_by(f64::total_cmp);
    let raw: Vec<f64> = (0..kinks).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let jumps: Vec<f64> = raw
        .iter()
        .map(|r| {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            s * r / total
        })
        .collect();
    // f(x) = sum_k jump_k (x - knot_k)_+, slope changes summing to 1 in absolute value.
    let shape = |x: f64| -> f64 {
        knots
            .iter()
            .zip(&jumps)
            .map(|(k, j)| j * (x - k).max(0.0))
            .sum()
    };
    let grid = 1000;
    let samples: Vec<f64> = (0..=grid).map(|i| shape(i as f64 / grid as f64)).collect();
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let bound = 0.95 * linsmooth::theta_bound();
    // Shrinking only lowers the TV^1 budget.
    let shrink = if half > bound { bound / half } else { 1.0 };

    let theta: Vec<f64> = (1..=n)
        .map(|t| {
            let v = shrink * (shape(t as f64 / n as f64) - mid);
            v.clamp(-linsmooth::theta_bound(), linsmooth::theta_bound())
        })
        .collect();
    let noise = Uniform::new_inclusive(-linsmooth::theta_bound(), linsmooth::theta_bound())
        .map_err(|e| Error::Numeric(e.to_string()))?;
    let labels: Vec<f64> = theta.iter().map(|th| th + noise.sample(&mut rng)).collect();
    let losses = labels
        .iter()
        .map(|y| {
            LossOracle::quadratic(
                vec![*y],
                linsmooth::weight(),
                linsmooth::box_radius(),
                linsmooth::label_bound(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LinsmoothEnvironment {
        theta,
        labels,
        losses,
    })
}
