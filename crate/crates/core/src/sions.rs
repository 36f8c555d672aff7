//! Scale-invariant online Newton step over lifted linear predictors.
//!
//! The learner keeps a coefficient vector `v` in `R^{2d}`. Given a covariate
//! `x` in `R^2` it plays `w[k] = x . v[2k..2k+2]` for each output coordinate.
//! After the loss arrives it takes the Newton-style step
//! `u = v - A^{-1} grad`, where `grad` is the loss gradient lifted through the
//! covariate and `A` accumulates `eta grad grad^T`, and then projects `u` in
//! the `A`-norm onto the slabs `|x_next . w[2k..2k+2]| <= C` induced by the
//! next covariate.

use crate::error::{Error, Result};
use crate::losses::LossOracle;
use crate::psd::{mahalanobis_project, CorrectionMatrix, SlabSet, DEFAULT_PROJECTION_TOL};

pub type Covariate = [f64; 2];

pub const DEFAULT_EPSILON: f64 = 2.0;
pub const DEFAULT_CLIP: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SionsConfig {
    /// Output dimension.
    pub d: usize,
    /// Weight of the gradient outer products (the exp-concavity factor).
    pub eta: f64,
    /// Initial diagonal of the correction matrix.
    pub epsilon: f64,
    /// Slab radius for predictions.
    pub clip_c: f64,
}

impl SionsConfig {
    /// Defaults `epsilon = 2`, `C = 20`.
    pub fn new(d: usize, eta: f64) -> Self {
        Self {
            d,
            eta,
            epsilon: DEFAULT_EPSILON,
            clip_c: DEFAULT_CLIP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::domain("dimension must be positive"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::domain(format!("eta {} must be positive", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon {} must be positive", self.epsilon)));
        }
        if !(self.clip_c >= 1.0 && self.clip_c.is_finite()) {
            return Err(Error::domain(format!("clip radius {} must be at least 1", self.clip_c)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SionsState {
    config: SionsConfig,
    v: Vec<f64>,
    correction: CorrectionMatrix,
    last_covariate: Option<Covariate>,
    last_prediction: Vec<f64>,
    round: usize,
    max_lifted_gradient: f64,
}

/// `[g_1 x, ..., g_d x]`.
pub fn lifted_gradient(g: &[f64], x: Covariate) -> Vec<f64> {
    g.iter().flat_map(|gk| [gk * x[0], gk * x[1]]).collect()
}

/// Plays `w[k] = x . v[2k..2k+2]`.
pub fn lifted_prediction(v: &[f64], x: Covariate) -> Vec<f64> {
    v.chunks_exact(2).map(|b| x[0] * b[0] + x[1] * b[1]).collect()
}

impl SionsState {
    /// Fresh learner at `v = 0`, `A = eps I`.
    pub fn new(config: SionsConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            v: vec![0.0; 2 * config.d],
            correction: CorrectionMatrix::new(2 * config.d, config.epsilon)?,
            last_covariate: None,
            last_prediction: vec![0.0; config.d],
            round: 0,
            max_lifted_gradient: 0.0,
            config,
        })
    }

    /// Learner with a chosen starting coefficient vector.
    pub fn with_coefficients(config: SionsConfig, v: Vec<f64>) -> Result<Self> {
        let mut state = Self::new(config)?;
        if v.len() != 2 * config.d {
            return Err(Error::Dimension {
                expected: 2 * config.d,
                got: v.len(),
            });
        }
        state.v = v;
        Ok(state)
    }

    pub fn config(&self) -> &SionsConfig {
        &self.config
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.v
    }

    pub fn correction(&self) -> &CorrectionMatrix {
        &self.correction
    }

    /// Number of completed updates.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Largest lifted-gradient 2-norm seen so far.
    pub fn max_lifted_gradient(&self) -> f64 {
        self.max_lifted_gradient
    }

    pub fn last_prediction(&self) -> &[f64] {
        &self.last_prediction
    }

    /// Prediction for this round's covariate. Components are clamped to
    /// `[-C, C]`, which only removes projection round-off.
    pub fn predict(&mut self, covariate: Covariate) -> Vec<f64> {
        let c = self.config.clip_c;
        let w: Vec<f64> = lifted_prediction(&self.v, covariate)
            .into_iter()
            .map(|p| p.clamp(-c, c))
            .collect();
        self.last_covariate = Some(covariate);
        self.last_prediction.clone_from(&w);
        w
    }

    /// Newton step on this round's loss, then projection onto the slabs of
    /// the next covariate.
    pub fn update(&mut self, loss: &LossOracle, next_covariate: Covariate) -> Result<()> {
        let x = self
            .last_covariate
            .take()
            .ok_or_else(|| Error::domain("update called before predict"))?;
        if loss.dimension() != self.config.d {
            return Err(Error::Dimension {
                expected: self.config.d,
                got: loss.dimension(),
            });
        }
        let g = loss.gradient(&self.last_prediction)?;
        let lifted = lifted_gradient(&g, x);
        let norm = lifted.iter().map(|z| z * z).sum::<f64>().sqrt();
        self.max_lifted_gradient = self.max_lifted_gradient.max(norm);
        self.round += 1;
        let u: Vec<f64> = if norm == 0.0 {
            self.v.clone()
        } else {
            self.correction.rank_one_update(&lifted, self.config.eta)?;
            let step = self.correction.solve(&lifted);
            self.v.iter().zip(&step).map(|(v, s)| v - s).collect()
        };
        let slabs = SlabSet::from_covariate(self.config.d, next_covariate, self.config.clip_c)?;
        self.v = mahalanobis_project(&u, &self.correction, &slabs, DEFAULT_PROJECTION_TOL)?;
        if self.v.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric("coefficient vector became non-finite".into()));
        }
        Ok(())
    }
}

/// `eps |w|^2 / 2 + (2d / sigma) log(1 + sigma T G^2 / (d eps))` with `sigma = eta`.
pub fn sions_static_regret_bound(
    config: &SionsConfig,
    horizon: usize,
    comparator_norm_sq: f64,
    g: f64,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    let d = config.d as f64;
    let sigma = config.eta;
    let eps = config.epsilon;
    Ok(eps * comparator_norm_sq / 2.0
        + (2.0 * d / sigma) * (1.0 + sigma * horizon as f64 * g * g / (d * eps)).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::make_scaled_squared_loss;

    fn cfg(d: usize, eta: f64) -> SionsConfig {
        SionsConfig::new(d, eta)
    }

    #[test]
    fn zero_coefficients_predict_zero() {
        let mut s = SionsState::new(cfg(3, 1.0)).unwrap();
        assert_eq!(s.predict([1.0, 17.0]), vec![0.0; 3]);
    }

    #[test]
    fn inner_products() {
        let mut s = SionsState::with_coefficients(cfg(1, 1.0), vec![0.5, 0.1]).unwrap();
        assert!((s.predict([1.0, 3.0])[0] - 0.8).abs() < 1e-15);
        let mut s = SionsState::with_coefficients(cfg(2, 1.0), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.predict([1.0, 2.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn zero_gradient_round_keeps_state() {
        let mut s = SionsState::new(cfg(1, 1.0)).unwrap();
        s.predict([1.0, 1.0]);
        let loss = make_scaled_squared_loss(&[0.0]).unwrap();
        s.update(&loss, [1.0, 2.0]).unwrap();
        assert_eq!(s.coefficients(), &[0.0, 0.0]);
        assert_eq!(s.correction().matrix()[(0, 0)], 2.0);
        assert_eq!(s.correction().matrix()[(0, 1)], 0.0);
    }

    #[test]
    fn update_requires_predict() {
        let mut s = SionsState::new(cfg(1, 1.0)).unwrap();
        let loss = make_scaled_squared_loss(&[0.0]).unwrap();
        assert!(s.update(&loss, [1.0, 1.0]).is_err());
    }

    #[test]
    fn bound_closed_forms() {
        let c = SionsConfig {
            d: 1,
            eta: 1.0,
            epsilon: 2.0,
            clip_c: 20.0,
        };
        let b = sions_static_regret_bound(&c, 1, 0.0, 1.0).unwrap();
        assert!((b - 2.0 * 1.5f64.ln()).abs() < 1e-15);
        let b = sions_static_regret_bound(&c, 1000, 3.0, 0.0).unwrap();
        assert_eq!(b, 3.0);
        assert!(sions_static_regret_bound(&c, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn invalid_config() {
        assert!(SionsState::new(cfg(0, 1.0)).is_err());
        assert!(SionsState::new(cfg(1, 0.0)).is_err());
        let mut c = cfg(1, 1.0);
        c.clip_c = 0.5;
        assert!(SionsState::new(c).is_err());
    }
}
