//! Follow-the-Leading-History over SIONS experts.
//!
//! One expert is started every round. The expert started at round `tau`
//! receives the monomial covariate `[1, t - tau + 1]` at round `t`, so a fixed
//! coefficient pair encodes an intercept and a slope measured from its own
//! start. Predictions are mixed by a probability vector that is updated
//! multiplicatively with `exp(-sigma * loss)` and then shrunk by
//! `1 - 1/(t+1)` to make room for the newcomer at weight `1/(t+1)`.

use crate::error::{Error, Result};
use crate::losses::LossOracle;
use crate::sions::{Covariate, SionsConfig, SionsState, DEFAULT_CLIP, DEFAULT_EPSILON};

/// Which covariate each expert receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovariateMode {
    /// `[1, t - tau + 1]`: each expert fits a line from its start.
    #[default]
    Monomial,
    /// `[1, 0]` forever: each expert fits a constant.
    Constant,
}

impl CovariateMode {
    /// Covariate for an expert started at `start` playing round `t` (both 1-based).
    pub fn covariate(self, start: usize, t: usize) -> Covariate {
        match self {
            CovariateMode::Monomial => [1.0, (t + 1 - start) as f64],
            CovariateMode::Constant => [1.0, 0.0],
        }
    }
}

/// Expert pool pruning. Bound checks assume [`Pruning::None`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pruning {
    #[default]
    None,
    /// Expert started at `tau = r 2^k` (odd `r`) lives `4 * 2^k + 1` rounds.
    Geometric,
}

impl Pruning {
    fn alive(self, start: usize, t: usize) -> bool {
        match self {
            Pruning::None => true,
            Pruning::Geometric => {
                let lifetime = 4usize
                    .saturating_mul(1usize << start.trailing_zeros())
                    .saturating_add(1);
                t - start < lifetime
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlhConfig {
    pub d: usize,
    /// Exp-concavity factor; also the experts' `eta`.
    pub sigma: f64,
    pub epsilon: f64,
    pub clip_c: f64,
    pub covariates: CovariateMode,
    pub pruning: Pruning,
}

impl FlhConfig {
    /// `epsilon = 2`, `C = 20`, monomial covariates, no pruning.
    pub fn new(d: usize, sigma: f64) -> Self {
        Self {
            d,
            sigma,
            epsilon: DEFAULT_EPSILON,
            clip_c: DEFAULT_CLIP,
            covariates: CovariateMode::Monomial,
            pruning: Pruning::None,
        }
    }

    pub fn with_covariates(mut self, mode: CovariateMode) -> Self {
        self.covariates = mode;
        self
    }

    pub fn expert_config(&self) -> SionsConfig {
        SionsConfig {
            d: self.d,
            eta: self.sigma,
            epsilon: self.epsilon,
            clip_c: self.clip_c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Expert {
    pub start: usize,
    pub state: SionsState,
}

#[derive(Debug, Clone)]
pub struct FlhEnsemble {
    config: FlhConfig,
    experts: Vec<Expert>,
    weights: Vec<f64>,
    /// Current round, 1-based.
    round: usize,
    predictions: Option<Vec<Vec<f64>>>,
}

impl FlhEnsemble {
    /// Round 1 with the single expert `E_1` at weight 1.
    pub fn new(config: FlhConfig) -> Result<Self> {
        let first = SionsState::new(config.expert_config())?;
        Ok(Self {
            config,
            experts: vec![Expert {
                start: 1,
                state: first,
            }],
            weights: vec![1.0],
            round: 1,
            predictions: None,
        })
    }

    pub fn config(&self) -> &FlhConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// This round's cached prediction of the expert started at `start`.
    pub fn expert_prediction(&self, start: usize) -> Option<&[f64]> {
        let preds = self.predictions.as_ref()?;
        let idx = self.experts.iter().position(|e| e.start == start)?;
        Some(&preds[idx])
    }

    /// Weighted average of the experts' predictions for this round.
    pub fn predict(&mut self) -> Vec<f64> {
        let t = self.round;
        let mode = self.config.covariates;
        let preds: Vec<Vec<f64>> = self
            .experts
            .iter_mut()
            .map(|e| e.state.predict(mode.covariate(e.start, t)))
            .collect();
        let mut p = vec![0.0; self.config.d];
        for (w, y) in self.weights.iter().zip(&preds) {
            for (pk, yk) in p.iter_mut().zip(y) {
                *pk += w * yk;
            }
        }
        self.predictions = Some(preds);
        p
    }

    /// Weight update, addition step, and expert updates for this round's loss.
    pub fn update(&mut self, loss: &LossOracle) -> Result<()> {
        let preds = self
            .predictions
            .take()
            .ok_or_else(|| Error::domain("update called before predict"))?;
        let t = self.round;
        let sigma = self.config.sigma;

        // Multiplicative update in log space.
        let mut logw = Vec::with_capacity(preds.len());
        for (w, y) in self.weights.iter().zip(&preds) {
            let l = loss.value(y)?;
            logw.push(if *w > 0.0 { w.ln() - sigma * l } else { f64::NEG_INFINITY });
        }
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(Error::Numeric("all expert weights vanished".into()));
        }
        let mut total = 0.0;
        for (w, lw) in self.weights.iter_mut().zip(&logw) {
            *w = (lw - top).exp();
            total += *w;
        }
        let keep = 1.0 - 1.0 / (t as f64 + 1.0);
        for w in self.weights.iter_mut() {
            *w = *w / total * keep;
        }

        let mode = self.config.covariates;
        for e in self.experts.iter_mut() {
            e.state
                .update(loss, mode.covariate(e.start, t + 1))
                .map_err(|source| Error::Expert {
                    start: e.start,
                    source: Box::new(source),
                })?;
        }
        self.experts.push(Expert {
            start: t + 1,
            state: SionsState::new(self.config.expert_config())?,
        });
        self.weights.push(1.0 / (t as f64 + 1.0));
        self.round = t + 1;

        if self.config.pruning != Pruning::None {
            let pruning = self.config.pruning;
            let next = self.round;
            let mut i = 0;
            while i < self.experts.len() {
                if pruning.alive(self.experts[i].start, next) {
                    i += 1;
                } else {
                    self.experts.remove(i);
                    self.weights.remove(i);
                }
            }
            let s: f64 = self.weights.iter().sum();
            self.weights.iter_mut().for_each(|w| *w /= s);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub predictions: Vec<Vec<f64>>,
    pub losses: Vec<f64>,
    pub ensemble: FlhEnsemble,
}

/// Runs the full protocol over `losses`.
pub fn flh_run(config: FlhConfig, losses: &[LossOracle]) -> Result<Trajectory> {
    if losses.is_empty() {
        return Err(Error::domain("flh_run needs at least one loss"));
    }
    if let Some(l) = losses.iter().find(|l| l.dimension() != config.d) {
        return Err(Error::Dimension {
            expected: config.d,
            got: l.dimension(),
        });
    }
    let mut ensemble = FlhEnsemble::new(config)?;
    let mut predictions = Vec::with_capacity(losses.len());
    let mut values = Vec::with_capacity(losses.len());
    for loss in losses {
        let p = ensemble.predict();
        values.push(loss.value(&p)?);
        predictions.push(p);
        ensemble.update(loss)?;
    }
    Ok(Trajectory {
        predictions,
        losses: values,
        ensemble,
    })
}

/// `4 log(n) / sigma`: FLH's regret against any single expert on any interval.
pub fn adaptive_overhead_bound(sigma: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::domain("horizon must be at least 2"));
    }
    if !(sigma > 0.0) {
        return Err(Error::domain("sigma must be positive"));
    }
    Ok(4.0 * (n as f64).ln() / sigma)
}
