//! Per-round loss oracles with certified curvature constants.
//!
//! Every built-in loss is a weighted squared distance
//! `f(w) = (weight / 2) * ||w - target||^2`, evaluated only inside the working
//! box `[-box_radius, box_radius]^d`. For such a loss the curvature constants
//! over the box are available in closed form: with `R` the largest distance
//! between a box point and the target set, the gradient bound is
//! `G = weight * R`, the gradient-Lipschitz constant is `L = weight`, and the
//! exp-concavity factor is `sigma = 1 / (weight * R^2)`.
//!
//! The default loss, [`make_scaled_squared_loss`], picks `weight = 1 / R`
//! with `R = (box_radius + 1) * sqrt(d)`, which makes `G = 1`, `L = 1 / R`
//! and `sigma = 1 / R` for any target in `[-1, 1]^d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default half-width of the working box.
pub const DEFAULT_BOX_RADIUS: f64 = 20.0;

/// Slack allowed on box membership to absorb round-off in upstream clipping.
pub const BOX_SLACK: f64 = 1e-9;

/// Tolerance used by [`verify_constants`] before an inequality counts as violated.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureConstants {
    /// Exp-concavity factor.
    pub sigma: f64,
    /// Lipschitz constant (gradient 2-norm bound) over the working box.
    pub lipschitz_g: f64,
    /// Gradient-Lipschitz constant.
    pub grad_lipschitz_l: f64,
    /// Half-width of the working box.
    pub box_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOracle {
    target: Vec<f64>,
    weight: f64,
    constants: CurvatureConstants,
}

/// Scaled squared loss `||w - target||^2 / (2c)` on the default `[-20, 20]^d` box.
pub fn make_scaled_squared_loss(target: &[f64]) -> Result<LossOracle> {
    make_scaled_squared_loss_in_box(target, DEFAULT_BOX_RADIUS)
}

/// Scaled squared loss on a working box of the given half-width.
///
/// The scale is `c = (box_radius + 1) * sqrt(d)`, the largest distance from a
/// box point to a target in `[-1, 1]^d`, so the loss is exactly 1-Lipschitz.
pub fn make_scaled_squared_loss_in_box(target: &[f64], box_radius: f64) -> Result<LossOracle> {
    if target.is_empty() {
        return Err(Error::domain("loss dimension must be positive"));
    }
    if !(box_radius >= 1.0) {
        return Err(Error::domain(format!(
            "working box radius {box_radius} must be at least 1"
        )));
    }
    if let Some(bad) = target.iter().find(|y| !(y.abs() <= 1.0)) {
        return Err(Error::domain(format!("target component {bad} outside [-1, 1]")));
    }
    let d = target.len() as f64;
    let scale = (box_radius + 1.0) * d.sqrt();
    let weight = 1.0 / scale;
    LossOracle::quadratic(target.to_vec(), weight, box_radius, 1.0)
}

/// Squared-norm scale `c` used by [`make_scaled_squared_loss_in_box`].
pub fn scaled_squared_scale(d: usize, box_radius: f64) -> f64 {
    (box_radius + 1.0) * (d as f64).sqrt()
}

impl LossOracle {
    /// Weighted squared loss `(weight / 2) ||w - target||^2` on `[-box_radius, box_radius]^d`
    /// with constants certified for every target satisfying `||target||_inf <= target_bound`.
    pub fn quadratic(
        target: Vec<f64>,
        weight: f64,
        box_radius: f64,
        target_bound: f64,
    ) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::domain("loss dimension must be positive"));
        }
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::domain(format!("loss weight {weight} must be positive")));
        }
        if !(box_radius > 0.0) || !(target_bound >= 0.0) {
            return Err(Error::domain("box radius and target bound must be positive"));
        }
        if let Some(bad) = target.iter().find(|y| !(y.abs() <= target_bound)) {
            return Err(Error::domain(format!(
                "target component {bad} outside [-{target_bound}, {target_bound}]"
            )));
        }
        let reach = (box_radius + target_bound) * (target.len() as f64).sqrt();
        let constants = CurvatureConstants {
            sigma: 1.0 / (weight * reach * reach),
            lipschitz_g: weight * reach,
            grad_lipschitz_l: weight,
            box_radius,
        };
        Ok(Self {
            target,
            weight,
            constants,
        })
    }

    /// Same loss with caller-supplied constants. Used to build deliberately
    /// mis-certified losses for [`verify_constants`].
    pub fn with_constants(mut self, constants: CurvatureConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn dimension(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    /// Curvature `weight` of the quadratic: the Hessian is `weight * I`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn constants(&self) -> &CurvatureConstants {
        &self.constants
    }

    /// Unconstrained minimizer.
    pub fn minimizer(&self) -> &[f64] {
        &self.target
    }

    fn check_point(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.target.len() {
            return Err(Error::Dimension {
                expected: self.target.len(),
                got: w.len(),
            });
        }
        let limit = self.constants.box_radius + BOX_SLACK;
        match w.iter().find(|x| !(x.abs() <= limit)) {
            Some(x) => Err(Error::domain(format!(
                "point component {x} outside working box [-{r}, {r}]",
                r = self.constants.box_radius
            ))),
            None => Ok(()),
        }
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        self.check_point(w)?;
        Ok(self.value_unchecked(w))
    }

    pub fn gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_point(w)?;
        Ok(self.gradient_unchecked(w))
    }

    pub(crate) fn value_unchecked(&self, w: &[f64]) -> f64 {
        let sq: f64 = w
            .iter()
            .zip(&self.target)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        0.5 * self.weight * sq
    }

    pub(crate) fn gradient_unchecked(&self, w: &[f64]) -> Vec<f64> {
        w.iter()
            .zip(&self.target)
            .map(|(x, y)| self.weight * (x - y))
            .collect()
    }
}

/// Convex loss value at `w`. Fails outside the working box.
pub fn loss_value(oracle: &LossOracle, w: &[f64]) -> Result<f64> {
    oracle.value(w)
}

/// Exact gradient at `w`. Fails outside the working box.
pub fn loss_gradient(oracle: &LossOracle, w: &[f64]) -> Result<Vec<f64>> {
    oracle.gradient(w)
}

/// Slack of the two curvature inequalities at one pair `(x, y)`.
///
/// Positive slack means the inequality holds with room to spare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSlack {
    /// `f(x) + g.(y-x) + L/2 |y-x|^2 - f(y)` (upper quadratic bound).
    pub smoothness: f64,
    /// `f(y) - f(x) - g.(y-x) - sigma/2 (g.(y-x))^2` (exp-concavity lower bound).
    pub exp_concavity: f64,
}

pub fn pair_slack(oracle: &LossOracle, x: &[f64], y: &[f64]) -> Result<PairSlack> {
    let fx = oracle.value(x)?;
    let fy = oracle.value(y)?;
    let g = oracle.gradient(x)?;
    let lin: f64 = g.iter().zip(y.iter().zip(x)).map(|(g, (b, a))| g * (b - a)).sum();
    let dist_sq: f64 = y.iter().zip(x).map(|(b, a)| (b - a) * (b - a)).sum();
    let c = oracle.constants();
    Ok(PairSlack {
        smoothness: fx + lin + 0.5 * c.grad_lipschitz_l * dist_sq - fy,
        exp_concavity: fy - fx - lin - 0.5 * c.sigma * lin * lin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub probes: usize,
    /// Smallest smoothness slack seen (negative means violated).
    pub worst_smoothness_slack: f64,
    /// Smallest exp-concavity slack seen.
    pub worst_exp_concavity_slack: f64,
    /// Number of pairs where either inequality failed by more than the tolerance.
    pub violations: usize,
    /// A violating pair, if any.
    pub counterexample: Option<(Vec<f64>, Vec<f64>)>,
}

impl ConstantsReport {
    pub fn is_valid(&self) -> bool {
        self.violations == 0
    }
}

/// Probes random pairs of the working box against the reported constants.
///
/// Half of the pairs are uniform over the box; the other half put `x` at a
/// box corner as far from the target as possible, which is where the
/// exp-concavity inequality is tight.
pub fn verify_constants(oracle: &LossOracle, probes: usize, seed: u64) -> Result<ConstantsReport> {
    if probes == 0 {
        return Err(Error::domain("verify_constants needs at least one probe"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = oracle.constants().box_radius;
    let d = oracle.dimension();
    let mut report = ConstantsReport {
        probes,
        worst_smoothness_slack: f64::INFINITY,
        worst_exp_concavity_slack: f64::INFINITY,
        violations: 0,
        counterexample: None,
    };
    for i in 0..probes {
        let x: Vec<f64> = if i % 2 == 1 {
            oracle
                .target()
                .iter()
                .map(|t| if *t > 0.0 { -r } else { r })
                .collect()
        } else {
            (0..d).map(|_| rng.random_range(-r..=r)).collect()
        };
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-r..=r)).collect();
        let slack = pair_slack(oracle, &x, &y)?;
        report.worst_smoothness_slack = report.worst_smoothness_slack.min(slack.smoothness);
        report.worst_exp_concavity_slack = report.worst_exp_concavity_slack.min(slack.exp_concavity);
        if slack.smoothness < -VERIFY_TOLERANCE || slack.exp_concavity < -VERIFY_TOLERANCE {
            report.violations += 1;
            if report.counterexample.is_none() {
                report.counterexample = Some((x, y));
            }
        }
    }
    Ok(report)
}
