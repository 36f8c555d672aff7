use super::{d2, OfflineSolution, VariationBudget, COMPARATOR_BOX};
use crate::error::{Error, Result};
use crate::losses::LossOracle;

/// Residuals of the optimality conditions of an [`OfflineSolution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `max |grad f_t - lambda (2 s_{t-1} - s_t - s_{t-2}) - gamma_minus + gamma_plus|`.
    pub stationarity: f64,
    /// `|lambda (sum ||D^2 u||_1 - c_n / n)|`.
    pub budget_slackness: f64,
    /// `max |gamma_minus (u + 1)|`.
    pub lower_slackness: f64,
    /// `max |gamma_plus (u - 1)|`.
    pub upper_slackness: f64,
    /// Budget excess and box excess, whichever is larger (0 when feasible).
    pub primal_infeasibility: f64,
    /// Smallest of `lambda` and every `gamma`.
    pub min_dual: f64,
    /// Rounds where `s` disagrees with the sign of a nonzero `D^2 u`, or `|s| > 1`.
    pub sign_violations: usize,
}

impl KktReport {
    /// Largest of the stationarity, slackness and feasibility residuals.
    pub fn max_residual(&self) -> f64 {
        self.stationarity
            .max(self.budget_slackness)
            .max(self.lower_slackness)
            .max(self.upper_slackness)
            .max(self.primal_infeasibility)
    }

    pub fn passes(&self, tol: f64, dual_tol: f64) -> bool {
        self.max_residual() <= tol && self.min_dual >= -dual_tol && self.sign_violations == 0
    }
}

/// Threshold on `|D^2 u|` above which `s` must equal its sign.
pub const SIGN_THRESHOLD: f64 = 1e-8;

pub fn kkt_check(
    solution: &OfflineSolution,
    losses: &[LossOracle],
    budget: VariationBudget,
) -> Result<KktReport> {
    let n = losses.len();
    if solution.u.len() != n
        || solution.signs.len() != n
        || solution.gamma_minus.len() != n
        || solution.gamma_plus.len() != n
    {
        return Err(Error::Dimension {
            expected: n,
            got: solution.u.len(),
        });
    }
    if n < 3 {
        return Err(Error::domain("need at least 3 rounds"));
    }
    let d = losses[0].dimension();
    let lambda = solution.lambda;
    let s = |t: isize, k: usize| -> f64 {
        if t < 0 || t as usize >= n - 2 {
            0.0
        } else {
            solution.signs[t as usize][k]
        }
    };
    let mut rep = KktReport {
        stationarity: 0.0,
        budget_slackness: 0.0,
        lower_slackness: 0.0,
        upper_slackness: 0.0,
        primal_infeasibility: 0.0,
        min_dual: lambda,
        sign_violations: 0,
    };
    let mut tv = 0.0;
    for k in 0..d {
        let col: Vec<f64> = solution.u.iter().map(|r| r[k]).collect();
        let du = d2(&col);
        tv += du.iter().map(|x| x.abs()).sum::<f64>();
        for (j, v) in du.iter().enumerate() {
            let sj = solution.signs[j][k];
            if sj.abs() > 1.0 + 1e-12 || (v.abs() > SIGN_THRESHOLD && (sj - v.signum()).abs() > 1e-9) {
                rep.sign_violations += 1;
            }
        }
        for t in n - 2..n {
            if solution.signs[t][k] != 0.0 {
                rep.sign_violations += 1;
            }
        }
    }
    for (t, loss) in losses.iter().enumerate() {
        let g = loss.gradient(&solution.u[t])?;
        let ti = t as isize;
        for k in 0..d {
            let comb = 2.0 * s(ti - 1, k) - s(ti, k) - s(ti - 2, k);
            let gm = solution.gamma_minus[t][k];
            let gp = solution.gamma_plus[t][k];
            let u = solution.u[t][k];
            let r = g[k] - lambda * comb - gm + gp;
            rep.stationarity = rep.stationarity.max(r.abs());
            rep.lower_slackness = rep.lower_slackness.max((gm * (u + COMPARATOR_BOX)).abs());
            rep.upper_slackness = rep.upper_slackness.max((gp * (u - COMPARATOR_BOX)).abs());
            rep.min_dual = rep.min_dual.min(gm).min(gp);
            rep.primal_infeasibility = rep.primal_infeasibility.max(u.abs() - COMPARATOR_BOX);
        }
    }
    rep.budget_slackness = (lambda * (tv - budget.limit())).abs();
    rep.primal_infeasibility = rep.primal_infeasibility.max(tv - budget.limit()).max(0.0);
    Ok(rep)
}
