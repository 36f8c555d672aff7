//! Offline optimum under a second-order total-variation budget.
//!
//! The program is
//!
//! ```text
//! min  sum_t f_t(u_t)   s.t.  sum_k ||D^2 u[k]||_1 <= c_n / n,   |u_t[k]| <= 1
//! ```
//!
//! solved through its penalized form `+ lambda ||D^2 u||_1` by bisection on
//! `lambda`. Each penalized solve runs ADMM; the final iterate's sparsity
//! pattern is then solved exactly for `u`, `lambda` and the multipliers, so
//! the returned certificates satisfy stationarity to linear-solve accuracy.
//!
//! Conventions: `(D^2 u)_t = u_t - 2 u_{t+1} + u_{t+2}` for `t = 1..n-2`, and
//! `s_t` is paired with that row, so `s_{n-1} = s_n = 0`. Stationarity reads
//! `grad f_t(u_t) = lambda (2 s_{t-1} - s_t - s_{t-2}) + gamma_minus_t - gamma_plus_t`.

mod admm;
mod banded;
mod io;
mod kkt;
mod polish;

use std::cell::Cell;
use web_time::Instant;

pub use io::write_solution_csv;
pub use kkt::{kkt_check, KktReport};

use crate::error::{Error, Result};
use crate::losses::LossOracle;
use admm::{AdmmSettings, AdmmState, Coordinate};
use polish::{Mode, Pattern};

/// Half-width of the comparator box.
pub const COMPARATOR_BOX: f64 = 1.0;

/// `(D^2 u)_j = u_j - 2 u_{j+1} + u_{j+2}`.
pub fn second_differences(u: &[f64]) -> Vec<f64> {
    d2(u)
}

pub(crate) fn d2(u: &[f64]) -> Vec<f64> {
    u.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
}

/// `D^T v` for `v` of length `n - 2`.
pub(crate) fn d2_transpose(v: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (j, x) in v.iter().enumerate() {
        out[j] += x;
        out[j + 1] -= 2.0 * x;
        out[j + 2] += x;
    }
    out
}

/// `n^k ||D^{k+1} u||_1`, summing absolute values over rounds and coordinates.
/// `u` is indexed `[t][coordinate]`.
pub fn tv_variation(u: &[Vec<f64>], order: usize) -> Result<f64> {
    let n = u.len();
    if n < order + 2 {
        return Err(Error::domain(format!(
            "sequence of length {n} too short for order {order}"
        )));
    }
    let d = u[0].len();
    let mut total = 0.0;
    for k in 0..d {
        let mut col: Vec<f64> = u.iter().map(|r| r[k]).collect();
        for _ in 0..=order {
            col = col.windows(2).map(|w| w[1] - w[0]).collect();
        }
        total += col.iter().map(|x| x.abs()).sum::<f64>();
    }
    Ok(total * (n as f64).powi(order as i32))
}

/// Scalar convenience for [`tv_variation`].
pub fn tv_variation_scalar(u: &[f64], order: usize) -> Result<f64> {
    let rows: Vec<Vec<f64>> = u.iter().map(|x| vec![*x]).collect();
    tv_variation(&rows, order)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationBudget {
    pub c_n: f64,
    pub n: usize,
}

impl VariationBudget {
    pub fn new(c_n: f64, n: usize) -> Result<Self> {
        if !(c_n >= 0.0) || !c_n.is_finite() {
            return Err(Error::domain(format!("budget {c_n} must be nonnegative")));
        }
        Ok(Self { c_n, n })
    }

    /// Bound on `||D^2 u||_1`.
    pub fn limit(&self) -> f64 {
        self.c_n / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    /// Unconstrained box-clipped minimizer is feasible; `lambda = 0`.
    Slack,
    /// Exact pattern solve succeeded.
    Polished,
    /// Certificates are read from the last ADMM iterate.
    Admm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverReport {
    pub certificate: Certificate,
    pub bisection_steps: usize,
    pub admm_iterations: usize,
    pub polish_sweeps: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `sum ||D^2 u||_1 - c_n / n`.
    pub budget_gap: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OfflineSolution {
    /// `[t][coordinate]`.
    pub u: Vec<Vec<f64>>,
    pub lambda: f64,
    pub gamma_minus: Vec<Vec<f64>>,
    pub gamma_plus: Vec<Vec<f64>>,
    /// `[t][coordinate]`, length `n`; the last two rows are zero.
    pub signs: Vec<Vec<f64>>,
    pub objective: f64,
    pub budget: VariationBudget,
    pub report: SolverReport,
}

impl OfflineSolution {
    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.u.iter().map(|r| r[k]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Relative budget tolerance when polishing fails and bisection has to finish.
    pub tol: f64,
    /// ADMM residual tolerance for the final solve.
    pub admm_tol: f64,
    /// Looser ADMM tolerance while bracketing `lambda`.
    pub search_admm_tol: f64,
    /// ADMM iteration cap while bracketing `lambda`.
    pub search_admm_iter: usize,
    /// Relative budget match at which a polish is attempted.
    pub search_budget_tol: f64,
    pub max_admm_iter: usize,
    pub max_bisection: usize,
    pub max_polish_sweeps: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            admm_tol: 1e-9,
            search_admm_tol: 1e-4,
            search_admm_iter: 2_000,
            search_budget_tol: 0.1,
            max_admm_iter: 50_000,
            max_bisection: 30,
            max_polish_sweeps: 2_000,
        }
    }
}

fn coordinates(losses: &[LossOracle]) -> Result<Vec<Coordinate>> {
    let d = losses[0].dimension();
    if let Some(l) = losses.iter().find(|l| l.dimension() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: l.dimension(),
        });
    }
    let a: Vec<f64> = losses.iter().map(|l| l.weight()).collect();
    Ok((0..d)
        .map(|k| Coordinate {
            a: a.clone(),
            y: losses.iter().map(|l| l.target()[k]).collect(),
        })
        .collect())
}

/// Weighted least-squares line through `y` with weights `a`.
pub(crate) fn weighted_line(a: &[f64], y: &[f64]) -> Vec<f64> {
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, (w, v)) in a.iter().zip(y).enumerate() {
        let x = (i + 1) as f64;
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        t0 += w * v;
        t1 += w * x * v;
    }
    let det = s0 * s2 - s1 * s1;
    let slope = (s0 * t1 - s1 * t0) / det;
    let icpt = (t0 - slope * s1) / s0;
    (1..=y.len()).map(|i| icpt + slope * i as f64).collect()
}

/// Smallest penalty at which the unboxed penalized solution is the weighted
/// least-squares line.
fn penalty_threshold(coord: &Coordinate) -> f64 {
    let line = weighted_line(&coord.a, &coord.y);
    let n = coord.len();
    let g: Vec<f64> = (0..n).map(|t| coord.a[t] * (coord.y[t] - line[t])).collect();
    let mut nu = vec![0.0; n - 2];
    for j in 0..n - 2 {
        let p1 = if j >= 1 { nu[j - 1] } else { 0.0 };
        let p2 = if j >= 2 { nu[j - 2] } else { 0.0 };
        nu[j] = g[j] + 2.0 * p1 - p2;
    }
    nu.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest useful penalty for [`l1_trend_filter`]: at or above it the fit is
/// the least-squares line.
pub fn trend_filter_lambda_max(y: &[f64]) -> Result<f64> {
    if y.len() < 3 {
        return Err(Error::domain("trend filter needs at least 3 points"));
    }
    Ok(penalty_threshold(&Coordinate {
        a: vec![1.0; y.len()],
        y: y.to_vec(),
    }))
}

fn total_tv(states: &[AdmmState]) -> f64 {
    states
        .iter()
        .map(|s| s.z.iter().map(|x| x.abs()).sum::<f64>())
        .sum()
}

fn pattern_from(state: &AdmmState, lambda: f64, radius: Option<f64>) -> Pattern {
    let knots = state
        .z
        .iter()
        .map(|z| if *z > 0.0 { 1 } else if *z < 0.0 { -1 } else { 0 })
        .collect();
    let bound = match radius {
        Some(r) => state
            .w
            .iter()
            .map(|w| if *w >= r { 1 } else if *w <= -r { -1 } else { 0 })
            .collect(),
        None => vec![0; state.w.len()],
    };
    let fixed_s = state
        .nu
        .iter()
        .map(|v| if lambda > 0.0 { (v / lambda).clamp(-1.0, 1.0) } else { 0.0 })
        .collect();
    Pattern {
        knots,
        bound,
        fixed_s,
    }
}

struct Assembled {
    u: Vec<Vec<f64>>,
    nu: Vec<Vec<f64>>,
    m: Vec<Vec<f64>>,
    lambda: f64,
}

fn finish(
    losses: &[LossOracle],
    parts: Assembled,
    budget: VariationBudget,
    mut report: SolverReport,
    started: Instant,
) -> Result<OfflineSolution> {
    let n = losses.len();
    let d = parts.u.len();
    let lambda = parts.lambda;
    let mut u = vec![vec![0.0; d]; n];
    let mut gm = vec![vec![0.0; d]; n];
    let mut gp = vec![vec![0.0; d]; n];
    let mut signs = vec![vec![0.0; d]; n];
    for k in 0..d {
        let du = d2(&parts.u[k]);
        for t in 0..n {
            u[t][k] = parts.u[k][t];
            gp[t][k] = parts.m[k][t].max(0.0);
            gm[t][k] = (-parts.m[k][t]).max(0.0);
        }
        for j in 0..n - 2 {
            signs[j][k] = if du[j].abs() > 1e-8 {
                du[j].signum()
            } else if lambda > 0.0 {
                (parts.nu[k][j] / lambda).clamp(-1.0, 1.0)
            } else {
                0.0
            };
        }
    }
    let mut objective = 0.0;
    for (l, row) in losses.iter().zip(&u) {
        objective += l.value(row)?;
    }
    let tv: f64 = parts
        .u
        .iter()
        .map(|c| d2(c).iter().map(|x| x.abs()).sum::<f64>())
        .sum();
    report.budget_gap = tv - budget.limit();
    report.seconds = started.elapsed().as_secs_f64();
    Ok(OfflineSolution {
        u,
        lambda,
        gamma_minus: gm,
        gamma_plus: gp,
        signs,
        objective,
        budget,
        report,
    })
}

/// Offline optimum of `losses` under `budget`, with dual certificates.
pub fn solve_offline(
    losses: &[LossOracle],
    budget: VariationBudget,
    options: &OracleOptions,
) -> Result<OfflineSolution> {
    let started = Instant::now();
    let n = losses.len();
    if n < 3 {
        return Err(Error::domain("offline problem needs at least 3 rounds"));
    }
    if budget.n != n {
        return Err(Error::domain(format!(
            "budget horizon {} differs from {n} losses",
            budget.n
        )));
    }
    VariationBudget::new(budget.c_n, n)?;
    let coords = coordinates(losses)?;
    let limit = budget.limit();
    let r = COMPARATOR_BOX;
    let mut report = SolverReport {
        certificate: Certificate::Slack,
        bisection_steps: 0,
        admm_iterations: 0,
        polish_sweeps: 0,
        primal_residual: 0.0,
        dual_residual: 0.0,
        budget_gap: 0.0,
        seconds: 0.0,
    };

    // Slack constraint: the clipped targets are optimal.
    let clipped: Vec<Vec<f64>> = coords
        .iter()
        .map(|c| c.y.iter().map(|y| y.clamp(-r, r)).collect())
        .collect();
    let tv0: f64 = clipped
        .iter()
        .map(|c| d2(c).iter().map(|x| x.abs()).sum::<f64>())
        .sum();
    if tv0 <= limit {
        let m = coords
            .iter()
            .zip(&clipped)
            .map(|(c, u)| (0..n).map(|t| c.a[t] * (c.y[t] - u[t])).collect())
            .collect();
        let parts = Assembled {
            u: clipped,
            nu: vec![vec![0.0; n - 2]; coords.len()],
            m,
            lambda: 0.0,
        };
        return finish(losses, parts, budget, report, started);
    }

    let polished = |p: polish::Polished, mut report: SolverReport| {
        report.certificate = Certificate::Polished;
        report.polish_sweeps = p.sweeps;
        let parts = Assembled {
            u: p.u,
            nu: p.nu,
            m: p.m,
            lambda: p.lambda,
        };
        finish(losses, parts, budget, report, started)
    };

    // c_n = 0 forces a line per coordinate; the pattern is known up front.
    if limit == 0.0 {
        let mut patterns: Vec<Pattern> = coords
            .iter()
            .map(|_| Pattern {
                knots: vec![0; n - 2],
                bound: vec![0; n],
                fixed_s: vec![0.0; n - 2],
            })
            .collect();
        if let Some(p) = polish::polish(
            &coords,
            &mut patterns,
            r,
            Mode::Constrained { budget: 0.0 },
            options.max_polish_sweeps,
        ) {
            return polished(p, report);
        }
    }

    if let Some(p) = pattern_search(&coords, limit, r, options, &mut report) {
        return polished(p, report);
    }

    let mut states: Vec<AdmmState> = coords.iter().map(|c| AdmmState::cold(c, Some(r))).collect();
    let run = |lambda: f64,
               settings: &AdmmSettings,
               states: &mut [AdmmState],
               report: &mut SolverReport|
     -> Result<f64> {
        let (mut p, mut d) = (0.0f64, 0.0f64);
        for (c, s) in coords.iter().zip(states.iter_mut()) {
            let out = admm::solve_penalized(c, lambda, settings, s)?;
            report.admm_iterations += out.iterations;
            p = p.max(out.primal_residual);
            d = d.max(out.dual_residual);
        }
        report.primal_residual = p;
        report.dual_residual = d;
        Ok(total_tv(states))
    };
    let try_polish = |lambda: f64, states: &[AdmmState]| {
        let mut patterns: Vec<Pattern> =
            states.iter().map(|s| pattern_from(s, lambda, Some(r))).collect();
        polish::polish(
            &coords,
            &mut patterns,
            r,
            Mode::Constrained { budget: limit },
            options.max_polish_sweeps,
        )
    };

    // Coarse phase: cheap ADMM solves locate lambda roughly and hand the
    // pattern to the polish. Fine phase: full-accuracy ADMM if that fails.
    let coarse = AdmmSettings {
        tol: options.search_admm_tol,
        max_iter: options.search_admm_iter,
        box_radius: Some(r),
    };
    let fine = AdmmSettings {
        tol: options.admm_tol,
        max_iter: options.max_admm_iter,
        box_radius: Some(r),
    };

    let mut hi = coords
        .iter()
        .map(penalty_threshold)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let mut doublings = 0;
    while run(hi, &coarse, &mut states, &mut report)? > limit * (1.0 + options.search_budget_tol)
        && doublings < 40
    {
        hi *= 4.0;
        doublings += 1;
    }
    let mut lo = hi * 1e-12;
    let mut lambda = hi;
    let mut settings = coarse;
    let mut match_tol = options.search_budget_tol;
    let mut attempts = 0;
    for step in 1..=options.max_bisection {
        report.bisection_steps = step;
        let mid = (lo * hi).sqrt();
        let tv = run(mid, &settings, &mut states, &mut report)?;
        lambda = mid;
        if tv > limit {
            lo = mid;
        } else {
            hi = mid;
        }
        let gap = (tv - limit).abs();
        if gap <= match_tol * limit {
            if let Some(p) = try_polish(mid, &states) {
                return polished(p, report);
            }
            attempts += 1;
            settings = fine;
            match_tol = (match_tol * 0.1).max(options.tol);
            if gap <= options.tol * limit || attempts > 3 {
                break;
            }
        }
    }
    // Last chance on the final iterate, then fall back to ADMM certificates.
    let tv = run(lambda, &fine, &mut states, &mut report)?;
    if let Some(p) = try_polish(lambda, &states) {
        return polished(p, report);
    }
    if (tv - limit).abs() > 1e-4 * limit {
        return Err(Error::Solver(format!(
            "budget gap {:.3e} after {} bisection steps (primal {:.3e}, dual {:.3e})",
            tv - limit,
            report.bisection_steps,
            report.primal_residual,
            report.dual_residual
        )));
    }
    report.certificate = Certificate::Admm;
    let parts = Assembled {
        u: states.iter().map(|s| s.w.clone()).collect(),
        nu: states
            .iter()
            .map(|s| s.nu.iter().map(|v| v.clamp(-lambda, lambda)).collect())
            .collect(),
        m: states.iter().map(|s| s.m.clone()).collect(),
        lambda,
    };
    finish(losses, parts, budget, report, started)
}

const CONTINUATION_SWEEPS: usize = 40;

/// Penalized active-set solve at `lambda` from the pattern that solved
/// `known`. Full-step updates can cycle from a distant pattern, so on failure
/// the step in `log lambda` is halved.
fn continuation(
    coords: &[Coordinate],
    r: f64,
    lambda: f64,
    known: f64,
    start: &[Pattern],
    depth: usize,
    sweeps: &Cell<usize>,
) -> Option<(f64, Vec<Pattern>)> {
    let mut pats = start.to_vec();
    if let Some(p) = polish::polish(
        coords,
        &mut pats,
        r,
        Mode::Penalized { lambda },
        CONTINUATION_SWEEPS,
    ) {
        sweeps.set(sweeps.get() + p.sweeps);
        let tv = p
            .u
            .iter()
            .map(|u| d2(u).iter().map(|x| x.abs()).sum::<f64>())
            .sum();
        return Some((tv, pats));
    }
    sweeps.set(sweeps.get() + CONTINUATION_SWEEPS);
    if depth == 12 || (lambda / known).ln().abs() < 1e-9 {
        return None;
    }
    let mid = (lambda * known).sqrt();
    let (_, mid_pats) = continuation(coords, r, mid, known, start, depth + 1, sweeps)?;
    continuation(coords, r, lambda, mid, &mid_pats, depth + 1, sweeps)
}

/// Bisection on `lambda` with exact penalized active-set solves, each started
/// from the pattern at the nearer end of the bracket; near the budget the
/// pattern seeds a constrained solve. `None` hands over to the ADMM search.
fn pattern_search(
    coords: &[Coordinate],
    limit: f64,
    r: f64,
    options: &OracleOptions,
    report: &mut SolverReport,
) -> Option<polish::Polished> {
    let n = coords[0].len();
    let sweeps = Cell::new(0);
    let eval = |lambda: f64, known: f64, start: &[Pattern]| {
        continuation(coords, r, lambda, known, start, 0, &sweeps)
    };
    let empty: Vec<Pattern> = coords
        .iter()
        .map(|_| Pattern {
            knots: vec![0; n - 2],
            bound: vec![0; n],
            fixed_s: vec![0.0; n - 2],
        })
        .collect();

    let mut hi = coords
        .iter()
        .map(penalty_threshold)
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let (mut tv_hi, mut pat_hi) = eval(hi, hi, &empty)?;
    let mut grow = 0;
    while tv_hi > limit {
        if grow == 20 {
            return None;
        }
        hi *= 4.0;
        grow += 1;
        (tv_hi, pat_hi) = eval(hi, hi / 4.0, &pat_hi)?;
    }
    // Walk down the path until the budget is exceeded.
    let (mut lo, mut tv_lo, mut pat_lo) = (hi, tv_hi, pat_hi.clone());
    let mut shrink = 0;
    while tv_lo <= limit {
        if shrink == 60 {
            return None;
        }
        (hi, tv_hi, pat_hi) = (lo, tv_lo, pat_lo);
        lo = hi / 4.0;
        shrink += 1;
        (tv_lo, pat_lo) = eval(lo, hi, &pat_hi)?;
    }

    let mut result = None;
    for step in 1..=options.max_bisection.max(60) {
        report.bisection_steps = step;
        let near_lo = tv_lo - limit < limit - tv_hi;
        let gap = (tv_lo - limit).min(limit - tv_hi);
        if gap <= options.search_budget_tol * limit {
            let order = if near_lo { [&pat_lo, &pat_hi] } else { [&pat_hi, &pat_lo] };
            for start in order {
                let mut pats = start.clone();
                if let Some(p) = polish::polish(
                    coords,
                    &mut pats,
                    r,
                    Mode::Constrained { budget: limit },
                    CONTINUATION_SWEEPS,
                ) {
                    sweeps.set(sweeps.get() + p.sweeps);
                    result = Some(p);
                    break;
                }
            }
            if result.is_some() || hi / lo < 1.0 + 1e-12 {
                break;
            }
        }
        let mid = (lo * hi).sqrt();
        let (known, start) = if near_lo { (lo, &pat_lo) } else { (hi, &pat_hi) };
        let (tv, pats) = eval(mid, known, start)?;
        if tv > limit {
            (lo, tv_lo, pat_lo) = (mid, tv, pats);
        } else {
            (hi, tv_hi, pat_hi) = (mid, tv, pats);
        }
    }
    report.polish_sweeps = sweeps.get();
    result
}

/// `argmin_u 1/2 ||y - u||^2 + lam ||D^2 u||_1` with no box.
pub fn l1_trend_filter(y: &[f64], lam: f64) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return Err(Error::domain("trend filter needs at least 3 points"));
    }
    if !(lam >= 0.0) || !lam.is_finite() {
        return Err(Error::domain(format!("penalty {lam} must be nonnegative")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    if lam == 0.0 {
        return Ok(y.to_vec());
    }
    let coord = Coordinate {
        a: vec![1.0; y.len()],
        y: y.to_vec(),
    };
    if lam >= penalty_threshold(&coord) {
        return Ok(weighted_line(&coord.a, &coord.y));
    }
    let settings = AdmmSettings {
        tol: 1e-9,
        max_iter: 50_000,
        box_radius: None,
    };
    let mut state = AdmmState::cold(&coord, None);
    state.rho = lam.max(1e-3);
    let out = admm::solve_penalized(&coord, lam, &settings, &mut state)?;
    let mut patterns = vec![pattern_from(&state, lam, None)];
    if let Some(p) = polish::polish(
        std::slice::from_ref(&coord),
        &mut patterns,
        f64::INFINITY,
        Mode::Penalized { lambda: lam },
        60,
    ) {
        return Ok(p.u.into_iter().next().unwrap_or_default());
    }
    if !out.converged {
        return Err(Error::Solver(format!(
            "trend filter did not converge in {} iterations (primal {:.3e}, dual {:.3e})",
            out.iterations, out.primal_residual, out.dual_residual
        )));
    }
    Ok(state.u)
}
