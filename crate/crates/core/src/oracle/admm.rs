//! ADMM for one coordinate of the penalized problem
//!
//! ```text
//! min  sum_t a_t/2 (u_t - y_t)^2 + lambda ||D^2 u||_1 + box(u)
//! ```
//!
//! split as `z = D^2 u` and `w = u`. The `u` step is a pentadiagonal solve.
//! Duals are stored unscaled (`nu = rho * alpha`, `m = rho * beta`) so warm
//! starts survive changes of `rho`.

use super::banded::{BandLu, BandMatrix};
use super::{d2, d2_transpose};
use crate::error::Result;

#[derive(Debug, Clone)]
pub(crate) struct Coordinate {
    pub a: Vec<f64>,
    pub y: Vec<f64>,
}

impl Coordinate {
    pub(crate) fn len(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdmmSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub box_radius: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmState {
    pub u: Vec<f64>,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// Dual of `z = D^2 u`.
    pub nu: Vec<f64>,
    /// Dual of `w = u`; positive at the upper bound.
    pub m: Vec<f64>,
    pub rho: f64,
}

impl AdmmState {
    pub(crate) fn cold(coord: &Coordinate, box_radius: Option<f64>) -> Self {
        let n = coord.len();
        let r = box_radius.unwrap_or(f64::INFINITY);
        let u: Vec<f64> = coord.y.iter().map(|y| y.clamp(-r, r)).collect();
        let z = d2(&u);
        let mean_a = coord.a.iter().sum::<f64>() / n as f64;
        Self {
            w: u.clone(),
            z,
            u,
            nu: vec![0.0; n - 2],
            m: vec![0.0; n],
            rho: mean_a,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AdmmOutcome {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
}

fn factor(coord: &Coordinate, rho: f64, with_box: bool) -> Result<BandLu> {
    let n = coord.len();
    let mut m = BandMatrix::zeros(n, 2, 2);
    for t in 0..n {
        m.add(t, t, coord.a[t] + if with_box { rho } else { 0.0 });
    }
    const C: [f64; 3] = [1.0, -2.0, 1.0];
    for j in 0..n - 2 {
        for p in 0..3 {
            for q in 0..3 {
                m.add(j + p, j + q, rho * C[p] * C[q]);
            }
        }
    }
    m.factor()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn solve_penalized(
    coord: &Coordinate,
    lambda: f64,
    settings: &AdmmSettings,
    state: &mut AdmmState,
) -> Result<AdmmOutcome> {
    let n = coord.len();
    let with_box = settings.box_radius.is_some();
    let r = settings.box_radius.unwrap_or(f64::INFINITY);
    let mut rho = state.rho;
    let mut lu = factor(coord, rho, with_box)?;
    let mut alpha: Vec<f64> = state.nu.iter().map(|v| v / rho).collect();
    let mut beta: Vec<f64> = state.m.iter().map(|v| v / rho).collect();
    let ay: Vec<f64> = coord.a.iter().zip(&coord.y).map(|(a, y)| a * y).collect();
    let sqrt_dim = ((2 * n - 2) as f64).sqrt();
    let mut out = AdmmOutcome::default();
    let mut rhs = vec![0.0; n];
    let mut diff = vec![0.0; n - 2];

    for it in 1..=settings.max_iter {
        for j in 0..n - 2 {
            diff[j] = state.z[j] - alpha[j];
        }
        let back = d2_transpose(&diff, n);
        for t in 0..n {
            rhs[t] = ay[t] + rho * back[t];
            if with_box {
                rhs[t] += rho * (state.w[t] - beta[t]);
            }
        }
        lu.solve_in_place(&mut rhs);
        state.u.copy_from_slice(&rhs);
        let du = d2(&state.u);

        let kappa = lambda / rho;
        let mut dz = vec![0.0; n - 2];
        for j in 0..n - 2 {
            let v = du[j] + alpha[j];
            let z = v.signum() * (v.abs() - kappa).max(0.0);
            dz[j] = z - state.z[j];
            state.z[j] = z;
            alpha[j] += du[j] - z;
        }
        let mut dw = vec![0.0; n];
        if with_box {
            for t in 0..n {
                let w = (state.u[t] + beta[t]).clamp(-r, r);
                dw[t] = w - state.w[t];
                state.w[t] = w;
                beta[t] += state.u[t] - w;
            }
        } else {
            state.w.copy_from_slice(&state.u);
        }

        let primal = norm(
            du.iter()
                .zip(&state.z)
                .map(|(a, b)| a - b)
                .chain(state.u.iter().zip(&state.w).map(|(a, b)| a - b)),
        );
        let back_dz = d2_transpose(&dz, n);
        let dual = rho * norm(back_dz.iter().zip(&dw).map(|(a, b)| a + b));
        let scale_p = norm(du.iter().chain(&state.u).copied())
            .max(norm(state.z.iter().chain(&state.w).copied()));
        let back_nu = d2_transpose(&alpha, n);
        let scale_d = rho * norm(back_nu.iter().zip(&beta).map(|(a, b)| a + b));
        out = AdmmOutcome {
            iterations: it,
            primal_residual: primal,
            dual_residual: dual,
            converged: false,
        };
        if primal <= settings.tol * (sqrt_dim + scale_p) && dual <= settings.tol * (sqrt_dim * rho.min(1.0) + scale_d) {
            out.converged = true;
            break;
        }
        if it % 25 == 0 {
            let new_rho = if primal > 10.0 * dual {
                rho * 2.0
            } else if dual > 10.0 * primal {
                rho / 2.0
            } else {
                rho
            };
            if new_rho != rho {
                let f = rho / new_rho;
                alpha.iter_mut().for_each(|v| *v *= f);
                beta.iter_mut().for_each(|v| *v *= f);
                rho = new_rho;
                lu = factor(coord, rho, with_box)?;
            }
        }
    }
    state.rho = rho;
    state.nu = alpha.iter().map(|v| v * rho).collect();
    state.m = if with_box {
        beta.iter().map(|v| v * rho).collect()
    } else {
        vec![0.0; n]
    };
    Ok(out)
}
