//! Exact solve of the optimality system once the sparsity pattern is known.
//!
//! Given knot rows `K` (where `D^2 u != 0`, with signs), the zero rows `Z`, and
//! the box-active points `B`, the stationarity equations
//! `a (u - y) + D^T nu + m = 0` together with `(D^2 u)_Z = 0` and `u_B = b` are
//! linear in `(u_free, nu_Z)` with `nu_K = lambda s_K`. The solution is affine
//! in `lambda`; in constrained mode `lambda` is read off the budget row
//! `sum_K s (D^2 u) = budget`. Wrong guesses are repaired by moving indices
//! between the sets until every sign condition holds.

use super::admm::Coordinate;
use super::banded::{BandLu, BandMatrix};
use super::{d2, d2_transpose};

const D: [f64; 3] = [1.0, -2.0, 1.0];

/// Second differences below this are roundoff; sign tests ignore them.
const DU_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    /// Per second-difference row: 0 for a zero row, otherwise the sign of `D^2 u`.
    pub knots: Vec<i8>,
    /// Per point: 0 if free, otherwise the side of the box it sits on.
    pub bound: Vec<i8>,
    /// `nu / lambda` used for zero rows whose three points are all bound.
    pub fixed_s: Vec<f64>,
}

impl Pattern {
    fn all_bound(&self, j: usize) -> bool {
        self.bound[j] != 0 && self.bound[j + 1] != 0 && self.bound[j + 2] != 0
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Mode {
    /// Budget on `sum_k ||D^2 u_k||_1`; `lambda` is unknown.
    Constrained { budget: f64 },
    Penalized { lambda: f64 },
}

#[derive(Debug, Clone)]
pub(crate) struct Polished {
    pub u: Vec<Vec<f64>>,
    pub nu: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub lambda: f64,
    pub sweeps: usize,
}

struct Affine {
    u0: Vec<f64>,
    u1: Vec<f64>,
    nu0: Vec<f64>,
    nu1: Vec<f64>,
    direct: Option<Direct>,
}

/// The factored system, kept to re-solve at a fixed `lambda` without the
/// cancellation in `x0 + lambda x1`.
struct Direct {
    lu: BandLu,
    rhs0: Vec<f64>,
    rhs1: Vec<f64>,
    u_idx: Vec<usize>,
    nu_idx: Vec<usize>,
}

impl Affine {
    fn at(&self, lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let mut u = combine(&self.u0, &self.u1, lambda);
        let mut nu = combine(&self.nu0, &self.nu1, lambda);
        if let Some(d) = &self.direct {
            let mut x: Vec<f64> = d.rhs0.iter().zip(&d.rhs1).map(|(a, b)| a + lambda * b).collect();
            d.lu.solve_in_place(&mut x);
            for (t, &i) in d.u_idx.iter().enumerate() {
                if i != usize::MAX {
                    u[t] = x[i];
                }
            }
            for (j, &i) in d.nu_idx.iter().enumerate() {
                if i != usize::MAX {
                    nu[j] = x[i];
                }
            }
        }
        (u, nu)
    }
}

fn solve_affine(coord: &Coordinate, pat: &Pattern, radius: f64) -> Option<Affine> {
    let n = coord.len();
    let rows = n - 2;
    let mut u_idx = vec![usize::MAX; n];
    let mut nu_idx = vec![usize::MAX; rows];
    let mut count = 0;
    for t in 0..n {
        if pat.bound[t] == 0 {
            u_idx[t] = count;
            count += 1;
        }
        if t < rows && pat.knots[t] == 0 && !pat.all_bound(t) {
            nu_idx[t] = count;
            count += 1;
        }
    }
    let mut nu0 = vec![0.0; rows];
    let mut nu1 = vec![0.0; rows];
    for j in 0..rows {
        if pat.knots[j] != 0 {
            nu1[j] = pat.knots[j] as f64;
        } else if nu_idx[j] == usize::MAX {
            nu1[j] = pat.fixed_s[j];
        }
    }
    let mut u0 = vec![0.0; n];
    for t in 0..n {
        if pat.bound[t] != 0 {
            u0[t] = pat.bound[t] as f64 * radius;
        }
    }
    let u1 = vec![0.0; n];
    if count == 0 {
        return Some(Affine {
            u0,
            u1,
            nu0,
            nu1,
            direct: None,
        });
    }

    let amax = coord.a.iter().fold(0.0f64, |m, a| m.max(*a));
    // Unregularized first; a tiny quasi-definite shift rescues rank-deficient
    // zero-row sets at the cost of `delta * nu` leaking into `D^2 u`.
    let (lu, rhs0, rhs1) = [0.0, 1e-14 / amax].iter().find_map(|&delta| {
        let (lu, rhs0, rhs1) = assemble(coord, &u_idx, &nu_idx, &u0, &nu1, count, delta)?;
        let mut r0 = rhs0.clone();
        let mut r1 = rhs1.clone();
        lu.solve_in_place(&mut r0);
        lu.solve_in_place(&mut r1);
        r0.iter().chain(&r1).all(|v| v.is_finite()).then_some((lu, rhs0, rhs1))
    })?;
    let mut r0 = rhs0.clone();
    let mut r1 = rhs1.clone();
    lu.solve_in_place(&mut r0);
    lu.solve_in_place(&mut r1);
    let mut u1 = u1;
    for t in 0..n {
        if u_idx[t] != usize::MAX {
            u0[t] = r0[u_idx[t]];
            u1[t] = r1[u_idx[t]];
        }
    }
    for j in 0..rows {
        if nu_idx[j] != usize::MAX {
            nu0[j] = r0[nu_idx[j]];
            nu1[j] = r1[nu_idx[j]];
        }
    }
    Some(Affine {
        u0,
        u1,
        nu0,
        nu1,
        direct: Some(Direct {
            lu,
            rhs0,
            rhs1,
            u_idx,
            nu_idx,
        }),
    })
}

fn assemble(
    coord: &Coordinate,
    u_idx: &[usize],
    nu_idx: &[usize],
    u0: &[f64],
    nu1: &[f64],
    count: usize,
    delta: f64,
) -> Option<(BandLu, Vec<f64>, Vec<f64>)> {
    let n = coord.len();
    let rows = n - 2;
    let mut mat = BandMatrix::zeros(count, 3, 3);
    let mut r0 = vec![0.0; count];
    let mut r1 = vec![0.0; count];
    let fixed_back = d2_transpose(nu1, n);
    for t in 0..n {
        let i = u_idx[t];
        if i == usize::MAX {
            continue;
        }
        mat.add(i, i, coord.a[t]);
        r0[i] = coord.a[t] * coord.y[t];
        r1[i] = -fixed_back[t];
        for (p, c) in D.iter().enumerate() {
            if t >= p && t - p < rows && nu_idx[t - p] != usize::MAX {
                mat.add(i, nu_idx[t - p], *c);
            }
        }
    }
    for j in 0..rows {
        let i = nu_idx[j];
        if i == usize::MAX {
            continue;
        }
        if delta > 0.0 {
            mat.add(i, i, -delta);
        }
        for (p, c) in D.iter().enumerate() {
            let t = j + p;
            if u_idx[t] != usize::MAX {
                mat.add(i, u_idx[t], *c);
            } else {
                r0[i] -= c * u0[t];
            }
        }
    }
    let lu = mat.factor().ok()?;
    Some((lu, r0, r1))
}

fn combine(x0: &[f64], x1: &[f64], lambda: f64) -> Vec<f64> {
    x0.iter().zip(x1).map(|(a, b)| a + lambda * b).collect()
}

/// Runs the repair loop from `patterns`. Returns `None` when the pattern
/// cannot be repaired within `max_sweeps`.
pub(crate) fn polish(
    coords: &[Coordinate],
    patterns: &mut [Pattern],
    radius: f64,
    mode: Mode,
    max_sweeps: usize,
) -> Option<Polished> {
    let n = coords[0].len();
    let rows = n - 2;
    let amax = coords
        .iter()
        .flat_map(|c| c.a.iter())
        .fold(0.0f64, |m, a| m.max(*a));
    for sweep in 1..=max_sweeps {
        let mut affine = Vec::with_capacity(coords.len());
        for (c, p) in coords.iter().zip(patterns.iter()) {
            affine.push(solve_affine(c, p, radius)?);
        }

        let lambda = match mode {
            Mode::Penalized { lambda } => lambda,
            Mode::Constrained { budget } => {
                let any_knot = patterns.iter().any(|p| p.knots.iter().any(|k| *k != 0));
                if any_knot {
                    let (mut t0, mut t1) = (0.0, 0.0);
                    for (aff, p) in affine.iter().zip(patterns.iter()) {
                        let d0 = d2(&aff.u0);
                        let d1 = d2(&aff.u1);
                        for j in 0..rows {
                            let s = p.knots[j] as f64;
                            t0 += s * d0[j];
                            t1 += s * d1[j];
                        }
                    }
                    if !(t1 < 0.0) || !t1.is_finite() {
                        return None;
                    }
                    let mut lambda = (budget - t0) / t1;
                    // One Newton step on the measured variation; roundoff on the
                    // zero rows adds up over long horizons.
                    if lambda.is_finite() {
                        let mut used = 0.0;
                        for (aff, p) in affine.iter().zip(patterns.iter()) {
                            let du = d2(&aff.at(lambda).0);
                            used += p
                                .knots
                                .iter()
                                .zip(&du)
                                .map(|(s, v)| if *s == 0 { v.abs() } else { *s as f64 * v })
                                .sum::<f64>();
                        }
                        lambda += (budget - used) / t1;
                    }
                    lambda
                } else if budget > 0.0 {
                    return None;
                } else {
                    affine
                        .iter()
                        .flat_map(|a| a.nu0.iter())
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                }
            }
        };
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return None;
        }

        let mut us = Vec::with_capacity(coords.len());
        let mut nus = Vec::with_capacity(coords.len());
        let mut ms = Vec::with_capacity(coords.len());
        let mut changed = false;
        let mut entering = Vec::new();
        let mut binding = Vec::new();
        for ((c, p), aff) in coords.iter().zip(patterns.iter_mut()).zip(&affine) {
            let (u, nu) = aff.at(lambda);
            let back = d2_transpose(&nu, n);
            let m: Vec<f64> = (0..n)
                .map(|t| {
                    if p.bound[t] == 0 {
                        0.0
                    } else {
                        c.a[t] * (c.y[t] - u[t]) - back[t]
                    }
                })
                .collect();
            let du = d2(&u);
            let tol_m = 1e-12 * amax.max(lambda);
            for t in 0..n {
                if p.bound[t] == 0 {
                    if u[t].abs() > radius * (1.0 + 1e-12) {
                        binding.push(t);
                    }
                } else if (p.bound[t] as f64) * m[t] < -tol_m {
                    p.bound[t] = 0;
                    changed = true;
                }
            }
            for j in 0..rows {
                if p.knots[j] != 0 {
                    if (p.knots[j] as f64) * du[j] < -DU_TOL {
                        p.knots[j] = 0;
                        p.fixed_s[j] = p.fixed_s[j].clamp(-1.0, 1.0);
                        changed = true;
                    }
                } else if p.all_bound(j) {
                    if du[j].abs() > DU_TOL {
                        p.knots[j] = du[j].signum() as i8;
                        changed = true;
                    }
                } else if nu[j].abs() > lambda * (1.0 + 1e-9) + 1e-14 {
                    entering.push(j);
                } else if lambda > 0.0 {
                    // Inherited if the row later becomes all-bound.
                    p.fixed_s[j] = (nu[j] / lambda).clamp(-1.0, 1.0);
                }
            }
            // `nu` is smooth, so violations come in runs around one peak; adding
            // whole runs makes the full-step update cycle.
            let mut i = 0;
            while i < entering.len() {
                let mut best = entering[i];
                let mut k = i + 1;
                while k < entering.len()
                    && entering[k] == entering[k - 1] + 1
                    && nu[entering[k]].signum() == nu[best].signum()
                {
                    if nu[entering[k]].abs() > nu[best].abs() {
                        best = entering[k];
                    }
                    k += 1;
                }
                p.knots[best] = nu[best].signum() as i8;
                changed = true;
                i = k;
            }
            entering.clear();
            // Same for overshoots: bind the peak of each run.
            let mut i = 0;
            while i < binding.len() {
                let mut best = binding[i];
                let mut k = i + 1;
                while k < binding.len()
                    && binding[k] == binding[k - 1] + 1
                    && u[binding[k]].signum() == u[best].signum()
                {
                    if u[binding[k]].abs() > u[best].abs() {
                        best = binding[k];
                    }
                    k += 1;
                }
                p.bound[best] = u[best].signum() as i8;
                changed = true;
                i = k;
            }
            binding.clear();
            us.push(u);
            nus.push(nu);
            ms.push(m);
        }

        if !changed {
            return Some(Polished {
                u: us,
                nu: nus,
                m: ms,
                lambda,
                sweeps: sweep,
            });
        }
    }
    None
}
