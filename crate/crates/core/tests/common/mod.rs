//! Reference computations written independently of the library's solvers.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Exhaustive search over `{-1, -1 + step, ..., 1}^n` for
/// `min sum a/2 (u - y)^2` with `||D^2 u||_1 <= limit`. Depth-first with
/// pruning on the partial objective and the partial variation.
pub fn grid_search_offline(y: &[f64], a: f64, limit: f64, step: f64) -> (f64, Vec<f64>) {
    let k = (2.0 / step).round() as i64;
    let grid: Vec<f64> = (0..=k).map(|i| -1.0 + i as f64 * step).collect();
    let n = y.len();
    let mut best = f64::INFINITY;
    let mut best_u = vec![0.0; n];
    let mut u = vec![0.0; n];
    // Candidate order per round: closest to the target first.
    let orders: Vec<Vec<f64>> = y
        .iter()
        .map(|t| {
            let mut g = grid.clone();
            g.sort_by(|p, q| (p - t).abs().total_cmp(&(q - t).abs()));
            g
        })
        .collect();

    #[allow(clippy::too_many_arguments)]
    fn dfs(
        t: usize,
        loss: f64,
        tv: f64,
        y: &[f64],
        a: f64,
        limit: f64,
        orders: &[Vec<f64>],
        u: &mut Vec<f64>,
        best: &mut f64,
        best_u: &mut Vec<f64>,
    ) {
        let n = y.len();
        if t == n {
            if loss < *best {
                *best = loss;
                best_u.clone_from(u);
            }
            return;
        }
        for &v in &orders[t] {
            let l = loss + 0.5 * a * (v - y[t]) * (v - y[t]);
            if l >= *best {
                // Candidates are sorted by distance, so the rest are worse.
                break;
            }
            let add = if t >= 2 { (u[t - 2] - 2.0 * u[t - 1] + v).abs() } else { 0.0 };
            if tv + add > limit + 1e-12 {
                continue;
            }
            u[t] = v;
            dfs(t + 1, l, tv + add, y, a, limit, orders, u, best, best_u);
        }
    }
    dfs(0, 0.0, 0.0, y, a, limit, &orders, &mut u, &mut best, &mut best_u);
    (best, best_u)
}

/// Least-squares line through `y` on covariates `[1, j]`, `j = 1..`.
/// Returns `(intercept, slope)`.
pub fn ols_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let xs: Vec<f64> = (1..=y.len()).map(|j| j as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(y).map(|(x, v)| (x - mx) * (v - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Box-constrained least-squares line: minimizes `sum (y_j - b0 - b1 j)^2`
/// subject to `|b0 + b1 j| <= 1` for all `j`. Only the endpoint constraints
/// matter for a line, so the active-set enumeration is over those four.
pub fn box_constrained_line(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let line = |b0: f64, b1: f64| -> Vec<f64> { (1..=n).map(|j| b0 + b1 * j as f64).collect() };
    let cost = |u: &[f64]| -> f64 { u.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum() };
    let feasible = |u: &[f64]| u.iter().all(|v| v.abs() <= 1.0 + 1e-12);
    let (b0, b1) = ols_line(y);
    let free = line(b0, b1);
    if feasible(&free) {
        return free;
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |u: Vec<f64>| {
        if feasible(&u) {
            let c = cost(&u);
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, u));
            }
        }
    };
    // One endpoint pinned: fit the slope through the pinned point.
    for (anchor, value) in [(1usize, 1.0), (1, -1.0), (n, 1.0), (n, -1.0)] {
        let xs: Vec<f64> = (1..=n).map(|j| j as f64 - anchor as f64).collect();
        let num: f64 = xs.iter().zip(y).map(|(x, v)| x * (v - value)).sum();
        let den: f64 = xs.iter().map(|x| x * x).sum();
        let s = num / den;
        consider((1..=n).map(|j| value + s * (j as f64 - anchor as f64)).collect());
    }
    // Both endpoints pinned.
    for (p, q) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let s = (q - p) / (n as f64 - 1.0);
        consider((1..=n).map(|j| p + s * (j as f64 - 1.0)).collect());
    }
    best.expect("a constant line at 0 is always feasible").1
}

/// Brute-force `argmin_w (w - u)^T A (w - u)` subject to
/// `|normal_i . w[block_i]| <= radius_i`: enumerate every assignment of each
/// slab to {inactive, upper face, lower face}, solve the equality-constrained
/// problem by its KKT system, keep feasible candidates, return the best.
pub fn brute_force_slab_projection(
    u: &[f64],
    a: &DMatrix<f64>,
    slabs: &[(usize, [f64; 2], f64)],
) -> Vec<f64> {
    let n = u.len();
    let m = slabs.len();
    let uv = DVector::from_column_slice(u);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut c = code;
        let mut rows: Vec<(usize, [f64; 2], f64)> = Vec::new();
        for &(block, normal, r) in slabs {
            match c % 3 {
                1 => rows.push((block, normal, r)),
                2 => rows.push((block, normal, -r)),
                _ => {}
            }
            c /= 3;
        }
        let k = rows.len();
        let mut kkt = DMatrix::<f64>::zeros(n + k, n + k);
        let mut rhs = DVector::<f64>::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&(a * 2.0));
        rhs.rows_mut(0, n).copy_from(&(a * &uv * 2.0));
        for (i, (block, normal, value)) in rows.iter().enumerate() {
            for p in 0..2 {
                kkt[(n + i, 2 * block + p)] = normal[p];
                kkt[(2 * block + p, n + i)] = normal[p];
            }
            rhs[n + i] = *value;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let w = sol.rows(0, n).into_owned();
        let ok = slabs.iter().all(|(block, normal, r)| {
            (normal[0] * w[2 * block] + normal[1] * w[2 * block + 1]).abs() <= r + 1e-9
        });
        if ok {
            let diff = &w - &uv;
            let cost = (diff.transpose() * a * &diff)[(0, 0)];
            if best.as_ref().is_none_or(|(b, _)| cost < *b - 1e-15) {
                best = Some((cost, w));
            }
        }
    }
    best.expect("the origin-side face assignment is always feasible").1.as_slice().to_vec()
}

/// Central finite-difference gradient.
pub fn finite_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}
