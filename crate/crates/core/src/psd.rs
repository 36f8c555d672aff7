//! Correction matrix `A = eps I + eta sum g g^T` with a maintained inverse,
//! and projections in the `A`-norm onto intersections of block slabs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Number of Sherman–Morrison updates between full refactorizations.
pub const REFACTOR_INTERVAL: usize = 512;

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;

pub const MAX_DYKSTRA_SWEEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct CorrectionMatrix {
    epsilon: f64,
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    updates_since_refactor: usize,
}

impl CorrectionMatrix {
    /// `eps * I` of the given dimension.
    pub fn new(dim: usize, epsilon: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("correction matrix dimension must be positive"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon {epsilon} must be positive")));
        }
        Ok(Self {
            epsilon,
            matrix: DMatrix::identity(dim, dim) * epsilon,
            inverse: DMatrix::identity(dim, dim) / epsilon,
            updates_since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn updates_since_refactor(&self) -> usize {
        self.updates_since_refactor
    }

    /// `matrix += eta g g^T`, inverse by Sherman–Morrison, with a fresh
    /// Cholesky inverse every [`REFACTOR_INTERVAL`] updates.
    pub fn rank_one_update(&mut self, g: &[f64], eta: f64) -> Result<()> {
        if g.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: g.len(),
            });
        }
        if g.iter().any(|x| !x.is_finite()) || !eta.is_finite() {
            return Err(Error::Numeric("non-finite rank-one update".into()));
        }
        if !(eta > 0.0) {
            return Err(Error::domain(format!("update weight {eta} must be positive")));
        }
        if g.iter().all(|x| *x == 0.0) {
            return Ok(());
        }
        let g = DVector::from_column_slice(g);
        self.matrix.ger(eta, &g, &g, 1.0);

        let ag = &self.inverse * &g;
        let denom = 1.0 + eta * g.dot(&ag);
        self.inverse.ger(-eta / denom, &ag, &ag, 1.0);
        self.updates_since_refactor += 1;
        if self.updates_since_refactor >= REFACTOR_INTERVAL {
            self.refactor()?;
        }
        Ok(())
    }

    /// Recomputes the inverse from a Cholesky factorization of the matrix.
    pub fn refactor(&mut self) -> Result<()> {
        let chol = self
            .matrix
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("correction matrix lost positive definiteness".into()))?;
        self.inverse = chol.inverse();
        self.updates_since_refactor = 0;
        Ok(())
    }

    /// `v^T A v`.
    pub fn quadratic_norm(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(quad_form(&self.matrix, v))
    }

    /// `A^{-1} v`.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        mat_vec(&self.inverse, v)
    }

    /// Frobenius norm of `A A^{-1} - I`.
    pub fn inverse_error(&self) -> f64 {
        let n = self.dim();
        (&self.matrix * &self.inverse - DMatrix::<f64>::identity(n, n)).norm()
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += m[(i, j)] * v[j];
        }
        acc += v[i] * row;
    }
    acc
}

/// `|normal . w[2k..2k+2]| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub block: usize,
    pub normal: [f64; 2],
    pub radius: f64,
}

impl Slab {
    fn value(&self, w: &[f64]) -> f64 {
        let b = 2 * self.block;
        self.normal[0] * w[b] + self.normal[1] * w[b + 1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabSet {
    slabs: Vec<Slab>,
}

impl SlabSet {
    pub fn new(slabs: Vec<Slab>) -> Result<Self> {
        for s in &slabs {
            if s.normal[0] == 0.0 && s.normal[1] == 0.0 {
                return Err(Error::domain("slab normal must be nonzero"));
            }
            if !(s.radius > 0.0) {
                return Err(Error::domain("slab radius must be positive"));
            }
        }
        Ok(Self { slabs })
    }

    /// The set `{w : |x^T w[2k..2k+2]| <= radius for all k < d}`.
    pub fn from_covariate(d: usize, covariate: [f64; 2], radius: f64) -> Result<Self> {
        Self::new(
            (0..d)
                .map(|block| Slab {
                    block,
                    normal: covariate,
                    radius,
                })
                .collect(),
        )
    }

    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    /// Largest constraint violation at `w` (zero when feasible).
    pub fn violation(&self, w: &[f64]) -> f64 {
        self.slabs
            .iter()
            .map(|s| (s.value(w).abs() - s.radius).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Exact `A`-norm projection of `w` onto one slab, in place.
fn project_onto_slab(w: &mut [f64], slab: &Slab, inverse: &DMatrix<f64>) {
    let val = slab.value(w);
    let clamped = val.clamp(-slab.radius, slab.radius);
    if val == clamped {
        return;
    }
    let b = 2 * slab.block;
    let n = w.len();
    // A^{-1} a, where a is supported on the two block coordinates.
    let dir: Vec<f64> = (0..n)
        .map(|i| inverse[(i, b)] * slab.normal[0] + inverse[(i, b + 1)] * slab.normal[1])
        .collect();
    let curvature = slab.normal[0] * dir[b] + slab.normal[1] * dir[b + 1];
    let step = (val - clamped) / curvature;
    for (wi, di) in w.iter_mut().zip(&dir) {
        *wi -= step * di;
    }
}

/// `argmin_{w in slabs} ||w - u||_A` by Dykstra's alternating projections.
///
/// A single slab is projected in closed form. Otherwise sweeps run until one
/// full sweep moves the iterate less than `tol` in the `A`-norm and the
/// iterate is feasible within `tol`.
pub fn mahalanobis_project(
    u: &[f64],
    state: &CorrectionMatrix,
    slabs: &SlabSet,
    tol: f64,
) -> Result<Vec<f64>> {
    if u.len() != state.dim() {
        return Err(Error::Dimension {
            expected: state.dim(),
            got: u.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::domain("projection tolerance must be positive"));
    }
    if let Some(s) = slabs.slabs().iter().find(|s| 2 * s.block + 1 >= u.len()) {
        return Err(Error::domain(format!("slab block {} out of range", s.block)));
    }
    if slabs.violation(u) == 0.0 {
        return Ok(u.to_vec());
    }
    let inverse = state.inverse();
    let mut x = u.to_vec();
    if slabs.slabs().len() == 1 {
        project_onto_slab(&mut x, &slabs.slabs()[0], inverse);
        return Ok(x);
    }

    let m = slabs.slabs().len();
    let n = u.len();
    let mut increments = vec![vec![0.0; n]; m];
    let mut last_change = f64::INFINITY;
    let mut y = vec![0.0; n];
    let mut diff = vec![0.0; n];
    for _ in 0..MAX_DYKSTRA_SWEEPS {
        let start = x.clone();
        for (slab, inc) in slabs.slabs().iter().zip(increments.iter_mut()) {
            for i in 0..n {
                y[i] = x[i] + inc[i];
            }
            x.copy_from_slice(&y);
            project_onto_slab(&mut x, slab, inverse);
            for i in 0..n {
                inc[i] = y[i] - x[i];
            }
        }
        for i in 0..n {
            diff[i] = x[i] - start[i];
        }
        last_change = quad_form(state.matrix(), &diff).max(0.0).sqrt();
        if last_change < tol && slabs.violation(&x) <= tol {
            return Ok(x);
        }
    }
    Err(Error::Projection {
        iterations: MAX_DYKSTRA_SWEEPS,
        last_change,
        best: x,
    })
}
