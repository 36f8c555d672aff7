//! Partitions of an offline-optimal sequence into low-curvature bins, and the
//! residual fits used to analyse each bin.
//!
//! Indices are 0-based and bins are inclusive on both ends. Sequences are
//! indexed `[t][coordinate]` like [`crate::oracle::OfflineSolution::u`].

use std::collections::BTreeSet;
use std::io::Write;

use crate::error::{Error, Result};
use crate::oracle::COMPARATOR_BOX;

/// Tolerance when classifying slopes as equal.
pub const SLOPE_TOL: f64 = 1e-12;

/// A coordinate counts as touching `±1` within this distance.
pub const TOUCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub start: usize,
    pub end: usize,
    pub length: usize,
    /// `||D^2 u||_1` over second differences lying inside the bin.
    pub tv1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub bins: Vec<Bin>,
    pub count: usize,
    /// [`bin_count_bound`] at the sequence's total `||D^2 u||_1`.
    pub bound: f64,
    /// Start indices of bins introduced by refinement.
    pub refinement_splits: Vec<usize>,
}

/// Prefix sums of `sum_k |(D^2 u)_j[k]|` so bin variation is O(1).
struct Curvature {
    prefix: Vec<f64>,
}

impl Curvature {
    fn new(u: &[Vec<f64>]) -> Self {
        let mut prefix = vec![0.0];
        let mut acc = 0.0;
        for w in u.windows(3) {
            for k in 0..w[0].len() {
                acc += (w[0][k] - 2.0 * w[1][k] + w[2][k]).abs();
            }
            prefix.push(acc);
        }
        Self { prefix }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// Rows `j` with `start <= j` and `j + 2 <= end`.
    fn over(&self, start: usize, end: usize) -> f64 {
        if end < start + 2 {
            return 0.0;
        }
        self.prefix[end - 1] - self.prefix[start]
    }

    fn bin(&self, start: usize, end: usize) -> Bin {
        Bin {
            start,
            end,
            length: end - start + 1,
            tv1: self.over(start, end),
        }
    }
}

fn check_sequence(u: &[Vec<f64>]) -> Result<usize> {
    let d = u.first().map_or(0, |r| r.len());
    if d == 0 {
        return Err(Error::domain("empty sequence"));
    }
    if let Some(r) = u.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            got: r.len(),
        });
    }
    if u.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::domain("sequence contains non-finite values"));
    }
    Ok(d)
}

/// `ℓ^{-3/2}`.
pub fn length_threshold(length: usize) -> f64 {
    (length as f64).powf(-1.5)
}

/// Left-to-right greedy bins, each as long as its variation stays within
/// [`length_threshold`]. Variation only grows and the threshold only shrinks
/// as a bin extends, so the first failure makes the bin maximal.
pub fn greedy_partition(u: &[Vec<f64>]) -> Result<PartitionReport> {
    let n = u.len();
    if n < 3 {
        return Err(Error::domain("partition needs at least 3 rounds"));
    }
    check_sequence(u)?;
    let curv = Curvature::new(u);
    let mut bins = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && curv.over(start, end + 1) <= length_threshold(end + 2 - start) {
            end += 1;
        }
        bins.push(curv.bin(start, end));
        start = end + 1;
    }
    Ok(PartitionReport {
        count: bins.len(),
        bound: bin_count_bound(n, curv.total()),
        bins,
        refinement_splits: Vec::new(),
    })
}

/// `(n^{3/2} tv1_total)^{2/5} + 1`.
pub fn bin_count_bound(n: usize, tv1_total: f64) -> f64 {
    ((n as f64).powf(1.5) * tv1_total.max(0.0)).powf(0.4) + 1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

fn touch(u: f64, gm: f64, gp: f64) -> Option<Side> {
    if gp > 0.0 || u >= COMPARATOR_BOX - TOUCH_TOL {
        Some(Side::Upper)
    } else if gm > 0.0 || u <= -COMPARATOR_BOX + TOUCH_TOL {
        Some(Side::Lower)
    } else {
        None
    }
}

/// Splits bins so that no refined bin touches both `+1` and `-1` in the same
/// coordinate. One pass applies the endpoint rule: when a bin endpoint sits
/// on one face and some point `p` of the bin sits on the other, cut before
/// the first such `p`. Bins that still touch both faces (only possible
/// through interior touches) are then cut before the first touch of the
/// face reached second, until none remain.
pub fn refine_boundary_touches(
    partition: &PartitionReport,
    u: &[Vec<f64>],
    gamma_minus: &[Vec<f64>],
    gamma_plus: &[Vec<f64>],
) -> Result<PartitionReport> {
    let n = u.len();
    let d = check_sequence(u)?;
    for g in [gamma_minus, gamma_plus] {
        if g.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: g.len(),
            });
        }
        if let Some(r) = g.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: r.len(),
            });
        }
    }
    let tiled_to = partition.bins.last().map_or(0, |b| b.end + 1);
    if tiled_to != n {
        return Err(Error::domain(format!(
            "partition covers {tiled_to} rounds, sequence has {n}"
        )));
    }
    let side = |t: usize, k: usize| touch(u[t][k], gamma_minus[t][k], gamma_plus[t][k]);

    let mut starts: BTreeSet<usize> = partition.bins.iter().map(|b| b.start).collect();
    let original = starts.clone();
    for b in &partition.bins {
        for k in 0..d {
            for end in [b.start, b.end] {
                let Some(face) = side(end, k) else { continue };
                let p = (b.start..=b.end).find(|&p| side(p, k).is_some_and(|s| s != face));
                if let Some(p) = p.filter(|&p| p > b.start) {
                    starts.insert(p);
                }
            }
        }
    }
    loop {
        let bounds = bin_bounds(&starts, n);
        let mut added = false;
        for (s, e) in bounds {
            for k in 0..d {
                let mut first = None;
                for p in s..=e {
                    match (first, side(p, k)) {
                        (None, Some(f)) => first = Some(f),
                        (Some(f), Some(g)) if g != f => {
                            starts.insert(p);
                            added = true;
                            break;
                        }
                        _ => {}
                    }
                }
            }
        }
        if !added {
            break;
        }
    }

    let curv = Curvature::new(u);
    let bins: Vec<Bin> = bin_bounds(&starts, n)
        .into_iter()
        .map(|(s, e)| curv.bin(s, e))
        .collect();
    let mut refinement_splits = partition.refinement_splits.clone();
    refinement_splits.extend(starts.difference(&original));
    refinement_splits.sort_unstable();
    refinement_splits.dedup();
    Ok(PartitionReport {
        count: bins.len(),
        bound: partition.bound,
        bins,
        refinement_splits,
    })
}

fn bin_bounds(starts: &BTreeSet<usize>, n: usize) -> Vec<(usize, usize)> {
    let v: Vec<usize> = starts.iter().copied().collect();
    v.iter()
        .enumerate()
        .map(|(i, &s)| (s, v.get(i + 1).map_or(n - 1, |next| next - 1)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonicSplit {
    /// Slopes are constant over the bin: `{i_s, i_t}`.
    Constant { start: usize, end: usize },
    /// `[start, b]` and `[c + 1, end]` have constant slope; the slope
    /// strictly changes from `b` to `b + 1` and from `c` to `c + 1`.
    /// The middle bin `[b + 1, c]` is empty when `b == c`.
    Split {
        start: usize,
        b: usize,
        c: usize,
        end: usize,
        increasing: bool,
    },
    NonMonotonic,
}

impl MonotonicSplit {
    /// Split points `{i_s, b, b+1, c, c+1, i_t}`, or `{i_s, i_t}`.
    pub fn indices(&self) -> Vec<usize> {
        match *self {
            MonotonicSplit::Constant { start, end } => vec![start, end],
            MonotonicSplit::Split { start, b, c, end, .. } => vec![start, b, b + 1, c, c + 1, end],
            MonotonicSplit::NonMonotonic => Vec::new(),
        }
    }

    /// Nonempty sub-bins as inclusive `(start, end)` pairs.
    pub fn bins(&self) -> Vec<(usize, usize)> {
        match *self {
            MonotonicSplit::Constant { start, end } => vec![(start, end)],
            MonotonicSplit::Split { start, b, c, end, .. } => {
                let mut out = vec![(start, b)];
                if c > b {
                    out.push((b + 1, c));
                }
                out.push((c + 1, end));
                out
            }
            MonotonicSplit::NonMonotonic => Vec::new(),
        }
    }
}

/// Classifies the slopes `z_j = u_{j+1}[k] - u_j[k]`, `j = i_s..i_t - 1`.
pub fn split_monotonic(u: &[Vec<f64>], bin: &Bin, coordinate: usize) -> Result<MonotonicSplit> {
    if bin.end >= u.len() || bin.start > bin.end {
        return Err(Error::domain(format!(
            "bin [{}, {}] outside sequence of length {}",
            bin.start,
            bin.end,
            u.len()
        )));
    }
    let d = check_sequence(u)?;
    if coordinate >= d {
        return Err(Error::domain(format!("coordinate {coordinate} out of range for d = {d}")));
    }
    let (start, end) = (bin.start, bin.end);
    let z: Vec<f64> = (start..end).map(|j| u[j + 1][coordinate] - u[j][coordinate]).collect();
    let steps: Vec<f64> = z.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.iter().all(|s| s.abs() <= SLOPE_TOL) {
        return Ok(MonotonicSplit::Constant { start, end });
    }
    let increasing = if steps.iter().all(|&s| s >= -SLOPE_TOL) {
        true
    } else if steps.iter().all(|&s| s <= SLOPE_TOL) {
        false
    } else {
        return Ok(MonotonicSplit::NonMonotonic);
    };
    let strict = |s: &f64| if increasing { *s > SLOPE_TOL } else { *s < -SLOPE_TOL };
    // steps[i] compares z at start + i and start + i + 1.
    let b = start + steps.iter().position(strict).unwrap();
    let c = start + steps.iter().rposition(strict).unwrap();
    Ok(MonotonicSplit::Split {
        start,
        b,
        c,
        end,
        increasing,
    })
}

/// Least squares of `u[start..=end]` on `x_t = [1, t - start + 1]`.
/// Returns `(beta, r)` with `r_t = beta . x_t - u_t`.
pub fn linear_fit_residuals(u: &[f64], start: usize, end: usize) -> Result<([f64; 2], Vec<f64>)> {
    if end >= u.len() || start > end {
        return Err(Error::domain(format!(
            "bin [{start}, {end}] outside sequence of length {}",
            u.len()
        )));
    }
    let seg = &u[start..=end];
    let len = seg.len();
    if len < 2 {
        return Err(Error::domain("a line fit needs at least 2 points"));
    }
    let l = len as f64;
    let mx = (l + 1.0) / 2.0;
    let my = seg.iter().sum::<f64>() / l;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in seg.iter().enumerate() {
        let dx = (i + 1) as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let beta = [my - slope * mx, slope];
    let r = seg
        .iter()
        .enumerate()
        .map(|(i, v)| beta[0] + beta[1] * (i + 1) as f64 - v)
        .collect();
    Ok((beta, r))
}

/// Writes residuals as samples of a piecewise-linear signal,
/// `r_i = (i + 1) M_i + C_i` with local index `i = 0..ℓ`: `M_i = r_{i+1} - r_i`,
/// `M_{ℓ-1} = M_{ℓ-2}`, and `C` from the recursion
/// `C_i - C_{i-1} = (i + 1)(M_{i-1} - M_i)` started at `C_0 = r_0 - M_0`.
pub fn residual_decomposition(r: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = r.len();
    if l < 2 {
        return Err(Error::domain("decomposition needs at least 2 residuals"));
    }
    let mut m: Vec<f64> = r.windows(2).map(|w| w[1] - w[0]).collect();
    m.push(m[l - 2]);
    let mut c = vec![r[0] - m[0]; l];
    for i in 1..l {
        c[i] = c[i - 1] + (i + 1) as f64 * (m[i - 1] - m[i]);
    }
    Ok((m, c))
}

/// Writes `start,end,length,tv1` rows with 1-based rounds.
pub fn write_partition_csv<W: Write>(report: &PartitionReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["start", "end", "length", "tv1"])?;
    for b in &report.bins {
        w.write_record([
            (b.start + 1).to_string(),
            (b.end + 1).to_string(),
            b.length.to_string(),
            format!("{:e}", b.tv1),
        ])?;
    }
    w.flush()?;
    Ok(())
}
