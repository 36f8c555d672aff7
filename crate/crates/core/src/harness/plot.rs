use std::fmt::Write as _;

use super::fit::{fit_scaling_slope, scaling_samples, Against};
use super::runner::RegretRecord;
use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

pub enum Plot<'a> {
    /// Final regret against `n` on log-log axes, one colour per algorithm,
    /// with fitted power laws when `fit` is set and a fit is possible.
    Scaling {
        records: &'a [RegretRecord],
        against: Against,
        fit: bool,
    },
    /// A series with its trend overlaid.
    Trend {
        series: &'a [f64],
        trend: &'a [f64],
        title: &'a str,
    },
}

pub fn emit_plot(plot: &Plot<'_>) -> Result<String> {
    match plot {
        Plot::Scaling { records, against, fit } => scaling(records, *against, *fit),
        Plot::Trend { series, trend, title } => overlay(series, trend, title),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps `[lo, hi]` onto a pixel range, padding a degenerate interval.
struct Axis {
    lo: f64,
    hi: f64,
    from: f64,
    to: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, from: f64, to: f64) -> Self {
        let (lo, hi) = if hi - lo > 1e-12 * lo.abs().max(1.0) {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        } else {
            (lo - 0.5, hi + 0.5)
        };
        Self { lo, hi, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = write!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = write!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        escape(title)
    );
    let _ = write!(
        out,
        r#"<rect class="frame" x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="rgb(68,68,68)"/>"#,
        WIDTH - LEFT - RIGHT,
        HEIGHT - TOP - BOTTOM
    );
}

fn ticks(out: &mut String, x: &Axis, y: &Axis, xs: &[(f64, String)], ys: &[(f64, String)]) {
    let base = HEIGHT - BOTTOM;
    for (v, label) in xs {
        let px = x.map(*v);
        let _ = write!(
            out,
            r#"<line x1="{px:.2}" y1="{base}" x2="{px:.2}" y2="{}" stroke="rgb(68,68,68)"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            base + 5.0,
            base + 18.0,
            escape(label)
        );
    }
    for (v, label) in ys {
        let py = y.map(*v);
        let _ = write!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="rgb(68,68,68)"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            escape(label)
        );
    }
}

fn legend(out: &mut String, row: usize, colour: &str, label: &str) {
    let x = WIDTH - RIGHT + 15.0;
    let y = TOP + 10.0 + 18.0 * row as f64;
    let _ = write!(
        out,
        r#"<rect x="{x}" y="{}" width="12" height="4" fill="{colour}"/><text x="{}" y="{}">{}</text>"#,
        y - 2.0,
        x + 18.0,
        y + 4.0,
        escape(label)
    );
}

fn polyline(class: &str, colour: &str, width: f64, points: impl Iterator<Item = (f64, f64)>) -> String {
    let coords: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        r#"<polyline class="{class}" fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
        coords.join(" ")
    )
}

fn log_ticks(lo: f64, hi: f64) -> Vec<(f64, String)> {
    let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
    (a..=b)
        .map(|e| 10f64.powi(e))
        .filter(|v| *v >= lo * 0.999 && *v <= hi * 1.001)
        .map(|v| (v.ln(), format!("{v:e}")))
        .collect()
}

fn scaling(records: &[RegretRecord], against: Against, fit: bool) -> Result<String> {
    let mut algorithms: Vec<&str> = Vec::new();
    for r in records {
        if !algorithms.contains(&r.algorithm.as_str()) {
            algorithms.push(&r.algorithm);
        }
    }
    let series: Vec<(&str, Vec<(usize, f64)>)> = algorithms
        .iter()
        .map(|a| {
            let pts = scaling_samples(records, a, against)
                .into_iter()
                .filter(|(_, v)| *v > 0.0 && v.is_finite())
                .collect();
            (*a, pts)
        })
        .filter(|(_, p): &(&str, Vec<(usize, f64)>)| !p.is_empty())
        .collect();
    if series.is_empty() {
        return Err(Error::domain("no positive regret values to plot"));
    }
    let all: Vec<(usize, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (nlo, nhi) = all.iter().fold((f64::INFINITY, 0.0f64), |(l, h), (n, _)| {
        (l.min(*n as f64), h.max(*n as f64))
    });
    let (rlo, rhi) = all
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), (_, r)| (l.min(*r), h.max(*r)));
    let x = Axis::new(nlo.ln(), nhi.ln(), LEFT, WIDTH - RIGHT);
    let y = Axis::new(rlo.ln(), rhi.ln(), HEIGHT - BOTTOM, TOP);

    let mut out = String::new();
    let title = match against {
        Against::Offline => "regret against the offline optimum",
        Against::Comparator => "regret against the generating comparator",
    };
    header(&mut out, title);
    let mut ns: Vec<usize> = all.iter().map(|(n, _)| *n).collect();
    ns.sort_unstable();
    ns.dedup();
    let xt: Vec<(f64, String)> = ns.iter().map(|n| ((*n as f64).ln(), n.to_string())).collect();
    ticks(&mut out, &x, &y, &xt, &log_ticks(rlo, rhi));
    let _ = write!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 10.0
    );
    for (i, (alg, pts)) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let _ = write!(out, r#"<g class="series" data-algorithm="{}">"#, escape(alg));
        for (n, r) in pts {
            let _ = write!(
                out,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                x.map((*n as f64).ln()),
                y.map(r.ln())
            );
        }
        let mut label = alg.to_string();
        if fit {
            if let Ok(f) = fit_scaling_slope(pts) {
                let ends = [ns[0], ns[ns.len() - 1]];
                out.push_str(&polyline(
                    "fit",
                    colour,
                    1.5,
                    ends.iter().map(|&n| (x.map((n as f64).ln()), y.map(f.predict(n).ln()))),
                ));
                label = format!("{alg} ({:.3})", f.slope);
            }
        }
        out.push_str("</g>");
        legend(&mut out, i, colour, &label);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn overlay(series: &[f64], trend: &[f64], title: &str) -> Result<String> {
    if series.is_empty() {
        return Err(Error::domain("empty series"));
    }
    if trend.len() != series.len() {
        return Err(Error::Dimension {
            expected: series.len(),
            got: trend.len(),
        });
    }
    if series.iter().chain(trend).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite values in plot input"));
    }
    let (lo, hi) = series
        .iter()
        .chain(trend)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let n = series.len();
    let x = Axis::new(1.0, n as f64, LEFT, WIDTH - RIGHT);
    let y = Axis::new(lo, hi, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    header(&mut out, title);
    let xt: Vec<(f64, String)> = [1, n.div_ceil(2), n]
        .iter()
        .map(|&t| (t as f64, t.to_string()))
        .collect();
    let yt: Vec<(f64, String)> = [lo, 0.5 * (lo + hi), hi]
        .iter()
        .map(|&v| (v, format!("{v:.3}")))
        .collect();
    ticks(&mut out, &x, &y, &xt, &yt);
    let at = |v: &[f64]| -> Vec<(f64, f64)> {
        v.iter()
            .enumerate()
            .map(|(t, v)| (x.map((t + 1) as f64), y.map(*v)))
            .collect()
    };
    out.push_str(&polyline("series", "#999999", 1.0, at(series).into_iter()));
    out.push_str(&polyline("trend", PALETTE[1], 2.0, at(trend).into_iter()));
    legend(&mut out, 0, "#999999", "series");
    legend(&mut out, 1, PALETTE[1], "trend");
    out.push_str("</svg>\n");
    Ok(out)
}
