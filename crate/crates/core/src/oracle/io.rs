use std::io::Write;

use super::OfflineSolution;
use crate::error::Result;

/// Writes `t, u[k].., s[k].., gamma_minus[k].., gamma_plus[k]..` rows after a
/// `#` comment line carrying `lambda`, `objective` and the solver residuals.
/// Read it back with a CSV reader that skips `#` comments.
pub fn write_solution_csv<W: Write>(solution: &OfflineSolution, mut out: W) -> Result<()> {
    let r = &solution.report;
    writeln!(
        out,
        "# lambda={:e} objective={:e} c_n={} budget_gap={:e} primal_residual={:e} dual_residual={:e} certificate={:?}",
        solution.lambda,
        solution.objective,
        solution.budget.c_n,
        r.budget_gap,
        r.primal_residual,
        r.dual_residual,
        r.certificate
    )?;
    let d = solution.u.first().map_or(0, |r| r.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    for name in ["u", "s", "gamma_minus", "gamma_plus"] {
        for k in 1..=d {
            header.push(format!("{name}{k}"));
        }
    }
    w.write_record(&header)?;
    for t in 0..solution.n() {
        let mut row = vec![(t + 1).to_string()];
        for block in [
            &solution.u,
            &solution.signs,
            &solution.gamma_minus,
            &solution.gamma_plus,
        ] {
            row.extend(block[t].iter().map(|v| format!("{v:e}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
