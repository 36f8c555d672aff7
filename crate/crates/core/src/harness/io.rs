use std::fs;
use std::io::Write;
use std::path::Path;

use super::fit::ScalingFit;
use super::runner::RegretRecord;
use crate::error::Result;

/// Column order of the per-cell table. Changing it breaks the golden test.
pub const RECORD_COLUMNS: [&str; 17] = [
    "cell",
    "n",
    "d",
    "seed",
    "algorithm",
    "budget",
    "param",
    "loss_learner",
    "loss_comparator",
    "loss_offline",
    "regret_comparator",
    "regret_offline",
    "dominance_slack",
    "kkt_residual",
    "seconds",
    "status",
    "error",
];

pub const FIT_COLUMNS: [&str; 7] = ["algorithm", "against", "slope", "intercept", "r2", "points", "excluded"];

fn num(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

pub fn write_records_csv<W: Write>(records: &[RegretRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.write_record([
            r.cell.clone(),
            r.n.to_string(),
            r.d.to_string(),
            r.seed.to_string(),
            r.algorithm.clone(),
            format!("{:e}", r.budget),
            num(r.param),
            num(r.loss_learner),
            num(r.loss_comparator),
            num(r.loss_offline),
            num(r.regret_comparator),
            num(r.regret_offline),
            num(r.dominance_slack),
            num(r.kkt_residual),
            format!("{:.6}", r.seconds),
            if r.ok() { "ok" } else { "failed" }.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `t,regret_comparator,regret_offline` file per traced cell under `dir`.
pub fn write_traces(records: &[RegretRecord], dir: &Path) -> Result<usize> {
    let mut written = 0;
    for r in records {
        let Some(trace) = &r.trace else { continue };
        fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", r.cell)))?;
        w.write_record(["t", "regret_comparator", "regret_offline"])?;
        for (t, v) in trace.regret_comparator.iter().enumerate() {
            let off = trace.regret_offline.as_ref().map(|o| o[t]);
            w.write_record([(t + 1).to_string(), format!("{v:e}"), num(off)])?;
        }
        w.flush()?;
        written += 1;
    }
    Ok(written)
}

pub fn write_fits_csv<W: Write>(fits: &[(String, String, ScalingFit)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FIT_COLUMNS)?;
    for (alg, against, f) in fits {
        w.write_record([
            alg.clone(),
            against.clone(),
            format!("{:e}", f.slope),
            format!("{:e}", f.intercept),
            format!("{:e}", f.r2),
            f.points.len().to_string(),
            f.excluded.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
