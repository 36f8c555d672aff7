//! `flhsions` command-line driver.
//!
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 when any
//! cell or solve fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flhsions::envgen::{ingest_csv, Normalization};
use flhsions::harness::{
    emit_plot, fit_scaling_slope, run_cells, scaling_samples, write_fits_csv, write_records_csv,
    write_traces, Against, ExperimentConfig, Plot, RegretRecord,
};
use flhsions::losses::make_scaled_squared_loss;
use flhsions::oracle::{l1_trend_filter, solve_offline, write_solution_csv, OracleOptions, VariationBudget};
use flhsions::Error;

#[derive(Parser)]
#[command(name = "flhsions", version, about = "Dynamic-regret experiments for FLH-SIONS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment grid and write `records.csv`.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the offline problem for the targets in a CSV file.
    Oracle {
        /// CSV with a header; uses columns `y1..` if present, else every column but `t`.
        #[arg(long)]
        input: PathBuf,
        /// `C_n`, the bound on `n ||D^2 u||_1`.
        #[arg(long)]
        budget: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a grid, then fit regret-vs-n slopes and plot them.
    Scaling {
        #[arg(long)]
        config: PathBuf,
        /// Fit log-log slopes and draw fitted lines.
        #[arg(long)]
        fit: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L1 trend filter of one CSV column, drawn over the data as SVG.
    Demo {
        #[arg(long)]
        input: PathBuf,
        /// Penalty on the min-max normalised series.
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        out: PathBuf,
        /// Value column; defaults to the last header column.
        #[arg(long)]
        column: Option<String>,
    },
}

enum Failure {
    Config(String),
    Cells(String),
}

impl Failure {
    fn input(e: Error) -> Self {
        Failure::Config(e.to_string())
    }

    fn from_error(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::MissingFile { .. }
            | Error::NonNumeric { .. }
            | Error::EmptySelection(_)
            | Error::Csv(_)
            | Error::Domain(_)
            | Error::Dimension { .. } => Failure::input(e),
            other => Failure::Cells(other.to_string()),
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::Cells(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out, false),
        Command::Scaling { config, fit, out } => run(&config, out, fit),
        Command::Oracle { input, budget, out } => oracle(&input, budget, &out),
        Command::Demo {
            input,
            lambda,
            out,
            column,
        } => demo(&input, lambda, &out, column),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Cells(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(config_path: &Path, out: Option<PathBuf>, fit: bool) -> Result<(), Failure> {
    let config = ExperimentConfig::load(config_path).map_err(Failure::input)?;
    let out = out
        .or_else(|| config.out.clone())
        .ok_or_else(|| Failure::Config("no output directory: pass --out or set `out`".into()))?;
    if fit {
        let mut ns = config.n.clone();
        ns.sort_unstable();
        ns.dedup();
        if ns.len() < 4 {
            return Err(Failure::Config(format!(
                "--fit needs at least 4 distinct horizons, config lists {}",
                ns.len()
            )));
        }
    }
    let records = run_cells(&config).map_err(Failure::from_error)?;
    fs::create_dir_all(&out).map_err(io)?;
    let file = fs::File::create(out.join("records.csv")).map_err(io)?;
    write_records_csv(&records, file).map_err(Failure::from_error)?;
    let traced = write_traces(&records, &out.join("traces")).map_err(Failure::from_error)?;
    let failed: Vec<&RegretRecord> = records.iter().filter(|r| !r.ok()).collect();
    println!(
        "{} cells, {} failed, {} traces -> {}",
        records.len(),
        failed.len(),
        traced,
        out.display()
    );
    if fit && !records.is_empty() {
        write_fits(&config, &records, &out)?;
    }
    if let Some(first) = failed.first() {
        for r in &failed {
            eprintln!("{}: {}", r.cell, r.error.as_deref().unwrap_or(""));
        }
        return Err(Failure::Cells(format!(
            "{} of {} cells failed (first: {})",
            failed.len(),
            records.len(),
            first.cell
        )));
    }
    Ok(())
}

fn write_fits(config: &ExperimentConfig, records: &[RegretRecord], out: &Path) -> Result<(), Failure> {
    let mut fits = Vec::new();
    for alg in &config.algorithms {
        for (against, name) in [(Against::Offline, "offline"), (Against::Comparator, "comparator")] {
            match fit_scaling_slope(&scaling_samples(records, alg.label(), against)) {
                Ok(f) => {
                    for w in &f.warnings {
                        eprintln!("warning: {} vs {name}: {w}", alg.label());
                    }
                    println!(
                        "{:<14} vs {:<10} slope {:+.4}  r2 {:.3}",
                        alg.label(),
                        name,
                        f.slope,
                        f.r2
                    );
                    fits.push((alg.label().to_string(), name.to_string(), f));
                }
                Err(e) => eprintln!("warning: {} vs {name}: {e}", alg.label()),
            }
        }
    }
    let file = fs::File::create(out.join("fits.csv")).map_err(io)?;
    write_fits_csv(&fits, file).map_err(Failure::from_error)?;
    let against = if config.oracle.enabled {
        Against::Offline
    } else {
        Against::Comparator
    };
    match emit_plot(&Plot::Scaling {
        records,
        against,
        fit: true,
    }) {
        Ok(svg) => fs::write(out.join("regret_scaling.svg"), svg).map_err(io)?,
        Err(e) => eprintln!("warning: no plot: {e}"),
    }
    Ok(())
}

fn read_targets(input: &Path) -> Result<Vec<Vec<f64>>, Failure> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(input)
        .map_err(|_| Failure::Config(format!("cannot read {}", input.display())))?;
    let header = reader
        .headers()
        .map_err(|e| Failure::Config(e.to_string()))?
        .clone();
    let names: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let ys: Vec<String> = names
        .iter()
        .filter(|h| h.len() > 1 && h.starts_with('y') && h[1..].parse::<usize>().is_ok())
        .cloned()
        .collect();
    let columns = if ys.is_empty() {
        names.into_iter().filter(|h| h != "t").collect()
    } else {
        ys
    };
    let series = ingest_csv(input, &columns, None, Normalization::None).map_err(Failure::input)?;
    Ok(series.values)
}

fn oracle(input: &Path, budget: f64, out: &Path) -> Result<(), Failure> {
    let targets = read_targets(input)?;
    let losses = targets
        .iter()
        .map(|y| make_scaled_squared_loss(y))
        .collect::<Result<Vec<_>, _>>()
        .map_err(Failure::input)?;
    let b = VariationBudget::new(budget, losses.len()).map_err(Failure::input)?;
    if losses.len() < 3 {
        return Err(Failure::Config("the offline problem needs at least 3 rows".into()));
    }
    let sol = solve_offline(&losses, b, &OracleOptions::default()).map_err(|e| Failure::Cells(e.to_string()))?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let file = fs::File::create(out).map_err(io)?;
    write_solution_csv(&sol, file).map_err(Failure::from_error)?;
    println!(
        "n {} lambda {:e} objective {:e} certificate {:?}",
        sol.n(),
        sol.lambda,
        sol.objective,
        sol.report.certificate
    );
    Ok(())
}

fn demo(input: &Path, lambda: f64, out: &Path, column: Option<String>) -> Result<(), Failure> {
    let column = match column {
        Some(c) => c,
        None => {
            let mut reader = csv::Reader::from_path(input)
                .map_err(|_| Failure::Config(format!("cannot read {}", input.display())))?;
            let header = reader.headers().map_err(|e| Failure::Config(e.to_string()))?;
            header
                .iter()
                .next_back()
                .map(|h| h.trim().to_string())
                .ok_or_else(|| Failure::Config("empty header".into()))?
        }
    };
    let series = ingest_csv(input, std::slice::from_ref(&column), None, Normalization::MinMax)
        .map_err(Failure::input)?;
    let normalised = series.column(0);
    let trend = l1_trend_filter(&normalised, lambda).map_err(Failure::input)?;
    let raw = series.denormalize(0, &normalised);
    let trend_raw = series.denormalize(0, &trend);
    let title = format!("{} ({column}), lambda = {lambda}", series.name);
    let svg = emit_plot(&Plot::Trend {
        series: &raw,
        trend: &trend_raw,
        title: &title,
    })
    .map_err(Failure::input)?;
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(out, svg).map_err(io)?;
    println!("{} points -> {}", raw.len(), out.display());
    Ok(())
}
