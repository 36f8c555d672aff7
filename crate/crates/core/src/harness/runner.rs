use web_time::Instant;

use rayon::prelude::*;

use super::config::{AlgorithmConfig, ExperimentConfig};
use crate::baselines::{best_tuned_ogd, flh_constant_experts_run, ogd_step_grid};
use crate::envgen::{gen_piecewise_linear, Environment, PiecewiseLinearSpec};
use crate::error::{Error, Result};
use crate::flh::{flh_run, CovariateMode, FlhConfig};
use crate::losses::LossOracle;
use crate::oracle::{kkt_check, solve_offline, OfflineSolution, VariationBudget};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "FLH_WORKERS";

/// Worker count from [`WORKERS_ENV`], else the available parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Error::Config(format!("{WORKERS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |p| p.get())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Cumulative regret against the generating comparator after each round.
    pub regret_comparator: Vec<f64>,
    pub regret_offline: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretRecord {
    pub cell: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub algorithm: String,
    pub budget: f64,
    /// `sigma` for FLH variants, the selected step for OGD.
    pub param: Option<f64>,
    pub loss_learner: Option<f64>,
    pub loss_comparator: Option<f64>,
    pub loss_offline: Option<f64>,
    pub regret_comparator: Option<f64>,
    pub regret_offline: Option<f64>,
    /// `loss_comparator - loss_offline`; never below `-dominance_tol`.
    pub dominance_slack: Option<f64>,
    pub kkt_residual: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
    pub trace: Option<Trace>,
}

impl RegretRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

struct Instance {
    n: usize,
    seed: u64,
    budget: f64,
    env: std::result::Result<Environment, String>,
    offline: Option<std::result::Result<(OfflineSolution, f64), String>>,
}

/// Environment seed for horizon `n` and replicate seed `seed`.
pub fn environment_seed(n: usize, seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (n as u64)
}

fn build_instance(config: &ExperimentConfig, n: usize, seed: u64) -> Instance {
    let budget = config.environment.budget.at(n);
    let spec = PiecewiseLinearSpec {
        n,
        d: config.d,
        kinks: config.environment.kinks,
        budget,
        box_radius: 1.0,
        noise: config.environment.noise,
        seed: environment_seed(n, seed),
    };
    let env = gen_piecewise_linear(&spec).map_err(|e| e.to_string());
    let offline = match (&env, config.oracle.enabled) {
        (Ok(env), true) => Some(solve(&env.losses, budget, config).map_err(|e| e.to_string())),
        _ => None,
    };
    Instance {
        n,
        seed,
        budget,
        env,
        offline,
    }
}

fn solve(losses: &[LossOracle], budget: f64, config: &ExperimentConfig) -> Result<(OfflineSolution, f64)> {
    let b = VariationBudget::new(budget, losses.len())?;
    let sol = solve_offline(losses, b, &config.oracle.options())?;
    let kkt = kkt_check(&sol, losses, b)?;
    Ok((sol, kkt.max_residual()))
}

fn total_loss(losses: &[LossOracle], points: &[Vec<f64>]) -> Result<Vec<f64>> {
    losses.iter().zip(points).map(|(l, p)| l.value(p)).collect()
}

fn cumulative_regret(learner: &[f64], reference: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    learner
        .iter()
        .zip(reference)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect()
}

/// Per-round learner losses and the parameter to report.
fn run_algorithm(alg: &AlgorithmConfig, losses: &[LossOracle], d: usize) -> Result<(Vec<f64>, f64)> {
    let certified = losses
        .iter()
        .map(|l| l.constants().sigma)
        .fold(f64::INFINITY, f64::min);
    match alg {
        AlgorithmConfig::FlhSions { sigma, epsilon, clip } => {
            let mut c = FlhConfig::new(d, sigma.unwrap_or(certified)).with_covariates(CovariateMode::Monomial);
            if let Some(e) = epsilon {
                c.epsilon = *e;
            }
            if let Some(k) = clip {
                c.clip_c = *k;
            }
            Ok((flh_run(c, losses)?.losses, c.sigma))
        }
        AlgorithmConfig::FlhConstant { sigma } => {
            let s = sigma.unwrap_or(certified);
            Ok((flh_constant_experts_run(s, losses)?.losses, s))
        }
        AlgorithmConfig::Ogd { scales, exponents } => {
            let grid = ogd_step_grid(losses.len(), scales, exponents);
            let radius = losses[0].constants().box_radius;
            let (eta, run) = best_tuned_ogd(losses, &grid, radius)?;
            Ok((run.losses, eta))
        }
    }
}

fn run_cell(config: &ExperimentConfig, inst: &Instance, alg: &AlgorithmConfig) -> RegretRecord {
    let mut rec = RegretRecord {
        cell: format!("n{}-s{}-{}", inst.n, inst.seed, alg.label()),
        n: inst.n,
        d: config.d,
        seed: inst.seed,
        algorithm: alg.label().to_string(),
        budget: inst.budget,
        param: None,
        loss_learner: None,
        loss_comparator: None,
        loss_offline: None,
        regret_comparator: None,
        regret_offline: None,
        dominance_slack: None,
        kkt_residual: None,
        seconds: 0.0,
        error: None,
        trace: None,
    };
    let env = match &inst.env {
        Ok(env) => env,
        Err(e) => {
            rec.error = Some(format!("environment: {e}"));
            return rec;
        }
    };
    let started = Instant::now();
    let outcome = run_algorithm(alg, &env.losses, config.d);
    rec.seconds = started.elapsed().as_secs_f64();
    let (learner, param) = match outcome {
        Ok(v) => v,
        Err(e) => {
            rec.error = Some(format!("algorithm: {e}"));
            return rec;
        }
    };
    rec.param = Some(param);
    let comparator = match total_loss(&env.losses, &env.comparator) {
        Ok(v) => v,
        Err(e) => {
            rec.error = Some(format!("comparator: {e}"));
            return rec;
        }
    };
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    rec.loss_learner = Some(sum(&learner));
    rec.loss_comparator = Some(sum(&comparator));
    let vs_comparator = cumulative_regret(&learner, &comparator);
    rec.regret_comparator = vs_comparator.last().copied();

    let mut vs_offline = None;
    match &inst.offline {
        None => {}
        Some(Err(e)) => rec.error = Some(format!("oracle: {e}")),
        Some(Ok((sol, kkt))) => match total_loss(&env.losses, &sol.u) {
            Ok(offline) => {
                let lo = sum(&offline);
                rec.loss_offline = Some(lo);
                rec.kkt_residual = Some(*kkt);
                let slack = sum(&comparator) - lo;
                rec.dominance_slack = Some(slack);
                let r = cumulative_regret(&learner, &offline);
                rec.regret_offline = r.last().copied();
                vs_offline = Some(r);
                if slack < -config.oracle.dominance_tol {
                    rec.error = Some(format!(
                        "dominance: offline optimum loses to the comparator by {:.3e}",
                        -slack
                    ));
                }
            }
            Err(e) => rec.error = Some(format!("oracle: {e}")),
        },
    }
    if config.traces {
        rec.trace = Some(Trace {
            regret_comparator: vs_comparator,
            regret_offline: vs_offline,
        });
    }
    rec
}

/// Runs every (horizon, seed, algorithm) cell on a pool of `workers` threads.
/// Records come back in grid order whatever the scheduling.
pub fn run_cells_with(config: &ExperimentConfig, workers: usize) -> Result<Vec<RegretRecord>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let pairs: Vec<(usize, u64)> = config
        .n
        .iter()
        .flat_map(|&n| (0..config.seeds).map(move |s| (n, config.seed_base + s)))
        .collect();
    pool.install(|| {
        let instances: Vec<Instance> = pairs
            .par_iter()
            .map(|&(n, seed)| build_instance(config, n, seed))
            .collect();
        let cells: Vec<(&Instance, &AlgorithmConfig)> = instances
            .iter()
            .flat_map(|i| config.algorithms.iter().map(move |a| (i, a)))
            .collect();
        Ok(cells
            .par_iter()
            .map(|(inst, alg)| run_cell(config, inst, alg))
            .collect())
    })
}

/// [`run_cells_with`] using [`workers_from_env`].
pub fn run_cells(config: &ExperimentConfig) -> Result<Vec<RegretRecord>> {
    run_cells_with(config, workers_from_env()?)
}
