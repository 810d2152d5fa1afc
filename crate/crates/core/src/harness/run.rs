//! Single runs and seeded multi-run campaigns.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Problem};
use crate::error::{Error, Result};
use crate::neural::{test_error, train_error};
use crate::objective::{euclidean, squared_distance};
use crate::swarm::{check_stop, consensus_point, init_swarm, step, RngStream, SwarmState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StopRule,
    MaxIters,
    Divergence,
}

/// Swarm statistics recorded at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub k: usize,
    pub diameter: f64,
    /// Mean squared distance to the nearest known minimizer.
    pub w_k: Option<f64>,
    pub best_f: f64,
    pub consensus: Vec<f64>,
}

/// Terminal-state metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub success: Option<bool>,
    pub sol_err: Option<f64>,
    pub fun_err: Option<f64>,
    /// Network targets: errors of the consensus point.
    pub train_err: Option<f64>,
    pub test_err: Option<f64>,
    /// Network targets: mean training error over the initial particles.
    pub initial_train_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub iterations: usize,
    pub terminated_by: Termination,
    pub final_positions: Vec<Vec<f64>>,
    pub final_values: Vec<f64>,
    pub series: Vec<Checkpoint>,
    pub evals: u64,
    pub metrics: RunMetrics,
}

/// Every iteration up to 100, then every 10th.
pub fn is_checkpoint(k: usize) -> bool {
    k <= 100 || k % 10 == 0
}

fn checkpoint(state: &SwarmState, problem: &Problem, beta: f64) -> Result<Checkpoint> {
    let w_k = problem
        .nearest_minimizer(state.positions())
        .map(|xs| state.mean_square_distance(xs));
    Ok(Checkpoint {
        k: state.iteration(),
        diameter: state.diameter(),
        w_k,
        best_f: state.best().map_or(f64::NAN, |b| b.1),
        consensus: consensus_point(state, beta)?.xbar,
    })
}

pub fn run_once(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    let problem = config.problem(seed)?;
    run_on(config, &problem, seed)
}

/// Run on a prepared problem; the problem's evaluation counter is read as a delta.
pub fn run_on(config: &ExperimentConfig, problem: &Problem, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let obj = problem.objective.fresh();
    let mut rng = RngStream::new(seed);
    let mut state = init_swarm(&config.init, config.particles, config.dim(), &mut rng)?;
    let initial_train_err = problem.dnn.as_ref().map(|dnn| {
        let total: f64 = state
            .positions()
            .iter()
            .map(|x| train_error(&dnn.arch, x, &dnn.data).unwrap_or(f64::NAN))
            .sum();
        total / state.len() as f64
    });
    let mut terminated_by = Termination::MaxIters;
    if let Err(e) = state.attach(&obj) {
        return Err(Error::Config(format!("objective is not finite at the initial swarm: {e}")));
    }
    let mut series = vec![checkpoint(&state, problem, config.params.beta)?];
    while state.iteration() < config.max_iters {
        let next = match step(config.method, &state, &obj, &config.params, &config.schedule, &mut rng) {
            Ok(next) => next,
            Err(e @ (Error::Divergence { .. } | Error::Estimation { .. })) => {
                warn!("run with seed {seed} diverged: {e}");
                terminated_by = Termination::Divergence;
                break;
            }
            Err(e) => return Err(e),
        };
        let stop = check_stop(&state, &next, config.stop_tol);
        state = next;
        if is_checkpoint(state.iteration()) {
            series.push(checkpoint(&state, problem, config.params.beta)?);
        }
        if stop {
            terminated_by = Termination::StopRule;
            break;
        }
    }
    if series.last().map(|c| c.k) != Some(state.iteration()) {
        series.push(checkpoint(&state, problem, config.params.beta)?);
    }
    debug!("seed {seed}: {:?} after {} iterations", terminated_by, state.iteration());
    let mut metrics = terminal_metrics(&state, problem, config.success_tol);
    metrics.initial_train_err = initial_train_err;
    if let Some(dnn) = &problem.dnn {
        let xbar = consensus_point(&state, config.params.beta)?.xbar;
        metrics.train_err = Some(train_error(&dnn.arch, &xbar, &dnn.data)?);
        metrics.test_err = Some(test_error(&dnn.arch, &xbar, &dnn.data)?);
    }
    Ok(RunRecord {
        seed,
        iterations: state.iteration(),
        terminated_by,
        final_positions: state.positions().to_vec(),
        final_values: state.values().to_vec(),
        series,
        evals: obj.eval_count(),
        metrics,
    })
}

/// Success, solution error and function error against the nearest listed minimizer.
pub fn terminal_metrics(state: &SwarmState, problem: &Problem, success_tol: f64) -> RunMetrics {
    let mut m = RunMetrics {
        success: None,
        sol_err: None,
        fun_err: None,
        train_err: None,
        test_err: None,
        initial_train_err: None,
    };
    if let (Some(xs), Some(fs)) = (problem.nearest_minimizer(state.positions()), problem.f_star) {
        let n = state.len() as f64;
        let worst = state
            .positions()
            .iter()
            .map(|x| euclidean(x, xs))
            .fold(0.0, f64::max);
        m.success = Some(worst < success_tol);
        m.sol_err = Some(state.positions().iter().map(|x| squared_distance(x, xs)).sum::<f64>() / n);
        m.fun_err = Some(state.values().iter().map(|f| (f - fs).abs()).sum::<f64>() / n);
    }
    m
}

/// Campaign summary over independent seeded runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: ExperimentConfig,
    pub rate: Option<f64>,
    pub sol_err: Option<f64>,
    pub fun_err: Option<f64>,
    pub mean_iters: f64,
    pub mean_evals: f64,
    pub diverged: usize,
    pub median_train_err: Option<f64>,
    pub median_test_err: Option<f64>,
    pub records: Vec<RunRecord>,
}

pub fn run_many(config: &ExperimentConfig) -> Result<AggregateReport> {
    config.validate()?;
    let shared = match config.target {
        super::config::Target::Benchmark { .. } => Some(config.problem(config.seed)?),
        super::config::Target::Dnn { .. } => None,
    };
    let records = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = config.run_seed(run);
            match &shared {
                Some(problem) => run_on(config, problem, seed),
                None => run_once(config, seed),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, records))
}

/// Reduce run records in run order.
pub fn aggregate(config: &ExperimentConfig, records: Vec<RunRecord>) -> AggregateReport {
    let n = records.len() as f64;
    let mean_of = |get: &dyn Fn(&RunRecord) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = records.iter().map(get).collect();
        vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };
    let rate = mean_of(&|r| {
        r.metrics
            .success
            .map(|s| if s && r.terminated_by != Termination::Divergence { 1.0 } else { 0.0 })
    });
    AggregateReport {
        config: config.clone(),
        rate,
        sol_err: mean_of(&|r| r.metrics.sol_err),
        fun_err: mean_of(&|r| r.metrics.fun_err),
        mean_iters: records.iter().map(|r| r.iterations as f64).sum::<f64>() / n.max(1.0),
        mean_evals: records.iter().map(|r| r.evals as f64).sum::<f64>() / n.max(1.0),
        diverged: records
            .iter()
            .filter(|r| r.terminated_by == Termination::Divergence)
            .count(),
        median_train_err: median(records.iter().filter_map(|r| r.metrics.train_err).collect()),
        median_test_err: median(records.iter().filter_map(|r| r.metrics.test_err).collect()),
        records,
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
