//! Benchmarks, regret, simple-regret counting, and aggregation across
//! replications.

use serde::Serialize;

use crate::algorithms::{FixedDistribution, Policy};
use crate::confidence;
use crate::error::{BwkError, Result};
use crate::instances::InstancePair;
use crate::lp;
use crate::model::BwkInstance;
use crate::simulator::{self, mean_stderr, Trace, TraceDetail};

/// How the benchmark against which regret is reported is computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BenchmarkMode {
    /// `T * OPT_LP`; upper-bounds both the dynamic and fixed-distribution
    /// optima, so reported regret is conservative.
    LpProxy,
    /// Monte Carlo mean total reward of the fixed distribution `X*`; a lower
    /// bound estimate of the fixed-distribution optimum.
    MonteCarloFd { reps: u64 },
}

/// A benchmark value with its sampling error when estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Benchmark {
    #[serde(flatten)]
    pub mode: BenchmarkMode,
    pub value: f64,
    pub stderr: Option<f64>,
}

/// Computes the benchmark for an instance.
pub fn benchmark_value(
    instance: &BwkInstance,
    mode: BenchmarkMode,
    seed: u64,
) -> Result<Benchmark> {
    let lp = lp::solve(&lp::build_primal(instance))?;
    match mode {
        BenchmarkMode::LpProxy => Ok(Benchmark {
            mode,
            value: instance.t as f64 * lp.value,
            stderr: None,
        }),
        BenchmarkMode::MonteCarloFd { reps } => {
            if reps < 30 {
                return Err(BwkError::SampleSize(format!(
                    "monte carlo benchmark needs >= 30 reps, got {reps}"
                )));
            }
            let x_star = lp.x.clone();
            let traces = simulator::run_replications(
                instance,
                move || -> Box<dyn Policy> { Box::new(FixedDistribution::new(x_star.clone())) },
                seed,
                reps,
                TraceDetail::Summary,
            )?;
            let rewards: Vec<f64> = traces.iter().map(|t| t.total_reward).collect();
            let (mean, se) = mean_stderr(&rewards);
            Ok(Benchmark {
                mode,
                value: mean,
                stderr: Some(se),
            })
        }
    }
}

/// Simple-regret exceedance counts: for each threshold, the number of rounds
/// where `OPT_LP - r(X_t) >= eps`.
pub fn simple_regret_counts(
    trace: &Trace,
    instance: &BwkInstance,
    eps_grid: &[f64],
) -> Result<Vec<(f64, u64)>> {
    if eps_grid.iter().any(|&e| e <= 0.0) {
        return Err(BwkError::Parameter("eps grid must be positive".into()));
    }
    let opt = lp::solve(&lp::build_primal(instance))?.value;
    let mut counts = vec![0u64; eps_grid.len()];
    for rec in &trace.rounds {
        let shortfall = opt - instance.mean_reward_of(&rec.x);
        for (i, &eps) in eps_grid.iter().enumerate() {
            if shortfall >= eps {
                counts[i] += 1;
            }
        }
    }
    Ok(eps_grid.iter().copied().zip(counts).collect())
}

/// Count statistics of one simple-regret threshold across traces.
#[derive(Debug, Clone, Serialize)]
pub struct EpsCountStats {
    pub eps: f64,
    pub mean: f64,
    pub median: f64,
    pub max: u64,
}

/// Aggregated results of one (instance, policy) experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub reps: usize,
    pub opt_lp: f64,
    pub benchmark: Benchmark,
    pub opt_fd_estimate: Option<Benchmark>,
    pub total_reward_mean: f64,
    pub total_reward_stderr: f64,
    pub regret_mean: f64,
    pub regret_stderr: f64,
    pub n_eps: Vec<EpsCountStats>,
    pub max_action_confidence_sum: Option<f64>,
    pub max_distribution_confidence_sum: Option<f64>,
    /// Fraction of traces where the clean event held at every round.
    pub clean_event_all_rounds_fraction: Option<f64>,
    pub mean_pull_counts: Vec<f64>,
    pub mean_rounds: f64,
}

/// Builds the summary for a batch of traces from one (instance, policy) pair.
/// Confidence-sum and clean-event fields need radii-bearing traces and are
/// omitted otherwise.
pub fn summarize(
    instance: &BwkInstance,
    traces: &[Trace],
    benchmark: Benchmark,
    opt_fd_estimate: Option<Benchmark>,
    eps_grid: &[f64],
) -> Result<RunSummary> {
    if traces.is_empty() {
        return Err(BwkError::SampleSize("no traces to summarize".into()));
    }
    let opt_lp = lp::solve(&lp::build_primal(instance))?.value;
    let rewards: Vec<f64> = traces.iter().map(|t| t.total_reward).collect();
    let (reward_mean, reward_se) = mean_stderr(&rewards);
    let regrets: Vec<f64> = rewards.iter().map(|r| benchmark.value - r).collect();
    let (regret_mean, regret_se) = mean_stderr(&regrets);

    let mut n_eps = Vec::with_capacity(eps_grid.len());
    if !eps_grid.is_empty() {
        let mut per_trace: Vec<Vec<u64>> = Vec::with_capacity(traces.len());
        for trace in traces {
            per_trace.push(
                simple_regret_counts(trace, instance, eps_grid)?
                    .into_iter()
                    .map(|(_, c)| c)
                    .collect(),
            );
        }
        for (i, &eps) in eps_grid.iter().enumerate() {
            let mut counts: Vec<u64> = per_trace.iter().map(|c| c[i]).collect();
            counts.sort_unstable();
            let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
            let median = counts[counts.len() / 2] as f64;
            n_eps.push(EpsCountStats {
                eps,
                mean,
                median,
                max: *counts.last().unwrap(),
            });
        }
    }

    let has_radii = traces
        .iter()
        .all(|t| t.rounds.iter().all(|r| r.radii.is_some()));
    let (mut max_act, mut max_dist, mut clean_all) = (None, None, None);
    if has_radii {
        let mut act = 0.0f64;
        let mut dist = 0.0f64;
        let mut clean = 0usize;
        for trace in traces {
            let all: Vec<usize> = (0..trace.rounds.len()).collect();
            act = act.max(confidence::action_confidence_sum(trace, &all)?);
            dist = dist.max(confidence::distribution_confidence_sum(trace, &all)?);
            if confidence::clean_event_fraction(instance, trace) == 1.0 {
                clean += 1;
            }
        }
        max_act = Some(act);
        max_dist = Some(dist);
        clean_all = Some(clean as f64 / traces.len() as f64);
    }

    let k = instance.num_arms();
    let mut mean_pull_counts = vec![0.0; k];
    for trace in traces {
        for (acc, c) in mean_pull_counts.iter_mut().zip(trace.pull_counts()) {
            *acc += c as f64 / traces.len() as f64;
        }
    }
    let mean_rounds =
        traces.iter().map(|t| t.rounds.len() as f64).sum::<f64>() / traces.len() as f64;

    Ok(RunSummary {
        schema_version: 1,
        reps: traces.len(),
        opt_lp,
        benchmark,
        opt_fd_estimate,
        total_reward_mean: reward_mean,
        total_reward_stderr: reward_se,
        regret_mean,
        regret_stderr: regret_se,
        n_eps,
        max_action_confidence_sum: max_act,
        max_distribution_confidence_sum: max_dist,
        clean_event_all_rounds_fraction: clean_all,
        mean_pull_counts,
        mean_rounds,
    })
}

/// One horizon's row in a scaling report.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub t: u64,
    pub reps: u64,
    pub benchmark: f64,
    pub mean_regret: f64,
    pub stderr: f64,
    pub regret_over_sqrt_t: f64,
}

/// Regret across horizons with fitted growth slopes.
#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of mean regret against `ln T`.
    pub slope_vs_ln_t: f64,
    /// Least-squares slope of mean regret against `sqrt(T)`.
    pub slope_vs_sqrt_t: f64,
}

/// Re-instantiates a `T`-parameterized family per horizon, runs replications,
/// and aggregates regret against the chosen benchmark.
pub fn regret_scaling_report<F, G>(
    family: F,
    policy_factory: G,
    horizons: &[u64],
    reps: u64,
    mode: BenchmarkMode,
    seed: u64,
) -> Result<ScalingReport>
where
    F: Fn(u64) -> Result<BwkInstance>,
    G: Fn(&BwkInstance) -> Box<dyn Policy> + Sync,
{
    if horizons.is_empty() {
        return Err(BwkError::Parameter("no horizons".into()));
    }
    let mut rows = Vec::with_capacity(horizons.len());
    for (i, &t) in horizons.iter().enumerate() {
        let instance = family(t)?;
        let bench = benchmark_value(&instance, mode, crate::split_seed(seed, 1000 + i as u64))?;
        let traces = simulator::run_replications(
            &instance,
            || policy_factory(&instance),
            crate::split_seed(seed, i as u64),
            reps,
            TraceDetail::Summary,
        )?;
        let regrets: Vec<f64> = traces
            .iter()
            .map(|tr| bench.value - tr.total_reward)
            .collect();
        let (mean, se) = mean_stderr(&regrets);
        rows.push(ScalingRow {
            t,
            reps,
            benchmark: bench.value,
            mean_regret: mean,
            stderr: se,
            regret_over_sqrt_t: mean / (t as f64).sqrt(),
        });
    }
    let xs_ln: Vec<f64> = rows.iter().map(|r| (r.t as f64).ln()).collect();
    let xs_sqrt: Vec<f64> = rows.iter().map(|r| (r.t as f64).sqrt()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean_regret).collect();
    Ok(ScalingReport {
        slope_vs_ln_t: ls_slope(&xs_ln, &ys),
        slope_vs_sqrt_t: ls_slope(&xs_sqrt, &ys),
        rows,
    })
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

/// Regret of one policy on both instances of a pair; the max is the
/// empirical counterpart of the two-instance lower bound.
#[derive(Debug, Clone, Serialize)]
pub struct LbPairReport {
    pub regret_base: f64,
    pub regret_base_stderr: f64,
    pub regret_twin: f64,
    pub regret_twin_stderr: f64,
    pub max_regret: f64,
}

pub fn lb_pair_report<G>(
    pair: &InstancePair,
    policy_factory: G,
    reps: u64,
    mode: BenchmarkMode,
    seed: u64,
) -> Result<LbPairReport>
where
    G: Fn(&BwkInstance) -> Box<dyn Policy> + Sync,
{
    let mut stats = Vec::with_capacity(2);
    for (i, instance) in [&pair.base, &pair.twin].into_iter().enumerate() {
        let bench = benchmark_value(instance, mode, crate::split_seed(seed, 500 + i as u64))?;
        let traces = simulator::run_replications(
            instance,
            || policy_factory(instance),
            crate::split_seed(seed, i as u64),
            reps,
            TraceDetail::Summary,
        )?;
        let regrets: Vec<f64> = traces
            .iter()
            .map(|t| bench.value - t.total_reward)
            .collect();
        stats.push(mean_stderr(&regrets));
    }
    Ok(LbPairReport {
        regret_base: stats[0].0,
        regret_base_stderr: stats[0].1,
        regret_twin: stats[1].0,
        regret_twin_stderr: stats[1].1,
        max_regret: stats[0].0.max(stats[1].0),
    })
}
