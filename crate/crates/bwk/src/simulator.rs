//! Executes a policy against an environment with budget-driven stopping,
//! records full traces, and offers a relaxed mode that runs a fixed number of
//! rounds ignoring stopping. Replication batches are data-parallel.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algorithms::Policy;
use crate::confidence::ConfidenceState;
use crate::error::{BwkError, Result};
use crate::lp::InstanceShape;
use crate::model::{BwkInstance, OutcomeVector};
use crate::{split_seed, LP_TOL};

/// What a policy observes after a pull: the aggregate outcome, plus per-atom
/// outcomes when the environment offers semi-bandit feedback.
#[derive(Debug, Clone)]
pub struct Feedback {
    pub outcome: OutcomeVector,
    pub atoms: Option<Vec<(usize, OutcomeVector)>>,
}

impl Feedback {
    pub fn aggregate(outcome: OutcomeVector) -> Self {
        Feedback {
            outcome,
            atoms: None,
        }
    }
}

/// Anything a policy can be run against: a plain instance or a structured
/// environment with auxiliary feedback.
pub trait Environment: Sync {
    fn shape(&self) -> InstanceShape;
    fn sample(&self, arm: usize, rng: &mut dyn RngCore) -> Result<Feedback>;
}

impl Environment for BwkInstance {
    fn shape(&self) -> InstanceShape {
        BwkInstance::shape(self)
    }

    fn sample(&self, arm: usize, rng: &mut dyn RngCore) -> Result<Feedback> {
        Ok(Feedback::aggregate(self.sample_outcome(arm, rng)?))
    }
}

/// One simulated round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub x: Vec<f64>,
    pub arm: usize,
    #[serde(flatten)]
    pub outcome: OutcomeVector,
    /// Per-arm uniform radii snapshot at decision time (before this round's
    /// update); omitted when trace detail is reduced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    pub remaining_budget: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_value_optimistic: Option<f64>,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted { resource: usize },
    HorizonReached,
    RelaxedCap,
}

/// A full run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub shape: InstanceShape,
    pub seed: u64,
    pub rounds: Vec<RoundRecord>,
    pub stop_reason: StopReason,
    pub total_reward: f64,
    /// Relaxed mode drove some remaining budget below zero.
    pub negative_budget: bool,
}

impl Trace {
    /// Newline-delimited JSON: one object per round.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for rec in &self.rounds {
            out.push_str(&serde_json::to_string(rec).expect("round serialization cannot fail"));
            out.push('\n');
        }
        out
    }

    /// Pulls of each arm over the recorded rounds.
    pub fn pull_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.shape.k];
        for rec in &self.rounds {
            counts[rec.arm] += 1;
        }
        counts
    }
}

/// Trace detail level: whether per-round radii snapshots are kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceDetail {
    Full,
    Summary,
}

/// Runs a policy for up to `T` rounds, stopping the first round cumulative
/// consumption of any resource exceeds `B` (that round's reward counts).
pub fn run(
    env: &dyn Environment,
    policy: &mut dyn Policy,
    seed: u64,
    detail: TraceDetail,
) -> Result<Trace> {
    run_inner(env, policy, seed, env.shape().t, true, detail)
}

/// Runs a policy for exactly `rounds` rounds, ignoring budget stopping.
/// Budgets are still tracked and may go negative (flagged).
pub fn run_relaxed(
    env: &dyn Environment,
    policy: &mut dyn Policy,
    rounds: u64,
    seed: u64,
    detail: TraceDetail,
) -> Result<Trace> {
    if rounds == 0 {
        return Err(BwkError::Parameter("relaxed mode needs rounds >= 1".into()));
    }
    run_inner(env, policy, seed, rounds, false, detail)
}

fn run_inner(
    env: &dyn Environment,
    policy: &mut dyn Policy,
    seed: u64,
    max_rounds: u64,
    stopping: bool,
    detail: TraceDetail,
) -> Result<Trace> {
    let shape = env.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ConfidenceState::new(shape);
    let mut spent = vec![0.0; shape.d];
    let mut rounds = Vec::new();
    let mut total_reward = 0.0;
    let mut stop_reason = if stopping {
        StopReason::HorizonReached
    } else {
        StopReason::RelaxedCap
    };
    let mut negative_budget = false;

    for t in 1..=max_rounds {
        let decision = policy.decide(t, &mut rng)?;
        let radii = match detail {
            TraceDetail::Full => Some(state.radii()),
            TraceDetail::Summary => None,
        };
        let feedback = env.sample(decision.arm, &mut rng)?;
        policy.observe(decision.arm, &feedback);
        state.update(decision.arm, &feedback.outcome);
        total_reward += feedback.outcome.reward;
        for (s, c) in spent.iter_mut().zip(&feedback.outcome.consumption) {
            *s += c;
        }
        let remaining: Vec<f64> = spent.iter().map(|s| shape.b - s).collect();
        negative_budget |= remaining.iter().any(|&r| r < -LP_TOL);
        rounds.push(RoundRecord {
            t,
            x: decision.x,
            arm: decision.arm,
            outcome: feedback.outcome,
            radii,
            remaining_budget: remaining,
            lp_value_optimistic: decision.lp_value,
        });
        if stopping {
            if let Some(j) =
                (0..shape.d).find(|&j| j != shape.time_index && spent[j] > shape.b + LP_TOL)
            {
                stop_reason = StopReason::BudgetExhausted { resource: j };
                break;
            }
            // The time resource accumulates to exactly B at t = T, so horizon
            // stop and time-budget stop coincide (up to float dust).
            if t == shape.t {
                debug_assert!((spent[shape.time_index] - shape.b).abs() < 1e-6);
                break;
            }
        }
    }

    Ok(Trace {
        shape,
        seed,
        rounds,
        stop_reason,
        total_reward,
        negative_budget,
    })
}

/// Runs `reps` seeded replications; parallel when the `parallel` feature is
/// enabled. Output order is by replication index either way, so the feature
/// flag never changes bytes.
pub fn run_replications<F>(
    env: &dyn Environment,
    policy_factory: F,
    base_seed: u64,
    reps: u64,
    detail: TraceDetail,
) -> Result<Vec<Trace>>
where
    F: Fn() -> Box<dyn Policy> + Sync,
{
    let one = |rep: u64| -> Result<Trace> {
        let mut policy = policy_factory();
        run(env, policy.as_mut(), split_seed(base_seed, rep), detail)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..reps).map(one).collect()
    }
}

/// Sequential twin of [`run_replications`], kept callable regardless of the
/// feature flag so benches can compare both paths in one binary.
pub fn run_replications_sequential<F>(
    env: &dyn Environment,
    policy_factory: F,
    base_seed: u64,
    reps: u64,
    detail: TraceDetail,
) -> Result<Vec<Trace>>
where
    F: Fn() -> Box<dyn Policy>,
{
    (0..reps)
        .map(|rep| {
            let mut policy = policy_factory();
            run(env, policy.as_mut(), split_seed(base_seed, rep), detail)
        })
        .collect()
}

/// Stopping-time identity residuals for one arm across traces:
/// `E[REW(a)] - r(a) E[T(a)]` and `E[B_j(a)] - c_j(a) E[T(a)]`, with standard
/// errors over traces.
#[derive(Debug, Clone, Serialize)]
pub struct WaldReport {
    pub arm: usize,
    pub traces: usize,
    pub reward_residual: f64,
    pub reward_stderr: f64,
    pub consumption_residuals: Vec<f64>,
    pub consumption_stderrs: Vec<f64>,
}

impl WaldReport {
    /// All residuals within `z` standard errors of zero; residuals below
    /// accumulation dust (1e-9) pass outright so deterministic outcomes with
    /// zero sampling variance do not trip the check.
    pub fn within(&self, z: f64) -> bool {
        let ok = |res: f64, se: f64| res.abs() <= (z * se).max(1e-9);
        ok(self.reward_residual, self.reward_stderr)
            && self
                .consumption_residuals
                .iter()
                .zip(&self.consumption_stderrs)
                .all(|(&r, &s)| ok(r, s))
    }
}

/// Estimates the optional-stopping identities for `arm` over traces from one
/// (instance, policy) pair. Needs at least 30 traces.
pub fn wald_diagnostic(traces: &[Trace], instance: &BwkInstance, arm: usize) -> Result<WaldReport> {
    if traces.len() < 30 {
        return Err(BwkError::SampleSize(format!(
            "wald diagnostic needs >= 30 traces, got {}",
            traces.len()
        )));
    }
    let r = instance.mean_reward(arm)?;
    let d = instance.d;
    let mut reward_resids = Vec::with_capacity(traces.len());
    let mut cons_resids: Vec<Vec<f64>> = vec![Vec::with_capacity(traces.len()); d];
    for trace in traces {
        let mut pulls = 0.0;
        let mut rew = 0.0;
        let mut cons = vec![0.0; d];
        for rec in &trace.rounds {
            if rec.arm == arm {
                pulls += 1.0;
                rew += rec.outcome.reward;
                for (acc, c) in cons.iter_mut().zip(&rec.outcome.consumption) {
                    *acc += c;
                }
            }
        }
        reward_resids.push(rew - r * pulls);
        for j in 0..d {
            let c_mean = instance.mean_consumption(arm, j)?;
            cons_resids[j].push(cons[j] - c_mean * pulls);
        }
    }
    let (reward_residual, reward_stderr) = mean_stderr(&reward_resids);
    let mut consumption_residuals = Vec::with_capacity(d);
    let mut consumption_stderrs = Vec::with_capacity(d);
    for j in 0..d {
        let (m, s) = mean_stderr(&cons_resids[j]);
        consumption_residuals.push(m);
        consumption_stderrs.push(s);
    }
    Ok(WaldReport {
        arm,
        traces: traces.len(),
        reward_residual,
        reward_stderr,
        consumption_residuals,
        consumption_stderrs,
    })
}

/// Sample mean and its standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{FixedArm, FixedDistribution};
    use crate::model::tests::two_arm_instance;
    use crate::model::OutcomeModel;

    #[test]
    fn fixed_null_runs_full_horizon_with_zero_reward() {
        let inst = two_arm_instance(0.5, 0.3, 500.0, 1000);
        let mut policy = FixedArm::new(1, 2);
        let trace = run(&inst, &mut policy, 1, TraceDetail::Full).unwrap();
        assert_eq!(trace.rounds.len(), 1000);
        assert_eq!(trace.total_reward, 0.0);
        assert_eq!(trace.stop_reason, StopReason::HorizonReached);
    }

    #[test]
    fn deterministic_double_rate_arm_stops_halfway() {
        // c = 2B/T deterministic, odd horizon: stops at ceil(T/2).
        let t = 1001u64;
        let b = 250.0;
        let rate = b / t as f64;
        let inst = BwkInstance::new(
            vec![
                OutcomeModel::Deterministic {
                    reward: 1.0,
                    consumption: vec![2.0 * rate, rate],
                },
                OutcomeModel::Null,
            ],
            2,
            b,
            t,
            1,
            1,
        )
        .unwrap();
        let mut policy = FixedArm::new(0, 2);
        let trace = run(&inst, &mut policy, 3, TraceDetail::Summary).unwrap();
        assert_eq!(trace.rounds.len(), (t as usize).div_ceil(2));
        assert_eq!(
            trace.stop_reason,
            StopReason::BudgetExhausted { resource: 0 }
        );
        // the stop round's reward is counted
        assert_eq!(trace.total_reward, trace.rounds.len() as f64);
    }

    #[test]
    fn budget_exhaustion_invariant() {
        let inst = two_arm_instance(0.5, 0.45, 100.0, 1000);
        let mut policy = FixedArm::new(0, 2);
        let trace = run(&inst, &mut policy, 5, TraceDetail::Summary).unwrap();
        if let StopReason::BudgetExhausted { resource } = trace.stop_reason {
            let spent: f64 = trace
                .rounds
                .iter()
                .map(|r| r.outcome.consumption[resource])
                .sum();
            assert!(spent > inst.b);
            let before: f64 = trace.rounds[..trace.rounds.len() - 1]
                .iter()
                .map(|r| r.outcome.consumption[resource])
                .sum();
            assert!(before <= inst.b + 1e-9);
        } else {
            panic!("expected budget exhaustion, got {:?}", trace.stop_reason);
        }
    }

    #[test]
    fn relaxed_mode_runs_fixed_rounds_and_flags_overdraft() {
        let inst = two_arm_instance(0.5, 0.45, 100.0, 1000);
        let mut policy = FixedArm::new(0, 2);
        let trace = run_relaxed(&inst, &mut policy, 2000, 5, TraceDetail::Summary).unwrap();
        assert_eq!(trace.rounds.len(), 2000);
        assert_eq!(trace.stop_reason, StopReason::RelaxedCap);
        assert!(trace.negative_budget);
        assert!(run_relaxed(&inst, &mut policy, 0, 5, TraceDetail::Summary).is_err());
    }

    #[test]
    fn traces_are_bit_reproducible() {
        let inst = two_arm_instance(0.5, 0.3, 500.0, 1000);
        let x = vec![0.7, 0.3];
        let run_once = |seed: u64| {
            let mut policy = FixedDistribution::new(x.clone());
            run(&inst, &mut policy, seed, TraceDetail::Full).unwrap()
        };
        let a = run_once(11);
        let b = run_once(11);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_ne!(run_once(12).rounds, a.rounds);
    }

    #[test]
    fn replication_paths_agree() {
        let inst = two_arm_instance(0.5, 0.3, 200.0, 500);
        let factory = || -> Box<dyn Policy> { Box::new(FixedArm::new(0, 2)) };
        let par = run_replications(&inst, factory, 7, 8, TraceDetail::Summary).unwrap();
        let seq = run_replications_sequential(&inst, factory, 7, 8, TraceDetail::Summary).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn wald_residual_zero_for_deterministic_arm() {
        let t = 1000u64;
        let b = 500.0;
        let rate = 0.5;
        let inst = BwkInstance::new(
            vec![
                OutcomeModel::Deterministic {
                    reward: 0.4,
                    consumption: vec![0.3, rate],
                },
                OutcomeModel::Null,
            ],
            2,
            b,
            t,
            1,
            1,
        )
        .unwrap();
        let traces: Vec<Trace> = (0..40)
            .map(|i| {
                let mut p = FixedArm::new(0, 2);
                run(&inst, &mut p, i, TraceDetail::Summary).unwrap()
            })
            .collect();
        let report = wald_diagnostic(&traces, &inst, 0).unwrap();
        assert!(report.reward_residual.abs() < 1e-9);
        assert!(report.within(3.0));
        assert!(wald_diagnostic(&traces[..10], &inst, 0).is_err());
    }

    #[test]
    fn wald_residual_small_for_bernoulli_arm() {
        let inst = two_arm_instance(0.35, 0.4, 400.0, 800);
        let traces: Vec<Trace> = (0..500)
            .map(|i| {
                let mut p = FixedArm::new(0, 2);
                run(&inst, &mut p, split_seed(99, i), TraceDetail::Summary).unwrap()
            })
            .collect();
        let report = wald_diagnostic(&traces, &inst, 0).unwrap();
        assert!(report.within(3.0), "wald residuals out of band: {report:?}");
    }

    #[test]
    fn ndjson_has_one_line_per_round() {
        let inst = two_arm_instance(0.5, 0.3, 500.0, 1000);
        let mut policy = FixedArm::new(0, 2);
        let trace = run(&inst, &mut policy, 1, TraceDetail::Full).unwrap();
        let text = trace.to_ndjson();
        assert_eq!(text.lines().count(), trace.rounds.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["t"], 1);
        assert!(first["radii"].is_array());
    }
}
