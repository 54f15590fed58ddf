//! Domain types: outcome vectors, per-arm outcome models, problem instances,
//! and the structural validators used by experiments (best-arm-optimality,
//! lower-bound assumptions).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BwkError, Result};
use crate::lp::{self, LpSolution};
use crate::LP_TOL;

/// One observed outcome: a reward and the consumption of every resource
/// (including the time resource, which is always exactly `B/T`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeVector {
    pub reward: f64,
    pub consumption: Vec<f64>,
}

/// Per-arm outcome distribution.
///
/// Consumption vectors carry one entry per resource, time included; the time
/// entry must equal `B/T` and is sampled deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeModel {
    /// Every coordinate an independent Bernoulli with the given mean.
    IndependentBernoulli {
        reward_mean: f64,
        consumption_means: Vec<f64>,
    },
    /// Always the same outcome.
    Deterministic { reward: f64, consumption: Vec<f64> },
    /// Deterministic reward; non-time consumption is
    /// `base_consumption[j] * W / divisor` for a single Bernoulli(`scale_prob`)
    /// draw `W` shared by all resources in the round, so consumption is
    /// perfectly correlated across resources.
    ScaledBernoulli {
        reward: f64,
        base_consumption: Vec<f64>,
        scale_prob: f64,
        divisor: f64,
    },
    /// Bernoulli reward with deterministic consumption; the combination the
    /// deterministic-consumption instance pairs need.
    BernoulliReward {
        reward_mean: f64,
        consumption: Vec<f64>,
    },
    /// Zero reward, zero non-time consumption.
    Null,
}

impl OutcomeModel {
    /// Analytic mean reward.
    pub fn mean_reward(&self) -> f64 {
        match self {
            OutcomeModel::IndependentBernoulli { reward_mean, .. } => *reward_mean,
            OutcomeModel::Deterministic { reward, .. } => *reward,
            OutcomeModel::ScaledBernoulli { reward, .. } => *reward,
            OutcomeModel::BernoulliReward { reward_mean, .. } => *reward_mean,
            OutcomeModel::Null => 0.0,
        }
    }

    /// Analytic mean consumption of resource `j`. The caller supplies the
    /// instance geometry so the time coordinate and the null arm resolve.
    pub fn mean_consumption(&self, j: usize, time_index: usize, budget_rate: f64) -> f64 {
        if j == time_index {
            return budget_rate;
        }
        match self {
            OutcomeModel::IndependentBernoulli {
                consumption_means, ..
            } => consumption_means[j],
            OutcomeModel::Deterministic { consumption, .. } => consumption[j],
            OutcomeModel::ScaledBernoulli {
                base_consumption,
                scale_prob,
                divisor,
                ..
            } => base_consumption[j] * scale_prob / divisor,
            OutcomeModel::BernoulliReward { consumption, .. } => consumption[j],
            OutcomeModel::Null => 0.0,
        }
    }
}

/// A full BwK problem description.
///
/// `K = arms.len()` arms including the null arm, `d` resources including the
/// time resource, a single budget `B` common to all resources, and horizon `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct BwkInstance {
    pub arms: Vec<OutcomeModel>,
    pub d: usize,
    pub b: f64,
    pub t: u64,
    pub time_index: usize,
    pub null_index: usize,
}

impl BwkInstance {
    /// Builds and validates an instance.
    pub fn new(
        arms: Vec<OutcomeModel>,
        d: usize,
        b: f64,
        t: u64,
        time_index: usize,
        null_index: usize,
    ) -> Result<Self> {
        let inst = BwkInstance {
            arms,
            d,
            b,
            t,
            time_index,
            null_index,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Number of arms, null arm included.
    pub fn num_arms(&self) -> usize {
        self.arms.len()
    }

    /// The per-round consumption of the time resource, `B/T`.
    pub fn budget_rate(&self) -> f64 {
        self.b / self.t as f64
    }

    /// Checks every structural invariant; called by [`BwkInstance::new`] and
    /// by the JSON loader.
    pub fn validate(&self) -> Result<()> {
        let k = self.arms.len();
        if k == 0 {
            return Err(BwkError::Shape("instance has no arms".into()));
        }
        if self.d == 0 {
            return Err(BwkError::Shape("instance has no resources".into()));
        }
        if self.time_index >= self.d {
            return Err(BwkError::Index(format!(
                "time_index {} out of range for d={}",
                self.time_index, self.d
            )));
        }
        if self.null_index >= k {
            return Err(BwkError::Index(format!(
                "null_index {} out of range for K={}",
                self.null_index, k
            )));
        }
        if self.b <= 0.0 || !self.b.is_finite() {
            return Err(BwkError::Parameter(format!(
                "budget must be positive, got {}",
                self.b
            )));
        }
        if self.t == 0 {
            return Err(BwkError::Parameter("horizon must be positive".into()));
        }
        if self.b > self.t as f64 {
            return Err(BwkError::Parameter(format!(
                "need B <= T so that B/T <= 1, got B={} T={}",
                self.b, self.t
            )));
        }
        if !matches!(self.arms[self.null_index], OutcomeModel::Null) {
            return Err(BwkError::Shape(format!(
                "arm at null_index {} is not the null model",
                self.null_index
            )));
        }
        let rate = self.budget_rate();
        let in_unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        for (a, model) in self.arms.iter().enumerate() {
            let ctx = |msg: String| BwkError::InvalidData(format!("arm {a}: {msg}"));
            match model {
                OutcomeModel::IndependentBernoulli {
                    reward_mean,
                    consumption_means,
                } => {
                    if consumption_means.len() != self.d {
                        return Err(ctx(format!(
                            "consumption vector has {} entries, expected d={}",
                            consumption_means.len(),
                            self.d
                        )));
                    }
                    if !in_unit(*reward_mean) || !consumption_means.iter().all(|&v| in_unit(v)) {
                        return Err(ctx("means must lie in [0,1]".into()));
                    }
                    if consumption_means[self.time_index] != rate {
                        return Err(ctx(format!(
                            "time-resource mean {} != B/T = {}",
                            consumption_means[self.time_index], rate
                        )));
                    }
                }
                OutcomeModel::Deterministic {
                    reward,
                    consumption,
                } => {
                    if consumption.len() != self.d {
                        return Err(ctx("consumption vector length != d".into()));
                    }
                    if !in_unit(*reward) || !consumption.iter().all(|&v| in_unit(v)) {
                        return Err(ctx("outcomes must lie in [0,1]".into()));
                    }
                    if consumption[self.time_index] != rate {
                        return Err(ctx("time-resource consumption != B/T".into()));
                    }
                }
                OutcomeModel::ScaledBernoulli {
                    reward,
                    base_consumption,
                    scale_prob,
                    divisor,
                } => {
                    if base_consumption.len() != self.d {
                        return Err(ctx("consumption vector length != d".into()));
                    }
                    if !in_unit(*reward) {
                        return Err(ctx("reward must lie in [0,1]".into()));
                    }
                    if !(*scale_prob > 0.0 && *scale_prob <= 1.0) {
                        return Err(ctx(format!("scale_prob {scale_prob} outside (0,1]")));
                    }
                    if !(*divisor > 0.0 && *divisor < 1.0) {
                        return Err(ctx(format!("divisor {divisor} outside (0,1)")));
                    }
                    for (j, &base) in base_consumption.iter().enumerate() {
                        if j == self.time_index {
                            if base != rate {
                                return Err(ctx("time-resource base != B/T".into()));
                            }
                            continue;
                        }
                        if !in_unit(base) {
                            return Err(ctx("base consumption must lie in [0,1]".into()));
                        }
                        if base / divisor > 1.0 + LP_TOL {
                            return Err(ctx(format!(
                                "realized consumption {} exceeds 1",
                                base / divisor
                            )));
                        }
                        if base * scale_prob / divisor > 1.0 + LP_TOL {
                            return Err(ctx("mean consumption exceeds 1".into()));
                        }
                    }
                }
                OutcomeModel::BernoulliReward {
                    reward_mean,
                    consumption,
                } => {
                    if consumption.len() != self.d {
                        return Err(ctx("consumption vector length != d".into()));
                    }
                    if !in_unit(*reward_mean) || !consumption.iter().all(|&v| in_unit(v)) {
                        return Err(ctx("outcomes must lie in [0,1]".into()));
                    }
                    if consumption[self.time_index] != rate {
                        return Err(ctx("time-resource consumption != B/T".into()));
                    }
                }
                OutcomeModel::Null => {}
            }
        }
        Ok(())
    }

    fn check_arm(&self, arm: usize) -> Result<()> {
        if arm >= self.arms.len() {
            return Err(BwkError::Index(format!(
                "arm {} out of range for K={}",
                arm,
                self.arms.len()
            )));
        }
        Ok(())
    }

    /// Mean reward `r(a)`.
    pub fn mean_reward(&self, arm: usize) -> Result<f64> {
        self.check_arm(arm)?;
        Ok(self.arms[arm].mean_reward())
    }

    /// Mean consumption `c_j(a)`; `B/T` for the time resource on every arm.
    pub fn mean_consumption(&self, arm: usize, resource: usize) -> Result<f64> {
        self.check_arm(arm)?;
        if resource >= self.d {
            return Err(BwkError::Index(format!(
                "resource {} out of range for d={}",
                resource, self.d
            )));
        }
        Ok(self.arms[arm].mean_consumption(resource, self.time_index, self.budget_rate()))
    }

    /// Mean reward of a distribution over arms.
    pub fn mean_reward_of(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.arms)
            .map(|(w, m)| w * m.mean_reward())
            .sum()
    }

    /// Mean consumption of resource `j` under a distribution over arms.
    pub fn mean_consumption_of(&self, x: &[f64], j: usize) -> f64 {
        let rate = self.budget_rate();
        x.iter()
            .zip(&self.arms)
            .map(|(w, m)| w * m.mean_consumption(j, self.time_index, rate))
            .sum()
    }

    /// Draws one outcome from the arm's model. The time coordinate is always
    /// exactly `B/T`. Draw order is fixed (reward, then non-time resources in
    /// index order) so streams are reproducible.
    pub fn sample_outcome<R: Rng + ?Sized>(
        &self,
        arm: usize,
        rng: &mut R,
    ) -> Result<OutcomeVector> {
        self.check_arm(arm)?;
        let rate = self.budget_rate();
        let mut consumption = vec![0.0; self.d];
        consumption[self.time_index] = rate;
        let reward = match &self.arms[arm] {
            OutcomeModel::Null => 0.0,
            OutcomeModel::Deterministic {
                reward,
                consumption: c,
            } => {
                for j in 0..self.d {
                    if j != self.time_index {
                        consumption[j] = c[j];
                    }
                }
                *reward
            }
            OutcomeModel::IndependentBernoulli {
                reward_mean,
                consumption_means,
            } => {
                let r = if rng.gen_bool(*reward_mean) { 1.0 } else { 0.0 };
                for j in 0..self.d {
                    if j != self.time_index {
                        consumption[j] = if rng.gen_bool(consumption_means[j]) {
                            1.0
                        } else {
                            0.0
                        };
                    }
                }
                r
            }
            OutcomeModel::ScaledBernoulli {
                reward,
                base_consumption,
                scale_prob,
                divisor,
            } => {
                let w = if rng.gen_bool(*scale_prob) { 1.0 } else { 0.0 };
                for j in 0..self.d {
                    if j != self.time_index {
                        consumption[j] = base_consumption[j] * w / divisor;
                    }
                }
                *reward
            }
            OutcomeModel::BernoulliReward {
                reward_mean,
                consumption: c,
            } => {
                for j in 0..self.d {
                    if j != self.time_index {
                        consumption[j] = c[j];
                    }
                }
                if rng.gen_bool(*reward_mean) {
                    1.0
                } else {
                    0.0
                }
            }
        };
        Ok(OutcomeVector {
            reward,
            consumption,
        })
    }

    /// Reads an instance from the documented JSON format, validating ranges.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| BwkError::InvalidData(e.to_string()))
    }

    /// Serializes to the documented JSON format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }
}

/// On-disk form of an instance; `k` is redundant but kept for readability.
#[derive(Serialize, Deserialize)]
struct InstanceJson {
    #[serde(default = "default_schema_version")]
    schema_version: u32,
    k: usize,
    d: usize,
    b: f64,
    t: u64,
    time_index: usize,
    null_index: usize,
    arms: Vec<OutcomeModel>,
}

fn default_schema_version() -> u32 {
    1
}

impl TryFrom<InstanceJson> for BwkInstance {
    type Error = BwkError;
    fn try_from(j: InstanceJson) -> Result<Self> {
        if j.k != j.arms.len() {
            return Err(BwkError::InvalidData(format!(
                "K={} does not match {} arm descriptors",
                j.k,
                j.arms.len()
            )));
        }
        BwkInstance::new(j.arms, j.d, j.b, j.t, j.time_index, j.null_index)
    }
}

impl From<BwkInstance> for InstanceJson {
    fn from(i: BwkInstance) -> Self {
        InstanceJson {
            schema_version: 1,
            k: i.arms.len(),
            d: i.d,
            b: i.b,
            t: i.t,
            time_index: i.time_index,
            null_index: i.null_index,
            arms: i.arms,
        }
    }
}

/// Which condition of best-arm-optimality failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BestArmCondition {
    /// `OPT_LP` does not equal `(B/T) r(a*) / max_j c_j(a*)` for the support arm.
    ValueFormula,
    /// The optimum is not unique, or its support is not one non-null arm plus
    /// possibly the null arm.
    UniqueSupport,
    /// `X*(a*)` does not exceed `3 sqrt(B) ln(KdT) / T`.
    WeightThreshold,
}

/// Outcome of [`check_best_arm_optimal`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum BestArmOptimality {
    Optimal { arm: usize },
    NotOptimal { violations: Vec<BestArmCondition> },
}

impl BestArmOptimality {
    pub fn best_arm(&self) -> Option<usize> {
        match self {
            BestArmOptimality::Optimal { arm } => Some(*arm),
            BestArmOptimality::NotOptimal { .. } => None,
        }
    }
}

/// Classifies an instance as best-arm-optimal or not, given the solved
/// relaxation. Uniqueness is certified by exhaustive vertex enumeration.
pub fn check_best_arm_optimal(
    instance: &BwkInstance,
    lp: &LpSolution,
) -> Result<BestArmOptimality> {
    let problem = lp::build_primal(instance);
    problem.check_solution_consistency(lp).map_err(|e| {
        BwkError::Contract(format!(
            "lp solution inconsistent with instance relaxation: {e}"
        ))
    })?;

    let mut violations = Vec::new();
    let vertices = lp::enumerate_optimal_vertices(&problem)?;
    let distinct = lp::distinct_points(&vertices);
    if distinct.len() > 1 {
        violations.push(BestArmCondition::UniqueSupport);
    }

    let non_null_support: Vec<usize> = lp
        .support
        .iter()
        .copied()
        .filter(|&a| a != instance.null_index)
        .collect();
    let candidate = if non_null_support.len() == 1 {
        Some(non_null_support[0])
    } else {
        if !violations.contains(&BestArmCondition::UniqueSupport) {
            violations.push(BestArmCondition::UniqueSupport);
        }
        None
    };

    if let Some(a_star) = candidate {
        let rate = instance.budget_rate();
        let max_c = (0..instance.d)
            .map(|j| instance.mean_consumption(a_star, j).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let formula = rate * instance.mean_reward(a_star)? / max_c;
        if (lp.value - formula).abs() > LP_TOL {
            violations.push(BestArmCondition::ValueFormula);
        }
        let k = instance.num_arms() as f64;
        let threshold = 3.0 * instance.b.sqrt() * (k * instance.d as f64 * instance.t as f64).ln()
            / instance.t as f64;
        if lp.x[a_star] <= threshold {
            violations.push(BestArmCondition::WeightThreshold);
        }
        if violations.is_empty() {
            return Ok(BestArmOptimality::Optimal { arm: a_star });
        }
    }
    Ok(BestArmOptimality::NotOptimal { violations })
}

/// Per-part result of the lower-bound assumption check on a 3-arm instance.
#[derive(Debug, Clone, Serialize)]
pub struct LbAssumptionReport {
    /// Parts 1-4, in order: bounded means; reward/consumption separation;
    /// budget vs optimal-value sandwich; Lagrangian gap floor.
    pub parts: [bool; 4],
    /// Minimum Lagrangian gap over non-null arms outside the LP support,
    /// if any such arm exists.
    pub dmin: Option<f64>,
    /// `T * OPT_LP`, the computable stand-in for the fixed-distribution value.
    pub opt_fd_proxy: f64,
}

impl LbAssumptionReport {
    pub fn pass(&self) -> bool {
        self.parts.iter().all(|&p| p)
    }

    /// 1-based indices of the failed parts.
    pub fn failed_parts(&self) -> Vec<usize> {
        self.parts
            .iter()
            .enumerate()
            .filter(|(_, ok)| !**ok)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Evaluates the four parts of the lower-bound assumption for a 3-arm
/// instance `{A1, A2, null}` at the given margin constant.
pub fn check_lb_assumption(instance: &BwkInstance, c_lb: f64) -> Result<LbAssumptionReport> {
    if !(c_lb > 0.0 && c_lb < 1.0 / 3.0) {
        return Err(BwkError::Parameter(format!("c_lb {c_lb} outside (0, 1/3)")));
    }
    let non_null: Vec<usize> = (0..instance.num_arms())
        .filter(|&a| a != instance.null_index)
        .collect();
    if instance.num_arms() != 3 || non_null.len() != 2 {
        return Err(BwkError::Shape(format!(
            "lower-bound assumption needs exactly 3 arms {{A1, A2, null}}, got {}",
            instance.num_arms()
        )));
    }
    let (a1, a2) = (non_null[0], non_null[1]);
    let t = instance.t as f64;

    // Part 1: rewards and consumptions of both non-null arms in [c_lb, 1-c_lb].
    let mut quantities = Vec::new();
    for &a in &[a1, a2] {
        quantities.push(instance.mean_reward(a)?);
        for j in 0..instance.d {
            quantities.push(instance.mean_consumption(a, j)?);
        }
    }
    let part1 = quantities
        .iter()
        .all(|&v| v >= c_lb - LP_TOL && v <= 1.0 - c_lb + LP_TOL);

    // Part 2: A2 dominates A1 by at least c_lb in reward and in every
    // non-time resource.
    let mut part2 = instance.mean_reward(a2)? - instance.mean_reward(a1)? >= c_lb - LP_TOL;
    for j in 0..instance.d {
        if j == instance.time_index {
            continue;
        }
        part2 &=
            instance.mean_consumption(a2, j)? - instance.mean_consumption(a1, j)? >= c_lb - LP_TOL;
    }

    // Part 3: B <= c_lb * T <= T * OPT_LP.
    let lp_solution = lp::solve(&lp::build_primal(instance))?;
    let opt_fd_proxy = t * lp_solution.value;
    let part3 = instance.b <= c_lb * t + LP_TOL && c_lb * t <= opt_fd_proxy + LP_TOL;

    // Part 4: Dmin >= c_lb / sqrt(T).
    let dmin = lp::dmin(instance, &lp_solution)?;
    let part4 = dmin.is_some_and(|g| g >= c_lb / t.sqrt() - LP_TOL);

    Ok(LbAssumptionReport {
        parts: [part1, part2, part3, part4],
        dmin,
        opt_fd_proxy,
    })
}
