//! Empirical statistics, confidence radii and bounds, clean-event checks, and
//! confidence-sum accounting over traces.

use serde::Serialize;

use crate::error::{BwkError, Result};
use crate::lp::InstanceShape;
use crate::model::{BwkInstance, OutcomeVector};
use crate::simulator::Trace;

/// `C_rad = 3 ln(K d T)`.
pub fn c_rad(k: usize, d: usize, t: u64) -> f64 {
    3.0 * ((k as f64) * (d as f64) * (t as f64)).ln()
}

/// `f_rad(mu, N) = min(1, sqrt(C mu / max(1,N)) + C / max(1,N))`.
pub fn f_rad(mu_hat: f64, n: u64, c_rad: f64) -> f64 {
    let denom = n.max(1) as f64;
    ((c_rad * mu_hat / denom).sqrt() + c_rad / denom).min(1.0)
}

/// Per-arm pull counts and running sums, yielding empirical means, radii, and
/// confidence bounds for the optimistic LP.
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    shape: InstanceShape,
    c_rad: f64,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    consumption_sums: Vec<Vec<f64>>,
    round: u64,
}

/// Confidence bounds of one arm: reward upper bound and per-resource
/// consumption lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmBounds {
    pub reward_ucb: f64,
    pub consumption_lcb: Vec<f64>,
}

impl ConfidenceState {
    pub fn new(shape: InstanceShape) -> Self {
        ConfidenceState {
            c_rad: c_rad(shape.k, shape.d, shape.t),
            counts: vec![0; shape.k],
            reward_sums: vec![0.0; shape.k],
            consumption_sums: vec![vec![0.0; shape.d]; shape.k],
            round: 0,
            shape,
        }
    }

    pub fn shape(&self) -> InstanceShape {
        self.shape
    }

    pub fn c_rad(&self) -> f64 {
        self.c_rad
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    /// Records one observed outcome for `arm`.
    pub fn update(&mut self, arm: usize, outcome: &OutcomeVector) {
        self.round += 1;
        self.counts[arm] += 1;
        self.reward_sums[arm] += outcome.reward;
        for (s, c) in self.consumption_sums[arm]
            .iter_mut()
            .zip(&outcome.consumption)
        {
            *s += c;
        }
    }

    pub fn empirical_reward(&self, arm: usize) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.reward_sums[arm] / self.counts[arm] as f64
        }
    }

    pub fn empirical_consumption(&self, arm: usize, j: usize) -> f64 {
        if self.counts[arm] == 0 {
            0.0
        } else {
            self.consumption_sums[arm][j] / self.counts[arm] as f64
        }
    }

    /// The uniform radius `min(1, sqrt(C/N) + C/N)`; zero for the null arm.
    pub fn radius(&self, arm: usize) -> f64 {
        if arm == self.shape.null_index {
            return 0.0;
        }
        f_rad(1.0, self.counts[arm], self.c_rad)
    }

    /// All uniform radii, null arm included (as zero).
    pub fn radii(&self) -> Vec<f64> {
        (0..self.shape.k).map(|a| self.radius(a)).collect()
    }

    /// Linear extension of the radius to a distribution over arms.
    pub fn radius_of(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(a, w)| w * self.radius(a)).sum()
    }

    /// Per-quantity confidence bounds: projected `mean + f_rad(mean, N)` for
    /// the reward and `mean - f_rad(mean, N)` per consumption. The time
    /// resource has no uncertainty and the null arm is pinned to zero.
    pub fn bounds(&self, arm: usize) -> ArmBounds {
        let rate = self.shape.b / self.shape.t as f64;
        if arm == self.shape.null_index {
            let mut lcb = vec![0.0; self.shape.d];
            lcb[self.shape.time_index] = rate;
            return ArmBounds {
                reward_ucb: 0.0,
                consumption_lcb: lcb,
            };
        }
        let n = self.counts[arm];
        let r_hat = self.empirical_reward(arm);
        let reward_ucb = (r_hat + f_rad(r_hat, n, self.c_rad)).clamp(0.0, 1.0);
        let consumption_lcb = (0..self.shape.d)
            .map(|j| {
                if j == self.shape.time_index {
                    rate
                } else {
                    let c_hat = self.empirical_consumption(arm, j);
                    (c_hat - f_rad(c_hat, n, self.c_rad)).clamp(0.0, 1.0)
                }
            })
            .collect();
        ArmBounds {
            reward_ucb,
            consumption_lcb,
        }
    }
}

/// Whether the optimistic bounds bracket the true means in the optimistic
/// direction at this state: for every non-null arm and non-time resource,
/// `0 <= ucb - r(a) <= Rad(a)` and `0 <= c_j(a) - lcb_j <= Rad(a)`.
pub fn clean_event_holds(state: &ConfidenceState, instance: &BwkInstance) -> bool {
    let shape = state.shape();
    for arm in 0..shape.k {
        if arm == shape.null_index {
            continue;
        }
        let rad = state.radius(arm);
        let b = state.bounds(arm);
        let r = instance.mean_reward(arm).unwrap();
        let over = b.reward_ucb - r;
        if !(0.0..=rad).contains(&over) {
            return false;
        }
        for j in 0..shape.d {
            if j == shape.time_index {
                continue;
            }
            let c = instance.mean_consumption(arm, j).unwrap();
            let under = c - b.consumption_lcb[j];
            if !(0.0..=rad).contains(&under) {
                return false;
            }
        }
    }
    true
}

/// Replays a trace through a fresh state and reports the fraction of rounds
/// where the clean event held (checked before each round's update, matching
/// the bounds the policy actually used).
pub fn clean_event_fraction(instance: &BwkInstance, trace: &Trace) -> f64 {
    let mut state = ConfidenceState::new(instance.shape());
    let mut held = 0usize;
    for rec in &trace.rounds {
        if clean_event_holds(&state, instance) {
            held += 1;
        }
        state.update(rec.arm, &rec.outcome);
    }
    if trace.rounds.is_empty() {
        1.0
    } else {
        held as f64 / trace.rounds.len() as f64
    }
}

fn radii_of(trace: &Trace, idx: usize) -> Result<&[f64]> {
    trace.rounds[idx]
        .radii
        .as_deref()
        .ok_or_else(|| BwkError::Contract("trace lacks radii snapshots".into()))
}

fn check_rounds(trace: &Trace, rounds: &[usize]) -> Result<()> {
    if let Some(&bad) = rounds.iter().find(|&&i| i >= trace.rounds.len()) {
        return Err(BwkError::Index(format!(
            "round {bad} outside trace of length {}",
            trace.rounds.len()
        )));
    }
    Ok(())
}

/// `sum_{t in S} Rad_t(a_t)` over the given 0-based round indices.
pub fn action_confidence_sum(trace: &Trace, rounds: &[usize]) -> Result<f64> {
    check_rounds(trace, rounds)?;
    let mut sum = 0.0;
    for &i in rounds {
        sum += radii_of(trace, i)?[trace.rounds[i].arm];
    }
    Ok(sum)
}

/// `sum_{t in S} Rad_t(X_t)` with the linear extension to distributions.
pub fn distribution_confidence_sum(trace: &Trace, rounds: &[usize]) -> Result<f64> {
    check_rounds(trace, rounds)?;
    let mut sum = 0.0;
    for &i in rounds {
        let radii = radii_of(trace, i)?;
        sum += trace.rounds[i]
            .x
            .iter()
            .zip(radii)
            .map(|(w, r)| w * r)
            .sum::<f64>();
    }
    Ok(sum)
}

/// Number of rounds with `Rad_t(X_t) >= theta`.
pub fn count_large_radius_rounds(trace: &Trace, theta: f64) -> Result<usize> {
    if theta <= 0.0 {
        return Err(BwkError::Parameter("theta must be positive".into()));
    }
    let mut count = 0;
    for i in 0..trace.rounds.len() {
        let radii = radii_of(trace, i)?;
        let rad: f64 = trace.rounds[i]
            .x
            .iter()
            .zip(radii)
            .map(|(w, r)| w * r)
            .sum();
        if rad >= theta {
            count += 1;
        }
    }
    Ok(count)
}

/// Per-arm variant: rounds where `arm` was chosen and `Rad_t(arm) >= theta`.
pub fn count_large_radius_rounds_for_arm(trace: &Trace, arm: usize, theta: f64) -> Result<usize> {
    if theta <= 0.0 {
        return Err(BwkError::Parameter("theta must be positive".into()));
    }
    let mut count = 0;
    for i in 0..trace.rounds.len() {
        if trace.rounds[i].arm == arm && radii_of(trace, i)?[arm] >= theta {
            count += 1;
        }
    }
    Ok(count)
}

/// The standard action-confidence-sum bound
/// `3 (sqrt(K s C_rad) + K ln(s) C_rad)` used as a trace invariant.
pub fn action_confidence_bound(k: usize, s: usize, c_rad: f64) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let (kf, sf) = (k as f64, s as f64);
    3.0 * ((kf * sf * c_rad).sqrt() + kf * sf.ln() * c_rad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::InstanceShape;

    fn shape() -> InstanceShape {
        InstanceShape {
            k: 2,
            d: 2,
            b: 500.0,
            t: 1000,
            time_index: 1,
            null_index: 1,
        }
    }

    #[test]
    fn c_rad_values() {
        assert_eq!(c_rad(1, 1, 1), 0.0);
        let v = c_rad(2, 2, 1000);
        assert!((v - 3.0 * 4000f64.ln()).abs() < 1e-12);
        assert!((v - 24.882149).abs() < 1e-5);
        assert!(c_rad(3, 2, 1000) > v);
        assert!(c_rad(2, 3, 1000) > v);
        assert!(c_rad(2, 2, 1001) > v);
    }

    #[test]
    fn f_rad_values() {
        assert_eq!(f_rad(0.5, 0, 1.0), 1.0); // n = 0, additive term alone >= 1
        let c = c_rad(2, 2, 1000);
        assert_eq!(f_rad(0.0, 100, c), (c / 100.0).min(1.0));
        let v = f_rad(0.25, 10_000, c);
        assert!((v - ((c * 0.25 / 1e4).sqrt() + c / 1e4)).abs() < 1e-15);
        assert!((v - 0.027429).abs() < 1e-5);
    }

    #[test]
    fn radius_behaviour() {
        let mut state = ConfidenceState::new(shape());
        assert_eq!(state.radius(1), 0.0); // null arm
        assert_eq!(state.radius(0), 1.0); // unpulled arm
        let o = OutcomeVector {
            reward: 1.0,
            consumption: vec![0.0, 0.5],
        };
        for _ in 0..2500 {
            state.update(0, &o);
        }
        let c = state.c_rad();
        let expected = ((c / 2500.0).sqrt() + c / 2500.0).min(1.0);
        assert!((state.radius(0) - expected).abs() < 1e-15);
        // against the hand value with C = c_rad(2,2,1000)
        assert!((state.radius(0) - 0.109717).abs() < 1e-5);
    }

    #[test]
    fn radius_nonincreasing_in_count() {
        let mut state = ConfidenceState::new(shape());
        let o = OutcomeVector {
            reward: 0.0,
            consumption: vec![1.0, 0.5],
        };
        let mut prev = state.radius(0);
        for _ in 0..200 {
            state.update(0, &o);
            let r = state.radius(0);
            assert!(r <= prev + 1e-15);
            prev = r;
        }
    }

    #[test]
    fn bounds_on_unpulled_and_null_arms() {
        let state = ConfidenceState::new(shape());
        let b = state.bounds(0);
        assert_eq!(b.reward_ucb, 1.0);
        assert_eq!(b.consumption_lcb[0], 0.0);
        assert_eq!(b.consumption_lcb[1], 0.5); // time lcb is B/T
        let null = state.bounds(1);
        assert_eq!(null.reward_ucb, 0.0);
        assert_eq!(null.consumption_lcb[0], 0.0);
    }

    #[test]
    fn bounds_bracket_empirical_means() {
        let mut state = ConfidenceState::new(shape());
        let hit = OutcomeVector {
            reward: 1.0,
            consumption: vec![1.0, 0.5],
        };
        let miss = OutcomeVector {
            reward: 0.0,
            consumption: vec![0.0, 0.5],
        };
        for i in 0..10_000 {
            state.update(0, if i % 2 == 0 { &hit } else { &miss });
        }
        let b = state.bounds(0);
        let r_hat = state.empirical_reward(0);
        assert!((r_hat - 0.5).abs() < 1e-12);
        assert!(b.reward_ucb >= r_hat && b.reward_ucb <= 1.0);
        // frozen hand value: 0.5 + sqrt(C*0.5/1e4) + C/1e4 with C = c_rad(2,2,1000)
        assert!((b.reward_ucb - 0.537761).abs() < 1e-5);
        assert!(b.consumption_lcb[0] <= state.empirical_consumption(0, 0));
        assert!(b.consumption_lcb[0] >= 0.0);
    }

    #[test]
    fn confidence_sums_over_round_sets() {
        use crate::algorithms::{FixedDistribution, Policy};
        use crate::simulator::{run, TraceDetail};
        let inst = crate::model::tests::two_arm_instance(0.5, 0.3, 500.0, 1000);
        let mut policy = FixedDistribution::new(vec![0.5, 0.5]);
        let trace = run(&inst, &mut policy, 9, TraceDetail::Full).unwrap();
        // empty round set sums to zero
        assert_eq!(action_confidence_sum(&trace, &[]).unwrap(), 0.0);
        // rounds where the null arm was chosen contribute nothing
        let null_rounds: Vec<usize> = (0..trace.rounds.len())
            .filter(|&i| trace.rounds[i].arm == 1)
            .collect();
        assert!(!null_rounds.is_empty());
        assert_eq!(action_confidence_sum(&trace, &null_rounds).unwrap(), 0.0);
        // out-of-range round indices are rejected
        assert!(action_confidence_sum(&trace, &[trace.rounds.len()]).is_err());
        // thresholds above 1 never count (radii are capped at 1)
        assert_eq!(count_large_radius_rounds(&trace, 1.5).unwrap(), 0);
        assert!(count_large_radius_rounds(&trace, 0.0).is_err());
    }

    #[test]
    fn clean_event_zero_pull_state_holds() {
        let inst = crate::model::tests::two_arm_instance(0.25, 0.3, 500.0, 1000);
        let state = ConfidenceState::new(inst.shape());
        assert!(clean_event_holds(&state, &inst));
    }

    #[test]
    fn clean_event_detects_forged_means() {
        let inst = crate::model::tests::two_arm_instance(0.25, 0.3, 500.0, 1000);
        let mut state = ConfidenceState::new(inst.shape());
        // inflate the empirical reward far above the truth with many pulls
        let o = OutcomeVector {
            reward: 1.0,
            consumption: vec![0.0, 0.5],
        };
        for _ in 0..10_000 {
            state.update(0, &o);
        }
        // r_hat = 1.0 while r = 0.25 and the radius is ~0.1
        assert!(!clean_event_holds(&state, &inst));
    }
}
