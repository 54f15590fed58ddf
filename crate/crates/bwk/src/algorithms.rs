//! Policies: the optimistic-LP algorithm `UcbBwk`, its pruned variant,
//! fixed-distribution and fixed-arm baselines, and the pluggable
//! confidence-radius provider behind the reduction to structured bandits.

use rand::{Rng, RngCore};

use crate::confidence::ConfidenceState;
use crate::error::{BwkError, Result};
use crate::lp::{self, InstanceShape};
use crate::model::{BwkInstance, OutcomeVector};
use crate::simulator::Feedback;

/// A round's choice: the distribution the policy committed to, the arm
/// sampled from it, and the optimistic LP value when one was solved.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub x: Vec<f64>,
    pub arm: usize,
    pub lp_value: Option<f64>,
}

/// A sequential decision rule. `decide` must depend only on the supplied rng
/// and the feedback history, so runs are reproducible.
pub trait Policy {
    fn decide(&mut self, t: u64, rng: &mut dyn RngCore) -> Result<Decision>;
    fn observe(&mut self, arm: usize, feedback: &Feedback);
}

/// Samples an index from a distribution by inverse CDF. Weights at or below
/// zero are never selected; float dust at the top lands on the last positive
/// weight.
pub fn sample_index(x: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in x.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Supplies the per-arm statistics the optimistic LP is built from.
///
/// A provider must keep the null arm pinned: zero radius, zero reward upper
/// bound, zero non-time consumption lower bound.
pub trait RadiusProvider {
    fn observe(&mut self, arm: usize, feedback: &Feedback);
    fn ucb_rewards(&self) -> Vec<f64>;
    /// `d` rows of `K` lower confidence bounds (the time row is `B/T`).
    fn lcb_consumptions(&self) -> Vec<Vec<f64>>;
    /// Uniform radius of one arm, in `[0,1]`; 0 for the null arm.
    fn radius(&self, arm: usize) -> f64;
    /// Confidence-sum budget of this provider, the `beta` of the reduction.
    fn beta(&self) -> f64;
}

/// The default provider: independent per-arm sample means with the standard
/// radii.
#[derive(Debug, Clone)]
pub struct PerArmRadiusProvider {
    state: ConfidenceState,
}

impl PerArmRadiusProvider {
    pub fn new(shape: InstanceShape) -> Self {
        PerArmRadiusProvider {
            state: ConfidenceState::new(shape),
        }
    }

    pub fn state(&self) -> &ConfidenceState {
        &self.state
    }
}

impl RadiusProvider for PerArmRadiusProvider {
    fn observe(&mut self, arm: usize, feedback: &Feedback) {
        self.state.update(arm, &feedback.outcome);
    }

    fn ucb_rewards(&self) -> Vec<f64> {
        (0..self.state.shape().k)
            .map(|a| self.state.bounds(a).reward_ucb)
            .collect()
    }

    fn lcb_consumptions(&self) -> Vec<Vec<f64>> {
        let shape = self.state.shape();
        let per_arm: Vec<_> = (0..shape.k).map(|a| self.state.bounds(a)).collect();
        (0..shape.d)
            .map(|j| per_arm.iter().map(|b| b.consumption_lcb[j]).collect())
            .collect()
    }

    fn radius(&self, arm: usize) -> f64 {
        self.state.radius(arm)
    }

    fn beta(&self) -> f64 {
        self.state.shape().k as f64 * self.state.c_rad()
    }
}

/// A clairvoyant provider with zero-width bounds at the true means. Useful as
/// an oracle baseline: the induced `UcbBwk` plays the rescaled-LP optimum
/// every round.
#[derive(Debug, Clone)]
pub struct OracleRadiusProvider {
    ucb: Vec<f64>,
    lcb: Vec<Vec<f64>>,
}

impl OracleRadiusProvider {
    pub fn new(instance: &BwkInstance) -> Self {
        let k = instance.num_arms();
        let ucb = (0..k).map(|a| instance.mean_reward(a).unwrap()).collect();
        let lcb = (0..instance.d)
            .map(|j| {
                (0..k)
                    .map(|a| instance.mean_consumption(a, j).unwrap())
                    .collect()
            })
            .collect();
        OracleRadiusProvider { ucb, lcb }
    }
}

impl RadiusProvider for OracleRadiusProvider {
    fn observe(&mut self, _arm: usize, _feedback: &Feedback) {}

    fn ucb_rewards(&self) -> Vec<f64> {
        self.ucb.clone()
    }

    fn lcb_consumptions(&self) -> Vec<Vec<f64>> {
        self.lcb.clone()
    }

    fn radius(&self, _arm: usize) -> f64 {
        0.0
    }

    fn beta(&self) -> f64 {
        0.0
    }
}

/// The optimistic-LP policy: each round, solve the optimistic relaxation at
/// the provider's current bounds and sample an arm from its optimum.
#[derive(Debug, Clone)]
pub struct UcbBwk<P: RadiusProvider> {
    provider: P,
    shape: InstanceShape,
    eta: f64,
    /// The rescaling parameter exceeded 1/2, outside the regime the regret
    /// guarantees assume. The run proceeds; downstream reports surface this.
    pub eta_assumption_violated: bool,
}

impl UcbBwk<PerArmRadiusProvider> {
    /// Default configuration: per-arm radii and the formula rescaling
    /// parameter (clamped into `[0,1)`).
    pub fn new(shape: InstanceShape) -> Self {
        let eta = lp::compute_eta_shape(shape);
        UcbBwk {
            provider: PerArmRadiusProvider::new(shape),
            shape,
            eta: eta.value,
            eta_assumption_violated: eta.value > 0.5,
        }
    }
}

impl<P: RadiusProvider> UcbBwk<P> {
    /// Custom provider and explicit rescaling parameter.
    pub fn with_eta(provider: P, shape: InstanceShape, eta: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(BwkError::Parameter(format!("eta {eta} outside [0,1)")));
        }
        Ok(UcbBwk {
            provider,
            shape,
            eta,
            eta_assumption_violated: eta > 0.5,
        })
    }

    /// The reduction configuration: `eta = (2/B) sqrt(beta T)` for the
    /// provider's confidence-sum budget, clamped like the formula parameter.
    pub fn reduced(provider: P, shape: InstanceShape) -> Self {
        let raw = 2.0 / shape.b * (provider.beta() * shape.t as f64).sqrt();
        let eta = raw.min(1.0 - 1e-9);
        UcbBwk {
            provider,
            shape,
            eta,
            eta_assumption_violated: eta > 0.5,
        }
    }

    pub fn provider(&self) -> &P {
        &self.provider
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Solves the optimistic LP at the current bounds without sampling.
    pub fn current_distribution(&self) -> Result<(Vec<f64>, f64)> {
        let problem = lp::build_optimistic(
            self.shape,
            &self.provider.ucb_rewards(),
            &self.provider.lcb_consumptions(),
            self.eta,
        )?;
        let sol = lp::solve(&problem)?;
        Ok((sol.x, sol.value))
    }
}

impl<P: RadiusProvider> Policy for UcbBwk<P> {
    fn decide(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let (x, value) = self.current_distribution()?;
        let arm = sample_index(&x, rng);
        Ok(Decision {
            x,
            arm,
            lp_value: Some(value),
        })
    }

    fn observe(&mut self, arm: usize, feedback: &Feedback) {
        self.provider.observe(arm, feedback);
    }
}

/// `UcbBwk` with the null arm pruned out: each round the inner policy is
/// called as an oracle until it draws a non-null arm. Null draws feed the
/// (deterministic) null outcome back into the inner state. The total number
/// of oracle calls is capped; once the cap is hit only null is returned.
pub struct PrunedUcbBwk<P: RadiusProvider> {
    inner: UcbBwk<P>,
    oracle_calls: u64,
    cap: u64,
    capped: bool,
}

/// Default oracle-call cap multiplier in `alpha0 * T^2 ln T`.
pub const DEFAULT_ALPHA0: f64 = 10.0;

impl<P: RadiusProvider> PrunedUcbBwk<P> {
    pub fn new(inner: UcbBwk<P>) -> Self {
        Self::with_alpha0(inner, DEFAULT_ALPHA0)
    }

    pub fn with_alpha0(inner: UcbBwk<P>, alpha0: f64) -> Self {
        let t = inner.shape.t as f64;
        let cap = (alpha0 * t * t * t.ln()).ceil().max(1.0);
        PrunedUcbBwk {
            inner,
            oracle_calls: 0,
            cap: if cap >= u64::MAX as f64 {
                u64::MAX
            } else {
                cap as u64
            },
            capped: false,
        }
    }

    pub fn oracle_calls(&self) -> u64 {
        self.oracle_calls
    }

    /// The oracle-call cap was reached; the policy has degraded to null play.
    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn inner(&self) -> &UcbBwk<P> {
        &self.inner
    }

    fn null_decision(&self) -> Decision {
        let mut x = vec![0.0; self.inner.shape.k];
        x[self.inner.shape.null_index] = 1.0;
        Decision {
            x,
            arm: self.inner.shape.null_index,
            lp_value: None,
        }
    }

    fn null_feedback(&self) -> Feedback {
        let mut consumption = vec![0.0; self.inner.shape.d];
        consumption[self.inner.shape.time_index] = self.inner.shape.b / self.inner.shape.t as f64;
        Feedback::aggregate(OutcomeVector {
            reward: 0.0,
            consumption,
        })
    }
}

impl<P: RadiusProvider> Policy for PrunedUcbBwk<P> {
    fn decide(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        if self.capped {
            return Ok(self.null_decision());
        }
        let null = self.inner.shape.null_index;
        // Null observations leave the optimistic LP unchanged (the null
        // column is pinned), so one solve serves the whole oracle loop.
        let (x, value) = self.inner.current_distribution()?;
        loop {
            if self.oracle_calls >= self.cap {
                self.capped = true;
                return Ok(self.null_decision());
            }
            self.oracle_calls += 1;
            let arm = sample_index(&x, rng);
            if arm != null {
                return Ok(Decision {
                    x,
                    arm,
                    lp_value: Some(value),
                });
            }
            let fb = self.null_feedback();
            self.inner.observe(null, &fb);
            if x[null] >= 1.0 - 1e-12 {
                // A null point mass can never yield a non-null draw.
                self.capped = true;
                self.oracle_calls = self.cap;
                return Ok(self.null_decision());
            }
        }
    }

    fn observe(&mut self, arm: usize, feedback: &Feedback) {
        self.inner.observe(arm, feedback);
    }
}

/// Plays a fixed distribution every round, ignoring feedback.
#[derive(Debug, Clone)]
pub struct FixedDistribution {
    x: Vec<f64>,
}

impl FixedDistribution {
    pub fn new(x: Vec<f64>) -> Self {
        debug_assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        FixedDistribution { x }
    }
}

impl Policy for FixedDistribution {
    fn decide(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let arm = sample_index(&self.x, rng);
        Ok(Decision {
            x: self.x.clone(),
            arm,
            lp_value: None,
        })
    }

    fn observe(&mut self, _arm: usize, _feedback: &Feedback) {}
}

/// Plays one arm every round.
#[derive(Debug, Clone)]
pub struct FixedArm {
    arm: usize,
    k: usize,
}

impl FixedArm {
    pub fn new(arm: usize, k: usize) -> Self {
        FixedArm { arm, k }
    }
}

impl Policy for FixedArm {
    fn decide(&mut self, _t: u64, _rng: &mut dyn RngCore) -> Result<Decision> {
        let mut x = vec![0.0; self.k];
        x[self.arm] = 1.0;
        Ok(Decision {
            x,
            arm: self.arm,
            lp_value: None,
        })
    }

    fn observe(&mut self, _arm: usize, _feedback: &Feedback) {}
}
