//! Generators for the structured instance families the experiments run on:
//! the three-arm concrete family, mean-twin lower-bound pairs, the
//! deterministic-consumption pair, the d > 2 perturbation transform, and
//! rejection-sampled best-arm-optimal instances.

use rand::Rng;
use serde::Serialize;

use crate::error::{BwkError, Result};
use crate::lp::{self, LpSolution};
use crate::model::{check_best_arm_optimal, check_lb_assumption, BwkInstance, OutcomeModel};
use crate::LP_TOL;

/// How a pair of instances is related.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairRelation {
    /// `base` has the same means as the instance the pair was built from.
    MeanTwinOfBase,
    /// The two instances differ only by a small shift of some means.
    EpsPerturbation,
}

/// Two instances with identical parameters whose per-arm, per-quantity means
/// differ by at most `perturbation_size`.
#[derive(Debug, Clone)]
pub struct InstancePair {
    pub base: BwkInstance,
    pub twin: BwkInstance,
    pub perturbation_size: f64,
    pub relation: PairRelation,
}

impl InstancePair {
    pub fn new(
        base: BwkInstance,
        twin: BwkInstance,
        perturbation_size: f64,
        relation: PairRelation,
    ) -> Result<Self> {
        if base.num_arms() != twin.num_arms()
            || base.d != twin.d
            || base.b != twin.b
            || base.t != twin.t
        {
            return Err(BwkError::Shape(
                "pair instances disagree on (K,d,B,T)".into(),
            ));
        }
        let gap = max_mean_difference(&base, &twin)?;
        if gap > perturbation_size + LP_TOL {
            return Err(BwkError::Contract(format!(
                "mean difference {gap} exceeds declared perturbation size {perturbation_size}"
            )));
        }
        Ok(InstancePair {
            base,
            twin,
            perturbation_size,
            relation,
        })
    }
}

/// Largest per-arm, per-quantity mean difference between two instances.
pub fn max_mean_difference(a: &BwkInstance, b: &BwkInstance) -> Result<f64> {
    let mut gap = 0.0f64;
    for arm in 0..a.num_arms() {
        gap = gap.max((a.mean_reward(arm)? - b.mean_reward(arm)?).abs());
        for j in 0..a.d {
            gap = gap.max((a.mean_consumption(arm, j)? - b.mean_consumption(arm, j)?).abs());
        }
    }
    Ok(gap)
}

/// Randomness of the concrete family's consumptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsumptionKind {
    Bernoulli,
    Deterministic,
}

/// The three-arm concrete family: budget `B = c_lb T`, rewards
/// `r(A1) = (1-c_lb)/2`, `r(A2) = 1 - c_lb - eps`, consumptions
/// `c(A1) = c_lb`, `c(A2) = 2 c_lb`. Rewards are Bernoulli; consumptions are
/// Bernoulli by default. Arm order: A1, A2, null; time is resource 1.
///
/// `A1`'s consumption sits exactly at the budget rate, which is what makes
/// the instance best-arm-optimal with best arm `A1` and minimum Lagrangian
/// gap exactly `eps`.
pub fn make_concrete_family(c_lb: f64, eps: f64, t: u64) -> Result<BwkInstance> {
    make_concrete_family_with(c_lb, eps, t, ConsumptionKind::Bernoulli)
}

/// [`make_concrete_family`] with an explicit consumption kind.
pub fn make_concrete_family_with(
    c_lb: f64,
    eps: f64,
    t: u64,
    kind: ConsumptionKind,
) -> Result<BwkInstance> {
    if !(c_lb > 0.0 && c_lb < 1.0 / 3.0) {
        return Err(BwkError::Parameter(format!("c_lb {c_lb} outside (0, 1/3)")));
    }
    if !(eps > 0.0 && eps < 1.0 / 3.0) {
        return Err(BwkError::Parameter(format!("eps {eps} outside (0, 1/3)")));
    }
    if eps < c_lb / (t as f64).sqrt() {
        return Err(BwkError::Parameter(format!(
            "eps {eps} below the gap floor c_lb/sqrt(T) = {}",
            c_lb / (t as f64).sqrt()
        )));
    }
    let b = c_lb * t as f64;
    let rate = b / t as f64;
    let r = [(1.0 - c_lb) / 2.0, 1.0 - c_lb - eps];
    let c = [c_lb, 2.0 * c_lb];
    let arm = |i: usize| match kind {
        ConsumptionKind::Bernoulli => OutcomeModel::IndependentBernoulli {
            reward_mean: r[i],
            consumption_means: vec![c[i], rate],
        },
        ConsumptionKind::Deterministic => OutcomeModel::BernoulliReward {
            reward_mean: r[i],
            consumption: vec![c[i], rate],
        },
    };
    BwkInstance::new(vec![arm(0), arm(1), OutcomeModel::Null], 2, b, t, 1, 2)
}

/// Builds the mean-twin lower-bound pair over a base instance that satisfies
/// the lower-bound assumption: rewards become deterministic, `A1`'s
/// consumption becomes deterministic, and `A2`'s consumption is driven by a
/// single shared Bernoulli scaled by `1/(1-c_lb)`, with success probability
/// `1 - c_lb` for the mean-twin and `1 - c_lb - eps` for the perturbed twin,
/// `eps = 2 c_lb^2 / sqrt(T)`.
pub fn make_general_lb_pair(base: &BwkInstance, c_lb: f64) -> Result<InstancePair> {
    if base.num_arms() != 3 {
        return Err(BwkError::Shape(
            "lower-bound pair needs a 3-arm base".into(),
        ));
    }
    let report = check_lb_assumption(base, c_lb)?;
    if !report.pass() {
        return Err(BwkError::Contract(format!(
            "base fails lower-bound assumption parts {:?}",
            report.failed_parts()
        )));
    }
    let eps = 2.0 * c_lb * c_lb / (base.t as f64).sqrt();
    let divisor = 1.0 - c_lb;
    let non_null: Vec<usize> = (0..3).filter(|&a| a != base.null_index).collect();
    let (a1, a2) = (non_null[0], non_null[1]);
    let rate = base.budget_rate();

    let consumption_vec = |arm: usize| -> Result<Vec<f64>> {
        (0..base.d).map(|j| base.mean_consumption(arm, j)).collect()
    };
    let build = |scale_prob: f64| -> Result<BwkInstance> {
        let mut arms = vec![OutcomeModel::Null; 3];
        arms[a1] = OutcomeModel::Deterministic {
            reward: base.mean_reward(a1)?,
            consumption: consumption_vec(a1)?,
        };
        let mut a2_base = consumption_vec(a2)?;
        a2_base[base.time_index] = rate;
        arms[a2] = OutcomeModel::ScaledBernoulli {
            reward: base.mean_reward(a2)?,
            base_consumption: a2_base,
            scale_prob,
            divisor,
        };
        BwkInstance::new(
            arms,
            base.d,
            base.b,
            base.t,
            base.time_index,
            base.null_index,
        )
    };

    let twin_i = build(1.0 - c_lb)?; // mean-twin of the base
    let twin_i_prime = build(1.0 - c_lb - eps)?;
    InstancePair::new(twin_i, twin_i_prime, eps, PairRelation::MeanTwinOfBase)
}

/// The deterministic-consumption pair at budget `B = T/2`: `A1` consumes 1/2
/// with Bernoulli(1/4) reward in both instances; `A2` consumes 1 with
/// Bernoulli(1/2 + eps) reward in `base` and Bernoulli(1/2 - eps/2) in
/// `twin`. Both instances then have minimum Lagrangian gap exactly `eps/2`,
/// with the optimum A2-leaning in `base` and A1-leaning in `twin`.
pub fn make_deterministic_pair(t: u64, eps: f64) -> Result<InstancePair> {
    let tf = t as f64;
    if !(eps >= 1.0 / tf.sqrt() && eps < 0.25) {
        return Err(BwkError::Parameter(format!(
            "eps {eps} outside [1/sqrt(T), 1/4)"
        )));
    }
    let b = tf / 2.0;
    let rate = 0.5;
    let build = |r2: f64| {
        BwkInstance::new(
            vec![
                OutcomeModel::BernoulliReward {
                    reward_mean: 0.25,
                    consumption: vec![0.5, rate],
                },
                OutcomeModel::BernoulliReward {
                    reward_mean: r2,
                    consumption: vec![1.0, rate],
                },
                OutcomeModel::Null,
            ],
            2,
            b,
            t,
            1,
            2,
        )
    };
    let base = build(0.5 + eps)?;
    let twin = build(0.5 - eps / 2.0)?;
    InstancePair::new(base, twin, 1.5 * eps, PairRelation::EpsPerturbation)
}

/// Perturbs a 3-arm, d > 2 base: each non-null arm's non-time consumption
/// mean drops by `zeta1^j` plus an independent uniform draw from
/// `[-zeta2, zeta2]`, redrawing until the per-resource consumption vectors
/// (over the three arms) are linearly independent. Rewards and the time row
/// are untouched.
pub fn make_d3_perturbed<R: Rng>(base: &BwkInstance, rng: &mut R) -> Result<BwkInstance> {
    if base.num_arms() != 3 || base.d <= 2 {
        return Err(BwkError::Shape(
            "perturbation transform needs 3 arms, d > 2".into(),
        ));
    }
    let tf = base.t as f64;
    let non_null: Vec<usize> = (0..3).filter(|&a| a != base.null_index).collect();
    let mut min_mean = f64::INFINITY;
    for &a in &non_null {
        for j in 0..base.d {
            if j != base.time_index {
                min_mean = min_mean.min(base.mean_consumption(a, j)?);
            }
        }
    }
    let d_factorial: f64 = (1..=base.d as u64).product::<u64>() as f64;
    let zeta1 = (1.0 / tf.sqrt())
        .min(min_mean)
        .min(1.0 / (d_factorial * d_factorial));
    let zeta2 = min_mean.min(1.0 / tf.sqrt());

    for _ in 0..100 {
        let mut candidate = base.clone();
        let mut power = 0i32;
        for j in 0..base.d {
            if j == base.time_index {
                continue;
            }
            power += 1;
            for &a in &non_null {
                let u = rng.gen_range(-zeta2..=zeta2);
                let shift = zeta1.powi(power) + u;
                let old = base.mean_consumption(a, j)?;
                let new = (old - shift).clamp(0.0, 1.0);
                set_consumption_mean(&mut candidate.arms[a], j, new)?;
            }
        }
        candidate.validate()?;
        // Per-resource vectors over the three arms must span rank d.
        let mut matrix = Vec::with_capacity(base.d);
        for j in 0..base.d {
            matrix.push(vec![
                candidate.mean_consumption(0, j)?,
                candidate.mean_consumption(1, j)?,
                candidate.mean_consumption(2, j)?,
            ]);
        }
        if smallest_singular_value(&matrix) > 1e-12 {
            return Ok(candidate);
        }
    }
    Err(BwkError::Generation(
        "100 consecutive rejections: base consumption vectors stay dependent".into(),
    ))
}

fn set_consumption_mean(model: &mut OutcomeModel, j: usize, value: f64) -> Result<()> {
    match model {
        OutcomeModel::IndependentBernoulli {
            consumption_means, ..
        } => consumption_means[j] = value,
        OutcomeModel::Deterministic { consumption, .. } => consumption[j] = value,
        OutcomeModel::BernoulliReward { consumption, .. } => consumption[j] = value,
        _ => {
            return Err(BwkError::Shape(
                "perturbation supports only simple consumption models".into(),
            ))
        }
    }
    Ok(())
}

/// Smallest singular value of a small dense matrix via cyclic Jacobi on the
/// Gram matrix.
pub fn smallest_singular_value(matrix: &[Vec<f64>]) -> f64 {
    let rows = matrix.len();
    let cols = matrix[0].len();
    let n = rows.min(cols);
    // Gram matrix of the smaller side.
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            if rows <= cols {
                for k in 0..cols {
                    s += matrix[i][k] * matrix[j][k];
                }
            } else {
                for k in 0..rows {
                    s += matrix[k][i] * matrix[k][j];
                }
            }
            g[i][j] = s;
        }
    }
    // Cyclic Jacobi sweeps annihilate off-diagonal entries.
    for _ in 0..64 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(g[p][q].abs());
            }
        }
        if off < 1e-15 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if g[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = 0.5 * (g[q][q] - g[p][p]) / g[p][q];
                let t_val = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t_val * t_val + 1.0).sqrt();
                let s = t_val * c;
                for k in 0..n {
                    let (gpk, gqk) = (g[p][k], g[q][k]);
                    g[p][k] = c * gpk - s * gqk;
                    g[q][k] = s * gpk + c * gqk;
                }
                for k in 0..n {
                    let (gkp, gkq) = (g[k][p], g[k][q]);
                    g[k][p] = c * gkp - s * gkq;
                    g[k][q] = s * gkp + c * gkq;
                }
            }
        }
    }
    let min_eig = (0..n).map(|i| g[i][i]).fold(f64::INFINITY, f64::min);
    min_eig.max(0.0).sqrt()
}

/// A best-arm-optimal instance with its certification attached.
#[derive(Debug, Clone)]
pub struct CertifiedInstance {
    pub instance: BwkInstance,
    pub lp: LpSolution,
    pub best_arm: usize,
}

/// Rejection-samples a `d = 2` instance with uniform means until it is
/// best-arm-optimal. Errors after 1000 rejections.
pub fn random_best_arm_optimal<R: Rng>(
    k: usize,
    t: u64,
    b: f64,
    rng: &mut R,
) -> Result<CertifiedInstance> {
    if k < 2 {
        return Err(BwkError::Parameter(
            "need K >= 2 (one real arm plus null)".into(),
        ));
    }
    if k > 12 {
        return Err(BwkError::Capacity(
            "uniqueness certification is limited to K <= 12".into(),
        ));
    }
    let rate = b / t as f64;
    for _ in 0..1000 {
        let mut arms: Vec<OutcomeModel> = (0..k - 1)
            .map(|_| OutcomeModel::IndependentBernoulli {
                reward_mean: rng.gen_range(0.0..1.0),
                consumption_means: vec![rng.gen_range(0.0..1.0), rate],
            })
            .collect();
        arms.push(OutcomeModel::Null);
        let instance = BwkInstance::new(arms, 2, b, t, 1, k - 1)?;
        let lp = lp::solve(&lp::build_primal(&instance))?;
        if let Some(best_arm) = check_best_arm_optimal(&instance, &lp)?.best_arm() {
            return Ok(CertifiedInstance {
                instance,
                lp,
                best_arm,
            });
        }
    }
    Err(BwkError::Generation(
        "1000 rejections without a best-arm-optimal draw".into(),
    ))
}

/// Uniformly random Bernoulli instance; general-purpose plumbing for solver
/// cross-checks and stress tests.
pub fn random_instance<R: Rng>(k: usize, d: usize, t: u64, rng: &mut R) -> BwkInstance {
    let b = rng.gen_range(0.1..0.9) * t as f64;
    let rate = b / t as f64;
    let time_index = d - 1;
    let mut arms = Vec::with_capacity(k);
    for _ in 0..k - 1 {
        let mut consumption: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        consumption[time_index] = rate;
        arms.push(OutcomeModel::IndependentBernoulli {
            reward_mean: rng.gen_range(0.0..1.0),
            consumption_means: consumption,
        });
    }
    arms.push(OutcomeModel::Null);
    BwkInstance::new(arms, d, b, t, time_index, k - 1).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{build_primal, dmin, solve};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn concrete_family_matches_hand_values() {
        let inst = make_concrete_family(0.2, 0.01, 10_000).unwrap();
        assert_eq!(inst.b, 2000.0);
        assert!((inst.mean_reward(0).unwrap() - 0.4).abs() < 1e-15);
        assert!((inst.mean_reward(1).unwrap() - 0.79).abs() < 1e-15);
        assert!((inst.mean_consumption(0, 0).unwrap() - 0.2).abs() < 1e-15);
        assert!((inst.mean_consumption(1, 0).unwrap() - 0.4).abs() < 1e-15);
        let lp = solve(&build_primal(&inst)).unwrap();
        assert!((lp.value - 0.4).abs() < 1e-9);
        assert!((lp.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn concrete_family_is_best_arm_optimal_with_gap_eps() {
        let inst = make_concrete_family(0.2, 0.01, 10_000).unwrap();
        let lp = solve(&build_primal(&inst)).unwrap();
        let verdict = check_best_arm_optimal(&inst, &lp).unwrap();
        assert_eq!(verdict.best_arm(), Some(0));
        let gap = dmin(&inst, &lp).unwrap().unwrap();
        assert!((gap - 0.01).abs() < 1e-9, "Dmin = {gap}");
    }

    #[test]
    fn two_arm_support_is_not_best_arm_optimal() {
        // both non-null arms carry weight in the unique optimum
        let rate = 0.2;
        let inst = BwkInstance::new(
            vec![
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.4,
                    consumption_means: vec![0.19, rate],
                },
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.79,
                    consumption_means: vec![0.4, rate],
                },
                OutcomeModel::Null,
            ],
            2,
            2000.0,
            10_000,
            1,
            2,
        )
        .unwrap();
        let lp = solve(&build_primal(&inst)).unwrap();
        assert!(lp.support.contains(&0) && lp.support.contains(&1));
        let verdict = check_best_arm_optimal(&inst, &lp).unwrap();
        match verdict {
            crate::model::BestArmOptimality::NotOptimal { violations } => {
                assert!(violations.contains(&crate::model::BestArmCondition::UniqueSupport));
            }
            other => panic!("expected a unique-support violation, got {other:?}"),
        }
    }

    #[test]
    fn concrete_family_passes_lb_assumption() {
        let inst = make_concrete_family(0.2, 0.01, 10_000).unwrap();
        let report = check_lb_assumption(&inst, 0.2).unwrap();
        assert!(report.pass(), "failed parts: {:?}", report.failed_parts());
    }

    #[test]
    fn concrete_family_parameter_errors() {
        assert!(make_concrete_family(0.4, 0.01, 100).is_err());
        assert!(make_concrete_family(0.2, 0.0001, 100).is_err()); // below gap floor
    }

    #[test]
    fn lb_assumption_failure_modes() {
        // equal rewards fail part 2
        let rate = 0.2;
        let equal = BwkInstance::new(
            vec![
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.4,
                    consumption_means: vec![0.2, rate],
                },
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.4,
                    consumption_means: vec![0.4, rate],
                },
                OutcomeModel::Null,
            ],
            2,
            2000.0,
            10_000,
            1,
            2,
        )
        .unwrap();
        let report = check_lb_assumption(&equal, 0.2).unwrap();
        assert!(!report.parts[1]);

        // B = T fails part 3
        let full_budget = BwkInstance::new(
            vec![
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.4,
                    consumption_means: vec![0.2, 1.0],
                },
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.7,
                    consumption_means: vec![0.5, 1.0],
                },
                OutcomeModel::Null,
            ],
            2,
            10_000.0,
            10_000,
            1,
            2,
        )
        .unwrap();
        let report = check_lb_assumption(&full_budget, 0.2).unwrap();
        assert!(!report.parts[2]);

        // wrong arm count is a shape error
        let two_arms = crate::model::tests::two_arm_instance(0.5, 0.3, 500.0, 1000);
        assert!(check_lb_assumption(&two_arms, 0.2).is_err());
    }

    #[test]
    fn general_lb_pair_is_mean_twin_within_eps() {
        let base = make_concrete_family(0.2, 0.01, 10_000).unwrap();
        let pair = make_general_lb_pair(&base, 0.2).unwrap();
        assert_eq!(pair.relation, PairRelation::MeanTwinOfBase);
        // the first instance reproduces the base means exactly
        assert!(max_mean_difference(&pair.base, &base).unwrap() < 1e-12);
        // the second drops A2's consumption by eps * c(A2) / (1 - c_lb) <= eps
        let eps = 2.0 * 0.2 * 0.2 / (10_000f64).sqrt();
        assert!((pair.perturbation_size - eps).abs() < 1e-15);
        let diff = max_mean_difference(&pair.base, &pair.twin).unwrap();
        let expected = 0.4 * eps / 0.8;
        assert!((diff - expected).abs() < 1e-12);
        assert!(diff <= eps + 1e-15);
    }

    #[test]
    fn general_lb_pair_rejects_bad_base() {
        let bad = crate::model::tests::two_arm_instance(0.5, 0.3, 500.0, 1000);
        assert!(make_general_lb_pair(&bad, 0.2).is_err());
    }

    #[test]
    fn deterministic_pair_gaps_and_supports() {
        let pair = make_deterministic_pair(10_000, 0.01).unwrap();
        let lp_base = solve(&build_primal(&pair.base)).unwrap();
        let lp_twin = solve(&build_primal(&pair.twin)).unwrap();
        // base optimum leans on A2 (with null), twin is pure A1
        assert!(lp_base.support.contains(&1) && !lp_base.support.contains(&0));
        assert_eq!(lp_twin.support, vec![0]);
        let d_base = dmin(&pair.base, &lp_base).unwrap().unwrap();
        let d_twin = dmin(&pair.twin, &lp_twin).unwrap().unwrap();
        assert!((d_base - 0.005).abs() < 1e-9, "base Dmin = {d_base}");
        assert!((d_twin - 0.005).abs() < 1e-9, "twin Dmin = {d_twin}");
        // only A2's reward mean differs between the two instances
        assert_eq!(
            pair.base.mean_consumption(1, 0).unwrap(),
            pair.twin.mean_consumption(1, 0).unwrap()
        );
        assert_eq!(
            pair.base.mean_reward(0).unwrap(),
            pair.twin.mean_reward(0).unwrap()
        );
        assert!(make_deterministic_pair(10_000, 0.3).is_err());
        assert!(make_deterministic_pair(100, 0.05).is_err()); // below 1/sqrt(T)
    }

    #[test]
    fn d3_perturbation_keeps_time_row_and_gains_rank() {
        let rate = 0.2;
        let base = BwkInstance::new(
            vec![
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.4,
                    consumption_means: vec![0.3, 0.3, rate],
                },
                OutcomeModel::IndependentBernoulli {
                    reward_mean: 0.7,
                    consumption_means: vec![0.6, 0.6, rate],
                },
                OutcomeModel::Null,
            ],
            3,
            2000.0,
            10_000,
            2,
            2,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let perturbed = make_d3_perturbed(&base, &mut rng).unwrap();
        let bound = 2.0 / (base.t as f64).sqrt();
        for a in 0..3 {
            assert_eq!(
                perturbed.mean_reward(a).unwrap(),
                base.mean_reward(a).unwrap()
            );
            for j in 0..3 {
                let diff = (perturbed.mean_consumption(a, j).unwrap()
                    - base.mean_consumption(a, j).unwrap())
                .abs();
                assert!(diff <= bound + 1e-12);
            }
            assert_eq!(perturbed.mean_consumption(a, 2).unwrap(), rate);
        }
        let matrix: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                (0..3)
                    .map(|a| perturbed.mean_consumption(a, j).unwrap())
                    .collect()
            })
            .collect();
        assert!(smallest_singular_value(&matrix) > 1e-12);
        assert!(make_d3_perturbed(
            &crate::model::tests::two_arm_instance(0.5, 0.3, 500.0, 1000),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn singular_value_known_cases() {
        // identity has singular values 1
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!((smallest_singular_value(&eye) - 1.0).abs() < 1e-12);
        // rank-deficient matrix has smallest singular value 0
        let flat = vec![vec![1.0, 2.0, 3.0], vec![2.0, 4.0, 6.0]];
        assert!(smallest_singular_value(&flat) < 1e-12);
        // diag(3, 1/2)
        let diag = vec![vec![3.0, 0.0], vec![0.0, 0.5]];
        assert!((smallest_singular_value(&diag) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn random_best_arm_optimal_is_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let cert = random_best_arm_optimal(3, 1000, 500.0, &mut rng).unwrap();
            let verdict = check_best_arm_optimal(&cert.instance, &cert.lp).unwrap();
            assert_eq!(verdict.best_arm(), Some(cert.best_arm));
            let gap = dmin(&cert.instance, &cert.lp).unwrap();
            assert!(gap.is_none_or(|g| g > 0.0));
        }
    }
}
