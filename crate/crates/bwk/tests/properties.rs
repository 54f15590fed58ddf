//! Property tests for the structural invariants: outcome ranges, instance
//! serialization, solver agreement, duality residuals, and radius shapes.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bwk::confidence::f_rad;
use bwk::instances::random_instance;
use bwk::lp::{build_primal, lagrangian_gaps, solve, solve_by_vertex_enumeration};
use bwk::model::{BwkInstance, OutcomeModel};

fn arbitrary_instance() -> impl Strategy<Value = BwkInstance> {
    (2usize..=5, 2usize..=3, 0.05f64..0.95, any::<u64>()).prop_map(|(k, d, b_frac, seed)| {
        let t = 1000u64;
        let b = b_frac * t as f64;
        let rate = b / t as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mut arms: Vec<OutcomeModel> = Vec::new();
        for i in 0..k - 1 {
            let mut consumption: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            consumption[d - 1] = rate;
            arms.push(match i % 3 {
                0 => OutcomeModel::IndependentBernoulli {
                    reward_mean: rng.gen_range(0.0..1.0),
                    consumption_means: consumption,
                },
                1 => OutcomeModel::Deterministic {
                    reward: rng.gen_range(0.0..1.0),
                    consumption,
                },
                _ => {
                    let divisor = rng.gen_range(0.5..0.95);
                    for (j, c) in consumption.iter_mut().enumerate() {
                        if j != d - 1 {
                            *c = rng.gen_range(0.0..divisor); // keep base/divisor <= 1
                        }
                    }
                    OutcomeModel::ScaledBernoulli {
                        reward: rng.gen_range(0.0..1.0),
                        base_consumption: consumption,
                        scale_prob: rng.gen_range(0.05..1.0),
                        divisor,
                    }
                }
            });
        }
        arms.push(OutcomeModel::Null);
        BwkInstance::new(arms, d, b, t, d - 1, k - 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_outcomes_stay_in_range(inst in arbitrary_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rate = inst.budget_rate();
        for arm in 0..inst.num_arms() {
            for _ in 0..16 {
                let o = inst.sample_outcome(arm, &mut rng).unwrap();
                prop_assert!((0.0..=1.0).contains(&o.reward));
                prop_assert!(o.consumption.iter().all(|&c| (0.0..=1.0 + 1e-12).contains(&c)));
                prop_assert_eq!(o.consumption[inst.time_index], rate);
            }
        }
    }

    #[test]
    fn instance_json_round_trips(inst in arbitrary_instance()) {
        let text = inst.to_json();
        let back = BwkInstance::from_json(&text).unwrap();
        prop_assert_eq!(inst, back);
    }

    #[test]
    fn solver_matches_oracle_and_duality_holds(inst in arbitrary_instance()) {
        let p = build_primal(&inst);
        let s = solve(&p).unwrap();
        let v = solve_by_vertex_enumeration(&p).unwrap();
        prop_assert!((s.value - v.value).abs() <= 1e-9,
            "simplex {} vs oracle {}", s.value, v.value);
        let dual_obj = s.simplex_dual
            + s.row_duals.iter().zip(&p.rhs).map(|(y, r)| y * r).sum::<f64>();
        prop_assert!((dual_obj - s.value).abs() <= 1e-9);
        // nonnegative Lagrangian gaps everywhere
        for g in lagrangian_gaps(&inst, &s).unwrap() {
            prop_assert!(g >= -1e-9, "negative gap {g}");
        }
    }

    #[test]
    fn radius_formula_shape(mu in 0.0f64..1.0, n in 0u64..100_000, c in 0.0f64..40.0) {
        let r = f_rad(mu, n, c);
        prop_assert!((0.0..=1.0).contains(&r));
        // nonincreasing in n, nondecreasing in mu
        prop_assert!(f_rad(mu, n + 1, c) <= r + 1e-15);
        if mu <= 0.99 {
            prop_assert!(f_rad(mu + 0.01, n, c) >= r - 1e-15);
        }
    }

    #[test]
    fn random_sub_distributions_never_beat_opt(inst in arbitrary_instance(), seed in any::<u64>()) {
        use rand::Rng;
        let s = solve(&build_primal(&inst)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..inst.num_arms()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let x: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let gap = bwk::lp::lp_gap(&inst, &s, &x);
        prop_assert!(gap.gap >= -1e-9);
        prop_assert!(!gap.super_optimal);
    }
}

#[test]
fn random_best_arm_optimal_acceptance_rate() {
    // Rejection sampling terminates fast: over 10^4 uniform draws the
    // best-arm-optimal acceptance rate stays clearly above 5%.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut accepted = 0u32;
    let attempts = 10_000u32;
    for _ in 0..attempts {
        let inst = random_instance(3, 2, 1000, &mut rng);
        let lp = solve(&build_primal(&inst)).unwrap();
        if bwk::model::check_best_arm_optimal(&inst, &lp)
            .unwrap()
            .best_arm()
            .is_some()
        {
            accepted += 1;
        }
    }
    let rate = accepted as f64 / attempts as f64;
    assert!(rate > 0.05, "acceptance rate {rate}");
}
