mod common;

use c3po_lab::cmdp::text::{parse_cmdp, write_cmdp};
use c3po_lab::cmdp::{
    evaluate, expected_return, expected_return_via_occupancy, extract_policy, policy_advantage,
    return_gradient, state_occupancy, Signal, TabularSoftmaxPolicy,
};
use common::{cmdp_and_policy, perturbed, small_cmdp};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn occupancy_is_a_distribution_on_the_flow_polytope((cmdp, policy) in cmdp_and_policy()) {
        let rho = state_occupancy(&cmdp, &policy).unwrap();
        prop_assert!((rho.total() - 1.0).abs() < 1e-10);
        prop_assert!(rho.rho().iter().all(|&x| x >= 0.0));
        prop_assert!(rho.flow_residual(&cmdp) < 1e-10);
    }

    #[test]
    fn value_and_occupancy_agree((cmdp, policy) in cmdp_and_policy()) {
        for signal in std::iter::once(Signal::Reward).chain((0..cmdp.n_constraints()).map(Signal::Cost)) {
            let v = expected_return(&cmdp, &policy, signal).unwrap();
            let o = expected_return_via_occupancy(&cmdp, &policy, signal).unwrap();
            prop_assert!((v - o).abs() < 1e-10, "{v} vs {o}");
        }
    }

    #[test]
    fn advantages_average_to_zero_under_the_policy((cmdp, policy) in cmdp_and_policy()) {
        let tables = evaluate(&cmdp, &policy, Signal::Reward).unwrap();
        let a_n = cmdp.n_actions();
        for s in 0..cmdp.n_states() {
            let mean: f64 = policy.probs(s).iter().zip(&tables.adv[s * a_n..]).map(|(p, a)| p * a).sum();
            prop_assert!(mean.abs() < 1e-10);
        }
        prop_assert!(policy_advantage(&cmdp, &policy, &policy, Signal::Reward).unwrap().abs() < 1e-10);
    }

    #[test]
    fn performance_difference_identity((cmdp, policy) in cmdp_and_policy(), seed in any::<u64>()) {
        // R(π') - R(π) = Σ_s ρ_π'(s) Σ_a π'(a|s) A_π(s,a) / (1-γ)
        let other = perturbed(&policy, 1.0, seed);
        let adv = evaluate(&cmdp, &policy, Signal::Reward).unwrap().adv;
        let marginal = state_occupancy(&cmdp, &other).unwrap().state_marginal();
        let a_n = cmdp.n_actions();
        let probs = other.probabilities();
        let rhs = (0..probs.len()).map(|j| marginal[j / a_n] * probs[j] * adv[j]).sum::<f64>()
            / (1.0 - cmdp.discount());
        let lhs = expected_return(&cmdp, &other, Signal::Reward).unwrap()
            - expected_return(&cmdp, &policy, Signal::Reward).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn return_gradient_matches_finite_differences((cmdp, policy) in cmdp_and_policy()) {
        let grad = return_gradient(&cmdp, &policy, Signal::Reward).unwrap();
        let h = 1e-6;
        for j in 0..grad.len() {
            let shifted = |delta: f64| {
                let mut l = policy.logits().to_vec();
                l[j] += delta;
                let p = TabularSoftmaxPolicy::new(policy.n_states(), policy.n_actions(), l).unwrap();
                expected_return(&cmdp, &p, Signal::Reward).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            prop_assert!((fd - grad[j]).abs() <= 1e-6 * (1.0 + grad[j].abs()), "{fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn occupancy_round_trips_through_policy_extraction((cmdp, policy) in cmdp_and_policy()) {
        let rho = state_occupancy(&cmdp, &policy).unwrap();
        let back = extract_policy(&rho).unwrap();
        let rho_back = state_occupancy(&cmdp, &back.policy).unwrap();
        for (x, y) in rho.rho().iter().zip(rho_back.rho()) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn text_format_round_trips_exactly(cmdp in small_cmdp()) {
        let back = parse_cmdp(&write_cmdp(&cmdp)).unwrap();
        prop_assert_eq!(back, cmdp);
    }
}
