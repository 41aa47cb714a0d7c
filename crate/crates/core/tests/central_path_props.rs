mod common;

use c3po_lab::central_path::{
    distance_to_path, solve_path_point, solve_path_point_with, trace_path, trace_path_with,
    CentralPathPoint, PathOptions,
};
use c3po_lab::cmdp::{evaluate, expected_return, Cmdp, Signal, TabularSoftmaxPolicy};
use c3po_lab::harness::random_cmdp;
use c3po_lab::lp::{max_margin_point, solve_cmdp};
use c3po_lab::Error;
use common::{perturbed, toy};
use proptest::prelude::*;

/// Random CMDP with a strictly feasible point, or `None`.
fn slater_cmdp(s: usize, a: usize, m: usize, seed: u64, frac: f64) -> Option<Cmdp> {
    let cmdp = random_cmdp(s, a, m, seed, 0.9, frac).ok()?;
    let (_, tau) = max_margin_point(&cmdp).ok()?;
    (tau > 1e-3).then_some(cmdp)
}

fn shapes() -> impl Strategy<Value = (usize, usize, usize, u64, f64)> {
    (1usize..=5, 2usize..=3, 1usize..=2, any::<u64>(), 0.3f64..0.7)
}

/// Largest `|π_t(a|s) A(s,a)|` for the reward
/// `t r + a0 - log π_t - β Σ_i c_i / s_i` under `π_t`, relative to the reward
/// scale. The path point is a stationary point of its barrier problem exactly
/// when this reward is a potential difference, i.e. every advantage vanishes;
/// weighting by `π_t` measures the gradient in the logits.
fn stationarity_residual(cmdp: &Cmdp, point: &CentralPathPoint, beta: f64, anchor_grad: &[f64]) -> f64 {
    let log_pi = point.policy_t.log_probabilities();
    let mut g: Vec<f64> = cmdp
        .reward()
        .iter()
        .zip(anchor_grad)
        .zip(&log_pi)
        .map(|((r, a), l)| point.t * r + a - l)
        .collect();
    for (c, s) in cmdp.costs().iter().zip(&point.feasibility_slack) {
        for (g, c) in g.iter_mut().zip(c) {
            *g -= beta * c / s;
        }
    }
    let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let shaped = Cmdp::builder(cmdp.n_states(), cmdp.n_actions())
        .discount(cmdp.discount())
        .initial(cmdp.initial().to_vec())
        .transition(cmdp.transition().to_vec())
        .reward(g)
        .constraint(vec![0.0; cmdp.n_pairs()], 1.0)
        .build()
        .unwrap();
    let adv = evaluate(&shaped, &point.policy_t, Signal::Reward).unwrap().adv;
    adv.iter()
        .zip(point.policy_t.probabilities())
        .fold(0.0f64, |m, (x, p)| m.max((p * x).abs()))
        / ((1.0 - cmdp.discount()) * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objective_is_monotone_and_gap_is_bounded((s, a, m, seed, frac) in shapes(), beta in 0.1f64..2.0) {
        let cmdp = slater_cmdp(s, a, m, seed, frac);
        prop_assume!(cmdp.is_some());
        let cmdp = cmdp.unwrap();
        let grid: Vec<f64> = (0..=12).map(|i| 10f64.powf(-2.0 + 0.5 * i as f64)).collect();
        let path = trace_path(&cmdp, &grid, beta).unwrap();
        let lp = solve_cmdp(&cmdp).unwrap();
        for w in path.windows(2) {
            prop_assert!(w[1].objective_value >= w[0].objective_value - 1e-9);
        }
        // LP* - <r, ρ_t> <= (m β + log |A|) / t
        for p in &path {
            let bound = (m as f64 * beta + (a as f64).ln()) / p.t;
            prop_assert!(lp.optimal_value - p.objective_value <= bound + 1e-8);
            prop_assert!(p.objective_value <= lp.optimal_value + 1e-9);
        }
    }

    #[test]
    fn points_are_interior_and_stationary((s, a, m, seed, frac) in shapes(), t in 0.01f64..100.0) {
        let cmdp = slater_cmdp(s, a, m, seed, frac);
        prop_assume!(cmdp.is_some());
        let cmdp = cmdp.unwrap();
        let point = solve_path_point(&cmdp, t, 1.0).unwrap();
        prop_assert!(point.rho_t.rho().iter().all(|&x| x > 0.0));
        prop_assert!(point.feasibility_slack.iter().all(|&x| x > 0.0));
        prop_assert!(point.rho_t.flow_residual(&cmdp) < 1e-10);
        let r = expected_return(&cmdp, &point.policy_t, Signal::Reward).unwrap();
        prop_assert!((r - point.objective_value).abs() < 1e-10);
        let res = stationarity_residual(&cmdp, &point, 1.0, &vec![0.0; cmdp.n_pairs()]);
        prop_assert!(res < 1e-7, "residual {res}");
    }

    #[test]
    fn warm_and_cold_solves_agree((s, a, m, seed, frac) in shapes(), t in 0.1f64..1000.0) {
        let cmdp = slater_cmdp(s, a, m, seed, frac);
        prop_assume!(cmdp.is_some());
        let cmdp = cmdp.unwrap();
        let cold = solve_path_point(&cmdp, t, 1.0).unwrap();
        let start = solve_path_point(&cmdp, t / 7.0, 1.0).unwrap();
        let warm = solve_path_point_with(&cmdp, t, &PathOptions::default(), Some(&start)).unwrap();
        for (x, y) in cold.rho_t.rho().iter().zip(warm.rho_t.rho()) {
            prop_assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn distance_is_zero_on_the_path_and_positive_off_it(
        (s, a, m, seed, frac) in shapes(),
        noise_seed in any::<u64>(),
    ) {
        let cmdp = slater_cmdp(s, a, m, seed, frac);
        prop_assume!(cmdp.is_some());
        let cmdp = cmdp.unwrap();
        let path = trace_path(&cmdp, &[0.1, 1.0, 10.0], 1.0).unwrap();
        for p in &path {
            prop_assert_eq!(distance_to_path(&p.policy_t, &path).unwrap(), 0.0);
        }
        let other = perturbed(&path[1].policy_t, 2.0, noise_seed);
        prop_assert!(distance_to_path(&other, &path).unwrap() >= 0.0);
    }
}

#[test]
fn anchored_path_is_stationary_and_starts_at_the_anchor() {
    let cmdp = slater_cmdp(4, 3, 1, 17, 0.6).unwrap();
    let anchor = TabularSoftmaxPolicy::uniform(4, 3);
    let c0 = expected_return(&cmdp, &anchor, Signal::Cost(0)).unwrap();
    assert!(c0 < cmdp.threshold(0), "uniform policy must be strictly feasible");
    let options = PathOptions {
        anchor: Some(anchor.clone()),
        ..PathOptions::default()
    };
    let mut a0 = anchor.log_probabilities();
    for (g, c) in a0.iter_mut().zip(cmdp.cost(0)) {
        *g += c / (cmdp.threshold(0) - c0);
    }
    let path = trace_path_with(&cmdp, &[1e-4, 0.1, 1.0, 10.0, 100.0], &options).unwrap();
    for p in &path {
        assert!(stationarity_residual(&cmdp, p, 1.0, &a0) < 1e-7);
    }
    let near = distance_to_path(&anchor, &path[..1]).unwrap();
    assert!(near < 1e-6, "{near}");
}

#[test]
fn toy_path_reaches_the_lp_optimum() {
    let cmdp = toy(0.3);
    let path = trace_path(&cmdp, &[1.0, 1e2, 1e4, 1e6], 1.0).unwrap();
    let last = path.last().unwrap();
    assert!((last.objective_value - 0.3).abs() <= 1e-3);
    assert!(last.min_slack() > 0.0);
}

#[test]
fn path_without_interior_is_rejected() {
    // The threshold equals the smallest achievable cost.
    let cmdp = toy(0.0);
    let err = solve_path_point(&cmdp, 1.0, 1.0).unwrap_err();
    assert!(matches!(err, Error::NoInteriorPoint), "{err:?}");
}

#[test]
fn grid_must_increase() {
    assert!(trace_path(&toy(0.3), &[1.0, 1.0], 1.0).is_err());
    assert!(trace_path(&toy(0.3), &[], 1.0).is_err());
    assert!(solve_path_point(&toy(0.3), 0.0, 1.0).is_err());
}
