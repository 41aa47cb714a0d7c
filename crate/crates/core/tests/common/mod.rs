#![allow(dead_code)]

use c3po_lab::cmdp::{Cmdp, TabularSoftmaxPolicy};
use c3po_lab::estimation::{Batch, EpisodeSummary};
use c3po_lab::harness::random_cmdp;
use proptest::prelude::*;

/// One state, two actions: action 0 pays reward 1 and cost 1, action 1 pays
/// nothing. The LP optimum is `d` with multiplier 1 for `0 < d < 1`.
pub fn toy(d: f64) -> Cmdp {
    Cmdp::builder(1, 2)
        .discount(0.9)
        .initial(vec![1.0])
        .transition(vec![1.0, 1.0])
        .reward(vec![1.0, 0.0])
        .constraint(vec![1.0, 0.0], d)
        .build()
        .unwrap()
}

/// `(n_states, n_actions, n_constraints, seed)` within the oracle's test range.
pub fn small_shape() -> impl Strategy<Value = (usize, usize, usize, u64)> {
    (1usize..=6, 1usize..=3, 1usize..=2, any::<u64>())
}

pub fn small_cmdp() -> impl Strategy<Value = Cmdp> {
    (small_shape(), 0.5f64..0.95, 0.2f64..0.8).prop_map(|((s, a, m, seed), gamma, frac)| {
        random_cmdp(s, a, m, seed, gamma, frac).unwrap()
    })
}

pub fn logits(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, n)
}

/// A CMDP together with a random policy over it.
pub fn cmdp_and_policy() -> impl Strategy<Value = (Cmdp, TabularSoftmaxPolicy)> {
    small_cmdp().prop_flat_map(|cmdp| {
        let (s, a) = (cmdp.n_states(), cmdp.n_actions());
        logits(s * a).prop_map(move |l| (cmdp.clone(), TabularSoftmaxPolicy::new(s, a, l).unwrap()))
    })
}

/// A synthetic batch with arbitrary advantages, one behaviour policy per
/// state and uniform weights.
pub fn batch(n_states: usize, n_actions: usize, m: usize, len: usize, seed: u64) -> (Batch, TabularSoftmaxPolicy) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let behavior = TabularSoftmaxPolicy::new(
        n_states,
        n_actions,
        (0..n_states * n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let states: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_states)).collect();
    let actions: Vec<usize> = (0..len).map(|_| rng.gen_range(0..n_actions)).collect();
    let behavior_logprobs = states
        .iter()
        .zip(&actions)
        .map(|(&s, &a)| behavior.log_prob(s, a))
        .collect();
    let mut signal = |_: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect() };
    let reward_adv = signal(0);
    let cost_adv = (0..m).map(&mut signal).collect();
    let batch = Batch {
        n_states,
        n_actions,
        states,
        actions,
        weights: vec![1.0 / len as f64; len],
        behavior_logprobs,
        reward_adv,
        cost_adv,
        reward_targets: vec![0.0; len],
        cost_targets: vec![vec![0.0; len]; m],
        episodes: EpisodeSummary::default(),
    };
    (batch, behavior)
}

/// Perturbs every logit by a uniform draw from `[-scale, scale]`.
pub fn perturbed(policy: &TabularSoftmaxPolicy, scale: f64, seed: u64) -> TabularSoftmaxPolicy {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let logits = policy
        .logits()
        .iter()
        .map(|l| l + rng.gen_range(-scale..=scale))
        .collect();
    TabularSoftmaxPolicy::new(policy.n_states(), policy.n_actions(), logits).unwrap()
}
