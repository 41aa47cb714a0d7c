//! Samples a batch on the chain, computes GAE-λ advantages and evaluates the
//! clipped surrogates and their logit gradients at a perturbed policy.

use c3po_lab::cmdp::{Signal, TabularSoftmaxPolicy};
use c3po_lab::estimation::{
    clipped_cost_surrogate, clipped_reward_surrogate, default_horizon, gae, sample,
    surrogate_and_gradient, Batch, ValueTables,
};
use c3po_lab::harness::{builtin, make_env};

fn main() -> c3po_lab::Result<()> {
    let signal = [0.0, 0.0, 1.0, 0.0, 1.0];
    let values = [0.5, 0.4, 0.6, 0.3, 0.2, 0.0];
    for lambda in [0.0, 0.95, 1.0] {
        let adv = gae(&signal, &values, 0.9, lambda)?;
        println!("GAE lambda={lambda:<4} {:?}", adv.iter().map(|a| (a * 1e4).round() / 1e4).collect::<Vec<_>>());
    }

    let cmdp = make_env(&builtin("chain")?)?;
    let behavior = TabularSoftmaxPolicy::uniform(cmdp.n_states(), cmdp.n_actions());
    let horizon = default_horizon(cmdp.discount(), 1e-3);
    let trajectories = sample(&cmdp, &behavior, 4000, horizon, 7)?;
    let values = ValueTables::zeros(cmdp.n_states(), cmdp.n_constraints());
    let batch = Batch::from_trajectories(&trajectories, &values, cmdp.n_actions(), cmdp.discount(), 0.95)?;
    println!("\n{} samples, horizon {horizon}", batch.len());

    let mut logits = vec![0.0; cmdp.n_pairs()];
    for s in 0..cmdp.n_states() {
        logits[s * 2 + 1] = 0.5;
    }
    let candidate = TabularSoftmaxPolicy::new(cmdp.n_states(), cmdp.n_actions(), logits)?;
    let lp = batch.candidate_logprobs(&candidate)?;
    for eps in [0.05, 0.2, 1.0] {
        println!(
            "eps {eps:<4}  reward surrogate {:+.5}  cost surrogate {:+.5}",
            clipped_reward_surrogate(&batch, &lp, eps)?,
            clipped_cost_surrogate(&batch, &lp, eps, 0)?
        );
    }
    let (value, grad) = surrogate_and_gradient(&batch, &candidate, 0.2, Signal::Cost(0))?;
    println!("\ncost surrogate {value:+.5}, gradient by state:");
    for (s, g) in grad.chunks(2).enumerate() {
        println!("  s{s}: {:+.5} {:+.5}", g[0], g[1]);
    }
    Ok(())
}
