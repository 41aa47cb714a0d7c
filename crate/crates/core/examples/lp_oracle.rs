//! Solves the occupancy LP of two small CMDPs and prints the optimality
//! certificate next to the solution.

use c3po_lab::cmdp::{expected_return, Cmdp, Signal};
use c3po_lab::harness::{builtin, make_env};
use c3po_lab::lp::{build_lp, solve_lp};

fn show(name: &str, cmdp: &Cmdp) -> c3po_lab::Result<()> {
    let lp = build_lp(cmdp);
    let sol = solve_lp(&lp)?;
    println!("== {name}");
    if !sol.is_optimal() {
        println!("infeasible");
        return Ok(());
    }
    let cert = sol.certificate(&lp)?;
    println!(
        "value {:.6}  lambda* {:?}  slack {:?}",
        sol.optimal_value, sol.duals_cost, sol.slacks
    );
    println!(
        "primal viol {:.1e}  dual viol {:.1e}  compl {:.1e}  gap {:.1e}",
        cert.primal_violation, cert.dual_violation, cert.complementarity, cert.duality_gap
    );
    let pi = sol.policy()?;
    println!(
        "extracted policy: return {:.6}  cost {:.6}",
        expected_return(cmdp, &pi, Signal::Reward)?,
        expected_return(cmdp, &pi, Signal::Cost(0))?
    );
    Ok(())
}

fn main() -> c3po_lab::Result<()> {
    // One state, two actions: action 0 pays reward 1 and cost 1.
    let toy = Cmdp::builder(1, 2)
        .discount(0.9)
        .initial(vec![1.0])
        .transition(vec![1.0, 1.0])
        .reward(vec![1.0, 0.0])
        .constraint(vec![1.0, 0.0], 0.3)
        .build()?;
    show("one-state toy, d = 0.3", &toy)?;
    show("hazard gridworld", &make_env(&builtin("gridworld")?)?)?;
    show("infeasible chain", &toy.with_thresholds(vec![-0.1])?)?;
    Ok(())
}
