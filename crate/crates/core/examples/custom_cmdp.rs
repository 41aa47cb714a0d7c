//! Builds a two-constraint CMDP by hand, writes it in the text format, reads
//! it back and hands it to the oracle and the central path.
//!
//! `cargo run --example custom_cmdp -- [path]` reads a CMDP file instead.

use c3po_lab::central_path::trace_path;
use c3po_lab::cmdp::text::{parse_cmdp, read_cmdp, write_cmdp};
use c3po_lab::cmdp::Cmdp;
use c3po_lab::lp::solve_cmdp;

fn handmade() -> c3po_lab::Result<Cmdp> {
    // Two states, three actions. Action 2 moves to state 1, which pays more
    // reward but costs under both constraints.
    #[rustfmt::skip]
    let transition = vec![
        0.9, 0.1,   0.7, 0.3,   0.2, 0.8,
        0.6, 0.4,   0.5, 0.5,   0.1, 0.9,
    ];
    Cmdp::builder(2, 3)
        .discount(0.8)
        .initial(vec![1.0, 0.0])
        .transition(transition)
        .reward(vec![0.1, 0.2, 0.0, 1.0, 0.8, 0.6])
        .constraint(vec![0.0, 0.0, 0.0, 1.0, 0.5, 0.2], 0.3)
        .constraint(vec![0.0, 0.3, 0.0, 0.0, 0.3, 0.6], 0.25)
        .build()
}

fn main() -> c3po_lab::Result<()> {
    let cmdp = match std::env::args().nth(1) {
        Some(path) => read_cmdp(path.as_ref())?,
        None => {
            let text = write_cmdp(&handmade()?);
            print!("{text}");
            let back = parse_cmdp(&text)?;
            assert_eq!(back, handmade()?);
            back
        }
    };
    let sol = solve_cmdp(&cmdp)?;
    print!("\n{}", sol.report());
    if !sol.is_optimal() {
        return Ok(());
    }
    println!("\ncentral path:");
    for p in trace_path(&cmdp, &[0.1, 1.0, 10.0, 100.0, 1000.0], 1.0)? {
        println!("  t {:>7}  objective {:.5}  slacks {:.4?}", p.t, p.objective_value, p.feasibility_slack);
    }
    Ok(())
}
