//! The barrier divergence, the Lambert-W correspondence between the rate
//! `w` and the radius `δ_B`, and the hinge that replaces the trust region.

use c3po_lab::penalty::{
    advantage_bound, barrier_divergence, c3po_penalty_term, delta_from_w, lambert_w0, w_from_delta,
};

fn main() -> c3po_lab::Result<()> {
    println!("W0(1) = {:.15} (omega constant)", lambert_w0(1.0)?);

    println!("\n{:>6} {:>12} {:>12} {:>12}", "w", "delta_B", "w(delta_B)", "D_B(wb, b)");
    for w in [0.01, 0.05, 0.2, 0.5, 0.9] {
        let delta = delta_from_w(w)?;
        let back = w_from_delta(delta)?;
        let d = barrier_divergence(w * 0.4, 0.4).to_f64();
        println!("{w:>6} {delta:>12.6e} {back:>12.9} {d:>12.6e}");
    }

    let b = 0.1;
    println!("\nbudget b = {b}");
    for delta in [1e-3, 1e-2, 1e-1, 1.0] {
        println!("  delta_B {delta:>6}: largest cost advantage {:.6}", advantage_bound(b, delta)?);
    }

    println!("\nhinge max(0, A - min(b, w b)) with w = 0.05");
    for (a, b) in [(0.001, 0.1), (0.01, 0.1), (-0.02, -0.05), (0.0, -0.05)] {
        println!(
            "  A {a:>6}  b {b:>6}: penalty {:.4}  D_B {:?}",
            c3po_penalty_term(a, b, 0.05),
            barrier_divergence(a, b)
        );
    }
    Ok(())
}
