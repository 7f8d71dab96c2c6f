//! Designs under k-order carryover, where old pulse units return to the control pool.

use tminimax::allocation::{integer_solve, objective, relaxed_augmented, relaxed_recycling, ObjectiveMode};

fn main() -> tminimax::Result<()> {
    let (n, horizon) = (200, 6);
    let aug = relaxed_augmented(n as f64, horizon)?;
    println!("augmented:     {:.2?}", aug.counts());
    for k in 1..horizon - 1 {
        let mode = ObjectiveMode::Recycling { k };
        let relaxed = relaxed_recycling(n as f64, horizon, k)?;
        let int = integer_solve(n, horizon, mode)?;
        println!("recycling k={k}: {:.2?}", relaxed.counts());
        println!(
            "               integer {:?}, objective {:.5} (augmented design scores {:.5})",
            int.counts(),
            objective(&int, mode)?,
            objective(&aug, mode)?
        );
    }
    Ok(())
}
