//! Reusing not-yet-pulsed units as controls, and the allocation that goes with it.

use tminimax::allocation::{c_sequence, integer_solve, objective, relaxed_augmented, relaxed_basic, ObjectiveMode};
use tminimax::assignment::{augmented_controls, draw_assignment};
use tminimax::Family;

fn main() -> tminimax::Result<()> {
    let (n, horizon) = (1000, 10);
    let aug = relaxed_augmented(n as f64, horizon)?;
    let c = c_sequence(horizon, std::f64::consts::SQRT_2)?;
    println!("c sequence (ell = sqrt 2): {:.4?}", c.values());
    println!("relaxed augmented allocation: {:.1?}", aug.counts());

    let int = integer_solve(n, horizon, ObjectiveMode::Augmented)?;
    let z = draw_assignment(&int, Family::Pulse, 1);
    for t in [2, 5, 10] {
        println!("t={t:>2}: {} control units", augmented_controls(&z, t, None)?.len());
    }

    let plug = relaxed_basic(n as f64, horizon)?;
    println!(
        "augmented objective: {:.4e} at its own optimum, {:.4e} at the plug-in optimum",
        objective(&aug, ObjectiveMode::Augmented)?,
        objective(&plug, ObjectiveMode::Augmented)?
    );
    Ok(())
}
