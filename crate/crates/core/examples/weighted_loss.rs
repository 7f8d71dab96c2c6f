//! How the habituation weight moves units between the always-treated arm and
//! the control side.

use tminimax::allocation::{relaxed_weighted, ObjectiveMode, objective};

fn main() -> tminimax::Result<()> {
    let (n, horizon) = (1000.0, 10);
    println!("{:>5} {:>9} {:>9} {:>9} {:>9}", "rho", "N0", "N1", "N_e2", "N_eT");
    for rho in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0] {
        let a = relaxed_weighted(n, horizon, rho)?;
        println!(
            "{rho:>5.2} {:>9.2} {:>9.2} {:>9.2} {:>9.2}   objective {:.4e}",
            a.n0(),
            a.n1(),
            a.pulse(2),
            a.pulse(horizon),
            objective(&a, ObjectiveMode::Weighted { rho })?
        );
    }
    Ok(())
}
