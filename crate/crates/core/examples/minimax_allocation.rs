//! Minimax allocation for the plug-in estimators, against the balanced design.
//!
//! cargo run --example minimax_allocation -- 10000 30

use tminimax::allocation::{balanced, integer_solve, objective, relaxed_basic, ObjectiveMode};

fn main() -> tminimax::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("positive integer"));
    let n = args.next().unwrap_or(10_000);
    let horizon = args.next().unwrap_or(30);

    let relaxed = relaxed_basic(n as f64, horizon)?;
    let integer = integer_solve(n, horizon, ObjectiveMode::Basic)?;
    let bcrd = balanced(n, horizon)?;
    println!("N={n} T={horizon}");
    println!("relaxed:  N0={:.2} N1={:.2} N_e={:.2}", relaxed.n0(), relaxed.n1(), relaxed.pulse(2));
    println!("integer:  {:?}", integer.counts());
    println!("balanced: {:?}", bcrd.counts());
    let (f_min, f_bal) = (objective(&integer, ObjectiveMode::Basic)?, objective(&bcrd, ObjectiveMode::Basic)?);
    println!("objective minimax {f_min:.6e}, balanced {f_bal:.6e}, ratio {:.3}", f_min / f_bal);
    Ok(())
}
