//! The worst-case schedule attains the max-risk bound; check it by enumeration
//! at small N and by simulation at larger N.

use tminimax::allocation::{balanced, integer_solve, Allocation, ObjectiveMode};
use tminimax::risk::{exact_risk, max_risk, mc_risk, worst_case_schedule, LossSpec};

fn main() -> tminimax::Result<()> {
    let spec = LossSpec::unweighted();
    let small = Allocation::from_counts(&[2, 2, 2, 2])?;
    let wc = worst_case_schedule(8, 3, 0.0, 1.0)?;
    println!(
        "N=8: exact {:.12}, bound {:.12}",
        exact_risk(&small, &wc.schedule, spec)?,
        max_risk(&small, wc.vstar, spec)?
    );

    let (n, horizon) = (300, 6);
    let wc = worst_case_schedule(n, horizon, 0.0, 1.0)?;
    for (name, alloc) in [("balanced", balanced(n, horizon)?), ("minimax", integer_solve(n, horizon, ObjectiveMode::Basic)?)] {
        let r = mc_risk(&alloc, &wc.schedule, spec, 20_000, 3)?;
        println!(
            "{name:>8}: bound {:.5}, simulated {:.5} ± {:.5}",
            max_risk(&alloc, wc.vstar, spec)?,
            r.mc_risk,
            r.se
        );
    }
    Ok(())
}
