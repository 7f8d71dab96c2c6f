//! Wedge assignments (treated from the pulse time onward) give the same
//! estimates as pulse assignments when the observed data agree.

use tminimax::allocation::{integer_solve, ObjectiveMode};
use tminimax::assignment::draw_assignment;
use tminimax::estimators::estimate_all;
use tminimax::schedule::observe;
use tminimax::simulate::{standard_model, ModelParams};
use tminimax::{Estimator, Family};

fn main() -> tminimax::Result<()> {
    let (n, horizon) = (60, 4);
    let alloc = integer_solve(n, horizon, ObjectiveMode::Basic)?;
    let zp = draw_assignment(&alloc, Family::Pulse, 2);
    let zw = zp.clone().with_family(Family::Wedge);
    println!("unit 0 pulse row: {:?}", zp.row(0).bits());
    println!("unit 0 wedge row: {:?}", zw.row(0).bits());

    let pulse = standard_model(&ModelParams::default(), n, horizon, 5)?;
    let wedge = standard_model(&ModelParams { family: Family::Wedge, ..ModelParams::default() }, n, horizon, 5)?;
    let a = estimate_all(&zp, &observe(&zp, &pulse)?, Estimator::PlugIn)?;
    let b = estimate_all(&zw, &observe(&zw, &wedge)?, Estimator::PlugIn)?;
    for t in 2..=horizon {
        println!("t={t}: pulse {:.4} / wedge {:.4}", a.delta.get(t), b.delta.get(t));
    }
    Ok(())
}
