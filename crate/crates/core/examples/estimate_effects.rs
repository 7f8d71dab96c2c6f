//! Simulate one experiment and estimate both effect series with intervals.

use tminimax::allocation::{integer_solve, ObjectiveMode};
use tminimax::assignment::draw_assignment;
use tminimax::estimators::{estimands, estimate_all};
use tminimax::risk::{conservative_ci, CiTarget};
use tminimax::schedule::observe;
use tminimax::simulate::{habituation_model, ModelParams};
use tminimax::{Estimator, Family};

fn main() -> tminimax::Result<()> {
    let (n, horizon) = (400, 6);
    let sched = habituation_model(&ModelParams::default(), n, horizon, 7)?;
    let truth = estimands(&sched);
    let alloc = integer_solve(n, horizon, ObjectiveMode::Augmented)?;
    let z = draw_assignment(&alloc, Family::Pulse, 11);
    let obs = observe(&z, &sched)?;

    let est = Estimator::Augmented;
    let table = estimate_all(&z, &obs, est)?;
    println!(" t  lambda  lambda_hat        delta  gamma_hat");
    for t in 2..=horizon {
        let l = conservative_ci(&z, &obs, t, CiTarget::Habituation, 0.95)?;
        let d = conservative_ci(&z, &obs, t, CiTarget::Instantaneous(est), 0.95)?;
        println!(
            "{t:>2} {:>7.3} {:>7.3}±{:.3} {:>7.3} {:>7.3}±{:.3}",
            truth.lambda.get(t),
            table.lambda.get(t),
            l.half_width,
            truth.delta.get(t),
            table.delta.get(t),
            d.half_width
        );
    }
    Ok(())
}
