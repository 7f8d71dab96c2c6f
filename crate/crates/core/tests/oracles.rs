//! Randomization-distribution checks against full enumeration.

use tminimax::allocation::{
    integer_solve, objective, relaxed_for_mode, Allocation, ObjectiveMode,
};
use tminimax::assignment::{assignment_count, augmented_controls, enumerate_assignments};
use tminimax::estimators::{beta_hat, delta_hat, gamma_hat, lambda_hat};
use tminimax::risk::{exact_risk, loss, true_variances, LossSpec};
use tminimax::schedule::{observe, validate_schedule};
use tminimax::simulate::random_schedule;
use tminimax::{rng, Arm, Estimator, Family};

fn var_of(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn enumeration_count_and_marginals() {
    let alloc = Allocation::from_counts(&[2, 1, 2, 2]).unwrap();
    let all: Vec<_> = enumerate_assignments(&alloc, Family::Pulse).collect();
    // 7! / (2! 1! 2! 2!)
    assert_eq!(all.len(), 630);
    assert_eq!(assignment_count(&alloc), Some(630));
    for unit in 0..7 {
        for (arm, count) in alloc.entries() {
            let hits = all.iter().filter(|z| z.label(unit) == arm).count();
            assert_eq!(hits * 7, 630 * count, "unit {unit} arm {arm}");
        }
    }
    let mut keys: Vec<Vec<Arm>> = all.iter().map(|z| z.labels().to_vec()).collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 630);
}

#[test]
fn variance_formulas_match_enumeration() {
    let cases = [vec![2, 2, 2, 1], vec![1, 2, 2, 2], vec![2, 1, 3, 2]];
    for (seed, counts) in cases.iter().enumerate() {
        let alloc = Allocation::from_counts(counts).unwrap();
        let n = alloc.total();
        let mut r = rng::stream(seed as u64, &[3]);
        let sched = random_schedule(n, 3, Some(1), &mut r);
        let mut est = vec![Vec::new(); 4];
        for z in enumerate_assignments(&alloc, Family::Pulse) {
            let obs = observe(&z, &sched).unwrap();
            est[0].push(lambda_hat(&z, &obs, 2).unwrap());
            est[1].push(delta_hat(&z, &obs, 2).unwrap());
            est[2].push(gamma_hat(&z, &obs, 2).unwrap());
            est[3].push(beta_hat(&z, &obs, 2, 1).unwrap());
        }
        let specs = [Estimator::PlugIn, Estimator::Augmented, Estimator::Recycling { k: 1 }];
        for (j, e) in specs.into_iter().enumerate() {
            let (vl, vi) = true_variances(&alloc, &sched, 2, LossSpec::new(e, 0.5).unwrap()).unwrap();
            assert!(close(vl, var_of(&est[0]), 1e-10), "{counts:?} lambda: {vl} vs {}", var_of(&est[0]));
            assert!(close(vi, var_of(&est[j + 1]), 1e-10), "{counts:?} {e}: {vi} vs {}", var_of(&est[j + 1]));
        }
    }
}

#[test]
fn exact_risk_is_mean_loss() {
    let alloc = Allocation::from_counts(&[1, 2, 2, 1]).unwrap();
    let sched = random_schedule(6, 3, None, &mut rng::stream(12, &[]));
    let spec = LossSpec::new(Estimator::Augmented, 0.3).unwrap();
    let losses: Vec<f64> = enumerate_assignments(&alloc, Family::Pulse)
        .map(|z| loss(&z, &sched, spec).unwrap())
        .collect();
    let mean = losses.iter().sum::<f64>() / losses.len() as f64;
    assert!(close(exact_risk(&alloc, &sched, spec).unwrap(), mean, 1e-12));
}

#[test]
fn augmented_pool_contents() {
    let labels = vec![
        Arm::AlwaysControl,
        Arm::AlwaysTreated,
        Arm::Pulse(2),
        Arm::Pulse(3),
        Arm::Pulse(4),
        Arm::Pulse(4),
    ];
    let z = tminimax::AssignmentMatrix::new(labels, 4, Family::Pulse).unwrap();
    assert_eq!(augmented_controls(&z, 2, None).unwrap(), vec![0, 3, 4, 5]);
    assert_eq!(augmented_controls(&z, 3, None).unwrap(), vec![0, 4, 5]);
    assert_eq!(augmented_controls(&z, 4, None).unwrap(), vec![0]);
    // With one period of carryover a pulse at p is reusable from p + 1 on.
    assert_eq!(augmented_controls(&z, 4, Some(1)).unwrap(), vec![0, 2, 3]);
    assert_eq!(augmented_controls(&z, 3, Some(1)).unwrap(), vec![0, 2, 4, 5]);
    assert_eq!(augmented_controls(&z, 4, Some(2)).unwrap(), vec![0, 2]);
}

#[test]
fn anticipation_is_detected() {
    let mut sched = random_schedule(4, 3, None, &mut rng::stream(1, &[]));
    assert!(validate_schedule(&sched, None).is_valid());
    sched.arm_mut(Arm::Pulse(3)).unwrap()[[2, 0]] += 1.0;
    assert!(!validate_schedule(&sched, None).is_valid());
    let carry = random_schedule(4, 3, None, &mut rng::stream(2, &[]));
    assert!(!validate_schedule(&carry, Some(1)).is_valid());
}

#[test]
fn relaxation_bounds_integer_optimum() {
    let modes = [
        ObjectiveMode::Basic,
        ObjectiveMode::Augmented,
        ObjectiveMode::Weighted { rho: 0.25 },
        ObjectiveMode::Recycling { k: 1 },
    ];
    for mode in modes {
        for (n, horizon) in [(20, 3), (57, 4), (200, 6), (1000, 12)] {
            let int = objective(&integer_solve(n, horizon, mode).unwrap(), mode).unwrap();
            let relaxed = objective(&relaxed_for_mode(n as f64, horizon, mode).unwrap(), mode).unwrap();
            assert!(relaxed <= int * (1.0 + 1e-12), "{mode} N={n} T={horizon}: {relaxed} > {int}");
        }
    }
}
