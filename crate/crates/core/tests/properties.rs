use proptest::prelude::*;
use tminimax::allocation::{integer_solve, objective, relaxed_augmented, relaxed_basic, Allocation, ObjectiveMode};

fn mode_strategy() -> impl Strategy<Value = ObjectiveMode> {
    prop_oneof![
        Just(ObjectiveMode::Basic),
        Just(ObjectiveMode::Augmented),
        (0.0..=1.0f64).prop_map(|rho| ObjectiveMode::Weighted { rho }),
        (1usize..=3).prop_map(|k| ObjectiveMode::Recycling { k }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integer_optimum_has_no_improving_transfer(horizon in 2usize..=6, extra in 0usize..200, mode in mode_strategy()) {
        let n = horizon + 1 + extra;
        let best = integer_solve(n, horizon, mode).unwrap();
        prop_assert_eq!(best.total(), n);
        let f = objective(&best, mode).unwrap();
        let counts = best.counts().to_vec();
        for from in 0..counts.len() {
            for to in 0..counts.len() {
                if from == to || counts[from] <= 1 {
                    continue;
                }
                let mut moved = counts.clone();
                moved[from] -= 1;
                moved[to] += 1;
                let g = objective(&Allocation::from_counts(&moved).unwrap(), mode).unwrap();
                prop_assert!(g >= f, "{:?} -> {:?}: {} < {}", counts, moved, g, f);
            }
        }
    }

    #[test]
    fn relaxed_allocations_scale_linearly(horizon in 2usize..=40, n in 10.0f64..1e6) {
        let a = relaxed_basic(n, horizon).unwrap();
        let b = relaxed_basic(2.0 * n, horizon).unwrap();
        for (x, y) in a.counts().iter().zip(b.counts()) {
            prop_assert!((2.0 * x - y).abs() <= 1e-9 * y);
        }
        let aug = relaxed_augmented(n, horizon).unwrap();
        prop_assert!((aug.total() - n).abs() <= 1e-9 * n);
        // Later pulse arms have smaller control pools and get at least as many units.
        for w in aug.pulses().windows(2) {
            prop_assert!(w[1] >= w[0] * (1.0 - 1e-12));
        }
    }
}
