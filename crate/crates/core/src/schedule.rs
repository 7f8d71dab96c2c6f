//! Potential-outcome schedules and the outcomes an experiment reveals.

use ndarray::{Array2, ArrayView1};

use crate::arm::Arm;
use crate::assignment::{AssignmentMatrix, Permutation};
use crate::error::{Error, Result};

/// The fixed ground truth of an experiment: one `N x T` outcome matrix per arm,
/// stored in canonical arm order (`0`, `1`, `e_2`, ..., `e_T`).
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialOutcomeSchedule {
    n_units: usize,
    horizon: usize,
    arms: Vec<Array2<f64>>,
}

impl PotentialOutcomeSchedule {
    /// Build from matrices in canonical arm order; there must be `T + 1` of them,
    /// all `N x T` with `T >= 2`.
    pub fn from_arms(arms: Vec<Array2<f64>>) -> Result<Self> {
        let first = arms.first().ok_or_else(|| Error::EmptyInput("schedule with no arms".into()))?;
        let (n_units, horizon) = first.dim();
        if horizon < 2 {
            return Err(Error::HorizonTooShort(horizon));
        }
        if n_units == 0 {
            return Err(Error::EmptyInput("schedule with no units".into()));
        }
        if arms.len() != horizon + 1 {
            return Err(Error::Shape(format!(
                "horizon T={horizon} needs {} arm matrices, got {}",
                horizon + 1,
                arms.len()
            )));
        }
        if let Some((idx, m)) = arms.iter().enumerate().find(|(_, m)| m.dim() != (n_units, horizon)) {
            return Err(Error::Shape(format!(
                "arm {} has shape {:?}, expected {:?}",
                Arm::from_index(idx),
                m.dim(),
                (n_units, horizon)
            )));
        }
        Ok(Self { n_units, horizon, arms })
    }

    pub fn new(control: Array2<f64>, treated: Array2<f64>, pulses: Vec<Array2<f64>>) -> Result<Self> {
        let mut arms = vec![control, treated];
        arms.extend(pulses);
        Self::from_arms(arms)
    }

    /// Every arm gets the same matrix.
    pub fn uniform(matrix: Array2<f64>) -> Result<Self> {
        let horizon = matrix.ncols();
        Self::from_arms(vec![matrix; horizon + 1])
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn arm(&self, arm: Arm) -> Result<&Array2<f64>> {
        arm.validate(self.horizon).map_err(|_| Error::MissingArm(arm))?;
        Ok(&self.arms[arm.index()])
    }

    pub fn arm_mut(&mut self, arm: Arm) -> Result<&mut Array2<f64>> {
        arm.validate(self.horizon).map_err(|_| Error::MissingArm(arm))?;
        Ok(&mut self.arms[arm.index()])
    }

    pub fn arms(&self) -> impl Iterator<Item = (Arm, &Array2<f64>)> {
        self.arms.iter().enumerate().map(|(i, m)| (Arm::from_index(i), m))
    }

    /// Outcomes of all units under `arm` at 1-based time `t`.
    pub fn column(&self, arm: Arm, t: usize) -> ArrayView1<'_, f64> {
        self.arms[arm.index()].column(t - 1)
    }

    pub fn permuted(&self, perm: &Permutation) -> Result<Self> {
        let arms = self.arms.iter().map(|m| perm.apply_rows(m)).collect::<Result<_>>()?;
        Ok(Self {
            n_units: self.n_units,
            horizon: self.horizon,
            arms,
        })
    }

    /// Apply `f` to every outcome of every arm.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            n_units: self.n_units,
            horizon: self.horizon,
            arms: self.arms.iter().map(|m| m.mapv(&f)).collect(),
        }
    }
}

/// The `N x T` outcomes revealed by one assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedOutcomes(pub Array2<f64>);

impl ObservedOutcomes {
    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn n_units(&self) -> usize {
        self.0.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.0.ncols()
    }

    /// Outcome of unit `i` (0-based) at 1-based time `t`.
    pub fn at(&self, i: usize, t: usize) -> f64 {
        self.0[[i, t - 1]]
    }

    pub fn permuted(&self, perm: &Permutation) -> Result<Self> {
        Ok(Self(perm.apply_rows(&self.0)?))
    }
}

/// Reveal each unit's row of the schedule matrix for its assigned arm.
pub fn observe(z: &AssignmentMatrix, sched: &PotentialOutcomeSchedule) -> Result<ObservedOutcomes> {
    if z.n_units() != sched.n_units() || z.horizon() != sched.horizon() {
        return Err(Error::Shape(format!(
            "assignment is {}x{}, schedule is {}x{}",
            z.n_units(),
            z.horizon(),
            sched.n_units(),
            sched.horizon()
        )));
    }
    let mut out = Array2::zeros((z.n_units(), z.horizon()));
    for (i, mut row) in out.outer_iter_mut().enumerate() {
        row.assign(&sched.arm(z.label(i))?.row(i));
    }
    Ok(ObservedOutcomes(out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    /// A pulse arm differs from control before its pulse.
    Anticipation,
    /// A pulse arm still differs from control `k` or more periods after its pulse.
    Carryover,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Violation {
    pub arm: Arm,
    pub unit: usize,
    pub time: usize,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check non-anticipation and, when `k` is given, k-order carryover. Comparisons
/// are exact.
pub fn validate_schedule(sched: &PotentialOutcomeSchedule, k: Option<usize>) -> ValidationReport {
    let control = &sched.arms[0];
    let mut violations = Vec::new();
    for pulse in 2..=sched.horizon {
        let m = &sched.arms[pulse];
        for t in 1..=sched.horizon {
            let kind = if t < pulse {
                ViolationKind::Anticipation
            } else if k.is_some_and(|k| pulse + k <= t) {
                ViolationKind::Carryover
            } else {
                continue;
            };
            for unit in 0..sched.n_units {
                if m[[unit, t - 1]] != control[[unit, t - 1]] {
                    violations.push(Violation {
                        arm: Arm::Pulse(pulse),
                        unit,
                        time: t,
                        kind,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::Allocation;
    use crate::arm::Family;
    use crate::assignment::draw_assignment;
    use crate::rng;
    use ndarray::array;
    use rand::Rng;

    fn random_matrix(n: usize, t: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::rng_from_seed(seed);
        Array2::from_shape_fn((n, t), |_| r.random_range(-5.0..5.0))
    }

    #[test]
    fn constant_schedule_observes_constant() {
        let sched = PotentialOutcomeSchedule::uniform(Array2::from_elem((5, 3), 2.5)).unwrap();
        let alloc = Allocation::new(1, 2, vec![1, 1]).unwrap();
        let obs = observe(&draw_assignment(&alloc, Family::Pulse, 1), &sched).unwrap();
        assert!(obs.values().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn lookup_by_label() {
        let z = AssignmentMatrix::new(vec![Arm::AlwaysTreated, Arm::AlwaysControl], 2, Family::Pulse).unwrap();
        let sched = PotentialOutcomeSchedule::new(
            Array2::zeros((2, 2)),
            Array2::ones((2, 2)),
            vec![Array2::from_elem((2, 2), 7.0)],
        )
        .unwrap();
        let obs = observe(&z, &sched).unwrap();
        assert_eq!(obs.values(), &array![[1.0, 1.0], [0.0, 0.0]]);
    }

    #[test]
    fn observe_commutes_with_permutation() {
        let arms: Vec<_> = (0..5).map(|a| random_matrix(6, 4, a)).collect();
        let sched = PotentialOutcomeSchedule::from_arms(arms).unwrap();
        let alloc = Allocation::new(1, 2, vec![1, 1, 1]).unwrap();
        let mut r = rng::rng_from_seed(42);
        for seed in 0..10 {
            let z = draw_assignment(&alloc, Family::Pulse, seed);
            let p = Permutation::random(6, &mut r);
            let lhs = observe(&z.permuted(&p).unwrap(), &sched.permuted(&p).unwrap()).unwrap();
            let rhs = observe(&z, &sched).unwrap().permuted(&p).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn shape_errors() {
        assert!(PotentialOutcomeSchedule::from_arms(vec![Array2::zeros((2, 3)); 3]).is_err());
        assert!(PotentialOutcomeSchedule::from_arms(vec![Array2::zeros((2, 1)); 2]).is_err());
        let sched = PotentialOutcomeSchedule::uniform(Array2::zeros((3, 2))).unwrap();
        let z = AssignmentMatrix::new(vec![Arm::AlwaysControl; 2], 2, Family::Pulse).unwrap();
        assert!(matches!(observe(&z, &sched), Err(Error::Shape(_))));
        assert!(matches!(sched.arm(Arm::Pulse(3)), Err(Error::MissingArm(_))));
    }

    #[test]
    fn validation_reports_violations() {
        let base = random_matrix(3, 4, 1);
        assert!(validate_schedule(&PotentialOutcomeSchedule::uniform(base.clone()).unwrap(), Some(1)).is_valid());

        let mut sched = PotentialOutcomeSchedule::uniform(base).unwrap();
        sched.arm_mut(Arm::Pulse(3)).unwrap()[[1, 1]] += 1.0;
        let report = validate_schedule(&sched, None);
        assert_eq!(
            report.violations,
            vec![Violation {
                arm: Arm::Pulse(3),
                unit: 1,
                time: 2,
                kind: ViolationKind::Anticipation
            }]
        );

        // A lingering effect two periods after the pulse only matters for k <= 2.
        let mut sched = PotentialOutcomeSchedule::uniform(random_matrix(2, 4, 2)).unwrap();
        sched.arm_mut(Arm::Pulse(2)).unwrap()[[0, 3]] -= 0.5;
        assert!(validate_schedule(&sched, None).is_valid());
        assert!(validate_schedule(&sched, Some(3)).is_valid());
        let report = validate_schedule(&sched, Some(2));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::Carryover);
    }
}
