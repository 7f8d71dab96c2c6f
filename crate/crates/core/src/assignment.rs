//! Realized assignments: sampling under complete randomization, augmented
//! control sets, and unit permutations.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::allocation::Allocation;
use crate::arm::{make_arm_vector, Arm, AssignmentVector, Family};
use crate::error::{Error, Result};
use crate::rng;

/// One realized population assignment: an arm label per unit, expanded to
/// treatment paths on demand through the matrix's family.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssignmentMatrix {
    horizon: usize,
    family: Family,
    labels: Vec<Arm>,
}

impl AssignmentMatrix {
    pub fn new(labels: Vec<Arm>, horizon: usize, family: Family) -> Result<Self> {
        if horizon < 2 {
            return Err(Error::HorizonTooShort(horizon));
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput("assignment with no units".into()));
        }
        for arm in &labels {
            arm.validate(horizon)?;
        }
        Ok(Self { horizon, family, labels })
    }

    /// Decode an `N x T` 0/1 matrix. Every row must be a canonical arm vector and
    /// rows must not mix pulse and wedge patterns; ambiguous matrices decode as pulse.
    pub fn from_bits(bits: &Array2<u8>) -> Result<Self> {
        let (_, horizon) = bits.dim();
        let mut family = None;
        let mut labels = Vec::with_capacity(bits.nrows());
        for (row, values) in bits.outer_iter().enumerate() {
            let values: Vec<u8> = values.iter().copied().collect();
            let (arm, fam) = AssignmentVector::decode(&values).ok_or(Error::UnknownArmPattern { row })?;
            if let Some(fam) = fam {
                match family {
                    Some(f) if f != fam => return Err(Error::UnknownArmPattern { row }),
                    _ => family = Some(fam),
                }
            }
            labels.push(arm);
        }
        Self::new(labels, horizon, family.unwrap_or_default())
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn labels(&self) -> &[Arm] {
        &self.labels
    }

    pub fn label(&self, unit: usize) -> Arm {
        self.labels[unit]
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    pub fn row(&self, unit: usize) -> AssignmentVector {
        make_arm_vector(self.labels[unit], self.family, self.horizon)
            .expect("labels are validated on construction")
    }

    pub fn to_bits(&self) -> Array2<u8> {
        let mut out = Array2::zeros((self.n_units(), self.horizon));
        for (i, mut row) in out.outer_iter_mut().enumerate() {
            for (dst, &b) in row.iter_mut().zip(self.row(i).bits()) {
                *dst = b;
            }
        }
        out
    }

    /// Unit counts per arm in canonical order (`0`, `1`, `e_2`, ..., `e_T`).
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.horizon + 1];
        for arm in &self.labels {
            counts[arm.index()] += 1;
        }
        counts
    }

    pub fn allocation(&self) -> Allocation {
        Allocation::from_counts(&self.counts()).expect("horizon >= 2 by construction")
    }

    pub fn units_in(&self, arm: Arm) -> Vec<usize> {
        (0..self.n_units()).filter(|&i| self.labels[i] == arm).collect()
    }

    pub fn permuted(&self, perm: &Permutation) -> Result<Self> {
        Ok(Self {
            horizon: self.horizon,
            family: self.family,
            labels: perm.apply(&self.labels)?,
        })
    }
}

fn label_multiset(alloc: &Allocation) -> Vec<Arm> {
    alloc
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(idx, &n)| std::iter::repeat_n(Arm::from_index(idx), n))
        .collect()
}

/// Complete randomization: a uniformly random arrangement of the allocation's
/// label multiset (Fisher-Yates), fully determined by `seed`.
pub fn draw_assignment(alloc: &Allocation, family: Family, seed: u64) -> AssignmentMatrix {
    draw_assignment_with(alloc, family, &mut rng::rng_from_seed(seed))
}

pub fn draw_assignment_with<R: Rng + ?Sized>(alloc: &Allocation, family: Family, rng: &mut R) -> AssignmentMatrix {
    let mut labels = label_multiset(alloc);
    labels.shuffle(rng);
    AssignmentMatrix {
        horizon: alloc.horizon(),
        family,
        labels,
    }
}

/// Number of distinct assignments with the allocation's arm counts (multinomial
/// coefficient), or `None` on overflow.
pub fn assignment_count(alloc: &Allocation) -> Option<u128> {
    let mut total: u128 = 1;
    let mut placed: u128 = 0;
    for &n in alloc.counts().iter() {
        for j in 1..=n as u128 {
            placed += 1;
            total = total.checked_mul(placed)? / j;
        }
    }
    Some(total)
}

/// Every distinct assignment with the allocation's arm counts, in lexicographic
/// order of label indices.
pub fn enumerate_assignments(alloc: &Allocation, family: Family) -> impl Iterator<Item = AssignmentMatrix> {
    let horizon = alloc.horizon();
    let mut state: Option<Vec<usize>> = Some(label_multiset(alloc).iter().map(|a| a.index()).collect());
    std::iter::from_fn(move || {
        let current = state.take()?;
        let mut next = current.clone();
        if next_permutation(&mut next) {
            state = Some(next);
        }
        Some(AssignmentMatrix {
            horizon,
            family,
            labels: current.into_iter().map(Arm::from_index).collect(),
        })
    })
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Units usable as controls at time `t`.
///
/// Without `k`: always-control units plus units pulsed after `t`. With `k`: also
/// units pulsed at or before `t - k`, whose effect has worn off under k-order
/// carryover.
pub fn augmented_controls(z: &AssignmentMatrix, t: usize, k: Option<usize>) -> Result<Vec<usize>> {
    check_time(t, z.horizon)?;
    if k == Some(0) {
        return Err(Error::InvalidCarryover);
    }
    Ok((0..z.n_units())
        .filter(|&i| is_augmented_control(z.labels[i], t, k))
        .collect())
}

pub(crate) fn is_augmented_control(arm: Arm, t: usize, k: Option<usize>) -> bool {
    match arm {
        Arm::AlwaysControl => true,
        Arm::AlwaysTreated => false,
        Arm::Pulse(p) => p > t || k.is_some_and(|k| p + k <= t),
    }
}

pub(crate) fn check_time(t: usize, horizon: usize) -> Result<()> {
    if t < 2 || t > horizon {
        Err(Error::TimeOutOfRange { t, horizon })
    } else {
        Ok(())
    }
}

/// A bijection on unit indices `0..N`; `perm[i]` is where unit `i` is sent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::NotAPermutation(n));
            }
        }
        Ok(Self(map))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self(map)
    }

    /// Transposition of units `a` and `b`.
    pub fn swap(n: usize, a: usize, b: usize) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.swap(a, b);
        Self(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            inv[j] = i;
        }
        Self(inv)
    }

    /// `(pi . v)_i = v_{pi^-1(i)}`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>> {
        if items.len() != self.0.len() {
            return Err(Error::Shape(format!(
                "permutation of {} units applied to {} items",
                self.0.len(),
                items.len()
            )));
        }
        let mut out = items.to_vec();
        for (j, &target) in self.0.iter().enumerate() {
            out[target] = items[j].clone();
        }
        Ok(out)
    }

    pub fn apply_rows(&self, m: &Array2<f64>) -> Result<Array2<f64>> {
        if m.nrows() != self.0.len() {
            return Err(Error::Shape(format!(
                "permutation of {} units applied to {} rows",
                self.0.len(),
                m.nrows()
            )));
        }
        let mut out = m.clone();
        for (j, &target) in self.0.iter().enumerate() {
            out.row_mut(target).assign(&m.row(j));
        }
        Ok(out)
    }
}
