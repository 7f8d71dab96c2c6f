//! Optimal unit allocations across the `T + 1` arms of a temporal design.
//!
//! Every design problem here minimizes a separable-in-denominators objective of the
//! form `sum_k w_k / (a_k . n)` over positive counts `n` summing to `N`, where each
//! `a_k` is a 0/1 vector selecting the arms that feed one estimator's denominator.
//! The four regimes differ only in which terms appear:
//!
//! | mode | terms |
//! |------|-------|
//! | `Basic` | `(T-1)/N1 + (T-1)/N0 + 2 sum 1/N_et` |
//! | `Augmented` | `(T-1)/N1 + 2 sum 1/N_et + sum 1/N'_t` |
//! | `Weighted(rho)` | `rho (T-1)/N1 + sum 1/N_et + (1-rho) sum 1/N'_t` |
//! | `Recycling(k)` | `(T-1)/N1 + 2 sum 1/N_et + sum 1/N'_{t,k}` |
//!
//! with `N'_t = N0 + sum_{t'>t} N_et'` the augmented control pool and `N'_{t,k}`
//! additionally counting pulses at `t' <= t - k`.

mod integer;
mod objective;
mod relaxed;

use serde::{Deserialize, Serialize};

use crate::arm::Arm;
use crate::error::{Error, Result};

pub use integer::{balanced, brute_force_opt, integer_solve};
pub use objective::{objective, objective_gradient, ObjectiveMode};
pub use relaxed::{
    c_sequence, relaxed_augmented, relaxed_basic, relaxed_for_mode, relaxed_numeric, relaxed_recycling,
    relaxed_weighted, CSequence,
};

pub(crate) use objective::TermSet;

/// Per-arm counts in canonical order, integer or real.
pub trait ArmCounts {
    fn counts_f64(&self) -> Vec<f64>;

    fn horizon(&self) -> usize {
        self.counts_f64().len() - 1
    }
}

/// Integer unit counts per arm: `n0`, `n1`, then `n_e2..n_eT`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Allocation {
    counts: Vec<usize>,
}

impl Allocation {
    /// Every count must be at least one.
    pub fn new(n0: usize, n1: usize, pulses: Vec<usize>) -> Result<Self> {
        let mut counts = vec![n0, n1];
        counts.extend(pulses);
        if let Some(idx) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidAllocation(format!("arm {} has no units", Arm::from_index(idx))));
        }
        Self::from_counts(&counts)
    }

    /// Counts in canonical order; zero counts are allowed (weighted designs at
    /// `rho` in {0, 1} leave one arm empty).
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.len() < 3 {
            return Err(Error::HorizonTooShort(counts.len().saturating_sub(1)));
        }
        Ok(Self { counts: counts.to_vec() })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn horizon(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn n0(&self) -> usize {
        self.counts[0]
    }

    pub fn n1(&self) -> usize {
        self.counts[1]
    }

    /// Count for pulse arm `e_t`, `t` in `2..=T`.
    pub fn pulse(&self, t: usize) -> usize {
        self.counts[t]
    }

    pub fn pulses(&self) -> &[usize] {
        &self.counts[2..]
    }

    pub fn count(&self, arm: Arm) -> usize {
        self.counts[arm.index()]
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.counts.iter().all(|&c| c > 0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (Arm, usize)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (Arm::from_index(i), c))
    }
}

impl TryFrom<Vec<usize>> for Allocation {
    type Error = Error;

    fn try_from(counts: Vec<usize>) -> Result<Self> {
        Self::from_counts(&counts)
    }
}

impl From<Allocation> for Vec<usize> {
    fn from(a: Allocation) -> Self {
        a.counts
    }
}

impl ArmCounts for Allocation {
    fn counts_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    fn horizon(&self) -> usize {
        self.counts.len() - 1
    }
}

/// Real-valued counts from a continuous relaxation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealAllocation {
    counts: Vec<f64>,
}

impl RealAllocation {
    /// Counts in canonical order; each must be finite and non-negative.
    pub fn from_counts(counts: Vec<f64>) -> Result<Self> {
        if counts.len() < 3 {
            return Err(Error::HorizonTooShort(counts.len().saturating_sub(1)));
        }
        if let Some(idx) = counts.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidAllocation(format!(
                "arm {} has count {}",
                Arm::from_index(idx),
                counts[idx]
            )));
        }
        Ok(Self { counts })
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn horizon(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn n0(&self) -> f64 {
        self.counts[0]
    }

    pub fn n1(&self) -> f64 {
        self.counts[1]
    }

    pub fn pulse(&self, t: usize) -> f64 {
        self.counts[t]
    }

    pub fn pulses(&self) -> &[f64] {
        &self.counts[2..]
    }

    pub fn entries(&self) -> impl Iterator<Item = (Arm, f64)> + '_ {
        self.counts.iter().enumerate().map(|(i, &c)| (Arm::from_index(i), c))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * s).collect(),
        }
    }
}

impl ArmCounts for RealAllocation {
    fn counts_f64(&self) -> Vec<f64> {
        self.counts.clone()
    }

    fn horizon(&self) -> usize {
        self.counts.len() - 1
    }
}

impl From<&Allocation> for RealAllocation {
    fn from(a: &Allocation) -> Self {
        Self { counts: a.counts_f64() }
    }
}

pub(crate) fn check_horizon(horizon: usize) -> Result<()> {
    if horizon < 2 {
        Err(Error::HorizonTooShort(horizon))
    } else {
        Ok(())
    }
}

pub(crate) fn check_total(n: f64) -> Result<()> {
    if n.is_finite() && n > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("N must be positive and finite, got {n}")))
    }
}
