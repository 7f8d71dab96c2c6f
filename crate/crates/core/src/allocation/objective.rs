use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{check_horizon, ArmCounts};
use crate::arm::Arm;
use crate::error::{Error, Result};
use crate::estimators::Estimator;

/// Which design problem to solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ObjectiveMode {
    /// Plug-in estimators for both effects.
    Basic,
    /// Instantaneous effect estimated against augmented controls.
    Augmented,
    /// Augmented controls with weight `rho` on the habituation terms.
    Weighted { rho: f64 },
    /// Controls recycled from pulses at least `k` periods old.
    Recycling { k: usize },
}

impl ObjectiveMode {
    pub fn validate(self) -> Result<Self> {
        match self {
            ObjectiveMode::Weighted { rho } if !(0.0..=1.0).contains(&rho) => Err(Error::InvalidWeight(rho)),
            ObjectiveMode::Recycling { k: 0 } => Err(Error::InvalidCarryover),
            m => Ok(m),
        }
    }

    /// The estimator, habituation weight and overall scale this mode's objective
    /// corresponds to. Unweighted modes are twice the `rho = 1/2` weighted risk.
    pub(crate) fn parts(self) -> (Estimator, f64, f64) {
        match self {
            ObjectiveMode::Basic => (Estimator::PlugIn, 0.5, 2.0),
            ObjectiveMode::Augmented => (Estimator::Augmented, 0.5, 2.0),
            ObjectiveMode::Weighted { rho } => (Estimator::Augmented, rho, 1.0),
            ObjectiveMode::Recycling { k } => (Estimator::Recycling { k }, 0.5, 2.0),
        }
    }

    pub(crate) fn terms(self, horizon: usize) -> Result<TermSet> {
        self.validate()?;
        check_horizon(horizon)?;
        let (estimator, rho, scale) = self.parts();
        Ok(TermSet::weighted(horizon, estimator, rho, scale))
    }
}

impl fmt::Display for ObjectiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveMode::Basic => f.write_str("basic"),
            ObjectiveMode::Augmented => f.write_str("augmented"),
            ObjectiveMode::Weighted { rho } => write!(f, "weighted:{rho}"),
            ObjectiveMode::Recycling { k } => write!(f, "recycling:{k}"),
        }
    }
}

impl FromStr for ObjectiveMode {
    type Err = Error;

    /// Parses `basic`, `augmented`, `weighted:<rho>` and `recycling:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::InvalidParameter(format!("cannot parse objective mode {s:?}"));
        let mode = match (head, arg) {
            ("basic", None) => ObjectiveMode::Basic,
            ("augmented", None) => ObjectiveMode::Augmented,
            ("weighted", Some(a)) => ObjectiveMode::Weighted {
                rho: a.parse().map_err(|_| bad())?,
            },
            ("recycling", Some(a)) => ObjectiveMode::Recycling {
                k: a.parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        mode.validate()
    }
}

#[derive(Clone, Debug)]
struct Term {
    weight: f64,
    support: Vec<usize>,
    /// Time index of the pool this term belongs to, for error messages.
    pool_time: Option<usize>,
}

/// `sum_k w_k / (a_k . n)` with 0/1 supports `a_k` over arm indices.
#[derive(Clone, Debug)]
pub(crate) struct TermSet {
    horizon: usize,
    terms: Vec<Term>,
    active: Vec<bool>,
}

pub(crate) fn pool_support(horizon: usize, t: usize, estimator: Estimator) -> Vec<usize> {
    let mut support = vec![0];
    match estimator {
        Estimator::PlugIn => {}
        Estimator::Augmented => support.extend(t + 1..=horizon),
        Estimator::Recycling { k } => {
            support.extend((2..=horizon).filter(|&p| p > t || p + k <= t));
        }
    }
    support
}

impl TermSet {
    /// Worst-case risk per unit `V*` of a loss weighting the habituation terms by
    /// `rho` and the instantaneous terms by `1 - rho`, times `scale`.
    pub(crate) fn weighted(horizon: usize, estimator: Estimator, rho: f64, scale: f64) -> Self {
        let tm1 = (horizon - 1) as f64;
        let mut terms = Vec::new();
        if rho > 0.0 {
            terms.push(Term {
                weight: scale * rho * tm1,
                support: vec![1],
                pool_time: None,
            });
        }
        // Each pulse mean enters both contrasts: weight rho + (1 - rho) = 1.
        for t in 2..=horizon {
            terms.push(Term {
                weight: scale,
                support: vec![t],
                pool_time: None,
            });
        }
        if rho < 1.0 {
            let w = scale * (1.0 - rho);
            match estimator {
                Estimator::PlugIn => terms.push(Term {
                    weight: w * tm1,
                    support: vec![0],
                    pool_time: None,
                }),
                _ => {
                    for t in 2..=horizon {
                        terms.push(Term {
                            weight: w,
                            support: pool_support(horizon, t, estimator),
                            pool_time: Some(t),
                        });
                    }
                }
            }
        }
        let mut active = vec![true; horizon + 1];
        active[1] = rho > 0.0;
        active[0] = rho < 1.0;
        Self { horizon, terms, active }
    }

    pub(crate) fn horizon(&self) -> usize {
        self.horizon
    }

    /// Arms that appear in some term; inactive arms are held at zero.
    pub(crate) fn active(&self) -> &[bool] {
        &self.active
    }

    fn denominators(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.horizon + 1 {
            return Err(Error::Shape(format!(
                "allocation has {} arms, objective expects {}",
                x.len(),
                self.horizon + 1
            )));
        }
        self.terms
            .iter()
            .map(|term| {
                let s: f64 = term.support.iter().map(|&i| x[i]).sum();
                if s > 0.0 && s.is_finite() {
                    Ok(s)
                } else {
                    let arm = match term.pool_time {
                        Some(t) => format!("control pool at t={t}"),
                        None => Arm::from_index(term.support[0]).to_string(),
                    };
                    Err(Error::Domain { arm, value: s })
                }
            })
            .collect()
    }

    /// Objective value. Terms are summed in ascending order so that allocations
    /// that are relabellings of each other give bit-identical values.
    pub(crate) fn value(&self, x: &[f64]) -> Result<f64> {
        let denoms = self.denominators(x)?;
        let mut parts: Vec<f64> = self.terms.iter().zip(&denoms).map(|(t, s)| t.weight / s).collect();
        parts.sort_by(f64::total_cmp);
        Ok(parts.iter().sum())
    }

    pub(crate) fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let denoms = self.denominators(x)?;
        let mut g = vec![0.0; self.horizon + 1];
        for (term, s) in self.terms.iter().zip(&denoms) {
            let d = term.weight / (s * s);
            for &i in &term.support {
                g[i] -= d;
            }
        }
        Ok(g)
    }

    /// First and second derivative of `d -> f(x + d (e_to - e_from))`.
    pub(crate) fn transfer_derivatives(&self, x: &[f64], from: usize, to: usize) -> Result<(f64, f64)> {
        let denoms = self.denominators(x)?;
        let (mut d1, mut d2) = (0.0, 0.0);
        for (term, s) in self.terms.iter().zip(&denoms) {
            let a = f64::from(u8::from(term.support.contains(&to))) - f64::from(u8::from(term.support.contains(&from)));
            if a != 0.0 {
                d1 -= term.weight * a / (s * s);
                d2 += 2.0 * term.weight * a * a / (s * s * s);
            }
        }
        Ok((d1, d2))
    }
}

/// Objective value of an allocation under `mode`.
pub fn objective(alloc: &impl ArmCounts, mode: ObjectiveMode) -> Result<f64> {
    mode.terms(alloc.horizon())?.value(&alloc.counts_f64())
}

/// Partial derivatives of the objective with respect to each arm's count, ignoring
/// the sum constraint. At a relaxed optimum all active components coincide.
pub fn objective_gradient(alloc: &impl ArmCounts, mode: ObjectiveMode) -> Result<Vec<f64>> {
    mode.terms(alloc.horizon())?.gradient(&alloc.counts_f64())
}
