//! Estimands computed from a full schedule, and their randomization estimators
//! computed from one realized experiment.
//!
//! Group means are summed in sorted order, so every estimate is exactly
//! invariant to relabelling the units.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arm::{Arm, Family};
use crate::assignment::{check_time, is_augmented_control, AssignmentMatrix};
use crate::error::{Error, Result};
use crate::schedule::{ObservedOutcomes, PotentialOutcomeSchedule};

/// How the instantaneous effect is estimated. The habituation effect always uses
/// the plug-in contrast.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    /// Pulse arm against the always-control arm.
    #[default]
    #[serde(rename = "plugin")]
    PlugIn,
    /// Pulse arm against always-control and not-yet-pulsed units.
    Augmented,
    /// Augmented controls plus units pulsed at least `k` periods earlier.
    Recycling { k: usize },
}

impl Estimator {
    /// Build from a CLI-style name and an optional carryover order.
    pub fn from_name(name: &str, k: Option<usize>) -> Result<Self> {
        match (name, k) {
            ("plugin", _) => Ok(Estimator::PlugIn),
            ("augmented", _) => Ok(Estimator::Augmented),
            ("recycling", Some(0)) => Err(Error::InvalidCarryover),
            ("recycling", Some(k)) => Ok(Estimator::Recycling { k }),
            ("recycling", None) => Err(Error::InvalidParameter("recycling needs a carryover order k".into())),
            _ => Err(Error::InvalidParameter(format!("unknown estimator {name:?}"))),
        }
    }

    /// Carryover order passed to the control-set rule.
    pub(crate) fn carryover(self) -> Option<usize> {
        match self {
            Estimator::Recycling { k } => Some(k),
            _ => None,
        }
    }

    /// Whether a unit on `arm` serves as a control for the instantaneous effect at `t`.
    pub(crate) fn is_control(self, arm: Arm, t: usize) -> bool {
        match self {
            Estimator::PlugIn => arm == Arm::AlwaysControl,
            _ => is_augmented_control(arm, t, self.carryover()),
        }
    }

    pub(crate) fn validate(self) -> Result<Self> {
        match self {
            Estimator::Recycling { k: 0 } => Err(Error::InvalidCarryover),
            e => Ok(e),
        }
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::PlugIn => f.write_str("plugin"),
            Estimator::Augmented => f.write_str("augmented"),
            Estimator::Recycling { k } => write!(f, "recycling:{k}"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    /// `plugin`, `augmented` or `recycling:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("recycling", k)) => {
                let k = k
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad carryover order in {s:?}")))?;
                Estimator::from_name("recycling", Some(k))
            }
            Some(_) => Err(Error::InvalidParameter(format!("unknown estimator {s:?}"))),
            None => Estimator::from_name(s, None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectKind {
    Habituation,
    Instantaneous,
    Ate,
}

/// One value per time `t = 2..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectSeries {
    pub kind: EffectKind,
    pub values: Vec<f64>,
}

impl EffectSeries {
    pub fn horizon(&self) -> usize {
        self.values.len() + 1
    }

    pub fn get(&self, t: usize) -> f64 {
        self.values[t - 2]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (i + 2, v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimands {
    pub lambda: EffectSeries,
    pub delta: EffectSeries,
    pub ate: EffectSeries,
}

/// Order-independent mean.
pub(crate) fn sorted_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Habituation, instantaneous and total effects at each `t >= 2`.
pub fn estimands(sched: &PotentialOutcomeSchedule) -> Estimands {
    let horizon = sched.horizon();
    let contrast = |a: Arm, b: Arm, t: usize| {
        let diffs = sched
            .column(a, t)
            .iter()
            .zip(sched.column(b, t).iter())
            .map(|(x, y)| x - y)
            .collect();
        sorted_mean(diffs).expect("schedules have at least one unit")
    };
    let series = |kind, f: &dyn Fn(usize) -> f64| EffectSeries {
        kind,
        values: (2..=horizon).map(f).collect(),
    };
    Estimands {
        lambda: series(EffectKind::Habituation, &|t| contrast(Arm::AlwaysTreated, Arm::Pulse(t), t)),
        delta: series(EffectKind::Instantaneous, &|t| contrast(Arm::Pulse(t), Arm::AlwaysControl, t)),
        ate: series(EffectKind::Ate, &|t| contrast(Arm::AlwaysTreated, Arm::AlwaysControl, t)),
    }
}

fn check_inputs(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize) -> Result<()> {
    if z.n_units() != obs.n_units() || z.horizon() != obs.horizon() {
        return Err(Error::Shape(format!(
            "assignment is {}x{}, outcomes are {}x{}",
            z.n_units(),
            z.horizon(),
            obs.n_units(),
            obs.horizon()
        )));
    }
    check_time(t, z.horizon())
}

/// Observed time-`t` outcomes of the units whose arm satisfies `keep`.
pub(crate) fn group_values(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize, keep: impl Fn(Arm) -> bool) -> Vec<f64> {
    (0..z.n_units())
        .filter(|&i| keep(z.label(i)))
        .map(|i| obs.at(i, t))
        .collect()
}

fn group_mean(
    z: &AssignmentMatrix,
    obs: &ObservedOutcomes,
    t: usize,
    group: impl FnOnce() -> String,
    keep: impl Fn(Arm) -> bool,
) -> Result<f64> {
    sorted_mean(group_values(z, obs, t, keep)).ok_or_else(|| Error::EmptyArm { t, group: group() })
}

fn pulse_mean(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize) -> Result<f64> {
    group_mean(z, obs, t, || format!("arm {}", Arm::Pulse(t)), |a| a == Arm::Pulse(t))
}

/// Always-treated mean minus pulse-`t` mean at time `t`.
pub fn lambda_hat(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize) -> Result<f64> {
    check_inputs(z, obs, t)?;
    let treated = group_mean(z, obs, t, || "arm always1".into(), |a| a == Arm::AlwaysTreated)?;
    Ok(treated - pulse_mean(z, obs, t)?)
}

/// Pulse-`t` mean minus always-control mean at time `t`.
pub fn delta_hat(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize) -> Result<f64> {
    instantaneous_hat(z, obs, t, Estimator::PlugIn)
}

/// Pulse-`t` mean minus the mean over always-control and later-pulse units.
/// Unbiased only when the schedule is non-anticipating.
pub fn gamma_hat(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize) -> Result<f64> {
    instantaneous_hat(z, obs, t, Estimator::Augmented)
}

/// Like [`gamma_hat`], additionally using units pulsed at or before `t - k` as
/// controls. Requires pulse-family assignments and k-order carryover.
pub fn beta_hat(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize, k: usize) -> Result<f64> {
    instantaneous_hat(z, obs, t, Estimator::Recycling { k })
}

/// Instantaneous-effect estimate at `t` with the chosen control set.
pub fn instantaneous_hat(z: &AssignmentMatrix, obs: &ObservedOutcomes, t: usize, estimator: Estimator) -> Result<f64> {
    check_inputs(z, obs, t)?;
    let estimator = estimator.validate()?;
    if matches!(estimator, Estimator::Recycling { .. }) && z.family() == Family::Wedge {
        return Err(Error::RecyclingRequiresPulse);
    }
    let pulse = pulse_mean(z, obs, t)?;
    let label = || match estimator {
        Estimator::PlugIn => "arm always0".to_string(),
        _ => format!("control pool for {estimator}"),
    };
    let control = group_mean(z, obs, t, label, |a| estimator.is_control(a, t))?;
    Ok(pulse - control)
}

/// Estimates of both effects at every `t = 2..=T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateTable {
    pub estimator: Estimator,
    pub lambda: EffectSeries,
    pub delta: EffectSeries,
}

pub fn estimate_all(z: &AssignmentMatrix, obs: &ObservedOutcomes, estimator: Estimator) -> Result<EstimateTable> {
    let horizon = z.horizon();
    let lambda = (2..=horizon).map(|t| lambda_hat(z, obs, t)).collect::<Result<_>>()?;
    let delta = (2..=horizon)
        .map(|t| instantaneous_hat(z, obs, t, estimator))
        .collect::<Result<_>>()?;
    Ok(EstimateTable {
        estimator,
        lambda: EffectSeries {
            kind: EffectKind::Habituation,
            values: lambda,
        },
        delta: EffectSeries {
            kind: EffectKind::Instantaneous,
            values: delta,
        },
    })
}
