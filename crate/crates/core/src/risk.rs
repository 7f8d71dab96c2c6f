//! Losses, randomization risk and the worst case over bounded outcome boxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::allocation::{check_horizon, Allocation, ArmCounts, TermSet};
use crate::arm::{Arm, Family};
use crate::assignment::{assignment_count, check_time, draw_assignment_with, enumerate_assignments, AssignmentMatrix};
use crate::error::{Error, Result};
use crate::estimators::{self, estimands, group_values, instantaneous_hat, lambda_hat, Estimands, Estimator};
use crate::rng;
use crate::schedule::{observe, ObservedOutcomes, PotentialOutcomeSchedule};

/// Squared-error loss weighting habituation errors by `rho` and instantaneous
/// errors by `1 - rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub estimator: Estimator,
    pub rho: f64,
    /// Double the loss. With the plug-in estimator at `rho = 1/2` this gives the
    /// unweighted sum of both squared-error series.
    #[serde(default)]
    pub doubled: bool,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self {
            estimator: Estimator::PlugIn,
            rho: 0.5,
            doubled: false,
        }
    }
}

impl LossSpec {
    pub fn new(estimator: Estimator, rho: f64) -> Result<Self> {
        Self {
            estimator,
            rho,
            doubled: false,
        }
        .validate()
    }

    /// Unweighted plug-in loss: both series with weight one.
    pub fn unweighted() -> Self {
        Self {
            doubled: true,
            ..Self::default()
        }
    }

    pub fn with_doubled(self, on: bool) -> Self {
        Self { doubled: on, ..self }
    }

    pub fn validate(self) -> Result<Self> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::InvalidWeight(self.rho));
        }
        self.estimator.validate()?;
        Ok(self)
    }

    fn scale(self) -> f64 {
        if self.doubled {
            2.0
        } else {
            1.0
        }
    }

    pub(crate) fn terms(self, horizon: usize) -> Result<TermSet> {
        self.validate()?;
        check_horizon(horizon)?;
        Ok(TermSet::weighted(horizon, self.estimator, self.rho, self.scale()))
    }
}

/// Loss of one realized assignment against the schedule's estimands.
pub fn loss(z: &AssignmentMatrix, sched: &PotentialOutcomeSchedule, spec: LossSpec) -> Result<f64> {
    let spec = spec.validate()?;
    loss_given(z, sched, &estimands(sched), spec)
}

fn loss_given(z: &AssignmentMatrix, sched: &PotentialOutcomeSchedule, truth: &Estimands, spec: LossSpec) -> Result<f64> {
    let obs = observe(z, sched)?;
    let (mut hab, mut inst) = (0.0, 0.0);
    for t in 2..=sched.horizon() {
        if spec.rho > 0.0 {
            hab += (lambda_hat(z, &obs, t)? - truth.lambda.get(t)).powi(2);
        }
        if spec.rho < 1.0 {
            inst += (instantaneous_hat(z, &obs, t, spec.estimator)? - truth.delta.get(t)).powi(2);
        }
    }
    let mut total = 0.0;
    if spec.rho > 0.0 {
        total += spec.rho * hab;
    }
    if spec.rho < 1.0 {
        total += (1.0 - spec.rho) * inst;
    }
    Ok(spec.scale() * total)
}

/// Analytical and simulated risk of one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub label: String,
    pub max_risk: Option<f64>,
    pub mc_risk: f64,
    pub se: f64,
    pub draws: usize,
}

impl RiskReport {
    pub fn with_label(self, label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            ..self
        }
    }

    pub fn with_max_risk(self, max_risk: f64) -> Self {
        Self {
            max_risk: Some(max_risk),
            ..self
        }
    }
}

/// Mean loss over `draws` complete randomizations with counts `alloc`. Draw `r`
/// uses a stream derived from `(seed, r)` and losses are accumulated in draw
/// order, so the result does not depend on the number of worker threads.
pub fn mc_risk(
    alloc: &Allocation,
    sched: &PotentialOutcomeSchedule,
    spec: LossSpec,
    draws: usize,
    seed: u64,
) -> Result<RiskReport> {
    let spec = spec.validate()?;
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    check_alloc(alloc, sched)?;
    let truth = estimands(sched);
    let losses = (0..draws as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(seed, &[r]);
            let z = draw_assignment_with(alloc, Family::Pulse, &mut rng);
            loss_given(&z, sched, &truth, spec)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, se) = mean_and_se(&losses);
    Ok(RiskReport {
        label: String::new(),
        max_risk: None,
        mc_risk: mean,
        se,
        draws,
    })
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_alloc(alloc: &Allocation, sched: &PotentialOutcomeSchedule) -> Result<()> {
    if alloc.total() != sched.n_units() || alloc.horizon() != sched.horizon() {
        return Err(Error::Shape(format!(
            "allocation of {} units over T={} does not fit a schedule with N={}, T={}",
            alloc.total(),
            alloc.horizon(),
            sched.n_units(),
            sched.horizon()
        )));
    }
    Ok(())
}

const ENUMERATION_LIMIT: u128 = 5_000_000;

/// Exact risk: the loss averaged over every assignment with counts `alloc`.
pub fn exact_risk(alloc: &Allocation, sched: &PotentialOutcomeSchedule, spec: LossSpec) -> Result<f64> {
    let spec = spec.validate()?;
    check_alloc(alloc, sched)?;
    let count = assignment_count(alloc).filter(|&c| c <= ENUMERATION_LIMIT).ok_or(Error::InstanceTooLarge {
        n: alloc.total(),
        horizon: alloc.horizon(),
    })?;
    let truth = estimands(sched);
    let mut total = 0.0;
    for z in enumerate_assignments(alloc, Family::Pulse) {
        total += loss_given(&z, sched, &truth, spec)?;
    }
    Ok(total / count as f64)
}

/// A schedule attaining the maximum risk over the box `[lower, upper]^N`.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCase {
    pub schedule: PotentialOutcomeSchedule,
    /// The common column: `ceil(N/2)` entries at `upper`, the rest at `lower`.
    pub column: Vec<f64>,
    /// Sample variance (divisor `N - 1`) of `column`.
    pub vstar: f64,
}

/// Every arm and every period gets the same variance-maximizing column, so all
/// effects are zero and the risk is pure estimator variance.
pub fn worst_case_schedule(n: usize, horizon: usize, lower: f64, upper: f64) -> Result<WorstCase> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(Error::DegenerateBox { lower, upper });
    }
    check_horizon(horizon)?;
    if n < 2 {
        return Err(Error::InvalidParameter(format!("worst-case schedule needs N >= 2, got {n}")));
    }
    let high = n.div_ceil(2);
    let column: Vec<f64> = (0..n).map(|i| if i < high { upper } else { lower }).collect();
    let vstar = sample_variance(&column);
    let matrix = ndarray::Array2::from_shape_fn((n, horizon), |(i, _)| column[i]);
    Ok(WorstCase {
        schedule: PotentialOutcomeSchedule::uniform(matrix)?,
        column,
        vstar,
    })
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Largest risk of complete randomization with these counts over any
/// permutation-invariant outcome set whose worst sample variance is `vstar`.
pub fn max_risk(alloc: &impl ArmCounts, vstar: f64, spec: LossSpec) -> Result<f64> {
    if !(vstar.is_finite() && vstar > 0.0) {
        return Err(Error::InvalidParameter(format!("V* must be positive, got {vstar}")));
    }
    Ok(vstar * spec.terms(alloc.horizon())?.value(&alloc.counts_f64())?)
}

/// Finite-population variances at one period. `v1et` and `v0et` are variances of
/// the unit-level contrasts `Y(1) - Y(e_t)` and `Y(e_t) - Y(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub t: usize,
    pub v1: f64,
    pub v0: f64,
    pub vet: f64,
    pub v1et: f64,
    pub v0et: f64,
}

pub fn variance_components(sched: &PotentialOutcomeSchedule, t: usize) -> Result<VarianceComponents> {
    check_time(t, sched.horizon())?;
    if sched.n_units() < 2 {
        return Err(Error::TooFewUnits {
            t,
            group: "schedule".into(),
        });
    }
    let col = |arm| sched.column(arm, t).to_vec();
    let (y1, y0, ye) = (col(Arm::AlwaysTreated), col(Arm::AlwaysControl), col(Arm::Pulse(t)));
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>();
    Ok(VarianceComponents {
        t,
        v1: sample_variance(&y1),
        v0: sample_variance(&y0),
        vet: sample_variance(&ye),
        v1et: sample_variance(&diff(&y1, &ye)),
        v0et: sample_variance(&diff(&ye, &y0)),
    })
}

/// Number of control units the estimator uses at `t`.
pub(crate) fn pool_size(counts: &[usize], t: usize, estimator: Estimator) -> usize {
    (0..counts.len())
        .filter(|&i| i != 1 && estimator.is_control(Arm::from_index(i), t))
        .map(|i| counts[i])
        .sum()
}

/// Randomization variances of the habituation estimate and of the chosen
/// instantaneous estimate at `t`. The augmented and recycling forms assume the
/// schedule is non-anticipating (and has k-order carryover for recycling).
pub fn true_variances(alloc: &Allocation, sched: &PotentialOutcomeSchedule, t: usize, spec: LossSpec) -> Result<(f64, f64)> {
    let spec = spec.validate()?;
    check_alloc(alloc, sched)?;
    let vc = variance_components(sched, t)?;
    let n = sched.n_units() as f64;
    let positive = |count: usize, what: &str| {
        if count == 0 {
            Err(Error::Domain {
                arm: what.to_string(),
                value: 0.0,
            })
        } else {
            Ok(count as f64)
        }
    };
    let net = positive(alloc.pulse(t), &Arm::Pulse(t).to_string())?;
    let var_lambda = vc.v1 / positive(alloc.n1(), "always1")? + vc.vet / net - vc.v1et / n;
    let nc = positive(pool_size(alloc.counts(), t, spec.estimator), "control pool")?;
    let var_inst = vc.v0 / nc + vc.vet / net - vc.v0et / n;
    Ok((var_lambda, var_inst))
}

/// Which effect an interval targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CiTarget {
    Habituation,
    Instantaneous(Estimator),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub estimate: f64,
    pub half_width: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.estimate).abs() <= self.half_width
    }
}

/// Normal-approximation interval using `s_a^2/n_a + s_b^2/n_b`, which
/// overstates the randomization variance by the unidentified contrast term.
pub fn conservative_ci(
    z: &AssignmentMatrix,
    obs: &ObservedOutcomes,
    t: usize,
    target: CiTarget,
    level: f64,
) -> Result<Interval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    let (estimate, groups): (f64, [(String, Vec<f64>); 2]) = match target {
        CiTarget::Habituation => (
            lambda_hat(z, obs, t)?,
            [
                ("arm always1".into(), group_values(z, obs, t, |a| a == Arm::AlwaysTreated)),
                (format!("arm {}", Arm::Pulse(t)), group_values(z, obs, t, |a| a == Arm::Pulse(t))),
            ],
        ),
        CiTarget::Instantaneous(est) => (
            instantaneous_hat(z, obs, t, est)?,
            [
                (format!("arm {}", Arm::Pulse(t)), group_values(z, obs, t, |a| a == Arm::Pulse(t))),
                ("control pool".into(), group_values(z, obs, t, |a| est.is_control(a, t))),
            ],
        ),
    };
    let mut var = 0.0;
    for (group, values) in groups {
        if values.len() < 2 {
            return Err(Error::TooFewUnits { t, group });
        }
        let mean = estimators::sorted_mean(values.clone()).expect("non-empty");
        let mut sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
        sq.sort_by(f64::total_cmp);
        let s2 = sq.iter().sum::<f64>() / (values.len() - 1) as f64;
        var += s2 / values.len() as f64;
    }
    Ok(Interval {
        estimate,
        half_width: normal_quantile(0.5 + level / 2.0) * var.sqrt(),
    })
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::draw_assignment;
    use ndarray::{array, Array2};

    #[test]
    fn worst_case_examples() {
        let w = worst_case_schedule(4, 3, 0.0, 1.0).unwrap();
        assert_eq!(w.column, vec![1.0, 1.0, 0.0, 0.0]);
        assert!((w.vstar - 1.0 / 3.0).abs() < 1e-15);
        let w = worst_case_schedule(2, 2, 0.0, 1.0).unwrap();
        assert_eq!(w.column, vec![1.0, 0.0]);
        assert_eq!(w.vstar, 0.5);
        let e = estimands(&w.schedule);
        assert!(e.lambda.values.iter().chain(&e.delta.values).all(|&v| v == 0.0));
        assert!(matches!(worst_case_schedule(4, 2, 1.0, 1.0), Err(Error::DegenerateBox { .. })));
    }

    #[test]
    fn worst_case_split_is_best_among_corners() {
        for n in 2..=9 {
            let w = worst_case_schedule(n, 2, 0.0, 1.0).unwrap();
            for mask in 0u32..(1 << n) {
                let y: Vec<f64> = (0..n).map(|i| f64::from((mask >> i) & 1)).collect();
                assert!(sample_variance(&y) <= w.vstar + 1e-15);
            }
        }
    }

    #[test]
    fn max_risk_by_hand() {
        let a = Allocation::new(2, 2, vec![2]).unwrap();
        assert_eq!(max_risk(&a, 1.0, LossSpec::unweighted()).unwrap(), 2.0);
        assert_eq!(max_risk(&a, 1.0, LossSpec::default()).unwrap(), 1.0);
    }

    #[test]
    fn constant_schedule_has_zero_risk() {
        let sched = PotentialOutcomeSchedule::uniform(Array2::from_elem((6, 3), 4.0)).unwrap();
        let alloc = Allocation::new(1, 2, vec![1, 2]).unwrap();
        let z = draw_assignment(&alloc, Family::Pulse, 3);
        assert_eq!(loss(&z, &sched, LossSpec::default()).unwrap(), 0.0);
        let r = mc_risk(&alloc, &sched, LossSpec::default(), 50, 1).unwrap();
        assert_eq!((r.mc_risk, r.se), (0.0, 0.0));
        let vc = variance_components(&sched, 2).unwrap();
        assert_eq!([vc.v1, vc.v0, vc.vet, vc.v1et, vc.v0et], [0.0; 5]);
        assert_eq!(true_variances(&alloc, &sched, 3, LossSpec::default()).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn rho_one_ignores_control() {
        let mut r = rng::rng_from_seed(5);
        let sched = crate::simulate::random_schedule(6, 3, None, &mut r);
        let alloc = Allocation::new(1, 2, vec![1, 2]).unwrap();
        let z = draw_assignment(&alloc, Family::Pulse, 9);
        let spec = LossSpec::new(Estimator::PlugIn, 1.0).unwrap();
        let before = loss(&z, &sched, spec).unwrap();
        let mut moved = sched.clone();
        moved.arm_mut(Arm::AlwaysControl).unwrap().mapv_inplace(|v| v + 3.0);
        assert_eq!(loss(&z, &moved, spec).unwrap(), before);
    }

    #[test]
    fn variance_components_by_hand() {
        let sched = PotentialOutcomeSchedule::new(
            Array2::zeros((2, 2)),
            array![[0.0, 0.0], [0.0, 2.0]],
            vec![Array2::zeros((2, 2))],
        )
        .unwrap();
        let vc = variance_components(&sched, 2).unwrap();
        assert_eq!(vc.v1, 2.0);
        let w = worst_case_schedule(5, 3, -1.0, 2.0).unwrap();
        let vc = variance_components(&w.schedule, 3).unwrap();
        assert_eq!([vc.v1, vc.v0, vc.vet], [w.vstar; 3]);
        assert_eq!([vc.v1et, vc.v0et], [0.0; 2]);
    }

    #[test]
    fn interval_basics() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        let alloc = Allocation::new(2, 2, vec![2, 2]).unwrap();
        let z = draw_assignment(&alloc, Family::Pulse, 1);
        let obs = ObservedOutcomes(Array2::from_elem((8, 3), 1.0));
        let ci = conservative_ci(&z, &obs, 2, CiTarget::Instantaneous(Estimator::PlugIn), 0.95).unwrap();
        assert_eq!((ci.estimate, ci.half_width), (0.0, 0.0));
        let alloc = Allocation::new(1, 3, vec![2, 2]).unwrap();
        let z = draw_assignment(&alloc, Family::Pulse, 1);
        assert!(matches!(
            conservative_ci(&z, &obs, 2, CiTarget::Instantaneous(Estimator::PlugIn), 0.95),
            Err(Error::TooFewUnits { .. })
        ));
        assert!(conservative_ci(&z, &obs, 2, CiTarget::Instantaneous(Estimator::Augmented), 0.95).is_ok());
    }
}
