//! Outcome models and the design-comparison tables built on them.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ndarray::Array2;

use crate::allocation::{
    balanced, check_horizon, integer_solve, relaxed_augmented, relaxed_basic, Allocation, ObjectiveMode,
    RealAllocation,
};
use crate::arm::{make_arm_vector, Arm, Family};
use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::estimators::Estimator;
use crate::risk::{loss, max_risk, LossSpec};
use crate::rng;
use crate::schedule::PotentialOutcomeSchedule;

/// Unit or time fixed effect as a function of the 1-based index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedEffect {
    /// `log(index)`.
    #[default]
    Log,
    /// Explicit values, one per index.
    Table(Vec<f64>),
}

impl FixedEffect {
    fn values(&self, len: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            FixedEffect::Log => Ok((1..=len).map(|i| (i as f64).ln()).collect()),
            FixedEffect::Table(v) if v.len() >= len => Ok(v[..len].to_vec()),
            FixedEffect::Table(v) => Err(Error::InvalidParameter(format!(
                "{what} table has {} entries, need {len}",
                v.len()
            ))),
        }
    }
}

/// How the noise term is attached to the arms of a schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// One draw per (unit, period), identical across arms.
    #[default]
    Shared,
    /// One draw per (unit, period, treatment history up to that period). Arms with
    /// the same history so far share noise, so non-anticipation still holds.
    PerHistory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub alpha: FixedEffect,
    pub beta: FixedEffect,
    pub delta: f64,
    /// Effect of having been treated in the previous period (standard model).
    pub gamma: f64,
    /// Fraction of the effect lost when treatment repeats (habituation model).
    pub rho_decay: f64,
    /// Zero disables noise.
    pub noise_sd: f64,
    pub noise: NoiseMode,
    /// Whether pulse arms expand as single pulses or as wedges.
    pub family: Family,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            alpha: FixedEffect::Log,
            beta: FixedEffect::Log,
            delta: 1.0,
            gamma: -1.0,
            rho_decay: 0.5,
            noise_sd: 4.0,
            noise: NoiseMode::Shared,
            family: Family::Pulse,
        }
    }
}

impl ModelParams {
    pub fn noiseless(self) -> Self {
        Self { noise_sd: 0.0, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho_decay) {
            return Err(Error::InvalidParameter(format!("rho_decay must lie in [0, 1), got {}", self.rho_decay)));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidParameter(format!("noise_sd must be non-negative, got {}", self.noise_sd)));
        }
        for v in [self.mu, self.delta, self.gamma] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter("model parameters must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Standard,
    Habituation,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Standard => "standard",
            ModelKind::Habituation => "habituation",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ModelKind::Standard),
            "habituation" => Ok(ModelKind::Habituation),
            _ => Err(Error::InvalidParameter(format!("unknown model {s:?}"))),
        }
    }
}

/// `Y_it(z) = mu + alpha_i + beta_t + z_t delta + gamma z_{t-1} + eps_it`, with
/// `z_0 = 0`.
pub fn standard_model(params: &ModelParams, n: usize, horizon: usize, seed: u64) -> Result<PotentialOutcomeSchedule> {
    generate(params, n, horizon, seed, |now, prev| now * params.delta + params.gamma * prev)
}

/// `Y_it(z) = mu + alpha_i + beta_t + z_t delta - z_t z_{t-1} rho delta + eps_it`,
/// with `z_0 = 0`.
pub fn habituation_model(params: &ModelParams, n: usize, horizon: usize, seed: u64) -> Result<PotentialOutcomeSchedule> {
    generate(params, n, horizon, seed, |now, prev| {
        now * params.delta - now * prev * params.rho_decay * params.delta
    })
}

pub fn model_schedule(
    kind: ModelKind,
    params: &ModelParams,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<PotentialOutcomeSchedule> {
    match kind {
        ModelKind::Standard => standard_model(params, n, horizon, seed),
        ModelKind::Habituation => habituation_model(params, n, horizon, seed),
    }
}

fn generate(
    params: &ModelParams,
    n: usize,
    horizon: usize,
    seed: u64,
    effect: impl Fn(f64, f64) -> f64,
) -> Result<PotentialOutcomeSchedule> {
    params.validate()?;
    check_horizon(horizon)?;
    if n == 0 {
        return Err(Error::EmptyInput("model with no units".into()));
    }
    let alpha = params.alpha.values(n, "alpha")?;
    let beta = params.beta.values(horizon, "beta")?;
    let normal = (params.noise_sd > 0.0).then(|| Normal::new(0.0, params.noise_sd).expect("valid sd"));
    let shared = match &normal {
        Some(dist) if params.noise == NoiseMode::Shared => {
            let mut r = rng::stream(seed, &[0]);
            Array2::from_shape_fn((n, horizon), |_| dist.sample(&mut r))
        }
        _ => Array2::zeros((n, horizon)),
    };
    let arms = Arm::all(horizon)
        .map(|arm| {
            let z = make_arm_vector(arm, params.family, horizon)?;
            let bits: Vec<f64> = z.bits().iter().map(|&b| f64::from(b)).collect();
            Ok(Array2::from_shape_fn((n, horizon), |(i, s)| {
                let eps = match (&normal, params.noise) {
                    (Some(dist), NoiseMode::PerHistory) => history_noise(dist, seed, i, s, &z.bits()[..=s]),
                    _ => shared[[i, s]],
                };
                let prev = if s == 0 { 0.0 } else { bits[s - 1] };
                (params.mu + alpha[i] + beta[s] + eps) + effect(bits[s], prev)
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    PotentialOutcomeSchedule::from_arms(arms)
}

fn history_noise(dist: &Normal<f64>, seed: u64, unit: usize, period: usize, history: &[u8]) -> f64 {
    let key = history.iter().fold(1u64, |acc, &b| (acc << 1) | u64::from(b));
    let mut r = rng::stream(seed, &[1, unit as u64, period as u64, key]);
    dist.sample(&mut r)
}

/// A random non-anticipating schedule: pulse arm `e_p` copies always-control
/// before `p` and, when `carryover` is `Some(k)`, again from `p + k` on. Values
/// are uniform on `[-5, 5)`.
pub fn random_schedule<R: Rng + ?Sized>(
    n: usize,
    horizon: usize,
    carryover: Option<usize>,
    rng: &mut R,
) -> PotentialOutcomeSchedule {
    let mut draw = |_| rng.random_range(-5.0..5.0);
    let control = Array2::from_shape_fn((n, horizon), &mut draw);
    let treated = Array2::from_shape_fn((n, horizon), &mut draw);
    let pulses = (2..=horizon)
        .map(|p| {
            let fresh = Array2::from_shape_fn((n, horizon), &mut draw);
            Array2::from_shape_fn((n, horizon), |(i, s)| {
                let t = s + 1;
                let worn_off = carryover.is_some_and(|k| p + k <= t);
                if t < p || worn_off {
                    control[[i, s]]
                } else {
                    fresh[[i, s]]
                }
            })
        })
        .collect();
    PotentialOutcomeSchedule::new(control, treated, pulses).expect("consistent shapes")
}

/// One arm's count under one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationRow {
    pub design: String,
    pub horizon: usize,
    pub arm: Arm,
    pub count: f64,
}

/// Unit allocations of the balanced design (integer) and of the plug-in and
/// augmented minimax designs (continuous relaxations), per horizon and arm.
pub fn allocation_table(n: usize, horizons: &[usize]) -> Result<Vec<AllocationRow>> {
    let mut rows = Vec::new();
    for &horizon in horizons {
        let bcrd = RealAllocation::from(&balanced(n, horizon)?);
        let designs = [
            ("bcrd", bcrd),
            ("minimax", relaxed_basic(n as f64, horizon)?),
            ("augmented", relaxed_augmented(n as f64, horizon)?),
        ];
        for (design, alloc) in designs {
            rows.extend(alloc.entries().map(|(arm, count)| AllocationRow {
                design: design.into(),
                horizon,
                arm,
                count,
            }));
        }
    }
    Ok(rows)
}

/// Max-risk ratios against the balanced design at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxRiskRow {
    pub horizon: usize,
    /// `plugin`: the balanced and plug-in minimax designs are scored with the
    /// plug-in estimator. `augmented`: every design is scored with augmented
    /// controls.
    pub baseline: String,
    pub minimax_ratio: f64,
    pub augmented_ratio: f64,
}

/// Ratios of worst-case risk to that of the balanced design, using continuous
/// allocations throughout (`N / (T + 1)` per arm for the balanced design). The
/// augmented minimax design is always scored with augmented controls.
pub fn maxrisk_table(n: usize, horizons: &[usize]) -> Result<Vec<MaxRiskRow>> {
    let plugin = LossSpec::unweighted();
    let augmented = LossSpec {
        estimator: Estimator::Augmented,
        ..plugin
    };
    let mut rows = Vec::new();
    for &horizon in horizons {
        check_horizon(horizon)?;
        if n < horizon + 1 {
            return Err(Error::Infeasible { n, arms: horizon + 1 });
        }
        let bcrd = RealAllocation::from_counts(vec![n as f64 / (horizon + 1) as f64; horizon + 1])?;
        let minimax = relaxed_basic(n as f64, horizon)?;
        let aug = relaxed_augmented(n as f64, horizon)?;
        let aug_risk = max_risk(&aug, 1.0, augmented)?;
        for (baseline, spec) in [("plugin", plugin), ("augmented", augmented)] {
            let base = max_risk(&bcrd, 1.0, spec)?;
            rows.push(MaxRiskRow {
                horizon,
                baseline: baseline.into(),
                minimax_ratio: max_risk(&minimax, 1.0, spec)? / base,
                augmented_ratio: aug_risk / base,
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRiskConfig {
    pub n_list: Vec<usize>,
    pub t_list: Vec<usize>,
    pub model: ModelKind,
    pub params: ModelParams,
    pub reps: usize,
    pub seed: u64,
    /// Loss used to score every design.
    pub loss: LossSpec,
}

impl Default for ExpectedRiskConfig {
    fn default() -> Self {
        Self {
            n_list: vec![100, 200, 500],
            t_list: vec![10, 15, 20, 25, 30],
            model: ModelKind::Standard,
            params: ModelParams::default(),
            reps: 100,
            seed: 0,
            loss: LossSpec::unweighted(),
        }
    }
}

/// Distribution of the loss over replications for one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRiskRow {
    pub n: usize,
    pub horizon: usize,
    pub model: ModelKind,
    pub design: String,
    pub reps: usize,
    pub mean: f64,
    pub sd: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Loss of the plug-in minimax design (exact integer solution) and of the
/// balanced design over `reps` draws of (schedule, assignment). Within a
/// replication both designs see the same schedule and the same random ordering
/// of units; each design's assignment is still a uniform complete
/// randomization.
pub fn expected_risk_comparison(config: &ExpectedRiskConfig) -> Result<Vec<ExpectedRiskRow>> {
    if config.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    config.params.validate()?;
    let loss_spec = config.loss.validate()?;
    let mut rows = Vec::new();
    for &n in &config.n_list {
        for &horizon in &config.t_list {
            let designs = [
                ("minimax", integer_solve(n, horizon, ObjectiveMode::Basic)?),
                ("bcrd", balanced(n, horizon)?),
            ];
            let losses = (0..config.reps as u64)
                .into_par_iter()
                .map(|rep| {
                    let path = [n as u64, horizon as u64, rep];
                    let sched = model_schedule(config.model, &config.params, n, horizon, rng::derive_seed(config.seed, &path))?;
                    let mut order: Vec<usize> = (0..n).collect();
                    order.shuffle(&mut rng::stream(config.seed, &[n as u64, horizon as u64, rep, 1]));
                    designs
                        .iter()
                        .map(|(_, alloc)| loss(&assign_in_order(alloc, &order, config.params.family)?, &sched, loss_spec))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            for (d, (design, _)) in designs.iter().enumerate() {
                let values: Vec<f64> = losses.iter().map(|l| l[d]).collect();
                rows.push(summarize(n, horizon, config.model, design, &values));
            }
        }
    }
    Ok(rows)
}

/// Unit `order[j]` gets the `j`-th label of the allocation's sorted multiset.
fn assign_in_order(alloc: &Allocation, order: &[usize], family: Family) -> Result<AssignmentMatrix> {
    let mut labels = vec![Arm::AlwaysControl; order.len()];
    let sorted = alloc.entries().flat_map(|(arm, c)| std::iter::repeat_n(arm, c));
    for (&unit, arm) in order.iter().zip(sorted) {
        labels[unit] = arm;
    }
    AssignmentMatrix::new(labels, alloc.horizon(), family)
}

fn summarize(n: usize, horizon: usize, model: ModelKind, design: &str, values: &[f64]) -> ExpectedRiskRow {
    let (mean, se) = crate::risk::mean_and_se(values);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    ExpectedRiskRow {
        n,
        horizon,
        model,
        design: design.into(),
        reps: values.len(),
        mean,
        sd: se * (values.len() as f64).sqrt(),
        q05: quantile(&sorted, 0.05),
        q25: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q75: quantile(&sorted, 0.75),
        q95: quantile(&sorted, 0.95),
    }
}

/// Linear interpolation between order statistics of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
