use std::f64::consts::SQRT_2;

use super::objective::TermSet;
use super::{check_horizon, check_total, ObjectiveMode, RealAllocation};
use crate::error::{Error, Result};

/// Continuous minimizer of the basic objective: the always arms get
/// `N / (2 + sqrt(2(T-1)))` each and every pulse arm `sqrt(2/(T-1))` times that.
pub fn relaxed_basic(n: f64, horizon: usize) -> Result<RealAllocation> {
    check_total(n)?;
    check_horizon(horizon)?;
    let tm1 = (horizon - 1) as f64;
    let n0 = n / (2.0 + (2.0 * tm1).sqrt());
    let ne = (2.0 / tm1).sqrt() * n0;
    let mut counts = vec![n0, n0];
    counts.extend(std::iter::repeat_n(ne, horizon - 1));
    RealAllocation::from_counts(counts)
}

/// The backward sequence `c_T = 1`,
/// `c_t = [1/c_{t+1}^2 + 1/(1 + ell sum_{t'>t} c_t')^2]^{-1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CSequence {
    horizon: usize,
    ell: f64,
    values: Vec<f64>,
}

impl CSequence {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    /// `c_2..c_T`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `c_t` for `t` in `2..=T`.
    pub fn get(&self, t: usize) -> f64 {
        self.values[t - 2]
    }

    /// `sum_{t' >= t} c_t'`.
    pub fn sum_from(&self, t: usize) -> f64 {
        self.values[t - 2..].iter().sum()
    }

    /// Relative residual of the defining recursion at each `t < T`.
    pub fn residuals(&self) -> Vec<f64> {
        (2..self.horizon)
            .map(|t| {
                let tail = 1.0 + self.ell * self.sum_from(t + 1);
                let rhs = (1.0 / self.get(t + 1).powi(2) + 1.0 / (tail * tail)).powf(-0.5);
                (self.get(t) - rhs).abs() / rhs
            })
            .collect()
    }
}

pub fn c_sequence(horizon: usize, ell: f64) -> Result<CSequence> {
    check_horizon(horizon)?;
    if !(ell.is_finite() && ell > 0.0) {
        return Err(Error::InvalidParameter(format!("ell must be positive and finite, got {ell}")));
    }
    let mut rev = vec![1.0];
    let mut tail_sum = 1.0;
    for _ in 2..horizon {
        let prev = *rev.last().unwrap();
        let tail = 1.0 + ell * tail_sum;
        let c = (1.0 / (prev * prev) + 1.0 / (tail * tail)).powf(-0.5);
        rev.push(c);
        tail_sum += c;
    }
    rev.reverse();
    Ok(CSequence {
        horizon,
        ell,
        values: rev,
    })
}

/// Continuous minimizer of the augmented-controls objective.
pub fn relaxed_augmented(n: f64, horizon: usize) -> Result<RealAllocation> {
    check_total(n)?;
    let c = c_sequence(horizon, SQRT_2)?;
    let tm1 = (horizon - 1) as f64;
    let rest: f64 = if horizon >= 3 { c.sum_from(3) } else { 0.0 };
    let n0 = n / (1.0 + (tm1.sqrt() + SQRT_2) * c.get(2) + SQRT_2 * rest);
    let pulses: Vec<f64> = c.values().iter().map(|ct| n0 * SQRT_2 * ct).collect();
    let n1 = n - n0 * (1.0 + SQRT_2 * c.sum_from(2));
    let mut counts = vec![n0, n1];
    counts.extend(pulses);
    RealAllocation::from_counts(counts)
}

/// Continuous minimizer of the `rho`-weighted objective. At `rho = 0` the
/// always-treated arm is empty, at `rho = 1` the always-control arm is.
pub fn relaxed_weighted(n: f64, horizon: usize, rho: f64) -> Result<RealAllocation> {
    check_total(n)?;
    check_horizon(horizon)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidWeight(rho));
    }
    let tm1 = (horizon - 1) as f64;
    if rho == 1.0 {
        // Only (T-1)/N1 + sum 1/N_et remains.
        let ne = n / (tm1.sqrt() + tm1);
        let mut counts = vec![0.0, tm1.sqrt() * ne];
        counts.extend(std::iter::repeat_n(ne, horizon - 1));
        return RealAllocation::from_counts(counts);
    }
    let ell = 1.0 / (1.0 - rho).sqrt();
    let c = c_sequence(horizon, ell)?;
    let root = (rho * tm1).sqrt();
    let rest: f64 = if horizon >= 3 { c.sum_from(3) } else { 0.0 };
    let n0 = n / (1.0 + ell * (1.0 + root) * c.get(2) + ell * rest);
    let pulses: Vec<f64> = c.values().iter().map(|ct| n0 * ell * ct).collect();
    // Equivalent to N - N0 (1 + ell sum c_t) and exactly zero at rho = 0.
    let n1 = root * pulses[0];
    let mut counts = vec![n0, n1];
    counts.extend(pulses);
    RealAllocation::from_counts(counts)
}

const SOLVER_MAX_ITER: usize = 100_000;
const SOLVER_GAP_TOL: f64 = 1e-10;

/// Continuous minimizer of the recycling objective, found numerically.
pub fn relaxed_recycling(n: f64, horizon: usize, k: usize) -> Result<RealAllocation> {
    let mode = ObjectiveMode::Recycling { k }.validate()?;
    let start = relaxed_augmented(n, horizon)?;
    relaxed_numeric(n, horizon, mode, Some(&start))
}

/// Continuous relaxation for any mode: closed forms where they exist, the
/// numerical solver for recycling.
pub fn relaxed_for_mode(n: f64, horizon: usize, mode: ObjectiveMode) -> Result<RealAllocation> {
    match mode.validate()? {
        ObjectiveMode::Basic => relaxed_basic(n, horizon),
        ObjectiveMode::Augmented => relaxed_augmented(n, horizon),
        ObjectiveMode::Weighted { rho } => relaxed_weighted(n, horizon, rho),
        ObjectiveMode::Recycling { k } => relaxed_recycling(n, horizon, k),
    }
}

/// Minimize any mode's objective over `{x >= 0, sum x = n}` by pairwise
/// coordinate descent: each step moves mass from the arm with the largest
/// gradient component (among arms holding mass) to the one with the smallest,
/// with an exact line search along that direction. Arms absent from every term
/// stay at zero.
///
/// Stops when the spread of active gradient components falls below `1e-10`
/// of their magnitude. Fails with [`Error::NonConvergence`] after `10^5` steps.
pub fn relaxed_numeric(
    n: f64,
    horizon: usize,
    mode: ObjectiveMode,
    start: Option<&RealAllocation>,
) -> Result<RealAllocation> {
    check_total(n)?;
    let terms = mode.terms(horizon)?;
    let active: Vec<usize> = (0..=horizon).filter(|&i| terms.active()[i]).collect();
    let mut x = vec![0.0; horizon + 1];
    match start {
        Some(s) if s.horizon() == horizon && active.iter().all(|&i| s.counts()[i] > 0.0) => {
            let total: f64 = active.iter().map(|&i| s.counts()[i]).sum();
            for &i in &active {
                x[i] = s.counts()[i] * n / total;
            }
        }
        _ => {
            for &i in &active {
                x[i] = n / active.len() as f64;
            }
        }
    }
    let mut best = terms.value(&x)?;
    for _ in 0..SOLVER_MAX_ITER {
        let g = terms.gradient(&x)?;
        let receiver = *active
            .iter()
            .min_by(|&&a, &&b| g[a].total_cmp(&g[b]))
            .expect("at least one active arm");
        let Some(donor) = active
            .iter()
            .copied()
            .filter(|&i| x[i] > 0.0 && i != receiver)
            .max_by(|&a, &b| g[a].total_cmp(&g[b]))
        else {
            break;
        };
        let scale = active.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
        if g[donor] - g[receiver] <= SOLVER_GAP_TOL * scale {
            return RealAllocation::from_counts(x);
        }
        let step = line_search(&terms, &x, donor, receiver)?;
        if step <= 0.0 {
            break;
        }
        x[donor] = if step >= x[donor] { 0.0 } else { x[donor] - step };
        x[receiver] += step;
        best = terms.value(&x)?;
    }
    Err(Error::NonConvergence {
        iterations: SOLVER_MAX_ITER,
        best_objective: best,
        best: RealAllocation::from_counts(x)?,
    })
}

/// Minimizer of `d -> f(x + d (e_to - e_from))` over `0 < d <= x[from]`; the
/// function is convex along the line.
fn line_search(terms: &TermSet, x: &[f64], from: usize, to: usize) -> Result<f64> {
    let at = |d: f64| -> Option<Vec<f64>> {
        let mut y = x.to_vec();
        y[from] = (x[from] - d).max(0.0);
        y[to] = x[to] + d;
        Some(y)
    };
    let deriv = |d: f64| -> Option<(f64, f64)> { terms.transfer_derivatives(&at(d)?, from, to).ok() };
    let (mut lo, mut hi) = (0.0, x[from]);
    // Emptying the donor is optimal if the slope is still non-positive there.
    if let Some((d1, _)) = deriv(hi) {
        if d1 <= 0.0 {
            return Ok(hi);
        }
    }
    let mut d = 0.0;
    for _ in 0..200 {
        let Some((d1, d2)) = deriv(d) else {
            hi = d;
            d = 0.5 * (lo + hi);
            continue;
        };
        if d1 < 0.0 {
            lo = d;
        } else if d1 > 0.0 {
            hi = d;
        } else {
            return Ok(d);
        }
        let newton = d - d1 / d2;
        d = if d2 > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo <= 4.0 * f64::EPSILON * hi.max(x[to]) {
            break;
        }
    }
    Ok(lo.max(d.min(hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::{objective, objective_gradient};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn basic_headline_numbers() {
        let r = relaxed_basic(10000.0, 30).unwrap();
        assert!((r.n0() - 1040.0).abs() < 0.5);
        assert_eq!(r.n0(), r.n1());
        assert!(r.pulses().iter().all(|&p| (p - 273.0).abs() < 0.5));
        assert!(rel(r.total(), 10000.0) < 1e-12);

        let r = relaxed_basic(4.0, 2).unwrap();
        assert!((r.n0() - 4.0 / (2.0 + SQRT_2)).abs() < 1e-12);
        assert!((r.pulse(2) - 1.656854).abs() < 1e-6);
    }

    #[test]
    fn c_sequence_examples() {
        assert_eq!(c_sequence(2, SQRT_2).unwrap().values(), &[1.0]);
        let c = c_sequence(3, SQRT_2).unwrap();
        let expected = (1.0 + 1.0 / (1.0 + SQRT_2).powi(2)).powf(-0.5);
        assert!((c.get(2) - expected).abs() < 1e-15);
        assert!((c.get(2) - 0.92388).abs() < 1e-5);
        let c = c_sequence(10, SQRT_2).unwrap();
        assert!(c.values().iter().all(|&v| v > 0.0 && v <= 1.0));
        assert!(c.residuals().iter().all(|&r| r < 1e-12));
        assert!(c_sequence(5, 0.0).is_err());
    }

    #[test]
    fn augmented_small_example() {
        let r = relaxed_augmented(100.0, 3).unwrap();
        assert!((r.n0() - 19.8912367379658).abs() < 1e-9);
        assert!((r.n1() - 25.989153247414492).abs() < 1e-9);
        assert!((r.pulse(2) - 25.989153247414503).abs() < 1e-9);
        assert!((r.pulse(3) - 28.1304567672052).abs() < 1e-9);
        assert!(rel(r.total(), 100.0) < 1e-12);
    }

    #[test]
    fn augmented_pulses_increase() {
        for t in 2..=50 {
            let r = relaxed_augmented(1000.0, t).unwrap();
            assert!(r.pulses().windows(2).all(|w| w[0] <= w[1]), "T={t}");
            assert!(rel(r.total(), 1000.0) < 1e-12);
        }
    }

    #[test]
    fn weighted_boundaries_and_midpoint() {
        for t in [2, 3, 7, 30] {
            let a = relaxed_augmented(500.0, t).unwrap();
            let w = relaxed_weighted(500.0, t, 0.5).unwrap();
            for (x, y) in a.counts().iter().zip(w.counts()) {
                assert!(rel(*y, *x) < 1e-12);
            }
            assert_eq!(relaxed_weighted(500.0, t, 0.0).unwrap().n1(), 0.0);
            let one = relaxed_weighted(500.0, t, 1.0).unwrap();
            assert_eq!(one.n0(), 0.0);
            assert!(rel(one.total(), 500.0) < 1e-12);
        }
        assert!(relaxed_weighted(10.0, 3, 1.2).is_err());
    }

    #[test]
    fn weighted_approaches_boundary_continuously() {
        let near = relaxed_weighted(100.0, 6, 1.0 - 1e-9).unwrap();
        let at = relaxed_weighted(100.0, 6, 1.0).unwrap();
        for (x, y) in near.counts().iter().zip(at.counts()) {
            assert!((x - y).abs() < 1e-3);
        }
    }

    fn assert_stationary(r: &RealAllocation, mode: ObjectiveMode, tol: f64) {
        let g = objective_gradient(r, mode).unwrap();
        let active: Vec<f64> = g.iter().zip(r.counts()).filter(|(_, &c)| c > 0.0).map(|(g, _)| *g).collect();
        let mean = active.iter().sum::<f64>() / active.len() as f64;
        for v in &active {
            assert!(rel(*v, mean) < tol, "{mode}: {g:?}");
        }
        // Empty arms must not want mass.
        for (gi, &c) in g.iter().zip(r.counts()) {
            if c == 0.0 {
                assert!(*gi >= mean * (1.0 + tol) || *gi == 0.0, "{mode}: {g:?}");
            }
        }
    }

    #[test]
    fn closed_forms_are_stationary() {
        for t in [2, 3, 5, 10, 50] {
            assert_stationary(&relaxed_basic(1000.0, t).unwrap(), ObjectiveMode::Basic, 1e-8);
            assert_stationary(&relaxed_augmented(1000.0, t).unwrap(), ObjectiveMode::Augmented, 1e-8);
            for rho in [0.0, 0.3, 0.5, 0.8, 1.0] {
                let r = relaxed_weighted(1000.0, t, rho).unwrap();
                let mode = ObjectiveMode::Weighted { rho };
                let g = objective_gradient(&r, mode).unwrap();
                let live: Vec<f64> = (0..=t).filter(|&i| r.counts()[i] > 0.0).map(|i| g[i]).collect();
                let mean = live.iter().sum::<f64>() / live.len() as f64;
                assert!(live.iter().all(|v| rel(*v, mean) < 1e-8), "T={t} rho={rho}: {g:?}");
            }
        }
    }

    #[test]
    fn numeric_solver_reproduces_closed_forms() {
        for t in [2, 3, 6, 12] {
            for mode in [
                ObjectiveMode::Basic,
                ObjectiveMode::Augmented,
                ObjectiveMode::Weighted { rho: 0.2 },
                ObjectiveMode::Weighted { rho: 0.0 },
                ObjectiveMode::Weighted { rho: 1.0 },
            ] {
                let closed = relaxed_for_mode(300.0, t, mode).unwrap();
                let numeric = relaxed_numeric(300.0, t, mode, None).unwrap();
                for (a, b) in closed.counts().iter().zip(numeric.counts()) {
                    assert!((a - b).abs() < 1e-6 * 300.0, "T={t} {mode}: {closed:?} vs {numeric:?}");
                }
            }
        }
    }

    #[test]
    fn recycling_solution() {
        for t in [2, 3, 4, 6] {
            let a = relaxed_augmented(60.0, t).unwrap();
            let fa = objective(&a, ObjectiveMode::Augmented).unwrap();
            for k in 1..=t {
                let mode = ObjectiveMode::Recycling { k };
                let r = relaxed_recycling(60.0, t, k).unwrap();
                assert!(rel(r.total(), 60.0) < 1e-9);
                assert!(r.counts().iter().all(|&c| c >= 0.0));
                assert!(objective(&r, mode).unwrap() <= fa * (1.0 + 1e-12));
                assert_stationary(&r, mode, 1e-8);
                if k + 1 >= t {
                    for (x, y) in a.counts().iter().zip(r.counts()) {
                        assert!(rel(*y, *x) < 1e-6, "T={t} k={k}");
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_is_linear() {
        for s in [0.5, 2.0, 8.0] {
            for mode in [ObjectiveMode::Basic, ObjectiveMode::Augmented, ObjectiveMode::Weighted { rho: 0.7 }] {
                let a = relaxed_for_mode(96.0, 7, mode).unwrap();
                let b = relaxed_for_mode(96.0 * s, 7, mode).unwrap();
                for (x, y) in a.counts().iter().zip(b.counts()) {
                    assert_eq!(x * s, *y);
                }
            }
        }
    }
}
