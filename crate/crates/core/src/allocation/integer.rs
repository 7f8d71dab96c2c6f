use super::objective::TermSet;
use super::{check_horizon, relaxed_for_mode, Allocation, ObjectiveMode};
use crate::error::{Error, Result};

/// `floor(N / (T+1))` units per arm, with the remainder handed out one per arm
/// in canonical order starting from the always-control arm.
pub fn balanced(n: usize, horizon: usize) -> Result<Allocation> {
    check_horizon(horizon)?;
    let arms = horizon + 1;
    if n < arms {
        return Err(Error::Infeasible { n, arms });
    }
    let (q, r) = (n / arms, n % arms);
    let counts: Vec<usize> = (0..arms).map(|i| q + usize::from(i < r)).collect();
    Allocation::from_counts(&counts)
}

fn active_arms(terms: &TermSet, n: usize) -> Result<Vec<usize>> {
    let active: Vec<usize> = (0..=terms.horizon()).filter(|&i| terms.active()[i]).collect();
    if n < active.len() {
        return Err(Error::Infeasible { n, arms: active.len() });
    }
    Ok(active)
}

fn as_f64(counts: &[usize]) -> Vec<f64> {
    counts.iter().map(|&c| c as f64).collect()
}

/// Exhaustive search over all compositions of `N` into positive counts on the
/// arms the objective uses (arms it ignores get zero). Ties go to the
/// lexicographically smallest count vector. Limited to `N <= 60`, `T <= 5`.
pub fn brute_force_opt(n: usize, horizon: usize, mode: ObjectiveMode) -> Result<Allocation> {
    if n > 60 || horizon > 5 {
        return Err(Error::InstanceTooLarge { n, horizon });
    }
    let terms = mode.terms(horizon)?;
    let active = active_arms(&terms, n)?;
    let mut counts = vec![0usize; horizon + 1];
    let mut best: Option<(f64, Vec<usize>)> = None;
    visit(&terms, &active, 0, n, &mut counts, &mut best)?;
    let (_, counts) = best.expect("a feasible composition exists");
    Allocation::from_counts(&counts)
}

/// Enumerate in lexicographic order so the first strict minimum wins ties.
fn visit(
    terms: &TermSet,
    active: &[usize],
    pos: usize,
    remaining: usize,
    counts: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<usize>)>,
) -> Result<()> {
    let arm = active[pos];
    if pos + 1 == active.len() {
        counts[arm] = remaining;
        let f = terms.value(&as_f64(counts))?;
        if best.as_ref().is_none_or(|(b, _)| f < *b) {
            *best = Some((f, counts.clone()));
        }
        return Ok(());
    }
    let left_after = active.len() - pos - 1;
    for c in 1..=remaining - left_after {
        counts[arm] = c;
        visit(terms, active, pos + 1, remaining - c, counts, best)?;
    }
    Ok(())
}

/// Round a relaxed solution to integers with at least one unit per active arm,
/// preserving the total by largest remainders.
fn round_relaxed(x: &[f64], active: &[usize], n: usize) -> Vec<usize> {
    let total: f64 = active.iter().map(|&i| x[i]).sum();
    let target: Vec<f64> = x.iter().map(|v| v * n as f64 / total).collect();
    let mut counts = vec![0usize; x.len()];
    for &i in active {
        counts[i] = (target[i].floor() as usize).max(1);
    }
    let mut by_remainder: Vec<usize> = active.to_vec();
    by_remainder.sort_by(|&a, &b| {
        let ra = target[a] - counts[a] as f64;
        let rb = target[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut sum: usize = counts.iter().sum();
    let mut cursor = 0;
    while sum < n {
        counts[by_remainder[cursor % by_remainder.len()]] += 1;
        sum += 1;
        cursor += 1;
    }
    while sum > n {
        // Take from the arm furthest above its target.
        let &i = active
            .iter()
            .filter(|&&i| counts[i] > 1)
            .max_by(|&&a, &&b| {
                (counts[a] as f64 - target[a])
                    .total_cmp(&(counts[b] as f64 - target[b]))
                    .then(b.cmp(&a))
            })
            .expect("n >= number of active arms");
        counts[i] -= 1;
        sum -= 1;
    }
    counts
}

/// Best single-unit transfer from `counts`, if any strictly improves on `f`.
fn best_transfer(terms: &TermSet, active: &[usize], counts: &[usize], f: f64) -> Result<Option<(f64, Vec<usize>)>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut y = counts.to_vec();
    for &from in active {
        if counts[from] <= 1 {
            continue;
        }
        for &to in active {
            if to == from {
                continue;
            }
            y[from] -= 1;
            y[to] += 1;
            let g = terms.value(&as_f64(&y))?;
            let improves = g < f;
            let beats = best.as_ref().is_none_or(|(b, v)| g < *b || (g == *b && y < *v));
            if improves && beats {
                best = Some((g, y.clone()));
            }
            y[from] += 1;
            y[to] -= 1;
        }
    }
    Ok(best)
}

/// Integer minimizer of the design objective with at least one unit on every
/// arm the objective uses. Starts from the rounded continuous relaxation and
/// applies improving single-unit transfers until none remains; ties among equal
/// objectives are then moved toward the lexicographically smallest vector.
pub fn integer_solve(n: usize, horizon: usize, mode: ObjectiveMode) -> Result<Allocation> {
    let terms = mode.terms(horizon)?;
    let active = active_arms(&terms, n)?;
    let relaxed = match relaxed_for_mode(n as f64, horizon, mode) {
        Ok(r) => r,
        Err(Error::NonConvergence { best, .. }) => best,
        Err(e) => return Err(e),
    };
    let mut x = relaxed.counts().to_vec();
    // A relaxed boundary solution may leave an active arm empty.
    for &i in &active {
        x[i] = x[i].max(f64::MIN_POSITIVE);
    }
    let mut counts = round_relaxed(&x, &active, n);
    let mut f = terms.value(&as_f64(&counts))?;
    while let Some((g, y)) = best_transfer(&terms, &active, &counts, f)? {
        f = g;
        counts = y;
    }
    counts = lexicographic_ties(&terms, &active, counts, f)?;
    Allocation::from_counts(&counts)
}

/// Repeatedly apply objective-neutral transfers that make the vector
/// lexicographically smaller.
fn lexicographic_ties(terms: &TermSet, active: &[usize], mut counts: Vec<usize>, f: f64) -> Result<Vec<usize>> {
    'outer: loop {
        for (a, &from) in active.iter().enumerate() {
            if counts[from] <= 1 {
                continue;
            }
            for &to in &active[a + 1..] {
                let mut y = counts.clone();
                y[from] -= 1;
                y[to] += 1;
                if terms.value(&as_f64(&y))? == f {
                    counts = y;
                    continue 'outer;
                }
            }
        }
        return Ok(counts);
    }
}
