//! Reflection walks on orbits and their weighted counts.
//!
//! A walk starts at a point, applies a sequence of root reflections, and
//! carries the weight `prod (1 + ||x - state|| / sqrt(t))^(-2)` over every
//! state except the final one (an empty walk has weight one).  The admissible
//! weight sum at `(x, y, t)` adds the weights of all walks from `y`, up to a
//! length cutoff, whose final state lies in the closed chamber of `x`.  Two
//! cutoffs matter downstream: `|G|` (short sum) and `2|G|` (full sum); the two
//! are equivalent up to the factor `|R|^(2|G|)`.
//!
//! Walks are counted per root sequence: antipodal roots induce the same
//! reflection but contribute separate sequences.

use super::{ReflectionGroup, RootSystem, Vector, DEDUP_TOL};
use crate::error::{Error, Result};

/// Budget for brute-force enumeration: `|R|^max_len` may not exceed this.
pub const NAIVE_BUDGET: f64 = 1e7;

/// Compensated (Kahan) accumulator; keeps the naive and dynamic-programming
/// sums comparable at 1e-12 even with millions of terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// A concrete reflection walk with its precomputed state trajectory.
#[derive(Debug, Clone)]
pub struct OrbitWalk {
    roots: Vec<usize>,
    states: Vec<Vector>,
}

impl OrbitWalk {
    /// Builds the walk starting at `start` applying the listed roots in order.
    pub fn new(system: &RootSystem, start: Vector, roots: Vec<usize>) -> Result<Self> {
        let mut states = Vec::with_capacity(roots.len() + 1);
        if start.dim() != system.dim() {
            return Err(Error::DimensionMismatch(format!(
                "walk start has dimension {}, system has {}",
                start.dim(),
                system.dim()
            )));
        }
        states.push(start);
        for &i in &roots {
            let alpha = system.roots().get(i).ok_or_else(|| {
                Error::InvalidArgument(format!("root index {i} out of range"))
            })?;
            let next = super::reflect(alpha, states.last().unwrap());
            states.push(next);
        }
        Ok(Self { roots, states })
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// All states, starting point first, final state last.
    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn end(&self) -> &Vector {
        self.states.last().unwrap()
    }

    /// Walk weight relative to observation point `x` at time scale `t`:
    /// the product of `(1 + ||x - state||/sqrt(t))^(-2)` over all states
    /// except the final one.  Empty walk: 1.
    pub fn weight(&self, x: &Vector, t: f64) -> Result<f64> {
        check_time(t)?;
        let inv_sqrt_t = 1.0 / t.sqrt();
        let mut w = 1.0;
        for state in &self.states[..self.states.len() - 1] {
            let u = 1.0 + x.dist(state) * inv_sqrt_t;
            w /= u * u;
        }
        Ok(w)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time scale {t}, expected positive finite")))
    }
}

/// Evaluation strategy for the admissible weight sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumMethod {
    /// Enumerates every root sequence up to the cutoff.  Only permitted while
    /// `|R|^max_len <= NAIVE_BUDGET`; exists as the cross-validation oracle.
    Naive,
    /// Length-stepped dynamic programming over the orbit of the start point.
    Dynamic,
}

/// Sum of walk weights over all walks from `y` of length at most `max_len`
/// whose final state shares a closed chamber with `x`.
pub fn admissible_weight_sum(
    group: &ReflectionGroup,
    x: &Vector,
    y: &Vector,
    t: f64,
    max_len: usize,
    method: SumMethod,
) -> Result<f64> {
    check_time(t)?;
    match method {
        SumMethod::Naive => naive_sum(group.system(), x, y, t, max_len),
        SumMethod::Dynamic => Ok(dynamic_sums(group, x, y, t, &[max_len])?[0]),
    }
}

/// The two standard cutoffs in one dynamic-programming pass:
/// `(sum at 2|G|, sum at |G|)`.
pub fn admissible_sum_pair(
    group: &ReflectionGroup,
    x: &Vector,
    y: &Vector,
    t: f64,
) -> Result<(f64, f64)> {
    let g = group.order();
    let sums = dynamic_sums(group, x, y, t, &[2 * g, g])?;
    Ok((sums[0], sums[1]))
}

fn naive_sum(system: &RootSystem, x: &Vector, y: &Vector, t: f64, max_len: usize) -> Result<f64> {
    let r = system.roots().len() as f64;
    if r.powi(max_len as i32) > NAIVE_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "naive walk enumeration needs |R|^{max_len} = {:.3e} sequences (budget {NAIVE_BUDGET:.0e})",
            r.powi(max_len as i32)
        )));
    }
    let inv_sqrt_t = 1.0 / t.sqrt();
    let mut acc = KahanSum::default();
    // Depth-first over sequences.  `weight` covers all states before the
    // current one, which is exactly the walk weight if the sequence stops
    // here.
    fn rec(
        system: &RootSystem,
        x: &Vector,
        state: &Vector,
        weight: f64,
        depth_left: usize,
        inv_sqrt_t: f64,
        acc: &mut KahanSum,
    ) {
        if system.same_closed_chamber(x, state) {
            acc.add(weight);
        }
        if depth_left == 0 {
            return;
        }
        let u = 1.0 + x.dist(state) * inv_sqrt_t;
        let extended = weight / (u * u);
        for alpha in system.roots() {
            let next = super::reflect(alpha, state);
            rec(system, x, &next, extended, depth_left - 1, inv_sqrt_t, acc);
        }
    }
    rec(system, x, y, 1.0, max_len, inv_sqrt_t, &mut acc);
    let v = acc.value();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric("walk sum overflowed".into()))
    }
}

/// One DP pass reporting the partial sums at each requested cutoff.
fn dynamic_sums(
    group: &ReflectionGroup,
    x: &Vector,
    y: &Vector,
    t: f64,
    cutoffs: &[usize],
) -> Result<Vec<f64>> {
    check_time(t)?;
    let system = group.system();
    let max_len = cutoffs.iter().copied().max().unwrap_or(0);

    // Orbit of y, reachable closure under the reflections (a subset walk
    // states can never leave).
    let mut states: Vec<Vector> = vec![y.clone()];
    let mut cursor = 0;
    while cursor < states.len() {
        let current = states[cursor].clone();
        for alpha in system.roots() {
            let next = super::reflect(alpha, &current);
            if !states.iter().any(|s| s.max_abs_diff(&next) <= DEDUP_TOL) {
                states.push(next);
            }
        }
        cursor += 1;
    }
    let n_states = states.len();

    // Transition table, per-state weight factor, chamber flag.
    let mut transition = vec![0usize; n_states * system.roots().len()];
    for (si, state) in states.iter().enumerate() {
        for (ri, alpha) in system.roots().iter().enumerate() {
            let next = super::reflect(alpha, state);
            let ti = states
                .iter()
                .position(|s| s.max_abs_diff(&next) <= DEDUP_TOL)
                .expect("orbit is closed under reflections");
            transition[si * system.roots().len() + ri] = ti;
        }
    }
    let inv_sqrt_t = 1.0 / t.sqrt();
    let factor: Vec<f64> = states
        .iter()
        .map(|s| {
            let u = 1.0 + x.dist(s) * inv_sqrt_t;
            1.0 / (u * u)
        })
        .collect();
    let admissible: Vec<bool> =
        states.iter().map(|s| system.same_closed_chamber(x, s)).collect();

    // g[s] = sum of weights of length-m walks ending at s; step m -> m+1
    // multiplies by the factor of the pre-final state.
    let mut g = vec![0.0f64; n_states];
    g[0] = 1.0;
    let mut totals = vec![KahanSum::default(); cutoffs.len()];
    let mut next = vec![0.0f64; n_states];
    for m in 0..=max_len {
        let length_total: f64 = {
            let mut s = KahanSum::default();
            for (si, &mass) in g.iter().enumerate() {
                if admissible[si] {
                    s.add(mass);
                }
            }
            s.value()
        };
        for (ci, &cut) in cutoffs.iter().enumerate() {
            if m <= cut {
                totals[ci].add(length_total);
            }
        }
        if m == max_len {
            break;
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for si in 0..n_states {
            let push = g[si] * factor[si];
            if push == 0.0 {
                continue;
            }
            let row = &transition[si * system.roots().len()..(si + 1) * system.roots().len()];
            for &ti in row {
                next[ti] += push;
            }
        }
        std::mem::swap(&mut g, &mut next);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("walk sum overflowed".into()));
        }
    }
    Ok(totals.into_iter().map(|k| k.value()).collect())
}
