//! Right-continuous step paths and Riemann sums of their functionals.
//!
//! The node chains produced by the splitting construction embed into cadlag
//! (right-continuous, left-limited) piecewise-constant paths, and time
//! functionals such as `integral_0^T V(X_s) ds` become Riemann sums of step
//! functions.  Each jump contributes an `O(1/n)` error to an `n`-point
//! left-endpoint sum and nothing better, so the observable convergence rate
//! of such functionals is exactly first order; [`log_log_slope`] measures
//! it.

use crate::error::{Error, Result};

/// A piecewise-constant cadlag path on `[0, horizon]`.
///
/// The path takes `values[i]` on `[times[i], times[i + 1])` and
/// `values[last]` up to and including the horizon; it is continuous from the
/// right at every jump.
#[derive(Debug, Clone)]
pub struct CadlagPath {
    times: Vec<f64>,
    values: Vec<f64>,
    horizon: f64,
}

impl CadlagPath {
    /// Path starting at `initial` with jumps `(time, new_value)` at strictly
    /// increasing times inside `(0, horizon)`.
    pub fn new(initial: f64, jumps: &[(f64, f64)], horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "path horizon must be positive and finite, got {horizon}"
            )));
        }
        let mut times = Vec::with_capacity(jumps.len() + 1);
        let mut values = Vec::with_capacity(jumps.len() + 1);
        times.push(0.0);
        values.push(initial);
        for &(s, v) in jumps {
            if !(s > *times.last().expect("non-empty") && s < horizon) {
                return Err(Error::InvalidArgument(format!(
                    "jump times must increase strictly inside (0, {horizon}), got {s}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("jump value must be finite, got {v}")));
            }
            times.push(s);
            values.push(v);
        }
        if !initial.is_finite() {
            return Err(Error::InvalidArgument("initial value must be finite".into()));
        }
        Ok(Self { times, values, horizon })
    }

    /// Path holding `values[i]` on the `i`-th of `values.len()` equal
    /// subintervals of `[0, horizon]`; adjacent equal values merge into one
    /// piece.
    pub fn from_uniform_samples(values: &[f64], horizon: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        let step = horizon / values.len() as f64;
        let jumps: Vec<(f64, f64)> = values
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] != w[0])
            .map(|(i, w)| ((i + 1) as f64 * step, w[1]))
            .collect();
        Self::new(values[0], &jumps, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn jump_count(&self) -> usize {
        self.times.len() - 1
    }

    /// Value at time `s` in `[0, horizon]` (right-continuous at jumps).
    pub fn value_at(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0 && s <= self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "time {s} outside the path domain [0, {}]",
                self.horizon
            )));
        }
        // partition_point gives the first index with times[i] > s; the piece
        // in force is the one before it.
        let i = self.times.partition_point(|&u| u <= s);
        Ok(self.values[i - 1])
    }

    /// Exact integral over `[0, horizon]`.
    pub fn integral(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.values.len() {
            let hi = if i + 1 < self.times.len() { self.times[i + 1] } else { self.horizon };
            acc += self.values[i] * (hi - self.times[i]);
        }
        acc
    }

    /// Left-endpoint Riemann sum with `n` uniform panels.
    pub fn riemann_left(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one panel".into()));
        }
        let h = self.horizon / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.value_at(i as f64 * h)?;
        }
        Ok(acc * h)
    }

    /// Breakpoints whose jump magnitude is at least `eps`; always a finite
    /// set for a step path.
    pub fn jump_points(&self, eps: f64) -> Result<Vec<f64>> {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "jump threshold must be positive, got {eps}"
            )));
        }
        Ok((1..self.values.len())
            .filter(|&i| (self.values[i] - self.values[i - 1]).abs() >= eps)
            .map(|i| self.times[i])
            .collect())
    }
}

/// Left-endpoint Riemann sum `((b - a)/n) sum_{k<n} f(a + k (b - a)/n)` of
/// an arbitrary callable.
pub fn riemann_left_sum(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("need a < b, got [{a}, {b}]")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one panel".into()));
    }
    let h = (b - a) / n as f64;
    Ok((0..n).map(|k| f(a + k as f64 * h)).sum::<f64>() * h)
}

/// Least-squares slope of `ln y` against `ln x`; all inputs must be
/// positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs two matched samples at least, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(
            "slope fit needs positive finite samples on both axes".into(),
        ));
    }
    let n = xs.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in xs.iter().zip(ys) {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let denom = n * sxx - sx * sx;
    if denom <= 0.0 {
        return Err(Error::Numeric("slope fit is degenerate: all x equal".into()));
    }
    Ok((n * sxy - sx * sy) / denom)
}
