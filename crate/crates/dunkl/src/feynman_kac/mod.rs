//! Monte Carlo estimation of discretized Feynman-Kac functionals.
//!
//! The splitting product behind [`crate::schrodinger`] has a probabilistic
//! twin: run the Markov chain whose one-step transition density from `x` is
//! `h_s(x, .) w(.)`, accumulate `exp(-s sum_k V(X_k))` along the chain, and
//! evaluate a terminal function at the end point.  For product systems the
//! density factorizes over coordinates, so each step draws one coordinate at
//! a time from a tabulated inverse CDF.  Estimates are deterministic given a
//! seed: every path owns a counter-derived random stream, so the worker
//! count never changes the result.
//!
//! The [`cadlag`] submodule holds the right-continuous step paths and
//! Riemann-sum utilities used to study time-discretization rates.

pub mod cadlag;

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::heat::HeatKernelEvaluator;
use crate::quad::GaussLegendre;
use crate::rootsystem::Vector;
use crate::schrodinger::{Potential, PotentialKind};

pub use cadlag::{log_log_slope, CadlagPath};

/// Panels per inverse-CDF table; the table spans `[-radius, radius]`.
pub const TABLE_RESOLUTION: usize = 4096;

/// Largest tolerated transition mass outside the sampling box, per step.
const CLIP_TOL: f64 = 1e-6;

/// One-coordinate CDF of the transition density, tabulated on a uniform
/// partition of `[lo, lo + TABLE_RESOLUTION * panel]`.
struct CdfTable {
    /// `cdf[j]` is the normalized mass of `[lo, lo + j * panel]`; entry `0`
    /// is `0` and the last entry is exactly `1`.
    cdf: Vec<f64>,
    lo: f64,
    panel: f64,
}

impl CdfTable {
    /// Piecewise-linear inverse at `u` in `[0, 1)`.
    fn draw(&self, u: f64) -> f64 {
        // First knot strictly above u; the panel below it has positive mass
        // because cdf[idx - 1] <= u < cdf[idx].
        let idx = self.cdf.partition_point(|&c| c <= u);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        self.lo + ((idx - 1) as f64 + (u - c0) / (c1 - c0)) * self.panel
    }

    /// Piecewise-linear CDF value at `y`, clamped to the table span.
    fn evaluate(&self, y: f64) -> f64 {
        let pos = ((y - self.lo) / self.panel).clamp(0.0, (self.cdf.len() - 1) as f64);
        let j = (pos.floor() as usize).min(self.cdf.len() - 2);
        let frac = pos - j as f64;
        self.cdf[j] + frac * (self.cdf[j + 1] - self.cdf[j])
    }
}

/// Sampler for one chain step of length `step`: from state `x`, each
/// coordinate of the successor is drawn from the density
/// `y -> exp(coordinate log heat factor) * 2^k |y|^{2k}` on
/// `[-radius, radius]`.
///
/// Tables are built lazily per coordinate and per source value snapped to
/// the nearest multiple of `source_quantum`, and shared read-mostly across
/// threads.  Snapping perturbs each step by at most half a quantum, so the
/// quantum should stay at or below the spatial resolution of interest.  A
/// table whose in-box mass misses `1` by more than `1e-6` aborts sampling
/// with a domain error instead of silently clipping the tail.
pub struct TransitionSampler<'a> {
    ev: &'a HeatKernelEvaluator,
    step: f64,
    radius: f64,
    quantum: f64,
    cache: RwLock<HashMap<(usize, i64), Arc<CdfTable>>>,
}

impl<'a> TransitionSampler<'a> {
    pub fn new(
        ev: &'a HeatKernelEvaluator,
        step: f64,
        radius: f64,
        source_quantum: f64,
    ) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "transition step must be positive and finite, got {step}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sampling radius must be positive and finite, got {radius}"
            )));
        }
        if !(source_quantum > 0.0 && source_quantum.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "source quantum must be positive and finite, got {source_quantum}"
            )));
        }
        let panel = 2.0 * radius / TABLE_RESOLUTION as f64;
        if panel > 0.9 * step.sqrt() {
            return Err(Error::InvalidArgument(format!(
                "table panel {panel:.3e} cannot resolve a step of length {step:.3e}; \
                 shrink the radius or take longer steps"
            )));
        }
        Ok(Self { ev, step, radius, quantum: source_quantum, cache: RwLock::new(HashMap::new()) })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn source_quantum(&self) -> f64 {
        self.quantum
    }

    /// One draw of the successor state of `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &Vector, rng: &mut R) -> Result<Vector> {
        let dim = self.ev.system().dim();
        if x.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "state has dimension {}, system has {dim}",
                x.dim()
            )));
        }
        let mut coords = Vec::with_capacity(dim);
        for axis in 0..dim {
            if x[axis].abs() > self.radius {
                return Err(Error::InvalidArgument(format!(
                    "state coordinate {} lies outside the sampling box of radius {}",
                    x[axis], self.radius
                )));
            }
            let table = self.table(axis, x[axis])?;
            let u: f64 = rng.gen();
            coords.push(table.draw(u));
        }
        Ok(Vector::new(coords))
    }

    /// Chain of `n` steps started at `x`; the states never leave the
    /// sampling box by construction.
    pub fn sample_path<R: Rng + ?Sized>(
        &self,
        x: &Vector,
        n: usize,
        rng: &mut R,
    ) -> Result<PathSample> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one chain step".into()));
        }
        let mut states = Vec::with_capacity(n + 1);
        states.push(x.clone());
        for _ in 0..n {
            let next = self.sample(states.last().expect("non-empty"), rng)?;
            states.push(next);
        }
        let times = (0..=n).map(|i| i as f64 * self.step).collect();
        Ok(PathSample { times, states })
    }

    /// Tabulated CDF of the next value of coordinate `axis` given the
    /// current value `source`, evaluated at `y`.
    pub fn transition_cdf(&self, axis: usize, source: f64, y: f64) -> Result<f64> {
        Ok(self.table(axis, source)?.evaluate(y))
    }

    /// Quantile function matching [`Self::transition_cdf`]; `u` in `[0, 1)`.
    pub fn transition_quantile(&self, axis: usize, source: f64, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::InvalidArgument(format!("quantile level {u} outside [0, 1)")));
        }
        Ok(self.table(axis, source)?.draw(u))
    }

    fn table(&self, axis: usize, source: f64) -> Result<Arc<CdfTable>> {
        if axis >= self.ev.system().dim() {
            return Err(Error::InvalidArgument(format!(
                "axis {axis} out of range for dimension {}",
                self.ev.system().dim()
            )));
        }
        let bucket = (source / self.quantum).round() as i64;
        let key = (axis, bucket);
        if let Some(t) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(t));
        }
        let built = Arc::new(self.build_table(axis, bucket as f64 * self.quantum)?);
        let mut map = self.cache.write().expect("cache lock poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    /// Panel masses by 4-point Gauss rules; panels are far narrower than the
    /// density scale `sqrt(step)` (enforced at construction), so the
    /// quadrature error sits orders below the clip tolerance.
    fn build_table(&self, axis: usize, source: f64) -> Result<CdfTable> {
        let k = self.ev.system().multiplicities()[axis];
        let rule = GaussLegendre::new(4);
        let panel = 2.0 * self.radius / TABLE_RESOLUTION as f64;
        // Rigorous panel skip: the coordinate factor is bounded by
        // exp(cap - gap^2 / 4s) with gap the |.|-distance to the source, and
        // the weight by 2^k max(1, radius)^{2k}.
        let ln_cap = 2.0
            + (k + 0.5) * (2.0 * self.step).ln().abs()
            + k * std::f64::consts::LN_2
            + 2.0 * k * self.radius.max(1.0).ln();
        let mut cdf = vec![0.0f64; TABLE_RESOLUTION + 1];
        let mut acc = 0.0f64;
        for j in 0..TABLE_RESOLUTION {
            let a = -self.radius + j as f64 * panel;
            let b = a + panel;
            let (lo_abs, hi_abs) = if a >= 0.0 {
                (a, b)
            } else if b <= 0.0 {
                (-b, -a)
            } else {
                (0.0, (-a).max(b))
            };
            let gap = source.abs() - source.abs().clamp(lo_abs, hi_abs);
            if ln_cap - gap * gap / (4.0 * self.step) > -745.0 {
                let mid = 0.5 * (a + b);
                let half = 0.5 * (b - a);
                for (node, wq) in rule.nodes().iter().zip(rule.weights()) {
                    let y = mid + half * node;
                    let ln_f = self.ev.coordinate_log_heat_factor(axis, source, y, self.step)?;
                    let ln_w = if k == 0.0 {
                        0.0
                    } else {
                        k * std::f64::consts::LN_2 + 2.0 * k * y.abs().ln()
                    };
                    acc += wq * half * (ln_f + ln_w).exp();
                }
            }
            cdf[j + 1] = acc;
        }
        let clip = 1.0 - acc;
        if !(clip.abs() <= CLIP_TOL) {
            return Err(Error::DomainTooSmall {
                detail: format!(
                    "transition density from coordinate value {source:.3} integrates to \
                     {acc:.9} over the sampling box at step {:.3e}; the clipped tail \
                     exceeds {CLIP_TOL:.0e}",
                    self.step
                ),
                suggested_radius: source.abs() + 12.0 * self.step.sqrt() + 1.0,
            });
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(CdfTable { cdf, lo: -self.radius, panel })
    }
}

/// States of one sampled chain, `states[i]` at time `times[i] = i * step`.
#[derive(Debug, Clone)]
pub struct PathSample {
    times: Vec<f64>,
    states: Vec<Vector>,
}

impl PathSample {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    pub fn terminal(&self) -> &Vector {
        self.states.last().expect("paths hold at least the start state")
    }
}

/// Parameters of a Feynman-Kac estimate.
#[derive(Debug, Clone)]
pub struct FKConfig {
    /// Total time horizon.
    pub t: f64,
    /// Chain steps per path; the step length is `t / n_steps`.
    pub n_steps: usize,
    /// Independent paths; at least 2 so the standard error is defined.
    pub n_paths: usize,
    /// Seed of the per-path random streams.
    pub seed: u64,
    /// Half-width of the sampling box.
    pub radius: f64,
    /// Source snap width for transition-table reuse.
    pub source_quantum: f64,
}

/// Monte Carlo estimate with its sampling uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct FKEstimate {
    pub mean: f64,
    /// Sample standard deviation divided by `sqrt(n_paths)`.
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

/// Sample mean of `exp(-(t/n) sum_{k=1}^{n} V(X_k)) * terminal(X_n)` over
/// the transition chain started at `x`.
///
/// The weight accumulates the potential at the states after each step, which
/// is the left Riemann sum of `V` along the path; pair it with the left
/// splitting of the kernel construction for like-for-like comparisons.  The
/// potential must be bounded (truncate unbounded ones first).  Paths are
/// estimated in parallel, each on its own random stream derived from
/// `(seed, path index)`, and reduced pairwise in path order, so the estimate
/// is bit-identical for every thread count.
pub fn fk_estimate(
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    x: &Vector,
    config: &FKConfig,
    terminal: impl Fn(&Vector) -> f64 + Sync,
) -> Result<FKEstimate> {
    if config.n_steps == 0 {
        return Err(Error::InvalidArgument("need at least one chain step".into()));
    }
    if config.n_paths < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two paths for a standard error, got {}",
            config.n_paths
        )));
    }
    if !(config.t > 0.0 && config.t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time horizon must be positive and finite, got {}",
            config.t
        )));
    }
    if !potential.is_bounded() {
        return Err(Error::InvalidArgument(
            "path weights need a bounded potential; truncate it first".into(),
        ));
    }
    if let PotentialKind::BallIndicator { center, .. } = potential.kind() {
        if center.dim() != x.dim() {
            return Err(Error::DimensionMismatch(format!(
                "potential center has dimension {}, start point has {}",
                center.dim(),
                x.dim()
            )));
        }
    }
    let tau = config.t / config.n_steps as f64;
    let sampler = TransitionSampler::new(ev, tau, config.radius, config.source_quantum)?;
    let weights = (0..config.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(path as u64);
            let mut state = x.clone();
            let mut occupation = 0.0;
            for _ in 0..config.n_steps {
                state = sampler.sample(&state, &mut rng)?;
                occupation += potential.evaluate(&state);
            }
            Ok((-tau * occupation).exp() * terminal(&state))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = pairwise_sum(&weights) / config.n_paths as f64;
    let deviations: Vec<f64> = weights.iter().map(|w| (w - mean) * (w - mean)).collect();
    let variance = pairwise_sum(&deviations) / (config.n_paths - 1) as f64;
    Ok(FKEstimate {
        mean,
        std_error: (variance / config.n_paths as f64).sqrt(),
        n_paths: config.n_paths,
        n_steps: config.n_steps,
        seed: config.seed,
    })
}

/// Recursive pairwise summation: a deterministic function of the slice order
/// with `O(log n)` rounding depth.
fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::ProductRank1System;
    use crate::schrodinger::{trotter_kernel, SpaceGrid, Splitting};

    fn evaluator(ks: &[f64]) -> HeatKernelEvaluator {
        HeatKernelEvaluator::with_defaults(ProductRank1System::new(ks).unwrap()).unwrap()
    }

    fn ks_distance(draws: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
        draws.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
        let n = draws.len() as f64;
        let mut worst = 0.0f64;
        for (i, &y) in draws.iter().enumerate() {
            let c = cdf(y);
            worst = worst.max((c - i as f64 / n).abs()).max(((i + 1) as f64 / n - c).abs());
        }
        worst
    }

    #[test]
    fn cdf_tables_are_monotone_with_unit_endpoints() {
        let ev = evaluator(&[1.5]);
        let sampler = TransitionSampler::new(&ev, 0.25, 8.0, 0.05).unwrap();
        assert_eq!(sampler.transition_cdf(0, 0.7, -8.0).unwrap(), 0.0);
        let top = sampler.transition_cdf(0, 0.7, 8.0).unwrap();
        assert!((top - 1.0).abs() <= 1e-9, "top {top}");
        let mut last = 0.0;
        for i in 0..=400 {
            let y = -8.0 + i as f64 * 0.04;
            let c = sampler.transition_cdf(0, 0.7, y).unwrap();
            assert!(c >= last, "cdf decreases at {y}: {c} < {last}");
            last = c;
        }
        // Quantile and CDF invert each other on the table's resolution.
        for u in [0.001, 0.1, 0.5, 0.9, 0.999] {
            let y = sampler.transition_quantile(0, 0.7, u).unwrap();
            let c = sampler.transition_cdf(0, 0.7, y).unwrap();
            assert!((c - u).abs() < 1e-9, "round trip {u} -> {y} -> {c}");
        }
        assert!(sampler.transition_quantile(0, 0.7, 1.0).is_err());
        assert!(sampler.transition_cdf(1, 0.0, 0.0).is_err());
    }

    #[test]
    fn draws_match_the_tabulated_distribution() {
        let ev = evaluator(&[1.5]);
        let sampler = TransitionSampler::new(&ev, 0.25, 8.0, 0.05).unwrap();
        let x = Vector::scalar(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut draws: Vec<f64> =
            (0..100_000).map(|_| sampler.sample(&x, &mut rng).unwrap()[0]).collect();
        let ks = ks_distance(&mut draws, |y| sampler.transition_cdf(0, 0.7, y).unwrap());
        assert!(ks <= 0.01, "KS distance {ks}");
    }

    #[test]
    fn draw_moments_match_quadrature() {
        let ev = evaluator(&[1.0]);
        let step = 0.25;
        let sampler = TransitionSampler::new(&ev, step, 8.0, 0.05).unwrap();

        // From the origin the density is even, so the mean is 0.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let origin = Vector::scalar(0.0);
        let n = 40_000;
        let draws: Vec<f64> = (0..n).map(|_| sampler.sample(&origin, &mut rng).unwrap()[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} vs SE {se}");

        // Second moment from a shifted source against direct quadrature of
        // y^2 exp(log factor) 2 y^2.
        let source = 0.7f64;
        let rule = GaussLegendre::new(16);
        let mut second = 0.0;
        let panels = 400;
        for p in 0..panels {
            let a = -8.0 + 16.0 * p as f64 / panels as f64;
            let b = a + 16.0 / panels as f64;
            second += rule.integrate(a, b, |y| {
                let ln = ev.coordinate_log_heat_factor(0, source, y, step).unwrap();
                y * y * (ln + std::f64::consts::LN_2 + 2.0 * y.abs().ln()).exp()
            });
        }
        let shifted = Vector::scalar(source);
        let draws2: Vec<f64> =
            (0..n).map(|_| sampler.sample(&shifted, &mut rng).unwrap()[0]).collect();
        let m2 = draws2.iter().map(|d| d * d).sum::<f64>() / n as f64;
        let var2 = draws2.iter().map(|d| (d * d - m2) * (d * d - m2)).sum::<f64>()
            / (n - 1) as f64;
        let se2 = (var2 / n as f64).sqrt();
        assert!((m2 - second).abs() <= 3.0 * se2, "moment {m2} vs {second} (SE {se2})");
    }

    #[test]
    fn chain_marginal_matches_the_one_step_density() {
        // Four steps of 0.25 compose to the time-1 transition; compare the
        // empirical terminal law against the single-step table at t = 1.
        let ev = evaluator(&[1.5]);
        let chain = TransitionSampler::new(&ev, 0.25, 10.0, 0.05).unwrap();
        let one = TransitionSampler::new(&ev, 1.0, 10.0, 0.05).unwrap();
        let x = Vector::scalar(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut terminals: Vec<f64> = (0..10_000)
            .map(|_| chain.sample_path(&x, 4, &mut rng).unwrap().terminal()[0])
            .collect();
        let ks = ks_distance(&mut terminals, |y| one.transition_cdf(0, 0.0, y).unwrap());
        assert!(ks <= 0.02, "KS distance {ks}");
    }

    #[test]
    fn one_step_paths_reduce_to_single_draws() {
        let ev = evaluator(&[0.5]);
        let sampler = TransitionSampler::new(&ev, 0.5, 8.0, 0.1).unwrap();
        let x = Vector::scalar(1.2);
        let mut rng_a = ChaCha8Rng::seed_from_u64(9);
        let mut rng_b = ChaCha8Rng::seed_from_u64(9);
        let path = sampler.sample_path(&x, 1, &mut rng_a).unwrap();
        let single = sampler.sample(&x, &mut rng_b).unwrap();
        assert_eq!(path.states().len(), 2);
        assert_eq!(path.times(), &[0.0, 0.5]);
        assert_eq!(path.terminal()[0], single[0]);
    }

    #[test]
    fn estimator_is_exact_for_flat_weights() {
        let ev = evaluator(&[1.0]);
        let config = FKConfig {
            t: 2.0,
            n_steps: 16,
            n_paths: 64,
            seed: 4,
            radius: 10.0,
            source_quantum: 0.1,
        };
        let zero = Potential::constant(0.0).unwrap();
        let est = fk_estimate(&ev, &zero, &Vector::scalar(0.3), &config, |_| 1.0).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.n_paths, 64);

        // Constant potentials damp every path by the same exact factor
        // e^{-lambda t}; with dyadic t/n there is no rounding at all.
        let flat = Potential::constant(0.25).unwrap();
        let est = fk_estimate(&ev, &flat, &Vector::scalar(0.3), &config, |_| 1.0).unwrap();
        assert_eq!(est.mean, (-0.5f64).exp());
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn estimate_is_independent_of_the_thread_count() {
        let ev = evaluator(&[1.0]);
        let potential = Potential::ball_indicator(Vector::scalar(0.0), 1.0, 1.0).unwrap();
        let config = FKConfig {
            t: 0.5,
            n_steps: 8,
            n_paths: 200,
            seed: 3,
            radius: 8.0,
            source_quantum: 0.1,
        };
        let run = || {
            fk_estimate(&ev, &potential, &Vector::scalar(0.2), &config, |y| {
                if y.norm() <= 2.0 {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap()
        };
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let quad = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single.mean.to_bits(), quad.mean.to_bits());
        assert_eq!(single.std_error.to_bits(), quad.std_error.to_bits());
        assert!(single.mean > 0.0 && single.mean < 1.0);
    }

    #[test]
    fn monte_carlo_agrees_with_the_splitting_kernel() {
        // Same discretization on both sides: the chain with the potential
        // sampled after each move is the probabilistic form of the left
        // splitting, so at equal step counts the only systematic gaps are
        // cell-averaging and source snapping, both far below the Monte Carlo
        // noise here.
        let ev = evaluator(&[1.5]);
        let potential = Potential::ball_indicator(Vector::scalar(0.0), 1.0, 1.0).unwrap();
        let t = 1.0;
        let steps = 16;
        let config = FKConfig {
            t,
            n_steps: steps,
            n_paths: 4000,
            seed: 5,
            radius: 11.5,
            source_quantum: 0.05,
        };
        let x = Vector::scalar(0.0);
        let inside = |y: &Vector| if y.norm() <= 2.0 { 1.0 } else { 0.0 };
        let mc = fk_estimate(&ev, &potential, &x, &config, inside).unwrap();

        let grid = SpaceGrid::new(&[1.5], 11.5, 460).unwrap();
        let kernel = trotter_kernel(&grid, &ev, &potential, t, steps, Splitting::Left).unwrap();
        let row = grid.nearest_index(&x).unwrap();
        let reference: f64 = (0..grid.len())
            .map(|j| kernel.value(row, j) * inside(&grid.point(j)) * grid.mass(j))
            .sum();

        assert!(mc.std_error > 0.0 && mc.std_error < 0.02);
        assert!(
            (mc.mean - reference).abs() <= 3.0 * mc.std_error,
            "MC {} vs kernel {} (SE {})",
            mc.mean,
            reference,
            mc.std_error
        );
        assert!(reference > 0.2 && reference < 0.9, "reference {reference}");
    }

    #[test]
    fn undersized_domains_are_reported() {
        let ev = evaluator(&[1.0]);
        let sampler = TransitionSampler::new(&ev, 1.0, 2.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = sampler.sample(&Vector::scalar(0.0), &mut rng).unwrap_err();
        match err {
            Error::DomainTooSmall { suggested_radius, .. } => {
                assert!(suggested_radius > 2.0);
            }
            other => panic!("expected a domain error, got {other}"),
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let ev = evaluator(&[1.0]);
        // Panel wall: a huge radius at a tiny step cannot be tabulated.
        assert!(TransitionSampler::new(&ev, 4e-5, 12.0, 0.1).is_err());
        assert!(TransitionSampler::new(&ev, 0.0, 8.0, 0.1).is_err());
        assert!(TransitionSampler::new(&ev, 0.5, -1.0, 0.1).is_err());
        assert!(TransitionSampler::new(&ev, 0.5, 8.0, 0.0).is_err());

        let sampler = TransitionSampler::new(&ev, 0.5, 8.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sampler.sample(&Vector::scalar(9.0), &mut rng).is_err());
        assert!(sampler.sample(&Vector::of(&[0.0, 0.0]), &mut rng).is_err());
        assert!(sampler.sample_path(&Vector::scalar(0.0), 0, &mut rng).is_err());

        let v = Potential::constant(0.0).unwrap();
        let base = FKConfig {
            t: 1.0,
            n_steps: 4,
            n_paths: 2,
            seed: 0,
            radius: 8.0,
            source_quantum: 0.1,
        };
        let x = Vector::scalar(0.0);
        let bad_paths = FKConfig { n_paths: 1, ..base.clone() };
        assert!(fk_estimate(&ev, &v, &x, &bad_paths, |_| 1.0).is_err());
        let bad_steps = FKConfig { n_steps: 0, ..base.clone() };
        assert!(fk_estimate(&ev, &v, &x, &bad_steps, |_| 1.0).is_err());
        let unbounded = Potential::radial_power(0.5, 1.0).unwrap();
        assert!(fk_estimate(&ev, &unbounded, &x, &base, |_| 1.0).is_err());
        let mismatched = Potential::ball_indicator(Vector::of(&[0.0, 0.0]), 1.0, 1.0).unwrap();
        assert!(fk_estimate(&ev, &mismatched, &x, &base, |_| 1.0).is_err());
    }

    #[test]
    fn pairwise_sum_handles_edge_lengths() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[2.5]), 2.5);
        let ones = vec![1.0; 1023];
        assert_eq!(pairwise_sum(&ones), 1023.0);
    }
}
