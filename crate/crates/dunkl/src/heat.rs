//! Exact Dunkl heat kernels for products of rank-1 systems.
//!
//! For the root system with roots `±sqrt(2) e_i` and multiplicities `k_i`,
//! the kernel generalizing `exp(<x, y>)` factorizes over coordinates with
//! per-coordinate series `sum (x y)^n / gamma_n(k)`, where
//! `gamma_0 = 1, gamma_n = gamma_{n-1} * (n + 2k [n odd])`.  The heat kernel
//! of the Dunkl Laplacian is
//!
//! `h_t(x, y) = c^{-1} (2t)^{-NN/2} E(x/sqrt(2t), y/sqrt(2t))
//!              exp(-(||x||^2 + ||y||^2)/(4t))`
//!
//! with `NN` the homogeneous dimension and `c` the Gaussian total mass of the
//! weight.  It is strictly positive, symmetric, integrates to one against the
//! weighted measure, and solves the heat equation for the Dunkl Laplacian.
//!
//! Numerics: every factor is evaluated in log space.  For `x y >= 0` the
//! defining series has positive terms; for `x y < 0` it alternates with
//! catastrophic cancellation at large arguments, so the evaluation switches to
//! the equivalent confluent-hypergeometric form
//! `E_k(x, y) = e^{x y} M(k, 2k+1, -2 x y)`, whose series again has positive
//! terms.  Both series run with rescaling and compensated summation; budget
//! exhaustion is a hard error reporting the argument magnitude.

use crate::error::{Error, Result};
use crate::measure::{VolumeMethod, WeightedMeasure};
use crate::quad::{scaled_panels, split_and_grade, GaussLegendre};
use crate::rootsystem::{walks, ReflectionGroup, RootSystem, Vector};
use statrs::function::gamma::ln_gamma;
use std::sync::Arc;

/// Product of rank-1 systems: the root system, its group, and its measure in
/// one handle.
#[derive(Debug, Clone)]
pub struct ProductRank1System {
    ks: Vec<f64>,
    system: RootSystem,
    group: ReflectionGroup,
    measure: WeightedMeasure,
}

impl ProductRank1System {
    pub fn new(multiplicities: &[f64]) -> Result<Self> {
        let system = RootSystem::product_z2(multiplicities)?;
        let group = ReflectionGroup::generate(&system)?;
        let measure = WeightedMeasure::new(system.clone());
        Ok(Self { ks: multiplicities.to_vec(), system, group, measure })
    }

    pub fn dim(&self) -> usize {
        self.ks.len()
    }

    pub fn multiplicities(&self) -> &[f64] {
        &self.ks
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.system
    }

    pub fn group(&self) -> &ReflectionGroup {
        &self.group
    }

    pub fn measure(&self) -> &WeightedMeasure {
        &self.measure
    }

    pub fn homogeneous_dimension(&self) -> f64 {
        self.measure.homogeneous_dimension()
    }
}

/// Termination policy for the kernel series.
#[derive(Debug, Clone, Copy)]
pub struct SeriesPolicy {
    /// Hard term budget; exceeding it is an error, never a silent truncation.
    pub max_terms: usize,
    /// Stop once the current term falls below `term_tol * partial_sum`
    /// (with a minimum of 40 terms so the rule cannot fire on a transient).
    pub term_tol: f64,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        Self { max_terms: 32_768, term_tol: 1e-16 }
    }
}

/// Parameters of the two-sided heat-kernel envelope.  The decay rates must
/// straddle the self-dual rate: `0 < c_upper < 1/4 < c_lower`.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub c_upper: f64,
    pub c_lower: f64,
    pub scale_upper: f64,
    pub scale_lower: f64,
}

impl BoundParams {
    pub fn new(c_upper: f64, c_lower: f64, scale_upper: f64, scale_lower: f64) -> Result<Self> {
        if !(c_upper > 0.0 && c_upper < 0.25 && c_lower > 0.25) {
            return Err(Error::InvalidArgument(format!(
                "envelope rates must satisfy 0 < c_upper < 1/4 < c_lower \
                 (got c_upper={c_upper}, c_lower={c_lower})"
            )));
        }
        if !(scale_upper > 0.0 && scale_lower > 0.0) {
            return Err(Error::InvalidArgument("envelope scales must be positive".into()));
        }
        Ok(Self { c_upper, c_lower, scale_upper, scale_lower })
    }

    /// Reference rates used by the verification sweeps, unit scales.
    pub fn reference() -> Self {
        Self { c_upper: 0.2, c_lower: 0.3, scale_upper: 1.0, scale_lower: 1.0 }
    }
}

/// Evaluator for the kernel and heat kernel of a product system.
///
/// Construction validates the numerics against two independent facts: the
/// per-coordinate Gaussian mass of the weight versus its closed form, and the
/// defining eigen-relation of the kernel (first Dunkl operator applied by
/// finite differences plus exact reflection terms) at probe points.
#[derive(Debug, Clone)]
pub struct HeatKernelEvaluator {
    sys: Arc<ProductRank1System>,
    policy: SeriesPolicy,
    /// Per-coordinate `ln` of the Gaussian weight mass
    /// `2^{2k + 1/2} Gamma(k + 1/2)`.
    ln_coord_norm: Vec<f64>,
}

impl HeatKernelEvaluator {
    pub fn new(sys: ProductRank1System, policy: SeriesPolicy) -> Result<Self> {
        if !(policy.term_tol > 0.0 && policy.term_tol < 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "series tolerance {} outside (0, 1e-6)",
                policy.term_tol
            )));
        }
        if policy.max_terms < 64 {
            return Err(Error::InvalidArgument("series budget below 64 terms".into()));
        }
        let ln_coord_norm = sys
            .multiplicities()
            .iter()
            .map(|&k| (2.0 * k + 0.5) * std::f64::consts::LN_2 + ln_gamma(k + 0.5))
            .collect();
        let ev = Self { sys: Arc::new(sys), policy, ln_coord_norm };
        ev.validate_normalization()?;
        ev.validate_eigen_relation()?;
        Ok(ev)
    }

    pub fn with_defaults(sys: ProductRank1System) -> Result<Self> {
        Self::new(sys, SeriesPolicy::default())
    }

    pub fn system(&self) -> &ProductRank1System {
        &self.sys
    }

    pub fn policy(&self) -> SeriesPolicy {
        self.policy
    }

    /// Total Gaussian mass of the weight, `integral of e^{-||x||^2/2} dw`;
    /// the product of the per-coordinate closed forms.
    pub fn normalization_constant(&self) -> f64 {
        self.ln_coord_norm.iter().sum::<f64>().exp()
    }

    /// Cross-check of one coordinate's closed-form mass by graded panel
    /// quadrature.
    fn coordinate_norm_quadrature(&self, i: usize) -> f64 {
        let k = self.sys.multiplicities()[i];
        let rule = GaussLegendre::new(16);
        // Integrand decays like e^{-s^2/2}; 14 standard deviations suffice
        // for 1e-8 relative accuracy with margin.
        let panels = split_and_grade(0.0, 14.0, &[0.0], 26);
        2.0 * rule.integrate_panels(&panels, |s| {
            (-0.5 * s * s).exp() * (std::f64::consts::SQRT_2 * s).powf(2.0 * k)
        })
    }

    fn validate_normalization(&self) -> Result<()> {
        for i in 0..self.sys.dim() {
            let closed = self.ln_coord_norm[i].exp();
            let quad = self.coordinate_norm_quadrature(i);
            let rel = (closed - quad).abs() / closed;
            if rel > 1e-8 {
                return Err(Error::Inconsistent(format!(
                    "coordinate {i}: Gaussian weight mass closed form {closed} vs quadrature \
                     {quad} (relative {rel:.3e})"
                )));
            }
        }
        Ok(())
    }

    fn validate_eigen_relation(&self) -> Result<()> {
        let dim = self.sys.dim();
        let base_x = [0.31, -0.57, 0.73, 0.41, -0.63];
        let base_y = [1.13, 0.67, -0.83, 0.29, 0.97];
        for flip in [1.0, -1.0] {
            let x = Vector::new((0..dim).map(|i| base_x[i % base_x.len()]).collect());
            let y = Vector::new((0..dim).map(|i| flip * base_y[i % base_y.len()]).collect());
            let residual = self.kernel_eigen_residual(&x, &y)?;
            if residual > 1e-6 {
                return Err(Error::Inconsistent(format!(
                    "kernel eigen-relation residual {residual:.3e} at probe points"
                )));
            }
        }
        Ok(())
    }

    /// Relative residual of the defining relation: applying the first-order
    /// Dunkl operator of coordinate `i` to `E(., y)` must multiply by `y_i`.
    /// Derivatives are fourth-order central differences; the reflection
    /// difference term is exact.
    pub fn kernel_eigen_residual(&self, x: &Vector, y: &Vector) -> Result<f64> {
        let mut worst = 0.0f64;
        let e_xy = self.dunkl_kernel(x, y)?;
        for i in 0..self.sys.dim() {
            let xi = x[i];
            if xi.abs() < 1e-6 * (1.0 + x.norm()) {
                return Err(Error::InvalidArgument(
                    "eigen-relation probe requires off-hyperplane x".into(),
                ));
            }
            let h = 1e-4 * (1.0 + xi.abs());
            let at = |s: f64| -> Result<f64> {
                let mut c = x.coords().to_vec();
                c[i] = s;
                self.dunkl_kernel(&Vector::new(c), y)
            };
            let d1 = (-at(xi + 2.0 * h)? + 8.0 * at(xi + h)? - 8.0 * at(xi - h)?
                + at(xi - 2.0 * h)?)
                / (12.0 * h);
            let reflected = at(-xi)?;
            let k = self.sys.multiplicities()[i];
            let applied = d1 + k * (e_xy - reflected) / xi;
            let target = y[i] * e_xy;
            let scale = target.abs().max(e_xy.abs() * 1e-3).max(1e-300);
            worst = worst.max((applied - target).abs() / scale);
        }
        Ok(worst)
    }

    // -- series kernels ----------------------------------------------------

    /// `ln` of the per-coordinate kernel factor `E_k(u, v)` given `a = u v`.
    /// Large arguments go through the Poincare asymptotic expansions, small
    /// ones through the defining series.
    fn ln_kernel_factor(&self, k: f64, a: f64) -> Result<f64> {
        if a >= 0.0 {
            if a >= ASYMPTOTIC_SWITCH {
                if let Some(tail) = ln_factor_asymptotic_tail(k, a) {
                    return Ok(a + tail);
                }
            }
            // sum a^n / gamma_n, positive terms.
            ln_positive_series(self.policy, a, |n, term| {
                let nf = n as f64;
                let step = if n % 2 == 1 { nf + 2.0 * k } else { nf };
                term * a / step
            })
        } else {
            // e^a M(k, 2k+1, 2|a|), positive terms.
            let z = -2.0 * a;
            if z >= 2.0 * ASYMPTOTIC_SWITCH {
                if let Some(tail) = ln_kummer_asymptotic_tail(k, z) {
                    return Ok(a + z + tail);
                }
            }
            let m = ln_positive_series(self.policy, z, |n, term| {
                let nf = n as f64;
                term * (k + nf - 1.0) * z / ((2.0 * k + nf) * nf)
            })?;
            Ok(a + m)
        }
    }

    /// `ln` of the per-coordinate heat factor with the Gaussian combined in,
    /// `ln [ c_i^{-1} (2t)^{-(k+1/2)} E_k-factor e^{-(xi^2+yi^2)/(4t)} ]`,
    /// so that the full kernel is the sum over coordinates.  Combining the
    /// Gaussian before exponentiation keeps the cancellation between the
    /// series growth `e^{|a|}` and the Gaussian decay exact.
    pub fn coordinate_log_heat_factor(&self, i: usize, xi: f64, yi: f64, t: f64) -> Result<f64> {
        if i >= self.sys.dim() {
            return Err(Error::InvalidArgument(format!(
                "coordinate {i} out of range for dimension {}",
                self.sys.dim()
            )));
        }
        check_time(t)?;
        let k = self.sys.multiplicities()[i];
        let a = xi * yi / (2.0 * t);
        let prefix = -self.ln_coord_norm[i] - (k + 0.5) * (2.0 * t).ln();
        let body = if a >= 0.0 {
            if a >= ASYMPTOTIC_SWITCH {
                if let Some(tail) = ln_factor_asymptotic_tail(k, a) {
                    // ln f(a) = a + tail and a - (xi^2+yi^2)/4t = -(xi-yi)^2/4t.
                    let d = xi - yi;
                    return Ok(prefix + tail - d * d / (4.0 * t));
                }
            }
            let g = (xi * xi + yi * yi) / (4.0 * t);
            self.ln_kernel_factor(k, a)? - g
        } else {
            // Combine the Gaussian with the exponential prefactor of the
            // confluent form: the difference of squares is exact.
            let z = -2.0 * a;
            if z >= 2.0 * ASYMPTOTIC_SWITCH {
                if let Some(tail) = ln_kummer_asymptotic_tail(k, z) {
                    // ln M = z + tail and a + z - (xi^2+yi^2)/4t
                    //   = -(|xi|-|yi|)^2/4t.
                    let d = xi.abs() - yi.abs();
                    return Ok(prefix + tail - d * d / (4.0 * t));
                }
            }
            let m = ln_positive_series(self.policy, z, |n, term| {
                let nf = n as f64;
                term * (k + nf - 1.0) * z / ((2.0 * k + nf) * nf)
            })?;
            m - (xi - yi) * (xi - yi) / (4.0 * t)
        };
        Ok(prefix + body)
    }

    /// Kernel `E(x, y)`: product of per-coordinate series factors.  Always
    /// positive; errors on overflow or series budget exhaustion.
    pub fn dunkl_kernel(&self, x: &Vector, y: &Vector) -> Result<f64> {
        self.check_dims(x, y)?;
        let mut ln = 0.0;
        for i in 0..self.sys.dim() {
            ln += self.ln_kernel_factor(self.sys.multiplicities()[i], x[i] * y[i])?;
        }
        if ln > 709.0 {
            return Err(Error::Numeric(format!("kernel overflows: ln E = {ln:.1}")));
        }
        Ok(ln.exp())
    }

    /// `ln h_t(x, y)`.
    pub fn log_heat_kernel(&self, x: &Vector, y: &Vector, t: f64) -> Result<f64> {
        self.check_dims(x, y)?;
        check_time(t)?;
        let mut ln = 0.0;
        for i in 0..self.sys.dim() {
            ln += self.coordinate_log_heat_factor(i, x[i], y[i], t)?;
        }
        Ok(ln)
    }

    /// Heat kernel value; underflows to zero far in the tails.
    pub fn heat_kernel(&self, x: &Vector, y: &Vector, t: f64) -> Result<f64> {
        Ok(self.log_heat_kernel(x, y, t)?.exp())
    }

    /// Rigorous cheap upper bound for `ln h_t`; used to skip assembly of
    /// entries that underflow.  Follows from `E_k(u, v) <= e^{|u v|}` per
    /// coordinate.
    pub fn log_heat_kernel_upper_bound(&self, x: &Vector, y: &Vector, t: f64) -> f64 {
        let mut ln = 0.0;
        for i in 0..self.sys.dim() {
            let k = self.sys.multiplicities()[i];
            let d = x[i].abs() - y[i].abs();
            ln += -self.ln_coord_norm[i] - (k + 0.5) * (2.0 * t).ln() - d * d / (4.0 * t);
        }
        ln
    }

    /// Total heat mass `integral h_t(x, .) dw` by per-coordinate panel
    /// quadrature on a domain sized from `(x, t)` so that the truncated tail
    /// is far below 1e-8.
    pub fn heat_mass(&self, x: &Vector, t: f64) -> Result<f64> {
        self.check_dim(x)?;
        check_time(t)?;
        let mut mass = 1.0;
        for i in 0..self.sys.dim() {
            mass *= self.coordinate_mass(i, x[i], t)?;
        }
        Ok(mass)
    }

    fn coordinate_mass(&self, i: usize, xi: f64, t: f64) -> Result<f64> {
        let k = self.sys.multiplicities()[i];
        let sqrt_t = t.sqrt();
        // Gaussian tail beyond radius |x| + z sqrt(4t) is ~ erfc(z); z = 6
        // leaves ~1e-17 before the polynomial weight factor, 2 sqrt(t) of
        // slack absorbs it.
        let radius = xi.abs() + 6.0 * (4.0 * t).sqrt() + 2.0 * sqrt_t;
        let panels = scaled_panels(-radius, radius, 0.5 * sqrt_t, &[0.0], 24);
        let rule = GaussLegendre::new(16);
        let ln_w_scale = k * std::f64::consts::LN_2;
        let mut err: Option<Error> = None;
        let value = rule.integrate_panels(&panels, |y| {
            if err.is_some() {
                return 0.0;
            }
            let a = xi * y / (2.0 * t);
            let ln = match self.ln_kernel_factor(k, a) {
                Err(e) => {
                    err = Some(e);
                    return 0.0;
                }
                Ok(l) => l,
            };
            let g = (xi * xi + y * y) / (4.0 * t);
            let ln_weight = ln_w_scale + 2.0 * k * y.abs().max(1e-300).ln();
            (ln - g - self.ln_coord_norm[i] - (k + 0.5) * (2.0 * t).ln() + ln_weight).exp()
        });
        match err {
            Some(e) => Err(e),
            None => Ok(value),
        }
    }

    /// Two-sided envelope `(lower, upper)` at `(x, y, t)`:
    /// `scale * w(B(x, sqrt(t)))^{-1} exp(-c d(x,y)^2 / t) * Lambda(x, y, t)`
    /// with the full walk-sum cutoff `2|G|`.
    pub fn heat_kernel_bounds(
        &self,
        params: &BoundParams,
        x: &Vector,
        y: &Vector,
        t: f64,
    ) -> Result<(f64, f64)> {
        self.check_dims(x, y)?;
        check_time(t)?;
        let group = self.sys.group();
        let d = group.orbit_distance(x, y);
        let (lambda, _) = walks::admissible_sum_pair(group, x, y, t)?;
        let vol = match self.sys.dim() {
            1 | 2 => {
                self.sys.measure().ball_volume(x, t.sqrt(), VolumeMethod::Quadrature)?.value
            }
            _ => {
                self.sys
                    .measure()
                    .ball_volume(
                        x,
                        t.sqrt(),
                        VolumeMethod::MonteCarlo { samples: 200_000, seed: 0x5eed },
                    )?
                    .value
            }
        };
        let core = lambda / vol;
        let d2t = d * d / t;
        Ok((
            params.scale_lower * core * (-params.c_lower * d2t).exp(),
            params.scale_upper * core * (-params.c_upper * d2t).exp(),
        ))
    }

    /// Dunkl Laplacian of a scalar field at `x`: Euclidean part by
    /// fourth-order central differences, plus for every root the directional
    /// derivative term and the exact reflection difference term.
    pub fn apply_laplacian<F: Fn(&Vector) -> f64>(&self, f: F, x: &Vector) -> Result<f64> {
        apply_dunkl_laplacian(self.sys.root_system(), f, x)
    }

    fn check_dims(&self, x: &Vector, y: &Vector) -> Result<()> {
        self.check_dim(x)?;
        self.check_dim(y)
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.dim() != self.sys.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dimension {}, system has {}",
                x.dim(),
                self.sys.dim()
            )));
        }
        Ok(())
    }
}

/// Dunkl Laplacian for any root system: `Delta f + sum over roots of
/// k(alpha) * (directional derivative / pairing - (||alpha||^2/2) *
/// (f(x) - f(reflected x)) / pairing^2)`.  Derivatives are fourth-order
/// central differences with step `1e-4 (1 + ||x||)`; the reflection
/// differences are exact evaluations.  `x` must be off every hyperplane.
pub fn apply_dunkl_laplacian<F: Fn(&Vector) -> f64>(
    system: &RootSystem,
    f: F,
    x: &Vector,
) -> Result<f64> {
    if x.dim() != system.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point has dimension {}, system has {}",
            x.dim(),
            system.dim()
        )));
    }
    let h = 1e-4 * (1.0 + x.norm());
    let fx = f(x);

    // Euclidean Laplacian: sum of second derivatives per coordinate.
    let mut total = 0.0;
    for i in 0..x.dim() {
        let at = |s: f64| {
            let mut c = x.coords().to_vec();
            c[i] += s;
            f(&Vector::new(c))
        };
        total += (-at(2.0 * h) + 16.0 * at(h) - 30.0 * fx + 16.0 * at(-h) - at(-2.0 * h))
            / (12.0 * h * h);
    }

    for (ri, alpha) in system.roots().iter().enumerate() {
        let pairing = x.dot(alpha);
        if pairing.abs() <= 1e-8 * (1.0 + x.norm()) * alpha.norm() {
            return Err(Error::InvalidArgument(
                "Laplacian difference terms need x off every reflection hyperplane".into(),
            ));
        }
        let hs = h / alpha.norm();
        let along = |s: f64| f(&x.add(&alpha.scale(s)));
        let dir = (-along(2.0 * hs) + 8.0 * along(hs) - 8.0 * along(-hs) + along(-2.0 * hs))
            / (12.0 * hs);
        let reflected = f(&crate::rootsystem::reflect(alpha, x));
        let k = system.multiplicity(ri);
        total += k
            * (dir / pairing - (alpha.norm_sq() / 2.0) * (fx - reflected) / (pairing * pairing));
    }
    Ok(total)
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("time {t}, expected positive finite")))
    }
}

/// Argument size beyond which the kernel factor switches from the defining
/// series (cost `O(|a|)` terms) to the Poincare asymptotic expansions (a few
/// dozen terms, truncation error below `e^{-2|a|}` relative for the
/// multiplicities in practical use).
const ASYMPTOTIC_SWITCH: f64 = 256.0;

/// Asymptotic correction sum `1 - (mu-1)/(8a) + (mu-1)(mu-9)/(2!(8a)^2) - ...`
/// with `mu = 4 nu^2` for the modified Bessel function `I_nu(a)`, truncated at
/// its smallest term.  `None` when the smallest term is not negligible (large
/// `nu` relative to `a`), in which case the caller falls back to the series.
fn bessel_asymptotic_sum(nu: f64, a: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut smallest = f64::INFINITY;
    for j in 1..=60u32 {
        let odd = (2 * j - 1) as f64;
        term *= -(mu - odd * odd) / (8.0 * a * j as f64);
        if term.abs() >= smallest {
            break;
        }
        smallest = term.abs();
        sum += term;
        if term.abs() < 1e-17 {
            return Some(sum);
        }
    }
    if smallest < 1e-14 {
        Some(sum)
    } else {
        None
    }
}

/// `ln f_k(a) - a` for large positive `a`, where `f_k` is the per-coordinate
/// kernel factor `sum a^n / gamma_n`.  Uses the Bessel representation
/// `f_k(a) = Gamma(k+1/2) (a/2)^{1/2-k} [I_{k-1/2}(a) + I_{k+1/2}(a)]`.
fn ln_factor_asymptotic_tail(k: f64, a: f64) -> Option<f64> {
    let s_lo = bessel_asymptotic_sum(k - 0.5, a)?;
    let s_hi = bessel_asymptotic_sum(k + 0.5, a)?;
    let combined = s_lo + s_hi;
    if !(combined > 0.5 && combined < 4.0) {
        return None;
    }
    Some(
        ln_gamma(k + 0.5) + (0.5 - k) * (0.5 * a).ln()
            - 0.5 * (2.0 * std::f64::consts::PI * a).ln()
            + combined.ln(),
    )
}

/// `ln M(k, 2k+1, z) - z` for large positive `z`:
/// `M ~ Gamma(2k+1)/Gamma(k) e^z z^{-k-1} sum_j (k+1)_j (1-k)_j / (j! z^j)`.
/// The dropped second branch of the full expansion is smaller by `e^{-z}`.
fn ln_kummer_asymptotic_tail(k: f64, z: f64) -> Option<f64> {
    if k < 1e-8 {
        // M(0, 1, z) = 1; the Gamma(k) pole makes the formula unusable and
        // the defining series is instant.
        return None;
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    let mut smallest = f64::INFINITY;
    let mut converged = false;
    for j in 0..60u32 {
        let jf = j as f64;
        term *= (k + 1.0 + jf) * (1.0 - k + jf) / ((jf + 1.0) * z);
        if term.abs() >= smallest {
            break;
        }
        smallest = term.abs();
        sum += term;
        if term.abs() < 1e-17 {
            converged = true;
            break;
        }
    }
    if !(converged || smallest < 1e-14) || !(sum > 0.5 && sum < 2.0) {
        return None;
    }
    Some(ln_gamma(2.0 * k + 1.0) - ln_gamma(k) - (k + 1.0) * z.ln() + sum.ln())
}

/// `ln` of `1 + sum of terms` where `term_0 = 1` and
/// `term_n = next(n, term_{n-1})`, all terms nonnegative.  Runs with
/// rescaling (so partial sums up to `e^{~30000}` are fine) and compensated
/// summation.  `magnitude` only labels the error message.
fn ln_positive_series<F: Fn(usize, f64) -> f64>(
    policy: SeriesPolicy,
    magnitude: f64,
    next: F,
) -> Result<f64> {
    const RESCALE_LIMIT: f64 = 1e250;
    const LN_RESCALE: f64 = 575.6462732485114; // ln(1e250)
    let mut term = 1.0f64;
    let mut sum = walks::KahanSum::default();
    sum.add(1.0);
    let mut scale = 0.0f64;
    for n in 1..=policy.max_terms {
        term = next(n, term);
        debug_assert!(term >= 0.0);
        sum.add(term);
        if !term.is_finite() {
            return Err(Error::Numeric(format!(
                "series term overflow at n = {n} (argument magnitude {magnitude:.3e})"
            )));
        }
        if sum.value() > RESCALE_LIMIT {
            let s = sum.value() * (1.0 / RESCALE_LIMIT);
            sum = walks::KahanSum::default();
            sum.add(s);
            term /= RESCALE_LIMIT;
            scale += LN_RESCALE;
        }
        if n >= 40 && term < policy.term_tol * sum.value() {
            return Ok(sum.value().ln() + scale);
        }
    }
    Err(Error::Convergence(format!(
        "kernel series did not reach tolerance {:.1e} within {} terms \
         (argument magnitude {magnitude:.3e})",
        policy.term_tol, policy.max_terms
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn rank1(k: f64) -> HeatKernelEvaluator {
        HeatKernelEvaluator::with_defaults(ProductRank1System::new(&[k]).unwrap()).unwrap()
    }

    #[test]
    fn kernel_series_matches_explicit_low_order_terms() {
        // k = 1: gamma_n = 1, 3, 6, 30, 120, 840, ...
        let ev = rank1(1.0);
        let a: f64 = 0.3;
        let gammas = [1.0, 3.0, 6.0, 30.0, 120.0, 840.0, 5040.0, 45360.0];
        let mut want = 0.0;
        let mut p = 1.0;
        for g in gammas {
            want += p / g;
            p *= a;
        }
        let got = ev.dunkl_kernel(&Vector::scalar(0.5), &Vector::scalar(0.6)).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn kernel_at_zero_argument_is_one() {
        let ev = rank1(1.3);
        let got = ev.dunkl_kernel(&Vector::scalar(5.0), &Vector::scalar(0.0)).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn kernel_tends_to_plain_exponential_as_multiplicity_vanishes() {
        let ev = rank1(1e-12);
        for (x, y) in [(1.0, 2.0), (0.5, -0.7), (-1.5, -1.2)] {
            let got = ev.dunkl_kernel(&Vector::scalar(x), &Vector::scalar(y)).unwrap();
            let want = (x * y).exp();
            assert!((got - want).abs() < 1e-9 * want, "x={x} y={y}: {got} vs {want}");
        }
    }

    #[test]
    fn negative_branch_agrees_with_direct_alternating_sum() {
        // At small |a| the alternating defining series is still accurate;
        // the confluent form must match it.
        let k = 0.8;
        let ev = rank1(k);
        for a in [-0.2, -1.0, -2.5] {
            let mut direct = 0.0;
            let mut term = 1.0;
            let mut gamma_n = 1.0;
            for n in 0..60 {
                if n > 0 {
                    let nf = n as f64;
                    gamma_n *= if n % 2 == 1 { nf + 2.0 * k } else { nf };
                    term *= a;
                }
                direct += term / gamma_n;
            }
            let got = ev.ln_kernel_factor(k, a).unwrap().exp();
            assert!((got - direct).abs() < 1e-12 * direct.abs(), "a={a}: {got} vs {direct}");
        }
    }

    #[test]
    fn kernel_is_positive_at_strongly_negative_arguments() {
        let ev = rank1(1.0);
        let e = ev.dunkl_kernel(&Vector::scalar(6.0), &Vector::scalar(-6.0)).unwrap();
        assert!(e > 0.0 && e.is_finite());
        // Alternating cancellation at a = -36 is far beyond f64 if summed
        // directly; the value must still be sane: compare with the
        // asymptotic decay E(x, -x) ~ Gamma(2k+1)/Gamma(k) e^{x^2}/(2x^2)^{k+1}.
        let want = gamma(3.0) / gamma(1.0) * (36.0f64).exp() / (72.0f64).powf(2.0);
        assert!((e - want).abs() < 0.1 * want, "{e} vs asymptotic {want}");
    }

    #[test]
    fn normalization_constant_closed_form() {
        // c_k = 2^{2k + 1/2} Gamma(k + 1/2); k = 1: 2^{2.5} sqrt(pi)/2.
        let ev = rank1(1.0);
        let want = 2.0f64.powf(2.5) * std::f64::consts::PI.sqrt() / 2.0;
        assert!((ev.normalization_constant() - want).abs() < 1e-12 * want);
        // Product system: product of per-coordinate constants.
        let ev2 = HeatKernelEvaluator::with_defaults(
            ProductRank1System::new(&[1.0, 0.5]).unwrap(),
        )
        .unwrap();
        let want2 = want * 2.0f64.powf(1.5) * gamma(1.0);
        assert!((ev2.normalization_constant() - want2).abs() < 1e-10 * want2);
    }

    #[test]
    fn heat_kernel_is_symmetric_and_positive() {
        let ev = rank1(1.5);
        for (x, y, t) in [(0.3, 1.9, 0.25), (-2.0, 5.0, 1.0), (4.0, -4.0, 0.1)] {
            let a = ev.heat_kernel(&Vector::scalar(x), &Vector::scalar(y), t).unwrap();
            let b = ev.heat_kernel(&Vector::scalar(y), &Vector::scalar(x), t).unwrap();
            assert!(a > 0.0);
            assert!((a - b).abs() <= 1e-13 * a);
        }
    }

    #[test]
    fn heat_mass_is_one_including_the_hard_corner() {
        for k in [0.5, 1.0, 1.5] {
            let ev = rank1(k);
            for (x, t) in [(0.0, 0.25), (0.5, 1.0), (3.0, 4.0)] {
                let mass = ev.heat_mass(&Vector::scalar(x), t).unwrap();
                assert!((mass - 1.0).abs() < 1e-8, "k={k} x={x} t={t}: mass {mass}");
            }
        }
    }

    #[test]
    fn product_evaluator_factorizes_over_coordinates() {
        let ev2 = HeatKernelEvaluator::with_defaults(
            ProductRank1System::new(&[1.0, 0.5]).unwrap(),
        )
        .unwrap();
        let ev_a = rank1(1.0);
        let ev_b = rank1(0.5);
        let (x, y, t) = (Vector::of(&[0.7, -1.1]), Vector::of(&[2.0, 0.4]), 0.7);
        let joint = ev2.heat_kernel(&x, &y, t).unwrap();
        let split = ev_a
            .heat_kernel(&Vector::scalar(x[0]), &Vector::scalar(y[0]), t)
            .unwrap()
            * ev_b.heat_kernel(&Vector::scalar(x[1]), &Vector::scalar(y[1]), t).unwrap();
        assert!((joint - split).abs() < 1e-13 * joint);
    }

    #[test]
    fn semigroup_identity_pointwise() {
        let ev = rank1(1.0);
        let (x, y) = (Vector::scalar(0.8), Vector::scalar(-1.3));
        let (s, t) = (0.4, 0.9);
        let rule = GaussLegendre::new(16);
        let radius = 2.0 + 6.0 * (4.0f64 * (s + t)).sqrt();
        let panels = scaled_panels(-radius, radius, 0.3, &[0.0], 24);
        let composed = rule.integrate_panels(&panels, |z| {
            let zv = Vector::scalar(z);
            let w = 2.0 * z * z; // weight density for k = 1
            ev.heat_kernel(&x, &zv, s).unwrap() * ev.heat_kernel(&zv, &y, t).unwrap() * w
        });
        let direct = ev.heat_kernel(&x, &y, s + t).unwrap();
        assert!(
            (composed - direct).abs() < 1e-6 * direct,
            "composed {composed} vs direct {direct}"
        );
    }

    #[test]
    fn laplacian_of_squared_norm_is_twice_homogeneous_dimension() {
        let sys = ProductRank1System::new(&[1.5]).unwrap();
        let ev = HeatKernelEvaluator::with_defaults(sys).unwrap();
        let got = ev.apply_laplacian(|v: &Vector| v.norm_sq(), &Vector::scalar(0.7)).unwrap();
        let want = 2.0 * ev.system().homogeneous_dimension();
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");

        // dim 2, multiplicity 2 * (1.0 + 0.5) over the four roots: NN = 5.
        let sys2 = RootSystem::product_z2(&[1.0, 0.5]).unwrap();
        let got2 =
            apply_dunkl_laplacian(&sys2, |v: &Vector| v.norm_sq(), &Vector::of(&[0.4, -1.2]))
                .unwrap();
        assert!((got2 - 10.0).abs() < 1e-6, "{got2}");
    }

    #[test]
    fn laplacian_rejects_hyperplane_points() {
        let ev = rank1(1.0);
        let err = ev.apply_laplacian(|v: &Vector| v.norm_sq(), &Vector::scalar(0.0)).unwrap_err();
        assert!(err.to_string().contains("hyperplane"));
    }

    #[test]
    fn heat_kernel_solves_the_heat_equation() {
        let ev = rank1(1.0);
        let y = Vector::scalar(1.1);
        let x = Vector::scalar(0.6);
        let t = 0.8;
        // Fourth-order central difference in t.
        let tau = 1e-3 * t;
        let ht = |tt: f64| ev.heat_kernel(&x, &y, tt).unwrap();
        let dt = (-ht(t + 2.0 * tau) + 8.0 * ht(t + tau) - 8.0 * ht(t - tau) + ht(t - 2.0 * tau))
            / (12.0 * tau);
        let lap = ev.apply_laplacian(|v: &Vector| ev.heat_kernel(v, &y, t).unwrap(), &x).unwrap();
        let h = ht(t);
        assert!((dt - lap).abs() < 1e-4 * h, "dt {dt} vs lap {lap}, h {h}");
    }

    #[test]
    fn upper_bound_dominates_the_kernel() {
        let ev = rank1(1.5);
        for (x, y, t) in [(0.0, 0.0, 1.0), (2.0, -3.0, 0.3), (5.0, 4.0, 2.0), (8.0, -8.0, 0.1)] {
            let (xv, yv) = (Vector::scalar(x), Vector::scalar(y));
            let ln_h = ev.log_heat_kernel(&xv, &yv, t).unwrap();
            let ub = ev.log_heat_kernel_upper_bound(&xv, &yv, t);
            assert!(ln_h <= ub + 1e-9, "x={x} y={y} t={t}: {ln_h} vs {ub}");
        }
    }

    #[test]
    fn envelope_brackets_the_kernel_with_sane_ratios() {
        let ev = rank1(1.0);
        let params = BoundParams::reference();
        for (x, y, t) in [(0.5, 1.0, 1.0), (3.0, -2.0, 0.5), (8.0, -8.0, 0.1)] {
            let (xv, yv) = (Vector::scalar(x), Vector::scalar(y));
            let h = ev.heat_kernel(&xv, &yv, t).unwrap();
            let (lo, hi) = ev.heat_kernel_bounds(&params, &xv, &yv, t).unwrap();
            assert!(lo > 0.0 && hi >= lo);
            let (rl, ru) = (h / lo, h / hi);
            assert!(rl > 1e-4 && rl < 1e4, "lower ratio {rl} at ({x},{y},{t})");
            assert!(ru > 1e-4 && ru < 1e4, "upper ratio {ru} at ({x},{y},{t})");
        }
    }

    #[test]
    fn bound_params_are_validated() {
        assert!(BoundParams::new(0.3, 0.2, 1.0, 1.0).is_err());
        assert!(BoundParams::new(0.2, 0.3, 1.0, 1.0).is_ok());
        assert!(BoundParams::new(0.2, 0.3, 0.0, 1.0).is_err());
    }

    #[test]
    fn series_budget_exhaustion_reports_argument() {
        let sys = ProductRank1System::new(&[1.0]).unwrap();
        let ev = HeatKernelEvaluator::new(sys, SeriesPolicy { max_terms: 64, term_tol: 1e-16 })
            .unwrap();
        // a = 196 stays below the asymptotic switch, and the series needs
        // roughly 200 terms there.
        let err =
            ev.dunkl_kernel(&Vector::scalar(14.0), &Vector::scalar(14.0)).unwrap_err();
        assert!(err.to_string().contains("magnitude"), "{err}");
    }

    #[test]
    fn asymptotic_branch_matches_unit_multiplicity_closed_form() {
        // k = 1: the factor series has the closed form
        // f(a) = sinh(a)/a + (cosh(a) - 1)/a - (sinh(a) - a)/a^2, and for
        // a < 0 equivalently e^{-|a|} M(1, 3, 2|a|) with
        // M(1, 3, z) = 2 (e^z - 1 - z)/z^2.
        let ev = rank1(1.0);
        for a in [300.0f64, 650.0] {
            let got = ev.dunkl_kernel(&Vector::scalar(1.0), &Vector::scalar(a)).unwrap();
            let want = a.sinh() / a + (a.cosh() - 1.0) / a - (a.sinh() - a) / (a * a);
            assert!(
                (got - want).abs() < 1e-12 * want,
                "a = {a}: {got:e} vs {want:e}"
            );
            let got_neg = ev.dunkl_kernel(&Vector::scalar(1.0), &Vector::scalar(-a)).unwrap();
            let want_neg = (a.exp() - (-a).exp() * (1.0 + 2.0 * a)) / (2.0 * a * a);
            assert!(
                (got_neg - want_neg).abs() < 1e-12 * want_neg,
                "a = -{a}: {got_neg:e} vs {want_neg:e}"
            );
        }
    }

    #[test]
    fn asymptotic_branch_agrees_with_series_near_the_switch() {
        // Straddle the switch with a tiny argument step: the value must move
        // by O(step), not jump by a branch disagreement.
        for k in [0.3f64, 1.0, 1.7] {
            let ev = rank1(k);
            for sign in [1.0f64, -1.0] {
                let lo = ev
                    .dunkl_kernel(&Vector::scalar(1.0), &Vector::scalar(sign * 255.999))
                    .unwrap();
                let hi = ev
                    .dunkl_kernel(&Vector::scalar(1.0), &Vector::scalar(sign * 256.001))
                    .unwrap();
                // d ln f / da is about 1 (positive side) or o(1) (negative),
                // so the ratio across the 0.002 step stays within 0.3%.
                let ratio = hi / lo;
                assert!(
                    (ratio - 1.0).abs() < 3e-3,
                    "k = {k}, sign = {sign}: ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn heat_mass_is_one_with_asymptotic_arguments() {
        // x large and t small drives |x y / 2t| beyond the asymptotic switch
        // across the quadrature domain, on both signs of y.
        for k in [0.5f64, 1.5] {
            let ev = rank1(k);
            let mass = ev.heat_mass(&Vector::scalar(9.0), 0.002).unwrap();
            assert!((mass - 1.0).abs() < 1e-8, "k = {k}: mass {mass}");
        }
    }

    #[test]
    fn invalid_time_is_rejected() {
        let ev = rank1(1.0);
        for t in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(ev.heat_kernel(&Vector::scalar(0.0), &Vector::scalar(1.0), t).is_err());
        }
    }
}
