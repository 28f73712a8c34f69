//! Green operators of a potential: time-integrated kernel averages.
//!
//! For a non-negative potential `V`, three closely related quantities:
//!
//! * `G(V)(x)  = integral_0^inf w(B(x,sqrt(s)))^{-1} integral
//!   e^{-||x-y||^2/s} V(y) dw(y) ds` (plain Gaussian),
//! * `G1(V)(x) = integral_0^inf integral h_s(x,y) V(y) dw(y) ds` (heat
//!   kernel),
//! * `curly G(V)(x)`: like `G` with the orbit distance `d(x,y)` in the
//!   exponent.
//!
//! Boundedness of any of them over `x` characterizes the potentials whose
//! Schroedinger semigroup stays comparable to the heat semigroup; their sups
//! are mutually comparable, which [`green_sup`] exposes numerically.
//!
//! The `s`-integral runs on a geometric grid (the integrand is smooth in
//! `log s`) and is truncated at `s_max`; for homogeneous dimension `NN > 2`
//! and `V` with finite weighted `L^1` norm the neglected tail admits the
//! closed bound returned alongside.

use crate::error::{Error, Result};
use crate::heat::HeatKernelEvaluator;
use crate::measure::VolumeMethod;
use crate::quad::{scaled_panels, GaussLegendre};
use crate::rootsystem::Vector;
use crate::schrodinger::potential::{Potential, PotentialKind};

/// Kernel inside the time integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreenKind {
    /// `w(B(x,sqrt(s)))^{-1} e^{-||x-y||^2/s}`.
    FullSpace,
    /// The heat kernel `h_s(x, y)`.
    Heat,
    /// `w(B(x,sqrt(s)))^{-1} e^{-d(x,y)^2/s}` with the orbit distance `d`.
    Orbit,
}

/// Quadrature window for the time integral.
#[derive(Debug, Clone, Copy)]
pub struct GreenParams {
    /// Lower geometric cutoff; `[0, s_min]` enters as one rectangle.
    pub s_min: f64,
    /// Truncation point of the time integral.
    pub s_max: f64,
    /// Geometric resolution of the `s`-grid.
    pub points_per_decade: usize,
}

impl Default for GreenParams {
    fn default() -> Self {
        Self { s_min: 1e-4, s_max: 1e3, points_per_decade: 64 }
    }
}

impl GreenParams {
    fn validate(&self) -> Result<()> {
        if !(self.s_min > 0.0 && self.s_max > self.s_min && self.s_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < s_min < s_max finite, got [{}, {}]",
                self.s_min, self.s_max
            )));
        }
        if self.points_per_decade < 4 {
            return Err(Error::InvalidArgument(
                "need at least 4 quadrature points per decade".into(),
            ));
        }
        Ok(())
    }

    /// Same window truncated at `factor * s_max`.
    pub fn scaled_s_max(&self, factor: f64) -> Self {
        Self { s_max: self.s_max * factor, ..*self }
    }
}

/// Truncated value plus (when available) a rigorous bound on the neglected
/// `s > s_max` tail.
#[derive(Debug, Clone, Copy)]
pub struct GreenValue {
    pub truncated: f64,
    pub tail_bound: Option<f64>,
}

impl GreenValue {
    /// Upper estimate `truncated + tail`, when the tail is bounded.
    pub fn total(&self) -> Option<f64> {
        self.tail_bound.map(|t| self.truncated + t)
    }
}

/// One Green operator evaluated at one point.
pub fn green_potential(
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    x: &Vector,
    kind: GreenKind,
    params: &GreenParams,
) -> Result<GreenValue> {
    params.validate()?;
    let sys = ev.system();
    if sys.dim() != 1 {
        return Err(Error::InvalidArgument(
            "Green quadrature is implemented for rank-1 systems".into(),
        ));
    }
    if x.dim() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "evaluation point has dimension {}, system has 1",
            x.dim()
        )));
    }
    let nn = sys.homogeneous_dimension();
    potential.validate_for(nn)?;
    let unbounded_support = potential.support_radius().is_none();
    let effectively_zero = potential.sup_bound() == Some(0.0);
    if nn <= 2.0 && unbounded_support && !effectively_zero {
        return Err(Error::Divergent(format!(
            "Green tail diverges: homogeneous dimension {nn} <= 2 with a potential of \
             unbounded support"
        )));
    }

    // Constant potential, heat kernel kind: the inner integral is the total
    // heat mass, which is exactly 1 at every s; the truncated integral is
    // lambda * s_max with no quadrature error.
    if kind == GreenKind::Heat {
        if let PotentialKind::Constant(lambda) = potential.kind() {
            let level = potential.cap().map_or(*lambda, |c| c.min(*lambda));
            let tail = if level == 0.0 { Some(0.0) } else { None };
            return Ok(GreenValue { truncated: level * params.s_max, tail_bound: tail });
        }
    }

    let mut inner_err: Option<Error> = None;
    let mut inner = |s: f64| -> f64 {
        if inner_err.is_some() {
            return 0.0;
        }
        match inner_integral(ev, potential, x, kind, s) {
            Ok(v) => v,
            Err(e) => {
                inner_err = Some(e);
                0.0
            }
        }
    };

    // Trapezoid in u = ln s (ds = s du) with the step anchored at s_min, so
    // that enlarging s_max only appends nodes: comparisons across different
    // truncations then see no re-gridding jitter.
    let du = std::f64::consts::LN_10 / params.points_per_decade as f64;
    let span = (params.s_max / params.s_min).ln();
    let n_full = (span / du).floor() as usize;
    let remainder = span - n_full as f64 * du;
    let mut acc = 0.0f64;
    let mut prev = inner(params.s_min) * params.s_min;
    // Head rectangle for (0, s_min].
    acc += prev;
    for j in 1..=n_full {
        let s = params.s_min * (j as f64 * du).exp();
        let f = inner(s) * s;
        acc += 0.5 * du * (prev + f);
        prev = f;
    }
    if remainder > 1e-12 * span {
        let f = inner(params.s_max) * params.s_max;
        acc += 0.5 * remainder * (prev + f);
    }
    if let Some(e) = inner_err {
        return Err(e);
    }

    let tail_bound = tail_bound(ev, potential, x, kind, params.s_max, nn)?;
    Ok(GreenValue { truncated: acc, tail_bound })
}

/// Inner `y`-integral at fixed `s` (rank-1).
fn inner_integral(
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    x: &Vector,
    kind: GreenKind,
    s: f64,
) -> Result<f64> {
    let sys = ev.system();
    let k = sys.multiplicities()[0];
    let xr = x[0];
    let sqrt_s = s.sqrt();
    let reach = xr.abs() + 8.0 * sqrt_s + 1.0;
    let lim = match potential.support_radius() {
        Some(r) => r.min(reach),
        None => reach,
    };
    if lim <= 0.0 {
        return Ok(0.0);
    }
    let mut cuts = vec![0.0, xr, -xr];
    for r in potential.jump_radii() {
        cuts.push(r);
        cuts.push(-r);
    }
    let panels = scaled_panels(-lim, lim, (0.35 * sqrt_s).min(lim), &cuts, 18);
    let rule = GaussLegendre::new(16);
    let ln_w_scale = k * std::f64::consts::LN_2;
    let weight = |y: f64| (ln_w_scale + 2.0 * k * y.abs().max(1e-300).ln()).exp();

    match kind {
        GreenKind::Heat => {
            let mut err: Option<Error> = None;
            let value = rule.integrate_panels(&panels, |y| {
                if err.is_some() {
                    return 0.0;
                }
                let v = potential.evaluate(&Vector::scalar(y));
                if v == 0.0 {
                    return 0.0;
                }
                match ev.log_heat_kernel(x, &Vector::scalar(y), s) {
                    Ok(ln) if ln > -740.0 => ln.exp() * v * weight(y),
                    Ok(_) => 0.0,
                    Err(e) => {
                        err = Some(e);
                        0.0
                    }
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(value),
            }
        }
        GreenKind::FullSpace | GreenKind::Orbit => {
            let vol = sys.measure().ball_volume(x, sqrt_s, VolumeMethod::Quadrature)?.value;
            let value = rule.integrate_panels(&panels, |y| {
                let v = potential.evaluate(&Vector::scalar(y));
                if v == 0.0 {
                    return 0.0;
                }
                let dist2 = match kind {
                    GreenKind::FullSpace => (xr - y) * (xr - y),
                    // Z2 orbit of y is {y, -y}.
                    _ => {
                        let d = (xr - y).abs().min((xr + y).abs());
                        d * d
                    }
                };
                (-dist2 / s).exp() * v * weight(y)
            });
            Ok(value / vol)
        }
    }
}

/// Closed tail bound for `s > s_max`, when available:
///
/// * heat kind: `h_s <= c^{-1} (2s)^{-NN/2}` pointwise;
/// * Gaussian kinds: `w(B(x, sqrt(s))) >= w(B(0,1)) (sqrt(s)/2)^{NN}` once
///   `s >= 4 ||x||^2`.
///
/// Both need `NN > 2` and a finite weighted `L^1` norm of `V`.
fn tail_bound(
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    x: &Vector,
    kind: GreenKind,
    s_max: f64,
    nn: f64,
) -> Result<Option<f64>> {
    if nn <= 2.0 {
        return Ok(None);
    }
    let l1 = match potential.l1_norm(ev.system().measure())? {
        Some(v) => v,
        None => return Ok(None),
    };
    if l1 == 0.0 {
        return Ok(Some(0.0));
    }
    let s_integral = s_max.powf(1.0 - 0.5 * nn) / (0.5 * nn - 1.0);
    match kind {
        GreenKind::Heat => {
            let c = ev.normalization_constant();
            Ok(Some(l1 / c * (2.0f64).powf(-0.5 * nn) * s_integral))
        }
        GreenKind::FullSpace | GreenKind::Orbit => {
            if s_max < 4.0 * x.norm_sq() {
                return Ok(None);
            }
            let unit = ev
                .system()
                .measure()
                .ball_volume(&Vector::zeros(x.dim()), 1.0, VolumeMethod::Quadrature)?
                .value;
            Ok(Some(l1 * (2.0f64).powf(nn) / unit * s_integral))
        }
    }
}

/// Sweep report of all three Green operators over a point grid.
#[derive(Debug, Clone)]
pub struct GreenReport {
    pub xs: Vec<f64>,
    pub g: Vec<GreenValue>,
    pub g1: Vec<GreenValue>,
    pub curly_g: Vec<GreenValue>,
    pub sup_g: f64,
    pub sup_g1: f64,
    pub sup_curly_g: f64,
    /// `sup G / sup G1`.
    pub ratio_g_g1: f64,
    /// `sup G1 / sup curly G`.
    pub ratio_g1_curly: f64,
    /// `sup curly G / sup G`.
    pub ratio_curly_g: f64,
}

/// Evaluates `G`, `G1`, and `curly G` over the grid and reports sups and
/// their pairwise ratios (of truncated values).
pub fn green_sup(
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    xs: &[f64],
    params: &GreenParams,
) -> Result<GreenReport> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("need at least one evaluation point".into()));
    }
    let mut g = Vec::with_capacity(xs.len());
    let mut g1 = Vec::with_capacity(xs.len());
    let mut curly = Vec::with_capacity(xs.len());
    for &xv in xs {
        let x = Vector::scalar(xv);
        g.push(green_potential(ev, potential, &x, GreenKind::FullSpace, params)?);
        g1.push(green_potential(ev, potential, &x, GreenKind::Heat, params)?);
        curly.push(green_potential(ev, potential, &x, GreenKind::Orbit, params)?);
    }
    let sup = |vals: &[GreenValue]| vals.iter().map(|v| v.truncated).fold(0.0f64, f64::max);
    let (sup_g, sup_g1, sup_curly_g) = (sup(&g), sup(&g1), sup(&curly));
    let safe = |a: f64, b: f64| a / b.max(1e-300);
    Ok(GreenReport {
        xs: xs.to_vec(),
        ratio_g_g1: safe(sup_g, sup_g1),
        ratio_g1_curly: safe(sup_g1, sup_curly_g),
        ratio_curly_g: safe(sup_curly_g, sup_g),
        g,
        g1,
        curly_g: curly,
        sup_g,
        sup_g1,
        sup_curly_g,
    })
}
