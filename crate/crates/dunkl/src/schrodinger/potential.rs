//! Non-negative potentials and their grid-facing summaries.
//!
//! A potential is a measurable function `V >= 0`, locally integrable against
//! the weighted measure.  Besides pointwise evaluation the kernel machinery
//! needs weighted cell averages (for splitting diagonals), the supremum, the
//! `L^1(dw)` norm (for Green tail bounds), and the support radius (for
//! integration windows).  A cap turns `V` into the truncation `min(V, cap)`
//! used when approaching unbounded potentials monotonically.

use crate::error::{Error, Result};
use crate::measure::{VolumeMethod, WeightedMeasure};
use crate::quad::GaussLegendre;
use crate::rootsystem::Vector;

/// Shape of the potential.
#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `V = lambda` everywhere.
    Constant(f64),
    /// `V = height` on the closed ball `B(center, radius)`, zero outside.
    BallIndicator { center: Vector, radius: f64, height: f64 },
    /// `V = ||x||^{-exponent}` for `||x|| <= cutoff`, zero outside.
    /// Unbounded near the origin for positive exponents.
    RadialPower { exponent: f64, cutoff: f64 },
    /// Radial profile interpolated piecewise-linearly through
    /// `(nodes[i], values[i])` as a function of `||x||`; zero beyond the last
    /// node.
    Table { nodes: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Potential {
    kind: PotentialKind,
    /// Truncation level: evaluation returns `min(V, cap)`.
    cap: Option<f64>,
}

impl Potential {
    pub fn new(kind: PotentialKind) -> Result<Self> {
        match &kind {
            PotentialKind::Constant(lambda) => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "constant potential must be finite and >= 0, got {lambda}"
                    )));
                }
            }
            PotentialKind::BallIndicator { radius, height, .. } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "indicator radius must be positive, got {radius}"
                    )));
                }
                if !(*height >= 0.0 && height.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "indicator height must be finite and >= 0, got {height}"
                    )));
                }
            }
            PotentialKind::RadialPower { exponent, cutoff } => {
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "radial power exponent must be positive, got {exponent}"
                    )));
                }
                if !(*cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "radial power cutoff must be positive, got {cutoff}"
                    )));
                }
            }
            PotentialKind::Table { nodes, values } => {
                if nodes.len() != values.len() || nodes.is_empty() {
                    return Err(Error::InvalidArgument(
                        "table potential needs equally many nodes and values".into(),
                    ));
                }
                if nodes.windows(2).any(|w| w[1] <= w[0]) || nodes[0] < 0.0 {
                    return Err(Error::InvalidArgument(
                        "table nodes must be non-negative and strictly increasing".into(),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "table values must be finite and >= 0".into(),
                    ));
                }
            }
        }
        Ok(Self { kind, cap: None })
    }

    pub fn constant(lambda: f64) -> Result<Self> {
        Self::new(PotentialKind::Constant(lambda))
    }

    pub fn ball_indicator(center: Vector, radius: f64, height: f64) -> Result<Self> {
        Self::new(PotentialKind::BallIndicator { center, radius, height })
    }

    pub fn radial_power(exponent: f64, cutoff: f64) -> Result<Self> {
        Self::new(PotentialKind::RadialPower { exponent, cutoff })
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    /// The truncation `min(V, level)`.
    pub fn truncated(&self, level: f64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "truncation level must be finite and >= 0, got {level}"
            )));
        }
        let cap = Some(self.cap.map_or(level, |c| c.min(level)));
        Ok(Self { kind: self.kind.clone(), cap })
    }

    /// Checks local integrability against a measure of the given homogeneous
    /// dimension: the radial power needs `exponent < NN`.
    pub fn validate_for(&self, homogeneous_dimension: f64) -> Result<()> {
        if let PotentialKind::RadialPower { exponent, .. } = &self.kind {
            if *exponent >= homogeneous_dimension {
                return Err(Error::InvalidArgument(format!(
                    "radial power exponent {exponent} is not locally dw-integrable \
                     (homogeneous dimension {homogeneous_dimension})"
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &Vector) -> f64 {
        let raw = match &self.kind {
            PotentialKind::Constant(lambda) => *lambda,
            PotentialKind::BallIndicator { center, radius, height } => {
                if x.dist(center) <= *radius {
                    *height
                } else {
                    0.0
                }
            }
            PotentialKind::RadialPower { exponent, cutoff } => {
                let r = x.norm();
                if r > *cutoff {
                    0.0
                } else if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-*exponent)
                }
            }
            PotentialKind::Table { nodes, values } => interp_radial(nodes, values, x.norm()),
        };
        match self.cap {
            Some(c) => raw.min(c),
            None => raw,
        }
    }

    /// Supremum, `None` when unbounded (uncapped radial power).
    pub fn sup_bound(&self) -> Option<f64> {
        let raw = match &self.kind {
            PotentialKind::Constant(lambda) => Some(*lambda),
            PotentialKind::BallIndicator { height, .. } => Some(*height),
            PotentialKind::RadialPower { .. } => None,
            PotentialKind::Table { values, .. } => {
                Some(values.iter().copied().fold(0.0, f64::max))
            }
        };
        match (raw, self.cap) {
            (Some(v), Some(c)) => Some(v.min(c)),
            (None, c) => c,
            (v, None) => v,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup_bound().is_some()
    }

    /// Radius of a ball centered at the origin containing the support;
    /// `None` for full-space support (positive constants).
    pub fn support_radius(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Constant(lambda) => {
                if *lambda == 0.0 || self.cap == Some(0.0) {
                    Some(0.0)
                } else {
                    None
                }
            }
            PotentialKind::BallIndicator { center, radius, .. } => Some(center.norm() + radius),
            PotentialKind::RadialPower { cutoff, .. } => Some(*cutoff),
            PotentialKind::Table { nodes, .. } => Some(*nodes.last().unwrap()),
        }
    }

    /// Radii (distances from the origin) where the potential jumps; grid
    /// constructors align cell boundaries with these.
    pub fn jump_radii(&self) -> Vec<f64> {
        match &self.kind {
            PotentialKind::BallIndicator { center, radius, .. } if center.norm() == 0.0 => {
                vec![*radius]
            }
            PotentialKind::RadialPower { cutoff, .. } => vec![*cutoff],
            _ => Vec::new(),
        }
    }

    /// `L^1(dw)` norm; `None` when infinite (positive constants).
    pub fn l1_norm(&self, measure: &WeightedMeasure) -> Result<Option<f64>> {
        let dim = measure.system().dim();
        let nn = measure.homogeneous_dimension();
        match &self.kind {
            PotentialKind::Constant(lambda) => {
                let level = self.cap.map_or(*lambda, |c| c.min(*lambda));
                Ok(if level == 0.0 { Some(0.0) } else { None })
            }
            PotentialKind::BallIndicator { center, radius, height } => {
                let level = self.cap.map_or(*height, |c| c.min(*height));
                let method = if dim <= 2 {
                    VolumeMethod::Quadrature
                } else {
                    VolumeMethod::MonteCarlo { samples: 400_000, seed: 0x91f3 }
                };
                let vol = measure.ball_volume(center, *radius, method)?.value;
                Ok(Some(level * vol))
            }
            // Radial integrands reduce to one dimension: w is homogeneous, so
            // the measure of B(0,r) is w(B(0,1)) r^NN and the radial density
            // is NN w(B(0,1)) r^{NN-1}.
            PotentialKind::RadialPower { exponent, cutoff } => {
                let unit = self.unit_ball_volume(measure)?;
                let value = match self.cap {
                    None => {
                        if *exponent >= nn {
                            return Ok(None);
                        }
                        nn * unit * cutoff.powf(nn - exponent) / (nn - exponent)
                    }
                    Some(cap) => {
                        // min(r^{-sigma}, cap): constant inside r* = cap^{-1/sigma}.
                        let r_star = cap.powf(-1.0 / exponent).min(*cutoff);
                        let inner = cap * unit * r_star.powf(nn);
                        let outer = if r_star < *cutoff {
                            nn * unit * (cutoff.powf(nn - exponent) - r_star.powf(nn - exponent))
                                / (nn - exponent)
                        } else {
                            0.0
                        };
                        inner + outer
                    }
                };
                Ok(Some(value))
            }
            PotentialKind::Table { nodes, .. } => {
                let unit = self.unit_ball_volume(measure)?;
                let rule = GaussLegendre::new(16);
                let hi = *nodes.last().unwrap();
                let mut cuts = vec![0.0];
                cuts.extend_from_slice(nodes);
                let panels = crate::quad::split_at(0.0, hi, &cuts);
                let value = rule.integrate_panels(&panels, |r| {
                    let v = self.evaluate(&radial_point(dim, r));
                    v * nn * unit * r.powf(nn - 1.0)
                });
                Ok(Some(value))
            }
        }
    }

    fn unit_ball_volume(&self, measure: &WeightedMeasure) -> Result<f64> {
        let dim = measure.system().dim();
        let origin = Vector::zeros(dim);
        let method = if dim <= 2 {
            VolumeMethod::Quadrature
        } else {
            VolumeMethod::MonteCarlo { samples: 400_000, seed: 0x91f3 }
        };
        Ok(measure.ball_volume(&origin, 1.0, method)?.value)
    }

    /// `dw`-weighted average over a tensor cell:
    /// `(integral of V dw over the cell) / (integral of dw over the cell)`.
    /// Exact for constants and one-dimensional indicators; Gauss panels
    /// otherwise.
    pub fn cell_average(&self, cell: &[(f64, f64)], ks: &[f64]) -> f64 {
        debug_assert_eq!(cell.len(), ks.len());
        match (&self.kind, cell.len()) {
            (PotentialKind::Constant(lambda), _) => self.cap.map_or(*lambda, |c| c.min(*lambda)),
            (PotentialKind::BallIndicator { center, radius, height }, 1) => {
                let level = self.cap.map_or(*height, |c| c.min(*height));
                let (a, b) = cell[0];
                let (lo, hi) = (center[0] - radius, center[0] + radius);
                let (oa, ob) = (a.max(lo), b.min(hi));
                if ob <= oa {
                    return 0.0;
                }
                let mass = cell_mass_1d(a, b, ks[0]);
                if mass <= 0.0 {
                    return 0.0;
                }
                level * cell_mass_1d(oa, ob, ks[0]) / mass
            }
            _ => {
                let rule = GaussLegendre::new(8);
                let (num, den) = self.cell_quadrature(&rule, cell, ks, &mut Vec::new(), 0);
                if den <= 0.0 {
                    0.0
                } else {
                    num / den
                }
            }
        }
    }

    fn cell_quadrature(
        &self,
        rule: &GaussLegendre,
        cell: &[(f64, f64)],
        ks: &[f64],
        coords: &mut Vec<f64>,
        depth: usize,
    ) -> (f64, f64) {
        if depth == cell.len() {
            let x = Vector::of(coords);
            let mut w = 1.0;
            for (c, &k) in coords.iter().zip(ks) {
                w *= (2.0f64).powf(k) * c.abs().powf(2.0 * k);
            }
            return (self.evaluate(&x) * w, w);
        }
        let (a, b) = cell[depth];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut num = 0.0;
        let mut den = 0.0;
        for (node, weight) in rule.nodes().iter().zip(rule.weights()) {
            coords.push(mid + half * node);
            let (n, d) = self.cell_quadrature(rule, cell, ks, coords, depth + 1);
            coords.pop();
            num += weight * half * n;
            den += weight * half * d;
        }
        (num, den)
    }
}

/// Exact `dw`-mass of a one-dimensional cell for the weight `2^k |y|^{2k}`.
pub fn cell_mass_1d(a: f64, b: f64, k: f64) -> f64 {
    let anti = |s: f64| s.signum() * s.abs().powf(2.0 * k + 1.0) / (2.0 * k + 1.0);
    (2.0f64).powf(k) * (anti(b) - anti(a))
}

fn interp_radial(nodes: &[f64], values: &[f64], r: f64) -> f64 {
    if r <= nodes[0] {
        return values[0];
    }
    if r > *nodes.last().unwrap() {
        return 0.0;
    }
    let i = nodes.partition_point(|&n| n < r);
    let (n0, n1) = (nodes[i - 1], nodes[i]);
    let (v0, v1) = (values[i - 1], values[i]);
    v0 + (v1 - v0) * (r - n0) / (n1 - n0)
}

fn radial_point(dim: usize, r: f64) -> Vector {
    let mut c = vec![0.0; dim];
    c[0] = r;
    Vector::new(c)
}
