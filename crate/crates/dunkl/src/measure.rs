//! The weighted measure attached to a root system and its ball volumes.
//!
//! The density is `w(x) = prod over roots |<x, alpha>|^k(alpha)`.  Volumes of
//! Euclidean balls under this measure scale with the homogeneous dimension
//! `NN = dim + sum k(alpha)`: `w(B(tx, tr)) = t^NN w(B(x, r))`, and are
//! comparable to the closed form `r^dim * prod (|<x, alpha>| + r)^k(alpha)`.
//! These volumes normalize every kernel bound downstream, so they are exact in
//! rank one, spectrally accurate in rank two, and Monte Carlo beyond.

use crate::error::{Error, Result};
use crate::quad::{split_and_grade, GaussLegendre};
use crate::rootsystem::{RootSystem, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default sample count for Monte Carlo volumes.
pub const MC_DEFAULT_SAMPLES: u64 = 1_000_000;

/// How to evaluate a ball volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VolumeMethod {
    /// Exact antiderivative (rank 1) or graded polar panels (rank 2).
    Quadrature,
    /// Stratified Monte Carlo, any rank; reports a standard error.
    MonteCarlo { samples: u64, seed: u64 },
    /// The comparable closed form; cheap, correct up to system-dependent
    /// constants.
    Comparable,
}

/// Ball volume together with how it was obtained.
#[derive(Debug, Clone, Copy)]
pub struct BallVolumeEstimate {
    pub value: f64,
    /// Standard error; `None` for deterministic methods.
    pub std_error: Option<f64>,
}

/// The measure `w(x) dx` for a fixed root system.
#[derive(Debug, Clone)]
pub struct WeightedMeasure {
    system: RootSystem,
}

impl WeightedMeasure {
    pub fn new(system: RootSystem) -> Self {
        Self { system }
    }

    pub fn system(&self) -> &RootSystem {
        &self.system
    }

    /// Density `w(x)`; zero exactly on the reflection hyperplanes.
    pub fn density(&self, x: &Vector) -> f64 {
        let mut w = 1.0;
        for (i, alpha) in self.system.roots().iter().enumerate() {
            w *= x.dot(alpha).abs().powf(self.system.multiplicity(i));
        }
        w
    }

    /// `dim + sum of multiplicities`; governs all scaling laws.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.system.dim() as f64 + self.system.total_multiplicity()
    }

    /// Volume of `B(x, r)` under the measure.
    pub fn ball_volume(
        &self,
        x: &Vector,
        r: f64,
        method: VolumeMethod,
    ) -> Result<BallVolumeEstimate> {
        if x.dim() != self.system.dim() {
            return Err(Error::DimensionMismatch(format!(
                "center has dimension {}, system has {}",
                x.dim(),
                self.system.dim()
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "ball radius {r}, expected positive finite"
            )));
        }
        match method {
            VolumeMethod::Comparable => Ok(BallVolumeEstimate {
                value: self.ball_volume_comparable(x, r),
                std_error: None,
            }),
            VolumeMethod::MonteCarlo { samples, seed } => {
                Ok(self.ball_volume_monte_carlo(x, r, samples, seed))
            }
            VolumeMethod::Quadrature => match self.system.dim() {
                1 => Ok(BallVolumeEstimate {
                    value: self.ball_volume_rank1(x[0], r),
                    std_error: None,
                }),
                2 => Ok(BallVolumeEstimate {
                    value: self.ball_volume_rank2(x, r),
                    std_error: None,
                }),
                d => Err(Error::InvalidArgument(format!(
                    "quadrature ball volumes support dimension <= 2 (got {d}); \
                     use the Monte Carlo method"
                ))),
            },
        }
    }

    /// `r^dim * prod (|<x, alpha>| + r)^k(alpha)`; comparable to the true
    /// volume with system-dependent constants.
    pub fn ball_volume_comparable(&self, x: &Vector, r: f64) -> f64 {
        let mut v = r.powi(self.system.dim() as i32);
        for (i, alpha) in self.system.roots().iter().enumerate() {
            v *= (x.dot(alpha).abs() + r).powf(self.system.multiplicity(i));
        }
        v
    }

    /// Rank 1: the density is `(sqrt(2)|y|)^(2k)`, integrated exactly.
    fn ball_volume_rank1(&self, x: f64, r: f64) -> f64 {
        let k = self.system.multiplicity(0);
        let anti = |s: f64| s.signum() * s.abs().powf(2.0 * k + 1.0) / (2.0 * k + 1.0);
        2.0f64.powf(k) * (anti(x + r) - anti(x - r))
    }

    /// Rank 2: polar coordinates around the center.  The circle of radius
    /// `rho` crosses each reflection line at analytically known angles; panels
    /// split there and grade into the fractional-power zeros of the density.
    fn ball_volume_rank2(&self, x: &Vector, r: f64) -> f64 {
        let rule = GaussLegendre::new(16);
        let levels = 22;
        let two_pi = 2.0 * std::f64::consts::PI;

        // Radii where the circle is tangent to a reflection line: the set of
        // crossing angles changes there, so the radial integrand has a kink.
        let mut rho_cuts: Vec<f64> = self
            .system
            .roots()
            .iter()
            .map(|alpha| x.dot(alpha).abs() / alpha.norm())
            .collect();
        rho_cuts.push(x.norm());

        let angle_of = |alpha: &Vector| alpha[1].atan2(alpha[0]);

        let radial = |rho: f64| -> f64 {
            if rho == 0.0 {
                return 0.0;
            }
            let mut theta_cuts: Vec<f64> = Vec::new();
            for alpha in self.system.roots() {
                let c = -x.dot(alpha) / (rho * alpha.norm());
                if c.abs() <= 1.0 {
                    let spread = c.clamp(-1.0, 1.0).acos();
                    let base = angle_of(alpha);
                    for theta in [base + spread, base - spread] {
                        theta_cuts.push(theta.rem_euclid(two_pi));
                    }
                }
            }
            let panels = split_and_grade(0.0, two_pi, &theta_cuts, levels);
            let ring = rule.integrate_panels(&panels, |theta| {
                let p = Vector::new(vec![x[0] + rho * theta.cos(), x[1] + rho * theta.sin()]);
                self.density(&p)
            });
            rho * ring
        };

        let rho_panels = split_and_grade(0.0, r, &rho_cuts, levels);
        rule.integrate_panels(&rho_panels, radial)
    }

    /// Stratified Monte Carlo over the ball: uniform direction, radius
    /// stratified through its exact CDF `(s/r)^dim`.
    fn ball_volume_monte_carlo(
        &self,
        x: &Vector,
        r: f64,
        samples: u64,
        seed: u64,
    ) -> BallVolumeEstimate {
        let dim = self.system.dim();
        let euclidean = std::f64::consts::PI.powf(dim as f64 / 2.0) * r.powi(dim as i32)
            / statrs::function::gamma::gamma(dim as f64 / 2.0 + 1.0);

        let strata = 64u64;
        let per = (samples / strata).max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr_standard_normal;

        let mut total_mean = 0.0;
        let mut total_var = 0.0;
        for j in 0..strata {
            let lo = j as f64 / strata as f64;
            let hi = (j + 1) as f64 / strata as f64;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..per {
                // Uniform direction via normalized Gaussian.
                let mut dir = vec![0.0; dim];
                loop {
                    let mut norm_sq = 0.0;
                    for d in dir.iter_mut() {
                        *d = normal(&mut rng);
                        norm_sq += *d * *d;
                    }
                    if norm_sq > 1e-300 {
                        let inv = norm_sq.sqrt().recip();
                        dir.iter_mut().for_each(|d| *d *= inv);
                        break;
                    }
                }
                let v: f64 = rng.gen_range(lo..hi);
                let radius = r * v.powf(1.0 / dim as f64);
                let point = Vector::new(
                    x.coords().iter().zip(&dir).map(|(c, d)| c + radius * d).collect(),
                );
                let w = self.density(&point);
                sum += w;
                sum_sq += w * w;
            }
            let n = per as f64;
            let mean = sum / n;
            let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
            total_mean += mean / strata as f64;
            total_var += var / (n * (strata as f64) * (strata as f64));
        }
        BallVolumeEstimate {
            value: euclidean * total_mean,
            std_error: Some(euclidean * total_var.sqrt()),
        }
    }
}

/// Standard normal via Box-Muller; avoids pulling in a distributions crate for
/// one primitive.
fn rand_distr_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>();
        let v: f64 = rng.gen::<f64>();
        if u > f64::MIN_POSITIVE {
            let r = (-2.0 * u.ln()).sqrt();
            return r * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma;

    fn measure_of(ks: &[f64]) -> WeightedMeasure {
        WeightedMeasure::new(RootSystem::product_z2(ks).unwrap())
    }

    #[test]
    fn rank1_volume_closed_form_at_origin() {
        // w(B(0, r)) = 2^(k+1) r^(2k+1) / (2k+1).
        for k in [0.5, 1.0, 1.5] {
            let m = measure_of(&[k]);
            for r in [0.1, 1.0, 3.7] {
                let got = m
                    .ball_volume(&Vector::scalar(0.0), r, VolumeMethod::Quadrature)
                    .unwrap()
                    .value;
                let want = 2.0f64.powf(k + 1.0) * r.powf(2.0 * k + 1.0) / (2.0 * k + 1.0);
                assert!((got - want).abs() < 1e-12 * want, "k={k} r={r}: {got} vs {want}");
            }
        }
        // k = 1: (4/3) r^3.
        let m = measure_of(&[1.0]);
        let got = m.ball_volume(&Vector::scalar(0.0), 2.0, VolumeMethod::Quadrature).unwrap();
        assert!((got.value - 32.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_dimension_examples() {
        assert!((measure_of(&[1.5]).homogeneous_dimension() - 4.0).abs() < 1e-15);
        assert!((measure_of(&[1.0, 0.5]).homogeneous_dimension() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn rank2_volume_matches_beta_closed_form_at_origin() {
        // At the origin the polar integral factorizes; the angular part is a
        // Beta function.
        let (k1, k2) = (1.0, 0.5);
        let m = measure_of(&[k1, k2]);
        let r: f64 = 1.3;
        let nn = 2.0 + 2.0 * k1 + 2.0 * k2;
        let beta = gamma(k1 + 0.5) * gamma(k2 + 0.5) / gamma(k1 + k2 + 1.0);
        let want = r.powf(nn) / nn * 2.0f64.powf(k1 + k2) * 2.0 * beta;
        let got =
            m.ball_volume(&Vector::of(&[0.0, 0.0]), r, VolumeMethod::Quadrature).unwrap().value;
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn rank2_off_center_agrees_with_monte_carlo() {
        let m = measure_of(&[1.0, 1.0]);
        let x = Vector::of(&[0.7, -0.2]);
        let quad = m.ball_volume(&x, 1.1, VolumeMethod::Quadrature).unwrap().value;
        let mc = m
            .ball_volume(&x, 1.1, VolumeMethod::MonteCarlo { samples: 400_000, seed: 7 })
            .unwrap();
        let se = mc.std_error.unwrap();
        assert!(
            (quad - mc.value).abs() < 4.0 * se + 1e-6 * quad,
            "quad {quad} vs mc {} +- {se}",
            mc.value
        );
    }

    #[test]
    fn scaling_law_in_the_homogeneous_dimension() {
        let m = measure_of(&[0.8, 1.7]);
        let nn = m.homogeneous_dimension();
        let x = Vector::of(&[0.4, 1.1]);
        let (r, t) = (0.9, 2.5);
        let base = m.ball_volume(&x, r, VolumeMethod::Quadrature).unwrap().value;
        let scaled = m.ball_volume(&x.scale(t), t * r, VolumeMethod::Quadrature).unwrap().value;
        assert!((scaled - t.powf(nn) * base).abs() < 1e-7 * scaled);
    }

    #[test]
    fn monte_carlo_rank3_matches_sphere_moment_formula() {
        let ks = [1.0, 0.5, 1.5];
        let m = measure_of(&ks);
        let r: f64 = 1.0;
        // At the origin: r^NN/NN * 2^(sum k) * surface moment of
        // prod |u_i|^(2 k_i).
        let nn = m.homogeneous_dimension();
        let moment = 2.0 * ks.iter().map(|k| gamma(k + 0.5)).product::<f64>()
            / gamma(ks.iter().sum::<f64>() + 1.5);
        let want = r.powf(nn) / nn * 2.0f64.powf(ks.iter().sum::<f64>()) * moment;
        let got = m
            .ball_volume(
                &Vector::of(&[0.0, 0.0, 0.0]),
                r,
                VolumeMethod::MonteCarlo { samples: MC_DEFAULT_SAMPLES, seed: 42 },
            )
            .unwrap();
        let se = got.std_error.unwrap();
        assert!((got.value - want).abs() < 4.0 * se, "{} vs {want} (se {se})", got.value);
        assert!(se < 0.01 * want, "standard error too large: {se}");
    }

    #[test]
    fn comparable_form_brackets_the_true_volume() {
        let m = measure_of(&[1.0, 0.5]);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        let mut s = 1u64;
        for _ in 0..300 {
            // Cheap deterministic pseudo-random sweep.
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = |shift: u32| ((s >> shift) & 0xffff) as f64 / 65536.0;
            let x = Vector::of(&[6.0 * u(3) - 3.0, 6.0 * u(19) - 3.0]);
            let r = 0.05 + 3.0 * u(35);
            let v = m.ball_volume(&x, r, VolumeMethod::Quadrature).unwrap().value;
            let c = m.ball_volume_comparable(&x, r);
            let ratio = v / c;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        assert!(lo > 0.0 && hi.is_finite() && hi / lo < 1e3, "ratio range [{lo}, {hi}]");
    }

    #[test]
    fn quadrature_rejected_beyond_rank_two() {
        let m = measure_of(&[1.0, 1.0, 1.0]);
        let err = m
            .ball_volume(&Vector::of(&[0.0, 0.0, 0.0]), 1.0, VolumeMethod::Quadrature)
            .unwrap_err();
        assert!(err.to_string().contains("Monte Carlo"));
    }
}
