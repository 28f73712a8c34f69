//! Panel-based Gauss–Legendre quadrature.
//!
//! The weight functions integrated in this crate are smooth away from finitely
//! many known breakpoints (root hyperplanes, indicator edges) where they have
//! kinks or fractional-power behaviour `|s|^p` with `p > -1`.  Every consumer
//! therefore integrates with the same strategy: split the interval at the known
//! breakpoints, optionally refine geometrically toward a singular endpoint, and
//! apply a fixed Gauss–Legendre rule on each panel.  All summation is
//! sequential, so results do not depend on thread count.

/// Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the `n`-point rule by Newton iteration on the Legendre
    /// polynomial, accurate to machine precision for the sizes used here.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Roots come in +- pairs; compute the non-negative half.
        for i in 0..(n + 1) / 2 {
            // Chebyshev-based initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-15 {
                    let (p2, d2) = legendre_with_derivative(n, x);
                    dp = d2;
                    x -= p2 / d2;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes on `[-1, 1]`, ascending.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights matching [`nodes`](Self::nodes); they sum to 2.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Integrates `f` over `[a, b]` with this rule on the single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }

    /// Integrates `f` over a list of panels, sequentially.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, panels: &[(f64, f64)], mut f: F) -> f64 {
        let mut acc = 0.0;
        for &(a, b) in panels {
            acc += self.integrate(a, b, &mut f);
        }
        acc
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term
/// recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Splits `[a, b]` at every cut point strictly inside it; returns the ordered
/// panel list.  Cuts closer than `1e-14 * (b - a)` to each other or to the
/// endpoints are dropped.
pub fn split_at(a: f64, b: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    debug_assert!(b > a);
    let eps = 1e-14 * (b - a);
    let mut inner: Vec<f64> = cuts
        .iter()
        .copied()
        .filter(|&c| c > a + eps && c < b - eps)
        .collect();
    inner.sort_by(|p, q| p.partial_cmp(q).unwrap());
    inner.dedup_by(|p, q| (*p - *q).abs() <= eps);
    let mut panels = Vec::with_capacity(inner.len() + 1);
    let mut left = a;
    for c in inner {
        panels.push((left, c));
        left = c;
    }
    panels.push((left, b));
    panels
}

/// Endpoint selector for graded refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Lower,
    Upper,
}

/// Subdivides `[a, b]` into `levels + 1` panels shrinking geometrically
/// (factor 2) toward the chosen endpoint.  Used where the integrand behaves
/// like `|s - e|^p` with fractional `p > -1` at that endpoint: the fixed rule
/// on each graded panel then converges geometrically in `levels`.
pub fn grade_toward(a: f64, b: f64, end: Endpoint, levels: usize) -> Vec<(f64, f64)> {
    debug_assert!(b > a);
    let mut panels = Vec::with_capacity(levels + 1);
    let mut len = b - a;
    match end {
        Endpoint::Lower => {
            let mut right = b;
            for _ in 0..levels {
                len *= 0.5;
                panels.push((a + len, right));
                right = a + len;
            }
            panels.push((a, right));
            panels.reverse();
        }
        Endpoint::Upper => {
            let mut left = a;
            for _ in 0..levels {
                len *= 0.5;
                panels.push((left, b - len));
                left = b - len;
            }
            panels.push((left, b));
        }
    }
    panels
}

/// Splits `[a, b]` at the cuts and grades every panel toward each of its ends
/// that coincides with a cut or with a listed singular endpoint.  This is the
/// workhorse for weights `prod |<y, alpha>|^k` whose zeros are known exactly.
pub fn split_and_grade(a: f64, b: f64, cuts: &[f64], levels: usize) -> Vec<(f64, f64)> {
    let eps = 1e-13 * (b - a).max(1.0);
    let near_cut = |x: f64| cuts.iter().any(|&c| (x - c).abs() <= eps);
    let mut out = Vec::new();
    for (pa, pb) in split_at(a, b, cuts) {
        match (near_cut(pa), near_cut(pb)) {
            (false, false) => out.push((pa, pb)),
            (true, false) => out.extend(grade_toward(pa, pb, Endpoint::Lower, levels)),
            (false, true) => out.extend(grade_toward(pa, pb, Endpoint::Upper, levels)),
            (true, true) => {
                let mid = 0.5 * (pa + pb);
                out.extend(grade_toward(pa, mid, Endpoint::Lower, levels));
                out.extend(grade_toward(mid, pb, Endpoint::Upper, levels));
            }
        }
    }
    out
}

/// Like [`split_and_grade`], but additionally caps the panel width at
/// `max_width` so that integrands with a known oscillation scale (heat kernels
/// at time `t` vary on scale `sqrt(t)`) are resolved everywhere.
pub fn scaled_panels(
    a: f64,
    b: f64,
    max_width: f64,
    cuts: &[f64],
    levels: usize,
) -> Vec<(f64, f64)> {
    debug_assert!(max_width > 0.0);
    let eps = 1e-13 * (b - a).max(1.0);
    let near_cut = |x: f64| cuts.iter().any(|&c| (x - c).abs() <= eps);
    let mut out = Vec::new();
    for (pa, pb) in split_at(a, b, cuts) {
        let pieces = ((pb - pa) / max_width).ceil().max(1.0) as usize;
        let step = (pb - pa) / pieces as f64;
        for j in 0..pieces {
            let qa = pa + j as f64 * step;
            let qb = if j + 1 == pieces { pb } else { pa + (j + 1) as f64 * step };
            let grade_lo = j == 0 && near_cut(pa);
            let grade_hi = j + 1 == pieces && near_cut(pb);
            match (grade_lo, grade_hi) {
                (false, false) => out.push((qa, qb)),
                (true, false) => out.extend(grade_toward(qa, qb, Endpoint::Lower, levels)),
                (false, true) => out.extend(grade_toward(qa, qb, Endpoint::Upper, levels)),
                (true, true) => {
                    let mid = 0.5 * (qa + qb);
                    out.extend(grade_toward(qa, mid, Endpoint::Lower, levels));
                    out.extend(grade_toward(mid, qb, Endpoint::Upper, levels));
                }
            }
        }
    }
    out
}
