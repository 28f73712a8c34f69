//! Normalized root systems, their finite reflection groups, and orbit
//! geometry.
//!
//! A root system here is a finite set `R` of nonzero vectors with
//! `||alpha|| = sqrt(2)`, closed under negation with no other parallel roots,
//! invariant under its own reflections, and carrying a reflection-invariant
//! positive multiplicity `k(alpha)`.  The group generated by the reflections
//! is required to be finite (enforced by an element cap).  Everything
//! downstream (weights, kernels, walk sums) consumes these types.

pub mod walks;

use crate::error::{Error, Result};

/// Hard cap on the reflection-group order.
pub const GROUP_CAP: usize = 1024;

/// Tolerance for deduplicating vectors and group elements (max-norm).
pub const DEDUP_TOL: f64 = 1e-9;

/// Below this (scaled by `1 + ||v||`) a pairing `<v, alpha>` counts as zero,
/// i.e. `v` lies on the reflecting hyperplane of `alpha`.
pub const HYPERPLANE_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Small dense linear algebra (ambient dimension is 1..=3 in practice)
// ---------------------------------------------------------------------------

/// Point or direction in `R^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(!coords.is_empty(), "zero-dimensional vector");
        Self(coords)
    }

    pub fn of(coords: &[f64]) -> Self {
        Self::new(coords.to_vec())
    }

    /// One-dimensional vector; the rank-1 call sites use this constantly.
    pub fn scalar(x: f64) -> Self {
        Self(vec![x])
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|a| c * a).collect())
    }

    pub fn dist(&self, other: &Vector) -> f64 {
        self.sub(other).norm()
    }

    /// Max-norm distance, used for deduplication.
    pub fn max_abs_diff(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector::new(v)
    }
}

/// Row-major square matrix acting on `Vector`s.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    n: usize,
    a: Vec<f64>,
}

impl SquareMatrix {
    pub fn identity(n: usize) -> Self {
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = 1.0;
        }
        Self { n, a }
    }

    /// Householder-type reflection `I - 2 alpha alpha^T / ||alpha||^2`.
    pub fn reflection(alpha: &Vector) -> Self {
        let n = alpha.dim();
        let s = 2.0 / alpha.norm_sq();
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = f64::from(u8::from(i == j)) - s * alpha[i] * alpha[j];
            }
        }
        Self { n, a }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.a
    }

    pub fn apply(&self, v: &Vector) -> Vector {
        debug_assert_eq!(self.n, v.dim());
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.a[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v.coords()).map(|(m, x)| m * x).sum();
        }
        Vector::new(out)
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        debug_assert_eq!(self.n, other.n);
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let lik = self.a[i * n + k];
                if lik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    a[i * n + j] += lik * other.a[k * n + j];
                }
            }
        }
        SquareMatrix { n, a }
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        debug_assert_eq!(self.n, other.n);
        self.a
            .iter()
            .zip(&other.a)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm of `M M^T - I`; zero for exact orthogonal matrices.
    pub fn orthogonality_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut dot = 0.0;
                for k in 0..n {
                    dot += self.a[i * n + k] * self.a[j * n + k];
                }
                let target = f64::from(u8::from(i == j));
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Reflects `x` through the hyperplane orthogonal to `alpha`.
pub fn reflect(alpha: &Vector, x: &Vector) -> Vector {
    let c = 2.0 * x.dot(alpha) / alpha.norm_sq();
    x.sub(&alpha.scale(c))
}

// ---------------------------------------------------------------------------
// Root systems
// ---------------------------------------------------------------------------

/// Finite normalized root system with reflection-invariant multiplicities.
#[derive(Debug, Clone)]
pub struct RootSystem {
    dim: usize,
    roots: Vec<Vector>,
    multiplicities: Vec<f64>,
}

impl RootSystem {
    /// Validates and wraps explicit root data.  All structural violations are
    /// reported together.
    pub fn new(roots: Vec<Vector>, multiplicities: Vec<f64>) -> Result<Self> {
        let mut problems: Vec<String> = Vec::new();
        if roots.is_empty() {
            return Err(Error::InvalidRootSystem("empty root set".into()));
        }
        let dim = roots[0].dim();
        if multiplicities.len() != roots.len() {
            problems.push(format!(
                "{} roots but {} multiplicities",
                roots.len(),
                multiplicities.len()
            ));
        }
        for (i, r) in roots.iter().enumerate() {
            if r.dim() != dim {
                problems.push(format!("root {i} has dimension {} != {dim}", r.dim()));
            } else {
                let nsq = r.norm_sq();
                if (nsq - 2.0).abs() > 1e-9 {
                    problems.push(format!("root {i} has squared norm {nsq}, expected 2"));
                }
            }
        }
        for (i, &k) in multiplicities.iter().enumerate() {
            if !(k > 0.0) || !k.is_finite() {
                problems.push(format!("multiplicity {i} is {k}, expected positive finite"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidRootSystem(problems.join("; ")));
        }

        let system = Self { dim, roots, multiplicities };
        let find = |v: &Vector| -> Option<usize> {
            system.roots.iter().position(|r| r.max_abs_diff(v) <= DEDUP_TOL)
        };
        for (i, r) in system.roots.iter().enumerate() {
            for (j, s) in system.roots.iter().enumerate() {
                if j > i && r.max_abs_diff(s) <= DEDUP_TOL {
                    problems.push(format!("roots {i} and {j} coincide"));
                }
                // Reduced: the only root parallel to alpha besides itself is
                // -alpha.
                if j != i {
                    let cos = r.dot(s) / 2.0;
                    if cos.abs() > 1.0 - 1e-9 && r.max_abs_diff(&s.scale(-1.0)) > DEDUP_TOL {
                        problems.push(format!("roots {i} and {j} are parallel"));
                    }
                }
            }
            if find(&r.scale(-1.0)).is_none() {
                problems.push(format!("negation of root {i} is missing"));
            }
            // Invariance of R and of k under every reflection.
            for (j, s) in system.roots.iter().enumerate() {
                let image = reflect(r, s);
                match find(&image) {
                    None => problems.push(format!(
                        "reflection through root {i} maps root {j} outside the system"
                    )),
                    Some(l) => {
                        let dk = (system.multiplicities[j] - system.multiplicities[l]).abs();
                        if dk > 1e-12 {
                            problems.push(format!(
                                "multiplicity not reflection-invariant on roots {j} -> {l}"
                            ));
                        }
                    }
                }
            }
        }
        problems.dedup();
        if problems.is_empty() {
            Ok(system)
        } else {
            Err(Error::InvalidRootSystem(problems.join("; ")))
        }
    }

    /// `Z_2^N` product system: roots `±sqrt(2) e_i` with per-coordinate
    /// multiplicities.
    pub fn product_z2(multiplicities: &[f64]) -> Result<Self> {
        let n = multiplicities.len();
        if n == 0 {
            return Err(Error::InvalidRootSystem("no coordinates given".into()));
        }
        let mut roots = Vec::with_capacity(2 * n);
        let mut ks = Vec::with_capacity(2 * n);
        for (i, &k) in multiplicities.iter().enumerate() {
            for sign in [1.0, -1.0] {
                let mut v = vec![0.0; n];
                v[i] = sign * std::f64::consts::SQRT_2;
                roots.push(Vector::new(v));
                ks.push(k);
            }
        }
        Self::new(roots, ks)
    }

    /// Dihedral system `I_2(m)`: `2m` planar roots at angles `pi j / m`.
    ///
    /// `multiplicities` holds one value (all roots) or, for even `m`, two
    /// values alternating between the two reflection orbits.
    pub fn dihedral(m: usize, multiplicities: &[f64]) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidRootSystem(format!(
                "dihedral order parameter {m} < 2"
            )));
        }
        let assign: Box<dyn Fn(usize) -> f64> = match multiplicities {
            [k] => {
                let k = *k;
                Box::new(move |_| k)
            }
            [k0, k1] => {
                let (k0, k1) = (*k0, *k1);
                Box::new(move |j| if j % 2 == 0 { k0 } else { k1 })
            }
            _ => {
                return Err(Error::InvalidRootSystem(
                    "dihedral systems take one or two multiplicities".into(),
                ))
            }
        };
        let mut roots = Vec::with_capacity(2 * m);
        let mut ks = Vec::with_capacity(2 * m);
        for j in 0..2 * m {
            let phi = std::f64::consts::PI * j as f64 / m as f64;
            roots.push(Vector::new(vec![
                std::f64::consts::SQRT_2 * phi.cos(),
                std::f64::consts::SQRT_2 * phi.sin(),
            ]));
            ks.push(assign(j));
        }
        Self::new(roots, ks)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn roots(&self) -> &[Vector] {
        &self.roots
    }

    pub fn multiplicity(&self, root_index: usize) -> f64 {
        self.multiplicities[root_index]
    }

    pub fn multiplicities(&self) -> &[f64] {
        &self.multiplicities
    }

    /// Sum of multiplicities over all roots; the homogeneous dimension is
    /// `dim + total_multiplicity`.
    pub fn total_multiplicity(&self) -> f64 {
        self.multiplicities.iter().sum()
    }

    /// True when no root pairing separates `x` and `y` with strictly opposite
    /// signs, i.e. both lie in a common closed Weyl chamber.  Pairings within
    /// `HYPERPLANE_TOL * (1 + ||v||)` of zero count as zero.
    pub fn same_closed_chamber(&self, x: &Vector, y: &Vector) -> bool {
        let cx = HYPERPLANE_TOL * (1.0 + x.norm());
        let cy = HYPERPLANE_TOL * (1.0 + y.norm());
        for alpha in &self.roots {
            let px = x.dot(alpha);
            let py = y.dot(alpha);
            if px.abs() <= cx * alpha.norm() || py.abs() <= cy * alpha.norm() {
                continue;
            }
            if (px > 0.0) != (py > 0.0) {
                return false;
            }
        }
        true
    }
}

// ---------------------------------------------------------------------------
// Reflection groups
// ---------------------------------------------------------------------------

/// Group element: orthogonal matrix plus a shortest generating word found
/// during closure (indices into the root list; empty word is the identity).
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub matrix: SquareMatrix,
    pub word: Vec<usize>,
}

/// The finite group generated by the reflections of a root system.
#[derive(Debug, Clone)]
pub struct ReflectionGroup {
    system: RootSystem,
    elements: Vec<GroupElement>,
}

impl ReflectionGroup {
    /// Closes the generator set under multiplication (breadth-first, so the
    /// stored words are shortest).  Fails if the closure exceeds `GROUP_CAP`.
    pub fn generate(system: &RootSystem) -> Result<Self> {
        // Antipodal roots give the same reflection; keep one generator per
        // reflection but remember a root index for the words.
        let mut generators: Vec<(usize, SquareMatrix)> = Vec::new();
        for (i, alpha) in system.roots().iter().enumerate() {
            let m = SquareMatrix::reflection(alpha);
            if !generators.iter().any(|(_, g)| g.max_abs_diff(&m) <= DEDUP_TOL) {
                generators.push((i, m));
            }
        }

        let mut elements = vec![GroupElement {
            matrix: SquareMatrix::identity(system.dim()),
            word: Vec::new(),
        }];
        let mut cursor = 0;
        while cursor < elements.len() {
            let current = elements[cursor].clone();
            for (root_index, g) in &generators {
                let m = g.mul(&current.matrix);
                if elements.iter().any(|e| e.matrix.max_abs_diff(&m) <= DEDUP_TOL) {
                    continue;
                }
                let mut word = Vec::with_capacity(current.word.len() + 1);
                word.push(*root_index);
                word.extend_from_slice(&current.word);
                elements.push(GroupElement { matrix: m, word });
                if elements.len() > GROUP_CAP {
                    return Err(Error::GroupTooLarge { cap: GROUP_CAP });
                }
            }
            cursor += 1;
        }

        // Deterministic element order, independent of closure details.
        elements.sort_by(|a, b| {
            a.matrix
                .entries()
                .iter()
                .zip(b.matrix.entries())
                .find_map(|(x, y)| {
                    let ord = x.total_cmp(y);
                    (ord != std::cmp::Ordering::Equal).then_some(ord)
                })
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        Ok(Self { system: system.clone(), elements })
    }

    pub fn system(&self) -> &RootSystem {
        &self.system
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    /// Orbit `G x`, deduplicated, in deterministic order.
    pub fn orbit(&self, x: &Vector) -> Vec<Vector> {
        let mut points: Vec<Vector> = Vec::with_capacity(self.order());
        for e in &self.elements {
            let p = e.matrix.apply(x);
            if !points.iter().any(|q| q.max_abs_diff(&p) <= DEDUP_TOL) {
                points.push(p);
            }
        }
        points
    }

    /// Orbit distance `min over sigma of ||x - sigma(y)||`; a metric on orbit
    /// space.
    pub fn orbit_distance(&self, x: &Vector, y: &Vector) -> f64 {
        self.elements
            .iter()
            .map(|e| x.dist(&e.matrix.apply(y)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest number of reflections taking `y` into the closed chamber of
    /// `x` (zero when they already share one).  Breadth-first search on the
    /// orbit of `y`.
    pub fn reflection_count(&self, x: &Vector, y: &Vector) -> Result<usize> {
        if self.system.same_closed_chamber(x, y) {
            return Ok(0);
        }
        let mut states: Vec<Vector> = vec![y.clone()];
        let mut depth: Vec<usize> = vec![0];
        let mut cursor = 0;
        while cursor < states.len() {
            let d = depth[cursor];
            let current = states[cursor].clone();
            for alpha in self.system.roots() {
                let next = reflect(alpha, &current);
                if states.iter().any(|s| s.max_abs_diff(&next) <= DEDUP_TOL) {
                    continue;
                }
                if self.system.same_closed_chamber(x, &next) {
                    return Ok(d + 1);
                }
                states.push(next);
                depth.push(d + 1);
            }
            cursor += 1;
        }
        Err(Error::Inconsistent(
            "no orbit point reached the target chamber; chamber test and orbit disagree".into(),
        ))
    }

    /// Redundant chamber test: the sign criterion must agree with
    /// `orbit_distance(x, y) == ||x - y||`.  Returns the shared verdict or an
    /// internal consistency error.  Exercised by the test suite on random
    /// inputs; production call sites use `same_closed_chamber` directly.
    pub fn chamber_cross_check(&self, x: &Vector, y: &Vector) -> Result<bool> {
        let by_signs = self.system.same_closed_chamber(x, y);
        let tol = 1e-9 * (1.0 + x.norm() + y.norm());
        let by_distance = (self.orbit_distance(x, y) - x.dist(y)).abs() <= tol;
        if by_signs == by_distance {
            Ok(by_signs)
        } else {
            Err(Error::Inconsistent(format!(
                "chamber sign test ({by_signs}) disagrees with distance test ({by_distance}) \
                 at x={:?}, y={:?}",
                x.coords(),
                y.coords()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rank1() -> RootSystem {
        RootSystem::product_z2(&[1.0]).unwrap()
    }

    #[test]
    fn reflection_is_an_involution_and_isometry() {
        let alpha = Vector::of(&[std::f64::consts::SQRT_2, 0.0]);
        let x = Vector::of(&[0.3, -1.7]);
        let rx = reflect(&alpha, &x);
        assert!(rx.max_abs_diff(&Vector::of(&[-0.3, -1.7])) < 1e-15);
        assert!(reflect(&alpha, &rx).max_abs_diff(&x) < 1e-15);
        assert!((rx.norm() - x.norm()).abs() < 1e-15);
    }

    #[test]
    fn product_system_group_orders() {
        let g1 = ReflectionGroup::generate(&rank1()).unwrap();
        assert_eq!(g1.order(), 2);
        let g2 = ReflectionGroup::generate(&RootSystem::product_z2(&[1.0, 0.5]).unwrap()).unwrap();
        assert_eq!(g2.order(), 4);
        let g3 =
            ReflectionGroup::generate(&RootSystem::product_z2(&[1.0, 0.5, 2.0]).unwrap()).unwrap();
        assert_eq!(g3.order(), 8);
    }

    #[test]
    fn dihedral_group_orders() {
        for m in [2usize, 3, 4, 5, 6, 12] {
            let sys = RootSystem::dihedral(m, &[0.7]).unwrap();
            assert_eq!(sys.roots().len(), 2 * m);
            let g = ReflectionGroup::generate(&sys).unwrap();
            assert_eq!(g.order(), 2 * m, "dihedral m={m}");
        }
    }

    #[test]
    fn group_elements_are_orthogonal_and_words_reproduce_matrices() {
        let sys = RootSystem::dihedral(3, &[1.0]).unwrap();
        let g = ReflectionGroup::generate(&sys).unwrap();
        for e in g.elements() {
            assert!(e.matrix.orthogonality_defect() < 1e-10);
            let mut m = SquareMatrix::identity(sys.dim());
            for &i in &e.word {
                m = m.mul(&SquareMatrix::reflection(&sys.roots()[i]));
            }
            assert!(m.max_abs_diff(&e.matrix) < 1e-10);
        }
    }

    #[test]
    fn invalid_systems_are_rejected_with_reasons() {
        // Wrong normalization.
        let err = RootSystem::new(vec![Vector::of(&[1.0]), Vector::of(&[-1.0])], vec![1.0, 1.0])
            .unwrap_err();
        assert!(err.to_string().contains("squared norm"));

        // Missing negation.
        let r2 = std::f64::consts::SQRT_2;
        let err =
            RootSystem::new(vec![Vector::of(&[r2, 0.0]), Vector::of(&[0.0, r2])], vec![1.0, 1.0])
                .unwrap_err();
        assert!(err.to_string().contains("negation"));

        // Non-positive multiplicity.
        let err = RootSystem::new(vec![Vector::of(&[r2]), Vector::of(&[-r2])], vec![0.0, 0.0])
            .unwrap_err();
        assert!(err.to_string().contains("positive"));

        // Odd dihedral has a single reflection orbit: two distinct values
        // cannot be invariant.
        let err = RootSystem::dihedral(3, &[1.0, 2.0]).unwrap_err();
        assert!(err.to_string().contains("invariant"));
    }

    #[test]
    fn orbit_sizes_divide_group_order() {
        let sys = RootSystem::product_z2(&[1.0, 1.0]).unwrap();
        let g = ReflectionGroup::generate(&sys).unwrap();
        assert_eq!(g.orbit(&Vector::of(&[1.0, 2.0])).len(), 4);
        assert_eq!(g.orbit(&Vector::of(&[1.0, 0.0])).len(), 2);
        assert_eq!(g.orbit(&Vector::of(&[0.0, 0.0])).len(), 1);
    }

    #[test]
    fn orbit_distance_rank1_closed_form() {
        let g = ReflectionGroup::generate(&rank1()).unwrap();
        for (x, y) in [(1.0f64, 2.0f64), (1.0, -2.0), (-0.3, 0.2), (0.0, 5.0)] {
            let want = (x - y).abs().min((x + y).abs());
            let got = g.orbit_distance(&Vector::scalar(x), &Vector::scalar(y));
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn chamber_test_rank1_is_sign_compatibility() {
        let sys = rank1();
        assert!(sys.same_closed_chamber(&Vector::scalar(1.0), &Vector::scalar(2.0)));
        assert!(!sys.same_closed_chamber(&Vector::scalar(1.0), &Vector::scalar(-2.0)));
        // Hyperplane points belong to every closed chamber.
        assert!(sys.same_closed_chamber(&Vector::scalar(1.0), &Vector::scalar(0.0)));
        assert!(sys.same_closed_chamber(&Vector::scalar(0.0), &Vector::scalar(-3.0)));
    }

    #[test]
    fn reflection_counts_on_the_product_plane() {
        let sys = RootSystem::product_z2(&[1.0, 1.0]).unwrap();
        let g = ReflectionGroup::generate(&sys).unwrap();
        let x = Vector::of(&[1.0, 1.0]);
        assert_eq!(g.reflection_count(&x, &Vector::of(&[2.0, 3.0])).unwrap(), 0);
        assert_eq!(g.reflection_count(&x, &Vector::of(&[2.0, -3.0])).unwrap(), 1);
        assert_eq!(g.reflection_count(&x, &Vector::of(&[-2.0, -3.0])).unwrap(), 2);
    }

    #[test]
    fn chamber_cross_check_agrees_on_generic_points() {
        let sys = RootSystem::dihedral(3, &[0.8]).unwrap();
        let g = ReflectionGroup::generate(&sys).unwrap();
        let pts = [
            Vector::of(&[0.9, 0.1]),
            Vector::of(&[-0.4, 1.3]),
            Vector::of(&[0.2, -2.0]),
            Vector::of(&[2.5, 0.7]),
        ];
        for x in &pts {
            for y in &pts {
                g.chamber_cross_check(x, y).unwrap();
            }
        }
    }
}
