//! Dense kernel matrices on a space grid.
//!
//! A `KernelMatrix` stores the values `K_t(x_i, y_j)` of an integral kernel at
//! grid nodes.  The discrete composition rule mirrors the continuous one: for
//! kernels `A_s` and `B_t`,
//!
//! `(A compose B)(x_i, y_j) = sum_l A(x_i, y_l) m_l B(y_l, y_j)`,
//!
//! with `m_l` the node quadrature weights, approximating
//! `integral A_s(x, z) B_t(z, y) dw(z)`.

use crate::error::{Error, Result};
use crate::schrodinger::grid::SpaceGrid;

/// Multiplies row-major square matrices: `out = a * b`.
pub fn matmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * n);
    debug_assert_eq!(out.len(), n * n);
    unsafe {
        matrixmultiply::dgemm(
            n,
            n,
            n,
            1.0,
            a.as_ptr(),
            n as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Kernel values at grid nodes, row-major: `values[i * dim + j] = K(x_i, y_j)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    t: f64,
    dim: usize,
    values: Vec<f64>,
    symmetric: bool,
}

impl KernelMatrix {
    /// Wraps raw values; checks shape, positivity up to roundoff, and (when
    /// flagged) symmetry.
    pub fn from_values(t: f64, dim: usize, values: Vec<f64>, symmetric: bool) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::InvalidArgument(format!(
                "kernel matrix needs {} values for dimension {dim}, got {}",
                dim * dim,
                values.len()
            )));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("kernel time must be finite, got {t}")));
        }
        let max = values.iter().copied().fold(0.0f64, |m, v| m.max(v.abs()));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("kernel matrix contains non-finite entries".into()));
        }
        if values.iter().any(|&v| v < -1e-12 * max.max(1.0)) {
            return Err(Error::Numeric("kernel matrix has significantly negative entries".into()));
        }
        if symmetric {
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let d = (values[i * dim + j] - values[j * dim + i]).abs();
                    if d > 1e-10 * max.max(1e-300) {
                        return Err(Error::Numeric(format!(
                            "kernel flagged symmetric but entry ({i}, {j}) differs by {d:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(Self { t, dim, values, symmetric })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim + j]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute asymmetry `|K_ij - K_ji|` relative to the largest
    /// entry.
    pub fn symmetry_defect(&self) -> f64 {
        let max = self.max_value().abs().max(1e-300);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.value(i, j) - self.value(j, i)).abs());
            }
        }
        worst / max
    }

    /// Discrete semigroup composition `self @ diag(mass) @ other`; the times
    /// add.
    pub fn compose(&self, other: &KernelMatrix, grid: &SpaceGrid) -> Result<KernelMatrix> {
        if self.dim != other.dim || self.dim != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "cannot compose {} x {} with {} x {} on a grid of {} nodes",
                self.dim,
                self.dim,
                other.dim,
                other.dim,
                grid.len()
            )));
        }
        let n = self.dim;
        let mut weighted = other.values.clone();
        for (l, row) in weighted.chunks_mut(n).enumerate() {
            let m = grid.mass(l);
            for v in row {
                *v *= m;
            }
        }
        let mut out = vec![0.0; n * n];
        matmul(n, &self.values, &weighted, &mut out);
        KernelMatrix::from_values(self.t + other.t, n, out, false)
    }

    /// `sum_j K(x_i, y_j) m_j`: the discrete total mass seen from row `i`.
    pub fn row_mass(&self, i: usize, grid: &SpaceGrid) -> f64 {
        self.values[i * self.dim..(i + 1) * self.dim]
            .iter()
            .zip(grid.masses())
            .map(|(v, m)| v * m)
            .sum()
    }

    /// Supremum of `|self - other|` over the given rows and all columns,
    /// relative to the supremum of `|other|` over the same entries.
    pub fn sup_rel_diff(&self, other: &KernelMatrix, rows: &[usize]) -> f64 {
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for &i in rows {
            for j in 0..self.dim {
                num = num.max((self.value(i, j) - other.value(i, j)).abs());
                den = den.max(other.value(i, j).abs());
            }
        }
        num / den.max(1e-300)
    }
}
