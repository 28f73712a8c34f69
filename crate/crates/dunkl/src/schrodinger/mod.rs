//! Discretized Schroedinger semigroups `exp(t (Delta_k - V))`.
//!
//! The construction follows the splitting-product route: on a tensor grid
//! carrying per-cell Gauss rules for the reflection weight, one step of
//! length `tau = t/n` alternates the heat kernel matrix at time `tau` with
//! diagonal damping by the cell-averaged potential.  The symmetrized (half
//! potential, heat, half potential) variant is second-order accurate in `1/n`
//! and keeps the kernel exactly symmetric; the one-sided variant matches the
//! Feynman-Kac discretization and is kept for cross-checks.  Powers are
//! computed by binary squaring of the mass-symmetrized step matrix.
//!
//! Submodules: [`grid`] (weighted tensor grids), [`potential`] (potential
//! shapes and summaries), [`matrix`] (dense kernel containers), [`green`]
//! (Green operators), [`theorem`] (the heat-content equivalence harness).

pub mod green;
pub mod grid;
pub mod matrix;
pub mod potential;
pub mod theorem;

use crate::error::{Error, Result};
use crate::heat::HeatKernelEvaluator;
use crate::quad::GaussLegendre;
use crate::rootsystem::Vector;

pub use green::{green_potential, green_sup, GreenKind, GreenParams, GreenReport, GreenValue};
pub use grid::SpaceGrid;
pub use matrix::KernelMatrix;
pub use potential::{Potential, PotentialKind};
pub use theorem::{verify_theorem, TheoremConfig, TheoremFlags, TheoremReport};

/// Cap on dense-grid node counts; dense kernels take `O(len^2)` memory and
/// `O(len^3)` time per composition.
pub const MAX_DENSE_NODES: usize = 4096;

/// Per-axis log-factor table cutoff: entries whose rigorous coordinate upper
/// bound falls below this contribute exactly zero after `exp`, even when
/// combined with the largest factor of another axis.
const LN_SKIP: f64 = -800.0;

pub(crate) fn check_grid(grid: &SpaceGrid, ev: &HeatKernelEvaluator) -> Result<()> {
    if grid.dim() != ev.system().dim() {
        return Err(Error::DimensionMismatch(format!(
            "grid has dimension {}, evaluator has {}",
            grid.dim(),
            ev.system().dim()
        )));
    }
    for (gk, ek) in grid.multiplicities().iter().zip(ev.system().multiplicities()) {
        if (gk - ek).abs() > 1e-14 {
            return Err(Error::InvalidArgument(
                "grid multiplicities differ from the evaluator's".into(),
            ));
        }
    }
    if grid.len() > MAX_DENSE_NODES {
        return Err(Error::BudgetExceeded(format!(
            "grid has {} nodes; dense kernels are capped at {MAX_DENSE_NODES}",
            grid.len()
        )));
    }
    Ok(())
}

/// Heat kernel matrix `H(i, j) = h_t(x_i, x_j)` on the grid nodes.
///
/// Assembly runs per axis: the kernel factorizes over coordinates, so an
/// `M x M` log-factor table per axis covers all `len^2` entries.  Interior
/// rows (margin `8 sqrt(t) + 2 h` from the boundary, where truncation leaves
/// mass deficits below `1e-8`) must carry discrete mass `1` within
/// `leak_tol`; a violation means the spacing cannot resolve the kernel at
/// this `t` (or the domain is genuinely too small) and is reported with a
/// radius that would fit the worst row.
pub fn heat_matrix(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    t: f64,
    leak_tol: f64,
) -> Result<KernelMatrix> {
    check_grid(grid, ev)?;
    if !(leak_tol > 0.0 && leak_tol < 1.0) {
        return Err(Error::InvalidArgument(format!("leak tolerance {leak_tol} outside (0, 1)")));
    }
    let tables = axis_log_tables(grid, ev, t)?;
    let n = grid.len();
    let mut values = vec![0.0f64; n * n];
    match grid.dim() {
        1 => {
            let tab = &tables[0];
            for i in 0..n {
                for j in i..n {
                    let v = tab[i * n + j].exp();
                    values[i * n + j] = v;
                    values[j * n + i] = v;
                }
            }
        }
        _ => {
            let nb = grid.axes()[1].len();
            let (ta, tb) = (&tables[0], &tables[1]);
            let na = grid.axes()[0].len();
            for i in 0..n {
                let (ia, ib) = (i / nb, i % nb);
                for j in i..n {
                    let (ja, jb) = (j / nb, j % nb);
                    let v = (ta[ia * na + ja] + tb[ib * nb + jb]).exp();
                    values[i * n + j] = v;
                    values[j * n + i] = v;
                }
            }
        }
    }
    let matrix = KernelMatrix::from_values(t, n, values, true)?;

    let margin = 8.0 * t.sqrt() + 2.0 * grid.spacing();
    let mut worst: Option<(usize, f64)> = None;
    for i in grid.interior_indices(margin) {
        let mass = matrix.row_mass(i, grid);
        let defect = (mass - 1.0).abs();
        if defect > worst.map_or(0.0, |(_, d)| d) {
            worst = Some((i, defect));
        }
    }
    if let Some((i, defect)) = worst {
        if defect > leak_tol {
            let x = grid.point(i);
            let norm = (0..grid.dim()).map(|d| x[d].abs()).fold(0.0f64, f64::max);
            return Err(Error::DomainTooSmall {
                detail: format!(
                    "heat matrix row at |x| = {norm:.3} misses mass 1 by {defect:.3e} \
                     (tolerance {leak_tol:.1e}) at t = {t}; check that the spacing \
                     {:.3e} resolves sqrt(t)",
                    grid.spacing()
                ),
                suggested_radius: norm + 12.0 * t.sqrt() + 2.0 * grid.spacing(),
            });
        }
    }
    Ok(matrix)
}

/// Per-axis tables of the coordinate log heat factor at every axis node pair.
pub(crate) fn axis_log_tables(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    t: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut tables = Vec::with_capacity(grid.dim());
    for (d, axis) in grid.axes().iter().enumerate() {
        let m = axis.len();
        let nodes = axis.nodes();
        let k = grid.multiplicities()[d];
        let ln_prefix_cap = 2.0 + (k + 0.5) * (2.0 * t).ln().abs();
        let mut tab = vec![f64::NEG_INFINITY; m * m];
        for a in 0..m {
            for b in a..m {
                let (u, v) = (nodes[a], nodes[b]);
                let gap = u.abs() - v.abs();
                // Coordinate factor bound: prefix - (|u|-|v|)^2/(4t), with the
                // prefix generously overestimated.
                let ln = if ln_prefix_cap - gap * gap / (4.0 * t) < LN_SKIP {
                    f64::NEG_INFINITY
                } else {
                    ev.coordinate_log_heat_factor(d, u, v, t)?
                };
                tab[a * m + b] = ln;
                tab[b * m + a] = ln;
            }
        }
        tables.push(tab);
    }
    Ok(tables)
}

/// Operator-splitting flavor for one step `tau` of the product construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    /// `e^{-tau V/2} H_tau e^{-tau V/2}`: second order, symmetric kernel.
    Strang,
    /// `H_tau e^{-tau V}`: first order; matches the Feynman-Kac
    /// discretization with the potential sampled after each move.
    Left,
}

/// Splitting-product kernel for `exp(t (Delta_k - V))` with `n` steps.
///
/// Entrywise `0 <= result`, and `result <= heat_matrix(t)` up to the
/// discretization tolerance.
pub fn trotter_kernel(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    n: usize,
    splitting: Splitting,
) -> Result<KernelMatrix> {
    trotter_kernel_with_leak(grid, ev, potential, t, n, splitting, DEFAULT_LEAK_TOL)
}

fn trotter_kernel_with_leak(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    n: usize,
    splitting: Splitting,
    leak_tol: f64,
) -> Result<KernelMatrix> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one splitting step".into()));
    }
    check_grid(grid, ev)?;
    potential.validate_for(ev.system().homogeneous_dimension())?;
    let tau = t / n as f64;
    let heat = heat_matrix(grid, ev, tau, leak_tol)?;
    let vbar = grid.cell_average_potential(potential)?;
    trotter_from_heat(grid, &heat, &vbar, t, n, splitting)
}

/// Splitting product from a precomputed single-step heat matrix (at `t / n`)
/// and per-node cell-averaged potential values.
fn trotter_from_heat(
    grid: &SpaceGrid,
    heat: &KernelMatrix,
    vbar: &[f64],
    t: f64,
    n: usize,
    splitting: Splitting,
) -> Result<KernelMatrix> {
    let tau = t / n as f64;
    let dim = grid.len();
    match splitting {
        Splitting::Strang => {
            // Symmetrized step in sqrt(mass) coordinates:
            // S_ij = g_i A_ij g_j with g = sqrt(m) e^{-tau V/2}; then
            // K = S^n rescaled by 1/sqrt(m_i m_j) is exactly symmetric.
            let g: Vec<f64> = grid
                .masses()
                .iter()
                .zip(vbar)
                .map(|(m, v)| m.sqrt() * (-0.5 * tau * v).exp())
                .collect();
            let mut step = heat.values().to_vec();
            for i in 0..dim {
                for j in 0..dim {
                    step[i * dim + j] *= g[i] * g[j];
                }
            }
            let powered = symmetric_power(dim, step, n);
            let mut values = powered;
            for i in 0..dim {
                let mi = grid.mass(i).sqrt();
                for j in 0..dim {
                    values[i * dim + j] /= mi * grid.mass(j).sqrt();
                }
            }
            KernelMatrix::from_values(t, dim, values, true)
        }
        Splitting::Left => {
            // P = A diag(m e^{-tau V}); K = P^n diag(1/m).
            let scale: Vec<f64> =
                grid.masses().iter().zip(vbar).map(|(m, v)| m * (-tau * v).exp()).collect();
            let mut step = heat.values().to_vec();
            for row in step.chunks_mut(dim) {
                for (v, s) in row.iter_mut().zip(&scale) {
                    *v *= s;
                }
            }
            let mut values = plain_power(dim, step, n);
            for row in values.chunks_mut(dim) {
                for (v, m) in row.iter_mut().zip(grid.masses()) {
                    *v /= m;
                }
            }
            KernelMatrix::from_values(t, dim, values, false)
        }
    }
}

const DEFAULT_LEAK_TOL: f64 = 1e-6;

/// `base^n` by square-and-multiply, re-symmetrizing after every product to
/// keep roundoff from accumulating off the symmetric manifold (all exact
/// intermediates are powers of the same symmetric matrix).
fn symmetric_power(dim: usize, base: Vec<f64>, n: usize) -> Vec<f64> {
    power_impl(dim, base, n, true)
}

fn plain_power(dim: usize, base: Vec<f64>, n: usize) -> Vec<f64> {
    power_impl(dim, base, n, false)
}

fn power_impl(dim: usize, base: Vec<f64>, n: usize, symmetrize: bool) -> Vec<f64> {
    debug_assert!(n >= 1);
    let mut result: Option<Vec<f64>> = None;
    let mut square = base;
    let mut scratch = vec![0.0f64; dim * dim];
    let mut remaining = n;
    loop {
        if remaining & 1 == 1 {
            result = Some(match result {
                None => square.clone(),
                Some(r) => {
                    matrix::matmul(dim, &r, &square, &mut scratch);
                    if symmetrize {
                        symmetrize_in_place(dim, &mut scratch);
                    }
                    scratch.clone()
                }
            });
        }
        remaining >>= 1;
        if remaining == 0 {
            break;
        }
        matrix::matmul(dim, &square, &square, &mut scratch);
        if symmetrize {
            symmetrize_in_place(dim, &mut scratch);
        }
        std::mem::swap(&mut square, &mut scratch);
    }
    result.expect("n >= 1 always sets a result")
}

fn symmetrize_in_place(dim: usize, x: &mut [f64]) {
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = 0.5 * (x[i * dim + j] + x[j * dim + i]);
            x[i * dim + j] = v;
            x[j * dim + i] = v;
        }
    }
}

/// Convergence record of [`schrodinger_kernel`].
#[derive(Debug, Clone)]
pub struct SchrodingerConvergence {
    /// Final step count.
    pub n_final: usize,
    /// Last doubling difference in relative sup norm.
    pub achieved: f64,
    /// `(n, difference to the previous n)` per doubling.
    pub history: Vec<(usize, f64)>,
    /// For unbounded potentials: `(cap, difference to the previous cap)` per
    /// truncation level.
    pub truncation_levels: Vec<(f64, f64)>,
}

const MAX_TROTTER_STEPS: usize = 512;
const MAX_TRUNCATION_EXPONENT: u32 = 16;

/// Schroedinger kernel by doubling the Strang step count until the change
/// drops below `tol` in relative sup norm over interior rows.  Unbounded
/// potentials are handled by an inner truncation sweep: at each step count
/// the caps `min(V, 2^j)` are doubled until the kernel stabilizes (the caps
/// are entrywise monotone at fixed steps, which is checked exactly), and the
/// step doubling then compares those cap-limits.
pub fn schrodinger_kernel(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    tol: f64,
) -> Result<(KernelMatrix, SchrodingerConvergence)> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} outside (0, 1)")));
    }
    if potential.is_bounded() {
        let (kernel, n_final, achieved, history) =
            converge_in_steps(grid, ev, potential, t, tol)?;
        let conv = SchrodingerConvergence {
            n_final,
            achieved,
            history,
            truncation_levels: Vec::new(),
        };
        return Ok((kernel, conv));
    }

    check_grid(grid, ev)?;
    potential.validate_for(ev.system().homogeneous_dimension())?;
    let rows = comparison_rows(grid, t);
    let mut n = 8;
    let mut current = truncation_limit(grid, ev, potential, t, n, tol, &rows)?.0;
    let mut history = Vec::new();
    while n < MAX_TROTTER_STEPS {
        let next_n = n * 2;
        if grid.spacing() > 0.9 * (t / next_n as f64).sqrt() {
            let achieved = history.last().map_or(f64::INFINITY, |(_, d)| *d);
            return Err(Error::Convergence(format!(
                "doubling residual {achieved:.3e} above {tol:.1e} at n = {n}, and the cell \
                 width {:.3e} cannot resolve steps shorter than t/{next_n}; refine the grid",
                grid.spacing()
            )));
        }
        let (next, next_levels) = truncation_limit(grid, ev, potential, t, next_n, tol, &rows)?;
        let diff = next.sup_rel_diff(&current, &rows);
        history.push((next_n, diff));
        current = next;
        n = next_n;
        if diff <= tol {
            let conv = SchrodingerConvergence {
                n_final: n,
                achieved: diff,
                history,
                truncation_levels: next_levels,
            };
            return Ok((current, conv));
        }
    }
    let achieved = history.last().map_or(f64::INFINITY, |(_, d)| *d);
    Err(Error::Convergence(format!(
        "splitting steps up to {MAX_TROTTER_STEPS} left a doubling residual {achieved:.3e} \
         above {tol:.1e}"
    )))
}

/// Truncation-cap limit at a fixed step count: doubles the cap on
/// `min(V, cap)` until the product kernel moves less than `tol` over the
/// comparison rows.  At fixed steps larger caps damp every entry, so the
/// monotone decrease is checked with a pure roundoff slack.
fn truncation_limit(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    n: usize,
    tol: f64,
    rows: &[usize],
) -> Result<(KernelMatrix, Vec<(f64, f64)>)> {
    let tau = t / n as f64;
    let heat = heat_matrix(grid, ev, tau, DEFAULT_LEAK_TOL)?;
    let mut levels: Vec<(f64, f64)> = Vec::new();
    let mut previous: Option<KernelMatrix> = None;
    for j in 0..=MAX_TRUNCATION_EXPONENT {
        let cap = (2.0f64).powi(j as i32);
        let truncated = potential.truncated(cap)?;
        let vbar = grid.cell_average_potential(&truncated)?;
        let kernel = trotter_from_heat(grid, &heat, &vbar, t, n, Splitting::Strang)?;
        if let Some(prev_kernel) = &previous {
            let slack = 1e-11 * prev_kernel.max_value().max(1e-300);
            for (a, b) in kernel.values().iter().zip(prev_kernel.values()) {
                if *a > *b + slack {
                    return Err(Error::Inconsistent(format!(
                        "truncation cap {cap} produced a larger kernel entry \
                         ({a:.6e} > {b:.6e} + {slack:.1e})"
                    )));
                }
            }
            let diff = kernel.sup_rel_diff(prev_kernel, rows);
            levels.push((cap, diff));
            if diff <= tol {
                return Ok((kernel, levels));
            }
        }
        previous = Some(kernel);
    }
    Err(Error::Convergence(format!(
        "truncation levels up to 2^{MAX_TRUNCATION_EXPONENT} did not stabilize the kernel \
         within {tol:.1e} at {n} steps; last differences {:?}",
        &levels[levels.len().saturating_sub(3)..]
    )))
}

fn converge_in_steps(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    tol: f64,
) -> Result<(KernelMatrix, usize, f64, Vec<(usize, f64)>)> {
    let rows = comparison_rows(grid, t);
    let mut n = 8;
    let mut current = trotter_kernel(grid, ev, potential, t, n, Splitting::Strang)?;
    let mut history = Vec::new();
    while n < MAX_TROTTER_STEPS {
        let next_n = n * 2;
        // Resolution wall: the per-cell rule needs the step's Gaussian width
        // to span the cell, and its error grows like (h / sqrt(tau))^6.
        // Doubling past the wall would corrupt the comparison rather than
        // refine it.
        if grid.spacing() > 0.9 * (t / next_n as f64).sqrt() {
            let achieved = history.last().map_or(f64::INFINITY, |(_, d)| *d);
            return Err(Error::Convergence(format!(
                "doubling residual {achieved:.3e} above {tol:.1e} at n = {n}, and the cell \
                 width {:.3e} cannot resolve steps shorter than t/{next_n}; refine the grid",
                grid.spacing()
            )));
        }
        let next = trotter_kernel(grid, ev, potential, t, next_n, Splitting::Strang)?;
        let diff = next.sup_rel_diff(&current, &rows);
        history.push((next_n, diff));
        current = next;
        n = next_n;
        if diff <= tol {
            return Ok((current, n, diff, history));
        }
    }
    let achieved = history.last().map_or(f64::INFINITY, |(_, d)| *d);
    Err(Error::Convergence(format!(
        "splitting steps up to {MAX_TROTTER_STEPS} left a doubling residual {achieved:.3e} \
         above {tol:.1e}"
    )))
}

/// Rows used for relative sup-norm comparisons: interior nodes away from the
/// truncation boundary, falling back to all rows on very small grids.
fn comparison_rows(grid: &SpaceGrid, t: f64) -> Vec<usize> {
    let margin = 6.0 * t.sqrt() + 2.0 * grid.spacing();
    let interior = grid.interior_indices(margin);
    if interior.is_empty() {
        (0..grid.len()).collect()
    } else {
        interior
    }
}

/// Relative sup-norm residual of the perturbation identity
///
/// `H_t = K_t + integral_0^t H_s V K_{t-s} ds`
///
/// over interior nodes, with the time integral by 16-node Gauss-Legendre on
/// each of `[0, t/2]` and `[t/2, t]`.  `H` denotes the pure heat chain and
/// `K` the splitting product, both at 64 Strang steps, so that a vanishing
/// potential gives a residual of exactly zero.
pub fn duhamel_residual(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
) -> Result<f64> {
    check_grid(grid, ev)?;
    if !potential.is_bounded() {
        return Err(Error::InvalidArgument(
            "the perturbation-identity residual needs a bounded potential".into(),
        ));
    }
    let n_ref = 64;
    let zero = Potential::constant(0.0)?;
    let h_chain = trotter_kernel(grid, ev, &zero, t, n_ref, Splitting::Strang)?;
    let k_chain = trotter_kernel(grid, ev, potential, t, n_ref, Splitting::Strang)?;
    let vbar = grid.cell_average_potential(potential)?;
    let dim = grid.len();

    // integral accumulator of H_s V K_{t-s} dw-composed.
    let mut integral = vec![0.0f64; dim * dim];
    let mut scratch = vec![0.0f64; dim * dim];
    let rule = GaussLegendre::new(16);
    for (pa, pb) in [(0.0, 0.5 * t), (0.5 * t, t)] {
        let half = 0.5 * (pb - pa);
        let mid = 0.5 * (pa + pb);
        for (node, weight) in rule.nodes().iter().zip(rule.weights()) {
            let s = mid + half * node;
            // The first quadrature node sits near s = 0.003 t, where a grid
            // sized for steps of t/64 resolves the kernel to about 1e-5 only.
            // That is ample for the 1e-2-scale residuals this check targets.
            let h_s = heat_matrix(grid, ev, s, 1e-4)?;
            // Steps for the remaining time, scaled down proportionally so the
            // per-step time never shrinks far below t/16 (resolution of the
            // grid caps how small a heat step can be composed).
            let n_inner =
                (((t - s) / t * 16.0).ceil() as usize).clamp(1, 16);
            // Near s = t the remaining time shrinks below what the grid
            // resolves to the default tolerance; the same 1e-5-scale leak is
            // as harmless here as for H_s above.
            let k_rem = trotter_kernel_with_leak(
                grid,
                ev,
                potential,
                t - s,
                n_inner,
                Splitting::Strang,
                1e-4,
            )?;
            // (H_s diag(V m)) K_{t-s}
            let mut left = h_s.values().to_vec();
            for row in left.chunks_mut(dim) {
                for ((v, vb), m) in row.iter_mut().zip(&vbar).zip(grid.masses()) {
                    *v *= vb * m;
                }
            }
            matrix::matmul(dim, &left, k_rem.values(), &mut scratch);
            let w = weight * half;
            for (acc, inc) in integral.iter_mut().zip(&scratch) {
                *acc += w * inc;
            }
        }
    }

    let rows = comparison_rows(grid, t);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for &i in &rows {
        for &j in &rows {
            let r = h_chain.value(i, j) - k_chain.value(i, j) - integral[i * dim + j];
            num = num.max(r.abs());
            den = den.max(h_chain.value(i, j));
        }
    }
    Ok(num / den.max(1e-300))
}

/// Total semigroup mass `integral k_t^V(x, y) dw(y)` at each requested `x`
/// (not necessarily grid nodes), via `n` Strang steps computed matrix-free:
/// an `n - 1`-step vector iteration on the grid and one exact kernel row from
/// `x`.
pub fn mass_profile(
    grid: &SpaceGrid,
    ev: &HeatKernelEvaluator,
    potential: &Potential,
    t: f64,
    n: usize,
    xs: &[Vector],
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one splitting step".into()));
    }
    check_grid(grid, ev)?;
    potential.validate_for(ev.system().homogeneous_dimension())?;
    let tau = t / n as f64;
    let heat = heat_matrix(grid, ev, tau, DEFAULT_LEAK_TOL)?;
    let vbar = grid.cell_average_potential(potential)?;
    let dim = grid.len();

    // u = (E A M E)^{n-1} 1 on the nodes, E = diag(e^{-tau V/2}).
    let e_half: Vec<f64> = vbar.iter().map(|v| (-0.5 * tau * v).exp()).collect();
    let mut u = vec![1.0f64; dim];
    let mut next = vec![0.0f64; dim];
    for _ in 0..(n - 1) {
        // next_i = e_i sum_j A_ij m_j e_j u_j
        let weighted: Vec<f64> = u
            .iter()
            .zip(&e_half)
            .zip(grid.masses())
            .map(|((uj, ej), mj)| uj * ej * mj)
            .collect();
        for i in 0..dim {
            let row = &heat.values()[i * dim..(i + 1) * dim];
            let mut acc = 0.0;
            for (a, w) in row.iter().zip(&weighted) {
                acc += a * w;
            }
            next[i] = e_half[i] * acc;
        }
        std::mem::swap(&mut u, &mut next);
    }

    // mass(x) = e^{-tau V(x)/2} sum_j h_tau(x, y_j) m_j e_j u_j.
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        if x.dim() != grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "evaluation point has dimension {}, grid has {}",
                x.dim(),
                grid.dim()
            )));
        }
        let mut acc = 0.0f64;
        for j in 0..dim {
            let w = grid.mass(j) * e_half[j] * u[j];
            if w == 0.0 {
                continue;
            }
            let ln = ev.log_heat_kernel(x, grid.point(j), tau)?;
            if ln > -740.0 {
                acc += ln.exp() * w;
            }
        }
        out.push((-0.5 * tau * potential.evaluate(x)).exp() * acc);
    }
    Ok(out)
}
