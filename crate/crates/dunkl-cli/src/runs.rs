//! Subcommand implementations: each turns a validated config into one table.
//!
//! Sample points are drawn from the config seed, so identical configs give
//! identical tables regardless of thread count (the parallel sweeps inside
//! the library are partition-independent).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dunkl::feynman_kac::{fk_estimate, FKConfig};
use dunkl::heat::{BoundParams, HeatKernelEvaluator, ProductRank1System};
use dunkl::rootsystem::walks::admissible_sum_pair;
use dunkl::rootsystem::{ReflectionGroup, RootSystem, Vector};
use dunkl::schrodinger::{
    duhamel_residual, green_potential, schrodinger_kernel, trotter_kernel, verify_theorem,
    GreenKind, GreenParams, Splitting, TheoremConfig,
};

use crate::config::{build_grid, build_potential, ExperimentConfig, RunKind};
use crate::table::{format_real, Cell, ResultTable};

pub struct RunOutput {
    pub table: ResultTable,
    /// `verify-theorem` only: whether the three flags agreed.
    pub theorem_consistent: Option<bool>,
}

pub fn run_experiment(config: &ExperimentConfig, kind: RunKind) -> dunkl::Result<RunOutput> {
    match kind {
        RunKind::Lambda => run_lambda(config),
        RunKind::Heat => run_heat(config),
        RunKind::Schrodinger => run_schrodinger(config),
        RunKind::Green => run_green(config),
        RunKind::Fk => run_fk(config),
        RunKind::VerifyTheorem => run_verify_theorem(config),
    }
}

fn build_system(config: &ExperimentConfig) -> dunkl::Result<RootSystem> {
    let ks = &config.system.multiplicities;
    match config.system.family.as_str() {
        "dihedral" => RootSystem::dihedral(config.system.order.unwrap_or(0), ks),
        _ => RootSystem::product_z2(ks),
    }
}

fn build_evaluator(config: &ExperimentConfig) -> dunkl::Result<HeatKernelEvaluator> {
    let sys = ProductRank1System::new(&config.system.multiplicities)?;
    HeatKernelEvaluator::with_defaults(sys)
}

/// `n` evenly spaced values on `[-extent, extent]`; just the origin for
/// `n = 1`.
fn uniform(extent: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.0];
    }
    (0..n)
        .map(|i| -extent + 2.0 * extent * i as f64 / (n - 1) as f64)
        .collect()
}

/// One CSV cell per point: the plain coordinate in rank 1, a semicolon-joined
/// tuple above.
fn vector_cell(v: &Vector) -> Cell {
    if v.dim() == 1 {
        Cell::Real(v[0])
    } else {
        let joined: Vec<String> = (0..v.dim()).map(|i| format_real(v[i])).collect();
        Cell::Text(joined.join(";"))
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize, extent: f64) -> Vector {
    Vector::new((0..dim).map(|_| rng.gen_range(-extent..extent)).collect())
}

fn run_lambda(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let system = build_system(config)?;
    let group = ReflectionGroup::generate(&system)?;
    let dim = system.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pairs: Vec<(Vector, Vector)> = (0..config.sweep.samples)
        .map(|_| (random_vector(&mut rng, dim, 3.0), random_vector(&mut rng, dim, 3.0)))
        .collect();

    let mut table =
        ResultTable::new(vec!["x", "y", "t", "n_xy", "d_xy", "lambda", "lambda_tilde"]);
    for &t in &config.times {
        for (x, y) in &pairs {
            let n_xy = group.reflection_count(x, y)?;
            let d_xy = group.orbit_distance(x, y);
            let (lambda, lambda_tilde) = admissible_sum_pair(&group, x, y, t)?;
            table.push(vec![
                vector_cell(x),
                vector_cell(y),
                Cell::Real(t),
                Cell::Real(n_xy as f64),
                Cell::Real(d_xy),
                Cell::Real(lambda),
                Cell::Real(lambda_tilde),
            ]);
        }
    }
    Ok(RunOutput { table, theorem_consistent: None })
}

fn run_heat(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let ev = build_evaluator(config)?;
    let dim = config.system.multiplicities.len();
    let params = BoundParams::reference();
    let extent = config.sweep.extent;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let pairs: Vec<(Vector, Vector)> = (0..config.sweep.samples)
        .map(|_| (random_vector(&mut rng, dim, extent), random_vector(&mut rng, dim, extent)))
        .collect();

    let mut table =
        ResultTable::new(vec!["x", "y", "t", "h", "bound_lower", "bound_upper", "ratio"]);
    for &t in &config.times {
        for (x, y) in &pairs {
            let h = ev.heat_kernel(x, y, t)?;
            let (lower, upper) = ev.heat_kernel_bounds(&params, x, y, t)?;
            table.push(vec![
                vector_cell(x),
                vector_cell(y),
                Cell::Real(t),
                Cell::Real(h),
                Cell::Real(lower),
                Cell::Real(upper),
                Cell::Real(h / upper),
            ]);
        }
    }
    Ok(RunOutput { table, theorem_consistent: None })
}

fn run_schrodinger(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let ev = build_evaluator(config)?;
    let dim = config.system.multiplicities.len();
    let grid = build_grid(&config.grid, &config.system.multiplicities)?;
    let potential =
        build_potential(config.potential.as_ref().expect("validated"), dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut table = ResultTable::new(vec![
        "x",
        "y",
        "t",
        "n",
        "k_V",
        "h",
        "ratio",
        "duhamel_residual",
    ]);
    for &t in &config.times {
        let (kernel, n_steps) = if potential.is_bounded() {
            let k = trotter_kernel(&grid, &ev, &potential, t, config.sweep.steps, Splitting::Strang)?;
            (k, config.sweep.steps)
        } else {
            let (k, conv) =
                schrodinger_kernel(&grid, &ev, &potential, t, config.tolerances.schrodinger)?;
            (k, conv.n_final)
        };
        let residual = if potential.is_bounded() {
            duhamel_residual(&grid, &ev, &potential, t)?
        } else {
            f64::NAN
        };

        // Pairs stay away from the truncation wall and within a few standard
        // deviations of each other, where the dense kernel resolves the
        // analytic one.
        let margin = (8.0 * t.sqrt() + 2.0 * grid.spacing()).min(0.5 * grid.radius());
        let interior = grid.interior_indices(margin);
        let max_sep = 6.0 * t.sqrt();
        for _ in 0..config.sweep.samples {
            let i = interior[rng.gen_range(0..interior.len())];
            let mut j = i;
            for _ in 0..1000 {
                let cand = interior[rng.gen_range(0..interior.len())];
                let sep: f64 = (0..dim)
                    .map(|a| (grid.point(i)[a] - grid.point(cand)[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if sep <= max_sep {
                    j = cand;
                    break;
                }
            }
            let k_v = kernel.value(i, j);
            let h = ev.heat_kernel(grid.point(i), grid.point(j), t)?;
            table.push(vec![
                vector_cell(grid.point(i)),
                vector_cell(grid.point(j)),
                Cell::Real(t),
                Cell::Real(n_steps as f64),
                Cell::Real(k_v),
                Cell::Real(h),
                Cell::Real(k_v / h),
                Cell::Real(residual),
            ]);
        }
    }
    Ok(RunOutput { table, theorem_consistent: None })
}

fn run_green(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let ev = build_evaluator(config)?;
    let potential = build_potential(config.potential.as_ref().expect("validated"), 1)?;
    let params = GreenParams::default();
    let xs = uniform(config.sweep.extent, config.sweep.samples);

    let mut table = ResultTable::new(vec!["x", "G", "G1", "curlyG", "ratios"]);
    for &x in &xs {
        let point = Vector::new(vec![x]);
        let g = green_potential(&ev, &potential, &point, GreenKind::FullSpace, &params)?;
        let g1 = green_potential(&ev, &potential, &point, GreenKind::Heat, &params)?;
        let curly = green_potential(&ev, &potential, &point, GreenKind::Orbit, &params)?;
        let values = [g.truncated, g1.truncated, curly.truncated];
        let hi = values.iter().cloned().fold(f64::MIN, f64::max);
        let lo = values.iter().cloned().fold(f64::MAX, f64::min).max(1e-300);
        table.push(vec![
            Cell::Real(x),
            Cell::Real(g.truncated),
            Cell::Real(g1.truncated),
            Cell::Real(curly.truncated),
            Cell::Real(hi / lo),
        ]);
    }
    Ok(RunOutput { table, theorem_consistent: None })
}

fn run_fk(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let ev = build_evaluator(config)?;
    let dim = config.system.multiplicities.len();
    let grid = build_grid(&config.grid, &config.system.multiplicities)?;
    let potential =
        build_potential(config.potential.as_ref().expect("validated"), dim)?;
    let probes = uniform(config.sweep.extent, config.sweep.fk_probes);
    let terminal_radius = config.sweep.terminal_radius;
    let terminal = move |y: &Vector| match terminal_radius {
        Some(r) => {
            let norm: f64 = (0..y.dim()).map(|a| y[a] * y[a]).sum::<f64>().sqrt();
            if norm <= r {
                1.0
            } else {
                0.0
            }
        }
        None => 1.0,
    };

    let mut table =
        ResultTable::new(vec!["x", "t", "mean", "stderr", "trotter_value", "z_score"]);
    let mut row_index = 0u64;
    for &t in &config.times {
        let kernel =
            trotter_kernel(&grid, &ev, &potential, t, config.sweep.steps, Splitting::Left)?;
        // The walker box must hold every state the chain visits plus the
        // per-step transition tails, or the sampler rejects its tables;
        // 14 sqrt(t) covers the full-horizon wander with room to spare.
        let walker_radius = config.sweep.extent + 14.0 * t.sqrt() + 2.0;
        for &x in &probes {
            let mut coords = vec![0.0; dim];
            coords[0] = x;
            let i = grid.nearest_index(&Vector::new(coords))?;
            let source = grid.point(i).clone();
            let trotter_value: f64 = (0..grid.len())
                .map(|j| kernel.value(i, j) * terminal(grid.point(j)) * grid.mass(j))
                .sum();

            let fk = fk_estimate(
                &ev,
                &potential,
                &source,
                &FKConfig {
                    t,
                    n_steps: config.sweep.steps,
                    n_paths: config.sweep.paths,
                    seed: config.seed.wrapping_add(row_index),
                    radius: walker_radius,
                    source_quantum: grid.spacing(),
                },
                terminal,
            )?;
            let diff = fk.mean - trotter_value;
            let z = if fk.std_error > 0.0 {
                diff / fk.std_error
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY * diff.signum()
            };
            table.push(vec![
                vector_cell(&source),
                Cell::Real(t),
                Cell::Real(fk.mean),
                Cell::Real(fk.std_error),
                Cell::Real(trotter_value),
                Cell::Real(z),
            ]);
            row_index += 1;
        }
    }
    Ok(RunOutput { table, theorem_consistent: None })
}

fn run_verify_theorem(config: &ExperimentConfig) -> dunkl::Result<RunOutput> {
    let ev = build_evaluator(config)?;
    let potential = build_potential(config.potential.as_ref().expect("validated"), 1)?;
    let th = &config.theorem;
    let mut tc = TheoremConfig::new(potential);
    tc.t_min = th.t_min;
    tc.t_max = th.t_max;
    tc.t_points = th.t_points;
    tc.x_extent = config.sweep.extent;
    tc.x_points = th.x_points;
    tc.c_values = th.c_values.clone();
    tc.trotter_steps = config.sweep.steps;
    tc.scan_steps = th.scan_steps;
    tc.max_nodes = config.grid.nodes;
    tc.delta_floor = config.tolerances.delta_floor;
    tc.green_stability_tol = config.tolerances.green_stability;
    tc.c_scan_t_points = th.c_scan_t_points;
    tc.pair_points = th.pair_points;
    let report = verify_theorem(&ev, &tc)?;

    let mut table = ResultTable::new(vec!["key", "value"]);
    let flag = |b: bool| Cell::Text(if b { "true".into() } else { "false".into() });
    table.push(vec![Cell::Text("status".into()), Cell::Text(report.status().into())]);
    table.push(vec![Cell::Text("flag_lower_bound".into()), flag(report.flags.lower_bound)]);
    table.push(vec![Cell::Text("flag_mass_bounded".into()), flag(report.flags.mass_bounded)]);
    table.push(vec![Cell::Text("flag_green_bounded".into()), flag(report.flags.green_bounded)]);
    table.push(vec![Cell::Text("consistent".into()), flag(report.consistent)]);
    table.push(vec![Cell::Text("delta_min".into()), Cell::Real(report.delta_min)]);
    table.push(vec![Cell::Text("green_sup".into()), Cell::Real(report.green_sup)]);
    table.push(vec![
        Cell::Text("green_sup_doubled".into()),
        Cell::Real(report.green_sup_doubled),
    ]);
    table.push(vec![
        Cell::Text("green_rel_change".into()),
        Cell::Real(report.green_rel_change),
    ]);
    table.push(vec![
        Cell::Text("green_tail_finite".into()),
        flag(report.green_tail_finite),
    ]);
    for fit in &report.c_fits {
        table.push(vec![
            Cell::Text(format!("fitted_C[c={}]", fit.c)),
            Cell::Real(fit.fitted),
        ]);
        table.push(vec![
            Cell::Text(format!("fitted_C_doubled[c={}]", fit.c)),
            Cell::Real(fit.fitted_doubled),
        ]);
        table.push(vec![
            Cell::Text(format!("rel_change[c={}]", fit.c)),
            Cell::Real(fit.rel_change),
        ]);
        table.push(vec![
            Cell::Text(format!("growth[c={}]", fit.c)),
            Cell::Real(fit.growth_factor),
        ]);
    }
    Ok(RunOutput { table, theorem_consistent: Some(report.consistent) })
}
