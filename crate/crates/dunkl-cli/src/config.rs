//! Experiment configuration: JSON parsing, defaults, and validation.
//!
//! One file describes one experiment.  Missing sections fall back to the
//! documented defaults (grid of at most 2048 nodes on `[-12, 12]`, times
//! `{0.25, 1, 4}`), so a minimal config only names the system.  Validation
//! reports every violation with its field path, not just the first.

use serde::{Deserialize, Serialize};
use std::path::Path;

use dunkl::schrodinger::{Potential, PotentialKind, SpaceGrid};
use dunkl::rootsystem::Vector;

/// The experiment families the runner dispatches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunKind {
    Lambda,
    Heat,
    Schrodinger,
    Green,
    Fk,
    VerifyTheorem,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            RunKind::Lambda => "lambda",
            RunKind::Heat => "heat",
            RunKind::Schrodinger => "schrodinger",
            RunKind::Green => "green",
            RunKind::Fk => "fk",
            RunKind::VerifyTheorem => "verify-theorem",
        }
    }

    /// Whether the subcommand evaluates the exact product-system kernel
    /// (dihedral systems only support the reflection-walk sums).
    fn needs_kernel(self) -> bool {
        self != RunKind::Lambda
    }

    fn needs_potential(self) -> bool {
        matches!(
            self,
            RunKind::Schrodinger | RunKind::Green | RunKind::Fk | RunKind::VerifyTheorem
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    /// Evaluation times for the kernel-style subcommands.
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    /// Extra knobs of `verify-theorem`; ignored elsewhere.
    #[serde(default)]
    pub theorem: TheoremSpec,
    #[serde(default)]
    pub seed: u64,
    /// CSV destination; stdout when absent.
    #[serde(default)]
    pub output: Option<String>,
    /// Worker threads; library default when absent.  Results never depend
    /// on it.
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// `"z2_product"` (rank-1 factors, exact kernels) or `"dihedral"`
    /// (walk sums only).
    pub family: String,
    /// Per-coordinate multiplicities for products; per-orbit for dihedral
    /// systems.
    pub multiplicities: Vec<f64>,
    /// Dihedral order `m`; required for (and only read by) that family.
    #[serde(default)]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    /// Per-axis node budget; the grid uses the largest even cell count with
    /// three nodes per cell that fits.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { radius: default_radius(), nodes: default_nodes() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `V = level` everywhere.
    Constant { level: f64 },
    /// `V = height` on the centered ball of the given radius.
    BallIndicator { radius: f64, height: f64 },
    /// `V = |x|^{-exponent}` inside the cutoff, optionally capped.
    RadialPower {
        exponent: f64,
        cutoff: f64,
        #[serde(default)]
        cap: Option<f64>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Sampled rows (point pairs or probe points) per time.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Monte Carlo paths per `fk` row.
    #[serde(default = "default_paths")]
    pub paths: usize,
    /// Splitting steps for `schrodinger`, `fk`, and the theorem mass curve.
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Half-width of probe windows (`green`, `fk`, theorem).
    #[serde(default = "default_extent")]
    pub extent: f64,
    /// Probe points of the `fk` subcommand (each is a full Monte Carlo run).
    #[serde(default = "default_fk_probes")]
    pub fk_probes: usize,
    /// `fk` terminal function: indicator of the centered ball of this
    /// radius; `null` means the constant 1.
    #[serde(default = "default_terminal_radius")]
    pub terminal_radius: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            samples: default_samples(),
            paths: default_paths(),
            steps: default_steps(),
            extent: default_extent(),
            fk_probes: default_fk_probes(),
            terminal_radius: default_terminal_radius(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    /// Step-doubling tolerance of the adaptive Schroedinger kernel.
    #[serde(default = "default_schrodinger_tol")]
    pub schrodinger: f64,
    /// Mass floor of theorem flag (b).
    #[serde(default = "default_delta_floor")]
    pub delta_floor: f64,
    /// Relative-stability tolerance of theorem flag (c).
    #[serde(default = "default_green_stability")]
    pub green_stability: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            schrodinger: default_schrodinger_tol(),
            delta_floor: default_delta_floor(),
            green_stability: default_green_stability(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSpec {
    #[serde(default = "default_t_min")]
    pub t_min: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_t_points")]
    pub t_points: usize,
    #[serde(default = "default_x_points")]
    pub x_points: usize,
    #[serde(default = "default_c_values")]
    pub c_values: Vec<f64>,
    /// Splitting steps of the kernel-comparison scan (a).
    #[serde(default = "default_scan_steps")]
    pub scan_steps: usize,
    #[serde(default = "default_c_scan_t_points")]
    pub c_scan_t_points: usize,
    #[serde(default = "default_pair_points")]
    pub pair_points: usize,
}

impl Default for TheoremSpec {
    fn default() -> Self {
        Self {
            t_min: default_t_min(),
            t_max: default_t_max(),
            t_points: default_t_points(),
            x_points: default_x_points(),
            c_values: default_c_values(),
            scan_steps: default_scan_steps(),
            c_scan_t_points: default_c_scan_t_points(),
            pair_points: default_pair_points(),
        }
    }
}

fn default_times() -> Vec<f64> {
    vec![0.25, 1.0, 4.0]
}
fn default_radius() -> f64 {
    12.0
}
fn default_nodes() -> usize {
    2048
}
fn default_samples() -> usize {
    100
}
fn default_paths() -> usize {
    20_000
}
fn default_steps() -> usize {
    64
}
fn default_extent() -> f64 {
    6.0
}
fn default_fk_probes() -> usize {
    3
}
fn default_terminal_radius() -> Option<f64> {
    Some(2.0)
}
fn default_schrodinger_tol() -> f64 {
    1e-3
}
fn default_delta_floor() -> f64 {
    1e-3
}
fn default_green_stability() -> f64 {
    1e-3
}
fn default_t_min() -> f64 {
    0.1
}
fn default_t_max() -> f64 {
    100.0
}
fn default_t_points() -> usize {
    20
}
fn default_x_points() -> usize {
    13
}
fn default_c_values() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}
fn default_scan_steps() -> usize {
    32
}
fn default_c_scan_t_points() -> usize {
    7
}
fn default_pair_points() -> usize {
    13
}

/// Reads, parses, and validates a config for the given subcommand; the error
/// carries every violation found.
pub fn load(path: &Path, run: RunKind) -> Result<ExperimentConfig, Vec<String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| vec![format!("{}: {e}", path.display())])?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| vec![format!("{}: {e}", path.display())])?;
    let violations = validate(&config, run);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(violations)
    }
}

/// All schema violations of `config` under subcommand `run`, with field
/// paths; empty when valid.
pub fn validate(config: &ExperimentConfig, run: RunKind) -> Vec<String> {
    let mut errs = Vec::new();

    match config.system.family.as_str() {
        "z2_product" => {
            if config.system.multiplicities.is_empty() {
                errs.push("system.multiplicities: must not be empty".into());
            } else if config.system.multiplicities.len() > 2 && run.needs_kernel() {
                errs.push(format!(
                    "system.multiplicities: dense grids support at most 2 coordinates, \
                     got {}",
                    config.system.multiplicities.len()
                ));
            }
        }
        "dihedral" => {
            match config.system.order {
                None => errs.push("system.order: required for the dihedral family".into()),
                Some(m) if m < 3 => {
                    errs.push(format!("system.order: dihedral order must be at least 3, got {m}"))
                }
                Some(_) => {}
            }
            if run.needs_kernel() {
                errs.push(format!(
                    "system.family: exact kernel unsupported for this family \
                     (subcommand {})",
                    run.name()
                ));
            }
        }
        other => errs.push(format!(
            "system.family: unknown family {other:?}, expected \"z2_product\" or \"dihedral\""
        )),
    }
    for (i, k) in config.system.multiplicities.iter().enumerate() {
        if !(k.is_finite() && *k > 0.0) {
            errs.push(format!("system.multiplicities[{i}]: must be positive, got {k}"));
        }
    }

    if !(config.grid.radius > 0.0 && config.grid.radius.is_finite()) {
        errs.push(format!("grid.radius: must be positive, got {}", config.grid.radius));
    }
    if config.grid.nodes < 6 {
        errs.push(format!("grid.nodes: need at least 6 (two cells), got {}", config.grid.nodes));
    }

    if config.times.is_empty() {
        errs.push("times: must not be empty".into());
    }
    for (i, t) in config.times.iter().enumerate() {
        if !(t.is_finite() && *t > 0.0) {
            errs.push(format!("times[{i}]: must be positive, got {t}"));
        }
    }

    let sweep = &config.sweep;
    if sweep.samples == 0 {
        errs.push("sweep.samples: must be at least 1".into());
    }
    if sweep.paths < 2 {
        errs.push(format!("sweep.paths: need at least 2 for a standard error, got {}", sweep.paths));
    }
    if sweep.steps == 0 {
        errs.push("sweep.steps: must be at least 1".into());
    }
    if !(sweep.extent > 0.0 && sweep.extent.is_finite()) {
        errs.push(format!("sweep.extent: must be positive, got {}", sweep.extent));
    }
    if sweep.fk_probes == 0 {
        errs.push("sweep.fk_probes: must be at least 1".into());
    }
    if let Some(r) = sweep.terminal_radius {
        if !(r > 0.0 && r.is_finite()) {
            errs.push(format!("sweep.terminal_radius: must be positive, got {r}"));
        }
    }

    for (name, v) in [
        ("tolerances.schrodinger", config.tolerances.schrodinger),
        ("tolerances.delta_floor", config.tolerances.delta_floor),
        ("tolerances.green_stability", config.tolerances.green_stability),
    ] {
        if !(v > 0.0 && v < 1.0) {
            errs.push(format!("{name}: must lie in (0, 1), got {v}"));
        }
    }

    match &config.potential {
        None => {
            if run.needs_potential() {
                errs.push(format!("potential: required by subcommand {}", run.name()));
            }
        }
        Some(spec) => validate_potential(spec, run, &mut errs),
    }

    let th = &config.theorem;
    if run == RunKind::VerifyTheorem {
        if !(th.t_min > 0.0 && th.t_max > th.t_min && th.t_max.is_finite()) {
            errs.push(format!(
                "theorem.t_min/t_max: need 0 < t_min < t_max, got [{}, {}]",
                th.t_min, th.t_max
            ));
        }
        if th.t_points < 2 || th.c_scan_t_points < 2 {
            errs.push("theorem.t_points/c_scan_t_points: need at least 2 scan times".into());
        }
        if th.x_points == 0 || th.pair_points == 0 {
            errs.push("theorem.x_points/pair_points: need at least one probe".into());
        }
        if th.scan_steps == 0 {
            errs.push("theorem.scan_steps: must be at least 1".into());
        }
        if th.c_values.is_empty() || th.c_values.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            errs.push("theorem.c_values: need constants in (0, 1]".into());
        }
        if config.system.family == "z2_product" {
            if config.system.multiplicities.len() != 1 {
                errs.push(
                    "system.multiplicities: verify-theorem runs on rank-1 systems".into(),
                );
            } else {
                let nn = 1.0 + 2.0 * config.system.multiplicities[0];
                if !(nn > 2.0) {
                    errs.push(format!(
                        "system.multiplicities[0]: homogeneous dimension {nn} must exceed 2 \
                         for verify-theorem"
                    ));
                }
            }
        }
    }

    if run == RunKind::Green
        && config.system.family == "z2_product"
        && config.system.multiplicities.len() != 1
    {
        errs.push("system.multiplicities: the Green quadrature runs on rank-1 systems".into());
    }

    errs
}

fn validate_potential(spec: &PotentialSpec, run: RunKind, errs: &mut Vec<String>) {
    match spec {
        PotentialSpec::Constant { level } => {
            if !(level.is_finite() && *level >= 0.0) {
                errs.push(format!("potential.level: must be finite and >= 0, got {level}"));
            }
        }
        PotentialSpec::BallIndicator { radius, height } => {
            if !(*radius > 0.0 && radius.is_finite()) {
                errs.push(format!("potential.radius: must be positive, got {radius}"));
            }
            if !(*height >= 0.0 && height.is_finite()) {
                errs.push(format!("potential.height: must be finite and >= 0, got {height}"));
            }
        }
        PotentialSpec::RadialPower { exponent, cutoff, cap } => {
            if !(*exponent > 0.0 && exponent.is_finite()) {
                errs.push(format!("potential.exponent: must be positive, got {exponent}"));
            }
            if !(*cutoff > 0.0 && cutoff.is_finite()) {
                errs.push(format!("potential.cutoff: must be positive, got {cutoff}"));
            }
            if let Some(c) = cap {
                if !(*c >= 0.0 && c.is_finite()) {
                    errs.push(format!("potential.cap: must be finite and >= 0, got {c}"));
                }
            }
            if cap.is_none() && run == RunKind::Fk {
                errs.push(
                    "potential.cap: the Feynman-Kac weight needs a bounded potential; \
                     set a cap"
                        .into(),
                );
            }
        }
    }
}

/// Builds the potential described by the config.
pub fn build_potential(spec: &PotentialSpec, dim: usize) -> dunkl::Result<Potential> {
    match spec {
        PotentialSpec::Constant { level } => Potential::constant(*level),
        PotentialSpec::BallIndicator { radius, height } => {
            Potential::ball_indicator(Vector::zeros(dim), *radius, *height)
        }
        PotentialSpec::RadialPower { exponent, cutoff, cap } => {
            let p = Potential::new(PotentialKind::RadialPower {
                exponent: *exponent,
                cutoff: *cutoff,
            })?;
            match cap {
                Some(c) => p.truncated(*c),
                None => Ok(p),
            }
        }
    }
}

/// Builds the dense tensor grid: the largest even cell count whose three
/// nodes per cell stay within the configured budget.
pub fn build_grid(spec: &GridSpec, multiplicities: &[f64]) -> dunkl::Result<SpaceGrid> {
    let per_cell = dunkl::schrodinger::grid::NODES_PER_CELL;
    let cells = ((spec.nodes / per_cell) & !1).max(2);
    SpaceGrid::new(multiplicities, spec.radius, cells)
}
