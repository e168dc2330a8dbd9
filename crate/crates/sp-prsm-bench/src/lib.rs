//! Benchmark harness over the lasso experiments: `(alpha, gamma)` parameter
//! sweeps on a grid, head-to-head method comparisons under the three
//! semi-proximal regimes, and deterministic CSV / aligned-text emission.
//!
//! Everything here is a thin orchestration layer: instances and
//! factorizations are built once per seed and shared across all grid cells,
//! cells run on a worker pool, and output is assembled in row-major,
//! seed-ordered sequence regardless of completion order.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use sp_prsm::lasso::{generate_instance, solver_params, split_problem, ProxKind, ProxSpec};
use sp_prsm::{validate_params, DomainMode, SolveOptions, SplitProblem, StopReason};

/// The starred comparison method: the symmetric-ish pair the sweep singles
/// out, `(alpha, gamma) = (0.618, 1)`.
pub const STAR_ALPHA: f64 = 0.618;
pub const STAR_GAMMA: f64 = 1.0;

/// Dual steps of the two classical baselines.
pub const ADMM1_GAMMA: f64 = 1.0;
pub const ADMM2_GAMMA: f64 = 1.618;

pub const CSV_HEADER: &str = "alpha,gamma,seed,iters,stop_reason,final_residual,wall_ms";

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("instance setup failed for seed {seed}: {message}")]
    Setup { seed: u64, message: String },
    #[error("solver abort at (alpha, gamma, seed) = ({alpha}, {gamma}, {seed}): {message}")]
    Solver {
        alpha: f64,
        gamma: f64,
        seed: u64,
        message: String,
    },
    #[error("comparison row (n = {n}, p = {p}) failed: {reason}")]
    RowFailed { n: usize, p: f64, reason: String },
    #[error("nothing to emit: empty result set")]
    EmptyResults,
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
}

impl BenchError {
    /// Process exit code: 2 for configuration/output problems, 1 for aborted
    /// runs.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::EmptyResults | BenchError::Io(_) => 2,
            BenchError::Setup { .. } | BenchError::Solver { .. } | BenchError::RowFailed { .. } => {
                1
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Argument enums shared by the JSON config and the CLI
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProxArg {
    Zero,
    #[value(name = "semidef")]
    SemiDef,
    Indef,
}

impl From<ProxArg> for ProxKind {
    fn from(p: ProxArg) -> ProxKind {
        match p {
            ProxArg::Zero => ProxKind::Zero,
            ProxArg::SemiDef => ProxKind::SemiDef,
            ProxArg::Indef => ProxKind::Indef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Primary,
    Extended,
    #[value(name = "negalpha")]
    NegAlpha,
    Hmy,
}

impl From<ModeArg> for DomainMode {
    fn from(m: ModeArg) -> DomainMode {
        match m {
            ModeArg::Primary => DomainMode::Primary,
            ModeArg::Extended => DomainMode::Extended,
            ModeArg::NegAlpha => DomainMode::NegativeAlpha,
            ModeArg::Hmy => DomainMode::Hmy,
        }
    }
}

/// Which comparison table regime to run: `S = 0`, positive semidefinite `S`,
/// or indefinite `S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CompTable {
    S0,
    #[value(name = "semidef")]
    SemiDef,
    Indef,
}

impl CompTable {
    pub fn prox(self) -> ProxKind {
        match self {
            CompTable::S0 => ProxKind::Zero,
            CompTable::SemiDef => ProxKind::SemiDef,
            CompTable::Indef => ProxKind::Indef,
        }
    }
}

// ---------------------------------------------------------------------------
// Sweep configuration and results
// ---------------------------------------------------------------------------

fn default_beta() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iters() -> usize {
    1000
}
fn default_mode() -> ModeArg {
    ModeArg::Extended
}
fn default_prox() -> ProxArg {
    ProxArg::Zero
}

/// Full description of one grid sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: usize,
    pub p: f64,
    pub seeds: Vec<u64>,
    pub alpha_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_mode")]
    pub domain_mode: ModeArg,
    #[serde(default = "default_prox")]
    pub prox_kind: ProxArg,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.alpha_grid.is_empty() || self.gamma_grid.is_empty() {
            return Err(BenchError::Config("grids must be nonempty".into()));
        }
        if self.seeds.is_empty() {
            return Err(BenchError::Config("seeds must be nonempty".into()));
        }
        if self
            .alpha_grid
            .iter()
            .chain(&self.gamma_grid)
            .any(|v| !v.is_finite())
        {
            return Err(BenchError::Config("grid values must be finite".into()));
        }
        if self.n < 2 || self.n % 2 != 0 {
            return Err(BenchError::Config(format!(
                "n must be even and at least 2 (got {})",
                self.n
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(BenchError::Config(format!(
                "p must lie in (0, 1] (got {})",
                self.p
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(BenchError::Config(format!(
                "beta must be positive and finite (got {})",
                self.beta
            )));
        }
        if !self.tol.is_finite() {
            return Err(BenchError::Config("tol must be finite".into()));
        }
        if self.max_iters == 0 {
            return Err(BenchError::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// One solved `(alpha, gamma, seed)` run — the CSV row schema.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub alpha: f64,
    pub gamma: f64,
    pub seed: u64,
    pub iters: usize,
    pub stop_reason: StopReason,
    pub final_residual: f64,
    /// Wall-clock milliseconds; recorded but excluded from all determinism
    /// comparisons.
    pub wall_ms: f64,
}

/// Per-cell aggregate of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum CellSummary {
    /// The pair was rejected by the sweep's domain mode.
    OutOfDomain,
    Ran {
        mean_iters: f64,
        /// Mean rounded to the nearest integer — the table-shaped output.
        rounded_mean: u64,
    },
}

/// The assembled sweep: the grid of summaries plus every per-seed run in
/// row-major (gamma outer, alpha inner, seed innermost) order.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub alpha_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    /// `cells[i][j]` is the cell at `gamma_grid[i]`, `alpha_grid[j]`.
    pub cells: Vec<Vec<CellSummary>>,
    pub rows: Vec<CellResult>,
}

/// Equally divides `[lo, hi]` into `steps` parts (`steps + 1` points, both
/// endpoints exact).
pub fn make_axis(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|k| {
            if k == steps {
                hi
            } else {
                lo + k as f64 * (hi - lo) / steps as f64
            }
        })
        .collect()
}

/// Parses the `--grid` syntax `"lo:hi:steps,lo:hi:steps"` into
/// `(alpha_grid, gamma_grid)`.
pub fn parse_grid_spec(spec: &str) -> Result<(Vec<f64>, Vec<f64>), BenchError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(BenchError::Config(format!(
            "grid spec must be \"lo:hi:steps,lo:hi:steps\" (got {spec:?})"
        )));
    }
    let mut axes = Vec::with_capacity(2);
    for part in parts {
        let fields: Vec<&str> = part.split(':').collect();
        if fields.len() != 3 {
            return Err(BenchError::Config(format!(
                "grid axis must be \"lo:hi:steps\" (got {part:?})"
            )));
        }
        let lo: f64 = fields[0]
            .parse()
            .map_err(|_| BenchError::Config(format!("bad grid bound {:?}", fields[0])))?;
        let hi: f64 = fields[1]
            .parse()
            .map_err(|_| BenchError::Config(format!("bad grid bound {:?}", fields[1])))?;
        let steps: usize = fields[2]
            .parse()
            .map_err(|_| BenchError::Config(format!("bad grid step count {:?}", fields[2])))?;
        if steps == 0 {
            return Err(BenchError::Config(
                "grid step count must be positive".into(),
            ));
        }
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(BenchError::Config(format!(
                "grid bounds must be finite with lo <= hi (got {part:?})"
            )));
        }
        axes.push(make_axis(lo, hi, steps));
    }
    let gamma = axes.pop().unwrap();
    let alpha = axes.pop().unwrap();
    Ok((alpha, gamma))
}

fn setup_err(seed: u64) -> impl Fn(sp_prsm::lasso::LassoError) -> BenchError {
    move |e| BenchError::Setup {
        seed,
        message: e.to_string(),
    }
}

/// One prepared problem per seed, shared across every cell of a sweep or
/// every method of a comparison row.
struct SeedProblem {
    seed: u64,
    problem: SplitProblem,
    spec: ProxSpec,
}

fn prepare_problems(
    n: usize,
    p: f64,
    beta: f64,
    kind: ProxKind,
    seeds: &[u64],
) -> Result<Vec<Arc<SeedProblem>>, BenchError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let inst = generate_instance(n, p, seed).map_err(setup_err(seed))?;
            let (problem, spec) = split_problem(&inst, beta, kind).map_err(setup_err(seed))?;
            Ok(Arc::new(SeedProblem {
                seed,
                problem,
                spec,
            }))
        })
        .collect()
}

fn solve_cell(
    sp: &SeedProblem,
    alpha: f64,
    gamma: f64,
    mode: DomainMode,
    beta: f64,
    tol: f64,
    max_iters: usize,
) -> Result<CellResult, BenchError> {
    let abort = |message: String| BenchError::Solver {
        alpha,
        gamma,
        seed: sp.seed,
        message,
    };
    let params = solver_params(alpha, gamma, beta, &sp.spec, mode)
        .map_err(|e| abort(e.to_string()))?
        .with_tol(tol)
        .with_max_iters(max_iters);
    let start = Instant::now();
    let record = sp_prsm::solve(&sp.problem, &params, &SolveOptions::default())
        .map_err(|e| abort(e.to_string()))?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(CellResult {
        alpha,
        gamma,
        seed: sp.seed,
        iters: record.iterations,
        stop_reason: record.stop_reason,
        final_residual: record.final_state.r.norm(),
        wall_ms,
    })
}

/// Runs the full grid: every `(gamma, alpha)` cell is validated under the
/// config's domain mode; rejected cells become [`CellSummary::OutOfDomain`],
/// accepted ones are solved once per seed on the worker pool.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutput, BenchError> {
    config.validate()?;
    let mode = DomainMode::from(config.domain_mode);
    let kind = ProxKind::from(config.prox_kind);
    let problems = prepare_problems(config.n, config.p, config.beta, kind, &config.seeds)?;

    let mut tasks: Vec<(usize, usize, usize)> = Vec::new();
    let mut valid = vec![vec![false; config.alpha_grid.len()]; config.gamma_grid.len()];
    for (i, &gamma) in config.gamma_grid.iter().enumerate() {
        for (j, &alpha) in config.alpha_grid.iter().enumerate() {
            if validate_params(alpha, gamma, mode).is_ok() {
                valid[i][j] = true;
                for s in 0..problems.len() {
                    tasks.push((i, j, s));
                }
            }
        }
    }

    let mut solved: Vec<((usize, usize, usize), CellResult)> = tasks
        .par_iter()
        .map(|&(i, j, s)| {
            let cell = solve_cell(
                &problems[s],
                config.alpha_grid[j],
                config.gamma_grid[i],
                mode,
                config.beta,
                config.tol,
                config.max_iters,
            )?;
            Ok(((i, j, s), cell))
        })
        .collect::<Result<_, BenchError>>()?;
    // Deterministic row-major, seed-ordered assembly regardless of the
    // pool's completion order.
    solved.sort_by_key(|&((i, j, s), _)| (i, j, s));

    let mut cells: Vec<Vec<CellSummary>> = valid
        .iter()
        .map(|row| {
            row.iter()
                .map(|_| CellSummary::OutOfDomain)
                .collect::<Vec<_>>()
        })
        .collect();
    let mut rows = Vec::with_capacity(solved.len());
    let mut idx = 0usize;
    for (i, row_valid) in valid.iter().enumerate() {
        for (j, &ok) in row_valid.iter().enumerate() {
            if !ok {
                continue;
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            while idx < solved.len() && solved[idx].0 .0 == i && solved[idx].0 .1 == j {
                sum += solved[idx].1.iters as f64;
                count += 1;
                rows.push(solved[idx].1.clone());
                idx += 1;
            }
            debug_assert_eq!(count, problems.len());
            let mean = sum / count as f64;
            cells[i][j] = CellSummary::Ran {
                mean_iters: mean,
                rounded_mean: mean.round() as u64,
            };
        }
    }

    Ok(SweepOutput {
        alpha_grid: config.alpha_grid.clone(),
        gamma_grid: config.gamma_grid.clone(),
        cells,
        rows,
    })
}

// ---------------------------------------------------------------------------
// Method comparisons
// ---------------------------------------------------------------------------

/// Shared solve settings for comparison tables.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonSettings {
    pub beta: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for ComparisonSettings {
    fn default() -> Self {
        ComparisonSettings {
            beta: default_beta(),
            tol: default_tol(),
            max_iters: default_max_iters(),
        }
    }
}

/// The three method runs of one `(n, p, seed)` triple.
#[derive(Debug, Clone)]
pub struct SeedCounts {
    pub seed: u64,
    pub admm1: CellResult,
    pub admm2: CellResult,
    pub star: CellResult,
}

/// One comparison-table row: seed-mean iteration counts of the unit-step
/// baseline, the over-relaxed baseline, and the starred method, plus the
/// percentage ratios of the starred method against each baseline.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub n: usize,
    pub p: f64,
    pub iters_admm1: f64,
    pub iters_admm2: f64,
    pub iters_spprsm_star: f64,
    /// `100 * iters_spprsm_star / iters_admm1`, rounded to one decimal.
    pub ratio1: f64,
    /// `100 * iters_spprsm_star / iters_admm2`, rounded to one decimal.
    pub ratio2: f64,
    pub per_seed: Vec<SeedCounts>,
}

/// A comparison row either produced numbers or records why it could not.
#[derive(Debug, Clone)]
pub enum RowOutcome {
    Row(ComparisonRow),
    Failed { n: usize, p: f64, reason: String },
}

impl RowOutcome {
    pub fn row(&self) -> Option<&ComparisonRow> {
        match self {
            RowOutcome::Row(r) => Some(r),
            RowOutcome::Failed { .. } => None,
        }
    }
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn comparison_methods() -> [(f64, f64); 3] {
    [
        (0.0, ADMM1_GAMMA),
        (0.0, ADMM2_GAMMA),
        (STAR_ALPHA, STAR_GAMMA),
    ]
}

/// Runs the three methods over every `(n, p)` size and seed under the
/// table's semi-proximal regime. A solver abort or a run that exhausts its
/// iteration budget marks that row failed rather than reporting a censored
/// count.
pub fn run_comparison_with(
    table: CompTable,
    sizes: &[(usize, f64)],
    seeds: &[u64],
    settings: &ComparisonSettings,
) -> Result<Vec<RowOutcome>, BenchError> {
    if sizes.is_empty() {
        return Err(BenchError::Config("sizes must be nonempty".into()));
    }
    if seeds.is_empty() {
        return Err(BenchError::Config("seeds must be nonempty".into()));
    }
    let kind = table.prox();

    let outcomes: Vec<RowOutcome> = sizes
        .iter()
        .map(|&(n, p)| {
            let per_seed: Result<Vec<SeedCounts>, BenchError> = seeds
                .par_iter()
                .map(|&seed| {
                    let inst = generate_instance(n, p, seed).map_err(setup_err(seed))?;
                    let (problem, spec) =
                        split_problem(&inst, settings.beta, kind).map_err(setup_err(seed))?;
                    let sp = SeedProblem {
                        seed,
                        problem,
                        spec,
                    };
                    let mut runs = Vec::with_capacity(3);
                    for (alpha, gamma) in comparison_methods() {
                        let cell = solve_cell(
                            &sp,
                            alpha,
                            gamma,
                            DomainMode::Primary,
                            settings.beta,
                            settings.tol,
                            settings.max_iters,
                        )?;
                        if cell.stop_reason != StopReason::Tolerance {
                            return Err(BenchError::Solver {
                                alpha,
                                gamma,
                                seed,
                                message: format!(
                                    "no convergence within {} iterations",
                                    settings.max_iters
                                ),
                            });
                        }
                        runs.push(cell);
                    }
                    let star = runs.pop().unwrap();
                    let admm2 = runs.pop().unwrap();
                    let admm1 = runs.pop().unwrap();
                    Ok(SeedCounts {
                        seed,
                        admm1,
                        admm2,
                        star,
                    })
                })
                .collect();
            match per_seed {
                Err(e @ (BenchError::Config(_) | BenchError::Io(_) | BenchError::EmptyResults)) => {
                    Err(e)
                }
                Err(abort) => Ok(RowOutcome::Failed {
                    n,
                    p,
                    reason: abort.to_string(),
                }),
                Ok(counts) => {
                    let mean = |f: fn(&SeedCounts) -> usize| {
                        counts.iter().map(|c| f(c) as f64).sum::<f64>() / counts.len() as f64
                    };
                    let m1 = mean(|c| c.admm1.iters);
                    let m2 = mean(|c| c.admm2.iters);
                    let ms = mean(|c| c.star.iters);
                    Ok(RowOutcome::Row(ComparisonRow {
                        n,
                        p,
                        iters_admm1: m1,
                        iters_admm2: m2,
                        iters_spprsm_star: ms,
                        ratio1: round1(100.0 * ms / m1),
                        ratio2: round1(100.0 * ms / m2),
                        per_seed: counts,
                    }))
                }
            }
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(outcomes)
}

/// [`run_comparison_with`] at the default settings (`beta = 1`,
/// `tol = 1e-6`, `max_iters = 1000`).
pub fn run_comparison(
    table: CompTable,
    sizes: &[(usize, f64)],
    seeds: &[u64],
) -> Result<Vec<RowOutcome>, BenchError> {
    run_comparison_with(table, sizes, seeds, &ComparisonSettings::default())
}

/// Flattens comparison outcomes into CSV rows (method order: unit-step
/// baseline, over-relaxed baseline, starred method; seed-ordered inside each
/// table row).
pub fn comparison_csv_rows(outcomes: &[RowOutcome]) -> Vec<CellResult> {
    let mut rows = Vec::new();
    for outcome in outcomes {
        if let RowOutcome::Row(r) = outcome {
            for counts in &r.per_seed {
                rows.push(counts.admm1.clone());
                rows.push(counts.admm2.clone());
                rows.push(counts.star.clone());
            }
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// CSV emission and parsing
// ---------------------------------------------------------------------------

pub fn stop_reason_label(reason: StopReason) -> &'static str {
    match reason {
        StopReason::Tolerance => "tolerance",
        StopReason::MaxIters => "max_iters",
    }
}

fn stop_reason_from(label: &str) -> Result<StopReason, BenchError> {
    match label {
        "tolerance" => Ok(StopReason::Tolerance),
        "max_iters" => Ok(StopReason::MaxIters),
        other => Err(BenchError::Config(format!(
            "unknown stop reason {other:?} in CSV"
        ))),
    }
}

/// Renders rows to CSV text. Column formats are pinned so identical runs are
/// byte-identical: `alpha`/`gamma` with six decimals, `final_residual` in
/// scientific notation with six significant decimals, `wall_ms` with three.
pub fn csv_string(rows: &[CellResult]) -> Result<String, BenchError> {
    if rows.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{:.6},{:.6},{},{},{},{:.6e},{:.3}",
            r.alpha,
            r.gamma,
            r.seed,
            r.iters,
            stop_reason_label(r.stop_reason),
            r.final_residual,
            r.wall_ms
        )
        .expect("string write");
    }
    Ok(out)
}

/// Writes [`csv_string`] to `path`.
pub fn emit_csv(rows: &[CellResult], path: &Path) -> Result<(), BenchError> {
    fs::write(path, csv_string(rows)?)?;
    Ok(())
}

/// Re-reads emitted CSV. `alpha`/`gamma`/`final_residual` round-trip at the
/// emitted precision, the discrete columns exactly.
pub fn parse_csv(text: &str) -> Result<Vec<CellResult>, BenchError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(BenchError::EmptyResults)?;
    if header != CSV_HEADER {
        return Err(BenchError::Config(format!(
            "unexpected CSV header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(BenchError::Config(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let bad = |name: &str| BenchError::Config(format!("line {}: bad {name}", lineno + 2));
        rows.push(CellResult {
            alpha: fields[0].parse().map_err(|_| bad("alpha"))?,
            gamma: fields[1].parse().map_err(|_| bad("gamma"))?,
            seed: fields[2].parse().map_err(|_| bad("seed"))?,
            iters: fields[3].parse().map_err(|_| bad("iters"))?,
            stop_reason: stop_reason_from(fields[4])?,
            final_residual: fields[5].parse().map_err(|_| bad("final_residual"))?,
            wall_ms: fields[6].parse().map_err(|_| bad("wall_ms"))?,
        });
    }
    if rows.is_empty() {
        return Err(BenchError::EmptyResults);
    }
    Ok(rows)
}

/// Strips the trailing (timing) column from every CSV line — the comparand
/// for determinism checks.
pub fn csv_without_timing(csv: &str) -> String {
    let mut out = String::with_capacity(csv.len());
    for line in csv.lines() {
        match line.rsplit_once(',') {
            Some((head, _)) => out.push_str(head),
            None => out.push_str(line),
        }
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Text tables
// ---------------------------------------------------------------------------

/// Renders the sweep as an aligned text table: gamma rows by alpha columns,
/// rounded-mean iteration counts, `--` for out-of-domain cells.
pub fn emit_table(out: &SweepOutput) -> String {
    let mut s = String::new();
    write!(s, "{:>11} |", "gamma\\alpha").unwrap();
    for &a in &out.alpha_grid {
        write!(s, " {:>6.3}", a).unwrap();
    }
    s.push('\n');
    let width = 13 + 7 * out.alpha_grid.len();
    s.push_str(&"-".repeat(width));
    s.push('\n');
    for (i, &g) in out.gamma_grid.iter().enumerate() {
        write!(s, "{:>11.3} |", g).unwrap();
        for cell in &out.cells[i] {
            match cell {
                CellSummary::OutOfDomain => write!(s, " {:>6}", "--").unwrap(),
                CellSummary::Ran { rounded_mean, .. } => write!(s, " {:>6}", rounded_mean).unwrap(),
            }
        }
        s.push('\n');
    }
    s
}

/// Renders comparison outcomes with seed-mean iteration counts (rounded like
/// the reference layout) and one-decimal percentage ratios.
pub fn emit_comparison_table(outcomes: &[RowOutcome]) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "{:>6} {:>5} | {:>7} {:>7} {:>9} {:>10} {:>10}",
        "n", "p", "ADMM1", "ADMM2", "sP-PRSM*", "ratio1(%)", "ratio2(%)"
    )
    .unwrap();
    s.push_str(&"-".repeat(62));
    s.push('\n');
    for outcome in outcomes {
        match outcome {
            RowOutcome::Row(r) => writeln!(
                s,
                "{:>6} {:>5} | {:>7} {:>7} {:>9} {:>10.1} {:>10.1}",
                r.n,
                r.p,
                r.iters_admm1.round() as u64,
                r.iters_admm2.round() as u64,
                r.iters_spprsm_star.round() as u64,
                r.ratio1,
                r.ratio2
            )
            .unwrap(),
            RowOutcome::Failed { n, p, reason } => {
                writeln!(s, "{:>6} {:>5} | failed: {reason}", n, p).unwrap()
            }
        }
    }
    s
}

// ---------------------------------------------------------------------------
// JSON config file (CLI surface)
// ---------------------------------------------------------------------------

/// The JSON config file: every field optional, mirroring the CLI flags;
/// flags override file values. `alpha_grid`/`gamma_grid`/`sizes` have no
/// flag equivalents beyond `--grid` and `--n`/`--p`.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub seeds: Option<Vec<u64>>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub gamma_grid: Option<Vec<f64>>,
    pub grid: Option<String>,
    pub beta: Option<f64>,
    pub prox: Option<ProxArg>,
    pub mode: Option<ModeArg>,
    pub table: Option<u8>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub out: Option<PathBuf>,
    pub sizes: Option<Vec<(usize, f64)>>,
}

pub fn load_file_config(path: &Path) -> Result<FileConfig, BenchError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))
}
