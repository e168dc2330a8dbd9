//! Command-line front end: grid sweeps (default, or `--table 1`) and method
//! comparison tables (`--table 2|3|4`), with JSON-config mirroring where
//! explicit flags always win.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sp_prsm_bench::{
    comparison_csv_rows, emit_comparison_table, emit_csv, emit_table, load_file_config, make_axis,
    parse_grid_spec, run_comparison_with, run_sweep, BenchError, CompTable, ComparisonSettings,
    FileConfig, ModeArg, ProxArg, RowOutcome, SweepConfig,
};

/// Lasso benchmark harness: `(alpha, gamma)` sweeps and method comparisons.
#[derive(Debug, Parser)]
#[command(name = "sp-prsm-bench", version)]
struct Cli {
    /// JSON config file mirroring these flags; explicit flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem dimension n (even; the design matrix has n/2 rows).
    #[arg(long)]
    n: Option<usize>,
    /// Ground-truth density in (0, 1].
    #[arg(long)]
    p: Option<f64>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// First dual step size (single-cell sweep; requires --gamma).
    #[arg(long)]
    alpha: Option<f64>,
    /// Second dual step size (single-cell sweep; requires --alpha).
    #[arg(long)]
    gamma: Option<f64>,
    /// Penalty parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Semi-proximal regime for sweeps.
    #[arg(long, value_enum)]
    prox: Option<ProxArg>,
    /// Parameter-domain rule deciding which grid cells run.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Grid spec "lo:hi:steps,lo:hi:steps" (alpha axis first, then gamma).
    #[arg(long)]
    grid: Option<String>,
    /// 1 = grid sweep (default); 2, 3, 4 = comparisons with S = 0,
    /// semidefinite S, indefinite S.
    #[arg(long)]
    table: Option<u8>,
    /// Stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget per run.
    #[arg(long)]
    max_iters: Option<usize>,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_grids(
    alpha: Option<f64>,
    gamma: Option<f64>,
    grid_spec: Option<&str>,
    file_alpha: Option<Vec<f64>>,
    file_gamma: Option<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<f64>), BenchError> {
    match (alpha, gamma) {
        (Some(a), Some(g)) => Ok((vec![a], vec![g])),
        (Some(_), None) | (None, Some(_)) => Err(BenchError::Config(
            "a single-cell sweep needs both --alpha and --gamma".into(),
        )),
        (None, None) => {
            if let Some(spec) = grid_spec {
                parse_grid_spec(spec)
            } else {
                match (file_alpha, file_gamma) {
                    (Some(a), Some(g)) => Ok((a, g)),
                    (None, None) => Ok((make_axis(0.0, 1.618, 10), make_axis(0.0, 1.618, 10))),
                    _ => Err(BenchError::Config(
                        "alpha_grid and gamma_grid must be given together".into(),
                    )),
                }
            }
        }
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    let file = match &cli.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };

    let n = cli.n.or(file.n).unwrap_or(2000);
    let p = cli.p.or(file.p).unwrap_or(0.2);
    let seeds = cli
        .seeds
        .or(file.seeds)
        .unwrap_or_else(|| vec![1, 2, 3, 4, 5]);
    let beta = cli.beta.or(file.beta).unwrap_or(1.0);
    let tol = cli.tol.or(file.tol).unwrap_or(1e-6);
    let max_iters = cli.max_iters.or(file.max_iters).unwrap_or(1000);
    let prox = cli.prox.or(file.prox).unwrap_or(ProxArg::Zero);
    let mode = cli.mode.or(file.mode).unwrap_or(ModeArg::Extended);
    let out = cli.out.or(file.out);
    let table = cli.table.or(file.table);

    match table {
        None | Some(1) => {
            let alpha = cli.alpha.or(file.alpha);
            let gamma = cli.gamma.or(file.gamma);
            let (alpha_grid, gamma_grid) = resolve_grids(
                alpha,
                gamma,
                cli.grid.as_deref().or(file.grid.as_deref()),
                file.alpha_grid,
                file.gamma_grid,
            )?;
            let config = SweepConfig {
                n,
                p,
                seeds,
                alpha_grid,
                gamma_grid,
                domain_mode: mode,
                prox_kind: prox,
                beta,
                tol,
                max_iters,
                output_path: out.clone(),
            };
            let output = run_sweep(&config)?;
            print!("{}", emit_table(&output));
            if let Some(path) = &out {
                emit_csv(&output.rows, path)?;
                eprintln!("csv written to {}", path.display());
            }
            Ok(())
        }
        Some(t @ 2..=4) => {
            let comp = match t {
                2 => CompTable::S0,
                3 => CompTable::SemiDef,
                _ => CompTable::Indef,
            };
            // Flags override a sizes list from the file.
            let sizes = if cli.n.is_some() || cli.p.is_some() {
                vec![(n, p)]
            } else {
                file.sizes.unwrap_or_else(|| vec![(n, p)])
            };
            let settings = ComparisonSettings {
                beta,
                tol,
                max_iters,
            };
            let outcomes = run_comparison_with(comp, &sizes, &seeds, &settings)?;
            print!("{}", emit_comparison_table(&outcomes));
            if let Some(path) = &out {
                let rows = comparison_csv_rows(&outcomes);
                if !rows.is_empty() {
                    emit_csv(&rows, path)?;
                    eprintln!("csv written to {}", path.display());
                }
            }
            if let Some(RowOutcome::Failed { n, p, reason }) =
                outcomes.iter().find(|o| o.row().is_none())
            {
                return Err(BenchError::RowFailed {
                    n: *n,
                    p: *p,
                    reason: reason.clone(),
                });
            }
            Ok(())
        }
        Some(other) => Err(BenchError::Config(format!(
            "--table must be 1, 2, 3, or 4 (got {other})"
        ))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
