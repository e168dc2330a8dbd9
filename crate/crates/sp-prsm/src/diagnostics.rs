//! Run-level audits: does a recorded trajectory actually exhibit the
//! contraction, the ergodic/nonergodic `O(1/t)` bounds, and (for strongly
//! convex second blocks) the linear rate that the parameter theory promises?
//!
//! Every audit works on a [`RunRecord`] captured with
//! [`SnapshotPolicy::All`], recomputing all quantities from the stored
//! iterates. Nothing here feeds back into the solver; the audits exist to
//! falsify the implementation (or the chosen parameters) when an inequality
//! that should hold does not.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::model::{
    ContractionConstants, Coupling, Metric, ParamError, ProxOp, SolverParams, WPoint,
};
use crate::solver::{
    reduce_to, solve, NamedMethod, OracleError, RunRecord, SolveError, SolveOptions, SplitProblem,
    StopReason,
};

/// Audit failures.
#[derive(Debug, Error)]
pub enum DiagError {
    #[error("reference solve stalled: best stopping metric {best} above tol")]
    ReferenceNotConverged { best: f64 },
    #[error("solver failure: {0}")]
    Solve(#[from] SolveError),
    #[error("parameters: {0}")]
    Params(#[from] ParamError),
    #[error("this audit requires a full snapshot record (SnapshotPolicy::All) with at least {min_iters} iterations")]
    MissingTrajectory { min_iters: usize },
    #[error("the problem provides no subgradient selections")]
    MissingSubgradients,
    #[error("sample {index} violates the coupling constraint: residual {residual}")]
    InfeasibleSample { index: usize, residual: f64 },
    #[error("{0}")]
    OutOfScope(String),
    #[error("rate window too short: {available} usable ratios, need at least 5")]
    WindowTooShort { available: usize },
}

/// The metric induced by a problem/parameter pair, shared by all audits.
pub fn metric_for<'a>(problem: &'a SplitProblem, params: &'a SolverParams) -> Metric<'a> {
    Metric {
        alpha: params.alpha,
        gamma: params.gamma,
        beta: params.beta,
        b: &problem.b,
        s: &params.s,
        t: &params.t,
        sigma1: &problem.sigma1,
        sigma2: &problem.sigma2,
    }
}

// ---------------------------------------------------------------------------
// Reference solutions
// ---------------------------------------------------------------------------

/// A high-accuracy solution used as the anchor `w*` of the audits.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub w_star: WPoint,
    /// The stopping metric actually reached.
    pub accuracy: f64,
}

/// Computes a reference solution with the unit-dual-step special case at
/// `beta = 1` (up to `100_000` iterations, cheap stopping rule). The
/// problem's oracles must therefore accept `S = T = 0` and `beta = 1`; for
/// problems factored at another `beta`, use [`compute_reference_with`].
pub fn compute_reference(problem: &SplitProblem, tol: f64) -> Result<ReferenceSolution, DiagError> {
    let params = reduce_to(NamedMethod::Admm1, 1.0)?;
    compute_reference_with(problem, &params, tol)
}

/// As [`compute_reference`] with caller-chosen solver parameters; only the
/// tolerance, iteration budget, and stopping rule are overridden.
pub fn compute_reference_with(
    problem: &SplitProblem,
    params: &SolverParams,
    tol: f64,
) -> Result<ReferenceSolution, DiagError> {
    let params = params
        .clone()
        .with_tol(tol)
        .with_max_iters(100_000)
        .with_stop_rule(crate::model::StopRule::Cheap);
    let rec = solve(problem, &params, &SolveOptions::default())?;
    if rec.stop_reason != StopReason::Tolerance {
        let best = rec
            .residual_norms
            .iter()
            .zip(&rec.dy_b_norms)
            .map(|(r, d)| r.max(*d))
            .fold(f64::INFINITY, f64::min);
        return Err(DiagError::ReferenceNotConverged { best });
    }
    let accuracy = rec
        .residual_norms
        .last()
        .copied()
        .unwrap_or(0.0)
        .max(rec.dy_b_norms.last().copied().unwrap_or(0.0));
    Ok(ReferenceSolution {
        w_star: rec.final_state.w(),
        accuracy,
    })
}

// ---------------------------------------------------------------------------
// Contraction audit
// ---------------------------------------------------------------------------

/// The Lyapunov quantities along a trajectory:
/// `phi[k] = ||w^k - w*||_Ghat^2 + rho ||r^k||^2 + eta ||y^k - y^{k-1}||_T^2`
/// (with `y^{-1} := y^0`), plus the squared step norms in both metrics.
#[derive(Clone, Debug)]
pub struct LyapunovSeries {
    pub phi: Vec<f64>,
    /// `||w^k - w^{k+1}||_Ghat^2` for `k = 0 .. iterations-1`.
    pub step_ghat: Vec<f64>,
    /// `||w^k - w^{k+1}||_G^2` for the same range.
    pub step_g: Vec<f64>,
}

/// Outcome of [`audit_contraction`].
#[derive(Clone, Debug)]
pub struct ContractionAudit {
    pub lyapunov: LyapunovSeries,
    /// `phi[k] - phi[k+1] - tau_hat * step_ghat[k]` for `k = 1 .. K-1`;
    /// the theory says every entry is nonnegative.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    pub phi1: f64,
    pub pass: bool,
}

impl ContractionAudit {
    pub fn summary_line(&self) -> String {
        format!(
            "contraction: {} (min margin {:.3e}, phi_1 {:.3e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.min_margin,
            self.phi1
        )
    }
}

fn require_trajectory(record: &RunRecord, min_iters: usize) -> Result<(), DiagError> {
    if record.iterations < min_iters || record.iterates.len() != record.iterations + 1 {
        return Err(DiagError::MissingTrajectory { min_iters });
    }
    Ok(())
}

fn lyapunov_series(
    problem: &SplitProblem,
    params: &SolverParams,
    record: &RunRecord,
    constants: &ContractionConstants,
    w_star: &WPoint,
) -> LyapunovSeries {
    let metric = metric_for(problem, params);
    let k_max = record.iterations;
    let mut phi = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let dw = record.iterates[k].sub(w_star);
        let r_sq = if k == 0 {
            problem
                .residual(&record.iterates[0].x, &record.iterates[0].y)
                .norm_squared()
        } else {
            let r = record.residual_norms[k - 1];
            r * r
        };
        let dyt_sq = if k == 0 {
            0.0
        } else {
            let d = record.dy_t_norms[k - 1];
            d * d
        };
        phi.push(metric.ghat_norm_sq(&dw) + constants.rho * r_sq + constants.eta * dyt_sq);
    }
    let mut step_ghat = Vec::with_capacity(k_max);
    let mut step_g = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let dw = record.iterates[k].sub(&record.iterates[k + 1]);
        step_ghat.push(metric.ghat_norm_sq(&dw));
        step_g.push(metric.g_norm_sq(&dw));
    }
    LyapunovSeries {
        phi,
        step_ghat,
        step_g,
    }
}

/// Checks the per-iteration contraction
/// `phi[k] - phi[k+1] >= tau_hat ||w^k - w^{k+1}||_Ghat^2` for
/// `k = 1 .. K-1` against a reference solution. Passes when the worst margin
/// is above `-1e-8 * (1 + phi[1])`.
pub fn audit_contraction(
    problem: &SplitProblem,
    params: &SolverParams,
    record: &RunRecord,
    constants: &ContractionConstants,
    reference: &ReferenceSolution,
) -> Result<ContractionAudit, DiagError> {
    require_trajectory(record, 2)?;
    let lyapunov = lyapunov_series(problem, params, record, constants, &reference.w_star);
    let mut margins = Vec::with_capacity(record.iterations - 1);
    for k in 1..record.iterations {
        margins.push(
            lyapunov.phi[k] - lyapunov.phi[k + 1] - constants.tau_hat * lyapunov.step_ghat[k],
        );
    }
    let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let phi1 = lyapunov.phi[1];
    let pass = min_margin >= -1e-8 * (1.0 + phi1);
    Ok(ContractionAudit {
        lyapunov,
        margins,
        min_margin,
        phi1,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Variational operator and ergodic audit
// ---------------------------------------------------------------------------

/// The monotone operator of the saddle formulation at `w`:
/// `F(w) = (xi_x - A^T l, xi_y - B^T l, A x + B y - b)` with `xi` taken from
/// the problem's subgradient selections.
pub fn f_operator(problem: &SplitProblem, w: &WPoint) -> Result<WPoint, DiagError> {
    let (Some(g1), Some(g2)) = (&problem.theta1_subgrad, &problem.theta2_subgrad) else {
        return Err(DiagError::MissingSubgradients);
    };
    Ok(WPoint {
        x: g1(&w.x) - problem.a.apply_transpose(&w.lambda),
        y: g2(&w.y) - problem.b.apply_transpose(&w.lambda),
        lambda: problem.residual(&w.x, &w.y),
    })
}

/// Outcome of [`audit_ergodic`].
#[derive(Clone, Debug)]
pub struct ErgodicAudit {
    /// `(1/(2t)) (||w^1 - w^0||_G^2 + rho ||r^1||^2 + eta ||y^1 - y^0||_T^2)`.
    pub bound: f64,
    /// `<w_bar_t - w, F(w)> - bound` per sample.
    pub violations: Vec<f64>,
    pub max_violation: f64,
    pub t: usize,
    pub pass: bool,
}

impl ErgodicAudit {
    pub fn summary_line(&self) -> String {
        format!(
            "ergodic bound (t = {}): {} (max violation {:.3e}, bound {:.3e})",
            self.t,
            if self.pass { "PASS" } else { "FAIL" },
            self.max_violation,
            self.bound
        )
    }
}

/// Checks the ergodic variational bound at the averaged point `w_bar_t`:
/// for each feasible sample `w`, `<w_bar_t - w, F(w)>` must not exceed
/// `(1/(2t)) (||w^1 - w^0||_G^2 + rho ||r^1||^2 + eta ||y^1 - y^0||_T^2)`
/// beyond `1e-8 * (1 + |bound|)`. Samples must satisfy the coupling
/// constraint to `1e-8 * (1 + ||x|| + ||y||)`.
pub fn audit_ergodic(
    problem: &SplitProblem,
    params: &SolverParams,
    record: &RunRecord,
    constants: &ContractionConstants,
    t: usize,
    samples: &[WPoint],
) -> Result<ErgodicAudit, DiagError> {
    require_trajectory(record, 2)?;
    let w_bar = crate::solver::ergodic_average(record, t)?.w_bar;

    let metric = metric_for(problem, params);
    let dw0 = record.iterates[1].sub(&record.iterates[0]);
    let r1 = record.residual_norms[0];
    let dyt1 = record.dy_t_norms[0];
    let bound = (metric.g_norm_sq(&dw0) + constants.rho * r1 * r1 + constants.eta * dyt1 * dyt1)
        / (2.0 * t as f64);

    let mut violations = Vec::with_capacity(samples.len());
    for (index, w) in samples.iter().enumerate() {
        let residual = problem.residual(&w.x, &w.y).norm();
        if residual > 1e-8 * (1.0 + w.x.norm() + w.y.norm()) {
            return Err(DiagError::InfeasibleSample { index, residual });
        }
        let f = f_operator(problem, w)?;
        let lhs = (&w_bar.x - &w.x).dot(&f.x)
            + (&w_bar.y - &w.y).dot(&f.y)
            + (&w_bar.lambda - &w.lambda).dot(&f.lambda);
        violations.push(lhs - bound);
    }
    let max_violation = violations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = max_violation <= 1e-8 * (1.0 + bound.abs());
    Ok(ErgodicAudit {
        bound,
        violations,
        max_violation,
        t,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Nonergodic audit
// ---------------------------------------------------------------------------

/// Outcome of [`audit_nonergodic`].
#[derive(Clone, Debug)]
pub struct NonergodicAudit {
    /// Squared step norms in `G` never increase (up to `1e-10` relative).
    pub monotone: bool,
    /// `||w^{t+1} - w^t||_G^2 <= (1/tau) (1/t) C` at every `t`.
    pub bound_ok: bool,
    /// Largest observed `step_g[t] * t * tau / C`; at most 1 when the bound
    /// holds everywhere.
    pub worst_ratio: f64,
    pub pass: bool,
}

impl NonergodicAudit {
    pub fn summary_line(&self) -> String {
        format!(
            "nonergodic bound: {} (monotone {}, worst ratio {:.4})",
            if self.pass { "PASS" } else { "FAIL" },
            self.monotone,
            self.worst_ratio
        )
    }
}

/// Checks, for `gamma` in `(0, 1]`, that the squared `G`-step norms are
/// nonincreasing and obey
/// `||w^{t+1} - w^t||_G^2 <= (1/tau) (1/t)
///  (||w^1 - w^0||_G^2 + rho ||r^1||^2 + eta ||y^1 - y^0||_T^2)`
/// at every `t = 1 .. K-1`, with `1e-8` relative slack on the bound.
pub fn audit_nonergodic(
    problem: &SplitProblem,
    params: &SolverParams,
    record: &RunRecord,
    constants: &ContractionConstants,
) -> Result<NonergodicAudit, DiagError> {
    if !(params.gamma > 0.0 && params.gamma <= 1.0) {
        return Err(DiagError::OutOfScope(
            "the nonergodic bound is stated for gamma in (0, 1]".into(),
        ));
    }
    require_trajectory(record, 2)?;
    let metric = metric_for(problem, params);
    let k_max = record.iterations;
    let mut step_g = Vec::with_capacity(k_max);
    for k in 0..k_max {
        let dw = record.iterates[k].sub(&record.iterates[k + 1]);
        step_g.push(metric.g_norm_sq(&dw));
    }

    let mut monotone = true;
    for k in 1..k_max {
        if step_g[k] > step_g[k - 1] * (1.0 + 1e-10) + 1e-300 {
            monotone = false;
        }
    }

    let r1 = record.residual_norms[0];
    let dyt1 = record.dy_t_norms[0];
    let c_term = step_g[0] + constants.rho * r1 * r1 + constants.eta * dyt1 * dyt1;

    let mut bound_ok = true;
    let mut worst_ratio: f64 = 0.0;
    for t in 1..k_max {
        let bound = c_term / (constants.tau * t as f64);
        if step_g[t] > bound * (1.0 + 1e-8) {
            bound_ok = false;
        }
        if c_term > 0.0 {
            worst_ratio = worst_ratio.max(step_g[t] * t as f64 * constants.tau / c_term);
        }
    }
    let pass = monotone && bound_ok;
    Ok(NonergodicAudit {
        monotone,
        bound_ok,
        worst_ratio,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Linear rate estimation
// ---------------------------------------------------------------------------

/// Outcome of [`estimate_linear_rate`].
#[derive(Clone, Debug)]
pub struct LinearRateReport {
    /// Observed per-step factor: the geometric mean of `E_{k+1}/E_k` over the
    /// tail window.
    pub q: f64,
    /// `E_k = ||v^k - v*||_H^2 + rho ||r^k||^2`, `v = (y, lambda)`.
    pub e_series: Vec<f64>,
    /// The theory's rate constant `c`; the guaranteed factor is `1/(1 + c)`.
    pub c: f64,
    pub rate_bound: f64,
    /// Largest `c` the theory can certify over all admissible tunings,
    /// `c_{alpha,gamma} / (kappa_B sqrt(kappa_theta2))`.
    pub c_max: f64,
    /// Set when `gamma != 1`, where the rate constant depends on auxiliary
    /// parameters whose admissible ranges make parts of it vacuous; the
    /// report fixes `t = 1/2`, `rho = 2` and flags the ambiguity.
    pub constant_ambiguous: bool,
    /// Number of ratios averaged.
    pub window: usize,
    pub pass: bool,
}

impl LinearRateReport {
    pub fn summary_line(&self) -> String {
        format!(
            "linear rate: {} (q {:.4}, bound {:.4}, window {}{})",
            if self.pass { "PASS" } else { "FAIL" },
            self.q,
            self.rate_bound,
            self.window,
            if self.constant_ambiguous {
                ", constant ambiguous for gamma != 1"
            } else {
                ""
            }
        )
    }
}

/// Estimates the observed linear factor of `E_k` and compares it against the
/// guaranteed `1/(1 + c)` for a `mu`-strongly convex, `ell`-smooth second
/// block. Requires `S = T = 0`, a surjective `B`, and a full snapshot record;
/// the window is the last half of the series, truncated where `E_k` falls
/// below `1e-24`, and must contain at least 5 ratios.
///
/// The report passes iff `q < 1` and `q <= (1/(1+c)) (1 + 1e-6)`.
pub fn estimate_linear_rate(
    problem: &SplitProblem,
    params: &SolverParams,
    record: &RunRecord,
    reference: &ReferenceSolution,
    mu: f64,
    ell: f64,
) -> Result<LinearRateReport, DiagError> {
    if !params.s.is_zero() || !params.t.is_zero() {
        return Err(DiagError::OutOfScope(
            "the linear rate is stated for S = T = 0".into(),
        ));
    }
    if !(mu > 0.0 && ell >= mu) {
        return Err(DiagError::OutOfScope(
            "need 0 < mu <= ell for the strong convexity constants".into(),
        ));
    }
    require_trajectory(record, 2)?;
    let constants = crate::model::contraction_constants(params.alpha, params.gamma)?;
    let (bbt_min, bbt_max) = problem.b.bbt_eigen_range();
    if bbt_min <= 0.0 {
        return Err(DiagError::OutOfScope(
            "the linear rate requires B B^T to be positive definite".into(),
        ));
    }

    let metric = metric_for(problem, params);
    let w_star = &reference.w_star;
    let k_max = record.iterations;
    let mut e_series = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let w = &record.iterates[k];
        let dy = &w.y - &w_star.y;
        let dl = &w.lambda - &w_star.lambda;
        let r_sq = if k == 0 {
            problem.residual(&w.x, &w.y).norm_squared()
        } else {
            let r = record.residual_norms[k - 1];
            r * r
        };
        e_series.push(metric.h_norm_sq(&dy, &dl) + constants.rho * r_sq);
    }

    // Usable prefix: stop where E_k falls below the floor.
    let mut usable = e_series.len();
    for (k, e) in e_series.iter().enumerate() {
        if *e < 1e-24 {
            usable = k;
            break;
        }
    }
    let start = usable / 2;
    let available = usable.saturating_sub(start).saturating_sub(1);
    if available < 5 {
        return Err(DiagError::WindowTooShort { available });
    }
    let mut log_sum = 0.0;
    for k in start..usable - 1 {
        log_sum += (e_series[k + 1] / e_series[k]).ln();
    }
    let window = usable - 1 - start;
    let q = (log_sum / window as f64).exp();

    let beta = params.beta;
    let c_ag = crate::model::c_alpha_gamma(params.alpha, params.gamma)?;
    let (c, constant_ambiguous) = if params.gamma == 1.0 {
        let c1 = mu * beta * bbt_min / (mu * ell + beta * beta * bbt_max * bbt_min);
        (2.0 * c1 * c_ag, false)
    } else {
        // Fixed auxiliary parameters t = 1/2, rho = 2 (see the report docs).
        let t_par = 0.5;
        let rho_par = 2.0;
        let c1 = (mu * (1.0 - t_par) / (beta * bbt_max))
            .min((1.0 - 1.0 / rho_par) * (bbt_min / ell) * beta * t_par);
        let c2 = (1.0 - rho_par) * (params.gamma - 1.0).abs() * (bbt_min / ell) * t_par;
        let arm1 = 2.0 * c1 * c_ag;
        let c = if constants.rho > 0.0 {
            arm1.min((2.0 * c2 + params.alpha + params.gamma) * beta / constants.rho)
        } else {
            arm1
        };
        (c, true)
    };
    let rate_bound = 1.0 / (1.0 + c);
    let kappa_b = (bbt_max / bbt_min).sqrt();
    let c_max = c_ag / (kappa_b * (ell / mu).sqrt());
    let pass = q < 1.0 && q <= rate_bound * (1.0 + 1e-6);

    Ok(LinearRateReport {
        q,
        e_series,
        c,
        rate_bound,
        c_max,
        constant_ambiguous,
        window,
        pass,
    })
}

// ---------------------------------------------------------------------------
// A strongly convex quadratic test problem
// ---------------------------------------------------------------------------

/// Builds `min (1/2)||C x - d||^2 + (mu/2)||y||^2  s.t.  x - y = 0`
/// (`A = I`, `B = -I`, `b = 0`), the canonical instance for the linear-rate
/// theory: the second block is `mu`-strongly convex and `mu`-smooth.
///
/// The x-subproblem is solved through a cached factorization of
/// `C^T C + beta I`, so the oracles reject any `beta` other than the one
/// given here and any nonzero semi-proximal term.
pub fn quadratic_instance(
    c_mat: &DMatrix<f64>,
    d: &DVector<f64>,
    mu: f64,
    beta: f64,
) -> SplitProblem {
    assert!(beta > 0.0 && beta.is_finite(), "beta must be positive");
    assert!(mu > 0.0 && mu.is_finite(), "mu must be positive");
    assert_eq!(c_mat.nrows(), d.len(), "C and d disagree on the row count");
    let n = c_mat.ncols();

    let mut ctc_beta = c_mat.tr_mul(c_mat);
    for i in 0..n {
        ctc_beta[(i, i)] += beta;
    }
    let chol: Cholesky<f64, nalgebra::Dyn> =
        Cholesky::new(ctc_beta).expect("C^T C + beta I is positive definite");
    let ctd = c_mat.tr_mul(d);

    let c_obj = c_mat.clone();
    let d_obj = d.clone();
    let c_grad = c_mat.clone();
    let d_grad = d.clone();

    let x_update = {
        move |y: &DVector<f64>,
              l: &DVector<f64>,
              beta_arg: f64,
              s: &ProxOp,
              _x_prev: &DVector<f64>| {
            if beta_arg != beta {
                return Err(OracleError(format!(
                    "x-oracle factored at beta = {beta}, called with {beta_arg}"
                )));
            }
            if !s.is_zero() {
                return Err(OracleError("x-oracle supports S = 0 only".into()));
            }
            // (C^T C + beta I) x = C^T d + l + beta y
            let rhs = &ctd + l + y * beta;
            Ok(chol.solve(&rhs))
        }
    };
    let y_update = move |x: &DVector<f64>,
                         l: &DVector<f64>,
                         beta_arg: f64,
                         t: &ProxOp,
                         _y_prev: &DVector<f64>| {
        if beta_arg != beta {
            return Err(OracleError(format!(
                "y-oracle built at beta = {beta}, called with {beta_arg}"
            )));
        }
        if !t.is_zero() {
            return Err(OracleError("y-oracle supports T = 0 only".into()));
        }
        // mu y + l + beta (y - x) = 0
        Ok((x * beta - l) / (mu + beta))
    };

    SplitProblem {
        a: Coupling::Identity(n),
        b: Coupling::NegIdentity(n),
        rhs: DVector::zeros(n),
        x_update: Box::new(x_update),
        y_update: Box::new(y_update),
        sigma1: ProxOp::Zero,
        sigma2: ProxOp::Dense(DMatrix::identity(n, n) * mu),
        objective: Box::new(move |x, y| {
            0.5 * (&c_obj * x - &d_obj).norm_squared() + 0.5 * mu * y.norm_squared()
        }),
        theta1_subgrad: Some(Box::new(move |x| c_grad.tr_mul(&(&c_grad * x - &d_grad)))),
        theta2_subgrad: Some(Box::new(move |y| y * mu)),
    }
}
