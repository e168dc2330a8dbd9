//! The splitting iteration: subproblem oracles, the step map, the driver
//! loop, stopping rules, run records, and ergodic averaging.
//!
//! One step from `(x^k, y^k, l^k)`:
//!
//! ```text
//! x^{k+1}   = argmin_x L_beta(x, y^k, l^k) + (1/2)||x - x^k||_S^2
//! l^{k+1/2} = l^k - alpha beta (A x^{k+1} + B y^k - b)
//! y^{k+1}   = argmin_y L_beta(x^{k+1}, y, l^{k+1/2}) + (1/2)||y - y^k||_T^2
//! l^{k+1}   = l^{k+1/2} - gamma beta (A x^{k+1} + B y^{k+1} - b)
//! ```
//!
//! The half-step deliberately uses the *old* `y^k`; both dual updates share
//! the same penalty `beta` and differ only in the step scalings `alpha` and
//! `gamma`. The subproblem solves are caller-provided oracles so that
//! structure (diagonal systems, cached factorizations, closed-form proxes)
//! stays with the application.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{
    Coupling, DomainMode, IterState, ParamError, ProxOp, SolverParams, StopRule, WPoint,
};

/// Failure reported by a subproblem oracle.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct OracleError(pub String);

/// Oracle for the x-subproblem: `(y^k, l^k, beta, S, x^k) -> x^{k+1}`.
pub type XOracle = dyn Fn(
        &DVector<f64>,
        &DVector<f64>,
        f64,
        &ProxOp,
        &DVector<f64>,
    ) -> Result<DVector<f64>, OracleError>
    + Send
    + Sync;

/// Oracle for the y-subproblem: `(x^{k+1}, l^{k+1/2}, beta, T, y^k) -> y^{k+1}`.
pub type YOracle = dyn Fn(
        &DVector<f64>,
        &DVector<f64>,
        f64,
        &ProxOp,
        &DVector<f64>,
    ) -> Result<DVector<f64>, OracleError>
    + Send
    + Sync;

/// Objective evaluation `theta1(x) + theta2(y)`.
pub type Objective = dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync;

/// A subgradient selection for one objective block.
pub type Subgradient = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;

/// A two-block problem instance, fully specified by its coupling data and
/// subproblem oracles.
pub struct SplitProblem {
    pub a: Coupling,
    pub b: Coupling,
    /// Right-hand side of the coupling constraint `A x + B y = rhs`.
    pub rhs: DVector<f64>,
    pub x_update: Box<XOracle>,
    pub y_update: Box<YOracle>,
    /// Strong-monotonicity offset of `theta1` (zero when none is claimed).
    pub sigma1: ProxOp,
    /// Strong-monotonicity offset of `theta2`.
    pub sigma2: ProxOp,
    pub objective: Box<Objective>,
    /// Subgradient selection for `theta1`, when available. The variational
    /// audits need it; plain solving does not.
    pub theta1_subgrad: Option<Box<Subgradient>>,
    /// Subgradient selection for `theta2`, when available.
    pub theta2_subgrad: Option<Box<Subgradient>>,
}

impl SplitProblem {
    /// `(n1, n2, m)`: x-dimension, y-dimension, constraint dimension.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.a.ncols(), self.b.ncols(), self.rhs.len())
    }

    /// Coupling residual `A x + B y - rhs`.
    pub fn residual(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.a.apply(x) + self.b.apply(y) - &self.rhs
    }

    fn check_dims(&self) -> Result<(), SolveError> {
        let m = self.rhs.len();
        if self.a.nrows() != m || self.b.nrows() != m {
            return Err(SolveError::Dims(format!(
                "coupling rows (A: {}, B: {}) must match rhs length {m}",
                self.a.nrows(),
                self.b.nrows()
            )));
        }
        Ok(())
    }
}

/// Errors aborting a run.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("oracle failure at iteration {k}: {message}")]
    Oracle { k: usize, message: String },
    #[error("non-finite {which} at iteration {k}")]
    NonFinite { k: usize, which: &'static str },
    #[error("dimension mismatch: {0}")]
    Dims(String),
}

/// Why the driver loop returned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// The stopping metric fell to `tol` or below.
    Tolerance,
    /// The iteration budget ran out first.
    MaxIters,
}

/// Which iterates [`solve`] retains in the run record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotPolicy {
    /// Keep no trajectory (cheapest; the final state is always available).
    None,
    /// Keep `w^0` and every iterate — required by the trajectory audits.
    All,
    /// Keep `w^0`, every `k`-th iterate, and the final one.
    Every(usize),
}

/// Options for [`solve`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub snapshots: SnapshotPolicy,
    /// Starting point; defaults to the origin.
    pub start: Option<WPoint>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            snapshots: SnapshotPolicy::None,
            start: None,
        }
    }
}

/// Everything recorded over one run. The per-iteration series all have
/// length `iterations`, with entry `j - 1` describing the state after the
/// `j`-th step.
#[derive(Debug)]
pub struct RunRecord {
    /// Retained iterates per the snapshot policy (`w^0` first).
    pub iterates: Vec<WPoint>,
    /// `||r^k||`, the coupling residual norm.
    pub residual_norms: Vec<f64>,
    /// `||B(y^k - y^{k-1})||`.
    pub dy_b_norms: Vec<f64>,
    /// `||x^k - x^{k-1}||_S` (zero whenever `S = 0`).
    pub dx_s_norms: Vec<f64>,
    /// `||y^k - y^{k-1}||_T` (zero whenever `T = 0`).
    pub dy_t_norms: Vec<f64>,
    /// `theta1(x^k) + theta2(y^k)`.
    pub objective_values: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    pub final_state: IterState,
}

fn ensure_finite(v: &DVector<f64>, k: usize, which: &'static str) -> Result<(), SolveError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolveError::NonFinite { k, which })
    }
}

/// One full step of the iteration from `state` (which holds `w^k`), returning
/// the state at `k + 1`. The coupling residual in the returned state is
/// recomputed from the new iterates, never updated incrementally.
pub fn sp_prsm_step(
    problem: &SplitProblem,
    params: &SolverParams,
    state: &IterState,
) -> Result<IterState, SolveError> {
    let k = state.k + 1;
    let (n1, n2, _) = problem.dims();

    let x_new = (problem.x_update)(&state.y, &state.lambda, params.beta, &params.s, &state.x)
        .map_err(|e| SolveError::Oracle { k, message: e.0 })?;
    if x_new.len() != n1 {
        return Err(SolveError::Dims(format!(
            "x-oracle returned length {} (expected {n1})",
            x_new.len()
        )));
    }
    ensure_finite(&x_new, k, "x-update")?;

    // Half-step residual uses the old y^k.
    let ax_new = problem.a.apply(&x_new);
    let r_half = &ax_new + problem.b.apply(&state.y) - &problem.rhs;
    let lambda_half = &state.lambda - r_half * (params.alpha * params.beta);
    ensure_finite(&lambda_half, k, "dual half-step")?;

    let y_new = (problem.y_update)(&x_new, &lambda_half, params.beta, &params.t, &state.y)
        .map_err(|e| SolveError::Oracle { k, message: e.0 })?;
    if y_new.len() != n2 {
        return Err(SolveError::Dims(format!(
            "y-oracle returned length {} (expected {n2})",
            y_new.len()
        )));
    }
    ensure_finite(&y_new, k, "y-update")?;

    let r_new = ax_new + problem.b.apply(&y_new) - &problem.rhs;
    ensure_finite(&r_new, k, "coupling residual")?;
    let lambda_new = &lambda_half - &r_new * (params.gamma * params.beta);
    ensure_finite(&lambda_new, k, "dual update")?;

    Ok(IterState {
        x: x_new,
        y: y_new,
        y_prev: state.y.clone(),
        lambda: lambda_new,
        lambda_half,
        r: r_new,
        k,
    })
}

/// Evaluates the stopping rule between consecutive states, returning
/// `(should_stop, metric)`. The cheap rule compares
/// `max(||B(y+ - y)||, ||r+||)` against `tol`; the full rule adds the
/// semi-proximal seminorms of the primal displacements.
pub fn stopping_check(
    problem: &SplitProblem,
    params: &SolverParams,
    prev: &IterState,
    cur: &IterState,
) -> (bool, f64) {
    let dy = &cur.y - &prev.y;
    let bdy_norm = problem.b.apply(&dy).norm();
    let r_norm = cur.r.norm();
    let metric = match params.stop_rule {
        StopRule::Cheap => bdy_norm.max(r_norm),
        StopRule::Full => {
            let dx = &cur.x - &prev.x;
            params
                .s
                .seminorm(&dx)
                .max(params.t.seminorm(&dy))
                .max(bdy_norm)
                .max(r_norm)
        }
    };
    (metric <= params.tol, metric)
}

/// Runs the iteration from `opts.start` (default: the origin) until the
/// stopping rule fires or `params.max_iters` steps have been taken. A zero
/// budget returns immediately with [`StopReason::MaxIters`] and empty series.
pub fn solve(
    problem: &SplitProblem,
    params: &SolverParams,
    opts: &SolveOptions,
) -> Result<RunRecord, SolveError> {
    problem.check_dims()?;
    let (n1, n2, m) = problem.dims();

    let w0 = match &opts.start {
        Some(w) => {
            if w.x.len() != n1 || w.y.len() != n2 || w.lambda.len() != m {
                return Err(SolveError::Dims(format!(
                    "start point has dims ({}, {}, {}), expected ({n1}, {n2}, {m})",
                    w.x.len(),
                    w.y.len(),
                    w.lambda.len()
                )));
            }
            w.clone()
        }
        None => WPoint::zeros(n1, n2, m),
    };
    if !w0.is_finite() {
        return Err(SolveError::NonFinite {
            k: 0,
            which: "start point",
        });
    }

    let r0 = problem.residual(&w0.x, &w0.y);
    let mut state = IterState {
        y_prev: w0.y.clone(),
        x: w0.x,
        y: w0.y,
        lambda: w0.lambda,
        lambda_half: DVector::zeros(m),
        r: r0,
        k: 0,
    };

    let mut iterates = Vec::new();
    let keep = |k: usize| match opts.snapshots {
        SnapshotPolicy::None => false,
        SnapshotPolicy::All => true,
        SnapshotPolicy::Every(step) => step > 0 && k % step == 0,
    };
    if !matches!(opts.snapshots, SnapshotPolicy::None) {
        iterates.push(state.w());
    }

    let mut residual_norms = Vec::new();
    let mut dy_b_norms = Vec::new();
    let mut dx_s_norms = Vec::new();
    let mut dy_t_norms = Vec::new();
    let mut objective_values = Vec::new();
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;

    for _ in 0..params.max_iters {
        let next = sp_prsm_step(problem, params, &state)?;

        let dx = &next.x - &state.x;
        let dy = &next.y - &state.y;
        residual_norms.push(next.r.norm());
        dy_b_norms.push(problem.b.apply(&dy).norm());
        dx_s_norms.push(params.s.seminorm(&dx));
        dy_t_norms.push(params.t.seminorm(&dy));
        objective_values.push((problem.objective)(&next.x, &next.y));
        if keep(next.k) {
            iterates.push(next.w());
        }

        let (stop, _) = stopping_check(problem, params, &state, &next);
        state = next;
        iterations = state.k;
        if stop {
            stop_reason = StopReason::Tolerance;
            break;
        }
    }

    // Under Every(k) the final iterate is kept even off-stride, so the record
    // always ends at the returned state.
    if matches!(opts.snapshots, SnapshotPolicy::Every(_)) && iterations > 0 && !keep(iterations) {
        iterates.push(state.w());
    }

    Ok(RunRecord {
        iterates,
        residual_norms,
        dy_b_norms,
        dx_s_norms,
        dy_t_norms,
        objective_values,
        stop_reason,
        iterations,
        final_state: state,
    })
}

/// An ergodic (running-average) point `w_bar_t = (1/t) sum_{k=1..t} w^{k+1}`.
pub struct ErgodicPoint {
    pub w_bar: WPoint,
    pub t: usize,
}

/// Averages the recorded trajectory. Requires a full snapshot record and
/// `1 <= t <= iterations - 1` (the average reaches `w^{t+1}`).
pub fn ergodic_average(record: &RunRecord, t: usize) -> Result<ErgodicPoint, SolveError> {
    if record.iterates.len() != record.iterations + 1 {
        return Err(SolveError::Dims(
            "ergodic averaging requires a full snapshot trajectory (SnapshotPolicy::All)".into(),
        ));
    }
    if t == 0 || t + 1 > record.iterations {
        return Err(SolveError::Dims(format!(
            "t = {t} out of range: need 1 <= t <= iterations - 1 = {}",
            record.iterations.saturating_sub(1)
        )));
    }
    let mut w_bar = record.iterates[2].clone();
    for k in 2..=t {
        let w = &record.iterates[k + 1];
        w_bar.x += &w.x;
        w_bar.y += &w.y;
        w_bar.lambda += &w.lambda;
    }
    let scale = 1.0 / t as f64;
    w_bar.x *= scale;
    w_bar.y *= scale;
    w_bar.lambda *= scale;
    Ok(ErgodicPoint { w_bar, t })
}

/// Classical methods recovered by fixing `(alpha, gamma)` and dropping the
/// semi-proximal terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NamedMethod {
    /// Unit dual step: `(alpha, gamma) = (0, 1)`.
    Admm1,
    /// Over-relaxed dual step: `(alpha, gamma) = (0, 1.618)`.
    Admm2,
    /// Strictly contractive symmetric splitting: `(alpha, alpha)` with
    /// `alpha` in `(0, 1)`.
    ScPrsm { alpha: f64 },
    /// Symmetric full steps `(1, 1)` — on the domain boundary, with no
    /// convergence guarantee; provided for experimentation only.
    Prsm,
}

/// Builds validated parameters for a named special case (`S = T = 0`).
/// [`NamedMethod::Prsm`] is constructed unchecked since `(1, 1)` lies outside
/// every admissible region.
pub fn reduce_to(method: NamedMethod, beta: f64) -> Result<SolverParams, ParamError> {
    match method {
        NamedMethod::Admm1 => SolverParams::new(
            0.0,
            1.0,
            beta,
            ProxOp::Zero,
            ProxOp::Zero,
            DomainMode::Primary,
        ),
        NamedMethod::Admm2 => SolverParams::new(
            0.0,
            1.618,
            beta,
            ProxOp::Zero,
            ProxOp::Zero,
            DomainMode::Primary,
        ),
        NamedMethod::ScPrsm { alpha } => SolverParams::new(
            alpha,
            alpha,
            beta,
            ProxOp::Zero,
            ProxOp::Zero,
            DomainMode::Primary,
        ),
        NamedMethod::Prsm => {
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(ParamError::Beta { beta });
            }
            Ok(SolverParams::new_unchecked(
                1.0,
                1.0,
                beta,
                ProxOp::Zero,
                ProxOp::Zero,
                DomainMode::Primary,
            ))
        }
    }
}
