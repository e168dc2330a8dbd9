//! Strictly contractive Peaceman-Rachford splitting with semi-proximal
//! terms and two independent dual step sizes.
//!
//! The crate solves linearly coupled two-block convex programs
//! `min theta1(x) + theta2(y)  s.t.  A x + B y = b` by alternating
//! subproblem solves with a dual half-step (scaled by `alpha`) between them
//! and a dual full step (scaled by `gamma`) after them. Each subproblem may
//! carry a semi-proximal term (`S`, `T`), which buys cheap, even diagonal,
//! subproblem solves at the price of more iterations.
//!
//! * [`model`] — coupling operators, admissible `(alpha, gamma)` regions,
//!   the metric matrices of the convergence analysis, contraction constants.
//! * [`solver`] — the iteration, subproblem oracles, stopping rules, run
//!   records, ergodic averages, and classical special cases (both standard
//!   dual-step methods and the symmetric strictly contractive scheme).
//! * [`diagnostics`] — trajectory audits that verify the contraction, the
//!   `O(1/t)` ergodic/nonergodic bounds, and linear rates on strongly convex
//!   instances.
//! * [`lasso`] — a reproducible lasso bench exercising all of the above,
//!   including the indefinite-proximal variant whose x-subproblem is a
//!   diagonal solve.

pub mod diagnostics;
pub mod lasso;
pub mod model;
pub mod solver;

pub use model::{
    build_g, build_ghat, build_h, build_m, c0_constant, c_alpha_gamma, check_mthm,
    contraction_constants, contraction_constants_with_delta, ghat_domination_constant,
    golden_ratio, upper_gamma, validate_params, ContractionCase, ContractionConstants, Coupling,
    DomainMode, IterState, Metric, ModelError, ParamError, ProxOp, SolverParams, StopRule, WPoint,
};
pub use solver::{
    ergodic_average, reduce_to, solve, sp_prsm_step, stopping_check, ErgodicPoint, NamedMethod,
    OracleError, RunRecord, SnapshotPolicy, SolveError, SolveOptions, SplitProblem, StopReason,
};
