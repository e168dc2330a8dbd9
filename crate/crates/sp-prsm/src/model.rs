//! Problem geometry and parameters: coupling operators, semi-proximal terms,
//! dual-step-size domains, and the metric matrices behind the contraction
//! analysis.
//!
//! The solver targets linearly coupled two-block problems
//!
//! ```text
//!   minimize    theta1(x) + theta2(y)
//!   subject to  A x + B y = b,      x in X, y in Y,
//! ```
//!
//! through the augmented Lagrangian
//! `L_beta(x, y, l) = theta1(x) + theta2(y) - <l, Ax + By - b>
//!  + (beta/2) ||Ax + By - b||^2`.
//!
//! One iteration minimizes over `x` with a semi-proximal term
//! `(1/2)||x - x^k||_S^2`, takes a dual half-step scaled by `alpha`,
//! minimizes over `y` with `(1/2)||y - y^k||_T^2`, and takes a dual full
//! step scaled by `gamma`. The admissible `(alpha, gamma)` region and the
//! matrices built here (`H`, `M`, `G`, `Ghat`) drive the contraction and
//! rate diagnostics; the solver itself only ever needs the implicit
//! quadratic forms, never the dense matrices.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// The golden ratio `(1 + sqrt 5)/2`, the supremum of admissible dual step
/// sizes (it equals the gamma-bound at `alpha = 0`).
pub fn golden_ratio() -> f64 {
    (1.0 + 5.0_f64.sqrt()) / 2.0
}

/// Upper bound on `gamma` for a given `alpha` in the primary domain:
/// `f(alpha) = (1 - alpha + sqrt((1 + alpha)^2 + 4(1 - alpha^2))) / 2`.
///
/// `f` is an involution on `[0, golden_ratio]` (`f(f(a)) = a`), which is why
/// swapping the roles of `alpha` and `gamma` extends the domain symmetrically.
pub fn upper_gamma(alpha: f64) -> f64 {
    let one_plus = 1.0 + alpha;
    (1.0 - alpha + (one_plus * one_plus + 4.0 * (1.0 - alpha * alpha)).sqrt()) / 2.0
}

// ---------------------------------------------------------------------------
// Coupling operators and semi-proximal terms
// ---------------------------------------------------------------------------

/// A coupling matrix (`A` or `B`) kept implicit where possible.
///
/// The benchmark reformulations use identity couplings on vectors of length
/// up to several thousand; materializing those as dense matrices would waste
/// memory for no benefit, so the solver works through this operator form.
#[derive(Clone, Debug)]
pub enum Coupling {
    /// `I_dim`
    Identity(usize),
    /// `-I_dim`
    NegIdentity(usize),
    /// An arbitrary dense matrix.
    Dense(DMatrix<f64>),
}

impl Coupling {
    /// Number of rows (the constraint dimension `m`).
    pub fn nrows(&self) -> usize {
        match self {
            Coupling::Identity(d) | Coupling::NegIdentity(d) => *d,
            Coupling::Dense(m) => m.nrows(),
        }
    }

    /// Number of columns (the block dimension).
    pub fn ncols(&self) -> usize {
        match self {
            Coupling::Identity(d) | Coupling::NegIdentity(d) => *d,
            Coupling::Dense(m) => m.ncols(),
        }
    }

    /// `self * v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Coupling::Identity(_) => v.clone(),
            Coupling::NegIdentity(_) => -v,
            Coupling::Dense(m) => m * v,
        }
    }

    /// `self^T * v`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Coupling::Identity(_) => v.clone(),
            Coupling::NegIdentity(_) => -v,
            Coupling::Dense(m) => m.tr_mul(v),
        }
    }

    /// Dense copy, for the diagnostic matrix builders only.
    pub fn materialize(&self) -> DMatrix<f64> {
        match self {
            Coupling::Identity(d) => DMatrix::identity(*d, *d),
            Coupling::NegIdentity(d) => -DMatrix::identity(*d, *d),
            Coupling::Dense(m) => m.clone(),
        }
    }

    /// `(lambda_min, lambda_max)` of `self * self^T`, used by the linear-rate
    /// estimator. Identity couplings avoid the eigendecomposition.
    pub fn bbt_eigen_range(&self) -> (f64, f64) {
        match self {
            Coupling::Identity(_) | Coupling::NegIdentity(_) => (1.0, 1.0),
            Coupling::Dense(m) => {
                let bbt = m * m.transpose();
                let eig = bbt.symmetric_eigenvalues();
                (eig.min(), eig.max())
            }
        }
    }
}

/// A symmetric quadratic-form operator for the semi-proximal terms `S`, `T`
/// and the strong-monotonicity offsets `Sigma1`, `Sigma2`.
///
/// Large instances use the implicit `ident * I + gram * M^T M` form (the
/// proximal matrices of the lasso bench are exactly of that shape), so the
/// operator is applied with two matrix-vector products instead of being
/// materialized at `n x n`.
#[derive(Clone, Debug)]
pub enum ProxOp {
    /// The zero operator (the default for every term).
    Zero,
    /// An explicit symmetric matrix.
    Dense(DMatrix<f64>),
    /// `ident * I + gram * mat^T mat`, kept implicit.
    ShiftedGram {
        ident: f64,
        gram: f64,
        mat: Arc<DMatrix<f64>>,
    },
}

impl ProxOp {
    /// `self * v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            ProxOp::Zero => DVector::zeros(v.len()),
            ProxOp::Dense(m) => m * v,
            ProxOp::ShiftedGram { ident, gram, mat } => {
                let mv = &**mat * v;
                let mut out = mat.tr_mul(&mv) * *gram;
                out.axpy(*ident, v, 1.0);
                out
            }
        }
    }

    /// The quadratic form `d^T (self) d`. May be negative for indefinite
    /// operators.
    pub fn quad(&self, d: &DVector<f64>) -> f64 {
        match self {
            ProxOp::Zero => 0.0,
            ProxOp::Dense(m) => d.dot(&(m * d)),
            ProxOp::ShiftedGram { ident, gram, mat } => {
                ident * d.norm_squared() + gram * (&**mat * d).norm_squared()
            }
        }
    }

    /// `||d||_self = sqrt(max(d^T self d, 0))`. The clamp makes the stopping
    /// rule well defined when `self` is indefinite (where the quadratic form
    /// is not a seminorm to begin with).
    pub fn seminorm(&self, d: &DVector<f64>) -> f64 {
        self.quad(d).max(0.0).sqrt()
    }

    /// Dense `dim x dim` copy, for the diagnostic matrix builders.
    pub fn materialize(&self, dim: usize) -> DMatrix<f64> {
        match self {
            ProxOp::Zero => DMatrix::zeros(dim, dim),
            ProxOp::Dense(m) => m.clone(),
            ProxOp::ShiftedGram { ident, gram, mat } => {
                let mut out = mat.tr_mul(&**mat) * *gram;
                for i in 0..dim {
                    out[(i, i)] += ident;
                }
                out
            }
        }
    }

    /// Structurally the zero operator.
    pub fn is_zero(&self) -> bool {
        matches!(self, ProxOp::Zero)
    }

    /// Whether two operators are the same object (used by cached subproblem
    /// oracles to detect being called with a term they were not built for).
    pub fn same_operator(&self, other: &ProxOp) -> bool {
        match (self, other) {
            (ProxOp::Zero, ProxOp::Zero) => true,
            (ProxOp::Dense(a), ProxOp::Dense(b)) => a == b,
            (
                ProxOp::ShiftedGram {
                    ident: i1,
                    gram: g1,
                    mat: m1,
                },
                ProxOp::ShiftedGram {
                    ident: i2,
                    gram: g2,
                    mat: m2,
                },
            ) => i1 == i2 && g1 == g2 && Arc::ptr_eq(m1, m2),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Primal-dual points and iteration state
// ---------------------------------------------------------------------------

/// A primal-dual point `w = (x, y, lambda)`.
#[derive(Clone, Debug, PartialEq)]
pub struct WPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub lambda: DVector<f64>,
}

impl WPoint {
    pub fn zeros(n1: usize, n2: usize, m: usize) -> Self {
        WPoint {
            x: DVector::zeros(n1),
            y: DVector::zeros(n2),
            lambda: DVector::zeros(m),
        }
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &WPoint) -> WPoint {
        WPoint {
            x: &self.x - &other.x,
            y: &self.y - &other.y,
            lambda: &self.lambda - &other.lambda,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
            && self.y.iter().all(|v| v.is_finite())
            && self.lambda.iter().all(|v| v.is_finite())
    }
}

/// Full state after `k` iterations, including the dual half-step and the
/// recomputed coupling residual `r = A x + B y - b`.
#[derive(Clone, Debug)]
pub struct IterState {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// The previous y-iterate (`y^{k-1}`), needed by stopping rules and the
    /// Lyapunov term `||y^k - y^{k-1}||_T^2`.
    pub y_prev: DVector<f64>,
    pub lambda: DVector<f64>,
    pub lambda_half: DVector<f64>,
    pub r: DVector<f64>,
    pub k: usize,
}

impl IterState {
    pub fn w(&self) -> WPoint {
        WPoint {
            x: self.x.clone(),
            y: self.y.clone(),
            lambda: self.lambda.clone(),
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter domains
// ---------------------------------------------------------------------------

/// Which admissible region `(alpha, gamma)` is validated against.
///
/// * `Primary`: `alpha in [0,1)`, `0 < gamma < f(alpha)` — the region with
///   the full contraction theory (constants, rates, audits).
/// * `Extended`: primary, or the swapped pair `(gamma, alpha)` primary with
///   `alpha < (1+sqrt 5)/2` — the two dual step sizes play symmetric roles,
///   which widens the region to `alpha >= 1` and `gamma = 0` cells.
/// * `NegativeAlpha`: `alpha in (-1,0)` with `gamma in (0, alpha^2-alpha-1)`,
///   or `alpha in (0,1)` with `gamma in (alpha^2-alpha-1, 0)`.
/// * `Hmy`: `gamma in (0, (1+sqrt 5)/2)`, `alpha in (-1,1)`, `alpha+gamma>0`,
///   `|alpha| < 1 + gamma - gamma^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainMode {
    Primary,
    Extended,
    NegativeAlpha,
    Hmy,
}

/// Validation failure; carries the first inequality that failed.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParamError {
    #[error("alpha = {alpha}: required {requirement}")]
    Alpha { alpha: f64, requirement: String },
    #[error("gamma = {gamma}: required {requirement}")]
    Gamma { gamma: f64, requirement: String },
    #[error("(alpha, gamma) = ({alpha}, {gamma}): required {requirement}")]
    Pair {
        alpha: f64,
        gamma: f64,
        requirement: String,
    },
    #[error("beta = {beta}: required 0 < beta < inf")]
    Beta { beta: f64 },
    #[error("delta = {delta}: required {requirement}")]
    Delta { delta: f64, requirement: String },
}

fn check_finite(alpha: f64, gamma: f64) -> Result<(), ParamError> {
    if !alpha.is_finite() {
        return Err(ParamError::Alpha {
            alpha,
            requirement: "a finite value".into(),
        });
    }
    if !gamma.is_finite() {
        return Err(ParamError::Gamma {
            gamma,
            requirement: "a finite value".into(),
        });
    }
    Ok(())
}

fn check_primary(alpha: f64, gamma: f64) -> Result<(), ParamError> {
    check_finite(alpha, gamma)?;
    if !(0.0..1.0).contains(&alpha) {
        return Err(ParamError::Alpha {
            alpha,
            requirement: "0 <= alpha < 1".into(),
        });
    }
    if gamma <= 0.0 {
        return Err(ParamError::Gamma {
            gamma,
            requirement: "gamma > 0".into(),
        });
    }
    let ub = upper_gamma(alpha);
    if gamma >= ub {
        return Err(ParamError::Gamma {
            gamma,
            requirement: format!("gamma < (1 - alpha + sqrt((1+alpha)^2 + 4(1-alpha^2)))/2 = {ub}"),
        });
    }
    Ok(())
}

fn check_extended(alpha: f64, gamma: f64) -> Result<(), ParamError> {
    let direct = match check_primary(alpha, gamma) {
        Ok(()) => return Ok(()),
        Err(e) => e,
    };
    // Swapped test: the roles of the two dual step sizes are symmetric.
    if alpha < golden_ratio() && check_primary(gamma, alpha).is_ok() {
        return Ok(());
    }
    Err(ParamError::Pair {
        alpha,
        gamma,
        requirement: format!(
            "the pair or its swap to lie in the primary region \
             (with alpha < (1+sqrt 5)/2 for the swap); direct test failed with: {direct}"
        ),
    })
}

fn check_negative_alpha(alpha: f64, gamma: f64) -> Result<(), ParamError> {
    check_finite(alpha, gamma)?;
    let bound = alpha * alpha - alpha - 1.0;
    if alpha > -1.0 && alpha < 0.0 {
        if gamma > 0.0 && gamma < bound {
            Ok(())
        } else {
            Err(ParamError::Gamma {
                gamma,
                requirement: format!("0 < gamma < alpha^2 - alpha - 1 = {bound}"),
            })
        }
    } else if alpha > 0.0 && alpha < 1.0 {
        if gamma > bound && gamma < 0.0 {
            Ok(())
        } else {
            Err(ParamError::Gamma {
                gamma,
                requirement: format!("alpha^2 - alpha - 1 = {bound} < gamma < 0"),
            })
        }
    } else {
        Err(ParamError::Alpha {
            alpha,
            requirement: "alpha in (-1, 0) or (0, 1)".into(),
        })
    }
}

fn check_hmy(alpha: f64, gamma: f64) -> Result<(), ParamError> {
    check_finite(alpha, gamma)?;
    if gamma <= 0.0 || gamma >= golden_ratio() {
        return Err(ParamError::Gamma {
            gamma,
            requirement: "0 < gamma < (1+sqrt 5)/2".into(),
        });
    }
    if alpha <= -1.0 || alpha >= 1.0 {
        return Err(ParamError::Alpha {
            alpha,
            requirement: "-1 < alpha < 1".into(),
        });
    }
    if alpha + gamma <= 0.0 {
        return Err(ParamError::Pair {
            alpha,
            gamma,
            requirement: "alpha + gamma > 0".into(),
        });
    }
    let rhs = 1.0 + gamma - gamma * gamma;
    if alpha.abs() >= rhs {
        return Err(ParamError::Pair {
            alpha,
            gamma,
            requirement: format!("|alpha| < 1 + gamma - gamma^2 = {rhs}"),
        });
    }
    Ok(())
}

/// Checks `(alpha, gamma)` against the requested admissible region. All
/// boundaries are strict; no epsilon slack is applied.
pub fn validate_params(alpha: f64, gamma: f64, mode: DomainMode) -> Result<(), ParamError> {
    match mode {
        DomainMode::Primary => check_primary(alpha, gamma),
        DomainMode::Extended => check_extended(alpha, gamma),
        DomainMode::NegativeAlpha => check_negative_alpha(alpha, gamma),
        DomainMode::Hmy => check_hmy(alpha, gamma),
    }
}

// ---------------------------------------------------------------------------
// Solver parameters
// ---------------------------------------------------------------------------

/// Which quantities the stopping rule compares against `tol`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// `max(||x+ - x||_S, ||y+ - y||_T, ||B(y+ - y)||, ||r+||) <= tol`.
    Full,
    /// `max(||B(y+ - y)||, ||r+||) <= tol` — drops the semi-proximal norms,
    /// which is exact whenever `S = T = 0` (the benchmark regime).
    Cheap,
}

/// All run parameters. Construct through [`SolverParams::new`] (validating)
/// or [`SolverParams::new_unchecked`] for deliberately out-of-domain pairs.
#[derive(Clone, Debug)]
pub struct SolverParams {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    /// Semi-proximal term on the x-subproblem.
    pub s: ProxOp,
    /// Semi-proximal term on the y-subproblem.
    pub t: ProxOp,
    pub mode: DomainMode,
    pub tol: f64,
    pub max_iters: usize,
    pub stop_rule: StopRule,
}

impl SolverParams {
    /// Validated construction; `tol` defaults to `1e-6`, `max_iters` to
    /// `1000`, and the stopping rule to [`StopRule::Cheap`].
    pub fn new(
        alpha: f64,
        gamma: f64,
        beta: f64,
        s: ProxOp,
        t: ProxOp,
        mode: DomainMode,
    ) -> Result<Self, ParamError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(ParamError::Beta { beta });
        }
        validate_params(alpha, gamma, mode)?;
        Ok(SolverParams {
            alpha,
            gamma,
            beta,
            s,
            t,
            mode,
            tol: 1e-6,
            max_iters: 1000,
            stop_rule: StopRule::Cheap,
        })
    }

    /// Construction without domain validation, for pairs that sit exactly on
    /// the domain boundary (e.g. the symmetric full-step scheme at
    /// `alpha = gamma = 1`, which carries no general convergence guarantee).
    /// `beta` must still be positive.
    pub fn new_unchecked(
        alpha: f64,
        gamma: f64,
        beta: f64,
        s: ProxOp,
        t: ProxOp,
        mode: DomainMode,
    ) -> Self {
        assert!(beta > 0.0 && beta.is_finite(), "beta must be positive");
        SolverParams {
            alpha,
            gamma,
            beta,
            s,
            t,
            mode,
            tol: 1e-6,
            max_iters: 1000,
            stop_rule: StopRule::Cheap,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }
}

// ---------------------------------------------------------------------------
// Diagnostic matrices
// ---------------------------------------------------------------------------

/// Failures of the dense matrix builders.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum ModelError {
    #[error("alpha + gamma = 0: the weighting matrices are undefined")]
    DegenerateStepSum,
    #[error("dimension mismatch: {0}")]
    Dims(String),
}

/// Dense `H`, the metric in which the `(y, lambda)` part of the iteration
/// contracts:
///
/// ```text
///       1     [ (a+g-ag) beta B^T B    -a B^T      ]
/// H = ----- * [                                    ]
///      a+g    [ -a B                   (1/beta) I  ]
/// ```
pub fn build_h(
    b: &DMatrix<f64>,
    alpha: f64,
    gamma: f64,
    beta: f64,
) -> Result<DMatrix<f64>, ModelError> {
    let s = alpha + gamma;
    if s == 0.0 {
        return Err(ModelError::DegenerateStepSum);
    }
    let (m, n2) = (b.nrows(), b.ncols());
    let mut h = DMatrix::zeros(n2 + m, n2 + m);
    let btb = b.tr_mul(b);
    h.view_mut((0, 0), (n2, n2))
        .copy_from(&(btb * ((s - alpha * gamma) * beta / s)));
    h.view_mut((0, n2), (n2, m))
        .copy_from(&(b.transpose() * (-alpha / s)));
    h.view_mut((n2, 0), (m, n2)).copy_from(&(b * (-alpha / s)));
    h.view_mut((n2, n2), (m, m))
        .copy_from(&(DMatrix::identity(m, m) / (s * beta)));
    Ok(h)
}

/// Dense `M`, the iterate map such that `M^T H M` is block diagonal:
///
/// ```text
///     [ I             0            ]
/// M = [                            ]
///     [ a beta B      (a+g) beta I ]
/// ```
pub fn build_m(b: &DMatrix<f64>, alpha: f64, gamma: f64, beta: f64) -> DMatrix<f64> {
    let (m, n2) = (b.nrows(), b.ncols());
    let mut out = DMatrix::zeros(n2 + m, n2 + m);
    out.view_mut((0, 0), (n2, n2))
        .copy_from(&DMatrix::identity(n2, n2));
    out.view_mut((n2, 0), (m, n2))
        .copy_from(&(b * (alpha * beta)));
    out.view_mut((n2, n2), (m, m))
        .copy_from(&(DMatrix::identity(m, m) * ((alpha + gamma) * beta)));
    out
}

/// Max-abs deviation of `M^T H M` from its closed form
/// `diag((1-alpha) beta B^T B, (alpha+gamma) beta I)`.
pub fn check_mthm(b: &DMatrix<f64>, alpha: f64, gamma: f64, beta: f64) -> Result<f64, ModelError> {
    let h = build_h(b, alpha, gamma, beta)?;
    let m_mat = build_m(b, alpha, gamma, beta);
    let product = m_mat.transpose() * h * &m_mat;

    let (m, n2) = (b.nrows(), b.ncols());
    let mut target = DMatrix::zeros(n2 + m, n2 + m);
    target
        .view_mut((0, 0), (n2, n2))
        .copy_from(&(b.tr_mul(b) * ((1.0 - alpha) * beta)));
    target
        .view_mut((n2, n2), (m, m))
        .copy_from(&(DMatrix::identity(m, m) * ((alpha + gamma) * beta)));

    Ok((product - target).amax())
}

/// Dense `G = blockdiag(S, T, 0) + blockdiag(0, H)`: the metric of the
/// contraction statements over the whole of `w = (x, y, lambda)`.
pub fn build_g(
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    b: &DMatrix<f64>,
    alpha: f64,
    gamma: f64,
    beta: f64,
) -> Result<DMatrix<f64>, ModelError> {
    let (m, n2) = (b.nrows(), b.ncols());
    let n1 = s.nrows();
    if s.ncols() != n1 {
        return Err(ModelError::Dims("S must be square".into()));
    }
    if t.nrows() != n2 || t.ncols() != n2 {
        return Err(ModelError::Dims(format!(
            "T must be {n2} x {n2} to match B's column count"
        )));
    }
    let h = build_h(b, alpha, gamma, beta)?;
    let dim = n1 + n2 + m;
    let mut g = DMatrix::zeros(dim, dim);
    g.view_mut((0, 0), (n1, n1)).copy_from(s);
    g.view_mut((n1, n1), (n2 + m, n2 + m)).copy_from(&h);
    let yy = h.view((0, 0), (n2, n2)).clone_owned() + t;
    g.view_mut((n1, n1), (n2, n2)).copy_from(&yy);
    Ok(g)
}

/// Dense `Ghat = G + blockdiag(Sigma1, Sigma2, 0)`, the tightened metric when
/// the objective blocks carry strong-monotonicity offsets.
#[allow(clippy::too_many_arguments)]
pub fn build_ghat(
    sigma1: &DMatrix<f64>,
    sigma2: &DMatrix<f64>,
    s: &DMatrix<f64>,
    t: &DMatrix<f64>,
    b: &DMatrix<f64>,
    alpha: f64,
    gamma: f64,
    beta: f64,
) -> Result<DMatrix<f64>, ModelError> {
    let n1 = s.nrows();
    let n2 = b.ncols();
    if sigma1.nrows() != n1 || sigma1.ncols() != n1 {
        return Err(ModelError::Dims("Sigma1 must match S's dimension".into()));
    }
    if sigma2.nrows() != n2 || sigma2.ncols() != n2 {
        return Err(ModelError::Dims("Sigma2 must match T's dimension".into()));
    }
    let mut g = build_g(s, t, b, alpha, gamma, beta)?;
    let xx = g.view((0, 0), (n1, n1)).clone_owned() + sigma1;
    g.view_mut((0, 0), (n1, n1)).copy_from(&xx);
    let yy = g.view((n1, n1), (n2, n2)).clone_owned() + sigma2;
    g.view_mut((n1, n1), (n2, n2)).copy_from(&yy);
    Ok(g)
}

// ---------------------------------------------------------------------------
// Implicit quadratic forms (what the solver and audits actually evaluate)
// ---------------------------------------------------------------------------

/// Implicit evaluation of the `H`/`G`/`Ghat` quadratic forms. Everything is
/// computed through coupling products and the `ProxOp` forms; the dense
/// builders above exist to cross-check these identities, not to be used at
/// runtime.
pub struct Metric<'a> {
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    pub b: &'a Coupling,
    pub s: &'a ProxOp,
    pub t: &'a ProxOp,
    pub sigma1: &'a ProxOp,
    pub sigma2: &'a ProxOp,
}

impl Metric<'_> {
    /// `||(dy, dl)||_H^2` for arbitrary differences (not just consecutive
    /// iterates):
    /// `(1/(a+g)) ((a+g-ag) beta ||B dy||^2 - 2a <dl, B dy> + ||dl||^2/beta)`.
    pub fn h_norm_sq(&self, dy: &DVector<f64>, dl: &DVector<f64>) -> f64 {
        let s = self.alpha + self.gamma;
        debug_assert!(s != 0.0, "alpha + gamma must be nonzero");
        let bdy = self.b.apply(dy);
        ((s - self.alpha * self.gamma) * self.beta * bdy.norm_squared()
            - 2.0 * self.alpha * dl.dot(&bdy)
            + dl.norm_squared() / self.beta)
            / s
    }

    /// `||dw||_G^2 = ||dx||_S^2 + ||dy||_T^2 + ||(dy, dl)||_H^2`.
    pub fn g_norm_sq(&self, dw: &WPoint) -> f64 {
        self.s.quad(&dw.x) + self.t.quad(&dw.y) + self.h_norm_sq(&dw.y, &dw.lambda)
    }

    /// `||dw||_Ghat^2 = ||dw||_G^2 + ||dx||_Sigma1^2 + ||dy||_Sigma2^2`.
    pub fn ghat_norm_sq(&self, dw: &WPoint) -> f64 {
        self.g_norm_sq(dw) + self.sigma1.quad(&dw.x) + self.sigma2.quad(&dw.y)
    }
}

// ---------------------------------------------------------------------------
// Contraction constants
// ---------------------------------------------------------------------------

/// Which branch of the case analysis produced the constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContractionCase {
    /// `0 < gamma < 1`
    GammaBelowOne,
    /// `gamma = 1`
    GammaOne,
    /// `1 < gamma < f(alpha)`
    GammaAboveOne,
}

/// Constants of the per-iteration contraction inequality
/// `Phi_k - Phi_{k+1} >= tau_hat ||w^k - w^{k+1}||_Ghat^2` with
/// `Phi_k = ||w^k - w*||_Ghat^2 + rho ||r^k||^2 + eta ||y^k - y^{k-1}||_T^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionConstants {
    pub rho: f64,
    pub eta: f64,
    pub tau: f64,
    /// `min(1/2, tau)` — the factor actually used in the inequality.
    pub tau_hat: f64,
    /// The free splitting parameter of the `gamma > 1` case (`None` in the
    /// other two cases).
    pub delta: Option<f64>,
    pub case: ContractionCase,
}

/// Contraction constants with the `gamma > 1` case's free parameter at the
/// midpoint of its admissible interval. Requires a primary-domain pair.
pub fn contraction_constants(alpha: f64, gamma: f64) -> Result<ContractionConstants, ParamError> {
    contraction_constants_with_delta(alpha, gamma, None)
}

/// As [`contraction_constants`], with an explicit `delta` override for the
/// `gamma > 1` case. The override must lie strictly inside
/// `((gamma-1)/(1-alpha), (1+alpha)/(gamma-1) - (1+alpha)/(1-alpha))`.
pub fn contraction_constants_with_delta(
    alpha: f64,
    gamma: f64,
    delta: Option<f64>,
) -> Result<ContractionConstants, ParamError> {
    validate_params(alpha, gamma, DomainMode::Primary)?;
    let s = alpha + gamma;

    if gamma < 1.0 {
        if let Some(d) = delta {
            return Err(ParamError::Delta {
                delta: d,
                requirement: "no delta parameter exists for gamma < 1".into(),
            });
        }
        // tau = (1 - sqrt(1 - (a+g)(1-g))) / (a+g); the radicand is >= g^2 > 0
        // everywhere in the primary domain.
        let tau = (1.0 - (1.0 - s * (1.0 - gamma)).sqrt()) / s;
        return Ok(ContractionConstants {
            rho: 0.0,
            eta: 0.0,
            tau,
            tau_hat: tau.min(0.5),
            delta: None,
            case: ContractionCase::GammaBelowOne,
        });
    }

    if gamma == 1.0 {
        if let Some(d) = delta {
            return Err(ParamError::Delta {
                delta: d,
                requirement: "no delta parameter exists for gamma = 1".into(),
            });
        }
        let tau = (1.0 - alpha) / (1.0 + alpha);
        return Ok(ContractionConstants {
            rho: 0.0,
            eta: tau,
            tau,
            tau_hat: tau.min(0.5),
            delta: None,
            case: ContractionCase::GammaOne,
        });
    }

    // 1 < gamma < f(alpha): a one-parameter family indexed by delta.
    let lo = (gamma - 1.0) / (1.0 - alpha);
    let hi = (1.0 + alpha) / (gamma - 1.0) - (1.0 + alpha) / (1.0 - alpha);
    if !(lo < hi) {
        return Err(ParamError::Pair {
            alpha,
            gamma,
            requirement: format!(
                "a nonempty delta interval ({lo}, {hi}); the pair is too close to the \
                 domain boundary for the constants to be computed in floating point"
            ),
        });
    }
    let d = delta.unwrap_or(0.5 * (lo + hi));
    if !(d > lo && d < hi) {
        return Err(ParamError::Delta {
            delta: d,
            requirement: format!("{lo} < delta < {hi}"),
        });
    }
    let eta = (1.0 - alpha) / (1.0 + alpha);
    let rho = d * (gamma - 1.0) * (1.0 - alpha) / (1.0 + alpha);
    let tau = eta * (1.0 - lo / d).min((gamma - 1.0) / s * (hi - d));
    Ok(ContractionConstants {
        rho,
        eta,
        tau,
        tau_hat: tau.min(0.5),
        delta: Some(d),
        case: ContractionCase::GammaAboveOne,
    })
}

// ---------------------------------------------------------------------------
// Domination constants
// ---------------------------------------------------------------------------

/// The closed-form constant
/// `c0 = (2(a+g) - ag - a sqrt(g^2 + 4(a+g))) / (2(a+g))`
/// quoted alongside the boundedness argument. Requires a primary-domain pair.
///
/// Note: for `alpha > 0` this value overestimates the largest factor for
/// which `Ghat >= c * blockdiag(S+Sigma1, T+Sigma2+beta B^T B, (1/beta) I)`
/// can hold for every `B`; see [`ghat_domination_constant`] for the sharp
/// factor (the one the property tests assert).
pub fn c0_constant(alpha: f64, gamma: f64) -> Result<f64, ParamError> {
    validate_params(alpha, gamma, DomainMode::Primary)?;
    let s = alpha + gamma;
    Ok((2.0 * s - alpha * gamma - alpha * (gamma * gamma + 4.0 * s).sqrt()) / (2.0 * s))
}

/// `c_{alpha,gamma} = c0 / (1 - alpha)`, the factor entering the linear-rate
/// constant. Equals 1 at `alpha = 0`.
pub fn c_alpha_gamma(alpha: f64, gamma: f64) -> Result<f64, ParamError> {
    Ok(c0_constant(alpha, gamma)? / (1.0 - alpha))
}

/// The sharp constant `c` such that
/// `Ghat >= c * blockdiag(S+Sigma1, T+Sigma2+beta B^T B, (1/beta) I)` for all
/// couplings `B` and all PSD `S`, `T`, `Sigma1`, `Sigma2`:
///
/// `c = ((1+s-p) - sqrt((s-p-1)^2 + 4 alpha^2)) / (2s)`, `s = alpha+gamma`,
/// `p = alpha*gamma`.
///
/// Derivation: with `a = sqrt(beta)||B dy||`, `t = ||dl||/sqrt(beta)`,
/// Cauchy-Schwarz on the cross term reduces the lower-right block comparison
/// to the smallest eigenvalue of `(1/s)[[s-p, -alpha], [-alpha, 1]]`, which is
/// the expression above; it is positive iff `(1-alpha)(alpha+gamma) > 0` and
/// never exceeds 1 on the primary domain, so the `S` and `T` blocks are
/// dominated as well. At `alpha = 0` it reduces to `min(1, 1/gamma)`.
pub fn ghat_domination_constant(alpha: f64, gamma: f64) -> Result<f64, ParamError> {
    validate_params(alpha, gamma, DomainMode::Primary)?;
    let s = alpha + gamma;
    let p = alpha * gamma;
    let q = s - p - 1.0;
    Ok(((1.0 + s - p) - (q * q + 4.0 * alpha * alpha).sqrt()) / (2.0 * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
    }

    fn rand_psd(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
        let f = rand_matrix(rng, dim, dim);
        f.tr_mul(&f)
    }

    // ---- parameter domains ----

    #[test]
    fn primary_domain_examples() {
        assert!(validate_params(0.618, 1.0, DomainMode::Primary).is_ok());
        assert!(validate_params(0.0, 1.0, DomainMode::Primary).is_ok());
        // upper bound at alpha = 0.809 is ~1.1742, so gamma = 1.294 is out...
        assert!(validate_params(0.809, 1.294, DomainMode::Primary).is_err());
        // ...but at alpha = 0.647 the bound is ~1.2988, so 1.294 is in.
        assert!(validate_params(0.647, 1.294, DomainMode::Primary).is_ok());
        // strict boundaries
        assert!(validate_params(0.0, 0.0, DomainMode::Primary).is_err());
        assert!(validate_params(1.0, 0.5, DomainMode::Primary).is_err());
        let ub = upper_gamma(0.3);
        assert!(validate_params(0.3, ub, DomainMode::Primary).is_err());
        assert!(validate_params(0.3, ub - 1e-9, DomainMode::Primary).is_ok());
        assert!(validate_params(f64::NAN, 1.0, DomainMode::Primary).is_err());
        assert!(validate_params(0.0, f64::INFINITY, DomainMode::Primary).is_err());
    }

    #[test]
    fn extended_domain_examples() {
        // swapped acceptance: alpha beyond 1, gamma small
        assert!(validate_params(1.618, 0.0, DomainMode::Extended).is_ok());
        assert!(validate_params(1.618, 0.162, DomainMode::Extended).is_err());
        assert!(validate_params(0.162, 0.0, DomainMode::Extended).is_ok());
        assert!(validate_params(0.0, 0.0, DomainMode::Extended).is_err());
        // the symmetric boundary pair is on the ellipse, rejected everywhere
        assert!(validate_params(1.0, 1.0, DomainMode::Extended).is_err());
        assert!(validate_params(1.0, 1.0, DomainMode::Primary).is_err());
        assert!(validate_params(1.0, 1.0, DomainMode::NegativeAlpha).is_err());
        assert!(validate_params(1.0, 1.0, DomainMode::Hmy).is_err());
        // golden ratio itself is excluded (strict)
        assert!(validate_params(golden_ratio(), 0.0, DomainMode::Extended).is_err());
    }

    #[test]
    fn negative_alpha_domain_examples() {
        // alpha in (-1, 0): upper bound alpha^2 - alpha - 1 = 0.44 at alpha = -0.8
        assert!(validate_params(-0.8, 0.3, DomainMode::NegativeAlpha).is_ok());
        assert!(validate_params(-0.8, 0.5, DomainMode::NegativeAlpha).is_err());
        // at alpha = -0.5 the interval (0, -0.25) is empty
        assert!(validate_params(-0.5, 0.3, DomainMode::NegativeAlpha).is_err());
        // alpha in (0, 1) pairs with negative gamma
        assert!(validate_params(0.5, -0.5, DomainMode::NegativeAlpha).is_ok());
        assert!(validate_params(0.5, 0.5, DomainMode::NegativeAlpha).is_err());
        assert!(validate_params(0.5, -1.3, DomainMode::NegativeAlpha).is_err());
    }

    #[test]
    fn hmy_domain_examples() {
        assert!(validate_params(0.618, 1.0, DomainMode::Hmy).is_ok());
        assert!(validate_params(-0.3, 1.2, DomainMode::Hmy).is_ok());
        // |alpha| < 1 + gamma - gamma^2 = 0.25 fails at alpha = 0.9, gamma = 1.5
        assert!(validate_params(0.9, 1.5, DomainMode::Hmy).is_err());
        // alpha + gamma = -0.2 violates the positivity requirement
        assert!(validate_params(-0.5, 0.3, DomainMode::Hmy).is_err());
        assert!(validate_params(0.0, golden_ratio(), DomainMode::Hmy).is_err());
    }

    #[test]
    fn upper_gamma_frozen_values() {
        assert_relative_eq!(upper_gamma(0.0), 1.618033988749895, max_relative = 1e-14);
        assert_relative_eq!(upper_gamma(1.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(golden_ratio(), 1.618033988749895, max_relative = 1e-14);
    }

    #[test]
    fn upper_gamma_is_an_involution() {
        for i in 0..100 {
            let alpha = i as f64 / 100.0;
            let f = upper_gamma(alpha);
            assert_relative_eq!(upper_gamma(f), alpha, epsilon = 1e-9);
        }
    }

    /// Independent characterization of the primary region: for alpha in [0,1)
    /// and gamma > 0, acceptance is equivalent to being strictly inside the
    /// ellipse `alpha^2 + alpha*gamma + gamma^2 - alpha - gamma - 1 < 0`.
    #[test]
    fn primary_matches_ellipse_characterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5000 {
            let alpha = rng.gen::<f64>() * 1.2 - 0.1;
            let gamma = rng.gen::<f64>() * 2.0 - 0.1;
            let accepted = validate_params(alpha, gamma, DomainMode::Primary).is_ok();
            let q = alpha * alpha + alpha * gamma + gamma * gamma - alpha - gamma - 1.0;
            let expected = (0.0..1.0).contains(&alpha) && gamma > 0.0 && q < 0.0;
            assert_eq!(accepted, expected, "alpha={alpha}, gamma={gamma}, q={q}");
        }
    }

    #[test]
    fn extended_matches_symmetric_characterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5000 {
            let alpha = rng.gen::<f64>() * 2.0 - 0.1;
            let gamma = rng.gen::<f64>() * 2.0 - 0.1;
            let accepted = validate_params(alpha, gamma, DomainMode::Extended).is_ok();
            let q = alpha * alpha + alpha * gamma + gamma * gamma - alpha - gamma - 1.0;
            let expected = alpha >= 0.0
                && gamma >= 0.0
                && alpha + gamma > 0.0
                && q < 0.0
                && alpha.min(gamma) < 1.0;
            assert_eq!(accepted, expected, "alpha={alpha}, gamma={gamma}, q={q}");
        }
    }

    // ---- dense matrices ----

    #[test]
    fn h_frozen_examples() {
        let b = DMatrix::identity(1, 1);
        let h = build_h(&b, 0.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(h, DMatrix::identity(2, 2), epsilon = 1e-15);

        let h = build_h(&b, 1.0, 1.0, 1.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        assert_relative_eq!(h, expect, epsilon = 1e-15);

        assert_eq!(
            build_h(&b, 0.5, -0.5, 1.0),
            Err(ModelError::DegenerateStepSum)
        );
    }

    #[test]
    fn h_is_psd_for_admissible_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let b = rand_matrix(&mut rng, 3, 2);
            let alpha = rng.gen::<f64>(); // [0, 1)
            let gamma = rng.gen::<f64>() * 1.5 + 1e-3;
            let beta = rng.gen::<f64>() * 5.0 + 0.1;
            let h = build_h(&b, alpha, gamma, beta).unwrap();
            let min_eig = h.symmetric_eigenvalues().min();
            assert!(
                min_eig >= -1e-10,
                "min eig {min_eig} at alpha={alpha}, gamma={gamma}"
            );
        }
    }

    #[test]
    fn m_frozen_examples() {
        let b = DMatrix::identity(1, 1);
        assert_relative_eq!(
            build_m(&b, 0.0, 1.0, 1.0),
            DMatrix::identity(2, 2),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            build_m(&b, 0.5, 1.0, 2.0),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 3.0]),
            epsilon = 1e-15
        );
    }

    #[test]
    fn mthm_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = rand_matrix(&mut rng, 4, 3);
        assert!(check_mthm(&b, 0.618, 1.0, 1.0).unwrap() <= 1e-12);
        assert!(check_mthm(&DMatrix::identity(1, 1), 0.0, 1.0, 1.0).unwrap() <= 1e-15);
        for _ in 0..20 {
            let b = rand_matrix(&mut rng, 3, 5);
            let alpha = rng.gen::<f64>() * 1.5;
            let gamma = rng.gen::<f64>() * 1.5 + 1e-3;
            let beta = rng.gen::<f64>() * 5.0 + 0.1;
            assert!(check_mthm(&b, alpha, gamma, beta).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn g_block_structure_at_alpha_zero() {
        // At alpha = 0 the couplings vanish:
        // G = blockdiag(S, T + beta B^T B, 1/(gamma beta) I).
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let b = rand_matrix(&mut rng, 2, 3);
        let s = rand_psd(&mut rng, 4);
        let t = rand_psd(&mut rng, 3);
        let (gamma, beta) = (0.8, 2.0);
        let g = build_g(&s, &t, &b, 0.0, gamma, beta).unwrap();

        let mut expect = DMatrix::zeros(9, 9);
        expect.view_mut((0, 0), (4, 4)).copy_from(&s);
        expect
            .view_mut((4, 4), (3, 3))
            .copy_from(&(&t + b.tr_mul(&b) * beta));
        expect
            .view_mut((7, 7), (2, 2))
            .copy_from(&(DMatrix::identity(2, 2) / (gamma * beta)));
        assert_relative_eq!(g, expect, epsilon = 1e-12);
    }

    #[test]
    fn norm_split_identities() {
        // ||dw||_G^2 and ||dw||_Ghat^2 computed through the implicit forms
        // agree with the dense matrices.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let (n1, n2, m) = (3, 4, 2);
            let b_dense = rand_matrix(&mut rng, m, n2);
            let s_dense = rand_psd(&mut rng, n1);
            let t_dense = rand_psd(&mut rng, n2);
            let s1_dense = rand_psd(&mut rng, n1);
            let s2_dense = rand_psd(&mut rng, n2);
            let alpha = rng.gen::<f64>() * 0.99;
            let gamma = rng.gen::<f64>() * 1.2 + 1e-3;
            let beta = rng.gen::<f64>() * 4.0 + 0.2;

            let dw = WPoint {
                x: DVector::from_fn(n1, |_, _| rng.gen::<f64>() - 0.5),
                y: DVector::from_fn(n2, |_, _| rng.gen::<f64>() - 0.5),
                lambda: DVector::from_fn(m, |_, _| rng.gen::<f64>() - 0.5),
            };
            let mut wvec = DVector::zeros(n1 + n2 + m);
            wvec.rows_mut(0, n1).copy_from(&dw.x);
            wvec.rows_mut(n1, n2).copy_from(&dw.y);
            wvec.rows_mut(n1 + n2, m).copy_from(&dw.lambda);

            let b = Coupling::Dense(b_dense.clone());
            let s = ProxOp::Dense(s_dense.clone());
            let t = ProxOp::Dense(t_dense.clone());
            let s1 = ProxOp::Dense(s1_dense.clone());
            let s2 = ProxOp::Dense(s2_dense.clone());
            let metric = Metric {
                alpha,
                gamma,
                beta,
                b: &b,
                s: &s,
                t: &t,
                sigma1: &s1,
                sigma2: &s2,
            };

            let g = build_g(&s_dense, &t_dense, &b_dense, alpha, gamma, beta).unwrap();
            let ghat = build_ghat(
                &s1_dense, &s2_dense, &s_dense, &t_dense, &b_dense, alpha, gamma, beta,
            )
            .unwrap();
            let dense_g = wvec.dot(&(&g * &wvec));
            let dense_ghat = wvec.dot(&(&ghat * &wvec));
            let scale = 1.0 + dense_g.abs() + dense_ghat.abs();
            assert!((metric.g_norm_sq(&dw) - dense_g).abs() <= 1e-12 * scale);
            assert!((metric.ghat_norm_sq(&dw) - dense_ghat).abs() <= 1e-12 * scale);
        }
    }

    // ---- contraction constants ----

    #[test]
    fn constants_case_below_one() {
        let c = contraction_constants(0.0, 0.5).unwrap();
        assert_eq!(c.case, ContractionCase::GammaBelowOne);
        assert_eq!((c.rho, c.eta, c.delta), (0.0, 0.0, None));
        assert_relative_eq!(c.tau, 0.2679491924311228, max_relative = 1e-12);
        assert_eq!(c.tau_hat, c.tau);

        let c = contraction_constants(0.3, 0.7).unwrap();
        assert_relative_eq!(c.tau, 0.1633399734659244, max_relative = 1e-12);
    }

    #[test]
    fn constants_case_gamma_one() {
        let c = contraction_constants(0.618, 1.0).unwrap();
        assert_eq!(c.case, ContractionCase::GammaOne);
        assert_eq!(c.rho, 0.0);
        assert_relative_eq!(c.tau, 0.23609394313967862, max_relative = 1e-12);
        assert_relative_eq!(c.eta, c.tau);
        assert_eq!(c.tau_hat, c.tau);
    }

    #[test]
    fn constants_case_above_one() {
        let c = contraction_constants(0.0, 1.2).unwrap();
        assert_eq!(c.case, ContractionCase::GammaAboveOne);
        assert_relative_eq!(c.delta.unwrap(), 2.1, max_relative = 1e-12);
        assert_relative_eq!(c.rho, 0.42, max_relative = 1e-12);
        assert_relative_eq!(c.eta, 1.0, max_relative = 1e-12);
        assert_relative_eq!(c.tau, 0.31666666666666665, max_relative = 1e-12);
        assert_relative_eq!(c.tau_hat, 0.31666666666666665, max_relative = 1e-12);

        let c = contraction_constants(0.2, 1.1).unwrap();
        assert_relative_eq!(c.delta.unwrap(), 5.3125, max_relative = 1e-12);
        assert_relative_eq!(c.rho, 0.3541666666666667, max_relative = 1e-12);
        assert_relative_eq!(c.eta, 2.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(c.tau, 0.26602564102564103, max_relative = 1e-10);
    }

    #[test]
    fn delta_override_is_range_checked() {
        assert!(contraction_constants_with_delta(0.0, 1.2, Some(3.0)).is_ok());
        assert!(contraction_constants_with_delta(0.0, 1.2, Some(0.1)).is_err());
        assert!(contraction_constants_with_delta(0.0, 1.2, Some(4.1)).is_err());
        assert!(contraction_constants_with_delta(0.0, 0.5, Some(1.0)).is_err());
        assert!(contraction_constants_with_delta(0.618, 1.0, Some(1.0)).is_err());
    }

    #[test]
    fn constants_positive_across_primary_grid() {
        for i in 0..20 {
            let alpha = i as f64 * 0.05; // [0, 0.95]
            let hi = upper_gamma(alpha);
            for j in 1..20 {
                let gamma = hi * j as f64 / 20.0;
                let c = contraction_constants(alpha, gamma).unwrap();
                assert!(
                    c.tau > 0.0 && c.tau_hat > 0.0,
                    "alpha={alpha} gamma={gamma}"
                );
                assert!(c.tau_hat <= 0.5 + 1e-15);
                assert!(c.rho >= 0.0 && c.eta >= 0.0);
            }
        }
    }

    // ---- domination constants ----

    #[test]
    fn c0_frozen_values() {
        for gamma in [0.5, 1.0, 1.5] {
            assert_relative_eq!(c0_constant(0.0, gamma).unwrap(), 1.0, max_relative = 1e-14);
            assert_relative_eq!(
                c_alpha_gamma(0.0, gamma).unwrap(),
                1.0,
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(
            c0_constant(0.5, 1.0).unwrap(),
            0.3923747814892349,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            c_alpha_gamma(0.5, 1.0).unwrap(),
            0.7847495629784698,
            max_relative = 1e-12
        );
        assert!(c0_constant(1.0, 1.0).is_err());
        // in (0, 1] across the primary domain
        for i in 0..10 {
            let alpha = i as f64 * 0.1;
            let gamma = upper_gamma(alpha) * 0.7;
            let c0 = c0_constant(alpha, gamma).unwrap();
            assert!(c0 > 0.0 && c0 <= 1.0, "c0={c0} at alpha={alpha}");
        }
    }

    #[test]
    fn ghat_domination_with_sharp_constant() {
        // Ghat >= c * blockdiag(S+Sigma1, T+Sigma2+beta B^T B, (1/beta) I)
        // with the sharp two-by-two eigenvalue constant, on random PSD terms.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..30 {
            let (n1, n2, m) = (2, 3, 2);
            let b = rand_matrix(&mut rng, m, n2);
            let s = rand_psd(&mut rng, n1);
            let t = rand_psd(&mut rng, n2);
            let s1 = rand_psd(&mut rng, n1);
            let s2 = rand_psd(&mut rng, n2);
            let alpha = rng.gen::<f64>() * 0.95;
            let gamma = {
                let hi = upper_gamma(alpha);
                rng.gen::<f64>() * (hi - 2e-2) + 1e-2
            };
            let beta = rng.gen::<f64>() * 4.0 + 0.2;
            let c = ghat_domination_constant(alpha, gamma).unwrap();

            let ghat = build_ghat(&s1, &s2, &s, &t, &b, alpha, gamma, beta).unwrap();
            let mut rhs = DMatrix::zeros(n1 + n2 + m, n1 + n2 + m);
            rhs.view_mut((0, 0), (n1, n1)).copy_from(&(&s + &s1));
            rhs.view_mut((n1, n1), (n2, n2))
                .copy_from(&(&t + &s2 + b.tr_mul(&b) * beta));
            rhs.view_mut((n1 + n2, n1 + n2), (m, m))
                .copy_from(&(DMatrix::identity(m, m) / beta));
            let diff = ghat - rhs * c;
            let min_eig = diff.symmetric_eigenvalues().min();
            assert!(
                min_eig >= -1e-8,
                "min eig {min_eig} at alpha={alpha}, gamma={gamma}"
            );
        }
    }

    #[test]
    fn ghat_domination_is_sharp_for_scalar_identity_coupling() {
        // At B = I_1, beta = 1, S = T = Sigma = 0, the constant equals the
        // smallest eigenvalue of the lower-right block exactly.
        for (alpha, gamma) in [(0.618, 1.0), (0.3, 0.9), (0.0, 1.2)] {
            let c = ghat_domination_constant(alpha, gamma).unwrap();
            let b = DMatrix::identity(1, 1);
            let z1 = DMatrix::zeros(1, 1);
            let g = build_g(&z1, &z1, &b, alpha, gamma, 1.0).unwrap();
            let block = g.view((1, 1), (2, 2)).clone_owned();
            let min_eig = block.symmetric_eigenvalues().min();
            assert_relative_eq!(c, min_eig, max_relative = 1e-10);
        }
        // ...and the nominal closed form overshoots it at alpha > 0.
        let sharp = ghat_domination_constant(0.618, 1.0).unwrap();
        let closed_form = c0_constant(0.618, 1.0).unwrap();
        assert!(closed_form > sharp + 1e-3);
    }
}
