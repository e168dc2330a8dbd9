//! The lasso test bench: reproducible instance generation, the three
//! semi-proximal choices for the x-subproblem, cached factorizations, and
//! assembly into a [`SplitProblem`].
//!
//! The problem `min (1/2)||A x - b||^2 + mu ||x||_1` is split by duplicating
//! the variable: `theta1(x) = (1/2)||A x - b||^2`, `theta2(y) = mu ||y||_1`,
//! coupled by `x - y = 0` (identity couplings, zero right-hand side). The
//! y-subproblem is soft-thresholding; the x-subproblem solves
//! `(A^T A + beta I + S) x = A^T b + beta y + lambda + S x^k`, and the choice
//! of `S` trades per-iteration cost against iteration count:
//!
//! * `Zero`: the full system, solved via the Woodbury identity against a
//!   cached Cholesky factor of the small `m x m` Gram matrix.
//! * `SemiDef`: `S = beta (xi - 1) I - (1/2) A^T A` (positive semidefinite
//!   for the `xi` below), halving the Gram contribution.
//! * `Indef`: `S = beta (xi - 1) I - A^T A`, an *indefinite* term that
//!   cancels the Gram matrix entirely, leaving a diagonal solve.

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Coupling, DomainMode, ParamError, ProxOp, SolverParams};
use crate::solver::{OracleError, SplitProblem};

/// Failures of the lasso bench.
#[derive(Debug, Error)]
pub enum LassoError {
    #[error("n must be even and at least 2 (got {0})")]
    BadDimension(usize),
    #[error("p must lie in (0, 1] (got {0})")]
    BadDensity(f64),
    #[error("beta must be positive and finite (got {0})")]
    BadBeta(f64),
    #[error("power iteration did not converge within 10000 iterations")]
    PowerIteration,
    #[error("Cholesky factorization of the reduced system failed")]
    Factorization,
    #[error("invalid instance key {0:?}: expected \"n=<even> p=<density> seed=<u64>\"")]
    BadKey(String),
}

/// A generated lasso instance. The design matrix has `m = n/2` rows with
/// unit-norm columns; everything is a pure function of `(n, p, seed)`.
#[derive(Clone, Debug)]
pub struct LassoInstance {
    /// Design matrix, `m x n`.
    pub a: Arc<DMatrix<f64>>,
    /// Observations, length `m`.
    pub b: DVector<f64>,
    /// The l1 weight `0.1 ||A^T b||_inf`.
    pub mu: f64,
    /// The sparse ground truth the observations were built from.
    pub x_true: DVector<f64>,
    pub seed: u64,
    pub p: f64,
    ddt: OnceLock<DMatrix<f64>>,
}

impl LassoInstance {
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// The `m x m` Gram matrix `A A^T`, computed once and cached.
    pub fn ddt(&self) -> &DMatrix<f64> {
        self.ddt.get_or_init(|| &*self.a * self.a.transpose())
    }

    /// Wraps external data (used by tests and custom problems); `x_true` is
    /// recorded as zero, `p` and `seed` as placeholders.
    pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>, mu: f64) -> Self {
        assert_eq!(a.nrows(), b.len(), "A and b disagree on the row count");
        let n = a.ncols();
        LassoInstance {
            a: Arc::new(a),
            b,
            mu,
            x_true: DVector::zeros(n),
            seed: 0,
            p: 0.0,
            ddt: OnceLock::new(),
        }
    }

    /// The `(n, p, seed)` triple that regenerates this instance.
    pub fn key(&self) -> InstanceKey {
        InstanceKey {
            n: self.n(),
            p: self.p,
            seed: self.seed,
        }
    }
}

/// The regeneration triple; its `Display`/`FromStr` round-trip is the
/// instance serialization format (generated instances are pure functions of
/// it, so nothing else needs to be stored).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InstanceKey {
    pub n: usize,
    pub p: f64,
    pub seed: u64,
}

impl InstanceKey {
    pub fn generate(&self) -> Result<LassoInstance, LassoError> {
        generate_instance(self.n, self.p, self.seed)
    }
}

impl fmt::Display for InstanceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} p={} seed={}", self.n, self.p, self.seed)
    }
}

impl FromStr for InstanceKey {
    type Err = LassoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || LassoError::BadKey(s.to_string());
        let mut n = None;
        let mut p = None;
        let mut seed = None;
        for part in s.split_whitespace() {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            match k {
                "n" => n = Some(v.parse::<usize>().map_err(|_| bad())?),
                "p" => p = Some(v.parse::<f64>().map_err(|_| bad())?),
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| bad())?),
                _ => return Err(bad()),
            }
        }
        match (n, p, seed) {
            (Some(n), Some(p), Some(seed)) => Ok(InstanceKey { n, p, seed }),
            _ => Err(bad()),
        }
    }
}

/// One standard normal draw via the Box-Muller transform. Consumes exactly
/// two uniforms per call (no pair caching), which pins the draw order of the
/// generator for all time: changing this changes every instance.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1 = 1.0 - rng.gen::<f64>(); // in (0, 1], keeps the log finite
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Generates the `(n, p, seed)` instance: a Bernoulli(`p`)-sparse Gaussian
/// ground truth, an `n/2 x n` Gaussian design with unit-norm columns,
/// observations with `sqrt(0.001)`-scaled Gaussian noise, and
/// `mu = 0.1 ||A^T b||_inf`.
///
/// Draw order (fixed): the mask/value pairs of `x_true` by index, the design
/// column by column, the noise, in one `ChaCha8` stream seeded by `seed`.
pub fn generate_instance(n: usize, p: f64, seed: u64) -> Result<LassoInstance, LassoError> {
    if n < 2 || n % 2 != 0 {
        return Err(LassoError::BadDimension(n));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(LassoError::BadDensity(p));
    }
    let m = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut x_true = DVector::zeros(n);
    for i in 0..n {
        let mask: f64 = rng.gen();
        if mask < p {
            x_true[i] = standard_normal(&mut rng);
        }
    }

    let mut a = DMatrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            a[(i, j)] = standard_normal(&mut rng);
        }
    }
    for j in 0..n {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            let mut col = a.column_mut(j);
            col /= norm;
        }
    }

    let mut b = &a * &x_true;
    let noise_scale = 0.001_f64.sqrt();
    for i in 0..m {
        b[i] += noise_scale * standard_normal(&mut rng);
    }

    let mu = 0.1 * a.tr_mul(&b).amax();

    Ok(LassoInstance {
        a: Arc::new(a),
        b,
        mu,
        x_true,
        seed,
        p,
        ddt: OnceLock::new(),
    })
}

/// Componentwise soft-thresholding `sign(v) max(|v| - kappa, 0)`; the
/// identity map at `kappa = 0`.
pub fn shrinkage(v: f64, kappa: f64) -> f64 {
    v.signum() * (v.abs() - kappa).max(0.0)
}

/// [`shrinkage`] applied to every component.
pub fn shrink_vector(v: &DVector<f64>, kappa: f64) -> DVector<f64> {
    v.map(|t| shrinkage(t, kappa))
}

/// Which semi-proximal term the x-subproblem carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxKind {
    Zero,
    SemiDef,
    Indef,
}

/// A built proximal term: its kind, the spectral factor `xi`, and the
/// operator `S` itself (implicit, never materialized at `n x n`).
#[derive(Clone, Debug)]
pub struct ProxSpec {
    pub kind: ProxKind,
    pub xi: f64,
    pub s: ProxOp,
}

impl ProxSpec {
    /// Builds `S` for an instance at penalty `beta`:
    ///
    /// * `SemiDef`: `xi = 1.01 lambda_max(I + A^T A / (2 beta))`,
    ///   `S = beta (xi - 1) I - (1/2) A^T A` (PSD by the 1% headroom);
    /// * `Indef`: `xi = lambda_max(I + A^T A / beta)`,
    ///   `S = beta (xi - 1) I - A^T A` (cancels the Gram matrix exactly).
    pub fn build(inst: &LassoInstance, beta: f64, kind: ProxKind) -> Result<Self, LassoError> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(LassoError::BadBeta(beta));
        }
        match kind {
            ProxKind::Zero => Ok(ProxSpec {
                kind,
                xi: 1.0,
                s: ProxOp::Zero,
            }),
            ProxKind::SemiDef => {
                let xi = 1.01 * (1.0 + lambda_max_gram(inst.ddt())? / (2.0 * beta));
                Ok(ProxSpec {
                    kind,
                    xi,
                    s: ProxOp::ShiftedGram {
                        ident: beta * (xi - 1.0),
                        gram: -0.5,
                        mat: inst.a.clone(),
                    },
                })
            }
            ProxKind::Indef => {
                let xi = 1.0 + lambda_max_gram(inst.ddt())? / beta;
                Ok(ProxSpec {
                    kind,
                    xi,
                    s: ProxOp::ShiftedGram {
                        ident: beta * (xi - 1.0),
                        gram: -1.0,
                        mat: inst.a.clone(),
                    },
                })
            }
        }
    }
}

/// The spectral factor `xi` for an arbitrary design matrix (`Zero` needs
/// none and returns 1). Exposed for cross-checking against dense
/// eigensolvers.
pub fn spectral_factor(a: &DMatrix<f64>, beta: f64, kind: ProxKind) -> Result<f64, LassoError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(LassoError::BadBeta(beta));
    }
    if matches!(kind, ProxKind::Zero) {
        return Ok(1.0);
    }
    // lambda_max(A^T A) = lambda_max(A A^T); iterate on the smaller Gram.
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.tr_mul(a)
    };
    let lam = lambda_max_gram(&gram)?;
    Ok(match kind {
        ProxKind::Zero => unreachable!(),
        ProxKind::SemiDef => 1.01 * (1.0 + lam / (2.0 * beta)),
        ProxKind::Indef => 1.0 + lam / beta,
    })
}

/// Seed of the deterministic power-iteration start vector.
const POWER_SEED: u64 = 0x5eed_f0c5;

/// Largest eigenvalue of a symmetric PSD Gram matrix by power iteration on
/// the shifted operator `I + G` (same eigenvectors, strictly better spectral
/// separation). Deterministic start, successive-Rayleigh relative tolerance
/// `1e-10`, at most `10_000` iterations.
fn lambda_max_gram(g: &DMatrix<f64>) -> Result<f64, LassoError> {
    let dim = g.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v = DVector::from_fn(dim, |_, _| standard_normal(&mut rng));
    let norm = v.norm();
    if norm == 0.0 {
        return Err(LassoError::PowerIteration);
    }
    v /= norm;

    let mut rayleigh = f64::NAN;
    for _ in 0..10_000 {
        let mut w = g * &v;
        w += &v; // (I + G) v
        let next = v.dot(&w); // Rayleigh quotient of I + G at the unit v
        if (next - rayleigh).abs() <= 1e-10 * next.abs().max(1.0) {
            return Ok(next - 1.0);
        }
        rayleigh = next;
        let wn = w.norm();
        if wn == 0.0 {
            return Err(LassoError::PowerIteration);
        }
        v = w / wn;
    }
    Err(LassoError::PowerIteration)
}

/// Everything the x-subproblem needs, factored once per
/// `(instance, beta, kind)` and shared by every run on that triple. The
/// normal matrix `A^T A + beta I + S` reduces to:
///
/// * `Zero`: `A^T A + beta I` — Woodbury against `beta I + A A^T`;
/// * `SemiDef`: `(1/2) A^T A + beta xi I` — Woodbury against
///   `2 beta xi I + A A^T`;
/// * `Indef`: `beta xi I` — a scalar multiple of the identity.
pub struct FactorCache {
    pub beta: f64,
    pub prox: ProxSpec,
    a: Arc<DMatrix<f64>>,
    atb: DVector<f64>,
    /// Cholesky factor of `(d/c) I + A A^T` when a Gram contribution
    /// survives (the normal matrix is `c A^T A + d I`; `None` when `c = 0`).
    chol: Option<Cholesky<f64, Dyn>>,
    d: f64,
}

impl FactorCache {
    pub fn new(inst: &LassoInstance, beta: f64, kind: ProxKind) -> Result<Self, LassoError> {
        let prox = ProxSpec::build(inst, beta, kind)?;
        let (c, d) = match kind {
            ProxKind::Zero => (1.0, beta),
            ProxKind::SemiDef => (0.5, beta * prox.xi),
            ProxKind::Indef => (0.0, beta * prox.xi),
        };
        let chol = if c > 0.0 {
            let mut k = inst.ddt().clone();
            let shift = d / c;
            for i in 0..k.nrows() {
                k[(i, i)] += shift;
            }
            Some(Cholesky::new(k).ok_or(LassoError::Factorization)?)
        } else {
            None
        };
        Ok(FactorCache {
            beta,
            prox,
            a: inst.a.clone(),
            atb: inst.a.tr_mul(&inst.b),
            chol,
            d,
        })
    }

    /// Solves `(c A^T A + d I) x = rhs` through the Woodbury identity
    /// `x = (rhs - A^T ((d/c) I + A A^T)^{-1} A rhs) / d` (or the diagonal
    /// shortcut when `c = 0`).
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            None => rhs / self.d,
            Some(chol) => {
                let reduced = chol.solve(&(&*self.a * rhs));
                (rhs - self.a.tr_mul(&reduced)) / self.d
            }
        }
    }
}

/// The x-subproblem: `(A^T A + beta I + S) x = A^T b + beta y + lambda + S x^k`.
pub fn lasso_x_update(
    cache: &FactorCache,
    y: &DVector<f64>,
    lambda: &DVector<f64>,
    x_prev: &DVector<f64>,
) -> DVector<f64> {
    let mut rhs = &cache.atb + y * cache.beta + lambda;
    if !cache.prox.s.is_zero() {
        rhs += cache.prox.s.apply(x_prev);
    }
    cache.solve(&rhs)
}

/// The y-subproblem: soft-thresholding of `x^{k+1} - lambda^{k+1/2} / beta`
/// at level `mu / beta`.
pub fn lasso_y_update(
    x_plus: &DVector<f64>,
    lambda_half: &DVector<f64>,
    beta: f64,
    mu: f64,
) -> DVector<f64> {
    shrink_vector(&(x_plus - lambda_half / beta), mu / beta)
}

/// Assembles the instance into a [`SplitProblem`] for the given penalty and
/// proximal kind, returning the built [`ProxSpec`] alongside (its `S` must
/// be installed in the solver parameters; see [`solver_params`]).
///
/// The subproblem oracles are bound to this `(beta, S)` pair and refuse to
/// run under any other, so a parameter mix-up surfaces as an explicit oracle
/// error instead of a silently wrong answer.
pub fn split_problem(
    inst: &LassoInstance,
    beta: f64,
    kind: ProxKind,
) -> Result<(SplitProblem, ProxSpec), LassoError> {
    let cache = Arc::new(FactorCache::new(inst, beta, kind)?);
    let spec = cache.prox.clone();
    let n = inst.n();
    let mu = inst.mu;

    let x_cache = Arc::clone(&cache);
    let x_update = move |y: &DVector<f64>,
                         lambda: &DVector<f64>,
                         beta_arg: f64,
                         s: &ProxOp,
                         x_prev: &DVector<f64>| {
        if beta_arg != x_cache.beta {
            return Err(OracleError(format!(
                "x-oracle factored at beta = {}, called with {beta_arg}",
                x_cache.beta
            )));
        }
        if !s.same_operator(&x_cache.prox.s) {
            return Err(OracleError(
                "x-oracle called with a semi-proximal term it was not factored for".into(),
            ));
        }
        Ok(lasso_x_update(&x_cache, y, lambda, x_prev))
    };

    let y_update = move |x_plus: &DVector<f64>,
                         lambda_half: &DVector<f64>,
                         beta_arg: f64,
                         t: &ProxOp,
                         _y_prev: &DVector<f64>| {
        if beta_arg != beta {
            return Err(OracleError(format!(
                "y-oracle built at beta = {beta}, called with {beta_arg}"
            )));
        }
        if !t.is_zero() {
            return Err(OracleError("the lasso y-oracle supports T = 0 only".into()));
        }
        Ok(lasso_y_update(x_plus, lambda_half, beta_arg, mu))
    };

    let a_obj = inst.a.clone();
    let b_obj = inst.b.clone();
    let a_grad = inst.a.clone();
    let b_grad = inst.b.clone();

    let problem = SplitProblem {
        a: Coupling::Identity(n),
        b: Coupling::NegIdentity(n),
        rhs: DVector::zeros(n),
        x_update: Box::new(x_update),
        y_update: Box::new(y_update),
        sigma1: ProxOp::Zero,
        sigma2: ProxOp::Zero,
        objective: Box::new(move |x, y| {
            0.5 * (&*a_obj * x - &b_obj).norm_squared() + mu * y.lp_norm(1)
        }),
        theta1_subgrad: Some(Box::new(move |x| a_grad.tr_mul(&(&*a_grad * x - &b_grad)))),
        // The shrinkage-consistent selection: sign(0) = +1 is as valid a
        // subgradient of |.| at 0 as any other point of [-1, 1].
        theta2_subgrad: Some(Box::new(move |y| {
            y.map(|t| if t >= 0.0 { mu } else { -mu })
        })),
    };
    Ok((problem, spec))
}

/// Solver parameters for a lasso run: the built `S`, `T = 0`, and validated
/// `(alpha, gamma)` under the requested domain mode.
pub fn solver_params(
    alpha: f64,
    gamma: f64,
    beta: f64,
    spec: &ProxSpec,
    mode: DomainMode,
) -> Result<SolverParams, ParamError> {
    SolverParams::new(alpha, gamma, beta, spec.s.clone(), ProxOp::Zero, mode)
}
