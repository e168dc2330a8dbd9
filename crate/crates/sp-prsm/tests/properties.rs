//! Randomized invariants over the public API: parameter-domain
//! characterizations, metric-matrix identities, contraction constants, and
//! the shrinkage operator.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sp_prsm::lasso::{shrink_vector, shrinkage};
use sp_prsm::{
    build_g, build_ghat, build_h, build_m, check_mthm, contraction_constants, upper_gamma,
    validate_params, ContractionCase, Coupling, DomainMode, Metric, ProxOp, WPoint,
};

/// The ellipse polynomial `Q(a, g) = a^2 + ag + g^2 - a - g - 1`; the open
/// sublevel set `Q < 0` intersected with the right quadrant constraints is
/// exactly the admissible region.
fn q_poly(alpha: f64, gamma: f64) -> f64 {
    alpha * alpha + alpha * gamma + gamma * gamma - alpha - gamma - 1.0
}

fn dense_quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    (v.transpose() * m * v)[(0, 0)]
}

fn random_matrix(rows: usize, cols: usize, cells: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |i, j| cells[(i * cols + j) % cells.len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Primary admission is equivalent to the explicit interval form
    /// (alpha in [0,1), 0 < gamma < f(alpha)) and to the ellipse form
    /// (alpha in [0,1), gamma > 0, Q < 0).
    #[test]
    fn primary_domain_equals_both_characterizations(
        alpha in -0.5f64..1.5,
        gamma in -0.5f64..2.5,
    ) {
        let accepted = validate_params(alpha, gamma, DomainMode::Primary).is_ok();
        let interval = (0.0..1.0).contains(&alpha)
            && gamma > 0.0
            && gamma < upper_gamma(alpha);
        let ellipse = (0.0..1.0).contains(&alpha) && gamma > 0.0 && q_poly(alpha, gamma) < 0.0;
        prop_assert_eq!(accepted, interval);
        prop_assert_eq!(accepted, ellipse);
    }

    /// Extended admission is exactly the closed quadrant minus the origin ray,
    /// intersected with the open ellipse.
    #[test]
    fn extended_domain_equals_q_oracle(
        alpha in -0.5f64..2.0,
        gamma in -0.5f64..2.0,
    ) {
        let accepted = validate_params(alpha, gamma, DomainMode::Extended).is_ok();
        let oracle =
            alpha >= 0.0 && gamma >= 0.0 && alpha + gamma > 0.0 && q_poly(alpha, gamma) < 0.0;
        prop_assert_eq!(accepted, oracle);
    }

    /// f(f(alpha)) = alpha on [0, 1] and gamma = f(alpha) sits exactly on the
    /// ellipse boundary Q = 0.
    #[test]
    fn upper_gamma_is_an_involution_on_the_boundary(alpha in 0.0f64..=1.0) {
        let f = upper_gamma(alpha);
        prop_assert!((upper_gamma(f) - alpha).abs() <= 1e-12 * (1.0 + alpha));
        prop_assert!(q_poly(alpha, f).abs() <= 1e-12 * 4.0);
    }

    /// Every interior primary pair yields well-formed contraction constants:
    /// tau in (0, tau_hat bound], nonnegative rho and eta, and for gamma > 1 a
    /// splitting parameter strictly inside its interval with rho > 0.
    #[test]
    fn contraction_constants_are_well_formed(
        alpha in 0.0f64..0.999,
        frac in 0.01f64..0.99,
    ) {
        let gamma = frac * upper_gamma(alpha);
        if gamma <= 0.0 {
            return Ok(());
        }
        let c = contraction_constants(alpha, gamma).unwrap();
        prop_assert!(c.tau > 0.0, "tau = {} at ({alpha}, {gamma})", c.tau);
        prop_assert!(c.tau_hat > 0.0 && c.tau_hat <= 0.5);
        prop_assert!(c.tau_hat <= c.tau);
        prop_assert!(c.rho >= 0.0 && c.eta >= 0.0);
        match c.case {
            ContractionCase::GammaBelowOne => {
                prop_assert!(gamma < 1.0);
                prop_assert_eq!(c.rho, 0.0);
                prop_assert_eq!(c.eta, 0.0);
                prop_assert!(c.delta.is_none());
            }
            ContractionCase::GammaOne => {
                prop_assert_eq!(gamma, 1.0);
                prop_assert!(c.delta.is_none());
            }
            ContractionCase::GammaAboveOne => {
                prop_assert!(gamma > 1.0);
                prop_assert!(c.rho > 0.0);
                let delta = c.delta.unwrap();
                let lo = (gamma - 1.0) / (1.0 - alpha);
                let hi = (1.0 + alpha) / (gamma - 1.0) - (1.0 + alpha) / (1.0 - alpha);
                prop_assert!(lo < delta && delta < hi);
            }
        }
    }

    /// Nonfinite parameters are rejected by every mode.
    #[test]
    fn nonfinite_parameters_are_rejected(which in 0usize..6) {
        let bad = [f64::NAN, f64::INFINITY, f64::NEG_INFINITY];
        let (alpha, gamma) = if which < 3 { (bad[which], 0.5) } else { (0.5, bad[which - 3]) };
        for mode in [
            DomainMode::Primary,
            DomainMode::Extended,
            DomainMode::NegativeAlpha,
            DomainMode::Hmy,
        ] {
            prop_assert!(validate_params(alpha, gamma, mode).is_err());
        }
    }

    /// On random dense couplings the factored identity M^T H M =
    /// diag((1-a) beta B^T B, (a+g) beta I) holds to near machine precision,
    /// H is positive semidefinite for alpha in [0, 1], and the implicit
    /// h_norm_sq agrees with the dense quadratic form.
    #[test]
    fn h_identity_psd_and_implicit_form(
        rows in 1usize..4,
        cols in 1usize..4,
        cells in proptest::collection::vec(-2.0f64..2.0, 16),
        alpha in 0.0f64..=1.0,
        gamma in 0.05f64..1.6,
        beta in 0.1f64..4.0,
        dy_cells in proptest::collection::vec(-1.0f64..1.0, 4),
        dl_cells in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        let b = random_matrix(rows, cols, &cells);
        prop_assert!(check_mthm(&b, alpha, gamma, beta).unwrap() <= 1e-10);

        let h = build_h(&b, alpha, gamma, beta).unwrap();
        let min_eig = h
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        prop_assert!(min_eig >= -1e-10, "min eig {min_eig}");

        let m_mat = build_m(&b, alpha, gamma, beta);
        prop_assert_eq!(m_mat.nrows(), rows + cols);

        let coupling = Coupling::Dense(b.clone());
        let zero = ProxOp::Zero;
        let metric = Metric {
            alpha,
            gamma,
            beta,
            b: &coupling,
            s: &zero,
            t: &zero,
            sigma1: &zero,
            sigma2: &zero,
        };
        let dy = DVector::from_fn(cols, |i, _| dy_cells[i % dy_cells.len()]);
        let dl = DVector::from_fn(rows, |i, _| dl_cells[i % dl_cells.len()]);
        let mut stacked = DVector::zeros(cols + rows);
        stacked.rows_mut(0, cols).copy_from(&dy);
        stacked.rows_mut(cols, rows).copy_from(&dl);
        let dense = dense_quad(&h, &stacked);
        let implicit = metric.h_norm_sq(&dy, &dl);
        prop_assert!((dense - implicit).abs() <= 1e-10 * (1.0 + dense.abs()));
    }

    /// build_ghat with zero offsets equals build_g, and the implicit
    /// g/ghat quadratic forms match their dense counterparts on random data.
    #[test]
    fn g_and_ghat_forms_agree_with_dense(
        rows in 1usize..3,
        cols in 1usize..3,
        n1 in 1usize..3,
        cells in proptest::collection::vec(-1.5f64..1.5, 12),
        svals in proptest::collection::vec(0.0f64..2.0, 3),
        alpha in 0.0f64..0.95,
        gamma in 0.1f64..1.4,
        beta in 0.2f64..3.0,
        w_cells in proptest::collection::vec(-1.0f64..1.0, 9),
    ) {
        let b = random_matrix(rows, cols, &cells);
        // Diagonal PSD S and T keep the dense cross-check simple.
        let s_dense = DMatrix::from_fn(n1, n1, |i, j| if i == j { svals[i % svals.len()] } else { 0.0 });
        let t_dense = DMatrix::from_fn(cols, cols, |i, j| if i == j { svals[(i + 1) % svals.len()] } else { 0.0 });
        let zeros_n1 = DMatrix::zeros(n1, n1);
        let zeros_n2 = DMatrix::zeros(cols, cols);

        let g = build_g(&s_dense, &t_dense, &b, alpha, gamma, beta).unwrap();
        let ghat_zero = build_ghat(&zeros_n1, &zeros_n2, &s_dense, &t_dense, &b, alpha, gamma, beta).unwrap();
        prop_assert!((&g - &ghat_zero).amax() == 0.0);

        let sigma2_dense = DMatrix::from_fn(cols, cols, |i, j| if i == j { svals[(i + 2) % svals.len()] } else { 0.0 });
        let ghat = build_ghat(&zeros_n1, &sigma2_dense, &s_dense, &t_dense, &b, alpha, gamma, beta).unwrap();

        let coupling = Coupling::Dense(b.clone());
        let s_op = ProxOp::Dense(s_dense.clone());
        let t_op = ProxOp::Dense(t_dense.clone());
        let sigma2_op = ProxOp::Dense(sigma2_dense.clone());
        let zero = ProxOp::Zero;
        let metric = Metric {
            alpha,
            gamma,
            beta,
            b: &coupling,
            s: &s_op,
            t: &t_op,
            sigma1: &zero,
            sigma2: &sigma2_op,
        };
        let dw = WPoint {
            x: DVector::from_fn(n1, |i, _| w_cells[i % w_cells.len()]),
            y: DVector::from_fn(cols, |i, _| w_cells[(i + 3) % w_cells.len()]),
            lambda: DVector::from_fn(rows, |i, _| w_cells[(i + 6) % w_cells.len()]),
        };
        let mut stacked = DVector::zeros(n1 + cols + rows);
        stacked.rows_mut(0, n1).copy_from(&dw.x);
        stacked.rows_mut(n1, cols).copy_from(&dw.y);
        stacked.rows_mut(n1 + cols, rows).copy_from(&dw.lambda);

        let dense_g = dense_quad(&g, &stacked);
        let dense_ghat = dense_quad(&ghat, &stacked);
        prop_assert!((dense_g - metric.g_norm_sq(&dw)).abs() <= 1e-10 * (1.0 + dense_g.abs()));
        prop_assert!(
            (dense_ghat - metric.ghat_norm_sq(&dw)).abs() <= 1e-10 * (1.0 + dense_ghat.abs())
        );
    }

    /// Soft-thresholding: identity at zero threshold, magnitude reduction,
    /// sign preservation, and 1-Lipschitz continuity.
    #[test]
    fn shrinkage_is_a_firm_contraction(
        v in -10.0f64..10.0,
        w in -10.0f64..10.0,
        kappa in 0.0f64..5.0,
    ) {
        prop_assert_eq!(shrinkage(v, 0.0), v);
        let sv = shrinkage(v, kappa);
        prop_assert!(sv.abs() <= v.abs());
        prop_assert!(sv * v >= 0.0);
        let lipschitz_slack = 1e-12 * (1.0 + v.abs() + w.abs());
        prop_assert!((sv - shrinkage(w, kappa)).abs() <= (v - w).abs() + lipschitz_slack);

        let vec = DVector::from_vec(vec![v, w, 0.0]);
        let shrunk = shrink_vector(&vec, kappa);
        prop_assert_eq!(shrunk[0], sv);
        prop_assert_eq!(shrunk[2], 0.0);
    }
}
