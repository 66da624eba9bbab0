use nalgebra::{DMatrix, DVector};

use super::{check_dof, DesignMatrix, ModelKind, RegressionError, RegressionResult};
use crate::config::RuleConfig;

/// Ordinary least squares via Householder QR.
pub fn fit_ols(dm: &DesignMatrix, cfg: &RuleConfig) -> Result<RegressionResult, RegressionError> {
    dm.check_rank()?;
    let x = dm.predictors();
    let y = dm.response();
    let (n, k) = x.shape();

    let qr = x.clone().qr();
    let r = qr.r();
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let qty = qty.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| RegressionError::RankDeficient(dm.column_names()[k - 1].clone()))?;

    let residuals = y - x * &beta;
    let rss = residuals.norm_squared();
    let residual_dof = n - k;
    let sigma2 = rss / residual_dof as f64;

    // (X'X)^-1 = R^-1 R^-T
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| RegressionError::RankDeficient(dm.column_names()[k - 1].clone()))?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let std_errors: Vec<f64> = (0..k).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let statistics = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| b / se)
        .collect();

    let tss = if dm.has_intercept() {
        let mean = y.mean();
        y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let fit = (tss > 0.0).then(|| 1.0 - rss / tss);
    let log_likelihood = gaussian_log_likelihood(&residuals);

    Ok(RegressionResult {
        model: ModelKind::Ols,
        column_names: dm.column_names().to_vec(),
        coefficients,
        std_errors,
        statistics,
        n_obs: n,
        residual_dof,
        fit,
        log_likelihood,
        iterations: 0,
        converged: true,
        safe: check_dof(residual_dof, cfg),
    })
}

/// Profile log-likelihood at the ML variance estimate.
fn gaussian_log_likelihood(residuals: &DVector<f64>) -> Option<f64> {
    let n = residuals.len() as f64;
    let rss = residuals.norm_squared();
    (rss > 0.0).then(|| -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0))
}
