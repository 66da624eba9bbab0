//! Binary-response models fitted by Newton's method on the log-likelihood.

use nalgebra::{DMatrix, DVector};

use super::normal;
use super::{check_dof, DesignMatrix, ModelKind, RegressionError, RegressionResult};
use crate::config::RuleConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Logit,
    Probit,
}

impl Link {
    fn model(&self) -> ModelKind {
        match self {
            Link::Logit => ModelKind::Logit,
            Link::Probit => ModelKind::Probit,
        }
    }

    /// Per-observation log-likelihood, first derivative and negative second
    /// derivative in the linear predictor, for sign `q = 2y - 1`.
    fn terms(&self, q: f64, eta: f64) -> (f64, f64, f64) {
        let t = q * eta;
        match self {
            Link::Logit => {
                // log sigmoid(t), evaluated without overflow
                let ll = if t > 0.0 {
                    -(-t).exp().ln_1p()
                } else {
                    t - t.exp().ln_1p()
                };
                let s_pos = sigmoid(t);
                let s_neg = sigmoid(-t);
                (ll, q * s_neg, s_pos * s_neg)
            }
            Link::Probit => {
                let lambda = normal::mills(t);
                (normal::log_cdf(t), q * lambda, lambda * (lambda + t))
            }
        }
    }

    /// Probability assigned to the observed outcome.
    fn fitted_prob_of_observed(&self, q: f64, eta: f64) -> f64 {
        match self {
            Link::Logit => sigmoid(q * eta),
            Link::Probit => normal::cdf(q * eta),
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Newton iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmOptions {
    pub max_iterations: usize,
    /// Convergence when the Euclidean norm of the score falls below this.
    pub score_tolerance: f64,
    /// Coefficient norm beyond which the fit is declared separated.
    pub divergence_norm: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            max_iterations: 100,
            score_tolerance: 1e-8,
            divergence_norm: 1e6,
        }
    }
}

/// Outcomes predicted this well everywhere mean the data are separable.
const SEPARATION_RESIDUAL: f64 = 1e-6;

/// Relative log-likelihood change treated as summation noise.
const ROUNDING_SLACK: f64 = 1e-12;

fn signs(dm: &DesignMatrix) -> Result<DVector<f64>, RegressionError> {
    dm.response()
        .iter()
        .map(|&y| match y {
            0.0 => Ok(-1.0),
            1.0 => Ok(1.0),
            other => Err(RegressionError::NonBinaryResponse(other)),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(DVector::from_vec)
}

struct Evaluation {
    log_likelihood: f64,
    score: DVector<f64>,
    information: DMatrix<f64>,
}

fn evaluate(link: Link, x: &DMatrix<f64>, q: &DVector<f64>, beta: &DVector<f64>) -> Evaluation {
    let eta = x * beta;
    let n = x.nrows();
    let mut ll = 0.0;
    let mut grad = DVector::zeros(n);
    let mut weights = DVector::zeros(n);
    for i in 0..n {
        let (l, g, w) = link.terms(q[i], eta[i]);
        ll += l;
        grad[i] = g;
        weights[i] = w;
    }
    let score = x.transpose() * grad;
    let mut weighted = x.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= weights[i];
    }
    let information = x.transpose() * weighted;
    Evaluation {
        log_likelihood: ll,
        score,
        information,
    }
}

fn log_likelihood_at(link: Link, x: &DMatrix<f64>, q: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    let eta = x * beta;
    eta.iter()
        .zip(q.iter())
        .map(|(e, qi)| link.terms(*qi, *e).0)
        .sum()
}

/// Log-likelihood of `beta` for a binary design.
pub fn log_likelihood(link: Link, dm: &DesignMatrix, beta: &[f64]) -> Result<f64, RegressionError> {
    let q = signs(dm)?;
    Ok(log_likelihood_at(
        link,
        dm.predictors(),
        &q,
        &DVector::from_column_slice(beta),
    ))
}

/// Gradient of the log-likelihood with respect to `beta`.
pub fn score(link: Link, dm: &DesignMatrix, beta: &[f64]) -> Result<Vec<f64>, RegressionError> {
    let q = signs(dm)?;
    let eval = evaluate(link, dm.predictors(), &q, &DVector::from_column_slice(beta));
    Ok(eval.score.iter().copied().collect())
}

pub fn fit_logit(dm: &DesignMatrix, cfg: &RuleConfig) -> Result<RegressionResult, RegressionError> {
    fit_binary(Link::Logit, dm, cfg, &GlmOptions::default())
}

pub fn fit_probit(
    dm: &DesignMatrix,
    cfg: &RuleConfig,
) -> Result<RegressionResult, RegressionError> {
    fit_binary(Link::Probit, dm, cfg, &GlmOptions::default())
}

/// Maximises the binary log-likelihood from a zero start with step-halving Newton.
pub fn fit_binary(
    link: Link,
    dm: &DesignMatrix,
    cfg: &RuleConfig,
    opts: &GlmOptions,
) -> Result<RegressionResult, RegressionError> {
    let q = signs(dm)?;
    dm.check_rank()?;
    let model = link.model();
    let x = dm.predictors();
    let (n, k) = x.shape();

    let mut beta = DVector::zeros(k);
    let mut eval = evaluate(link, x, &q, &beta);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        if eval.score.norm() < opts.score_tolerance {
            converged = true;
            break;
        }
        let Some(chol) = eval.information.clone().cholesky() else {
            // information collapses only when fitted probabilities saturate
            return Err(RegressionError::Separation(model));
        };
        let step = chol.solve(&eval.score);
        iterations += 1;

        // near the optimum the likelihood is flat to rounding; do not let
        // summation noise reject an exact Newton step
        let floor = eval.log_likelihood - ROUNDING_SLACK * (1.0 + eval.log_likelihood.abs());
        let falls_short = |ll: f64| ll.is_nan() || ll < floor;
        let mut scale = 1.0;
        let mut candidate = &beta + &step;
        let mut ll = log_likelihood_at(link, x, &q, &candidate);
        let mut halvings = 0;
        while falls_short(ll) && halvings < 40 {
            scale *= 0.5;
            candidate = &beta + &step * scale;
            ll = log_likelihood_at(link, x, &q, &candidate);
            halvings += 1;
        }
        if falls_short(ll) {
            // no ascent possible from here: numerically stalled
            break;
        }
        beta = candidate;
        if beta.norm() > opts.divergence_norm {
            return Err(RegressionError::Separation(model));
        }
        eval = evaluate(link, x, &q, &beta);
    }
    if !converged && eval.score.norm() < opts.score_tolerance {
        converged = true;
    }

    let eta = x * &beta;
    let worst_fit = eta
        .iter()
        .zip(q.iter())
        .map(|(e, qi)| 1.0 - link.fitted_prob_of_observed(*qi, *e))
        .fold(0.0, f64::max);
    if worst_fit < SEPARATION_RESIDUAL {
        return Err(RegressionError::Separation(model));
    }

    let covariance = eval
        .information
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(RegressionError::Separation(model))?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let std_errors: Vec<f64> = (0..k).map(|j| covariance[(j, j)].sqrt()).collect();
    let statistics = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| b / se)
        .collect();

    let successes = q.iter().filter(|v| **v > 0.0).count() as f64;
    let rate = successes / n as f64;
    let null_ll = successes * rate.ln() + (n as f64 - successes) * (1.0 - rate).ln();
    let fit = (null_ll < 0.0).then(|| 1.0 - eval.log_likelihood / null_ll);

    let residual_dof = n - k;
    Ok(RegressionResult {
        model,
        column_names: dm.column_names().to_vec(),
        coefficients,
        std_errors,
        statistics,
        n_obs: n,
        residual_dof,
        fit,
        log_likelihood: Some(eval.log_likelihood),
        iterations,
        converged,
        safe: check_dof(residual_dof, cfg),
    })
}
