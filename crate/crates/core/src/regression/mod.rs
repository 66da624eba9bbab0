//! Linear, logit and probit regression with a residual degrees-of-freedom check.
//!
//! Fits always return full estimates. Whether they may be shown to the
//! researcher is carried by [`RegressionResult::safe`] and acted on when the
//! session renders output.

mod formula;
mod glm;
pub mod normal;
mod ols;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RuleConfig;
use crate::dataset::{Dataset, DatasetError};

pub use formula::{parse, parse_formula, Formula};
pub use glm::{fit_binary, fit_logit, fit_probit, log_likelihood, score, GlmOptions, Link};
pub use ols::fit_ols;

/// Name given to the constant column.
pub const INTERCEPT_NAME: &str = "Intercept";

/// Columns whose component orthogonal to the preceding ones is smaller than
/// this fraction of their own norm are treated as linearly dependent.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("formula syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("response `{0}` must be numeric")]
    NonNumericResponse(String),
    #[error("response must contain only 0 and 1; found {0}")]
    NonBinaryResponse(f64),
    #[error("no complete observations remain after dropping missing values")]
    NoObservations,
    #[error("model has no predictor columns")]
    NoPredictors,
    #[error(
        "design matrix is rank deficient: column `{0}` is a linear combination of earlier columns"
    )]
    RankDeficient(String),
    #[error("{n} observations are not enough to estimate {k} parameters")]
    TooFewObservations { n: usize, k: usize },
    #[error("perfect separation detected: the {0} likelihood has no finite maximum")]
    Separation(ModelKind),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ols,
    Logit,
    Probit,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Logit => "logit",
            ModelKind::Probit => "probit",
        }
    }

    /// Name of the per-coefficient test statistic.
    pub fn statistic_name(&self) -> &'static str {
        match self {
            ModelKind::Ols => "t",
            _ => "z",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(ModelKind::Ols),
            "logit" => Ok(ModelKind::Logit),
            "probit" => Ok(ModelKind::Probit),
            other => Err(format!(
                "unknown model `{other}`; expected ols, logit or probit"
            )),
        }
    }
}

/// Response vector and predictor matrix with complete observations only.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    response: DVector<f64>,
    predictors: DMatrix<f64>,
    column_names: Vec<String>,
    has_intercept: bool,
}

impl DesignMatrix {
    pub fn new(
        response: DVector<f64>,
        predictors: DMatrix<f64>,
        column_names: Vec<String>,
        has_intercept: bool,
    ) -> Result<Self, RegressionError> {
        let (n, k) = predictors.shape();
        if n == 0 {
            return Err(RegressionError::NoObservations);
        }
        if k == 0 {
            return Err(RegressionError::NoPredictors);
        }
        if response.len() != n {
            return Err(RegressionError::InvalidDesign(format!(
                "response has {} rows but predictors have {n}",
                response.len()
            )));
        }
        if column_names.len() != k {
            return Err(RegressionError::InvalidDesign(format!(
                "{} names for {k} columns",
                column_names.len()
            )));
        }
        if response
            .iter()
            .chain(predictors.iter())
            .any(|x| !x.is_finite())
        {
            return Err(RegressionError::InvalidDesign("non-finite entry".into()));
        }
        Ok(DesignMatrix {
            response,
            predictors,
            column_names,
            has_intercept,
        })
    }

    /// Array interface: rows of `exog`, optionally prefixed with a constant.
    pub fn from_rows(
        endog: &[f64],
        exog: &[Vec<f64>],
        names: &[&str],
        add_intercept: bool,
    ) -> Result<Self, RegressionError> {
        let k = names.len();
        if let Some(bad) = exog.iter().find(|r| r.len() != k) {
            return Err(RegressionError::InvalidDesign(format!(
                "row with {} values for {k} names",
                bad.len()
            )));
        }
        let offset = usize::from(add_intercept);
        let predictors = DMatrix::from_fn(exog.len(), k + offset, |i, j| {
            if j < offset {
                1.0
            } else {
                exog[i][j - offset]
            }
        });
        let mut column_names = Vec::with_capacity(k + offset);
        if add_intercept {
            column_names.push(INTERCEPT_NAME.to_string());
        }
        column_names.extend(names.iter().map(|s| s.to_string()));
        Self::new(
            DVector::from_column_slice(endog),
            predictors,
            column_names,
            add_intercept,
        )
    }

    /// Array interface over dataset columns, dropping rows with any missing value.
    pub fn from_columns(
        ds: &Dataset,
        response: &str,
        predictors: &[&str],
        add_intercept: bool,
    ) -> Result<Self, RegressionError> {
        let y = ds
            .column(response)?
            .as_numeric()
            .ok_or_else(|| RegressionError::NonNumericResponse(response.to_string()))?;
        let xs = predictors
            .iter()
            .map(|name| {
                ds.column(name)?.as_numeric().ok_or_else(|| {
                    RegressionError::InvalidDesign(format!("predictor `{name}` must be numeric"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut endog = Vec::new();
        let mut exog = Vec::new();
        for row in 0..ds.row_count() {
            let Some(yv) = y[row] else { continue };
            let Some(xv) = xs.iter().map(|c| c[row]).collect::<Option<Vec<f64>>>() else {
                continue;
            };
            endog.push(yv);
            exog.push(xv);
        }
        Self::from_rows(&endog, &exog, predictors, add_intercept)
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    pub fn predictors(&self) -> &DMatrix<f64> {
        &self.predictors
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn n_obs(&self) -> usize {
        self.predictors.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.predictors.ncols()
    }

    /// Rejects designs with too few rows or linearly dependent columns.
    ///
    /// Uses the diagonal of an unpivoted QR factorisation: `|R[j,j]|` is the
    /// norm of column `j` orthogonal to columns `0..j`.
    fn check_rank(&self) -> Result<(), RegressionError> {
        let (n, k) = self.predictors.shape();
        if n <= k {
            return Err(RegressionError::TooFewObservations { n, k });
        }
        let r = self.predictors.clone().qr().r();
        for j in 0..k {
            let norm = self.predictors.column(j).norm();
            if norm == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norm {
                return Err(RegressionError::RankDeficient(self.column_names[j].clone()));
            }
        }
        Ok(())
    }
}

/// Residual-dof rule: enough spare observations to protect individuals.
pub fn check_dof(residual_dof: usize, cfg: &RuleConfig) -> bool {
    residual_dof as f64 >= cfg.safe_dof_threshold
}

/// Estimates and diagnostics of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub model: ModelKind,
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// t statistics for OLS, z statistics otherwise.
    pub statistics: Vec<f64>,
    pub n_obs: usize,
    pub residual_dof: usize,
    /// R-squared for OLS, McFadden pseudo R-squared otherwise. `None` when
    /// undefined (constant response).
    pub fit: Option<f64>,
    pub log_likelihood: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub safe: bool,
}

/// Fits the requested model kind.
pub fn fit(
    kind: ModelKind,
    dm: &DesignMatrix,
    cfg: &RuleConfig,
) -> Result<RegressionResult, RegressionError> {
    match kind {
        ModelKind::Ols => fit_ols(dm, cfg),
        ModelKind::Logit => fit_logit(dm, cfg),
        ModelKind::Probit => fit_probit(dm, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;

    #[test]
    fn dof_boundary() {
        let cfg = default_config();
        assert!(check_dof(10, &cfg));
        assert!(!check_dof(9, &cfg));
        assert!(!check_dof(0, &cfg));
    }

    #[test]
    fn rank_deficiency_names_column() {
        let x: Vec<f64> = (0..8).map(f64::from).collect();
        let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v, 2.0 * v + 1.0]).collect();
        let dm = DesignMatrix::from_rows(&x, &rows, &["a", "b"], true).unwrap();
        match dm.check_rank().unwrap_err() {
            RegressionError::RankDeficient(name) => assert_eq!(name, "b"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let dm =
            DesignMatrix::from_rows(&[1.0, 2.0], &[vec![1.0], vec![2.0]], &["x"], true).unwrap();
        assert!(matches!(
            dm.check_rank().unwrap_err(),
            RegressionError::TooFewObservations { n: 2, k: 2 }
        ));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            DesignMatrix::from_rows(&[], &[], &["x"], false).unwrap_err(),
            RegressionError::NoObservations
        ));
        assert!(matches!(
            DesignMatrix::from_rows(&[1.0], &[vec![1.0, 2.0]], &["x"], false).unwrap_err(),
            RegressionError::InvalidDesign(_)
        ));
        assert!(matches!(
            DesignMatrix::from_rows(&[f64::NAN], &[vec![1.0]], &["x"], false).unwrap_err(),
            RegressionError::InvalidDesign(_)
        ));
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("OLS".parse::<ModelKind>().unwrap(), ModelKind::Ols);
        assert_eq!("probit".parse::<ModelKind>().unwrap(), ModelKind::Probit);
        assert!("tobit".parse::<ModelKind>().is_err());
    }
}
