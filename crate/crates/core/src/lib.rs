//! Disclosure-checked analysis of confidential microdata.
//!
//! Queries (cross tabulations, pivot tables, linear/logit/probit regressions)
//! run over a [`Dataset`]; every result passes through the primary
//! disclosure checks configured by a [`RuleConfig`] before it is recorded in
//! a [`Session`] and finalised into a bundle for output checkers.

pub mod config;
pub mod dataset;
pub mod regression;
pub mod render;
pub mod rules;
pub mod session;
pub mod tabulation;

use thiserror::Error;

pub use config::{default_config, load_config, ConfigError, RuleConfig};
pub use dataset::{load_csv, Column, ColumnKind, Dataset, DatasetError};
pub use regression::{
    check_dof, fit_logit, fit_ols, fit_probit, parse_formula, DesignMatrix, ModelKind,
    RegressionError, RegressionResult,
};
pub use rules::{
    apply_checks, check_nk, check_p_ratio, check_threshold, render_outcome, CellOutcome, CellValue,
    CheckedTable, Rule, RuleCounts, Status, TableSummary,
};
pub use session::{
    new_session, Bundle, Clock, FinaliseFormat, OutputRecord, Session, SessionError,
};
pub use tabulation::{build_spec, crosstab, pivot_table, AggFunc, RawTable, TableError, TableSpec};

/// Any error the engine can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
