//! A small formula language: `response ~ term + term [- 1]`.
//!
//! Terms are column names, bare (`[A-Za-z0-9_.]+`) or back-quoted. Numeric
//! columns enter as-is; categorical columns expand into indicator columns,
//! dropping the lexicographically first level.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use super::{DesignMatrix, RegressionError, INTERCEPT_NAME};
use crate::dataset::{ColumnData, Dataset};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Name(String),
    Tilde,
    Plus,
    Minus,
    One,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    pub terms: Vec<String>,
    pub intercept: bool,
}

fn syntax(position: usize, message: impl Into<String>) -> RegressionError {
    RegressionError::Syntax {
        position,
        message: message.into(),
    }
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, RegressionError> {
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        match c {
            c if c.is_whitespace() => {
                chars.next();
            }
            '~' => {
                chars.next();
                tokens.push((pos, Token::Tilde));
            }
            '+' => {
                chars.next();
                tokens.push((pos, Token::Plus));
            }
            '-' => {
                chars.next();
                tokens.push((pos, Token::Minus));
            }
            '`' => {
                chars.next();
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some((_, '`')) => break,
                        Some((_, ch)) => name.push(ch),
                        None => return Err(syntax(pos, "unterminated quoted name")),
                    }
                }
                if name.is_empty() {
                    return Err(syntax(pos, "empty quoted name"));
                }
                tokens.push((pos, Token::Name(name)));
            }
            c if is_name_char(c) => {
                let mut name = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if !is_name_char(ch) {
                        break;
                    }
                    name.push(ch);
                    chars.next();
                }
                let token = if name == "1" {
                    Token::One
                } else {
                    Token::Name(name)
                };
                tokens.push((pos, token));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

/// Parses formula text without looking at any data.
pub fn parse(text: &str) -> Result<Formula, RegressionError> {
    let tokens = tokenize(text)?;
    let end = text.len();
    let mut iter = tokens.into_iter().peekable();

    let response = match iter.next() {
        Some((_, Token::Name(n))) => n,
        Some((pos, _)) => return Err(syntax(pos, "expected response name")),
        None => return Err(syntax(0, "empty formula")),
    };
    match iter.next() {
        Some((_, Token::Tilde)) => {}
        Some((pos, _)) => return Err(syntax(pos, "expected `~` after response")),
        None => return Err(syntax(end, "expected `~` after response")),
    }

    let mut terms = Vec::new();
    let mut intercept = true;
    match iter.next() {
        Some((_, Token::Name(n))) => terms.push(n),
        Some((pos, _)) => return Err(syntax(pos, "expected a term after `~`")),
        None => return Err(syntax(end, "expected a term after `~`")),
    }
    while let Some((pos, token)) = iter.next() {
        match token {
            Token::Plus => match iter.next() {
                Some((_, Token::Name(n))) => terms.push(n),
                Some((p, _)) => return Err(syntax(p, "expected a term after `+`")),
                None => return Err(syntax(end, "expected a term after `+`")),
            },
            Token::Minus => {
                match iter.next() {
                    Some((_, Token::One)) => intercept = false,
                    Some((p, _)) => return Err(syntax(p, "only `- 1` may follow `-`")),
                    None => return Err(syntax(end, "expected `1` after `-`")),
                }
                if let Some((p, _)) = iter.next() {
                    return Err(syntax(p, "`- 1` must end the formula"));
                }
            }
            _ => return Err(syntax(pos, "expected `+` or `- 1`")),
        }
    }
    Ok(Formula {
        response,
        terms,
        intercept,
    })
}

/// Parses `text` and builds the design matrix from `ds`.
pub fn parse_formula(text: &str, ds: &Dataset) -> Result<DesignMatrix, RegressionError> {
    let formula = parse(text)?;
    formula.design_matrix(ds)
}

impl Formula {
    pub fn design_matrix(&self, ds: &Dataset) -> Result<DesignMatrix, RegressionError> {
        let response_col = ds.column(&self.response)?;
        let response = response_col
            .as_numeric()
            .ok_or_else(|| RegressionError::NonNumericResponse(self.response.clone()))?;
        let term_cols = self
            .terms
            .iter()
            .map(|t| ds.column(t))
            .collect::<Result<Vec<_>, _>>()?;

        let keep: Vec<usize> = (0..ds.row_count())
            .filter(|&row| response[row].is_some() && term_cols.iter().all(|c| !c.is_missing(row)))
            .collect();
        if keep.is_empty() {
            return Err(RegressionError::NoObservations);
        }

        let mut names = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        if self.intercept {
            names.push(INTERCEPT_NAME.to_string());
            columns.push(vec![1.0; keep.len()]);
        }
        for (term, col) in self.terms.iter().zip(&term_cols) {
            match col.data() {
                ColumnData::Numeric(values) => {
                    names.push(term.clone());
                    columns.push(keep.iter().map(|&r| values[r].expect("kept")).collect());
                }
                ColumnData::Categorical(values) => {
                    let levels: BTreeSet<&str> = keep
                        .iter()
                        .map(|&r| values[r].as_deref().expect("kept"))
                        .collect();
                    for level in levels.into_iter().skip(1) {
                        names.push(format!("{term}={level}"));
                        columns.push(
                            keep.iter()
                                .map(|&r| f64::from(values[r].as_deref() == Some(level)))
                                .collect(),
                        );
                    }
                }
            }
        }
        if columns.is_empty() {
            return Err(RegressionError::NoPredictors);
        }

        let n = keep.len();
        let predictors = DMatrix::from_fn(n, columns.len(), |i, j| columns[j][i]);
        let y = DVector::from_iterator(n, keep.iter().map(|&r| response[r].expect("kept")));
        DesignMatrix::new(y, predictors, names, self.intercept)
    }
}
