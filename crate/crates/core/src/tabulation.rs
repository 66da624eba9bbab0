//! Cross tabulations and pivot tables that keep per-cell contributor lists.
//!
//! Every cell remembers the individual values it aggregates so that the
//! dominance rules can be evaluated afterwards. Rows with a missing value in
//! any grouping variable, or in the values variable when there is one, are
//! dropped before grouping.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{format_number, Column, ColumnData, ColumnKind, Dataset, DatasetError};

/// Label used for margin rows and columns.
pub const MARGIN_LABEL: &str = "All";

#[derive(Debug, Error)]
pub enum TableError {
    #[error(
        "aggregation `{0}` is prohibited: reporting the minimum or maximum of a subgroup discloses an individual value"
    )]
    Prohibited(String),
    #[error(
        "unknown aggregation function `{0}`; expected one of count, sum, mean, median, std, var"
    )]
    UnknownAggFunc(String),
    #[error("aggregation `{0}` requires a values column")]
    MissingValues(AggFunc),
    #[error("at least one index variable is required")]
    NoIndex,
    #[error("cross tabulation requires at least one column variable")]
    NoColumns,
    #[error("values column `{name}` must be numeric but is {kind}")]
    NonNumericValues { name: String, kind: ColumnKind },
    #[error("no rows remain after excluding missing values")]
    EmptyTable,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Permitted aggregation functions. Minimum and maximum are deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Count,
    Sum,
    Mean,
    Median,
    Std,
    Var,
}

impl AggFunc {
    pub fn as_str(&self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Mean => "mean",
            AggFunc::Median => "median",
            AggFunc::Std => "std",
            AggFunc::Var => "var",
        }
    }

    /// Whether the statistic exposes contribution magnitudes (and so is
    /// subject to the dominance rules).
    pub fn is_magnitude(&self) -> bool {
        !matches!(self, AggFunc::Count)
    }

    /// Applies the statistic to a cell's contributions.
    ///
    /// `None` when the statistic is undefined: an empty cell, or a spread
    /// statistic over a single value.
    pub fn apply(&self, values: &[f64]) -> Option<f64> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        // fixed summation order keeps results independent of row order
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let sum: f64 = sorted.iter().sum();
        match self {
            AggFunc::Count => Some(n),
            AggFunc::Sum => Some(sum),
            AggFunc::Mean => Some(sum / n),
            AggFunc::Median => {
                let mid = sorted.len() / 2;
                if sorted.len() % 2 == 1 {
                    Some(sorted[mid])
                } else {
                    Some((sorted[mid - 1] + sorted[mid]) / 2.0)
                }
            }
            AggFunc::Var => sample_variance(&sorted, sum),
            AggFunc::Std => sample_variance(&sorted, sum).map(f64::sqrt),
        }
    }
}

fn sample_variance(sorted: &[f64], sum: f64) -> Option<f64> {
    if sorted.len() < 2 {
        return None;
    }
    let n = sorted.len() as f64;
    let mean = sum / n;
    let ss: f64 = sorted.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some(ss / (n - 1.0))
}

impl fmt::Display for AggFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AggFunc {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "count" | "size" => Ok(AggFunc::Count),
            "sum" => Ok(AggFunc::Sum),
            "mean" | "avg" => Ok(AggFunc::Mean),
            "median" => Ok(AggFunc::Median),
            "std" => Ok(AggFunc::Std),
            "var" => Ok(AggFunc::Var),
            "min" | "max" | "amin" | "amax" | "minimum" | "maximum" => {
                Err(TableError::Prohibited(s.to_string()))
            }
            _ => Err(TableError::UnknownAggFunc(s.to_string())),
        }
    }
}

/// A validated table request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSpec {
    index_vars: Vec<String>,
    column_vars: Vec<String>,
    values_var: Option<String>,
    aggfunc: AggFunc,
    margins: bool,
}

impl TableSpec {
    pub fn new(
        index_vars: Vec<String>,
        column_vars: Vec<String>,
        values_var: Option<String>,
        aggfunc: AggFunc,
        margins: bool,
    ) -> Result<Self, TableError> {
        if index_vars.is_empty() {
            return Err(TableError::NoIndex);
        }
        if aggfunc != AggFunc::Count && values_var.is_none() {
            return Err(TableError::MissingValues(aggfunc));
        }
        Ok(TableSpec {
            index_vars,
            column_vars,
            values_var,
            aggfunc,
            margins,
        })
    }

    pub fn index_vars(&self) -> &[String] {
        &self.index_vars
    }

    pub fn column_vars(&self) -> &[String] {
        &self.column_vars
    }

    pub fn values_var(&self) -> Option<&str> {
        self.values_var.as_deref()
    }

    pub fn aggfunc(&self) -> AggFunc {
        self.aggfunc
    }

    pub fn margins(&self) -> bool {
        self.margins
    }

    /// Checks that every referenced column exists and the values column is numeric.
    pub fn check_against(&self, ds: &Dataset) -> Result<(), TableError> {
        for name in self.index_vars.iter().chain(&self.column_vars) {
            ds.column(name)?;
        }
        if let Some(name) = &self.values_var {
            let col = ds.column(name)?;
            if col.kind() != ColumnKind::Numeric {
                return Err(TableError::NonNumericValues {
                    name: name.clone(),
                    kind: col.kind(),
                });
            }
        }
        Ok(())
    }
}

/// Builds a spec from loosely typed inputs, rejecting min/max up front.
pub fn build_spec<S: AsRef<str>>(
    index: &[S],
    columns: &[S],
    values: Option<&str>,
    aggfunc: &str,
    margins: bool,
) -> Result<TableSpec, TableError> {
    let aggfunc: AggFunc = aggfunc.parse()?;
    let owned = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
    TableSpec::new(
        owned(index),
        owned(columns),
        values.map(str::to_string),
        aggfunc,
        margins,
    )
}

/// One level value of a grouping key.
#[derive(Debug, Clone, PartialEq)]
pub enum KeyValue {
    Num(f64),
    Text(String),
}

impl Eq for KeyValue {}

impl Ord for KeyValue {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (KeyValue::Num(a), KeyValue::Num(b)) => a.total_cmp(b),
            (KeyValue::Text(a), KeyValue::Text(b)) => a.cmp(b),
            (KeyValue::Num(_), KeyValue::Text(_)) => Ordering::Less,
            (KeyValue::Text(_), KeyValue::Num(_)) => Ordering::Greater,
        }
    }
}

impl PartialOrd for KeyValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for KeyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KeyValue::Num(x) => f.write_str(&format_number(*x)),
            KeyValue::Text(s) => f.write_str(s),
        }
    }
}

/// A row or column label: a tuple of level values, or the margin.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum AxisLabel {
    Key(Vec<KeyValue>),
    Margin,
}

impl fmt::Display for AxisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisLabel::Margin => f.write_str(MARGIN_LABEL),
            AxisLabel::Key(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{part}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Number of contributing rows.
    pub count: usize,
    /// Values of the values variable, in dataset row order. Empty for pure
    /// frequency tables.
    pub contributions: Vec<f64>,
    pub aggregate: Option<f64>,
}

impl Cell {
    fn from_parts(count: usize, contributions: Vec<f64>, aggfunc: AggFunc) -> Self {
        let aggregate = if count == 0 {
            None
        } else if aggfunc == AggFunc::Count {
            Some(count as f64)
        } else {
            aggfunc.apply(&contributions)
        };
        Cell {
            count,
            contributions,
            aggregate,
        }
    }
}

/// Aggregated table before any disclosure check.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub spec: TableSpec,
    pub row_labels: Vec<AxisLabel>,
    pub col_labels: Vec<AxisLabel>,
    pub cells: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.row_labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.cells[row][col]
    }

    /// Number of dataset rows that reached some interior cell.
    pub fn retained_rows(&self) -> usize {
        self.interior().map(|c| c.count).sum()
    }

    fn interior(&self) -> impl Iterator<Item = &Cell> {
        self.row_labels
            .iter()
            .zip(&self.cells)
            .filter(|(label, _)| **label != AxisLabel::Margin)
            .flat_map(move |(_, row)| {
                self.col_labels
                    .iter()
                    .zip(row)
                    .filter(|(label, _)| **label != AxisLabel::Margin)
                    .map(|(_, cell)| cell)
            })
    }
}

fn key_at(col: &Column, row: usize) -> Option<KeyValue> {
    match col.data() {
        ColumnData::Numeric(v) => v[row].map(KeyValue::Num),
        ColumnData::Categorical(v) => v[row].clone().map(KeyValue::Text),
    }
}

fn key_of(cols: &[&Column], row: usize) -> Option<Vec<KeyValue>> {
    cols.iter().map(|c| key_at(c, row)).collect()
}

/// Compute a cross tabulation of index variables against column variables.
pub fn crosstab(ds: &Dataset, spec: &TableSpec) -> Result<RawTable, TableError> {
    if spec.column_vars.is_empty() {
        return Err(TableError::NoColumns);
    }
    tabulate(ds, spec)
}

/// Compute a pivot table; the column variables may be empty, giving a
/// single-column result.
pub fn pivot_table(ds: &Dataset, spec: &TableSpec) -> Result<RawTable, TableError> {
    tabulate(ds, spec)
}

fn tabulate(ds: &Dataset, spec: &TableSpec) -> Result<RawTable, TableError> {
    spec.check_against(ds)?;

    let index_cols: Vec<&Column> = spec
        .index_vars
        .iter()
        .map(|n| ds.column(n))
        .collect::<Result<_, _>>()?;
    let column_cols: Vec<&Column> = spec
        .column_vars
        .iter()
        .map(|n| ds.column(n))
        .collect::<Result<_, _>>()?;
    let values_col = spec
        .values_var
        .as_deref()
        .map(|n| ds.column(n))
        .transpose()?;

    // (row key, column key, contribution) per retained dataset row
    let mut observations = Vec::new();
    for row in 0..ds.row_count() {
        let Some(row_key) = key_of(&index_cols, row) else {
            continue;
        };
        let Some(col_key) = key_of(&column_cols, row) else {
            continue;
        };
        let value = match values_col {
            Some(col) => match col.as_f64(row) {
                Some(v) => Some(v),
                None => continue,
            },
            None => None,
        };
        observations.push((row_key, col_key, value));
    }
    if observations.is_empty() {
        return Err(TableError::EmptyTable);
    }

    let row_keys: Vec<Vec<KeyValue>> = observations
        .iter()
        .map(|o| o.0.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let col_keys: Vec<Vec<KeyValue>> = observations
        .iter()
        .map(|o| o.1.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let (n_rows, n_cols) = (row_keys.len(), col_keys.len());
    let mut counts = vec![vec![0usize; n_cols]; n_rows];
    let mut contributions = vec![vec![Vec::new(); n_cols]; n_rows];
    for (row_key, col_key, value) in &observations {
        let i = row_keys.binary_search(row_key).expect("observed key");
        let j = col_keys.binary_search(col_key).expect("observed key");
        counts[i][j] += 1;
        if let Some(v) = value {
            contributions[i][j].push(*v);
        }
    }

    let mut row_labels: Vec<AxisLabel> = row_keys.into_iter().map(AxisLabel::Key).collect();
    let mut col_labels: Vec<AxisLabel> = if spec.column_vars.is_empty() {
        let name = spec
            .values_var
            .clone()
            .unwrap_or_else(|| spec.aggfunc.to_string());
        vec![AxisLabel::Key(vec![KeyValue::Text(name)])]
    } else {
        col_keys.into_iter().map(AxisLabel::Key).collect()
    };

    if spec.margins {
        let with_col_margin = !spec.column_vars.is_empty();
        if with_col_margin {
            for i in 0..n_rows {
                let total = counts[i].iter().sum();
                let merged = contributions[i].concat();
                counts[i].push(total);
                contributions[i].push(merged);
            }
            col_labels.push(AxisLabel::Margin);
        }
        let width = counts[0].len();
        let margin_counts = (0..width)
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        let margin_contrib = (0..width)
            .map(|j| {
                contributions
                    .iter()
                    .flat_map(|r| r[j].iter().copied())
                    .collect()
            })
            .collect();
        counts.push(margin_counts);
        contributions.push(margin_contrib);
        row_labels.push(AxisLabel::Margin);
    }

    let cells = counts
        .into_iter()
        .zip(contributions)
        .map(|(count_row, contrib_row)| {
            count_row
                .into_iter()
                .zip(contrib_row)
                .map(|(count, contrib)| Cell::from_parts(count, contrib, spec.aggfunc))
                .collect()
        })
        .collect();

    Ok(RawTable {
        spec: spec.clone(),
        row_labels,
        col_labels,
        cells,
    })
}
