//! Typed columnar microdata loaded from CSV.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("CSV has no header row")]
    MissingHeader,
    #[error("duplicate column name `{0}` in header")]
    DuplicateColumn(String),
    #[error("row {row} has {found} fields but the header has {expected}")]
    RaggedRow {
        row: u64,
        expected: usize,
        found: usize,
    },
    #[error("schema names column `{0}` which is not in the header")]
    SchemaColumnMissing(String),
    #[error("row {row}: value `{value}` in numeric column `{column}` is not a finite number")]
    NotNumeric {
        row: u64,
        column: String,
        value: String,
    },
    #[error("unknown column `{name}`; available columns: {available}")]
    UnknownColumn { name: String, available: String },
    #[error("column `{name}` has {found} values but the dataset has {expected} rows")]
    LengthMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("numeric column `{0}` contains a non-finite value")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Categorical => "categorical",
            ColumnKind::Numeric => "numeric",
        })
    }
}

/// Column storage. `None` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Categorical(Vec<Option<String>>),
    Numeric(Vec<Option<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Numeric(_) => ColumnKind::Numeric,
        }
    }

    pub fn data(&self) -> &ColumnData {
        &self.data
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Numeric(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match &self.data {
            ColumnData::Categorical(v) => v[row].is_none(),
            ColumnData::Numeric(v) => v[row].is_none(),
        }
    }

    /// The numeric value at `row`, if the column is numeric and the cell present.
    pub fn as_f64(&self, row: usize) -> Option<f64> {
        match &self.data {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical(_) => None,
        }
    }

    pub fn as_numeric(&self) -> Option<&[Option<f64>]> {
        match &self.data {
            ColumnData::Numeric(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    /// Renders the value at `row` as CSV text; missing values become empty.
    pub fn field(&self, row: usize) -> String {
        match &self.data {
            ColumnData::Categorical(v) => v[row].clone().unwrap_or_default(),
            ColumnData::Numeric(v) => v[row].map(format_number).unwrap_or_default(),
        }
    }
}

/// Formats a real without a spurious fractional part for integral values.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Immutable collection of equally long, uniquely named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    columns: Vec<Column>,
    row_count: usize,
}

impl Dataset {
    /// Builds a dataset, checking lengths, name uniqueness and finiteness.
    pub fn from_columns(columns: Vec<Column>) -> Result<Self, DatasetError> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for col in &columns {
            if !seen.insert(col.name.as_str()) {
                return Err(DatasetError::DuplicateColumn(col.name.clone()));
            }
            if col.len() != row_count {
                return Err(DatasetError::LengthMismatch {
                    name: col.name.clone(),
                    expected: row_count,
                    found: col.len(),
                });
            }
            if let ColumnData::Numeric(v) = &col.data {
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(DatasetError::NonFinite(col.name.clone()));
                }
            }
        }
        Ok(Dataset { columns, row_count })
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    /// Looks a column up by name.
    pub fn column(&self, name: &str) -> Result<&Column, DatasetError> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DatasetError::UnknownColumn {
                name: name.to_string(),
                available: if self.columns.is_empty() {
                    "(none)".to_string()
                } else {
                    self.column_names().join(", ")
                },
            })
    }

    /// Writes the dataset as CSV with a header; missing values are empty fields.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), DatasetError> {
        let mut wtr = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| DatasetError::Csv(e.to_string());
        wtr.write_record(self.column_names()).map_err(csv_err)?;
        for row in 0..self.row_count {
            wtr.write_record(self.columns.iter().map(|c| c.field(row)))
                .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| DatasetError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

/// Empty, `NA` and `NaN` (any case) are missing.
pub fn is_missing_token(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("na") || field.eq_ignore_ascii_case("nan")
}

/// Parses a plain decimal literal; rejects infinities and NaN.
pub fn parse_number(field: &str) -> Option<f64> {
    let looks_numeric = field
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'e' | b'E'))
        && field.bytes().any(|b| b.is_ascii_digit());
    if !looks_numeric {
        return None;
    }
    field.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Loads a CSV file. See [`read_csv`].
pub fn load_csv(
    path: &Path,
    schema: Option<&HashMap<String, ColumnKind>>,
) -> Result<Dataset, DatasetError> {
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file), schema)
}

/// Reads CSV text with a header row.
///
/// Columns named in `schema` take the given kind; the rest are numeric iff
/// every non-missing field parses as a finite real.
pub fn read_csv<R: std::io::Read>(
    reader: R,
    schema: Option<&HashMap<String, ColumnKind>>,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(|e| DatasetError::Csv(e.to_string()))?,
        None => return Err(DatasetError::MissingHeader),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let mut seen = HashSet::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            return Err(DatasetError::DuplicateColumn(name.clone()));
        }
    }
    if let Some(schema) = schema {
        // sorted so the reported column is deterministic
        let mut keys: Vec<&String> = schema.keys().collect();
        keys.sort();
        if let Some(missing) = keys.into_iter().find(|k| !seen.contains(k.as_str())) {
            return Err(DatasetError::SchemaColumnMissing(missing.clone()));
        }
    }

    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); names.len()];
    let mut lines: Vec<u64> = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| DatasetError::Csv(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != names.len() {
            return Err(DatasetError::RaggedRow {
                row: line,
                expected: names.len(),
                found: rec.len(),
            });
        }
        for (slot, field) in raw.iter_mut().zip(rec.iter()) {
            slot.push((!is_missing_token(field)).then(|| field.to_string()));
        }
        lines.push(line);
    }

    let mut columns = Vec::with_capacity(names.len());
    for (name, values) in names.into_iter().zip(raw) {
        let kind = match schema.and_then(|s| s.get(&name)) {
            Some(kind) => *kind,
            None => {
                if values.iter().flatten().all(|f| parse_number(f).is_some()) {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            }
        };
        let column = match kind {
            ColumnKind::Categorical => Column::categorical(name, values),
            ColumnKind::Numeric => {
                let mut parsed = Vec::with_capacity(values.len());
                for (i, value) in values.into_iter().enumerate() {
                    parsed.push(match value {
                        None => None,
                        Some(text) => {
                            Some(parse_number(&text).ok_or_else(|| DatasetError::NotNumeric {
                                row: lines[i],
                                column: name.clone(),
                                value: text,
                            })?)
                        }
                    });
                }
                Column::numeric(name, parsed)
            }
        };
        columns.push(column);
    }
    Dataset::from_columns(columns)
}
