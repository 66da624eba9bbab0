//! Plain-text rendering of outputs for researchers and checkers.

use std::fmt::Write;

use crate::regression::ModelKind;
use crate::session::{RegressionPayload, TablePayload};

/// Left-aligned first column, right-aligned rest, separated by two spaces.
pub fn text_grid(header: &[String], rows: &[Vec<String>]) -> String {
    let width = header.len();
    let mut widths = vec![0usize; width];
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                line.push_str("  ");
            }
            let pad = widths[j] - cell.chars().count();
            if j == 0 {
                line.push_str(cell);
                line.extend(std::iter::repeat_n(' ', pad));
            } else {
                line.extend(std::iter::repeat_n(' ', pad));
                line.push_str(cell);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn labelled(rows: &[String], body: Vec<Vec<String>>) -> Vec<Vec<String>> {
    rows.iter()
        .zip(body)
        .map(|(label, cells)| std::iter::once(label.clone()).chain(cells).collect())
        .collect()
}

fn header(cols: &[String]) -> Vec<String> {
    std::iter::once(String::new())
        .chain(cols.iter().cloned())
        .collect()
}

pub fn format_cell(value: Option<f64>, integral: bool) -> String {
    match value {
        None => "NaN".to_string(),
        Some(v) if integral => format!("{v:.0}"),
        Some(v) => format!("{v:.6}"),
    }
}

/// Outcome grid panel.
pub fn outcome_panel(table: &TablePayload) -> String {
    text_grid(
        &header(&table.cols),
        &labelled(&table.rows, table.outcome.clone()),
    )
}

/// Released values panel; withheld and undefined cells print as `NaN`.
pub fn values_panel(table: &TablePayload, integral: bool) -> String {
    let body = table
        .values
        .iter()
        .map(|row| row.iter().map(|v| format_cell(*v, integral)).collect())
        .collect();
    text_grid(&header(&table.cols), &labelled(&table.rows, body))
}

/// Estimates table for a regression the researcher may see.
pub fn estimates_panel(reg: &RegressionPayload) -> String {
    let stat = match reg.model {
        ModelKind::Ols => "t",
        _ => "z",
    };
    let head: Vec<String> = ["", "coef", "std err", stat]
        .into_iter()
        .map(String::from)
        .collect();
    let rows: Vec<Vec<String>> = reg
        .names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            vec![
                name.clone(),
                format!("{:.6}", reg.estimates[j]),
                format!("{:.6}", reg.std_errors[j]),
                format!("{:.3}", reg.statistics[j]),
            ]
        })
        .collect();
    let mut out = text_grid(&head, &rows);
    let fit_name = match reg.model {
        ModelKind::Ols => "R-squared",
        _ => "pseudo R-squared",
    };
    let fit = reg
        .fit
        .map_or("undefined".to_string(), |f| format!("{f:.6}"));
    let _ = writeln!(
        out,
        "model: {}  observations: {}  residual dof: {}  {fit_name}: {fit}  converged: {}",
        reg.model, reg.n_obs, reg.residual_dof, reg.converged
    );
    out
}
