//! Primary disclosure checks for tabular output.
//!
//! Each rule produces its own suppression mask; a cell is withheld when any
//! mask marks it. Dominance rules work on absolute values so negative
//! contributions are measured by magnitude.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::RuleConfig;
use crate::tabulation::{AxisLabel, RawTable, TableSpec};

/// The tabular rules, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "threshold")]
    Threshold,
    #[serde(rename = "p-ratio")]
    PRatio,
    #[serde(rename = "nk-rule")]
    NkRule,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Threshold, Rule::PRatio, Rule::NkRule];

    pub fn name(&self) -> &'static str {
        match self {
            Rule::Threshold => "threshold",
            Rule::PRatio => "p-ratio",
            Rule::NkRule => "nk-rule",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Frequency rule: enough contributors to the cell.
pub fn check_threshold(count: usize, cfg: &RuleConfig) -> bool {
    count as f64 >= cfg.safe_threshold
}

/// p% rule: the smallest `m - 3` magnitudes must add up to at least `p` times
/// the largest one.
pub fn check_p_ratio(contributions: &[f64], cfg: &RuleConfig) -> bool {
    let mut magnitudes: Vec<f64> = contributions.iter().map(|x| x.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    let largest = magnitudes.last().copied().unwrap_or(0.0);
    let small = magnitudes.len().saturating_sub(3);
    let tail: f64 = magnitudes[..small].iter().sum();
    tail >= cfg.safe_pratio_p * largest
}

/// NK rule: the `N` largest magnitudes must stay under `K` of the total.
pub fn check_nk(contributions: &[f64], cfg: &RuleConfig) -> bool {
    let mut magnitudes: Vec<f64> = contributions.iter().map(|x| x.abs()).collect();
    let total: f64 = magnitudes.iter().sum();
    if total == 0.0 {
        return true;
    }
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = magnitudes.iter().take(cfg.nk_n()).sum();
    top < cfg.safe_nk_k * total
}

/// Which rules a cell failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CellOutcome {
    failed: [bool; 3],
}

impl CellOutcome {
    pub fn flag(&mut self, rule: Rule) {
        self.failed[rule.index()] = true;
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.failed[rule.index()]
    }

    pub fn flags(&self) -> impl Iterator<Item = Rule> + '_ {
        Rule::ALL.into_iter().filter(|r| self.has(*r))
    }

    pub fn passed(&self) -> bool {
        !self.failed.iter().any(|f| *f)
    }
}

impl fmt::Display for CellOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("ok");
        }
        let mut first = true;
        for rule in self.flags() {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{rule};")?;
            first = false;
        }
        Ok(())
    }
}

/// A released cell value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Value(f64),
    Suppressed,
    /// Statistic undefined for this cell.
    Missing,
}

impl CellValue {
    /// The value as it appears in output files: suppressed and missing are `None`.
    pub fn released(&self) -> Option<f64> {
        match self {
            CellValue::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        })
    }
}

/// Number of cells marked by each rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RuleCounts {
    #[serde(rename = "threshold")]
    pub threshold: usize,
    #[serde(rename = "p-ratio")]
    pub p_ratio: usize,
    #[serde(rename = "nk-rule")]
    pub nk_rule: usize,
}

impl RuleCounts {
    pub fn get(&self, rule: Rule) -> usize {
        match rule {
            Rule::Threshold => self.threshold,
            Rule::PRatio => self.p_ratio,
            Rule::NkRule => self.nk_rule,
        }
    }

    fn slot(&mut self, rule: Rule) -> &mut usize {
        match rule {
            Rule::Threshold => &mut self.threshold,
            Rule::PRatio => &mut self.p_ratio,
            Rule::NkRule => &mut self.nk_rule,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSummary {
    pub status: Status,
    pub counts: RuleCounts,
}

impl fmt::Display for TableSummary {
    /// `fail; threshold: 6 cells suppressed; p-ratio: 1 cells suppressed;`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};", self.status)?;
        for rule in Rule::ALL {
            let n = self.counts.get(rule);
            if n > 0 {
                write!(f, " {rule}: {n} cells suppressed;")?;
            }
        }
        Ok(())
    }
}

/// A table after every rule has been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedTable {
    pub spec: TableSpec,
    pub row_labels: Vec<AxisLabel>,
    pub col_labels: Vec<AxisLabel>,
    pub values: Vec<Vec<CellValue>>,
    pub outcome: Vec<Vec<CellOutcome>>,
    masks: [Vec<Vec<bool>>; 3],
    pub summary: TableSummary,
}

impl CheckedTable {
    /// Suppression mask of one rule; `true` marks a failing cell.
    pub fn mask(&self, rule: Rule) -> &[Vec<bool>] {
        &self.masks[rule.index()]
    }

    pub fn is_suppressed(&self, row: usize, col: usize) -> bool {
        matches!(self.values[row][col], CellValue::Suppressed)
    }

    /// Row-major suppression pattern of the released values.
    pub fn suppression_pattern(&self) -> Vec<Vec<bool>> {
        self.values
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| matches!(v, CellValue::Suppressed))
                    .collect()
            })
            .collect()
    }

    pub fn row_names(&self) -> Vec<String> {
        self.row_labels.iter().map(ToString::to_string).collect()
    }

    pub fn col_names(&self) -> Vec<String> {
        self.col_labels.iter().map(ToString::to_string).collect()
    }
}

/// Runs every rule over every cell and withholds the failing ones.
///
/// Dominance rules only apply to magnitude statistics; frequency tables are
/// checked against the threshold alone.
pub fn apply_checks(table: &RawTable, cfg: &RuleConfig) -> CheckedTable {
    let dominance = table.spec.aggfunc().is_magnitude();
    let (n_rows, n_cols) = (table.n_rows(), table.n_cols());
    let mut masks: [Vec<Vec<bool>>; 3] = std::array::from_fn(|_| vec![vec![false; n_cols]; n_rows]);
    let mut outcome = vec![vec![CellOutcome::default(); n_cols]; n_rows];
    let mut values = vec![vec![CellValue::Missing; n_cols]; n_rows];
    let mut counts = RuleCounts::default();

    for (i, row) in table.cells.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            let cell_outcome = &mut outcome[i][j];
            if !check_threshold(cell.count, cfg) {
                cell_outcome.flag(Rule::Threshold);
            }
            if dominance {
                if !check_p_ratio(&cell.contributions, cfg) {
                    cell_outcome.flag(Rule::PRatio);
                }
                if !check_nk(&cell.contributions, cfg) {
                    cell_outcome.flag(Rule::NkRule);
                }
            }
            for rule in cell_outcome.flags() {
                masks[rule.index()][i][j] = true;
                *counts.slot(rule) += 1;
            }
            values[i][j] = if !cell_outcome.passed() {
                CellValue::Suppressed
            } else {
                match cell.aggregate {
                    Some(v) => CellValue::Value(v),
                    None if !dominance => CellValue::Value(0.0),
                    None => CellValue::Missing,
                }
            };
        }
    }

    let any_suppressed = outcome.iter().flatten().any(|o| !o.passed());
    CheckedTable {
        spec: table.spec.clone(),
        row_labels: table.row_labels.clone(),
        col_labels: table.col_labels.clone(),
        values,
        outcome,
        masks,
        summary: TableSummary {
            status: if any_suppressed {
                Status::Fail
            } else {
                Status::Pass
            },
            counts,
        },
    }
}

/// The outcome grid as text: `ok` or the failed rules.
pub fn render_outcome(ct: &CheckedTable) -> Vec<Vec<String>> {
    ct.outcome
        .iter()
        .map(|row| row.iter().map(ToString::to_string).collect())
        .collect()
}
