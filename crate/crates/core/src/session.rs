//! Ordered store of checked outputs and the review bundle written from it.
//!
//! The bundle is a single JSON document:
//!
//! ```text
//! { "version": "1", "config": {..}, "outputs": [ { "id", "command", "timestamp",
//!   "kind", "summary", ("outcome", "rows", "cols", "values") | "coefficients" } ] }
//! ```
//!
//! Suppressed and undefined cells are `null`. The same document doubles as
//! the on-disk session state used by the command-line front-end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RuleConfig;
use crate::regression::{check_dof, ModelKind, RegressionResult};
use crate::render;
use crate::rules::{render_outcome, CheckedTable, RuleCounts, Status, TableSummary};

pub const BUNDLE_VERSION: &str = "1";
pub const SESSION_FILE: &str = "session.json";
pub const STATE_FILE: &str = "state.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session has no outputs to finalise")]
    Empty,
    #[error("no output with id `{0}`")]
    UnknownId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid bundle: {0}")]
    Format(String),
    #[error("unsupported bundle version `{0}`")]
    Version(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SessionError + '_ {
    move |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputKind {
    Table,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinaliseFormat {
    Json,
    CsvBundle,
}

impl FromStr for FinaliseFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(FinaliseFormat::Json),
            "csv" | "csv-bundle" => Ok(FinaliseFormat::CsvBundle),
            other => Err(format!(
                "unknown format `{other}`; expected json or csv-bundle"
            )),
        }
    }
}

/// Released form of a table: labels, outcome strings and values.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePayload {
    pub outcome: Vec<Vec<String>>,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl TablePayload {
    pub fn from_checked(ct: &CheckedTable) -> Self {
        TablePayload {
            outcome: render_outcome(ct),
            rows: ct.row_names(),
            cols: ct.col_names(),
            values: ct
                .values
                .iter()
                .map(|row| row.iter().map(|v| v.released()).collect())
                .collect(),
        }
    }

    /// Cells with a `null` value, row-major.
    pub fn suppression_pattern(&self) -> Vec<Vec<bool>> {
        self.values
            .iter()
            .map(|row| row.iter().map(Option::is_none).collect())
            .collect()
    }

    fn all_integral(&self) -> bool {
        self.values
            .iter()
            .flatten()
            .flatten()
            .all(|v| v.fract() == 0.0)
    }
}

/// Full estimates of a regression, kept for the checker even when unsafe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPayload {
    pub model: ModelKind,
    pub names: Vec<String>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub statistics: Vec<f64>,
    pub n_obs: usize,
    pub residual_dof: usize,
    pub fit: Option<f64>,
    pub converged: bool,
}

impl RegressionPayload {
    pub fn from_result(res: &RegressionResult) -> Self {
        RegressionPayload {
            model: res.model,
            names: res.column_names.clone(),
            estimates: res.coefficients.clone(),
            std_errors: res.std_errors.clone(),
            statistics: res.statistics.clone(),
            n_obs: res.n_obs,
            residual_dof: res.residual_dof,
            fit: res.fit,
            converged: res.converged,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Table(TablePayload),
    Regression(RegressionPayload),
}

/// Verdict attached to a record.
#[derive(Debug, Clone, PartialEq)]
pub enum RecordSummary {
    Table(TableSummary),
    Regression {
        status: Status,
        dof_ok: bool,
        text: String,
    },
}

impl RecordSummary {
    pub fn status(&self) -> Status {
        match self {
            RecordSummary::Table(s) => s.status,
            RecordSummary::Regression { status, .. } => *status,
        }
    }

    pub fn text(&self) -> String {
        match self {
            RecordSummary::Table(s) => s.to_string(),
            RecordSummary::Regression { text, .. } => text.clone(),
        }
    }
}

fn regression_summary(res: &RegressionResult, cfg: &RuleConfig) -> RecordSummary {
    let dof_ok = check_dof(res.residual_dof, cfg);
    let text = if dof_ok {
        "pass;".to_string()
    } else {
        format!(
            "fail; dof: residual degrees of freedom {} below threshold {};",
            res.residual_dof, cfg.safe_dof_threshold
        )
    };
    RecordSummary::Regression {
        status: if dof_ok { Status::Pass } else { Status::Fail },
        dof_ok,
        text,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputRecord {
    pub id: String,
    pub command: String,
    pub timestamp: String,
    pub summary: RecordSummary,
    pub payload: Payload,
}

impl OutputRecord {
    pub fn kind(&self) -> OutputKind {
        match self.payload {
            Payload::Table(_) => OutputKind::Table,
            Payload::Regression(_) => OutputKind::Regression,
        }
    }

    pub fn status(&self) -> Status {
        self.summary.status()
    }

    fn ordinal(&self) -> Option<u64> {
        self.id.strip_prefix("output_")?.parse().ok()
    }
}

/// Source of record timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    /// Every record gets this instant; used for reproducible bundles.
    Frozen(DateTime<Utc>),
}

impl Clock {
    pub fn parse_frozen(text: &str) -> Result<Self, String> {
        DateTime::parse_from_rfc3339(text)
            .map(|t| Clock::Frozen(t.with_timezone(&Utc)))
            .map_err(|e| format!("invalid timestamp `{text}`: {e}"))
    }

    fn now(&self) -> String {
        let t = match self {
            Clock::System => Utc::now(),
            Clock::Frozen(t) => *t,
        };
        t.to_rfc3339_opts(SecondsFormat::Secs, true)
    }
}

/// A research session. Mutations must be serialised by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    config: RuleConfig,
    records: Vec<OutputRecord>,
    next_ordinal: u64,
    clock: Clock,
}

/// Starts an empty session with a fixed configuration.
pub fn new_session(cfg: RuleConfig) -> Session {
    Session {
        config: cfg,
        records: Vec::new(),
        next_ordinal: 1,
        clock: Clock::System,
    }
}

impl Session {
    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn config(&self) -> &RuleConfig {
        &self.config
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&OutputRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    /// Appends a record and returns its id. Ids are never reused.
    pub fn add_output(
        &mut self,
        command: impl Into<String>,
        summary: RecordSummary,
        payload: Payload,
    ) -> String {
        let id = format!("output_{}", self.next_ordinal);
        self.next_ordinal += 1;
        log::info!("add_output(): {id}");
        self.records.push(OutputRecord {
            id: id.clone(),
            command: command.into(),
            timestamp: self.clock.now(),
            summary,
            payload,
        });
        id
    }

    pub fn add_table(&mut self, command: impl Into<String>, table: &CheckedTable) -> String {
        self.add_output(
            command,
            RecordSummary::Table(table.summary),
            Payload::Table(TablePayload::from_checked(table)),
        )
    }

    pub fn add_regression(&mut self, command: impl Into<String>, res: &RegressionResult) -> String {
        let summary = regression_summary(res, &self.config);
        self.add_output(
            command,
            summary,
            Payload::Regression(RegressionPayload::from_result(res)),
        )
    }

    pub fn remove_output(&mut self, id: &str) -> Result<OutputRecord, SessionError> {
        let pos = self
            .records
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| SessionError::UnknownId(id.to_string()))?;
        Ok(self.records.remove(pos))
    }

    /// Researcher-facing rendering of one record. Unsafe regressions have
    /// their estimates withheld.
    pub fn render_record(&self, rec: &OutputRecord) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", rec.id);
        let _ = writeln!(out, "command: {}", rec.command);
        let _ = writeln!(out, "summary: {}", rec.summary.text());
        match (&rec.payload, &rec.summary) {
            (Payload::Table(table), _) => {
                out.push_str("outcome:\n");
                out.push_str(&render::outcome_panel(table));
                out.push_str("output:\n");
                out.push_str(&render::values_panel(table, table.all_integral()));
            }
            (Payload::Regression(reg), RecordSummary::Regression { dof_ok: false, .. }) => {
                let _ = writeln!(
                    out,
                    "coefficients withheld: residual degrees of freedom {} below threshold {}",
                    reg.residual_dof, self.config.safe_dof_threshold
                );
            }
            (Payload::Regression(reg), _) => out.push_str(&render::estimates_panel(reg)),
        }
        out
    }

    /// Every record in id order, or a banner when there are none.
    pub fn print_outputs(&self) -> String {
        if self.records.is_empty() {
            return "no outputs\n".to_string();
        }
        let mut sorted: Vec<&OutputRecord> = self.records.iter().collect();
        sorted.sort_by_key(|r| r.ordinal());
        sorted
            .into_iter()
            .map(|r| self.render_record(r))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn to_bundle(&self) -> Bundle {
        Bundle {
            config: self.config,
            records: self.records.clone(),
        }
    }

    /// Writes the review bundle.
    pub fn finalise(&self, path: &Path, format: FinaliseFormat) -> Result<(), SessionError> {
        if self.records.is_empty() {
            return Err(SessionError::Empty);
        }
        let bundle = self.to_bundle();
        match format {
            FinaliseFormat::Json => write_atomic(path, bundle.to_json().as_bytes()),
            FinaliseFormat::CsvBundle => {
                fs::create_dir_all(path).map_err(io_err(path))?;
                write_atomic(&path.join(MANIFEST_FILE), bundle.to_json().as_bytes())?;
                for rec in &self.records {
                    if let Payload::Table(table) = &rec.payload {
                        let file = path.join(format!("{}.csv", rec.id));
                        write_atomic(&file, table_csv(table)?.as_bytes())?;
                    }
                }
                Ok(())
            }
        }
    }

    /// Persists the session into `dir` (created if needed).
    pub fn save(&self, dir: &Path) -> Result<(), SessionError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_atomic(
            &dir.join(SESSION_FILE),
            self.to_bundle().to_json().as_bytes(),
        )?;
        let state = SessionState {
            next_ordinal: self.next_ordinal,
        };
        let text = serde_json::to_string_pretty(&state).expect("state serialises") + "\n";
        write_atomic(&dir.join(STATE_FILE), text.as_bytes())
    }

    /// Restores a session saved by [`Session::save`]; `None` when `dir` holds none.
    pub fn load(dir: &Path) -> Result<Option<Session>, SessionError> {
        let path = dir.join(SESSION_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let bundle = Bundle::read(&path)?;
        let state_path = dir.join(STATE_FILE);
        let recorded = if state_path.exists() {
            let text = fs::read_to_string(&state_path).map_err(io_err(&state_path))?;
            serde_json::from_str::<SessionState>(&text)
                .map_err(|e| SessionError::Format(e.to_string()))?
                .next_ordinal
        } else {
            1
        };
        let highest = bundle
            .records
            .iter()
            .filter_map(OutputRecord::ordinal)
            .max()
            .unwrap_or(0);
        Ok(Some(Session {
            config: bundle.config,
            records: bundle.records,
            next_ordinal: recorded.max(highest + 1),
            clock: Clock::System,
        }))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SessionError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn table_csv(table: &TablePayload) -> Result<String, SessionError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let fmt_err = |e: csv::Error| SessionError::Format(e.to_string());
    let header = std::iter::once(String::new()).chain(table.cols.iter().cloned());
    wtr.write_record(header).map_err(fmt_err)?;
    for (label, row) in table.rows.iter().zip(&table.values) {
        let fields = std::iter::once(label.clone()).chain(
            row.iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        wtr.write_record(fields).map_err(fmt_err)?;
    }
    let bytes = wtr
        .into_inner()
        .map_err(|e| SessionError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

#[derive(Serialize, Deserialize)]
struct SessionState {
    next_ordinal: u64,
}

/// Contents of a finalised bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub config: RuleConfig,
    pub records: Vec<OutputRecord>,
}

impl Bundle {
    pub fn to_json(&self) -> String {
        let doc = BundleDoc {
            version: BUNDLE_VERSION.to_string(),
            config: self.config,
            outputs: self.records.iter().map(RecordDoc::from).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("bundle serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let doc: BundleDoc =
            serde_json::from_str(text).map_err(|e| SessionError::Format(e.to_string()))?;
        if doc.version != BUNDLE_VERSION {
            return Err(SessionError::Version(doc.version));
        }
        doc.config
            .validate()
            .map_err(|e| SessionError::Format(e.to_string()))?;
        let records = doc
            .outputs
            .into_iter()
            .map(OutputRecord::try_from)
            .collect::<Result<_, _>>()?;
        Ok(Bundle {
            config: doc.config,
            records,
        })
    }

    pub fn read(path: &Path) -> Result<Self, SessionError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }
}

// Serialised layouts. Field order here is the key order on disk.

#[derive(Serialize, Deserialize)]
struct BundleDoc {
    version: String,
    config: RuleConfig,
    outputs: Vec<RecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct SummaryDoc {
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<RuleCounts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dof_ok: Option<bool>,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    id: String,
    command: String,
    timestamp: String,
    kind: OutputKind,
    summary: SummaryDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcome: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Vec<Option<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coefficients: Option<RegressionPayload>,
}

impl From<&OutputRecord> for RecordDoc {
    fn from(rec: &OutputRecord) -> Self {
        let summary = match &rec.summary {
            RecordSummary::Table(s) => SummaryDoc {
                status: s.status,
                counts: Some(s.counts),
                dof_ok: None,
                text: s.to_string(),
            },
            RecordSummary::Regression {
                status,
                dof_ok,
                text,
            } => SummaryDoc {
                status: *status,
                counts: None,
                dof_ok: Some(*dof_ok),
                text: text.clone(),
            },
        };
        let mut doc = RecordDoc {
            id: rec.id.clone(),
            command: rec.command.clone(),
            timestamp: rec.timestamp.clone(),
            kind: rec.kind(),
            summary,
            outcome: None,
            rows: None,
            cols: None,
            values: None,
            coefficients: None,
        };
        match &rec.payload {
            Payload::Table(t) => {
                doc.outcome = Some(t.outcome.clone());
                doc.rows = Some(t.rows.clone());
                doc.cols = Some(t.cols.clone());
                doc.values = Some(t.values.clone());
            }
            Payload::Regression(r) => doc.coefficients = Some(r.clone()),
        }
        doc
    }
}

impl TryFrom<RecordDoc> for OutputRecord {
    type Error = SessionError;

    fn try_from(doc: RecordDoc) -> Result<Self, Self::Error> {
        let missing = |what: &str| SessionError::Format(format!("{}: missing `{what}`", doc.id));
        let (summary, payload) = match doc.kind {
            OutputKind::Table => {
                let counts = doc
                    .summary
                    .counts
                    .ok_or_else(|| missing("summary.counts"))?;
                let table = TablePayload {
                    outcome: doc.outcome.clone().ok_or_else(|| missing("outcome"))?,
                    rows: doc.rows.clone().ok_or_else(|| missing("rows"))?,
                    cols: doc.cols.clone().ok_or_else(|| missing("cols"))?,
                    values: doc.values.clone().ok_or_else(|| missing("values"))?,
                };
                let shape_ok = table.outcome.len() == table.rows.len()
                    && table.values.len() == table.rows.len()
                    && table.outcome.iter().all(|r| r.len() == table.cols.len())
                    && table.values.iter().all(|r| r.len() == table.cols.len());
                if !shape_ok {
                    return Err(SessionError::Format(format!(
                        "{}: table grids do not match labels",
                        doc.id
                    )));
                }
                (
                    RecordSummary::Table(TableSummary {
                        status: doc.summary.status,
                        counts,
                    }),
                    Payload::Table(table),
                )
            }
            OutputKind::Regression => {
                let dof_ok = doc
                    .summary
                    .dof_ok
                    .ok_or_else(|| missing("summary.dof_ok"))?;
                let coefficients = doc
                    .coefficients
                    .clone()
                    .ok_or_else(|| missing("coefficients"))?;
                (
                    RecordSummary::Regression {
                        status: doc.summary.status,
                        dof_ok,
                        text: doc.summary.text.clone(),
                    },
                    Payload::Regression(coefficients),
                )
            }
        };
        Ok(OutputRecord {
            id: doc.id,
            command: doc.command,
            timestamp: doc.timestamp,
            summary,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::default_config;

    fn frozen() -> Clock {
        Clock::parse_frozen("2024-03-01T12:00:00Z").unwrap()
    }

    fn table_parts(status: Status) -> (RecordSummary, Payload) {
        let counts = RuleCounts {
            threshold: usize::from(status == Status::Fail),
            ..Default::default()
        };
        let failing = status == Status::Fail;
        (
            RecordSummary::Table(TableSummary { status, counts }),
            Payload::Table(TablePayload {
                outcome: vec![vec![
                    "ok".into(),
                    if failing { "threshold;" } else { "ok" }.into(),
                ]],
                rows: vec!["2010".into()],
                cols: vec!["G".into(), "R/G".into()],
                values: vec![vec![Some(1.5), if failing { None } else { Some(2.0) }]],
            }),
        )
    }

    fn add(s: &mut Session, status: Status) -> String {
        let (summary, payload) = table_parts(status);
        s.add_output("crosstab", summary, payload)
    }

    #[test]
    fn ids_are_sequential_and_never_reused() {
        let mut s = new_session(default_config());
        assert!(s.is_empty());
        assert_eq!(add(&mut s, Status::Pass), "output_1");
        assert_eq!(add(&mut s, Status::Pass), "output_2");
        s.remove_output("output_1").unwrap();
        assert_eq!(add(&mut s, Status::Pass), "output_3");
        // removing the newest id still does not free it
        s.remove_output("output_3").unwrap();
        assert_eq!(add(&mut s, Status::Pass), "output_4");
    }

    #[test]
    fn hundred_adds() {
        let mut s = new_session(default_config());
        let ids: Vec<String> = (0..100).map(|_| add(&mut s, Status::Pass)).collect();
        let expected: Vec<String> = (1..=100).map(|i| format!("output_{i}")).collect();
        assert_eq!(ids, expected);
    }

    #[test]
    fn sessions_are_independent() {
        let mut a = new_session(default_config());
        let b = new_session(default_config());
        add(&mut a, Status::Pass);
        assert_eq!(a.len(), 1);
        assert_eq!(b.len(), 0);
    }

    #[test]
    fn remove_twice_fails() {
        let mut s = new_session(default_config());
        add(&mut s, Status::Pass);
        add(&mut s, Status::Fail);
        s.remove_output("output_1").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records()[0].id, "output_2");
        assert!(matches!(
            s.remove_output("output_1").unwrap_err(),
            SessionError::UnknownId(id) if id == "output_1"
        ));
    }

    #[test]
    fn print_outputs_banner_and_concatenation() {
        let mut s = new_session(default_config());
        assert_eq!(s.print_outputs(), "no outputs\n");
        add(&mut s, Status::Fail);
        add(&mut s, Status::Pass);
        let before = s.clone();
        let printed = s.print_outputs();
        assert_eq!(s, before);
        let expected = s
            .records()
            .iter()
            .map(|r| s.render_record(r))
            .collect::<Vec<_>>()
            .join("\n");
        assert_eq!(printed, expected);
        assert!(printed.contains("summary: fail; threshold: 1 cells suppressed;"));
        assert!(printed.contains("NaN"));
    }

    #[test]
    fn finalise_empty_session_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = new_session(default_config());
        assert!(matches!(
            s.finalise(&dir.path().join("out.json"), FinaliseFormat::Json)
                .unwrap_err(),
            SessionError::Empty
        ));
    }

    #[test]
    fn json_round_trip_and_removal() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = new_session(default_config()).with_clock(frozen());
        add(&mut s, Status::Pass);
        add(&mut s, Status::Fail);
        s.remove_output("output_1").unwrap();
        let path = dir.path().join("out.json");
        s.finalise(&path, FinaliseFormat::Json).unwrap();
        let bundle = Bundle::read(&path).unwrap();
        assert_eq!(bundle.records, s.records());
        assert_eq!(bundle.records.len(), 1);
        assert_eq!(bundle.records[0].id, "output_2");
        assert_eq!(bundle.records[0].timestamp, "2024-03-01T12:00:00Z");

        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["version"], "1");
        assert_eq!(v["outputs"][0]["summary"]["status"], "fail");
        assert_eq!(v["outputs"][0]["values"][0][1], serde_json::Value::Null);
        let keys: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("      \"") && l.contains("\":"))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        assert_eq!(
            keys,
            [
                "id",
                "command",
                "timestamp",
                "kind",
                "summary",
                "outcome",
                "rows",
                "cols",
                "values"
            ]
        );
    }

    #[test]
    fn csv_bundle_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = new_session(default_config()).with_clock(frozen());
        add(&mut s, Status::Fail);
        let out = dir.path().join("bundle");
        s.finalise(&out, FinaliseFormat::CsvBundle).unwrap();
        let manifest = Bundle::read(&out.join(MANIFEST_FILE)).unwrap();
        assert_eq!(manifest.records, s.records());
        let csv = fs::read_to_string(out.join("output_1.csv")).unwrap();
        assert_eq!(csv, ",G,R/G\n2010,1.5,\n");
    }

    #[test]
    fn save_and_load_preserve_counter() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = new_session(default_config()).with_clock(frozen());
        add(&mut s, Status::Pass);
        add(&mut s, Status::Pass);
        s.remove_output("output_2").unwrap();
        s.save(dir.path()).unwrap();
        let mut loaded = Session::load(dir.path()).unwrap().unwrap();
        assert_eq!(loaded.records(), s.records());
        assert_eq!(add(&mut loaded, Status::Pass), "output_3");
        assert!(Session::load(&dir.path().join("nothing"))
            .unwrap()
            .is_none());
    }

    #[test]
    fn rejects_bad_bundles() {
        assert!(matches!(
            Bundle::from_json(r#"{"version":"2","config":{},"outputs":[]}"#).unwrap_err(),
            SessionError::Format(_) | SessionError::Version(_)
        ));
        let cfg = serde_json::to_string(&default_config()).unwrap();
        let doc = format!(r#"{{"version":"9","config":{cfg},"outputs":[]}}"#);
        assert!(
            matches!(Bundle::from_json(&doc).unwrap_err(), SessionError::Version(v) if v == "9")
        );
        let doc = format!(
            r#"{{"version":"1","config":{cfg},"outputs":[{{"id":"output_1","command":"c","timestamp":"t","kind":"table","summary":{{"status":"pass","counts":{{"threshold":0,"p-ratio":0,"nk-rule":0}},"text":"pass;"}}}}]}}"#
        );
        assert!(matches!(
            Bundle::from_json(&doc).unwrap_err(),
            SessionError::Format(_)
        ));
    }

    #[test]
    fn finalise_format_parsing() {
        assert_eq!(
            "json".parse::<FinaliseFormat>().unwrap(),
            FinaliseFormat::Json
        );
        assert_eq!(
            "csv-bundle".parse::<FinaliseFormat>().unwrap(),
            FinaliseFormat::CsvBundle
        );
        assert!("xlsx".parse::<FinaliseFormat>().is_err());
    }
}
