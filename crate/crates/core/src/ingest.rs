//! CSV ingestion of two-sample survival data.
//!
//! Input files need a header row. Three columns are used: the observed
//! time, the event indicator (`1`/`0` or `true`/`false`) and a group label
//! with exactly two distinct values. Rows can be restricted beforehand with
//! `column = value` filters.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::PathBuf;

use thiserror::Error;

use crate::error::Error;
use crate::sample::{Group, Subject, SurvivalSample};

/// The veteran lung cancer trial data shipped with the crate.
///
/// Columns: `trt` (1 = standard, 2 = test chemotherapy), `celltype`
/// (`squamous`, `smallcell`, `adeno`, `large`), `time` (days), `status`
/// (1 = dead, 0 = censored), `karno`, `diagtime`, `age`, `prior` (10 = yes).
pub const VETERAN_CSV: &str = include_str!("../data/veteran.csv");

pub const VETERAN: &str = "veteran";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("column `{0}` not found in header")]
    Schema(String),
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    Parse { row: usize, column: String, value: String },
    #[error("group column must hold exactly two labels, found {}: {}", .0.len(), .0.join(", "))]
    GroupCount(Vec<String>),
    #[error("group label `{0}` does not occur in the data")]
    UnknownGroup(String),
    #[error("no data rows")]
    EmptyInput,
    #[error("unknown bundled dataset `{0}`")]
    UnknownDataset(String),
    #[error("invalid filter `{0}`, expected column=value")]
    InvalidFilter(String),
    #[error("separator and decimal mark must differ")]
    AmbiguousFormat,
    #[error("I/O error: {0}")]
    Io(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error(transparent)]
    Sample(#[from] Error),
}

impl From<csv::Error> for IngestError {
    fn from(e: csv::Error) -> Self {
        IngestError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Path(PathBuf),
    Bundled(String),
}

impl DataSource {
    /// `veteran` names the bundled dataset; anything else is a file path.
    pub fn parse(s: &str) -> DataSource {
        if s.eq_ignore_ascii_case(VETERAN) {
            DataSource::Bundled(VETERAN.to_string())
        } else {
            DataSource::Path(PathBuf::from(s))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub column: String,
    pub value: String,
}

impl std::str::FromStr for Filter {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, IngestError> {
        match s.split_once('=') {
            Some((c, v)) if !c.trim().is_empty() => Ok(Filter {
                column: c.trim().to_string(),
                value: v.trim().to_string(),
            }),
            _ => Err(IngestError::InvalidFilter(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSpec {
    pub source: DataSource,
    /// Column names; `None` picks the source's default.
    pub time_col: Option<String>,
    pub event_col: Option<String>,
    pub group_col: Option<String>,
    pub separator: u8,
    pub decimal: char,
    /// Label mapped to [`Group::First`]; defaults to the first label seen.
    pub group1: Option<String>,
    pub filters: Vec<Filter>,
}

impl InputSpec {
    pub fn new(source: DataSource) -> Self {
        InputSpec {
            source,
            time_col: None,
            event_col: None,
            group_col: None,
            separator: b',',
            decimal: '.',
            group1: None,
            filters: Vec::new(),
        }
    }

    pub fn veteran() -> Self {
        Self::new(DataSource::Bundled(VETERAN.to_string()))
    }

    fn is_veteran(&self) -> bool {
        matches!(&self.source, DataSource::Bundled(name) if name == VETERAN)
    }

    /// Effective (time, event, group) column names.
    pub fn columns(&self) -> (String, String, String) {
        let (t, e, g) = if self.is_veteran() {
            ("time", "status", "trt")
        } else {
            ("time", "event", "group")
        };
        (
            self.time_col.clone().unwrap_or_else(|| t.to_string()),
            self.event_col.clone().unwrap_or_else(|| e.to_string()),
            self.group_col.clone().unwrap_or_else(|| g.to_string()),
        )
    }
}

/// A parsed sample together with the labels of its two groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub sample: SurvivalSample,
    pub group_labels: [String; 2],
}

pub fn parse_survival_csv(spec: &InputSpec) -> Result<SurvivalSample, IngestError> {
    load(spec).map(|d| d.sample)
}

pub fn load(spec: &InputSpec) -> Result<LoadedData, IngestError> {
    match &spec.source {
        DataSource::Bundled(name) if name == VETERAN => parse_reader(spec, VETERAN_CSV.as_bytes()),
        DataSource::Bundled(name) => Err(IngestError::UnknownDataset(name.clone())),
        DataSource::Path(path) => {
            let file = File::open(path).map_err(|e| IngestError::Io(format!("{}: {e}", path.display())))?;
            parse_reader(spec, file)
        }
    }
}

pub fn parse_reader<R: Read>(spec: &InputSpec, input: R) -> Result<LoadedData, IngestError> {
    if spec.decimal as u32 == spec.separator as u32 {
        return Err(IngestError::AmbiguousFormat);
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.separator)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::EmptyInput);
    }
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let find = |name: &str| position.get(name).copied().ok_or_else(|| IngestError::Schema(name.to_string()));
    let (time_name, event_name, group_name) = spec.columns();
    let (time_at, event_at, group_at) = (find(&time_name)?, find(&event_name)?, find(&group_name)?);
    let filters = spec
        .filters
        .iter()
        .map(|f| Ok((find(&f.column)?, f.value.as_str())))
        .collect::<Result<Vec<_>, IngestError>>()?;

    let mut rows = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut seen_rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        seen_rows += 1;
        if !filters.iter().all(|&(at, value)| record.get(at) == Some(value)) {
            continue;
        }
        let field = |at: usize, name: &str| {
            record.get(at).ok_or_else(|| IngestError::Parse {
                row,
                column: name.to_string(),
                value: String::new(),
            })
        };
        let time = parse_time(field(time_at, &time_name)?, spec.decimal).ok_or_else(|| IngestError::Parse {
            row,
            column: time_name.clone(),
            value: record[time_at].to_string(),
        })?;
        let event = parse_event(field(event_at, &event_name)?).ok_or_else(|| IngestError::Parse {
            row,
            column: event_name.clone(),
            value: record[event_at].to_string(),
        })?;
        let label = field(group_at, &group_name)?;
        if label.is_empty() {
            return Err(IngestError::Parse {
                row,
                column: group_name.clone(),
                value: String::new(),
            });
        }
        if !labels.iter().any(|l| l == label) {
            labels.push(label.to_string());
        }
        rows.push((time, event, label.to_string()));
    }
    if seen_rows == 0 {
        return Err(IngestError::EmptyInput);
    }
    if labels.len() != 2 {
        return Err(IngestError::GroupCount(labels));
    }
    let first = match &spec.group1 {
        None => labels[0].clone(),
        Some(l) if labels.contains(l) => l.clone(),
        Some(l) => return Err(IngestError::UnknownGroup(l.clone())),
    };
    let second = labels.iter().find(|l| **l != first).cloned().expect("two labels");
    let subjects = rows
        .into_iter()
        .map(|(time, event, label)| {
            let group = if label == first { Group::First } else { Group::Second };
            Subject::new(time, event, group)
        })
        .collect();
    Ok(LoadedData {
        sample: SurvivalSample::new(subjects)?,
        group_labels: [first, second],
    })
}

fn parse_time(raw: &str, decimal: char) -> Option<f64> {
    let value: f64 = if decimal == '.' {
        raw.parse().ok()?
    } else {
        if raw.contains('.') {
            return None;
        }
        raw.replace(decimal, ".").parse().ok()?
    };
    (value.is_finite() && value >= 0.0).then_some(value)
}

fn parse_event(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" => Some(true),
        "0" | "0.0" | "false" => Some(false),
        _ => None,
    }
}

/// Writes `time,event,group` rows with groups labelled `1` and `2`.
pub fn write_survival_csv<W: Write>(sample: &SurvivalSample, out: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "event", "group"])?;
    for s in sample.subjects() {
        let group = match s.group {
            Group::First => "1",
            Group::Second => "2",
        };
        w.write_record([s.time.to_string().as_str(), if s.event { "1" } else { "0" }, group])?;
    }
    w.flush().map_err(|e| IngestError::Io(e.to_string()))
}
