//! Event logs: cases of chronologically ordered events with typed attributes.
//!
//! Logs come from two sources, an XES subset ([`parse_xes`]) and CSV with an
//! explicit column mapping ([`parse_csv`]). Both parsers sort events within a
//! case by timestamp (stable, so ties keep source order) and record every
//! attribute in the log's schema. [`validate`] checks an arbitrary log against
//! the structural invariants and reports all violations it finds.

mod csv_io;
mod xes;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, SubsecRound, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{parse_csv, serialize_csv, ColumnDecl, CsvMapping, MAPPING_FORMAT_VERSION};
pub use xes::{parse_xes, serialize_xes};

/// UTC timestamp with millisecond precision.
pub type Timestamp = DateTime<Utc>;

/// Truncates a timestamp to whole milliseconds.
pub fn to_millis(ts: Timestamp) -> Timestamp {
    ts.trunc_subsecs(3)
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("malformed XML at byte {position}: {message}")]
    Xml { position: u64, message: String },
    #[error("trace {trace}: {message}")]
    Trace { trace: usize, message: String },
    #[error("trace {trace}, event {event}: {message}")]
    Event {
        trace: usize,
        event: usize,
        message: String,
    },
    #[error("duplicate case identifier {case_id:?} (trace {trace})")]
    DuplicateCase { case_id: String, trace: usize },
    #[error("attribute {key:?} declared as {first} and {second}")]
    ConflictingKind {
        key: String,
        first: ValueKind,
        second: ValueKind,
    },
    #[error("missing mandatory column {0:?}")]
    MissingColumn(String),
    #[error("row {row}: cannot parse timestamp {value:?} with format {format:?}")]
    Timestamp {
        row: usize,
        value: String,
        format: String,
    },
    #[error("row {row}, column {column:?}: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("case {case_id:?}: case-level column {column:?} varies within the case")]
    CaseLevelVaries { case_id: String, column: String },
    #[error("invalid mapping: {0}")]
    Mapping(String),
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Text,
    Integer,
    Real,
    Timestamp,
    Boolean,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Text => "text",
            ValueKind::Integer => "integer",
            ValueKind::Real => "real",
            ValueKind::Timestamp => "timestamp",
            ValueKind::Boolean => "boolean",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttrLevel {
    Case,
    Event,
}

impl fmt::Display for AttrLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrLevel::Case => "case",
            AttrLevel::Event => "event",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Text(String),
    Integer(i64),
    Real(f64),
    Timestamp(Timestamp),
    Boolean(bool),
}

impl AttributeValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            AttributeValue::Text(_) => ValueKind::Text,
            AttributeValue::Integer(_) => ValueKind::Integer,
            AttributeValue::Real(_) => ValueKind::Real,
            AttributeValue::Timestamp(_) => ValueKind::Timestamp,
            AttributeValue::Boolean(_) => ValueKind::Boolean,
        }
    }

    /// Numeric view used for targets and numeric descriptive features.
    /// Text is parsed as a number when possible; timestamps are not numeric.
    pub fn as_f64(&self) -> Option<f64> {
        let v = match self {
            AttributeValue::Integer(i) => *i as f64,
            AttributeValue::Real(r) => *r,
            AttributeValue::Boolean(b) => f64::from(u8::from(*b)),
            AttributeValue::Text(s) => s.trim().parse::<f64>().ok()?,
            AttributeValue::Timestamp(_) => return None,
        };
        v.is_finite().then_some(v)
    }

    /// Category label used for categorical descriptive features.
    pub fn as_category(&self) -> String {
        match self {
            AttributeValue::Text(s) => s.clone(),
            AttributeValue::Timestamp(t) => format_timestamp(*t),
            other => other.to_string(),
        }
    }

    pub(crate) fn is_well_formed(&self) -> bool {
        match self {
            AttributeValue::Real(r) => r.is_finite(),
            AttributeValue::Timestamp(t) => *t == to_millis(*t),
            _ => true,
        }
    }

    /// Parses a literal of the given kind.
    pub fn parse(kind: ValueKind, raw: &str) -> Result<Self, String> {
        match kind {
            ValueKind::Text => Ok(AttributeValue::Text(raw.to_string())),
            ValueKind::Integer => raw
                .trim()
                .parse::<i64>()
                .map(AttributeValue::Integer)
                .map_err(|e| format!("invalid integer {raw:?}: {e}")),
            ValueKind::Real => match raw.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(AttributeValue::Real(v)),
                Ok(_) => Err(format!("non-finite real {raw:?}")),
                Err(e) => Err(format!("invalid real {raw:?}: {e}")),
            },
            ValueKind::Timestamp => parse_iso_timestamp(raw).map(AttributeValue::Timestamp),
            ValueKind::Boolean => match raw.trim().to_ascii_lowercase().as_str() {
                "true" | "1" => Ok(AttributeValue::Boolean(true)),
                "false" | "0" => Ok(AttributeValue::Boolean(false)),
                _ => Err(format!("invalid boolean {raw:?}")),
            },
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Text(s) => f.write_str(s),
            AttributeValue::Integer(i) => write!(f, "{i}"),
            AttributeValue::Real(r) => write!(f, "{r}"),
            AttributeValue::Timestamp(t) => f.write_str(&format_timestamp(*t)),
            AttributeValue::Boolean(b) => write!(f, "{b}"),
        }
    }
}

/// ISO-8601 / RFC 3339 timestamp, truncated to milliseconds.
pub fn parse_iso_timestamp(raw: &str) -> Result<Timestamp, String> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Ok(to_millis(t.with_timezone(&Utc)));
    }
    // XES writers in the wild emit offsets without a colon (+0100).
    if let Ok(t) = DateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f%z") {
        return Ok(to_millis(t.with_timezone(&Utc)));
    }
    if let Ok(t) = chrono::NaiveDateTime::parse_from_str(raw, "%Y-%m-%dT%H:%M:%S%.f") {
        return Ok(to_millis(t.and_utc()));
    }
    Err(format!("invalid ISO-8601 timestamp {raw:?}"))
}

pub fn format_timestamp(ts: Timestamp) -> String {
    ts.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
}

pub type AttributeMap = BTreeMap<String, AttributeValue>;

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub case_id: String,
    pub activity: String,
    pub timestamp: Timestamp,
    pub attrs: AttributeMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub case_id: String,
    pub events: Vec<Event>,
    pub case_attrs: AttributeMap,
}

impl Case {
    /// Duration from first to last event, in fractional days.
    pub fn throughput_days(&self) -> f64 {
        match (self.events.first(), self.events.last()) {
            (Some(first), Some(last)) => duration_days(first.timestamp, last.timestamp),
            _ => 0.0,
        }
    }
}

pub fn duration_days(from: Timestamp, to: Timestamp) -> f64 {
    (to - from).num_milliseconds() as f64 / 86_400_000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttrDecl {
    pub kind: ValueKind,
    pub level: AttrLevel,
}

pub type AttrSchema = BTreeMap<String, AttrDecl>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventLog {
    pub cases: Vec<Case>,
    pub attr_schema: AttrSchema,
}

impl EventLog {
    pub fn num_events(&self) -> usize {
        self.cases.iter().map(|c| c.events.len()).sum()
    }

    pub fn case(&self, case_id: &str) -> Option<&Case> {
        self.cases.iter().find(|c| c.case_id == case_id)
    }

    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.cases
            .iter()
            .flat_map(|c| c.events.iter().map(|e| e.activity.as_str()))
    }
}

/// Records `key` in the schema, failing if it was seen with another kind.
pub(crate) fn declare(
    schema: &mut AttrSchema,
    key: &str,
    kind: ValueKind,
    level: AttrLevel,
) -> Result<(), LogError> {
    match schema.get(key) {
        Some(decl) if decl.kind != kind => Err(LogError::ConflictingKind {
            key: key.to_string(),
            first: decl.kind,
            second: kind,
        }),
        Some(decl) if decl.level != level => Err(LogError::Mapping(format!(
            "attribute {key:?} occurs at both case and event level"
        ))),
        Some(_) => Ok(()),
        None => {
            schema.insert(key.to_string(), AttrDecl { kind, level });
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EmptyCase {
        case_id: String,
    },
    EmptyCaseId {
        case_index: usize,
    },
    EmptyActivity {
        case_id: String,
        event: usize,
    },
    ForeignEvent {
        case_id: String,
        event: usize,
        event_case_id: String,
    },
    /// First position in the case whose timestamp precedes its predecessor.
    OutOfOrder {
        case_id: String,
        event: usize,
    },
    DuplicateCaseId {
        case_id: String,
    },
    UndeclaredAttribute {
        case_id: String,
        attribute: String,
    },
    KindMismatch {
        case_id: String,
        attribute: String,
        declared: ValueKind,
        found: ValueKind,
    },
    LevelMismatch {
        case_id: String,
        attribute: String,
        declared: AttrLevel,
    },
    MalformedValue {
        case_id: String,
        attribute: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn ordering_violations(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| matches!(v, Violation::OutOfOrder { .. }))
            .count()
    }
}

/// Checks every structural invariant of `log`. Violations are collected, never
/// raised; an empty report means the log is well formed.
pub fn validate(log: &EventLog) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();

    for (ci, case) in log.cases.iter().enumerate() {
        let id = &case.case_id;
        if id.is_empty() {
            violations.push(Violation::EmptyCaseId { case_index: ci });
        }
        if !seen.insert(id.as_str()) {
            violations.push(Violation::DuplicateCaseId {
                case_id: id.clone(),
            });
        }
        if case.events.is_empty() {
            violations.push(Violation::EmptyCase {
                case_id: id.clone(),
            });
        }
        if let Some(pos) = case
            .events
            .windows(2)
            .position(|w| w[1].timestamp < w[0].timestamp)
        {
            violations.push(Violation::OutOfOrder {
                case_id: id.clone(),
                event: pos + 1,
            });
        }
        for (key, value) in &case.case_attrs {
            check_attr(log, id, key, value, AttrLevel::Case, &mut violations);
        }
        for (ei, event) in case.events.iter().enumerate() {
            if event.activity.is_empty() {
                violations.push(Violation::EmptyActivity {
                    case_id: id.clone(),
                    event: ei,
                });
            }
            if event.case_id != *id {
                violations.push(Violation::ForeignEvent {
                    case_id: id.clone(),
                    event: ei,
                    event_case_id: event.case_id.clone(),
                });
            }
            for (key, value) in &event.attrs {
                check_attr(log, id, key, value, AttrLevel::Event, &mut violations);
            }
        }
    }
    ValidationReport { violations }
}

fn check_attr(
    log: &EventLog,
    case_id: &str,
    key: &str,
    value: &AttributeValue,
    level: AttrLevel,
    out: &mut Vec<Violation>,
) {
    let Some(decl) = log.attr_schema.get(key) else {
        out.push(Violation::UndeclaredAttribute {
            case_id: case_id.to_string(),
            attribute: key.to_string(),
        });
        return;
    };
    if decl.kind != value.kind() {
        out.push(Violation::KindMismatch {
            case_id: case_id.to_string(),
            attribute: key.to_string(),
            declared: decl.kind,
            found: value.kind(),
        });
    }
    if decl.level != level {
        out.push(Violation::LevelMismatch {
            case_id: case_id.to_string(),
            attribute: key.to_string(),
            declared: decl.level,
        });
    }
    if !value.is_well_formed() {
        out.push(Violation::MalformedValue {
            case_id: case_id.to_string(),
            attribute: key.to_string(),
        });
    }
}
