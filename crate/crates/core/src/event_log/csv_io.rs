//! CSV event logs: one event per row, interpreted through a [`CsvMapping`].

use std::collections::HashMap;
use std::io::Read;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{
    declare, to_millis, AttrDecl, AttrLevel, AttrSchema, AttributeMap, AttributeValue, Case, Event,
    EventLog, LogError, Timestamp, ValueKind,
};

pub const MAPPING_FORMAT_VERSION: u32 = 1;

/// Column mapping for CSV logs. Stored as TOML:
///
/// ```toml
/// format_version = 1
/// case_column = "case"
/// activity_column = "activity"
/// timestamp_column = "time"
/// timestamp_format = "%Y-%m-%d %H:%M:%S"
///
/// [[columns]]
/// name = "LoanGoal"
/// kind = "text"
/// level = "case"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvMapping {
    pub format_version: u32,
    pub case_column: String,
    pub activity_column: String,
    pub timestamp_column: String,
    /// strftime-style pattern; offsets (`%z`) are honoured, otherwise UTC is assumed.
    pub timestamp_format: String,
    #[serde(default)]
    pub columns: Vec<ColumnDecl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDecl {
    pub name: String,
    pub kind: ValueKind,
    pub level: AttrLevel,
}

impl CsvMapping {
    pub fn from_toml(text: &str) -> Result<Self, LogError> {
        let mapping: CsvMapping =
            toml::from_str(text).map_err(|e| LogError::Mapping(e.to_string()))?;
        mapping.check()?;
        Ok(mapping)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("mapping serializes")
    }

    fn check(&self) -> Result<(), LogError> {
        if self.format_version != MAPPING_FORMAT_VERSION {
            return Err(LogError::Mapping(format!(
                "unsupported format_version {} (expected {MAPPING_FORMAT_VERSION})",
                self.format_version
            )));
        }
        let mut names = vec![
            &self.case_column,
            &self.activity_column,
            &self.timestamp_column,
        ];
        names.extend(self.columns.iter().map(|c| &c.name));
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != names.len() {
            return Err(LogError::Mapping("column names must be distinct".into()));
        }
        Ok(())
    }
}

pub(crate) fn parse_with_format(raw: &str, format: &str) -> Option<Timestamp> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_str(raw, format) {
        return Some(to_millis(t.with_timezone(&Utc)));
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(raw, format) {
        return Some(to_millis(t.and_utc()));
    }
    NaiveDate::parse_from_str(raw, format)
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc())
}

/// Parses a CSV log (RFC 4180, header row required).
pub fn parse_csv<R: Read>(source: R, mapping: &CsvMapping) -> Result<EventLog, LogError> {
    mapping.check()?;
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LogError::MissingColumn(name.to_string()))
    };
    let case_col = find(&mapping.case_column)?;
    let act_col = find(&mapping.activity_column)?;
    let ts_col = find(&mapping.timestamp_column)?;
    let mut attr_cols = Vec::with_capacity(mapping.columns.len());
    let mut schema = AttrSchema::new();
    for decl in &mapping.columns {
        attr_cols.push((find(&decl.name)?, decl));
        declare(&mut schema, &decl.name, decl.kind, decl.level)?;
    }
    for h in headers.iter() {
        let known = h == mapping.case_column
            || h == mapping.activity_column
            || h == mapping.timestamp_column
            || mapping.columns.iter().any(|c| c.name == h);
        if !known {
            log::warn!("CSV: column {h:?} is not declared in the mapping and is ignored");
        }
    }

    let mut index: HashMap<String, usize> = HashMap::new();
    let mut cases: Vec<Case> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let case_id = cell(case_col).to_string();
        if case_id.is_empty() {
            return Err(LogError::Cell {
                row,
                column: mapping.case_column.clone(),
                message: "empty case identifier".into(),
            });
        }
        let activity = cell(act_col).to_string();
        if activity.is_empty() {
            return Err(LogError::Cell {
                row,
                column: mapping.activity_column.clone(),
                message: "empty activity".into(),
            });
        }
        let raw_ts = cell(ts_col);
        let timestamp = parse_with_format(raw_ts, &mapping.timestamp_format).ok_or_else(|| {
            LogError::Timestamp {
                row,
                value: raw_ts.to_string(),
                format: mapping.timestamp_format.clone(),
            }
        })?;

        let slot = *index.entry(case_id.clone()).or_insert_with(|| {
            cases.push(Case {
                case_id: case_id.clone(),
                events: Vec::new(),
                case_attrs: AttributeMap::new(),
            });
            cases.len() - 1
        });
        let case = &mut cases[slot];
        let mut attrs = AttributeMap::new();
        for &(col, decl) in &attr_cols {
            let raw = cell(col);
            if raw.is_empty() {
                continue;
            }
            let value =
                AttributeValue::parse(decl.kind, raw).map_err(|message| LogError::Cell {
                    row,
                    column: decl.name.clone(),
                    message,
                })?;
            match decl.level {
                AttrLevel::Event => {
                    attrs.insert(decl.name.clone(), value);
                }
                AttrLevel::Case => match case.case_attrs.get(&decl.name) {
                    Some(existing) if *existing != value => {
                        return Err(LogError::CaseLevelVaries {
                            case_id: case.case_id.clone(),
                            column: decl.name.clone(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        case.case_attrs.insert(decl.name.clone(), value);
                    }
                },
            }
        }
        case.events.push(Event {
            case_id,
            activity,
            timestamp,
            attrs,
        });
    }
    for case in &mut cases {
        case.events.sort_by_key(|e| e.timestamp);
    }
    Ok(EventLog {
        cases,
        attr_schema: schema,
    })
}

fn unused_name(base: &str, schema: &AttrSchema) -> String {
    let mut name = base.to_string();
    while schema.contains_key(&name) {
        name.push('_');
    }
    name
}

/// Writes `log` as CSV (one row per event, case attributes repeated on every
/// row) and returns the mapping that reads it back.
pub fn serialize_csv(log: &EventLog) -> (String, CsvMapping) {
    let mapping = CsvMapping {
        format_version: MAPPING_FORMAT_VERSION,
        case_column: unused_name("case:concept:name", &log.attr_schema),
        activity_column: unused_name("concept:name", &log.attr_schema),
        timestamp_column: unused_name("time:timestamp", &log.attr_schema),
        timestamp_format: "%Y-%m-%dT%H:%M:%S%.3fZ".into(),
        columns: log
            .attr_schema
            .iter()
            .map(|(name, AttrDecl { kind, level })| ColumnDecl {
                name: name.clone(),
                kind: *kind,
                level: *level,
            })
            .collect(),
    };

    let mut writer = ::csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        mapping.case_column.as_str(),
        mapping.activity_column.as_str(),
        mapping.timestamp_column.as_str(),
    ];
    header.extend(mapping.columns.iter().map(|c| c.name.as_str()));
    writer.write_record(&header).expect("in-memory write");

    for case in &log.cases {
        for event in &case.events {
            let mut row = vec![
                case.case_id.clone(),
                event.activity.clone(),
                event
                    .timestamp
                    .format(&mapping.timestamp_format)
                    .to_string(),
            ];
            for col in &mapping.columns {
                let source = match col.level {
                    AttrLevel::Case => &case.case_attrs,
                    AttrLevel::Event => &event.attrs,
                };
                row.push(
                    source
                        .get(&col.name)
                        .map(|v| v.to_string())
                        .unwrap_or_default(),
                );
            }
            writer.write_record(&row).expect("in-memory write");
        }
    }
    let bytes = writer.into_inner().expect("flush in-memory writer");
    (String::from_utf8(bytes).expect("utf-8 output"), mapping)
}
