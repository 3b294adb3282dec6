//! Situations and the situation feature table.
//!
//! A situation is a non-empty prefix of a case. For activity-anchored targets
//! every occurrence of the anchor activity ends one situation; for case-end
//! targets the whole case is the only situation. Descriptive values are read
//! from the prefix (or from case attributes), never from later events.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event_log::{duration_days, AttrLevel, AttrSchema, Case, Event, EventLog, ValueKind};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("target attribute {0:?} is not in the log schema")]
    UnknownAttribute(String),
    #[error("target attribute {attribute:?} has non-numeric kind {kind}")]
    NonNumericTarget { attribute: String, kind: ValueKind },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("anchor activity {0:?} does not occur in the log")]
    AnchorAbsent(String),
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
    #[error("no situations to tabulate")]
    NoSituations,
    #[error("all {0} situations were dropped for lacking a target value")]
    AllDropped(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    Activity(String),
    CaseEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Derivation {
    RawAttribute,
    Throughput,
    ElapsedTime,
    OccurrenceCount(String),
}

/// The process property whose surprising values are sought.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetFeature {
    pub attribute: String,
    pub anchor: Anchor,
    pub derivation: Derivation,
}

impl TargetFeature {
    pub fn throughput() -> Self {
        TargetFeature {
            attribute: "throughput".into(),
            anchor: Anchor::CaseEnd,
            derivation: Derivation::Throughput,
        }
    }

    /// Rejects combinations that cannot yield a numeric target on this schema.
    pub fn check(&self, schema: &AttrSchema) -> Result<(), FeatureError> {
        let raw_level = if self.derivation == Derivation::RawAttribute {
            let decl = schema
                .get(&self.attribute)
                .ok_or_else(|| FeatureError::UnknownAttribute(self.attribute.clone()))?;
            if !matches!(
                decl.kind,
                ValueKind::Integer | ValueKind::Real | ValueKind::Boolean
            ) {
                return Err(FeatureError::NonNumericTarget {
                    attribute: self.attribute.clone(),
                    kind: decl.kind,
                });
            }
            Some(decl.level)
        } else {
            None
        };
        match (&self.anchor, &self.derivation) {
            (Anchor::CaseEnd, Derivation::Throughput) => Ok(()),
            (Anchor::CaseEnd, Derivation::RawAttribute) if raw_level == Some(AttrLevel::Case) => {
                Ok(())
            }
            (Anchor::CaseEnd, d) => Err(FeatureError::InvalidTarget(format!(
                "case-end anchor needs throughput or a case-level attribute, got {d:?}"
            ))),
            (Anchor::Activity(_), Derivation::Throughput) => Err(FeatureError::InvalidTarget(
                "throughput is only defined for the case-end anchor".into(),
            )),
            (Anchor::Activity(_), _) => Ok(()),
        }
    }
}

/// A case prefix of `prefix_len` events.
#[derive(Debug, Clone, Copy)]
pub struct Situation<'a> {
    pub case: &'a Case,
    pub prefix_len: usize,
}

impl<'a> Situation<'a> {
    pub fn case_id(&self) -> &'a str {
        &self.case.case_id
    }

    pub fn events(&self) -> &'a [Event] {
        &self.case.events[..self.prefix_len]
    }

    pub fn last_event(&self) -> &'a Event {
        &self.case.events[self.prefix_len - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum DropReason {
    MissingAttribute { attribute: String },
    NonNumeric { attribute: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedSituation {
    pub case_id: String,
    pub prefix_len: usize,
    #[serde(flatten)]
    pub reason: DropReason,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DropReport {
    pub dropped: Vec<DroppedSituation>,
}

impl DropReport {
    pub fn len(&self) -> usize {
        self.dropped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dropped.is_empty()
    }
}

#[derive(Debug)]
pub struct Extraction<'a> {
    pub situations: Vec<Situation<'a>>,
    /// Situations whose target cannot be derived.
    pub missing_target: DropReport,
}

/// Extracts all situations of `log` for `target`, in case order.
pub fn extract_situations<'a>(
    log: &'a EventLog,
    target: &TargetFeature,
) -> Result<Extraction<'a>, FeatureError> {
    let mut situations = Vec::new();
    match &target.anchor {
        Anchor::CaseEnd => {
            situations.extend(
                log.cases
                    .iter()
                    .filter(|c| !c.events.is_empty())
                    .map(|case| Situation {
                        case,
                        prefix_len: case.events.len(),
                    }),
            );
        }
        Anchor::Activity(act) => {
            for case in &log.cases {
                for (i, event) in case.events.iter().enumerate() {
                    if event.activity == *act {
                        situations.push(Situation {
                            case,
                            prefix_len: i + 1,
                        });
                    }
                }
            }
            if situations.is_empty() {
                return Err(FeatureError::AnchorAbsent(act.clone()));
            }
        }
    }
    let dropped = situations
        .iter()
        .filter_map(|s| {
            derive_target(s, target)
                .err()
                .map(|reason| dropped(s, reason))
        })
        .collect();
    Ok(Extraction {
        situations,
        missing_target: DropReport { dropped },
    })
}

fn dropped(s: &Situation<'_>, reason: DropReason) -> DroppedSituation {
    DroppedSituation {
        case_id: s.case_id().to_string(),
        prefix_len: s.prefix_len,
        reason,
    }
}

fn count_activity(events: &[Event], activity: &str) -> usize {
    events.iter().filter(|e| e.activity == activity).count()
}

/// Target value of one situation. Durations are in fractional days.
pub fn derive_target(s: &Situation<'_>, target: &TargetFeature) -> Result<f64, DropReason> {
    let events = s.events();
    match &target.derivation {
        Derivation::Throughput | Derivation::ElapsedTime => {
            Ok(duration_days(events[0].timestamp, s.last_event().timestamp))
        }
        Derivation::OccurrenceCount(act) => Ok(count_activity(events, act) as f64),
        Derivation::RawAttribute => {
            let name = &target.attribute;
            let value = match target.anchor {
                Anchor::CaseEnd => s.case.case_attrs.get(name),
                Anchor::Activity(_) => s
                    .last_event()
                    .attrs
                    .get(name)
                    .or_else(|| s.case.case_attrs.get(name)),
            };
            let value = value.ok_or_else(|| DropReason::MissingAttribute {
                attribute: name.clone(),
            })?;
            value.as_f64().ok_or_else(|| DropReason::NonNumeric {
                attribute: name.clone(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    CaseAttribute(String),
    LastEventAttribute(String),
    OccurrenceCount(String),
    ElapsedTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

/// A descriptive feature used to judge similarity of situations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub source: FeatureSource,
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn case_attribute(name: &str, kind: FeatureKind) -> Self {
        FeatureSpec {
            name: name.into(),
            source: FeatureSource::CaseAttribute(name.into()),
            kind,
        }
    }

    pub fn occurrences(activity: &str) -> Self {
        FeatureSpec {
            name: format!("count({activity})"),
            source: FeatureSource::OccurrenceCount(activity.into()),
            kind: FeatureKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Numeric(f64),
    Category(String),
    Missing,
}

fn feature_value(s: &Situation<'_>, spec: &FeatureSpec) -> FeatureValue {
    let attr = match &spec.source {
        FeatureSource::CaseAttribute(name) => s.case.case_attrs.get(name),
        FeatureSource::LastEventAttribute(name) => s.last_event().attrs.get(name),
        FeatureSource::OccurrenceCount(act) => {
            let n = count_activity(s.events(), act);
            return match spec.kind {
                FeatureKind::Numeric => FeatureValue::Numeric(n as f64),
                FeatureKind::Categorical => FeatureValue::Category(n.to_string()),
            };
        }
        FeatureSource::ElapsedTime => {
            let days = duration_days(s.events()[0].timestamp, s.last_event().timestamp);
            return match spec.kind {
                FeatureKind::Numeric => FeatureValue::Numeric(days),
                FeatureKind::Categorical => FeatureValue::Category(days.to_string()),
            };
        }
    };
    match (attr, spec.kind) {
        (None, _) => FeatureValue::Missing,
        (Some(v), FeatureKind::Numeric) => v
            .as_f64()
            .map_or(FeatureValue::Missing, FeatureValue::Numeric),
        (Some(v), FeatureKind::Categorical) => FeatureValue::Category(v.as_category()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub case_id: String,
    pub prefix_len: usize,
    pub values: Vec<FeatureValue>,
    pub target: f64,
    /// Activity sequence of the prefix, as indices into the table's activity dictionary.
    #[serde(skip)]
    pub trace: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SituationFeatureTable {
    pub specs: Vec<FeatureSpec>,
    pub target: TargetFeature,
    pub rows: Vec<Row>,
    pub activities: Vec<String>,
    pub drops: DropReport,
}

impl SituationFeatureTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }

    pub fn traces(&self) -> Vec<&[u32]> {
        self.rows.iter().map(|r| r.trace.as_slice()).collect()
    }
}

/// Tabulates situations: one row per situation with a derivable target.
pub fn build_feature_table(
    situations: &[Situation<'_>],
    specs: &[FeatureSpec],
    target: &TargetFeature,
) -> Result<SituationFeatureTable, FeatureError> {
    let mut names = BTreeSet::new();
    for spec in specs {
        if !names.insert(spec.name.as_str()) {
            return Err(FeatureError::DuplicateFeature(spec.name.clone()));
        }
    }
    if situations.is_empty() {
        return Err(FeatureError::NoSituations);
    }

    let mut dictionary: HashMap<&str, u32> = HashMap::new();
    let mut activities = Vec::new();
    let mut rows = Vec::with_capacity(situations.len());
    let mut drops = DropReport::default();
    for s in situations {
        let value = match derive_target(s, target) {
            Ok(v) => v,
            Err(reason) => {
                drops.dropped.push(dropped(s, reason));
                continue;
            }
        };
        let trace = s
            .events()
            .iter()
            .map(|e| {
                *dictionary.entry(e.activity.as_str()).or_insert_with(|| {
                    activities.push(e.activity.clone());
                    (activities.len() - 1) as u32
                })
            })
            .collect();
        rows.push(Row {
            case_id: s.case_id().to_string(),
            prefix_len: s.prefix_len,
            values: specs.iter().map(|spec| feature_value(s, spec)).collect(),
            target: value,
            trace,
        });
    }
    if rows.is_empty() {
        return Err(FeatureError::AllDropped(drops.len()));
    }
    Ok(SituationFeatureTable {
        specs: specs.to_vec(),
        target: target.clone(),
        rows,
        activities,
        drops,
    })
}

pub const MISSING_CATEGORY: &str = "<missing>";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryColumn {
    pub label: String,
    pub column: usize,
    pub is_missing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "encoding", rename_all = "snake_case")]
pub enum ColumnEncoding {
    /// Min-max scaled: `x' = (x - min) / (max - min)`, or 0 when `max == min`.
    Numeric {
        feature: String,
        column: usize,
        min: f64,
        max: f64,
        median: f64,
        imputed: usize,
    },
    OneHot {
        feature: String,
        categories: Vec<CategoryColumn>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EncodingReport {
    pub columns: Vec<ColumnEncoding>,
    pub width: usize,
}

impl EncodingReport {
    /// Human-readable name of every matrix column.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.width];
        for enc in &self.columns {
            match enc {
                ColumnEncoding::Numeric {
                    feature, column, ..
                } => names[*column] = feature.clone(),
                ColumnEncoding::OneHot {
                    feature,
                    categories,
                } => {
                    for c in categories {
                        names[c.column] = format!("{feature} = {}", c.label);
                    }
                }
            }
        }
        names
    }

    /// Maps an encoded value of a numeric matrix column back to its original unit.
    pub fn decode(&self, column: usize, encoded: f64) -> Option<f64> {
        self.columns.iter().find_map(|enc| match enc {
            ColumnEncoding::Numeric {
                column: c,
                min,
                max,
                ..
            } if *c == column => Some(min + encoded * (max - min)),
            _ => None,
        })
    }

    pub fn encoding_of(&self, column: usize) -> Option<&ColumnEncoding> {
        self.columns.iter().find(|enc| match enc {
            ColumnEncoding::Numeric { column: c, .. } => *c == column,
            ColumnEncoding::OneHot { categories, .. } => {
                categories.iter().any(|c| c.column == column)
            }
        })
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Encodes descriptive features as a dense matrix in `[0, 1]`: one-hot for
/// categorical columns, min-max for numeric ones. Missing numeric values take
/// the column median; missing categories get their own column.
pub fn encode(table: &SituationFeatureTable) -> (Array2<f64>, EncodingReport) {
    let n = table.rows.len();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut report = EncodingReport::default();

    for (f, spec) in table.specs.iter().enumerate() {
        let cells = table.rows.iter().map(|r| &r.values[f]);
        match spec.kind {
            FeatureKind::Numeric => {
                let raw: Vec<Option<f64>> = cells
                    .map(|v| match v {
                        FeatureValue::Numeric(x) => Some(*x),
                        _ => None,
                    })
                    .collect();
                let mut present: Vec<f64> = raw.iter().flatten().copied().collect();
                let imputed = n - present.len();
                let median = median_of(&mut present);
                let (min, max) = present
                    .iter()
                    .fold(None, |acc: Option<(f64, f64)>, &x| match acc {
                        None => Some((x, x)),
                        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
                    })
                    .unwrap_or((median, median));
                let range = max - min;
                let col = raw
                    .iter()
                    .map(|x| {
                        let x = x.unwrap_or(median);
                        if range > 0.0 {
                            (x - min) / range
                        } else {
                            0.0
                        }
                    })
                    .collect();
                report.columns.push(ColumnEncoding::Numeric {
                    feature: spec.name.clone(),
                    column: columns.len(),
                    min,
                    max,
                    median,
                    imputed,
                });
                columns.push(col);
            }
            FeatureKind::Categorical => {
                let labels: Vec<Option<&str>> = cells
                    .map(|v| match v {
                        FeatureValue::Category(s) => Some(s.as_str()),
                        FeatureValue::Numeric(_) | FeatureValue::Missing => None,
                    })
                    .collect();
                let distinct: BTreeSet<&str> = labels.iter().flatten().copied().collect();
                let has_missing = labels.iter().any(Option::is_none);
                let mut index: BTreeMap<Option<&str>, usize> = BTreeMap::new();
                let mut categories = Vec::new();
                for label in distinct
                    .into_iter()
                    .map(Some)
                    .chain(has_missing.then_some(None))
                {
                    index.insert(label, columns.len() + categories.len());
                    categories.push(CategoryColumn {
                        label: label.unwrap_or(MISSING_CATEGORY).to_string(),
                        column: columns.len() + categories.len(),
                        is_missing: label.is_none(),
                    });
                }
                let base = columns.len();
                columns.extend(std::iter::repeat_n(vec![0.0; n], categories.len()));
                for (row, label) in labels.iter().enumerate() {
                    columns[index[label]][row] = 1.0;
                }
                debug_assert_eq!(columns.len(), base + categories.len());
                report.columns.push(ColumnEncoding::OneHot {
                    feature: spec.name.clone(),
                    categories,
                });
            }
        }
    }
    report.width = columns.len();
    let matrix = Array2::from_shape_fn((n, columns.len()), |(i, j)| columns[j][i]);
    (matrix, report)
}
