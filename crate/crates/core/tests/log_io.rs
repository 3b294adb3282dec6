use std::fmt::Write as _;

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use surprise_core::event_log::{
    parse_csv, parse_xes, serialize_csv, serialize_xes, validate, AttrDecl, AttrLevel,
    AttributeMap, AttributeValue, Case, CsvMapping, Event, EventLog, Timestamp, ValueKind,
};

fn t0() -> Timestamp {
    Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap()
}

const MAPPING: &str = r#"
format_version = 1
case_column = "case"
activity_column = "activity"
timestamp_column = "time"
timestamp_format = "%Y-%m-%d %H:%M:%S%.3f"

[[columns]]
name = "segment"
kind = "text"
level = "case"

[[columns]]
name = "limit"
kind = "integer"
level = "case"

[[columns]]
name = "cost"
kind = "real"
level = "event"

[[columns]]
name = "urgent"
kind = "boolean"
level = "event"

[[columns]]
name = "due"
kind = "timestamp"
level = "event"

[[columns]]
name = "note"
kind = "text"
level = "event"
"#;

/// 1000 cases of 10 events, written directly as CSV text.
fn ten_thousand_rows() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut out = String::from("case,activity,time,segment,limit,cost,urgent,due,note\n");
    for c in 0..1000 {
        let segment = ["retail", "corporate, large", "\"premium\""][c % 3].replace('"', "\"\"");
        let limit: i64 = rng.random_range(-5000..50_000);
        let mut time = t0() + Duration::minutes(rng.random_range(0..500_000));
        for e in 0..10 {
            time += Duration::milliseconds(rng.random_range(0..86_400_000));
            let cost = if rng.random_bool(0.2) {
                String::new()
            } else {
                format!("{}", rng.random::<f64>() * 1e4 - 100.0)
            };
            let urgent = if rng.random_bool(0.5) {
                "true"
            } else {
                "false"
            };
            let due = (time + Duration::days(3)).format("%Y-%m-%dT%H:%M:%S%.3fZ");
            let note = if e % 4 == 0 {
                "\"line one\nline two\""
            } else {
                "plain"
            };
            writeln!(
                out,
                "c{c},act {},{},\"{segment}\",{limit},{cost},{urgent},{due},{note}",
                (c + e) % 7,
                time.format("%Y-%m-%d %H:%M:%S%.3f"),
            )
            .unwrap();
        }
    }
    out
}

#[test]
fn ten_thousand_row_csv_round_trips() {
    let mapping = CsvMapping::from_toml(MAPPING).unwrap();
    let first = parse_csv(ten_thousand_rows().as_bytes(), &mapping).unwrap();
    assert_eq!(first.cases.len(), 1000);
    assert_eq!(first.num_events(), 10_000);
    assert!(validate(&first).is_empty());

    let (text, written_mapping) = serialize_csv(&first);
    let second = parse_csv(text.as_bytes(), &written_mapping).unwrap();
    assert_eq!(second, first);

    let third = parse_xes(serialize_xes(&first).as_bytes()).unwrap();
    assert_eq!(third, first);
}

#[test]
fn parsing_is_deterministic() {
    let mapping = CsvMapping::from_toml(MAPPING).unwrap();
    let text = ten_thousand_rows();
    assert_eq!(
        parse_csv(text.as_bytes(), &mapping).unwrap(),
        parse_csv(text.as_bytes(), &mapping).unwrap()
    );
}

#[test]
fn shuffled_cases_match_an_inversion_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = Vec::new();
    for c in 0..50 {
        let n = rng.random_range(1..5);
        let mut events: Vec<Event> = (0..n)
            .map(|i| Event {
                case_id: format!("c{c}"),
                activity: format!("a{i}"),
                timestamp: t0() + Duration::hours(i as i64 + 1),
                attrs: AttributeMap::new(),
            })
            .collect();
        events.shuffle(&mut rng);
        cases.push(Case {
            case_id: format!("c{c}"),
            events,
            case_attrs: AttributeMap::new(),
        });
    }
    let expected = cases
        .iter()
        .filter(|c| c.events.windows(2).any(|w| w[0].timestamp > w[1].timestamp))
        .count();
    assert!(expected > 0 && expected < 50);
    let log = EventLog {
        cases,
        attr_schema: Default::default(),
    };
    let report = validate(&log);
    assert_eq!(report.ordering_violations(), expected);
    assert_eq!(report.len(), expected);
}

fn text_value() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 ,;\"'<>&]{1,8}"
}

fn arb_value(kind: ValueKind) -> BoxedStrategy<AttributeValue> {
    match kind {
        ValueKind::Text => text_value().prop_map(AttributeValue::Text).boxed(),
        ValueKind::Integer => any::<i64>().prop_map(AttributeValue::Integer).boxed(),
        ValueKind::Real => (-1e9f64..1e9).prop_map(AttributeValue::Real).boxed(),
        ValueKind::Boolean => any::<bool>().prop_map(AttributeValue::Boolean).boxed(),
        ValueKind::Timestamp => (0i64..4_000_000_000_000)
            .prop_map(|ms| AttributeValue::Timestamp(Utc.timestamp_millis_opt(ms).unwrap()))
            .boxed(),
    }
}

const EVENT_ATTRS: [(&str, ValueKind); 3] = [
    ("cost", ValueKind::Real),
    ("resource", ValueKind::Text),
    ("due", ValueKind::Timestamp),
];
const CASE_ATTRS: [(&str, ValueKind); 2] =
    [("limit", ValueKind::Integer), ("vip", ValueKind::Boolean)];

fn arb_attrs(decls: &'static [(&'static str, ValueKind)]) -> impl Strategy<Value = AttributeMap> {
    let parts: Vec<_> = decls
        .iter()
        .map(|&(name, kind)| {
            proptest::option::of(arb_value(kind)).prop_map(move |v| (name.to_string(), v))
        })
        .collect();
    parts.prop_map(|kv| {
        kv.into_iter()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .collect()
    })
}

fn arb_case(index: usize) -> impl Strategy<Value = Case> {
    let events = prop::collection::vec(
        (
            "[A-Za-z][A-Za-z ]{0,6}",
            0i64..1_000_000_000,
            arb_attrs(&EVENT_ATTRS),
        ),
        1..5,
    );
    (events, arb_attrs(&CASE_ATTRS)).prop_map(move |(mut raw, case_attrs)| {
        raw.sort_by_key(|r| r.1);
        let case_id = format!("case {index}");
        let events = raw
            .into_iter()
            .map(|(activity, offset, attrs)| Event {
                case_id: case_id.clone(),
                activity,
                timestamp: t0() + Duration::milliseconds(offset),
                attrs,
            })
            .collect();
        Case {
            case_id,
            events,
            case_attrs,
        }
    })
}

fn arb_log() -> impl Strategy<Value = EventLog> {
    (1usize..6)
        .prop_flat_map(|n| (0..n).map(arb_case).collect::<Vec<_>>())
        .prop_map(|cases| {
            let mut attr_schema = std::collections::BTreeMap::new();
            for case in &cases {
                for name in case.case_attrs.keys() {
                    let kind = CASE_ATTRS.iter().find(|d| d.0 == name).unwrap().1;
                    attr_schema.insert(
                        name.clone(),
                        AttrDecl {
                            kind,
                            level: AttrLevel::Case,
                        },
                    );
                }
                for e in &case.events {
                    for name in e.attrs.keys() {
                        let kind = EVENT_ATTRS.iter().find(|d| d.0 == name).unwrap().1;
                        attr_schema.insert(
                            name.clone(),
                            AttrDecl {
                                kind,
                                level: AttrLevel::Event,
                            },
                        );
                    }
                }
            }
            EventLog { cases, attr_schema }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_and_xes_writers_invert_their_parsers(log in arb_log()) {
        prop_assert!(validate(&log).is_empty());
        let (text, mapping) = serialize_csv(&log);
        let from_csv = parse_csv(text.as_bytes(), &mapping).unwrap();
        prop_assert_eq!(&from_csv, &log);
        let from_xes = parse_xes(serialize_xes(&log).as_bytes()).unwrap();
        prop_assert_eq!(&from_xes, &log);
        prop_assert!(validate(&from_xes).is_empty());
    }
}
