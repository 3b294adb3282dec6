//! Reader and writer for the XES subset: `log`/`trace`/`event` elements with
//! `string`, `date`, `int`, `float` and `boolean` attributes.
//!
//! Extension declarations, globals, classifiers and the composite attribute
//! types (`id`, `list`, `container`) are skipped with a warning.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::BufRead;

use quick_xml::escape::escape;
use quick_xml::events::{BytesStart, Event as XmlEvent};
use quick_xml::Reader;

use super::{
    declare, format_timestamp, parse_iso_timestamp, to_millis, AttrLevel, AttrSchema, AttributeMap,
    AttributeValue, Case, Event, EventLog, LogError, ValueKind,
};

const CASE_KEY: &str = "concept:name";
const ACTIVITY_KEY: &str = "concept:name";
const TIME_KEY: &str = "time:timestamp";

#[derive(Default)]
struct TraceState {
    index: usize,
    attrs: Vec<(String, AttributeValue)>,
    events: Vec<Vec<(String, AttributeValue)>>,
}

enum Scope {
    Log,
    Trace,
    Event,
    /// Attribute element whose nested meta-attributes are ignored.
    Attribute,
    Skip,
}

fn literal_kind(name: &[u8]) -> Option<ValueKind> {
    match name {
        b"string" => Some(ValueKind::Text),
        b"date" => Some(ValueKind::Timestamp),
        b"int" => Some(ValueKind::Integer),
        b"float" => Some(ValueKind::Real),
        b"boolean" => Some(ValueKind::Boolean),
        _ => None,
    }
}

fn read_literal(e: &BytesStart<'_>, kind: ValueKind) -> Result<(String, AttributeValue), String> {
    let mut key = None;
    let mut value = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| err.to_string())?;
        let text = attr.unescape_value().map_err(|err| err.to_string())?;
        match attr.key.as_ref() {
            b"key" => key = Some(text.into_owned()),
            b"value" => value = Some(text.into_owned()),
            _ => {}
        }
    }
    let key = key.ok_or("attribute element without key")?;
    let value = value.ok_or_else(|| format!("attribute {key:?} without value"))?;
    let parsed =
        AttributeValue::parse(kind, &value).map_err(|m| format!("attribute {key:?}: {m}"))?;
    Ok((key, parsed))
}

/// Parses an XES document into an [`EventLog`].
pub fn parse_xes<R: BufRead>(source: R) -> Result<EventLog, LogError> {
    let mut reader = Reader::from_reader(source);
    reader.config_mut().trim_text(true);

    let mut buf = Vec::new();
    let mut stack: Vec<Scope> = Vec::new();
    let mut warned: HashSet<String> = HashSet::new();
    let mut warn = |what: &str| {
        if warned.insert(what.to_string()) {
            log::warn!("XES: ignoring unsupported element <{what}>");
        }
    };

    let mut trace_count = 0usize;
    let mut current: Option<TraceState> = None;
    let mut event_attrs: Option<Vec<(String, AttributeValue)>> = None;
    let mut log = EventLog::default();
    let mut seen_ids = HashSet::new();
    let mut saw_log = false;

    loop {
        let position = reader.buffer_position();
        let xml_err = |message: String| LogError::Xml { position, message };
        let ev = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(e.to_string()))?;
        match ev {
            XmlEvent::Eof => break,
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let is_empty = matches!(ev, XmlEvent::Empty(_));
                let name = e.local_name();
                let name = name.as_ref();
                let parent = stack.last();
                let scope = match (parent, name) {
                    (Some(Scope::Skip | Scope::Attribute), _) => Scope::Skip,
                    (None, b"log") => {
                        saw_log = true;
                        Scope::Log
                    }
                    (None, other) => {
                        return Err(xml_err(format!(
                            "unexpected root element <{}>",
                            String::from_utf8_lossy(other)
                        )))
                    }
                    (Some(Scope::Log), b"trace") => {
                        current = Some(TraceState {
                            index: trace_count,
                            ..Default::default()
                        });
                        trace_count += 1;
                        Scope::Trace
                    }
                    (Some(Scope::Trace), b"event") => {
                        event_attrs = Some(Vec::new());
                        Scope::Event
                    }
                    // Log header declarations carry no case data.
                    (Some(Scope::Log), b"extension" | b"global" | b"classifier") => Scope::Skip,
                    (Some(scope @ (Scope::Log | Scope::Trace | Scope::Event)), n) => {
                        match literal_kind(n) {
                            Some(kind) => {
                                let trace = current.as_ref().map_or(0, |t| t.index);
                                let parsed = read_literal(e, kind);
                                match scope {
                                    Scope::Trace => {
                                        let attr = parsed.map_err(|message| LogError::Trace {
                                            trace,
                                            message,
                                        })?;
                                        current.as_mut().expect("trace scope").attrs.push(attr);
                                    }
                                    Scope::Event => {
                                        let event = current.as_ref().map_or(0, |t| t.events.len());
                                        let attr = parsed.map_err(|message| LogError::Event {
                                            trace,
                                            event,
                                            message,
                                        })?;
                                        event_attrs.as_mut().expect("event scope").push(attr);
                                    }
                                    // Log-level attributes describe the log, not its cases.
                                    _ => {}
                                }
                                Scope::Attribute
                            }
                            None => {
                                warn(&String::from_utf8_lossy(n));
                                Scope::Skip
                            }
                        }
                    }
                };
                stack.push(scope);
                if is_empty {
                    close(
                        &mut stack,
                        &mut current,
                        &mut event_attrs,
                        &mut log,
                        &mut seen_ids,
                    )?;
                }
            }
            XmlEvent::End(_) => {
                close(
                    &mut stack,
                    &mut current,
                    &mut event_attrs,
                    &mut log,
                    &mut seen_ids,
                )?;
            }
            _ => {}
        }
        buf.clear();
    }
    if !saw_log {
        return Err(LogError::Xml {
            position: 0,
            message: "missing <log> element".into(),
        });
    }
    if !stack.is_empty() {
        return Err(LogError::Xml {
            position: reader.buffer_position(),
            message: "unexpected end of document".into(),
        });
    }
    Ok(log)
}

fn close(
    stack: &mut Vec<Scope>,
    current: &mut Option<TraceState>,
    event_attrs: &mut Option<Vec<(String, AttributeValue)>>,
    log: &mut EventLog,
    seen_ids: &mut HashSet<String>,
) -> Result<(), LogError> {
    match stack.pop() {
        Some(Scope::Event) => {
            let attrs = event_attrs.take().unwrap_or_default();
            current
                .as_mut()
                .expect("event inside trace")
                .events
                .push(attrs);
        }
        Some(Scope::Trace) => {
            let trace = current.take().expect("trace state");
            let case = finish_trace(trace, &mut log.attr_schema, seen_ids)?;
            log.cases.push(case);
        }
        Some(_) => {}
        None => {
            return Err(LogError::Xml {
                position: 0,
                message: "unbalanced end tag".into(),
            });
        }
    }
    Ok(())
}

fn finish_trace(
    trace: TraceState,
    schema: &mut AttrSchema,
    seen_ids: &mut HashSet<String>,
) -> Result<Case, LogError> {
    let index = trace.index;
    let mut case_id = None;
    let mut case_attrs = AttributeMap::new();
    for (key, value) in trace.attrs {
        if key == CASE_KEY {
            case_id = Some(value.as_category());
        } else {
            declare(schema, &key, value.kind(), AttrLevel::Case)?;
            case_attrs.insert(key, value);
        }
    }
    let case_id = match case_id {
        Some(id) if !id.is_empty() => id,
        _ => {
            return Err(LogError::Trace {
                trace: index,
                message: format!("missing {CASE_KEY}"),
            })
        }
    };
    if !seen_ids.insert(case_id.clone()) {
        return Err(LogError::DuplicateCase {
            case_id,
            trace: index,
        });
    }
    if trace.events.is_empty() {
        return Err(LogError::Trace {
            trace: index,
            message: format!("case {case_id:?} has no events"),
        });
    }

    let mut events = Vec::with_capacity(trace.events.len());
    for (ei, raw) in trace.events.into_iter().enumerate() {
        let err = |message: String| LogError::Event {
            trace: index,
            event: ei,
            message,
        };
        let mut activity = None;
        let mut timestamp = None;
        let mut attrs = AttributeMap::new();
        for (key, value) in raw {
            if key == ACTIVITY_KEY {
                activity = Some(value.as_category());
            } else if key == TIME_KEY {
                timestamp = Some(match value {
                    AttributeValue::Timestamp(t) => t,
                    AttributeValue::Text(s) => parse_iso_timestamp(&s).map_err(err)?,
                    other => return Err(err(format!("{TIME_KEY} has kind {}", other.kind()))),
                });
            } else {
                declare(schema, &key, value.kind(), AttrLevel::Event)?;
                attrs.insert(key, value);
            }
        }
        let activity = activity
            .filter(|a| !a.is_empty())
            .ok_or_else(|| err(format!("missing {ACTIVITY_KEY}")))?;
        let timestamp = timestamp.ok_or_else(|| err(format!("missing {TIME_KEY}")))?;
        events.push(Event {
            case_id: case_id.clone(),
            activity,
            timestamp: to_millis(timestamp),
            attrs,
        });
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(Case {
        case_id,
        events,
        case_attrs,
    })
}

fn write_attr(out: &mut String, indent: &str, key: &str, value: &AttributeValue) {
    let tag = match value.kind() {
        ValueKind::Text => "string",
        ValueKind::Integer => "int",
        ValueKind::Real => "float",
        ValueKind::Timestamp => "date",
        ValueKind::Boolean => "boolean",
    };
    let _ = writeln!(
        out,
        "{indent}<{tag} key=\"{}\" value=\"{}\"/>",
        escape(key),
        escape(value.to_string().as_str())
    );
}

/// Writes `log` in the XES subset accepted by [`parse_xes`].
pub fn serialize_xes(log: &EventLog) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<log xes.version=\"1.0\" xes.features=\"\">\n");
    out.push_str("  <extension name=\"Concept\" prefix=\"concept\" uri=\"http://www.xes-standard.org/concept.xesext\"/>\n");
    out.push_str("  <extension name=\"Time\" prefix=\"time\" uri=\"http://www.xes-standard.org/time.xesext\"/>\n");
    for case in &log.cases {
        out.push_str("  <trace>\n");
        write_attr(
            &mut out,
            "    ",
            CASE_KEY,
            &AttributeValue::Text(case.case_id.clone()),
        );
        for (k, v) in &case.case_attrs {
            write_attr(&mut out, "    ", k, v);
        }
        for event in &case.events {
            out.push_str("    <event>\n");
            write_attr(
                &mut out,
                "      ",
                ACTIVITY_KEY,
                &AttributeValue::Text(event.activity.clone()),
            );
            let _ = writeln!(
                out,
                "      <date key=\"{TIME_KEY}\" value=\"{}\"/>",
                format_timestamp(event.timestamp)
            );
            for (k, v) in &event.attrs {
                write_attr(&mut out, "      ", k, v);
            }
            out.push_str("    </event>\n");
        }
        out.push_str("  </trace>\n");
    }
    out.push_str("</log>\n");
    out
}
