//! Event logs: multisets of traces over an event alphabet.
//!
//! The log is the behavioral ground truth for repair. Multiplicities are
//! kept for frequency filtering; all language-level semantics downstream
//! use the support (the set of distinct traces).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

/// The reserved silent label. Never allowed in logs or alphabets.
pub const TAU: &str = "\u{03c4}";

/// A non-empty observable event name. The silent label τ is forbidden.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventLabel(String);

impl EventLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::Parse("event label must be non-empty".into()));
        }
        if name == TAU {
            return Err(Error::Parse(format!(
                "the silent label {TAU} cannot be used as an event label"
            )));
        }
        Ok(EventLabel(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A finite ordered sequence of event labels, possibly empty.
pub type Trace = Vec<EventLabel>;

/// Multiset of traces with the alphabet of occurring labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventLog {
    traces: BTreeMap<Trace, u64>,
    alphabet: BTreeSet<EventLabel>,
}

/// Simple occurrence statistics over a log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogStats {
    pub event_occurrences: u64,
    pub trace_occurrences: u64,
    pub unique_events: usize,
}

impl EventLog {
    pub fn empty() -> Self {
        EventLog {
            traces: BTreeMap::new(),
            alphabet: BTreeSet::new(),
        }
    }

    pub fn from_traces(traces: impl IntoIterator<Item = (Trace, u64)>) -> Self {
        let mut log = EventLog::empty();
        for (trace, count) in traces {
            log.add_trace(trace, count);
        }
        log
    }

    pub fn add_trace(&mut self, trace: Trace, count: u64) {
        if count == 0 {
            return;
        }
        for label in &trace {
            self.alphabet.insert(label.clone());
        }
        *self.traces.entry(trace).or_insert(0) += count;
    }

    /// Distinct traces with their multiplicities, in lexicographic order.
    pub fn traces(&self) -> impl Iterator<Item = (&Trace, u64)> {
        self.traces.iter().map(|(t, &c)| (t, c))
    }

    /// The support of the multiset: distinct traces only.
    pub fn support(&self) -> impl Iterator<Item = &Trace> {
        self.traces.keys()
    }

    pub fn contains(&self, trace: &Trace) -> bool {
        self.traces.contains_key(trace)
    }

    pub fn distinct_count(&self) -> usize {
        self.traces.len()
    }

    pub fn alphabet(&self) -> &BTreeSet<EventLabel> {
        &self.alphabet
    }

    pub fn stats(&self) -> LogStats {
        let mut event_occurrences = 0;
        let mut trace_occurrences = 0;
        for (trace, count) in &self.traces {
            event_occurrences += count * trace.len() as u64;
            trace_occurrences += count;
        }
        LogStats {
            event_occurrences,
            trace_occurrences,
            unique_events: self.alphabet.len(),
        }
    }

    /// Restricts the log to the `k` most frequent distinct traces.
    ///
    /// Ties broken by count descending, then lexicographic trace order, so
    /// the result is deterministic. With `k` at or above the number of
    /// distinct traces the log is returned unchanged.
    pub fn filter_top_k(&self, k: usize) -> EventLog {
        if k >= self.traces.len() {
            return self.clone();
        }
        let mut ranked: Vec<(&Trace, u64)> = self.traces().collect();
        ranked.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        EventLog::from_traces(
            ranked
                .into_iter()
                .take(k)
                .map(|(t, c)| (t.clone(), c)),
        )
    }
}

/// Parses the plain trace text format.
///
/// One trace per line, events comma-separated. An optional `<count>x `
/// prefix gives the multiplicity. The empty trace must be written
/// explicitly as `ε`; blank lines are skipped.
pub fn parse_traces_text(bytes: &[u8]) -> Result<EventLog> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse(format!("trace file is not valid UTF-8: {e}")))?;
    let mut log = EventLog::empty();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (count, rest) = match line.split_once("x ") {
            Some((n, rest)) if n.chars().all(|c| c.is_ascii_digit()) && !n.is_empty() => {
                let count: u64 = n.parse().map_err(|_| {
                    Error::Parse(format!("line {line_no}: bad multiplicity prefix '{n}'"))
                })?;
                if count == 0 {
                    return Err(Error::Parse(format!(
                        "line {line_no}: multiplicity must be positive"
                    )));
                }
                (count, rest.trim())
            }
            _ => (1, line),
        };
        let trace = if rest == "ε" {
            Vec::new()
        } else {
            rest.split(',')
                .map(|part| {
                    let name = part.trim();
                    if name.is_empty() {
                        return Err(Error::Parse(format!(
                            "line {line_no}: empty event label"
                        )));
                    }
                    EventLabel::new(name)
                        .map_err(|e| Error::Parse(format!("line {line_no}: {e}")))
                })
                .collect::<Result<Trace>>()?
        };
        log.add_trace(trace, count);
    }
    Ok(log)
}

/// Parses the XES subset used for control-flow analysis.
///
/// Only `trace`/`event` elements and the `concept:name` string attribute of
/// each event are read; lifecycle, timestamps, and case attributes are
/// ignored. Events without `concept:name` are rejected.
pub fn parse_xes(bytes: &[u8]) -> Result<EventLog> {
    use quick_xml::events::Event as XmlEvent;
    use quick_xml::Reader;

    let mut reader = Reader::from_reader(bytes);
    reader.trim_text(true);

    let mut log = EventLog::empty();
    let mut buf = Vec::new();
    let mut in_trace = false;
    let mut in_event = false;
    let mut current_trace: Trace = Vec::new();
    let mut current_name: Option<String> = None;

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Parse(format!("malformed XES at byte {}: {e}", reader.buffer_position())))?;
        match event {
            XmlEvent::Start(e) => match e.local_name().as_ref() {
                b"trace" => {
                    in_trace = true;
                    current_trace.clear();
                }
                b"event" if in_trace => {
                    in_event = true;
                    current_name = None;
                }
                _ => {}
            },
            XmlEvent::Empty(e) => {
                match e.local_name().as_ref() {
                    b"trace" => log.add_trace(Vec::new(), 1),
                    b"event" if in_trace => {
                        return Err(Error::Parse(
                            "XES event lacks a concept:name attribute".into(),
                        ))
                    }
                    b"string" if in_event => {
                        let mut key = None;
                        let mut value = None;
                        for attr in e.attributes() {
                            let attr = attr.map_err(|e| {
                                Error::Parse(format!("malformed XES attribute: {e}"))
                            })?;
                            match attr.key.as_ref() {
                                b"key" => key = Some(attr.unescape_value().map_err(xes_err)?),
                                b"value" => value = Some(attr.unescape_value().map_err(xes_err)?),
                                _ => {}
                            }
                        }
                        if key.as_deref() == Some("concept:name") {
                            current_name = value.map(|v| v.into_owned());
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(e) => match e.local_name().as_ref() {
                b"event" if in_event => {
                    in_event = false;
                    match current_name.take() {
                        Some(name) => current_trace.push(EventLabel::new(name)?),
                        None => {
                            return Err(Error::Parse(
                                "XES event lacks a concept:name attribute".into(),
                            ))
                        }
                    }
                }
                b"trace" if in_trace => {
                    in_trace = false;
                    log.add_trace(std::mem::take(&mut current_trace), 1);
                }
                _ => {}
            },
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }
    if in_trace || in_event {
        return Err(Error::Parse("XES document ended inside an open element".into()));
    }
    Ok(log)
}

fn xes_err(e: quick_xml::Error) -> Error {
    Error::Parse(format!("malformed XES: {e}"))
}

/// Serializes a log in the plain trace text format. Round-trips with
/// [`parse_traces_text`].
pub fn serialize_traces_text(log: &EventLog) -> String {
    let mut out = String::new();
    for (trace, count) in log.traces() {
        if count > 1 {
            out.push_str(&format!("{count}x "));
        }
        if trace.is_empty() {
            out.push('ε');
        } else {
            let labels: Vec<&str> = trace.iter().map(|l| l.as_str()).collect();
            out.push_str(&labels.join(","));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(name: &str) -> EventLabel {
        EventLabel::new(name).unwrap()
    }

    #[test]
    fn labels_reject_empty_and_silent() {
        assert!(EventLabel::new("").is_err());
        assert!(EventLabel::new(TAU).is_err());
        assert_eq!(ev("a").as_str(), "a");
    }

    #[test]
    fn parses_the_two_application_traces() {
        let text = "send application,check application,notify client,accept application\n\
                    create application,check application,complete application,accept application";
        let log = parse_traces_text(text.as_bytes()).unwrap();
        assert_eq!(log.distinct_count(), 2);
        assert_eq!(log.alphabet().len(), 6);
        assert!(log.support().all(|t| t.len() == 4));
    }

    #[test]
    fn empty_input_gives_empty_log() {
        let log = parse_traces_text(b"").unwrap();
        assert_eq!(log.distinct_count(), 0);
        assert!(log.alphabet().is_empty());
    }

    #[test]
    fn multiplicity_prefix_and_empty_trace() {
        let log = parse_traces_text("3x a,b\n\u{03b5}\n".as_bytes()).unwrap();
        assert_eq!(log.traces().find(|(t, _)| t.len() == 2).unwrap().1, 3);
        assert!(log.contains(&Vec::new()));
        assert!(parse_traces_text(b"0x a").is_err());
    }

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_traces_text(b"a,b\na,,b\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn text_round_trip() {
        let log = parse_traces_text("2x a,b\nc\n\u{03b5}\n".as_bytes()).unwrap();
        let reparsed = parse_traces_text(serialize_traces_text(&log).as_bytes()).unwrap();
        assert_eq!(log, reparsed);
    }

    const XES_ONE_TRACE: &str = r#"<?xml version="1.0"?>
<log>
  <trace>
    <string key="concept:name" value="case1"/>
    <event>
      <string key="concept:name" value="a"/>
      <string key="lifecycle:transition" value="complete"/>
    </event>
    <event><string key="concept:name" value="b"/></event>
  </trace>
</log>"#;

    #[test]
    fn xes_reads_event_names_only() {
        let log = parse_xes(XES_ONE_TRACE.as_bytes()).unwrap();
        assert_eq!(log.distinct_count(), 1);
        assert!(log.contains(&vec![ev("a"), ev("b")]));
    }

    #[test]
    fn xes_counts_identical_traces() {
        let doubled = format!(
            "<log>{0}{0}</log>",
            r#"<trace><event><string key="concept:name" value="a"/></event></trace>"#
        );
        let log = parse_xes(doubled.as_bytes()).unwrap();
        assert_eq!(log.traces().next().unwrap().1, 2);
    }

    #[test]
    fn xes_empty_log_and_missing_name() {
        assert_eq!(parse_xes(b"<log></log>").unwrap().distinct_count(), 0);
        let bad = r#"<log><trace><event><string key="org:resource" value="x"/></event></trace></log>"#;
        assert!(parse_xes(bad.as_bytes()).unwrap_err().to_string().contains("concept:name"));
    }

    #[test]
    fn top_k_keeps_most_frequent() {
        let log = EventLog::from_traces([
            (vec![ev("a")], 5),
            (vec![ev("b")], 3),
            (vec![ev("c")], 1),
        ]);
        let top = log.filter_top_k(2);
        assert_eq!(top.distinct_count(), 2);
        assert!(top.contains(&vec![ev("a")]) && top.contains(&vec![ev("b")]));
        assert_eq!(top.alphabet().len(), 2);
        assert_eq!(log.filter_top_k(10), log);
    }

    #[test]
    fn top_k_breaks_ties_lexicographically() {
        let log = EventLog::from_traces([(vec![ev("a")], 2), (vec![ev("b")], 2)]);
        let top = log.filter_top_k(1);
        assert!(top.contains(&vec![ev("a")]));
        assert_eq!(top.distinct_count(), 1);
    }

    #[test]
    fn stats_by_definition() {
        let log = EventLog::from_traces([(vec![ev("a"), ev("a")], 3)]);
        let stats = log.stats();
        assert_eq!(
            (stats.event_occurrences, stats.trace_occurrences, stats.unique_events),
            (6, 3, 1)
        );
        let empty = EventLog::empty().stats();
        assert_eq!(
            (empty.event_occurrences, empty.trace_occurrences, empty.unique_events),
            (0, 0, 0)
        );
    }
}
