//! PNML subset reader/writer.
//!
//! Supported elements: `place` (with `initialMarking`), `transition` (the
//! `name` text is the label; an empty name or a `toolspecific` child marks
//! a silent transition), `arc`. Final markings travel in a companion
//! `toolspecific` block under `net`; when absent they default to one token
//! in the unique sink place. Arc weights other than 1 are rejected.

use std::collections::BTreeSet;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event as XmlEvent};
use quick_xml::{Reader, Writer};

use crate::error::{Error, Result};
use crate::event_log::EventLabel;
use crate::petri_net::{Marking, NetBuilder, NetSystem};

const TOOL_NAME: &str = "fcrepair";

#[derive(Debug, Default)]
struct RawPlace {
    id: String,
    initial: Option<u32>,
}

#[derive(Debug, Default)]
struct RawTransition {
    id: String,
    name: Option<String>,
    silent_flag: bool,
}

#[derive(Debug)]
struct RawArc {
    source: String,
    target: String,
    weight: u32,
}

/// Parses the PNML subset into a [`NetSystem`].
pub fn parse_pnml(bytes: &[u8]) -> Result<NetSystem> {
    let mut reader = Reader::from_reader(bytes);
    reader.trim_text(true);
    let mut buf = Vec::new();

    let mut places: Vec<RawPlace> = Vec::new();
    let mut transitions: Vec<RawTransition> = Vec::new();
    let mut arcs: Vec<RawArc> = Vec::new();
    // raw final markings: list of (place id, tokens) lists
    let mut final_markings: Option<Vec<Vec<(String, u32)>>> = None;

    // simple element path stack
    let mut path: Vec<String> = Vec::new();
    let mut text_target: Option<&'static str> = None;
    let mut saw_any_marking = false;

    let err = |msg: String| Error::Parse(msg);

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::Parse(format!("malformed PNML: {e}")))?;
        match event {
            XmlEvent::Start(ref e) | XmlEvent::Empty(ref e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).to_string();
                // Empty elements never get an End event; track that by not
                // pushing them on the path
                let empty = matches!(event, XmlEvent::Empty(_));
                let get_attr = |key: &str| -> Result<Option<String>> {
                    for attr in e.attributes() {
                        let attr =
                            attr.map_err(|e| Error::Parse(format!("bad attribute: {e}")))?;
                        if attr.key.as_ref() == key.as_bytes() {
                            return Ok(Some(
                                attr.unescape_value()
                                    .map_err(|e| Error::Parse(format!("bad attribute: {e}")))?
                                    .into_owned(),
                            ));
                        }
                    }
                    Ok(None)
                };
                match name.as_str() {
                    "place" => {
                        let id = get_attr("id")?
                            .ok_or_else(|| err("place without id".into()))?;
                        places.push(RawPlace { id, initial: None });
                    }
                    "transition" => {
                        let id = get_attr("id")?
                            .ok_or_else(|| err("transition without id".into()))?;
                        transitions.push(RawTransition {
                            id,
                            name: None,
                            silent_flag: false,
                        });
                    }
                    "arc" => {
                        let source = get_attr("source")?
                            .ok_or_else(|| err("arc without source".into()))?;
                        let target = get_attr("target")?
                            .ok_or_else(|| err("arc without target".into()))?;
                        arcs.push(RawArc {
                            source,
                            target,
                            weight: 1,
                        });
                    }
                    "toolspecific" => {
                        if path.last().map(String::as_str) == Some("transition") {
                            if let Some(t) = transitions.last_mut() {
                                t.silent_flag = true;
                            }
                        } else if path.last().map(String::as_str) == Some("net") {
                            final_markings.get_or_insert_with(Vec::new);
                        }
                    }
                    "marking" => {
                        if let Some(markings) = final_markings.as_mut() {
                            markings.push(Vec::new());
                        }
                    }
                    "token" => {
                        if let Some(markings) = final_markings.as_mut() {
                            let place = get_attr("place")?
                                .ok_or_else(|| err("final-marking token without place".into()))?;
                            let tokens: u32 = get_attr("tokens")?
                                .unwrap_or_else(|| "1".into())
                                .parse()
                                .map_err(|_| err("bad token count".into()))?;
                            if let Some(last) = markings.last_mut() {
                                last.push((place, tokens));
                            }
                        }
                    }
                    "text" => {
                        text_target = match path.last().map(String::as_str) {
                            Some("initialMarking") => Some("initialMarking"),
                            Some("inscription") => Some("inscription"),
                            Some("name") => {
                                // name under place/transition; only the
                                // transition name carries the label
                                match path.get(path.len().wrapping_sub(2)).map(String::as_str) {
                                    Some("transition") => Some("transition-name"),
                                    _ => Some("other-name"),
                                }
                            }
                            _ => None,
                        };
                    }
                    _ => {}
                }
                if !empty {
                    path.push(name);
                }
            }
            XmlEvent::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| Error::Parse(format!("bad text: {e}")))?
                    .into_owned();
                match text_target {
                    Some("initialMarking") => {
                        let tokens: u32 = text
                            .trim()
                            .parse()
                            .map_err(|_| err(format!("bad initialMarking '{text}'")))?;
                        if let Some(p) = places.last_mut() {
                            p.initial = Some(tokens);
                            saw_any_marking = true;
                        }
                    }
                    Some("inscription") => {
                        let weight: u32 = text
                            .trim()
                            .parse()
                            .map_err(|_| err(format!("bad inscription '{text}'")))?;
                        if let Some(a) = arcs.last_mut() {
                            a.weight = weight;
                        }
                    }
                    Some("transition-name") => {
                        if let Some(t) = transitions.last_mut() {
                            t.name = Some(text);
                        }
                    }
                    _ => {}
                }
            }
            XmlEvent::End(e) => {
                let name = String::from_utf8_lossy(e.local_name().as_ref()).to_string();
                if name == "text" {
                    text_target = None;
                }
                while let Some(top) = path.pop() {
                    if top == name {
                        break;
                    }
                }
            }
            XmlEvent::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if places.is_empty() && transitions.is_empty() {
        return Err(err("PNML contains no net elements".into()));
    }
    if !saw_any_marking {
        return Err(err("PNML is missing the initialMarking element".into()));
    }
    for arc in &arcs {
        if arc.weight != 1 {
            return Err(err(format!(
                "weighted arc {} -> {} (weight {}): only weight 1 is supported",
                arc.source, arc.target, arc.weight
            )));
        }
    }

    let mut builder = NetBuilder::new();
    for place in &places {
        builder.place(&place.id)?;
    }
    for transition in &transitions {
        let label = match (&transition.name, transition.silent_flag) {
            (_, true) => None,
            (None, _) => None,
            (Some(name), _) if name.is_empty() => None,
            (Some(name), _) => Some(EventLabel::new(name.clone())?),
        };
        builder.transition(&transition.id, label)?;
    }
    for arc in &arcs {
        match (
            builder.place_idx(&arc.source),
            builder.transition_idx(&arc.target),
            builder.transition_idx(&arc.source),
            builder.place_idx(&arc.target),
        ) {
            (Some(p), Some(t), _, _) => builder.arc_pt(p, t),
            (_, _, Some(t), Some(p)) => builder.arc_tp(t, p),
            _ => {
                return Err(err(format!(
                    "arc {} -> {} does not connect a place and a transition",
                    arc.source, arc.target
                )))
            }
        }
    }
    let net = builder.build()?;

    let mut initial = Marking::empty(net.num_places());
    for place in &places {
        if let Some(tokens) = place.initial {
            initial.0[net.place_index(&place.id).expect("just added")] = tokens;
        }
    }

    let finals: BTreeSet<Marking> = match final_markings {
        Some(raw) if !raw.is_empty() => raw
            .into_iter()
            .map(|entries| {
                let mut m = Marking::empty(net.num_places());
                for (place, tokens) in entries {
                    let p = net.place_index(&place).ok_or_else(|| {
                        Error::Parse(format!("final marking names unknown place '{place}'"))
                    })?;
                    m.0[p] = tokens;
                }
                Ok(m)
            })
            .collect::<Result<_>>()?,
        _ => {
            // default: one token in the unique sink place
            let wf = net.is_workflow_net();
            let sink = wf.sink.ok_or_else(|| {
                Error::Parse(
                    "PNML has no final-marking block and no unique sink place to default to"
                        .into(),
                )
            })?;
            let mut m = Marking::empty(net.num_places());
            m.0[sink] = 1;
            BTreeSet::from([m])
        }
    };
    NetSystem::new(net, initial, finals)
}

/// Serializes a [`NetSystem`] in the same PNML subset. Stable output:
/// `parse(serialize(sys))` reproduces the system exactly.
pub fn serialize_pnml(sys: &NetSystem) -> Vec<u8> {
    let mut writer = Writer::new_with_indent(Vec::new(), b' ', 2);
    let net = &sys.net;

    writer
        .write_event(XmlEvent::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
        .expect("in-memory write");
    let mut pnml = BytesStart::new("pnml");
    pnml.push_attribute(("xmlns", "http://www.pnml.org/version-2009/grammar/pnml"));
    writer.write_event(XmlEvent::Start(pnml)).unwrap();
    let mut net_el = BytesStart::new("net");
    net_el.push_attribute(("id", "net1"));
    net_el.push_attribute((
        "type",
        "http://www.pnml.org/version-2009/grammar/ptnet",
    ));
    writer.write_event(XmlEvent::Start(net_el)).unwrap();
    writer
        .write_event(XmlEvent::Start(BytesStart::new("page").with_attributes([(
            "id", "page1",
        )])))
        .unwrap();

    let text_block = |writer: &mut Writer<Vec<u8>>, outer: &str, text: &str| {
        writer.write_event(XmlEvent::Start(BytesStart::new(outer))).unwrap();
        writer.write_event(XmlEvent::Start(BytesStart::new("text"))).unwrap();
        writer.write_event(XmlEvent::Text(BytesText::new(text))).unwrap();
        writer.write_event(XmlEvent::End(BytesEnd::new("text"))).unwrap();
        writer.write_event(XmlEvent::End(BytesEnd::new(outer))).unwrap();
    };

    for p in 0..net.num_places() {
        let mut el = BytesStart::new("place");
        el.push_attribute(("id", net.place_id(p)));
        writer.write_event(XmlEvent::Start(el)).unwrap();
        text_block(&mut writer, "name", net.place_id(p));
        if sys.initial.0[p] > 0 {
            text_block(&mut writer, "initialMarking", &sys.initial.0[p].to_string());
        }
        writer.write_event(XmlEvent::End(BytesEnd::new("place"))).unwrap();
    }
    for t in 0..net.num_transitions() {
        let mut el = BytesStart::new("transition");
        el.push_attribute(("id", net.transition_id(t)));
        writer.write_event(XmlEvent::Start(el)).unwrap();
        match net.label(t) {
            Some(label) => text_block(&mut writer, "name", label.as_str()),
            None => {
                let mut ts = BytesStart::new("toolspecific");
                ts.push_attribute(("tool", TOOL_NAME));
                ts.push_attribute(("version", "1.0"));
                ts.push_attribute(("silent", "true"));
                writer.write_event(XmlEvent::Empty(ts)).unwrap();
            }
        }
        writer.write_event(XmlEvent::End(BytesEnd::new("transition"))).unwrap();
    }
    let mut arc_no = 0usize;
    let mut write_arc = |writer: &mut Writer<Vec<u8>>, source: &str, target: &str| {
        let mut el = BytesStart::new("arc");
        arc_no += 1;
        el.push_attribute(("id", format!("a{arc_no}").as_str()));
        el.push_attribute(("source", source));
        el.push_attribute(("target", target));
        writer.write_event(XmlEvent::Empty(el)).unwrap();
    };
    for t in 0..net.num_transitions() {
        for &p in net.pre_places(t) {
            write_arc(&mut writer, net.place_id(p), net.transition_id(t));
        }
        for &p in net.post_places(t) {
            write_arc(&mut writer, net.transition_id(t), net.place_id(p));
        }
    }
    writer.write_event(XmlEvent::End(BytesEnd::new("page"))).unwrap();

    // companion block: explicit final markings
    let mut ts = BytesStart::new("toolspecific");
    ts.push_attribute(("tool", TOOL_NAME));
    ts.push_attribute(("version", "1.0"));
    writer.write_event(XmlEvent::Start(ts)).unwrap();
    writer
        .write_event(XmlEvent::Start(BytesStart::new("finalmarkings")))
        .unwrap();
    for marking in &sys.finals {
        writer
            .write_event(XmlEvent::Start(BytesStart::new("marking")))
            .unwrap();
        for (p, &tokens) in marking.0.iter().enumerate() {
            if tokens > 0 {
                let mut el = BytesStart::new("token");
                el.push_attribute(("place", net.place_id(p)));
                el.push_attribute(("tokens", tokens.to_string().as_str()));
                writer.write_event(XmlEvent::Empty(el)).unwrap();
            }
        }
        writer
            .write_event(XmlEvent::End(BytesEnd::new("marking")))
            .unwrap();
    }
    writer
        .write_event(XmlEvent::End(BytesEnd::new("finalmarkings")))
        .unwrap();
    writer
        .write_event(XmlEvent::End(BytesEnd::new("toolspecific")))
        .unwrap();

    writer.write_event(XmlEvent::End(BytesEnd::new("net"))).unwrap();
    writer.write_event(XmlEvent::End(BytesEnd::new("pnml"))).unwrap();
    writer.into_inner()
}
