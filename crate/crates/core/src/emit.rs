//! XTM-DITA serialization of a [`TopicMap`] and the matching reader.
//!
//! The layout is fixed: two-space indentation, topics by ascending id,
//! children in a fixed order, text escaped for `&`, `<`, `>` (and carriage
//! return as `&#13;`), attribute values additionally escaping quotes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::extract::DateFact;
use crate::ingest::line_column;
use crate::topicmap::{Association, Directionality, Endpoint, Occurrence, Topic, TopicMap};
use crate::Lint;

pub const NS_DITAARCH: &str = "http://dita.oasis-open.org/architecture/2005/";
pub const NS_XLINK: &str = "http://www.w3.org/1999/xlink";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml { line: usize, column: usize, message: String },
    #[error("expected root <voces>, found <{0}>")]
    Root(String),
    #[error("{}: missing <{element}>", topic_label(*topic))]
    Missing { topic: Option<u64>, element: String },
    #[error("{}: invalid <{element}>: {message}", topic_label(*topic))]
    Invalid { topic: Option<u64>, element: String, message: String },
}

fn topic_label(topic: Option<u64>) -> String {
    match topic {
        Some(id) => format!("topic {id}"),
        None => "document".to_string(),
    }
}

fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            _ => out.push(c),
        }
    }
    out
}

fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;").replace('\'', "&apos;")
}

struct Writer {
    out: String,
}

impl Writer {
    fn leaf(&mut self, depth: usize, name: &str, text: &str) {
        let _ = writeln!(self.out, "{:indent$}<{name}>{}</{name}>", "", escape_text(text), indent = depth * 2);
    }

    fn open(&mut self, depth: usize, name: &str) {
        let _ = writeln!(self.out, "{:indent$}<{name}>", "", indent = depth * 2);
    }

    fn close(&mut self, depth: usize, name: &str) {
        let _ = writeln!(self.out, "{:indent$}</{name}>", "", indent = depth * 2);
    }

    fn raw(&mut self, depth: usize, line: &str) {
        let _ = writeln!(self.out, "{:indent$}{line}", "", indent = depth * 2);
    }
}

/// Serialize a map. Output is byte-identical for equal maps.
pub fn emit_xtm_dita(map: &TopicMap) -> Vec<u8> {
    let mut w = Writer {
        out: String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"),
    };
    let root = format!("voces xmlns:ditaarch=\"{NS_DITAARCH}\" xmlns:xlink=\"{NS_XLINK}\"");
    if map.topics.is_empty() && map.associations.is_empty() && map.unresolved_refs.is_empty() {
        w.raw(0, &format!("<{root}/>"));
        return w.out.into_bytes();
    }
    w.raw(0, &format!("<{root}>"));
    for topic in map.topics.values() {
        write_topic(&mut w, topic);
    }
    if !map.associations.is_empty() {
        w.open(0, "associations");
        for a in &map.associations {
            write_association(&mut w, a);
        }
        w.close(0, "associations");
    }
    if !map.unresolved_refs.is_empty() {
        w.open(0, "unresolved");
        for (source, term) in &map.unresolved_refs {
            let _ = writeln!(w.out, "  <ref source=\"#{source}\">{}</ref>", escape_text(term));
        }
        w.close(0, "unresolved");
    }
    w.raw(0, "</voces>");
    w.out.into_bytes()
}

fn write_topic(w: &mut Writer, t: &Topic) {
    w.raw(0, &format!("<topic id=\"{}\">", t.id));
    w.open(1, "baseName");
    w.leaf(2, "baseNameString", &t.base_name);
    for v in &t.variants {
        w.open(2, "variant");
        w.open(3, "variantName");
        w.leaf(4, "resourceData", v);
        w.close(3, "variantName");
        w.close(2, "variant");
    }
    w.close(1, "baseName");
    w.open(1, "instanceOf");
    w.raw(
        2,
        &format!(
            "<topicRef xlink:type=\"simple\" xlink:show=\"replace\" xlink:actuate=\"onRequest\" xlink:href=\"#{}\"/>",
            t.instance_of
        ),
    );
    w.close(1, "instanceOf");
    w.open(1, "contents");
    w.leaf(2, "shortdesc", &t.shortdesc);
    w.leaf(2, "body", &t.body);
    w.close(1, "contents");
    for d in &t.date_facts {
        w.open(1, "date");
        w.leaf(2, "role", &d.role);
        if let Some(loc) = &d.location {
            w.leaf(2, "location", loc);
        }
        if let Some(day) = d.day {
            w.leaf(2, "day", &day.to_string());
        }
        if let Some(month) = d.month {
            w.leaf(2, "month", &month.to_string());
        }
        w.leaf(2, "year", &d.year.to_string());
        w.close(1, "date");
    }
    for o in &t.occurrences {
        w.open(1, "occurrence");
        w.leaf(2, "roleSpec", &o.role_spec);
        w.leaf(2, "resourceData", &o.resource_data);
        w.close(1, "occurrence");
    }
    w.raw(0, "</topic>");
}

fn write_association(w: &mut Writer, a: &Association) {
    w.open(1, "association");
    w.leaf(2, "role", &a.role);
    w.raw(2, &format!("<member ref=\"#{}\"/>", a.source));
    match &a.target {
        Endpoint::Topic(id) => w.raw(2, &format!("<member ref=\"#{id}\"/>")),
        Endpoint::Unresolved(name) => w.raw(2, &format!("<member name=\"{}\"/>", escape_attr(name))),
    }
    w.leaf(2, "direction", a.directionality.as_str());
    w.close(1, "association");
}

#[derive(Debug, Default)]
struct Element {
    name: String,
    attrs: BTreeMap<String, String>,
    children: Vec<Element>,
    text: String,
}

impl Element {
    fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }
}

fn read_tree(xml: &[u8]) -> Result<Option<Element>, ParseError> {
    let source = std::str::from_utf8(xml).map_err(|e| ParseError::Xml {
        line: 0,
        column: 0,
        message: format!("invalid UTF-8 at byte {}", e.valid_up_to()),
    })?;
    let mut reader = Reader::from_str(source);
    let xml_err = |pos: u64, e: String| {
        let (line, column) = line_column(source, pos as usize);
        ParseError::Xml { line, column, message: e }
    };
    let mut stack: Vec<Element> = Vec::new();
    let mut root = None;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| xml_err(reader.error_position(), e.to_string()))?;
        match event {
            Event::Start(start) => stack.push(element(&start).map_err(|m| xml_err(reader.buffer_position(), m))?),
            Event::Empty(start) => {
                let el = element(&start).map_err(|m| xml_err(reader.buffer_position(), m))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().expect("reader checks end tags");
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(text) => {
                let t = text.unescape().map_err(|e| xml_err(reader.buffer_position(), e.to_string()))?;
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&t);
                }
            }
            Event::CData(data) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&String::from_utf8_lossy(&data.into_inner()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(xml_err(source.len() as u64, "unclosed element".into()));
    }
    Ok(root)
}

fn element(start: &BytesStart<'_>) -> Result<Element, String> {
    let mut el = Element {
        name: String::from_utf8_lossy(start.name().as_ref()).into_owned(),
        ..Default::default()
    };
    for attr in start.attributes() {
        let attr = attr.map_err(|e| e.to_string())?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|e| e.to_string())?.into_owned();
        el.attrs.insert(key, value);
    }
    Ok(el)
}

/// Read a document in the emitted format. Elements outside the known set are
/// skipped with a lint.
pub fn parse_xtm_dita(xml: &[u8]) -> Result<(TopicMap, Vec<Lint>), ParseError> {
    let root = read_tree(xml)?.ok_or_else(|| ParseError::Missing {
        topic: None,
        element: "voces".into(),
    })?;
    if root.name != "voces" {
        return Err(ParseError::Root(root.name));
    }
    let mut map = TopicMap::default();
    let mut lints = Vec::new();
    for child in &root.children {
        match child.name.as_str() {
            "topic" => {
                let topic = parse_topic(child, &mut lints)?;
                if map.topics.contains_key(&topic.id) {
                    return Err(invalid(Some(topic.id), "topic", "duplicate id"));
                }
                map.topics.insert(topic.id, topic);
            }
            "associations" => {
                for a in &child.children {
                    if a.name == "association" {
                        map.associations.push(parse_association(a)?);
                    } else {
                        lints.push(Lint::new(None, format!("ignored <{}> in <associations>", a.name)));
                    }
                }
            }
            "unresolved" => {
                for r in &child.children {
                    if r.name == "ref" {
                        let source = parse_ref(r.attrs.get("source"), None, "ref")?;
                        map.unresolved_refs.push((source, r.text.clone()));
                    } else {
                        lints.push(Lint::new(None, format!("ignored <{}> in <unresolved>", r.name)));
                    }
                }
            }
            other => lints.push(Lint::new(None, format!("ignored <{other}>"))),
        }
    }
    Ok((map, lints))
}

fn missing(topic: Option<u64>, element: &str) -> ParseError {
    ParseError::Missing {
        topic,
        element: element.to_string(),
    }
}

fn invalid(topic: Option<u64>, element: &str, message: impl Into<String>) -> ParseError {
    ParseError::Invalid {
        topic,
        element: element.to_string(),
        message: message.into(),
    }
}

fn required<'a>(parent: &'a Element, name: &str, topic: Option<u64>) -> Result<&'a Element, ParseError> {
    parent.child(name).ok_or_else(|| missing(topic, name))
}

fn number<T: std::str::FromStr>(el: &Element, topic: Option<u64>) -> Result<T, ParseError> {
    el.text
        .parse()
        .map_err(|_| invalid(topic, &el.name, format!("not a number: {:?}", el.text)))
}

fn parse_ref(value: Option<&String>, topic: Option<u64>, element: &str) -> Result<u64, ParseError> {
    let value = value.ok_or_else(|| invalid(topic, element, "missing reference attribute"))?;
    value
        .strip_prefix('#')
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| invalid(topic, element, format!("bad reference {value:?}")))
}

fn parse_topic(el: &Element, lints: &mut Vec<Lint>) -> Result<Topic, ParseError> {
    let id_attr = el.attrs.get("id").ok_or_else(|| invalid(None, "topic", "missing id attribute"))?;
    let id: u64 = id_attr
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(None, "topic", format!("bad id {id_attr:?}")))?;
    let t = Some(id);

    let base = required(el, "baseName", t)?;
    let base_name = required(base, "baseNameString", t)?.text.clone();
    let mut variants = Vec::new();
    for v in base.children_named("variant") {
        let name = required(v, "variantName", t)?;
        variants.push(required(name, "resourceData", t)?.text.clone());
    }
    let topic_ref = required(required(el, "instanceOf", t)?, "topicRef", t)?;
    let instance_of = parse_ref(topic_ref.attrs.get("xlink:href"), t, "topicRef")?;
    let contents = required(el, "contents", t)?;
    let shortdesc = required(contents, "shortdesc", t)?.text.clone();
    let body = required(contents, "body", t)?.text.clone();

    let mut date_facts = Vec::new();
    let mut occurrences = Vec::new();
    for child in &el.children {
        match child.name.as_str() {
            "baseName" | "instanceOf" | "contents" => {}
            "date" => date_facts.push(DateFact {
                role: required(child, "role", t)?.text.clone(),
                location: child.child("location").map(|l| l.text.clone()),
                day: child.child("day").map(|d| number(d, t)).transpose()?,
                month: child.child("month").map(|m| number(m, t)).transpose()?,
                year: number(required(child, "year", t)?, t)?,
            }),
            "occurrence" => occurrences.push(Occurrence {
                role_spec: required(child, "roleSpec", t)?.text.clone(),
                resource_data: required(child, "resourceData", t)?.text.clone(),
            }),
            other => lints.push(Lint::new(t, format!("ignored <{other}>"))),
        }
    }
    Ok(Topic {
        id,
        base_name,
        variants,
        instance_of,
        shortdesc,
        body,
        date_facts,
        occurrences,
    })
}

fn parse_association(el: &Element) -> Result<Association, ParseError> {
    let role = required(el, "role", None)?.text.clone();
    let members: Vec<&Element> = el.children_named("member").collect();
    if members.len() != 2 {
        return Err(invalid(None, "association", format!("{} members, expected 2", members.len())));
    }
    let source = parse_ref(members[0].attrs.get("ref"), None, "member")?;
    let target = match members[1].attrs.get("name") {
        Some(name) => Endpoint::Unresolved(name.clone()),
        None => Endpoint::Topic(parse_ref(members[1].attrs.get("ref"), Some(source), "member")?),
    };
    let dir = required(el, "direction", Some(source))?;
    let directionality = Directionality::parse(&dir.text)
        .ok_or_else(|| invalid(Some(source), "direction", format!("unknown value {:?}", dir.text)))?;
    Ok(Association {
        source,
        target,
        role,
        directionality,
    })
}
