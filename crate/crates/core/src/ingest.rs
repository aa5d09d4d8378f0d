//! Reading the source corpus: `<voces>` documents of `<voz>` entries.
//!
//! The descriptions carry HTML-escaped paragraph tags and inline
//! `$$$term%%id$$$` cross-reference markers. Entity decoding happens once, in
//! the XML reader; tag stripping and marker extraction happen in
//! [`prepare_description`].

use std::sync::OnceLock;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::text::{char_len, Span};

const OPEN: &str = "$$$";
const SEP: &str = "%%";

/// One raw `<voz>` record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEntry {
    pub voz_id: u64,
    pub subcategory_id: u64,
    pub name: String,
    /// `<descripcion>` payload with XML entities decoded once.
    pub raw_description: String,
}

/// An inline cross-reference marker, located in the marker-free output text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerRef {
    pub surface_term: String,
    pub target_id: Option<u64>,
    pub char_span: Span,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("corpus is not valid UTF-8 (byte {offset})")]
    Encoding { offset: usize },
    #[error("malformed XML at line {line}, column {column}: {message}")]
    Xml {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("expected root element <voces>, found <{found}>")]
    UnexpectedRoot { found: String },
    #[error("document has no root element")]
    MissingRoot,
}

/// A recoverable problem with a single `<voz>`; the entry is skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryError {
    /// 1-based position of the `<voz>` in the document.
    pub position: usize,
    pub voz_id: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedCorpus {
    pub entries: Vec<SourceEntry>,
    pub errors: Vec<EntryError>,
}

#[derive(Default)]
struct PendingEntry {
    subcategory: Option<String>,
    voz_id: Option<String>,
    name: Option<String>,
    description: Option<String>,
    bad_text: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    VozId,
    Name,
    Description,
    Other,
}

/// Parse a corpus document into entries, in document order.
///
/// Malformed XML is fatal. Entries with a missing or non-numeric id (or
/// other per-entry defects) are reported in [`ParsedCorpus::errors`] and
/// skipped.
pub fn parse_corpus(bytes: &[u8]) -> Result<ParsedCorpus, IngestError> {
    let source = std::str::from_utf8(bytes).map_err(|e| IngestError::Encoding {
        offset: e.valid_up_to(),
    })?;
    let mut reader = Reader::from_str(source);

    let mut corpus = ParsedCorpus::default();
    let mut seen_root = false;
    let mut depth = 0usize;
    let mut entry: Option<PendingEntry> = None;
    let mut field: Option<(Field, usize)> = None;
    let mut voz_count = 0usize;
    let mut seen_ids = std::collections::HashSet::new();

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| xml_error(source, reader.error_position() as usize, e))?;
        match event {
            Event::Start(start) => {
                let name = local_name(&start);
                if !seen_root {
                    check_root(&name)?;
                    seen_root = true;
                } else if depth == 1 && name == "voz" {
                    voz_count += 1;
                    entry = Some(PendingEntry {
                        subcategory: subcategory_attr(&start, source, pos)?,
                        ..Default::default()
                    });
                } else if depth == 2 && entry.is_some() {
                    let f = match name.as_str() {
                        "vozId" => Field::VozId,
                        "nombre" => Field::Name,
                        "descripcion" => Field::Description,
                        _ => Field::Other,
                    };
                    field = Some((f, depth + 1));
                }
                depth += 1;
            }
            Event::Empty(start) => {
                let name = local_name(&start);
                if !seen_root {
                    check_root(&name)?;
                    seen_root = true;
                    // `<voces/>`: empty corpus, nothing more to read
                } else if depth == 1 && name == "voz" {
                    voz_count += 1;
                    corpus.errors.push(EntryError {
                        position: voz_count,
                        voz_id: None,
                        message: "empty <voz> element".into(),
                    });
                }
            }
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                if matches!(field, Some((_, d)) if d == depth + 1) {
                    field = None;
                }
                if depth == 1 {
                    if let Some(pending) = entry.take() {
                        match finish_entry(pending) {
                            Ok(e) if !seen_ids.insert(e.voz_id) => {
                                corpus.errors.push(EntryError {
                                    position: voz_count,
                                    voz_id: Some(e.voz_id),
                                    message: format!("duplicate vozId {}", e.voz_id),
                                })
                            }
                            Ok(e) => corpus.entries.push(e),
                            Err((voz_id, message)) => corpus.errors.push(EntryError {
                                position: voz_count,
                                voz_id,
                                message,
                            }),
                        }
                    }
                }
            }
            Event::Text(text) => {
                if let (Some((f, d)), Some(pending)) = (field, entry.as_mut()) {
                    if d == depth {
                        match text.unescape() {
                            Ok(t) => append_field(pending, f, &t),
                            Err(e) => {
                                pending.bad_text.get_or_insert_with(|| e.to_string());
                            }
                        }
                    }
                }
            }
            Event::CData(data) => {
                if let (Some((f, d)), Some(pending)) = (field, entry.as_mut()) {
                    if d == depth {
                        let raw = String::from_utf8_lossy(&data.into_inner()).into_owned();
                        append_field(pending, f, &raw);
                    }
                }
            }
            Event::Eof => {
                if depth > 0 {
                    let (line, column) = line_column(source, source.len());
                    return Err(IngestError::Xml {
                        line,
                        column,
                        message: format!("unexpected end of document with {depth} unclosed element(s)"),
                    });
                }
                break;
            }
            _ => {}
        }
    }
    if !seen_root {
        return Err(IngestError::MissingRoot);
    }
    Ok(corpus)
}

fn check_root(name: &str) -> Result<(), IngestError> {
    if name == "voces" {
        Ok(())
    } else {
        Err(IngestError::UnexpectedRoot {
            found: name.to_string(),
        })
    }
}

fn local_name(start: &BytesStart<'_>) -> String {
    String::from_utf8_lossy(start.local_name().as_ref()).into_owned()
}

fn subcategory_attr(
    start: &BytesStart<'_>,
    source: &str,
    pos: usize,
) -> Result<Option<String>, IngestError> {
    for attr in start.attributes() {
        let attr = attr.map_err(|e| xml_error(source, pos, e.into()))?;
        // the published sample spells it both ways
        let key = attr.key.local_name();
        if key.as_ref() == b"subcategoriaId" || key.as_ref() == b"subcategorialId" {
            let value = attr
                .unescape_value()
                .map_err(|e| xml_error(source, pos, e))?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

fn append_field(pending: &mut PendingEntry, field: Field, text: &str) {
    let slot = match field {
        Field::VozId => &mut pending.voz_id,
        Field::Name => &mut pending.name,
        Field::Description => &mut pending.description,
        Field::Other => return,
    };
    slot.get_or_insert_with(String::new).push_str(text);
}

fn finish_entry(pending: PendingEntry) -> Result<SourceEntry, (Option<u64>, String)> {
    let raw_id = pending
        .voz_id
        .ok_or((None, "missing <vozId>".to_string()))?;
    let voz_id = parse_positive(&raw_id).ok_or((None, format!("non-numeric vozId {raw_id:?}")))?;
    if let Some(err) = pending.bad_text {
        return Err((Some(voz_id), format!("undecodable text: {err}")));
    }
    let subcategory_id = match pending.subcategory {
        Some(s) => parse_positive(&s)
            .ok_or((Some(voz_id), format!("non-numeric subcategoriaId {s:?}")))?,
        None => return Err((Some(voz_id), "missing subcategoriaId attribute".into())),
    };
    let name = pending
        .name
        .map(|n| n.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|n| !n.is_empty())
        .ok_or((Some(voz_id), "missing or empty <nombre>".to_string()))?;
    Ok(SourceEntry {
        voz_id,
        subcategory_id,
        name,
        raw_description: pending.description.unwrap_or_default(),
    })
}

fn parse_positive(s: &str) -> Option<u64> {
    let t = s.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    t.parse().ok().filter(|&n| n > 0)
}

fn xml_error(source: &str, byte: usize, err: quick_xml::Error) -> IngestError {
    let (line, column) = line_column(source, byte);
    IngestError::Xml {
        line,
        column,
        message: err.to_string(),
    }
}

/// 1-based line and column (in characters) of a byte offset.
pub(crate) fn line_column(source: &str, byte: usize) -> (usize, usize) {
    let mut end = byte.min(source.len());
    while !source.is_char_boundary(end) {
        end -= 1;
    }
    let before = &source[..end];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    (line, char_len(&before[line_start..]) + 1)
}

/// Result of stripping inline markers from one piece of text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Markers {
    pub text: String,
    pub refs: Vec<MarkerRef>,
    pub lints: Vec<String>,
}

/// Replace every `$$$term%%digits$$$` marker with its term.
///
/// The term is any non-empty run free of `%%` and `$$$`; the digits are
/// optional. An opening `$$$` that does not complete a marker is kept as
/// literal text and reported in [`Markers::lints`].
pub fn extract_markers(raw: &str) -> Markers {
    let mut out = Markers {
        text: String::with_capacity(raw.len()),
        ..Default::default()
    };
    let mut out_chars = 0usize;
    let mut rest = raw;
    while let Some(i) = rest.find(OPEN) {
        let literal = &rest[..i];
        out.text.push_str(literal);
        out_chars += char_len(literal);
        let body = &rest[i + OPEN.len()..];
        match split_marker(body) {
            Some((term, digits, consumed)) => {
                let target_id = if digits.is_empty() {
                    None
                } else {
                    match parse_positive(digits) {
                        Some(id) if !digits.starts_with('0') => Some(id),
                        _ => {
                            out.lints.push(format!(
                                "marker {term:?} carries unusable id {digits:?}; treated as absent"
                            ));
                            None
                        }
                    }
                };
                let len = char_len(term);
                out.refs.push(MarkerRef {
                    surface_term: term.to_string(),
                    target_id,
                    char_span: Span::new(out_chars, out_chars + len),
                });
                out.text.push_str(term);
                out_chars += len;
                rest = &body[consumed..];
            }
            None => {
                out.lints.push(format!(
                    "unterminated marker at character {out_chars}; kept as literal text"
                ));
                out.text.push_str(OPEN);
                out_chars += OPEN.len();
                rest = body;
            }
        }
    }
    out.text.push_str(rest);
    out
}

/// Split `term%%digits$$$...` into (term, digits, bytes consumed).
fn split_marker(body: &str) -> Option<(&str, &str, usize)> {
    let sep = body.find(SEP)?;
    if body.find(OPEN).is_some_and(|close| close < sep) {
        return None;
    }
    let term = &body[..sep];
    if term.is_empty() {
        return None;
    }
    let after = &body[sep + SEP.len()..];
    let digits_len = after.bytes().take_while(u8::is_ascii_digit).count();
    if !after[digits_len..].starts_with(OPEN) {
        return None;
    }
    let consumed = sep + SEP.len() + digits_len + OPEN.len();
    Some((term, &after[..digits_len], consumed))
}

/// A description reduced to marker-free, tag-free prose.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreparedText {
    /// Paragraphs joined by `\n`.
    pub text: String,
    pub paragraphs: Vec<Span>,
    pub refs: Vec<MarkerRef>,
    pub lints: Vec<String>,
}

fn tag_pattern() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"<\s*/?\s*([A-Za-z][A-Za-z0-9]*)[^<>]*>").unwrap())
}

/// Strip HTML tags (paragraph-level tags become paragraph breaks), collapse
/// whitespace, and extract markers paragraph by paragraph.
pub fn prepare_description(decoded: &str) -> PreparedText {
    let composed: String = decoded.nfc().collect();
    let mut pieces: Vec<String> = vec![String::new()];
    let mut last = 0;
    for caps in tag_pattern().captures_iter(&composed) {
        let whole = caps.get(0).unwrap();
        pieces.last_mut().unwrap().push_str(&composed[last..whole.start()]);
        let tag = caps[1].to_ascii_lowercase();
        if matches!(tag.as_str(), "p" | "br" | "div" | "li") {
            pieces.push(String::new());
        }
        last = whole.end();
    }
    pieces.last_mut().unwrap().push_str(&composed[last..]);

    let mut out = PreparedText::default();
    let mut offset = 0usize;
    for piece in pieces {
        let collapsed = piece.split_whitespace().collect::<Vec<_>>().join(" ");
        if collapsed.is_empty() {
            continue;
        }
        let markers = extract_markers(&collapsed);
        if !out.text.is_empty() {
            out.text.push('\n');
            offset += 1;
        }
        let len = char_len(&markers.text);
        out.paragraphs.push(Span::new(offset, offset + len));
        out.refs.extend(markers.refs.into_iter().map(|mut r| {
            r.char_span = r.char_span.shift(offset);
            r
        }));
        out.lints.extend(markers.lints);
        out.text.push_str(&markers.text);
        offset += len;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::slice_chars;

    #[test]
    fn parses_sample_entry() {
        let xml = r#"<voces><voz subcategoriaId="38"><vozId> 98 </vozId><nombre> Abd al-Malik ibn Hudayl ibn Razin </nombre><descripcion>&lt;p&gt;Segundo soberano&lt;/P&gt;</descripcion></voz></voces>"#;
        let corpus = parse_corpus(xml.as_bytes()).unwrap();
        assert_eq!(corpus.entries.len(), 1);
        let e = &corpus.entries[0];
        assert_eq!(e.voz_id, 98);
        assert_eq!(e.subcategory_id, 38);
        assert_eq!(e.name, "Abd al-Malik ibn Hudayl ibn Razin");
        assert_eq!(e.raw_description, "<p>Segundo soberano</P>");
    }

    #[test]
    fn empty_corpus() {
        assert!(parse_corpus(b"<voces></voces>").unwrap().entries.is_empty());
        assert!(parse_corpus(b"<voces/>").unwrap().entries.is_empty());
    }

    #[test]
    fn keeps_document_order() {
        let xml = r#"<voces>
          <voz subcategoriaId="38"><vozId>98</vozId><nombre>A</nombre><descripcion/></voz>
          <voz subcategorialId="38"><vozId>99</vozId><nombre>B</nombre><descripcion/></voz>
        </voces>"#;
        let ids: Vec<_> = parse_corpus(xml.as_bytes())
            .unwrap()
            .entries
            .iter()
            .map(|e| e.voz_id)
            .collect();
        assert_eq!(ids, vec![98, 99]);
    }

    #[test]
    fn entity_decoding_happens_once() {
        let xml = r#"<voces><voz subcategoriaId="1"><vozId>1</vozId><nombre>X</nombre><descripcion>&amp;lt;p&amp;gt;</descripcion></voz></voces>"#;
        let corpus = parse_corpus(xml.as_bytes()).unwrap();
        assert_eq!(corpus.entries[0].raw_description, "&lt;p&gt;");
    }

    #[test]
    fn bad_entries_are_skipped_and_reported() {
        let xml = r#"<voces>
          <voz subcategoriaId="1"><vozId>1</vozId><nombre>Uno</nombre></voz>
          <voz subcategoriaId="1"><vozId>abc</vozId><nombre>Dos</nombre></voz>
          <voz subcategoriaId="1"><nombre>Tres</nombre></voz>
          <voz subcategoriaId="1"><vozId>1</vozId><nombre>Again</nombre></voz>
          <voz subcategoriaId="1"><vozId>4</vozId><nombre>Cuatro</nombre></voz>
        </voces>"#;
        let corpus = parse_corpus(xml.as_bytes()).unwrap();
        let ids: Vec<_> = corpus.entries.iter().map(|e| e.voz_id).collect();
        assert_eq!(ids, vec![1, 4]);
        assert_eq!(corpus.errors.len(), 3);
        assert_eq!(corpus.errors[0].position, 2);
        assert!(corpus.errors[2].message.contains("duplicate"));
    }

    #[test]
    fn truncated_document_is_fatal() {
        for doc in ["<voces><voz>", "<voces>", "<voces><voz><vozId>1</vozId></voz>"] {
            assert!(
                matches!(parse_corpus(doc.as_bytes()), Err(IngestError::Xml { .. })),
                "{doc}"
            );
        }
    }

    #[test]
    fn malformed_xml_reports_position() {
        let err = parse_corpus(b"<voces>\n  <voz>\n</voces>").unwrap_err();
        match err {
            IngestError::Xml { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_corpus(b"<root/>"),
            Err(IngestError::UnexpectedRoot { .. })
        ));
        assert!(matches!(
            parse_corpus(&[b'<', 0xff, b'>']),
            Err(IngestError::Encoding { offset: 1 })
        ));
    }

    #[test]
    fn marker_with_empty_id() {
        let m = extract_markers("Segundo soberano de la $$$taifa%%$$$ de Albarracín");
        assert_eq!(m.text, "Segundo soberano de la taifa de Albarracín");
        assert_eq!(
            m.refs,
            vec![MarkerRef {
                surface_term: "taifa".into(),
                target_id: None,
                char_span: Span::new(23, 28),
            }]
        );
        assert!(m.lints.is_empty());
    }

    #[test]
    fn marker_with_numeric_id() {
        let m = extract_markers("$$$yemeníes%%13105$$$");
        assert_eq!(m.text, "yemeníes");
        assert_eq!(m.refs[0].target_id, Some(13105));
        assert_eq!(m.refs[0].char_span, Span::new(0, 8));
    }

    #[test]
    fn marker_free_text_is_identity() {
        let m = extract_markers("no markers here");
        assert_eq!(m.text, "no markers here");
        assert!(m.refs.is_empty());
    }

    #[test]
    fn truncated_marker_is_literal() {
        let m = extract_markers("los $$$almorávides%%79 y $$$Sahla%%$$$ fin");
        assert_eq!(m.text, "los $$$almorávides%%79 y Sahla fin");
        assert_eq!(m.refs.len(), 1);
        assert_eq!(slice_chars(&m.text, m.refs[0].char_span), "Sahla");
        assert_eq!(m.lints.len(), 1);
    }

    #[test]
    fn description_paragraphs_and_tags() {
        let p = prepare_description("<p>Uno   $$$dos%%7$$$.\n tres</P><p></p><p>Cuatro</p>");
        assert_eq!(p.text, "Uno dos. tres\nCuatro");
        assert_eq!(p.paragraphs, vec![Span::new(0, 13), Span::new(14, 20)]);
        assert_eq!(p.refs[0].target_id, Some(7));
        assert_eq!(slice_chars(&p.text, p.refs[0].char_span), "dos");
    }
}
