//! Semantic enrichment: rule-driven detection of dates, roles, places,
//! persons, events and instruments in entry bodies.
//!
//! Each rule in a [`RuleSet`] is backed by a [`Detector`] strategy chosen by
//! name from a [`DetectorRegistry`]. Detection runs sentence by sentence;
//! overlapping candidates are resolved by (priority, span length, rule id)
//! and surviving date spans are bound to the nearest role and place.

mod detectors;
mod registry;
mod rules;

use std::collections::BTreeMap;
use std::str::FromStr;

pub use detectors::{AliasPersonDetector, LocativePlaceDetector, MarkerPlaceDetector, PatternDetector};
pub use registry::{Detection, Detector, DetectorFactory, DetectorRegistry, SentenceView};
pub use rules::{parse_rules, FactField, Lexicons, Rule, RuleError, RuleSet, RuleSpec, DEFAULT_RULES};

use crate::ingest::{MarkerRef, SourceEntry};
use crate::normalize::{tokenize_str, AliasTable, CleanText};
use crate::text::{char_len, slice_chars, Span};
use crate::Lint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityKind {
    Date,
    Role,
    Place,
    Person,
    Event,
    Instrument,
}

impl EntityKind {
    pub const ALL: [EntityKind; 6] = [
        EntityKind::Date,
        EntityKind::Role,
        EntityKind::Place,
        EntityKind::Person,
        EntityKind::Event,
        EntityKind::Instrument,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Date => "Date",
            EntityKind::Role => "Role",
            EntityKind::Place => "Place",
            EntityKind::Person => "Person",
            EntityKind::Event => "Event",
            EntityKind::Instrument => "Instrument",
        }
    }
}

impl FromStr for EntityKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        EntityKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

/// Calendar components read from a date expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialDate {
    pub day: Option<u8>,
    pub month: Option<u8>,
    pub year: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpanDetail {
    None,
    Date(PartialDate),
    /// The span names (or points at) this topic.
    Topic(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub kind: EntityKind,
    pub char_span: Span,
    /// Surface text of the span.
    pub value: String,
    pub rule_id: String,
    pub detail: SpanDetail,
}

/// A dated fact about an entry, as rendered in `<date>` elements.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DateFact {
    pub role: String,
    pub location: Option<String>,
    pub day: Option<u8>,
    pub month: Option<u8>,
    pub year: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EnrichedEntry {
    pub topic_id: u64,
    /// Surviving spans ordered by position.
    pub spans: Vec<EntitySpan>,
    pub date_facts: Vec<DateFact>,
    pub lints: Vec<Lint>,
}

impl EnrichedEntry {
    pub fn spans_of(&self, kind: EntityKind) -> impl Iterator<Item = &EntitySpan> {
        self.spans.iter().filter(move |s| s.kind == kind)
    }
}

/// Corpus-wide knowledge the detectors may consult.
#[derive(Debug, Clone, Default)]
pub struct CorpusContext {
    pub aliases: AliasTable,
    subcategories: BTreeMap<u64, u64>,
}

impl CorpusContext {
    pub fn new(aliases: AliasTable, subcategories: impl IntoIterator<Item = (u64, u64)>) -> Self {
        CorpusContext {
            aliases,
            subcategories: subcategories.into_iter().collect(),
        }
    }

    /// Build from entries using their merged titles.
    pub fn from_entries(entries: &[SourceEntry]) -> Self {
        let titles: Vec<_> = entries
            .iter()
            .map(|e| (e.voz_id, crate::normalize::merge_title_name(&e.name)))
            .collect();
        let aliases = AliasTable::build(titles.iter().map(|(id, t)| (*id, t)));
        Self::new(aliases, entries.iter().map(|e| (e.voz_id, e.subcategory_id)))
    }

    pub fn subcategory(&self, topic: u64) -> Option<u64> {
        self.subcategories.get(&topic).copied()
    }
}

/// A detection tagged with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub span: EntitySpan,
    pub priority: i64,
}

/// Keep a maximal set of non-overlapping candidates, preferring higher
/// priority, then longer spans, then the lexically smaller rule id.
pub fn resolve_overlaps(mut candidates: Vec<Candidate>) -> Vec<EntitySpan> {
    candidates.sort_by(|a, b| {
        b.priority
            .cmp(&a.priority)
            .then_with(|| b.span.char_span.len().cmp(&a.span.char_span.len()))
            .then_with(|| a.span.rule_id.cmp(&b.span.rule_id))
            .then_with(|| a.span.char_span.cmp(&b.span.char_span))
            .then_with(|| a.span.detail.cmp(&b.span.detail))
    });
    let mut kept: Vec<EntitySpan> = Vec::new();
    for c in candidates {
        if c.span.char_span.is_empty() || kept.iter().any(|k| k.char_span.overlaps(&c.span.char_span)) {
            continue;
        }
        kept.push(c.span);
    }
    kept.sort_by(|a, b| a.char_span.cmp(&b.char_span).then_with(|| a.rule_id.cmp(&b.rule_id)));
    kept
}

/// Run every rule over one sentence of `text`.
fn sentence_candidates(
    rules: &RuleSet,
    text: &str,
    sentence: Span,
    refs: &[MarkerRef],
    corpus: &CorpusContext,
    lints: &mut Vec<String>,
) -> Vec<Candidate> {
    let sentence_text = slice_chars(text, sentence);
    let tokens = tokenize_str(sentence_text);
    let local_refs: Vec<MarkerRef> = refs
        .iter()
        .filter(|r| sentence.contains(&r.char_span))
        .map(|r| MarkerRef {
            char_span: Span::new(r.char_span.start - sentence.start, r.char_span.end - sentence.start),
            ..r.clone()
        })
        .collect();
    let view = SentenceView {
        text: sentence_text,
        offset: sentence.start,
        tokens: &tokens,
        refs: &local_refs,
    };
    let mut out = Vec::new();
    for rule in rules.rules() {
        for d in rule.detector.detect(&view, corpus, lints) {
            if d.span.is_empty() || d.span.end > char_len(sentence_text) {
                continue;
            }
            out.push(Candidate {
                priority: rule.spec.priority,
                span: EntitySpan {
                    kind: rule.spec.kind,
                    value: slice_chars(sentence_text, d.span).to_string(),
                    char_span: d.span.shift(sentence.start),
                    rule_id: rule.spec.rule_id.clone(),
                    detail: d.detail,
                },
            });
        }
    }
    out
}

/// Clause of `sentence` containing position `at`: clauses end at `;` or `:`.
fn clause_of(chars: &[char], sentence: Span, at: usize) -> Span {
    let mut start = sentence.start;
    for i in sentence.start..sentence.end.min(chars.len()) {
        if matches!(chars[i], ';' | ':') {
            if i < at {
                start = i + 1;
            } else {
                return Span::new(start, i);
            }
        }
    }
    Span::new(start, sentence.end)
}

/// Turn the date spans of one sentence into facts. A date needs a role
/// before it in the same clause; the place is the nearest preceding one in
/// the clause, else the nearest following one.
fn bind_dates(
    chars: &[char],
    sentence: Span,
    spans: &[EntitySpan],
    topic: u64,
    lints: &mut Vec<Lint>,
) -> Vec<DateFact> {
    let mut facts = Vec::new();
    for date in spans.iter().filter(|s| s.kind == EntityKind::Date && sentence.contains(&s.char_span)) {
        let SpanDetail::Date(parts) = date.detail else {
            continue;
        };
        let clause = clause_of(chars, sentence, date.char_span.start);
        let in_clause = |kind: EntityKind| {
            spans
                .iter()
                .filter(move |s| s.kind == kind && clause.contains(&s.char_span))
        };
        let role = in_clause(EntityKind::Role)
            .filter(|r| r.char_span.end <= date.char_span.start)
            .max_by_key(|r| r.char_span.end);
        let Some(role) = role else {
            lints.push(Lint::new(
                Some(topic),
                format!("date {:?} has no role in its clause; skipped", date.value),
            ));
            continue;
        };
        let place = in_clause(EntityKind::Place)
            .filter(|p| p.char_span.end <= date.char_span.start)
            .max_by_key(|p| p.char_span.end)
            .or_else(|| {
                in_clause(EntityKind::Place)
                    .filter(|p| p.char_span.start >= date.char_span.end)
                    .min_by_key(|p| p.char_span.start)
            });
        facts.push(DateFact {
            role: role.value.to_lowercase(),
            location: place.map(|p| p.value.clone()),
            day: parts.day,
            month: parts.month,
            year: parts.year,
        });
    }
    facts
}

/// Interpret one entry body: detect, resolve overlaps, bind dates.
pub fn interpret_entry(entry: &SourceEntry, clean: &CleanText, rules: &RuleSet, corpus: &CorpusContext) -> EnrichedEntry {
    let topic = entry.voz_id;
    let mut notes = Vec::new();
    let mut candidates = Vec::new();
    for &sentence in &clean.sentences {
        candidates.extend(sentence_candidates(rules, &clean.text, sentence, &clean.refs, corpus, &mut notes));
    }
    let spans = resolve_overlaps(candidates);
    let chars: Vec<char> = clean.text.chars().collect();
    let mut lints: Vec<Lint> = notes.into_iter().map(|n| Lint::new(Some(topic), n)).collect();
    let mut date_facts = Vec::new();
    for &sentence in &clean.sentences {
        date_facts.extend(bind_dates(&chars, sentence, &spans, topic, &mut lints));
    }
    EnrichedEntry {
        topic_id: topic,
        spans,
        date_facts,
        lints,
    }
}

/// Resolved spans of a standalone sentence.
pub fn detect_spans(rules: &RuleSet, sentence: &str, refs: &[MarkerRef], corpus: &CorpusContext) -> Vec<EntitySpan> {
    let mut notes = Vec::new();
    let whole = Span::new(0, char_len(sentence));
    resolve_overlaps(sentence_candidates(rules, sentence, whole, refs, corpus, &mut notes))
}

fn detect_kind(
    rules: &RuleSet,
    kind: EntityKind,
    sentence: &str,
    refs: &[MarkerRef],
    corpus: &CorpusContext,
) -> Vec<EntitySpan> {
    let mut notes = Vec::new();
    let whole = Span::new(0, char_len(sentence));
    let candidates = sentence_candidates(rules, sentence, whole, refs, corpus, &mut notes)
        .into_iter()
        .filter(|c| c.span.kind == kind)
        .collect();
    resolve_overlaps(candidates)
}

/// Date facts of a standalone sentence, using all rules for role and place context.
pub fn detect_dates(rules: &RuleSet, sentence: &str, refs: &[MarkerRef], corpus: &CorpusContext) -> Vec<DateFact> {
    let spans = detect_spans(rules, sentence, refs, corpus);
    let chars: Vec<char> = sentence.chars().collect();
    bind_dates(&chars, Span::new(0, chars.len()), &spans, 0, &mut Vec::new())
}

pub fn detect_roles(rules: &RuleSet, sentence: &str) -> Vec<EntitySpan> {
    detect_kind(rules, EntityKind::Role, sentence, &[], &CorpusContext::default())
}

pub fn detect_places(rules: &RuleSet, sentence: &str, refs: &[MarkerRef], corpus: &CorpusContext) -> Vec<EntitySpan> {
    detect_kind(rules, EntityKind::Place, sentence, refs, corpus)
}

pub fn detect_persons(rules: &RuleSet, sentence: &str, corpus: &CorpusContext) -> Vec<EntitySpan> {
    detect_kind(rules, EntityKind::Person, sentence, &[], corpus)
}

#[cfg(test)]
mod tests;
