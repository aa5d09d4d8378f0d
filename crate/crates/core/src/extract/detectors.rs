//! Built-in detector strategies.

use std::collections::BTreeSet;

use regex::{Captures, Regex};

use super::registry::{Detection, Detector, SentenceView};
use super::rules::{FactField, Lexicons, RuleError, RuleSpec};
use super::{CorpusContext, EntityKind, PartialDate, SpanDetail};
use crate::normalize::fold;
use crate::text::{CharMap, Span};

fn invalid(spec: &RuleSpec, message: impl Into<String>) -> RuleError {
    RuleError::Invalid {
        rule_id: spec.rule_id.clone(),
        message: message.into(),
    }
}

fn lexicon<'a>(spec: &RuleSpec, lexicons: &'a Lexicons, key: &str, default: &str) -> Result<&'a [String], RuleError> {
    let name = spec.option(key).unwrap_or(default);
    lexicons
        .get(name)
        .map(Vec::as_slice)
        .ok_or_else(|| invalid(spec, format!("option {key}: unknown lexicon {name:?}")))
}

fn folded_set(terms: &[String]) -> BTreeSet<String> {
    terms.iter().map(|t| fold(t)).collect()
}

/// Trim whitespace off a byte range of `text`.
fn trimmed(text: &str, start: usize, end: usize) -> (usize, usize) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        (start, start)
    } else {
        (start + lead, end - trail)
    }
}

/// Regular-expression rule. For `Date` rules the named captures map onto
/// day, month and year; a match with several year captures yields one date
/// per year.
#[derive(Debug)]
pub struct PatternDetector {
    kind: EntityKind,
    regex: Regex,
    captures: Vec<(String, FactField)>,
    /// folded month names, January first
    months: Vec<String>,
}

impl PatternDetector {
    pub fn from_spec(spec: &RuleSpec, lexicons: &Lexicons) -> Result<Box<dyn Detector>, RuleError> {
        let pattern = spec
            .pattern
            .as_deref()
            .ok_or_else(|| invalid(spec, "pattern detector needs a `pattern` line"))?;
        let regex = Regex::new(pattern).map_err(|e| RuleError::Pattern {
            rule_id: spec.rule_id.clone(),
            line: spec.line,
            message: e.to_string(),
        })?;
        let mut months = Vec::new();
        if spec.kind == EntityKind::Date {
            if !spec.captures.iter().any(|(_, f)| *f == FactField::Year) {
                return Err(invalid(spec, "date rules need a capture mapped to `year`"));
            }
            if spec.captures.iter().any(|(_, f)| *f == FactField::Month) {
                let names = lexicon(spec, lexicons, "months", "months")?;
                if names.len() != 12 {
                    return Err(invalid(spec, "month lexicon must list exactly twelve names"));
                }
                months = names.iter().map(|m| fold(m)).collect();
            }
        }
        Ok(Box::new(PatternDetector {
            kind: spec.kind,
            regex,
            captures: spec.captures.clone(),
            months,
        }))
    }

    fn month_number(&self, raw: &str) -> Option<u8> {
        if raw.bytes().all(|b| b.is_ascii_digit()) {
            return raw.parse().ok();
        }
        let folded = fold(raw.trim());
        self.months.iter().position(|m| *m == folded).map(|i| i as u8 + 1)
    }

    fn value_span(&self, caps: &Captures<'_>) -> (usize, usize) {
        self.captures
            .iter()
            .filter(|(_, f)| *f == FactField::Value)
            .find_map(|(name, _)| caps.name(name))
            .map(|m| (m.start(), m.end()))
            .unwrap_or_else(|| {
                let whole = caps.get(0).unwrap();
                (whole.start(), whole.end())
            })
    }

    fn date_detections(&self, text: &str, caps: &Captures<'_>, map: &CharMap, lints: &mut Vec<String>) -> Vec<Detection> {
        let field = |want: FactField| {
            self.captures
                .iter()
                .filter(move |(_, f)| *f == want)
                .filter_map(|(name, _)| caps.name(name))
        };
        let years: Vec<_> = field(FactField::Year).collect();
        let day = field(FactField::Day).next();
        let month = field(FactField::Month).next();
        let whole = caps.get(0).unwrap().as_str();

        let parse_year = |s: &str| s.parse::<u32>().ok().filter(|y| (1..3000).contains(y));
        if years.len() > 1 {
            let mut out = Vec::new();
            for m in years {
                match parse_year(m.as_str()) {
                    Some(year) => out.push(Detection {
                        span: map.span_of_bytes(m.start(), m.end()),
                        detail: SpanDetail::Date(PartialDate { day: None, month: None, year }),
                    }),
                    None => lints.push(format!("year {:?} out of range in {whole:?}", m.as_str())),
                }
            }
            return out;
        }
        let Some(year_match) = years.first() else {
            return Vec::new();
        };
        let Some(year) = parse_year(year_match.as_str()) else {
            lints.push(format!("year {:?} out of range in {whole:?}", year_match.as_str()));
            return Vec::new();
        };
        let month = match month {
            Some(m) => match self.month_number(m.as_str()).filter(|n| (1..=12).contains(n)) {
                Some(n) => Some(n),
                None => {
                    lints.push(format!("unknown month {:?} in {whole:?}", m.as_str()));
                    return Vec::new();
                }
            },
            None => None,
        };
        let day = match day {
            Some(d) => match d.as_str().parse::<u8>().ok().filter(|n| (1..=31).contains(n)) {
                Some(n) if month.is_some() => Some(n),
                _ => {
                    lints.push(format!("unusable day {:?} in {whole:?}", d.as_str()));
                    return Vec::new();
                }
            },
            None => None,
        };
        let (start, end) = self.value_span(caps);
        let (start, end) = trimmed(text, start, end);
        vec![Detection {
            span: map.span_of_bytes(start, end),
            detail: SpanDetail::Date(PartialDate { day, month, year }),
        }]
    }
}

impl Detector for PatternDetector {
    fn detect(&self, s: &SentenceView<'_>, _: &CorpusContext, lints: &mut Vec<String>) -> Vec<Detection> {
        let map = CharMap::new(s.text);
        let mut out = Vec::new();
        for caps in self.regex.captures_iter(s.text) {
            if self.kind == EntityKind::Date {
                out.extend(self.date_detections(s.text, &caps, &map, lints));
            } else {
                let (start, end) = self.value_span(&caps);
                let (start, end) = trimmed(s.text, start, end);
                if start < end {
                    out.push(Detection::plain(map.span_of_bytes(start, end)));
                }
            }
        }
        out
    }
}

/// Capitalized words right after a locative preposition (optionally with an
/// article in between), in sentences that carry a date or a role word.
#[derive(Debug)]
pub struct LocativePlaceDetector {
    prepositions: BTreeSet<String>,
    articles: BTreeSet<String>,
    context: BTreeSet<String>,
}

impl LocativePlaceDetector {
    pub fn from_spec(spec: &RuleSpec, lexicons: &Lexicons) -> Result<Box<dyn Detector>, RuleError> {
        Ok(Box::new(LocativePlaceDetector {
            prepositions: folded_set(lexicon(spec, lexicons, "prepositions", "locatives")?),
            articles: folded_set(lexicon(spec, lexicons, "articles", "articles")?),
            context: folded_set(lexicon(spec, lexicons, "context", "roles")?),
        }))
    }
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

impl Detector for LocativePlaceDetector {
    fn detect(&self, s: &SentenceView<'_>, _: &CorpusContext, _: &mut Vec<String>) -> Vec<Detection> {
        let tokens = s.tokens;
        let in_context = tokens.iter().any(|t| {
            t.surface.chars().all(|c| c.is_ascii_digit()) || self.context.contains(&t.normalized)
        });
        if !in_context {
            return Vec::new();
        }
        let chars: Vec<char> = s.text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i + 1 < tokens.len() {
            if !self.prepositions.contains(&tokens[i].normalized) {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            if self.articles.contains(&tokens[j].normalized) && j + 1 < tokens.len() {
                j += 1;
            }
            if j == 0 || !is_capitalized(&tokens[j].surface) {
                i += 1;
                continue;
            }
            let start = tokens[j].char_span.start;
            let mut end = tokens[j].char_span.end;
            let mut k = j;
            while k + 1 < tokens.len() {
                let next = &tokens[k + 1];
                let joint = chars.get(end).copied();
                if next.char_span.start == end + 1
                    && matches!(joint, Some('-') | Some('\''))
                    && is_capitalized(&next.surface)
                {
                    end = next.char_span.end;
                    k += 1;
                } else {
                    break;
                }
            }
            out.push(Detection::plain(Span::new(start, end)));
            i = k + 1;
        }
        out
    }
}

/// Marker terms whose target entry belongs to a place-like subcategory.
#[derive(Debug)]
pub struct MarkerPlaceDetector {
    subcategories: BTreeSet<u64>,
}

fn subcategory_set(spec: &RuleSpec, terms: &[String]) -> Result<BTreeSet<u64>, RuleError> {
    terms
        .iter()
        .map(|t| {
            t.parse::<u64>()
                .map_err(|_| invalid(spec, format!("subcategory {t:?} is not an integer")))
        })
        .collect()
}

impl MarkerPlaceDetector {
    pub fn from_spec(spec: &RuleSpec, lexicons: &Lexicons) -> Result<Box<dyn Detector>, RuleError> {
        let terms = lexicon(spec, lexicons, "subcategories", "place_subcategories")?;
        Ok(Box::new(MarkerPlaceDetector {
            subcategories: subcategory_set(spec, terms)?,
        }))
    }
}

impl Detector for MarkerPlaceDetector {
    fn detect(&self, s: &SentenceView<'_>, corpus: &CorpusContext, _: &mut Vec<String>) -> Vec<Detection> {
        s.refs
            .iter()
            .filter_map(|r| {
                let target = match r.target_id {
                    Some(id) => id,
                    None => match corpus.aliases.lookup(&r.surface_term) {
                        [only] => *only,
                        _ => return None,
                    },
                };
                let sub = corpus.subcategory(target)?;
                self.subcategories.contains(&sub).then(|| Detection {
                    span: r.char_span,
                    detail: SpanDetail::Topic(target),
                })
            })
            .collect()
    }
}

/// Word-by-word longest match against the corpus title table.
#[derive(Debug)]
pub struct AliasPersonDetector {
    exclude: BTreeSet<u64>,
}

impl AliasPersonDetector {
    pub fn from_spec(spec: &RuleSpec, lexicons: &Lexicons) -> Result<Box<dyn Detector>, RuleError> {
        let exclude = match spec.option("exclude") {
            Some(_) => subcategory_set(spec, lexicon(spec, lexicons, "exclude", "")?)?,
            None => BTreeSet::new(),
        };
        Ok(Box::new(AliasPersonDetector { exclude }))
    }
}

impl Detector for AliasPersonDetector {
    fn detect(&self, s: &SentenceView<'_>, corpus: &CorpusContext, lints: &mut Vec<String>) -> Vec<Detection> {
        let words: Vec<String> = s.tokens.iter().map(|t| t.normalized.clone()).collect();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < words.len() {
            let Some((len, topics)) = corpus.aliases.longest_at(&words, pos) else {
                pos += 1;
                continue;
            };
            let people: Vec<u64> = topics
                .iter()
                .copied()
                .filter(|t| corpus.subcategory(*t).map_or(true, |sub| !self.exclude.contains(&sub)))
                .collect();
            let Some(&first) = people.first() else {
                pos += 1;
                continue;
            };
            if people.len() > 1 {
                lints.push(format!("ambiguous name resolves to topics {people:?}; using {first}"));
            }
            let span = Span::new(s.tokens[pos].char_span.start, s.tokens[pos + len - 1].char_span.end);
            out.push(Detection {
                span,
                detail: SpanDetail::Topic(first),
            });
            pos += len;
        }
        out
    }
}
