//! The topic-map object model and the crossing-search that links entries
//! mentioning one another.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::extract::{DateFact, EnrichedEntry, EntitySpan};
use crate::ingest::{MarkerRef, SourceEntry};
use crate::normalize::{merge_title_name, tokenize_str, AliasTable, CleanText};
use crate::text::{slice_chars, Span};
use crate::Lint;

pub const ROLE_MENTION: &str = "mención";
pub const ROLE_REFERENCE: &str = "referencia";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occurrence {
    pub role_spec: String,
    pub resource_data: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub id: u64,
    pub base_name: String,
    pub variants: Vec<String>,
    pub instance_of: u64,
    pub shortdesc: String,
    pub body: String,
    pub date_facts: Vec<DateFact>,
    pub occurrences: Vec<Occurrence>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Directionality {
    OneWay,
    TwoWay,
}

impl Directionality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Directionality::OneWay => "one-way",
            Directionality::TwoWay => "two-way",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "one-way" => Some(Directionality::OneWay),
            "two-way" => Some(Directionality::TwoWay),
            _ => None,
        }
    }
}

impl fmt::Display for Directionality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Topic(u64),
    Unresolved(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Association {
    pub source: u64,
    pub target: Endpoint,
    pub role: String,
    pub directionality: Directionality,
}

impl Association {
    pub fn target_id(&self) -> Option<u64> {
        match self.target {
            Endpoint::Topic(id) => Some(id),
            Endpoint::Unresolved(_) => None,
        }
    }

    /// The topic reachable from `from` along this association, if any.
    pub fn traverse(&self, from: u64) -> Option<u64> {
        let target = self.target_id()?;
        if self.source == from {
            Some(target)
        } else if target == from && self.directionality == Directionality::TwoWay {
            Some(self.source)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TopicMap {
    pub topics: BTreeMap<u64, Topic>,
    /// Only resolved endpoints; sorted, unique.
    pub associations: Vec<Association>,
    /// (source topic, surface term) pairs that did not resolve; sorted, unique.
    pub unresolved_refs: Vec<(u64, String)>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopicMapError {
    #[error("duplicate topic id {0}")]
    DuplicateTopic(u64),
}

impl TopicMap {
    /// Associations visible from `id`: all it is the source of, plus two-way
    /// ones where it is the target.
    pub fn adjacent(&self, id: u64) -> impl Iterator<Item = &Association> {
        self.associations.iter().filter(move |a| a.traverse(id).is_some())
    }

    /// Split back into assemble inputs; unresolved refs come back as
    /// unresolved reference associations.
    pub fn into_parts(self) -> (Vec<Topic>, Vec<Association>) {
        let mut associations = self.associations;
        associations.extend(self.unresolved_refs.into_iter().map(|(source, term)| Association {
            source,
            target: Endpoint::Unresolved(term),
            role: ROLE_REFERENCE.to_string(),
            directionality: Directionality::OneWay,
        }));
        (self.topics.into_values().collect(), associations)
    }

    /// Check every structural invariant, describing the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for (id, topic) in &self.topics {
            if *id != topic.id || *id == 0 {
                return Err(format!("topic keyed {id} has id {}", topic.id));
            }
            if topic.base_name.trim().is_empty() {
                return Err(format!("topic {id} has an empty base name"));
            }
            if !topic.body.starts_with(&topic.shortdesc) {
                return Err(format!("topic {id}: shortdesc is not a prefix of body"));
            }
            for occ in &topic.occurrences {
                if occ.role_spec.is_empty() || occ.resource_data.is_empty() {
                    return Err(format!("topic {id} has an empty occurrence field"));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for a in &self.associations {
            let Some(target) = a.target_id() else {
                return Err(format!("association from {} has an unresolved target", a.source));
            };
            if !self.topics.contains_key(&a.source) || !self.topics.contains_key(&target) {
                return Err(format!("association {} -> {target} has a dangling endpoint", a.source));
            }
            if a.source == target {
                return Err(format!("self association on {target}"));
            }
            if a.directionality == Directionality::TwoWay && a.source > target {
                return Err(format!("two-way association {} -> {target} not canonically ordered", a.source));
            }
            if !seen.insert(a) {
                return Err(format!("duplicate association {} -> {target}", a.source));
            }
        }
        Ok(())
    }
}

/// Create the topic object for one entry.
pub fn build_topic(entry: &SourceEntry, clean: &CleanText, enriched: &EnrichedEntry) -> Topic {
    let title = merge_title_name(&entry.name);
    let shortdesc = match clean.sentences.first() {
        Some(first) => slice_chars(&clean.text, Span::new(0, first.end)).to_string(),
        None => String::new(),
    };
    let mut occurrences: Vec<Occurrence> = Vec::new();
    for fact in &enriched.date_facts {
        if let Some(place) = &fact.location {
            let occ = Occurrence {
                role_spec: fact.role.clone(),
                resource_data: place.clone(),
            };
            if !occ.role_spec.is_empty() && !occurrences.contains(&occ) {
                occurrences.push(occ);
            }
        }
    }
    Topic {
        id: entry.voz_id,
        base_name: title.canonical,
        variants: title.aliases,
        instance_of: entry.subcategory_id,
        shortdesc,
        body: clean.text.clone(),
        date_facts: enriched.date_facts.clone(),
        occurrences,
    }
}

/// What the crossing-search needs to know about one topic.
#[derive(Debug, Clone, Copy)]
pub struct CrossingInput<'a> {
    pub topic: u64,
    pub body: &'a str,
    /// Role spans of the body, used to label associations.
    pub roles: &'a [EntitySpan],
    pub refs: &'a [MarkerRef],
}

/// Role nearest to `mention`; ties go to the earlier role.
fn nearest_role(roles: &[EntitySpan], mention: Span) -> String {
    roles
        .iter()
        .min_by_key(|r| (r.char_span.distance(&mention), r.char_span.start))
        .map(|r| r.value.to_lowercase())
        .unwrap_or_else(|| ROLE_MENTION.to_string())
}

/// Find, for every ordered pair of topics, whether one's body mentions the
/// other's name, and turn mentions and marker references into associations.
pub fn crossing_search(inputs: &[CrossingInput<'_>], aliases: &AliasTable) -> Vec<Association> {
    // (source, target) -> role of the first mention
    let mut mentions: BTreeMap<(u64, u64), String> = BTreeMap::new();
    let mut references: BTreeSet<(u64, u64)> = BTreeSet::new();
    let mut unresolved: BTreeSet<(u64, String)> = BTreeSet::new();

    for input in inputs {
        let tokens = tokenize_str(input.body);
        let words: Vec<String> = tokens.iter().map(|t| t.normalized.clone()).collect();
        for hit in aliases.occurrences(&words) {
            if hit.topic == input.topic || mentions.contains_key(&(input.topic, hit.topic)) {
                continue;
            }
            let span = Span::new(
                tokens[hit.start].char_span.start,
                tokens[hit.start + hit.len - 1].char_span.end,
            );
            mentions.insert((input.topic, hit.topic), nearest_role(input.roles, span));
        }
        for r in input.refs {
            let targets: Vec<u64> = match r.target_id {
                Some(id) => vec![id],
                None => aliases.lookup(&r.surface_term).to_vec(),
            };
            let targets: Vec<u64> = targets.into_iter().filter(|t| *t != input.topic).collect();
            if targets.is_empty() {
                if r.target_id.is_none() {
                    unresolved.insert((input.topic, r.surface_term.clone()));
                }
                continue;
            }
            for t in targets {
                references.insert((input.topic, t));
            }
        }
    }

    let mut out = Vec::new();
    for (&(a, b), role) in &mentions {
        if mentions.contains_key(&(b, a)) {
            if a < b {
                out.push(two_way(a, b, role));
            }
        } else {
            out.push(one_way(a, Endpoint::Topic(b), role));
        }
    }
    for &(a, b) in &references {
        if references.contains(&(b, a)) {
            if a < b {
                out.push(two_way(a, b, ROLE_REFERENCE));
            }
        } else {
            out.push(one_way(a, Endpoint::Topic(b), ROLE_REFERENCE));
        }
    }
    for (a, term) in unresolved {
        out.push(one_way(a, Endpoint::Unresolved(term), ROLE_REFERENCE));
    }
    out.sort();
    out
}

fn one_way(source: u64, target: Endpoint, role: &str) -> Association {
    Association {
        source,
        target,
        role: role.to_string(),
        directionality: Directionality::OneWay,
    }
}

fn two_way(a: u64, b: u64, role: &str) -> Association {
    Association {
        source: a,
        target: Endpoint::Topic(b),
        role: role.to_string(),
        directionality: Directionality::TwoWay,
    }
}

/// Validate and normalize topics and associations into a map. Dangling and
/// unresolved targets move to `unresolved_refs` with a lint.
pub fn assemble(topics: Vec<Topic>, associations: Vec<Association>) -> Result<(TopicMap, Vec<Lint>), TopicMapError> {
    let mut map = TopicMap::default();
    for topic in topics {
        let id = topic.id;
        if map.topics.insert(id, topic).is_some() {
            return Err(TopicMapError::DuplicateTopic(id));
        }
    }
    let mut lints = Vec::new();
    let mut kept = BTreeSet::new();
    let mut unresolved = BTreeSet::new();
    for mut a in associations {
        if !map.topics.contains_key(&a.source) {
            lints.push(Lint::new(Some(a.source), "association from unknown topic dropped"));
            continue;
        }
        match a.target.clone() {
            Endpoint::Unresolved(term) => {
                unresolved.insert((a.source, term));
            }
            Endpoint::Topic(t) if !map.topics.contains_key(&t) => {
                lints.push(Lint::new(Some(a.source), format!("reference to missing topic {t}")));
                unresolved.insert((a.source, format!("#{t}")));
            }
            Endpoint::Topic(t) if t == a.source => {
                lints.push(Lint::new(Some(t), "self association dropped"));
            }
            Endpoint::Topic(t) => {
                if a.directionality == Directionality::TwoWay && a.source > t {
                    a.target = Endpoint::Topic(a.source);
                    a.source = t;
                }
                kept.insert(a);
            }
        }
    }
    map.associations = kept.into_iter().collect();
    map.unresolved_refs = unresolved.into_iter().collect();
    Ok((map, lints))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{interpret_entry, CorpusContext, EntityKind, RuleSet, SpanDetail};
    use crate::ingest::{parse_corpus, prepare_description};
    use crate::normalize::segment;

    const GOLDEN: &str = include_str!("../../../testdata/golden_corpus.xml");

    struct Built {
        entries: Vec<SourceEntry>,
        cleans: Vec<CleanText>,
        enriched: Vec<EnrichedEntry>,
        cx: CorpusContext,
    }

    fn build_golden() -> Built {
        let entries = parse_corpus(GOLDEN.as_bytes()).unwrap().entries;
        let cx = CorpusContext::from_entries(&entries);
        let rules = RuleSet::default_rules();
        let cleans: Vec<CleanText> = entries
            .iter()
            .map(|e| {
                let p = prepare_description(&e.raw_description);
                segment(&p.text, &p.paragraphs, p.refs)
            })
            .collect();
        let enriched = entries
            .iter()
            .zip(&cleans)
            .map(|(e, c)| interpret_entry(e, c, &rules, &cx))
            .collect();
        Built { entries, cleans, enriched, cx }
    }

    fn topic(id: u64, body: &str) -> Topic {
        Topic {
            id,
            base_name: format!("T{id}"),
            variants: vec![],
            instance_of: 1,
            shortdesc: String::new(),
            body: body.into(),
            date_facts: vec![],
            occurrences: vec![],
        }
    }

    #[test]
    fn golden_topic_98() {
        let b = build_golden();
        let t = build_topic(&b.entries[0], &b.cleans[0], &b.enriched[0]);
        assert_eq!(t.id, 98);
        assert_eq!(t.base_name, "Abd al-Malik ibn Hudayl ibn Razin");
        assert_eq!(t.variants, vec!["Abd al-Malik ibn Hudayl ibn Razin"]);
        assert_eq!(t.instance_of, 38);
        assert!(t.shortdesc.starts_with("Segundo soberano de la taifa de Albarracín"));
        assert!(t.shortdesc.ends_with("(Sable del Estado)."));
        assert!(t.body.starts_with(&t.shortdesc));
        assert!(t.occurrences.contains(&Occurrence {
            role_spec: "soberano".into(),
            resource_data: "Albarracín".into()
        }));
        let t99 = build_topic(&b.entries[1], &b.cleans[1], &b.enriched[1]);
        assert_eq!((t99.id, t99.base_name.as_str(), t99.instance_of), (99, "Abd al-Rahman I", 38));
    }

    #[test]
    fn one_sentence_body_is_its_own_shortdesc() {
        let entry = SourceEntry {
            voz_id: 3,
            subcategory_id: 2,
            name: "Zaragoza".into(),
            raw_description: "<p>Ciudad del Ebro.</p>".into(),
        };
        let p = prepare_description(&entry.raw_description);
        let clean = segment(&p.text, &p.paragraphs, p.refs);
        let t = build_topic(&entry, &clean, &EnrichedEntry::default());
        assert_eq!(t.shortdesc, t.body);
    }

    #[test]
    fn golden_pair_has_no_mutual_mentions() {
        let b = build_golden();
        let inputs: Vec<CrossingInput<'_>> = (0..2)
            .map(|i| CrossingInput {
                topic: b.entries[i].voz_id,
                body: &b.cleans[i].text,
                roles: &b.enriched[i].spans,
                refs: &b.cleans[i].refs,
            })
            .collect();
        let assocs = crossing_search(&inputs, &b.cx.aliases);
        // brute force: neither folded title occurs in the other folded body
        let fold_text = |s: &str| {
            let words: Vec<String> = tokenize_str(s).into_iter().map(|t| t.normalized).collect();
            format!(" {} ", words.join(" "))
        };
        assert!(!fold_text(&b.cleans[0].text).contains(&fold_text(&b.entries[1].name)));
        assert!(!fold_text(&b.cleans[1].text).contains(&fold_text(&b.entries[0].name)));
        assert!(assocs
            .iter()
            .all(|a| !(a.target_id() == Some(99) && a.source == 98) && !(a.target_id() == Some(98) && a.source == 99)));

        let topics = (0..2).map(|i| build_topic(&b.entries[i], &b.cleans[i], &b.enriched[i])).collect();
        let (map, lints) = assemble(topics, assocs).unwrap();
        assert_eq!(map.topics.len(), 2);
        assert!(map.unresolved_refs.contains(&(99, "Sulayman".to_string())));
        assert!(map.unresolved_refs.contains(&(98, "#79".to_string())));
        assert!(lints.iter().any(|l| l.message.contains("79")));
        map.validate().unwrap();
    }

    #[test]
    fn mutual_mentions_make_one_two_way() {
        let titles = [merge_title_name("Pedro Ruiz"), merge_title_name("Juan Gil")];
        let aliases = AliasTable::build([(7, &titles[0]), (3, &titles[1])]);
        let role = EntitySpan {
            kind: EntityKind::Role,
            char_span: Span::new(0, 3),
            value: "Rey".into(),
            rule_id: "r".into(),
            detail: SpanDetail::None,
        };
        let roles = [role];
        let inputs = [
            CrossingInput { topic: 7, body: "Rey junto a Juan Gil.", roles: &roles, refs: &[] },
            CrossingInput { topic: 3, body: "Amigo de Pedro Ruiz.", roles: &[], refs: &[] },
        ];
        let assocs = crossing_search(&inputs, &aliases);
        assert_eq!(
            assocs,
            vec![Association {
                source: 3,
                target: Endpoint::Topic(7),
                role: ROLE_MENTION.into(),
                directionality: Directionality::TwoWay
            }]
        );
        let one = crossing_search(&inputs[..1], &aliases);
        assert_eq!(one[0].role, "rey");
        assert_eq!(one[0].directionality, Directionality::OneWay);
    }

    #[test]
    fn assemble_edge_cases() {
        let (empty, _) = assemble(vec![], vec![]).unwrap();
        assert_eq!(empty, TopicMap::default());
        empty.validate().unwrap();

        let dangling = Association {
            source: 1,
            target: Endpoint::Topic(777),
            role: "x".into(),
            directionality: Directionality::OneWay,
        };
        let (map, lints) = assemble(vec![topic(1, "")], vec![dangling]).unwrap();
        assert!(map.associations.is_empty());
        assert_eq!(map.unresolved_refs, vec![(1, "#777".to_string())]);
        assert_eq!(lints.len(), 1);

        assert_eq!(
            assemble(vec![topic(1, ""), topic(1, "")], vec![]).unwrap_err(),
            TopicMapError::DuplicateTopic(1)
        );
    }

    #[test]
    fn assemble_is_idempotent_and_symmetric() {
        let a = |s, t, d| Association {
            source: s,
            target: Endpoint::Topic(t),
            role: "r".into(),
            directionality: d,
        };
        let assocs = vec![
            a(2, 1, Directionality::TwoWay),
            a(1, 2, Directionality::TwoWay),
            a(1, 3, Directionality::OneWay),
            a(1, 3, Directionality::OneWay),
            a(3, 9, Directionality::OneWay),
        ];
        let topics = vec![topic(1, ""), topic(2, ""), topic(3, "")];
        let (map, _) = assemble(topics, assocs).unwrap();
        assert_eq!(map.associations.len(), 2);
        assert_eq!(map.adjacent(2).count(), 1);
        assert_eq!(map.adjacent(1).count(), 2);
        assert_eq!(map.adjacent(3).count(), 0);
        let (topics, assocs) = map.clone().into_parts();
        let (again, _) = assemble(topics, assocs).unwrap();
        assert_eq!(again, map);
    }
}
