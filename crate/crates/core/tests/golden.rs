//! The two-entry golden corpus pushed through every module.

use std::collections::{BTreeMap, BTreeSet};

use conditor_core::emit::{emit_xtm_dita, parse_xtm_dita};
use conditor_core::extract::{interpret_entry, CorpusContext, EntityKind, RuleSet};
use conditor_core::index::{IndexSnapshot, Query};
use conditor_core::ingest::{parse_corpus, prepare_description};
use conditor_core::normalize::{segment, WordList};
use conditor_core::store::{persist, PersistenceDescriptor, Store};
use conditor_core::topicmap::{assemble, build_topic, crossing_search, CrossingInput, TopicMap};

const GOLDEN: &str = include_str!("../../../testdata/golden_corpus.xml");

fn golden_map() -> TopicMap {
    let entries = parse_corpus(GOLDEN.as_bytes()).unwrap().entries;
    let cx = CorpusContext::from_entries(&entries);
    let rules = RuleSet::default_rules();
    let mut cleans = Vec::new();
    let mut enriched = Vec::new();
    for e in &entries {
        let p = prepare_description(&e.raw_description);
        let clean = segment(&p.text, &p.paragraphs, p.refs);
        enriched.push(interpret_entry(e, &clean, &rules, &cx));
        cleans.push(clean);
    }
    let roles: Vec<Vec<_>> = enriched.iter().map(|e| e.spans_of(EntityKind::Role).cloned().collect()).collect();
    let inputs: Vec<CrossingInput<'_>> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| CrossingInput {
            topic: e.voz_id,
            body: &cleans[i].text,
            roles: &roles[i],
            refs: &cleans[i].refs,
        })
        .collect();
    let associations = crossing_search(&inputs, &cx.aliases);
    let topics = entries.iter().enumerate().map(|(i, e)| build_topic(e, &cleans[i], &enriched[i])).collect();
    assemble(topics, associations).unwrap().0
}

/// Independent tokenizer: alphanumeric runs, lowercased, common Spanish
/// accents stripped.
fn scan_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            w.to_lowercase()
                .chars()
                .map(|c| match c {
                    'á' => 'a',
                    'é' => 'e',
                    'í' => 'i',
                    'ó' => 'o',
                    'ú' | 'ü' => 'u',
                    c => c,
                })
                .collect()
        })
        .collect()
}

#[test]
fn golden_map_has_two_valid_topics() {
    let map = golden_map();
    assert_eq!(map.topics.keys().copied().collect::<Vec<_>>(), vec![98, 99]);
    map.validate().unwrap();
    assert!(map.unresolved_refs.contains(&(99, "Sulayman".into())));
}

#[test]
fn golden_emit_round_trip() {
    let map = golden_map();
    let bytes = emit_xtm_dita(&map);
    let (parsed, lints) = parse_xtm_dita(&bytes).unwrap();
    assert_eq!(parsed, map);
    assert!(lints.is_empty());
}

#[test]
fn golden_index_membership_and_lengths() {
    let map = golden_map();
    let snap = IndexSnapshot::build(map.topics.values(), &WordList::default_stopwords());
    let mut scanned: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for t in map.topics.values() {
        let mut fields = vec![t.base_name.as_str()];
        for v in &t.variants {
            if !fields.contains(&v.as_str()) {
                fields.push(v);
            }
        }
        fields.push(&t.body);
        scanned.insert(t.id, fields.iter().flat_map(|f| scan_tokens(f)).collect());
    }
    for term in ["albarracin", "taifa", "taifas", "emir", "sahla"] {
        let expected: BTreeSet<u64> = scanned.iter().filter(|(_, toks)| toks.iter().any(|t| t == term)).map(|(id, _)| *id).collect();
        let got: BTreeSet<u64> = snap.posting(term).iter().map(|p| p.topic_id).collect();
        assert_eq!(got, expected, "postings for {term}");
    }
    assert!(snap.posting("albarracin").iter().any(|p| p.topic_id == 98));
    assert!(snap.posting("taifa").iter().any(|p| p.topic_id == 98));
    for (id, toks) in &scanned {
        assert_eq!(snap.doc_length(*id), Some(toks.len()), "length of {id}");
    }
    let hits = snap.search(&Query::parse("Albarracín").unwrap(), 10).unwrap();
    assert_eq!(hits[0].topic_id, 98);
}

#[test]
fn golden_store_round_trip_and_projection() {
    let map = golden_map();
    let dir = tempfile::tempdir().unwrap();
    let full = PersistenceDescriptor::default_descriptor();
    let store = persist(&map, &full, &dir.path().join("full"), None).unwrap();
    assert_eq!(Store::open(store.path()).unwrap().load().unwrap(), map);
    assert_eq!(store.get_topic(98).unwrap().unwrap(), map.topics[&98]);
    assert!(store.get_topic(424242).unwrap().is_none());

    let no_body = persist(&map, &full.without("Topic", "body"), &dir.path().join("nobody"), None).unwrap();
    let t = no_body.get_topic(98).unwrap().unwrap();
    assert!(t.body.is_empty());
    assert_eq!(t.base_name, map.topics[&98].base_name);
    assert_eq!(t.date_facts, map.topics[&98].date_facts);
}
