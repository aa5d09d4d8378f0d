//! Corpus bytes in, topic map and index out.

use conditor_core::extract::{interpret_entry, CorpusContext, EnrichedEntry, EntityKind, EntitySpan, RuleSet};
use conditor_core::index::IndexSnapshot;
use conditor_core::ingest::{parse_corpus, prepare_description, EntryError, IngestError};
use conditor_core::normalize::{segment, CleanText, WordList};
use conditor_core::topicmap::{assemble, build_topic, crossing_search, CrossingInput, Topic, TopicMap, TopicMapError};
use conditor_core::Lint;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    TopicMap(#[from] TopicMapError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug)]
pub struct Compiled {
    pub map: TopicMap,
    pub index: IndexSnapshot,
    pub entry_errors: Vec<EntryError>,
    pub lints: Vec<Lint>,
}

impl Compiled {
    pub fn fact_count(&self) -> usize {
        self.map.topics.values().map(|t| t.date_facts.len()).sum()
    }
}

struct Interpreted {
    clean: CleanText,
    roles: Vec<EntitySpan>,
    topic: Topic,
    lints: Vec<Lint>,
}

/// Run ingest through indexing. `threads == 0` lets the pool pick.
pub fn compile(corpus: &[u8], rules: &RuleSet, threads: usize) -> Result<Compiled, PipelineError> {
    let parsed = parse_corpus(corpus)?;
    let cx = CorpusContext::from_entries(&parsed.entries);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let interpreted: Vec<Interpreted> = pool.install(|| {
        parsed
            .entries
            .par_iter()
            .map(|entry| {
                let prepared = prepare_description(&entry.raw_description);
                let mut lints: Vec<Lint> = prepared.lints.into_iter().map(|m| Lint::new(Some(entry.voz_id), m)).collect();
                let clean = segment(&prepared.text, &prepared.paragraphs, prepared.refs);
                let enriched: EnrichedEntry = interpret_entry(entry, &clean, rules, &cx);
                lints.extend(enriched.lints.iter().cloned());
                let topic = build_topic(entry, &clean, &enriched);
                let roles = enriched.spans_of(EntityKind::Role).cloned().collect();
                Interpreted { clean, roles, topic, lints }
            })
            .collect()
    });
    tracing::debug!(entries = interpreted.len(), "entries interpreted");

    let inputs: Vec<CrossingInput<'_>> = interpreted
        .iter()
        .map(|i| CrossingInput {
            topic: i.topic.id,
            body: &i.clean.text,
            roles: &i.roles,
            refs: &i.clean.refs,
        })
        .collect();
    let associations = crossing_search(&inputs, &cx.aliases);

    let mut lints: Vec<Lint> = parsed
        .errors
        .iter()
        .map(|e| Lint::new(e.voz_id, format!("entry {} skipped: {}", e.position, e.message)))
        .collect();
    let mut topics = Vec::with_capacity(interpreted.len());
    for i in interpreted {
        lints.extend(i.lints);
        topics.push(i.topic);
    }
    let (map, assemble_lints) = assemble(topics, associations)?;
    lints.extend(assemble_lints);
    let index = IndexSnapshot::build(map.topics.values(), &WordList::default_stopwords());
    Ok(Compiled {
        map,
        index,
        entry_errors: parsed.errors,
        lints,
    })
}
