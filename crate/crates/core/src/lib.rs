//! Core of the conditor topic-map compiler.
//!
//! The pipeline reads a weakly structured `<voces>` corpus ([`ingest`]),
//! cleans and segments each description ([`normalize`]), runs the rule-driven
//! entity detectors ([`extract`]), assembles a topic map with occurrences and
//! associations ([`topicmap`]), and serializes it as XTM-DITA ([`emit`]), as
//! an on-disk store ([`store`]) and as an inverted index ([`index`]).

pub mod emit;
pub mod extract;
pub mod index;
pub mod ingest;
pub mod normalize;
pub mod store;
pub mod text;
pub mod topicmap;

pub use text::Span;

/// A non-fatal diagnostic attached to a topic (or to the corpus as a whole).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Lint {
    pub topic: Option<u64>,
    pub message: String,
}

impl Lint {
    pub fn new(topic: Option<u64>, message: impl Into<String>) -> Self {
        Lint {
            topic,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Lint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.topic {
            Some(id) => write!(f, "[{id}] {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}
