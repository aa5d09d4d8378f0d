//! Detector strategies, registered by name and selected per rule from the
//! rules file (`detector <name>`).

use std::collections::BTreeMap;
use std::fmt;

use super::detectors::{AliasPersonDetector, LocativePlaceDetector, MarkerPlaceDetector, PatternDetector};
use super::rules::{Lexicons, RuleError, RuleSpec};
use super::{CorpusContext, SpanDetail};
use crate::ingest::MarkerRef;
use crate::normalize::Token;
use crate::text::Span;

/// One sentence as seen by a detector. All spans are sentence-local.
#[derive(Debug)]
pub struct SentenceView<'a> {
    pub text: &'a str,
    /// Character offset of the sentence inside the entry body.
    pub offset: usize,
    pub tokens: &'a [Token],
    pub refs: &'a [MarkerRef],
}

/// A raw match reported by a detector, before conflict resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Detection {
    pub span: Span,
    pub detail: SpanDetail,
}

impl Detection {
    pub fn plain(span: Span) -> Self {
        Detection {
            span,
            detail: SpanDetail::None,
        }
    }
}

pub trait Detector: Send + Sync + fmt::Debug {
    /// Report candidate spans in one sentence. Problems that do not stop
    /// detection go to `lints`.
    fn detect(
        &self,
        sentence: &SentenceView<'_>,
        corpus: &CorpusContext,
        lints: &mut Vec<String>,
    ) -> Vec<Detection>;
}

pub type DetectorFactory = fn(&RuleSpec, &Lexicons) -> Result<Box<dyn Detector>, RuleError>;

#[derive(Clone, Default)]
pub struct DetectorRegistry {
    factories: BTreeMap<String, DetectorFactory>,
}

impl fmt::Debug for DetectorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl DetectorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut registry = Self::new();
        registry.register("pattern", PatternDetector::from_spec);
        registry.register("locative-place", LocativePlaceDetector::from_spec);
        registry.register("marker-place", MarkerPlaceDetector::from_spec);
        registry.register("alias-person", AliasPersonDetector::from_spec);
        registry
    }

    /// Add or replace a strategy.
    pub fn register(&mut self, name: &str, factory: DetectorFactory) {
        self.factories.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn create(&self, spec: &RuleSpec, lexicons: &Lexicons) -> Result<Box<dyn Detector>, RuleError> {
        let factory = self
            .factories
            .get(&spec.detector)
            .ok_or_else(|| RuleError::UnknownDetector {
                rule_id: spec.rule_id.clone(),
                name: spec.detector.clone(),
            })?;
        factory(spec, lexicons)
    }
}
