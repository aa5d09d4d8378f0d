//! Inverted index over topic names and bodies with TF-IDF ranking.
//!
//! score(q, d) = Σ_t tf(t, d) · ln(1 + N / df(t)) · sw(t) / √len(d), where
//! sw(t) is the stopword weight for stopwords and 1 otherwise.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::normalize::{fold, tokenize_str, WordList};
use crate::topicmap::Topic;

pub const DEFAULT_K: usize = 10;
pub const DEFAULT_STOPWORD_WEIGHT: f64 = 0.1;
pub const SNIPPET_RADIUS: usize = 8;

const MAGIC: &[u8; 8] = b"CNDINDEX";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Posting {
    pub topic_id: u64,
    /// Sorted token ordinals; tf is their count.
    pub positions: Vec<u32>,
}

impl Posting {
    pub fn tf(&self) -> usize {
        self.positions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSnapshot {
    doc_count: u64,
    postings: BTreeMap<String, Vec<Posting>>,
    /// Surface tokens of every document, in ordinal order.
    docs: BTreeMap<u64, Vec<String>>,
    stopwords: BTreeSet<String>,
    stopword_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Query {
    pub clauses: Vec<String>,
    pub mode: Mode,
    pub phrase: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub topic_id: u64,
    pub score: f64,
    pub snippet: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QueryError {
    #[error("empty query")]
    Empty,
    #[error("unterminated phrase")]
    UnterminatedPhrase,
    #[error("only one phrase per query")]
    MultiplePhrases,
    #[error("k must be positive")]
    ZeroK,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("not an index file")]
    Magic,
    #[error("unsupported index version {0}")]
    Version(u32),
    #[error("index checksum mismatch")]
    Checksum,
    #[error("truncated or malformed index: {0}")]
    Malformed(&'static str),
}

impl Query {
    /// Parse the query-string syntax: whitespace-separated terms, one
    /// `"quoted phrase"`, and the keyword `OR` to switch to any-term mode.
    pub fn parse(input: &str) -> Result<Query, QueryError> {
        let mut q = Query::default();
        let mut rest = input;
        let mut outside = String::new();
        while let Some(open) = rest.find('"') {
            outside.push_str(&rest[..open]);
            outside.push(' ');
            let after = &rest[open + 1..];
            let close = after.find('"').ok_or(QueryError::UnterminatedPhrase)?;
            if q.phrase.is_some() {
                return Err(QueryError::MultiplePhrases);
            }
            let terms: Vec<String> = tokenize_str(&after[..close]).into_iter().map(|t| t.normalized).collect();
            if !terms.is_empty() {
                q.phrase = Some(terms);
            }
            rest = &after[close + 1..];
        }
        outside.push_str(rest);
        for word in outside.split_whitespace() {
            if word == "OR" {
                q.mode = Mode::Or;
            } else {
                q.clauses.extend(tokenize_str(word).into_iter().map(|t| t.normalized));
            }
        }
        if q.clauses.is_empty() && q.phrase.is_none() {
            return Err(QueryError::Empty);
        }
        Ok(q)
    }

    /// Distinct scoring terms: clauses, then phrase terms, first occurrence wins.
    pub fn terms(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.clauses
            .iter()
            .chain(self.phrase.iter().flatten())
            .map(String::as_str)
            .filter(|t| seen.insert(*t))
            .collect()
    }
}

/// The indexed token stream of a topic: base name, then variants that differ
/// from it, then body.
pub fn topic_fields(topic: &Topic) -> Vec<&str> {
    let mut fields = vec![topic.base_name.as_str()];
    for v in &topic.variants {
        if !fields.contains(&v.as_str()) {
            fields.push(v);
        }
    }
    fields.push(&topic.body);
    fields
}

impl IndexSnapshot {
    pub fn build<'a, I>(topics: I, stopwords: &WordList) -> Self
    where
        I: IntoIterator<Item = &'a Topic>,
    {
        Self::build_with_weight(topics, stopwords, DEFAULT_STOPWORD_WEIGHT)
    }

    pub fn build_with_weight<'a, I>(topics: I, stopwords: &WordList, stopword_weight: f64) -> Self
    where
        I: IntoIterator<Item = &'a Topic>,
    {
        let mut snap = IndexSnapshot {
            doc_count: 0,
            postings: BTreeMap::new(),
            docs: BTreeMap::new(),
            stopwords: stopwords.iter().map(fold).collect(),
            stopword_weight,
        };
        let mut by_id: BTreeMap<u64, &Topic> = BTreeMap::new();
        for t in topics {
            by_id.insert(t.id, t);
        }
        for (&id, topic) in &by_id {
            let mut surface = Vec::new();
            for field in topic_fields(topic) {
                for token in tokenize_str(field) {
                    let ordinal = surface.len() as u32;
                    surface.push(token.surface);
                    let list = snap.postings.entry(token.normalized).or_default();
                    match list.last_mut() {
                        Some(p) if p.topic_id == id => p.positions.push(ordinal),
                        _ => list.push(Posting {
                            topic_id: id,
                            positions: vec![ordinal],
                        }),
                    }
                }
            }
            snap.docs.insert(id, surface);
        }
        snap.doc_count = by_id.len() as u64;
        snap
    }

    pub fn doc_count(&self) -> u64 {
        self.doc_count
    }

    pub fn postings(&self) -> &BTreeMap<String, Vec<Posting>> {
        &self.postings
    }

    pub fn posting(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn doc_length(&self, id: u64) -> Option<usize> {
        self.docs.get(&id).map(Vec::len)
    }

    pub fn doc_lengths(&self) -> impl Iterator<Item = (u64, usize)> + '_ {
        self.docs.iter().map(|(id, d)| (*id, d.len()))
    }

    pub fn is_stopword(&self, term: &str) -> bool {
        self.stopwords.contains(term)
    }

    pub fn stopword_weight(&self) -> f64 {
        self.stopword_weight
    }

    fn term_weight(&self, term: &str) -> f64 {
        let df = self.posting(term).len();
        if df == 0 {
            return 0.0;
        }
        let sw = if self.is_stopword(term) { self.stopword_weight } else { 1.0 };
        (1.0 + self.doc_count as f64 / df as f64).ln() * sw
    }

    fn tf(&self, term: &str, id: u64) -> Option<&Posting> {
        let list = self.posting(term);
        list.binary_search_by_key(&id, |p| p.topic_id).ok().map(|i| &list[i])
    }

    fn docs_with(&self, term: &str) -> BTreeSet<u64> {
        self.posting(term).iter().map(|p| p.topic_id).collect()
    }

    fn phrase_docs(&self, phrase: &[String]) -> BTreeSet<u64> {
        let Some(first) = phrase.first() else {
            return BTreeSet::new();
        };
        let mut out = BTreeSet::new();
        'docs: for p in self.posting(first) {
            let mut rest = Vec::with_capacity(phrase.len() - 1);
            for term in &phrase[1..] {
                match self.tf(term, p.topic_id) {
                    Some(posting) => rest.push(posting),
                    None => continue 'docs,
                }
            }
            let hit = p.positions.iter().any(|&start| {
                rest.iter()
                    .enumerate()
                    .all(|(i, posting)| posting.positions.binary_search(&(start + i as u32 + 1)).is_ok())
            });
            if hit {
                out.insert(p.topic_id);
            }
        }
        out
    }

    fn candidates(&self, q: &Query) -> BTreeSet<u64> {
        let mut set: Option<BTreeSet<u64>> = None;
        for term in &q.clauses {
            let docs = self.docs_with(term);
            set = Some(match (set, q.mode) {
                (None, _) => docs,
                (Some(s), Mode::And) => s.intersection(&docs).copied().collect(),
                (Some(s), Mode::Or) => s.union(&docs).copied().collect(),
            });
        }
        if let Some(phrase) = &q.phrase {
            let docs = self.phrase_docs(phrase);
            set = Some(match set {
                None => docs,
                Some(s) => s.intersection(&docs).copied().collect(),
            });
        }
        set.unwrap_or_default()
    }

    /// Ranked hits, best first, at most `k`.
    pub fn search(&self, q: &Query, k: usize) -> Result<Vec<ScoredHit>, QueryError> {
        if k == 0 {
            return Err(QueryError::ZeroK);
        }
        if q.clauses.is_empty() && q.phrase.as_ref().map_or(true, Vec::is_empty) {
            return Err(QueryError::Empty);
        }
        let terms = q.terms();
        let weights: Vec<f64> = terms.iter().map(|t| self.term_weight(t)).collect();
        let mut hits = Vec::new();
        for id in self.candidates(q) {
            let len = self.docs[&id].len() as f64;
            let mut score = 0.0;
            let mut best: Option<(f64, u32)> = None;
            for (term, w) in terms.iter().zip(&weights) {
                if let Some(p) = self.tf(term, id) {
                    let contribution = p.tf() as f64 * w;
                    score += contribution;
                    if best.map_or(true, |(b, _)| contribution > b) {
                        best = Some((contribution, p.positions[0]));
                    }
                }
            }
            let snippet = best.map(|(_, pos)| self.snippet(id, pos as usize)).unwrap_or_default();
            hits.push(ScoredHit {
                topic_id: id,
                score: score / len.sqrt(),
                snippet,
            });
        }
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.topic_id.cmp(&b.topic_id)));
        hits.truncate(k);
        Ok(hits)
    }

    pub fn snippet(&self, id: u64, pos: usize) -> String {
        let Some(tokens) = self.docs.get(&id) else {
            return String::new();
        };
        let start = pos.saturating_sub(SNIPPET_RADIUS);
        let end = (pos + SNIPPET_RADIUS + 1).min(tokens.len());
        tokens[start.min(end)..end].join(" ")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        out.extend_from_slice(&self.stopword_weight.to_le_bytes());
        put_u32(&mut out, self.stopwords.len() as u32);
        for w in &self.stopwords {
            put_str(&mut out, w);
        }
        out.extend_from_slice(&self.doc_count.to_le_bytes());
        put_u32(&mut out, self.docs.len() as u32);
        for (id, tokens) in &self.docs {
            out.extend_from_slice(&id.to_le_bytes());
            put_u32(&mut out, tokens.len() as u32);
            for t in tokens {
                put_str(&mut out, t);
            }
        }
        put_u32(&mut out, self.postings.len() as u32);
        for (term, list) in &self.postings {
            put_str(&mut out, term);
            put_u32(&mut out, list.len() as u32);
            for p in list {
                out.extend_from_slice(&p.topic_id.to_le_bytes());
                put_u32(&mut out, p.positions.len() as u32);
                for pos in &p.positions {
                    put_u32(&mut out, *pos);
                }
            }
        }
        let crc = crc32fast::hash(&out);
        put_u32(&mut out, crc);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() < MAGIC.len() + 8 || &bytes[..8] != MAGIC {
            return Err(DecodeError::Magic);
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        if crc32fast::hash(body) != u32::from_le_bytes(tail.try_into().unwrap()) {
            return Err(DecodeError::Checksum);
        }
        let mut r = ByteReader { buf: &body[8..] };
        let version = r.u32()?;
        if version != VERSION {
            return Err(DecodeError::Version(version));
        }
        let stopword_weight = f64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let mut stopwords = BTreeSet::new();
        for _ in 0..r.u32()? {
            stopwords.insert(r.string()?);
        }
        let doc_count = r.u64()?;
        let mut docs = BTreeMap::new();
        for _ in 0..r.u32()? {
            let id = r.u64()?;
            let n = r.u32()?;
            let tokens = (0..n).map(|_| r.string()).collect::<Result<Vec<_>, _>>()?;
            docs.insert(id, tokens);
        }
        let mut postings = BTreeMap::new();
        for _ in 0..r.u32()? {
            let term = r.string()?;
            let n = r.u32()?;
            let mut list = Vec::with_capacity(n as usize);
            for _ in 0..n {
                let topic_id = r.u64()?;
                let tf = r.u32()?;
                let positions = (0..tf).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
                list.push(Posting { topic_id, positions });
            }
            postings.insert(term, list);
        }
        if !r.buf.is_empty() {
            return Err(DecodeError::Malformed("trailing bytes"));
        }
        let snap = IndexSnapshot {
            doc_count,
            postings,
            docs,
            stopwords,
            stopword_weight,
        };
        snap.check().map_err(DecodeError::Malformed)?;
        Ok(snap)
    }

    /// Structural invariants: sorted unique postings, df ≤ N, and every
    /// document's tf sum equal to its length.
    pub fn check(&self) -> Result<(), &'static str> {
        let mut totals: BTreeMap<u64, usize> = BTreeMap::new();
        for list in self.postings.values() {
            if list.is_empty() || list.len() as u64 > self.doc_count {
                return Err("bad document frequency");
            }
            if list.windows(2).any(|w| w[0].topic_id >= w[1].topic_id) {
                return Err("unsorted posting list");
            }
            for p in list {
                if p.positions.is_empty() || p.positions.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("unsorted positions");
                }
                let Some(doc) = self.docs.get(&p.topic_id) else {
                    return Err("posting for unknown document");
                };
                if *p.positions.last().unwrap() as usize >= doc.len() {
                    return Err("position out of range");
                }
                *totals.entry(p.topic_id).or_default() += p.tf();
            }
        }
        for (id, doc) in &self.docs {
            if totals.get(id).copied().unwrap_or(0) != doc.len() {
                return Err("tf sum differs from document length");
            }
        }
        if self.docs.len() as u64 != self.doc_count {
            return Err("document count mismatch");
        }
        Ok(())
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct ByteReader<'a> {
    buf: &'a [u8],
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() < n {
            return Err(DecodeError::Malformed("truncated"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, DecodeError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| DecodeError::Malformed("invalid UTF-8"))
    }
}
