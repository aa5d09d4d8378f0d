use std::collections::{BTreeMap, HashMap};

use super::token::{fold, tokenize_str};

/// Name particles that may be left out when an entry title is mentioned.
pub const CONNECTIVES: &[&str] = &["ibn", "al", "de", "la", "ben"];

/// A merged entry title.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TitleName {
    pub canonical: String,
    pub particles: Vec<String>,
    pub aliases: Vec<String>,
}

impl TitleName {
    /// Normalized token sequences under which this title is recognised in
    /// running text: the full title, plus the title without connective
    /// particles when at least two tokens remain.
    pub fn match_keys(&self) -> Vec<Vec<String>> {
        let mut keys: Vec<Vec<String>> = Vec::new();
        for alias in &self.aliases {
            let full: Vec<String> = tokenize_str(alias).into_iter().map(|t| t.normalized).collect();
            if full.is_empty() {
                continue;
            }
            let bare: Vec<String> = full
                .iter()
                .filter(|t| !CONNECTIVES.contains(&t.as_str()))
                .cloned()
                .collect();
            if bare.len() >= 2 && bare.len() < full.len() && !keys.contains(&bare) {
                keys.push(bare);
            }
            if !keys.contains(&full) {
                keys.push(full);
            }
        }
        keys.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        keys
    }
}

/// Split a title into its name particles. No reordering is attempted.
pub fn merge_title_name(title: &str) -> TitleName {
    let particles: Vec<String> = title.split_whitespace().map(str::to_string).collect();
    let canonical = particles.join(" ");
    TitleName {
        aliases: vec![canonical.clone()],
        canonical,
        particles,
    }
}

/// One whole-token alias occurrence inside a token stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AliasHit {
    pub topic: u64,
    pub start: usize,
    pub len: usize,
}

/// Corpus-wide lookup from normalized token sequences to topic ids.
#[derive(Debug, Clone, Default)]
pub struct AliasTable {
    /// key -> topics carrying it (sorted, deduplicated)
    keys: BTreeMap<Vec<String>, Vec<u64>>,
    /// first token -> keys starting with it, longest first
    by_first: HashMap<String, Vec<Vec<String>>>,
    canonical: BTreeMap<u64, String>,
}

impl AliasTable {
    pub fn build<'a, I>(titles: I) -> Self
    where
        I: IntoIterator<Item = (u64, &'a TitleName)>,
    {
        let mut table = AliasTable::default();
        for (id, title) in titles {
            table.canonical.insert(id, title.canonical.clone());
            for key in title.match_keys() {
                let ids = table.keys.entry(key).or_default();
                if let Err(pos) = ids.binary_search(&id) {
                    ids.insert(pos, id);
                }
            }
        }
        for key in table.keys.keys() {
            table
                .by_first
                .entry(key[0].clone())
                .or_default()
                .push(key.clone());
        }
        for keys in table.by_first.values_mut() {
            keys.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        }
        table
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn canonical(&self, topic: u64) -> Option<&str> {
        self.canonical.get(&topic).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&[String], &[u64])> {
        self.keys.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    fn matches_at(key: &[String], tokens: &[String], pos: usize) -> bool {
        tokens.len() >= pos + key.len() && tokens[pos..pos + key.len()] == *key
    }

    /// Longest alias starting at token `pos`, with every topic it names.
    pub fn longest_at(&self, tokens: &[String], pos: usize) -> Option<(usize, &[u64])> {
        let candidates = self.by_first.get(tokens.get(pos)?)?;
        candidates
            .iter()
            .find(|key| Self::matches_at(key, tokens, pos))
            .map(|key| (key.len(), self.keys[key].as_slice()))
    }

    /// Every whole-token alias occurrence, overlapping ones included, ordered
    /// by (start, topic, len).
    pub fn occurrences(&self, tokens: &[String]) -> Vec<AliasHit> {
        let mut hits = Vec::new();
        for pos in 0..tokens.len() {
            let Some(candidates) = self.by_first.get(&tokens[pos]) else {
                continue;
            };
            for key in candidates {
                if Self::matches_at(key, tokens, pos) {
                    for &topic in &self.keys[key] {
                        hits.push(AliasHit {
                            topic,
                            start: pos,
                            len: key.len(),
                        });
                    }
                }
            }
        }
        hits.sort();
        hits
    }

    /// Topics whose alias equals `term` exactly (after folding).
    pub fn lookup(&self, term: &str) -> &[u64] {
        let key: Vec<String> = tokenize_str(term).into_iter().map(|t| fold(&t.surface)).collect();
        self.keys.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }
}
