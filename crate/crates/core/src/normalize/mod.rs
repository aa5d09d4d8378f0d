//! Full-text reprocessing: sentence segmentation, tokenization with
//! diacritic folding, and title-name merging.

mod names;
mod segment;
mod token;

pub use names::{merge_title_name, AliasHit, AliasTable, TitleName, CONNECTIVES};
pub use segment::{segment, CleanText, Segmenter};
pub use token::{fold, tokenize, tokenize_str, Token};

use std::collections::BTreeSet;

/// A one-entry-per-line word list with `#` comments.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordList {
    words: BTreeSet<String>,
}

impl WordList {
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|line| line.split('#').next().unwrap_or("").trim())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        WordList { words }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        WordList {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn default_abbreviations() -> Self {
        Self::parse(include_str!("../../resources/abbreviations.txt"))
    }

    pub fn default_stopwords() -> Self {
        Self::parse(include_str!("../../resources/stopwords.txt"))
    }

    /// Case-insensitive membership.
    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_list_comments_and_case() {
        let list = WordList::parse("# header\nSr\n\n  dña  # trailing\n");
        assert_eq!(list.len(), 2);
        assert!(list.contains("sr"));
        assert!(list.contains("DÑA"));
    }

    #[test]
    fn shipped_lists_load() {
        assert!(WordList::default_abbreviations().contains("h"));
        assert!(WordList::default_stopwords().contains("de"));
    }
}
