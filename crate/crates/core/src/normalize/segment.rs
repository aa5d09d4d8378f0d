use std::sync::OnceLock;

use regex::Regex;

use super::WordList;
use crate::ingest::MarkerRef;
use crate::text::Span;

/// Marker-free, HTML-free prose with its sentence and paragraph structure.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanText {
    pub text: String,
    pub sentences: Vec<Span>,
    pub paragraphs: Vec<Span>,
    pub refs: Vec<MarkerRef>,
}

impl CleanText {
    /// Character range of the first sentence, or the whole text if none.
    pub fn first_sentence(&self) -> Span {
        self.sentences
            .first()
            .copied()
            .unwrap_or(Span::new(0, 0))
    }
}

/// Sentence splitter configured with an abbreviation list.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: WordList,
}

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::new(WordList::default_abbreviations())
    }
}

const CLOSERS: &[char] = &[')', ']', '"', '\'', '»', '”', '’'];
const OPENERS: &[char] = &['(', '[', '"', '«', '“', '¿', '¡', '—', '-'];

fn roman_numeral() -> &'static Regex {
    static ROMAN: OnceLock<Regex> = OnceLock::new();
    ROMAN.get_or_init(|| {
        Regex::new(r"^m{0,3}(cm|cd|d?c{0,3})(xc|xl|l?x{0,3})(ix|iv|v?i{0,3})$").unwrap()
    })
}

impl Segmenter {
    pub fn new(abbreviations: WordList) -> Self {
        Segmenter { abbreviations }
    }

    /// Split `text` into sentences, never crossing a paragraph boundary.
    pub fn segment(&self, text: &str, paragraphs: &[Span], refs: Vec<MarkerRef>) -> CleanText {
        let chars: Vec<char> = text.chars().collect();
        let mut sentences = Vec::new();
        for para in paragraphs {
            let end = para.end.min(chars.len());
            self.split_paragraph(&chars, para.start.min(end), end, &mut sentences);
        }
        CleanText {
            text: text.to_string(),
            sentences,
            paragraphs: paragraphs.to_vec(),
            refs,
        }
    }

    fn split_paragraph(&self, chars: &[char], start: usize, end: usize, out: &mut Vec<Span>) {
        let skip_ws = |mut i: usize| {
            while i < end && chars[i].is_whitespace() {
                i += 1;
            }
            i
        };
        let mut sentence_start = skip_ws(start);
        let mut i = sentence_start;
        while i < end {
            let c = chars[i];
            if matches!(c, '.' | '!' | '?') {
                let mut k = i + 1;
                while k < end && CLOSERS.contains(&chars[k]) {
                    k += 1;
                }
                let boundary = if k == end {
                    true
                } else if chars[k].is_whitespace() {
                    let m = skip_ws(k);
                    m < end && starts_sentence(chars, m, end)
                } else {
                    false
                };
                if boundary && !(c == '.' && self.is_abbreviation(chars, sentence_start, i)) {
                    out.push(Span::new(sentence_start, k));
                    sentence_start = skip_ws(k);
                    i = sentence_start;
                    continue;
                }
            }
            i += 1;
        }
        if sentence_start < end {
            let mut last = end;
            while last > sentence_start && chars[last - 1].is_whitespace() {
                last -= 1;
            }
            if last > sentence_start {
                out.push(Span::new(sentence_start, last));
            }
        }
    }

    /// Is the word right before the period at `dot` an abbreviation?
    fn is_abbreviation(&self, chars: &[char], floor: usize, dot: usize) -> bool {
        let mut w = dot;
        while w > floor && chars[w - 1].is_alphabetic() {
            w -= 1;
        }
        if w == dot {
            return false;
        }
        let word: String = chars[w..dot].iter().collect();
        word.chars().count() == 1
            || self.abbreviations.contains(&word)
            || (word.chars().all(|c| c.is_lowercase()) && roman_numeral().is_match(&word))
    }
}

fn starts_sentence(chars: &[char], m: usize, end: usize) -> bool {
    if chars[m].is_uppercase() {
        return true;
    }
    OPENERS.contains(&chars[m]) && m + 1 < end && chars[m + 1].is_uppercase()
}

/// Segment with the shipped abbreviation list.
pub fn segment(text: &str, paragraphs: &[Span], refs: Vec<MarkerRef>) -> CleanText {
    Segmenter::default().segment(text, paragraphs, refs)
}
