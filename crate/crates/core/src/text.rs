//! Character-indexed spans over Unicode text.
//!
//! All positions handed around the pipeline count Unicode scalar values,
//! never bytes. These helpers convert between the two.

use std::fmt;

/// Half-open interval `[start, end)` of character positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "inverted span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift(&self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }

    /// Character gap between two non-overlapping spans, zero if they touch or overlap.
    pub fn distance(&self, other: &Span) -> usize {
        if self.end <= other.start {
            other.start - self.end
        } else if other.end <= self.start {
            self.start - other.end
        } else {
            0
        }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Slice `s` by character span. Out-of-range ends are clamped.
pub fn slice_chars(s: &str, span: Span) -> &str {
    let map = CharMap::new(s);
    &s[map.byte_at(span.start)..map.byte_at(span.end)]
}

/// Byte offset table for one string, so repeated char/byte conversions stay cheap.
#[derive(Debug, Clone)]
pub struct CharMap {
    /// byte offset of every char, plus one trailing entry for `s.len()`
    offsets: Vec<usize>,
}

impl CharMap {
    pub fn new(s: &str) -> Self {
        let mut offsets: Vec<usize> = s.char_indices().map(|(b, _)| b).collect();
        offsets.push(s.len());
        CharMap { offsets }
    }

    pub fn char_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Byte offset of char position `pos` (clamped to the end).
    pub fn byte_at(&self, pos: usize) -> usize {
        self.offsets[pos.min(self.offsets.len() - 1)]
    }

    /// Char position of byte offset `byte`, which must sit on a char boundary.
    pub fn char_at(&self, byte: usize) -> usize {
        match self.offsets.binary_search(&byte) {
            Ok(i) => i,
            Err(i) => i,
        }
    }

    pub fn span_of_bytes(&self, start: usize, end: usize) -> Span {
        Span::new(self.char_at(start), self.char_at(end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_by_char_not_byte() {
        let s = "de Albarracín, entre";
        assert_eq!(slice_chars(s, Span::new(3, 13)), "Albarracín");
        let map = CharMap::new(s);
        assert_eq!(map.char_count(), 20);
        assert_eq!(map.char_at(map.byte_at(13)), 13);
    }

    #[test]
    fn distance_and_overlap() {
        let a = Span::new(0, 4);
        let b = Span::new(6, 9);
        assert_eq!(a.distance(&b), 2);
        assert_eq!(b.distance(&a), 2);
        assert!(!a.overlaps(&b));
        assert!(a.overlaps(&Span::new(3, 5)));
        assert!(!a.overlaps(&Span::new(4, 5)));
    }
}
