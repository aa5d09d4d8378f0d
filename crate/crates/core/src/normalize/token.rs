use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::text::Span;

/// A word unit of clean text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Lowercased, diacritics removed (except `ñ`).
    pub normalized: String,
    pub char_span: Span,
    pub ordinal: usize,
}

/// Lowercase and strip diacritics. `ñ` survives as its own letter.
pub fn fold(word: &str) -> String {
    let lower: String = word.nfc().collect::<String>().to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for c in lower.nfc() {
        if c == 'ñ' {
            out.push(c);
            continue;
        }
        out.extend(c.to_string().nfd().filter(|d| !is_combining_mark(*d)));
    }
    if out.is_empty() {
        // a token made only of marks; keep it rather than emit nothing
        lower
    } else {
        out
    }
}

/// Tokens are maximal runs of letters and digits; combining marks stick to
/// the run they follow.
pub fn tokenize_str(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut pos = 0usize;
    for c in text.chars() {
        let continues = current.is_some() && is_combining_mark(c);
        if c.is_alphanumeric() || continues {
            current.get_or_insert_with(|| (pos, String::new())).1.push(c);
        } else if let Some((start, surface)) = current.take() {
            push_token(&mut tokens, start, surface);
        }
        pos += 1;
    }
    if let Some((start, surface)) = current {
        push_token(&mut tokens, start, surface);
    }
    tokens
}

fn push_token(tokens: &mut Vec<Token>, start: usize, surface: String) {
    let len = surface.chars().count();
    tokens.push(Token {
        normalized: fold(&surface),
        char_span: Span::new(start, start + len),
        ordinal: tokens.len(),
        surface,
    });
}

/// Tokenize the prose of a [`CleanText`](super::CleanText).
pub fn tokenize(clean: &super::CleanText) -> Vec<Token> {
    tokenize_str(&clean.text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::slice_chars;
    use proptest::prelude::*;

    fn normalized(text: &str) -> Vec<String> {
        tokenize_str(text).into_iter().map(|t| t.normalized).collect()
    }

    #[test]
    fn folds_spanish_diacritics() {
        assert_eq!(normalized("taifa de Albarracín"), ["taifa", "de", "albarracin"]);
        assert_eq!(fold("MURIÓ"), "murio");
        assert_eq!(fold("yemeníes"), "yemenies");
        assert_eq!(fold("Poleñino"), "poleñino");
        assert_eq!(fold("AÑO"), "año");
        assert_eq!(fold("n\u{303}"), "ñ");
    }

    #[test]
    fn hyphen_separates() {
        let t = tokenize_str("Abd al-Malik");
        let surfaces: Vec<_> = t.iter().map(|t| t.surface.as_str()).collect();
        assert_eq!(surfaces, ["Abd", "al", "Malik"]);
        assert_eq!(t[2].char_span, Span::new(7, 12));
        assert_eq!(t[2].ordinal, 2);
    }

    #[test]
    fn empty_and_punctuation_only() {
        assert!(tokenize_str("").is_empty());
        assert!(tokenize_str(" ,.;-()").is_empty());
    }

    #[test]
    fn digits_are_tokens() {
        assert_eq!(normalized("(757-788)"), ["757", "788"]);
    }

    proptest! {
        #[test]
        fn spans_reproduce_surface(text in "\\PC{0,60}") {
            let tokens = tokenize_str(&text);
            for (i, t) in tokens.iter().enumerate() {
                prop_assert_eq!(slice_chars(&text, t.char_span), t.surface.as_str());
                prop_assert_eq!(t.ordinal, i);
                prop_assert!(!t.normalized.is_empty());
                prop_assert!(t.surface.chars().all(|c| c.is_alphanumeric() || is_combining_mark(c)));
            }
            for w in tokens.windows(2) {
                prop_assert!(w[0].char_span.end < w[1].char_span.start);
            }
        }

        #[test]
        fn folding_is_idempotent(word in "\\PC{1,12}") {
            let once = fold(&word);
            prop_assert_eq!(fold(&once), once);
        }
    }
}
