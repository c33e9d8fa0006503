//! Keyword extraction: tokenize, drop stopwords, stem, dedup.

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use crate::fuzzy::stem;

static STOPWORD_LIST: &str = include_str!("stopwords.txt");
static WORD_LIST: &str = include_str!("words.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORD_LIST.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

/// Lowercased alphanumeric runs of the text.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
}

/// Distinct stems of the non-stopword tokens. Single characters and pure
/// numbers are not keywords.
pub fn extract_keywords(text: &str) -> BTreeSet<String> {
    tokenize(text)
        .filter(|t| t.len() > 1 && !t.bytes().all(|b| b.is_ascii_digit()))
        .filter(|t| !is_stopword(t))
        .filter_map(|t| stem(&t).ok())
        .filter(|s| !is_stopword(s))
        .collect()
}

/// The bundled seed dictionary, one entry per distinct stem, in file order.
pub fn dictionary() -> &'static [&'static str] {
    static WORDS: OnceLock<Vec<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        let mut seen = HashSet::new();
        WORD_LIST
            .split_whitespace()
            .filter(|w| !is_stopword(w))
            .filter(|w| stem(w).is_ok_and(|s| !is_stopword(&s) && seen.insert(s)))
            .collect()
    })
}
