//! Text normalization shared by the lexicon matchers.

use alloc::string::String;

fn fold_char(c: char) -> char {
    match c {
        '\u{2018}' | '\u{2019}' | '\u{02bc}' => '\'',
        _ => c,
    }
}

/// Lowercases, unifies apostrophes and collapses whitespace runs to one space.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars().map(fold_char) {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Case-insensitive substring match on normalized text.
pub fn contains_phrase(normalized_haystack: &str, phrase: &str) -> bool {
    let needle = normalize(phrase);
    !needle.is_empty() && normalized_haystack.contains(needle.as_str())
}

/// Reduces text to lowercase word tokens separated by single spaces, padded
/// with one space on each side so that `" word "` lookups are word-bounded.
pub fn word_form(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    for c in text.chars().map(fold_char) {
        if c.is_alphanumeric() || c == '\'' {
            out.extend(c.to_lowercase());
        } else if !out.ends_with(' ') {
            out.push(' ');
        }
    }
    if !out.ends_with(' ') {
        out.push(' ');
    }
    out
}

/// Word-bounded phrase match against a string produced by [`word_form`].
pub fn contains_words(word_formed: &str, phrase: &str) -> bool {
    let needle = word_form(phrase);
    needle.len() > 2 && word_formed.contains(needle.as_str())
}
