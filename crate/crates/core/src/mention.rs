//! `@boss` mention parsing.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// An agent a student can address from the chat. Students only ever talk to
/// the orchestrating agent; it decides who answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mention {
    Boss,
}

impl Mention {
    pub const fn handle(self) -> &'static str {
        match self {
            Mention::Boss => "boss",
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Returns each distinct mention in `body`, in order of first appearance.
///
/// A mention is `@` followed by a known handle, compared case-insensitively,
/// where the `@` is not glued to a preceding word character and the handle is
/// not followed by one.
pub fn parse_mentions(body: &str) -> Vec<Mention> {
    let mut found = Vec::new();
    let mut prev: Option<char> = None;
    for (idx, c) in body.char_indices() {
        if c == '@' && !prev.is_some_and(is_word_char) {
            let rest = &body[idx + 1..];
            for mention in [Mention::Boss] {
                let handle = mention.handle();
                let Some(head) = rest.get(..handle.len()) else {
                    continue;
                };
                let bounded = !rest[handle.len()..].chars().next().is_some_and(is_word_char);
                if head.eq_ignore_ascii_case(handle) && bounded && !found.contains(&mention) {
                    found.push(mention);
                }
            }
        }
        prev = Some(c);
    }
    found
}
