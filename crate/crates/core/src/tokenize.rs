use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizeMode {
    #[default]
    Whitespace,
    Character,
}

impl TokenizeMode {
    /// Joins surfaces back into text: a single space in whitespace mode,
    /// plain concatenation in character mode.
    pub fn join<S: AsRef<str>>(self, surfaces: &[S]) -> String {
        let sep = match self {
            TokenizeMode::Whitespace => " ",
            TokenizeMode::Character => "",
        };
        surfaces.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(sep)
    }
}

impl FromStr for TokenizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" | "ws" => Ok(TokenizeMode::Whitespace),
            "character" | "char" => Ok(TokenizeMode::Character),
            other => Err(format!("unknown tokenize mode `{other}` (expected whitespace|character)")),
        }
    }
}

impl fmt::Display for TokenizeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizeMode::Whitespace => f.write_str("whitespace"),
            TokenizeMode::Character => f.write_str("character"),
        }
    }
}

/// Splits text into token surfaces.
///
/// Whitespace mode splits on runs of Unicode whitespace. Character mode
/// yields one surface per code point, spaces included.
pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
        TokenizeMode::Character => text.chars().map(String::from).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn whitespace_split() {
        assert_eq!(tokenize("a b", TokenizeMode::Whitespace), vec!["a", "b"]);
        assert_eq!(tokenize("  a \t b\n", TokenizeMode::Whitespace), vec!["a", "b"]);
    }

    #[test]
    fn character_split() {
        assert_eq!(tokenize("ab", TokenizeMode::Character), vec!["a", "b"]);
        assert_eq!(tokenize("a b", TokenizeMode::Character), vec!["a", " ", "b"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("", TokenizeMode::Whitespace).is_empty());
        assert!(tokenize("", TokenizeMode::Character).is_empty());
    }

    proptest! {
        #[test]
        fn whitespace_is_idempotent_after_join(text in "[a-c \t\n]{0,40}") {
            let once = tokenize(&text, TokenizeMode::Whitespace);
            let joined = TokenizeMode::Whitespace.join(&once);
            prop_assert_eq!(tokenize(&joined, TokenizeMode::Whitespace), once);
        }

        #[test]
        fn character_join_restores_text(text in "\\PC{0,20}") {
            let toks = tokenize(&text, TokenizeMode::Character);
            prop_assert_eq!(TokenizeMode::Character.join(&toks), text);
        }
    }
}
