//! Token vocabulary and the source/target sequence types built on it.
//!
//! Ids 0..4 are reserved: `PAD=0`, `DEL=1`, `EOS=2`, `UNK=3`. Ordinary
//! surfaces start at id 4. The vocabulary file stores only the ordinary
//! surfaces, one per line, so line `k` (0-based) holds id `k + 4`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub const PAD: TokenId = TokenId(0);
    pub const DEL: TokenId = TokenId(1);
    pub const EOS: TokenId = TokenId(2);
    pub const UNK: TokenId = TokenId(3);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_reserved(self) -> bool {
        self.0 < RESERVED_COUNT as u32
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const RESERVED_COUNT: usize = 4;
pub const RESERVED_SURFACES: [&str; RESERVED_COUNT] = ["<pad>", "<del>", "<eos>", "<unk>"];

/// A token id paired with its surface string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    lookup: HashMap<String, TokenId>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    /// A vocabulary holding only the reserved tokens.
    pub fn new() -> Self {
        let entries: Vec<String> = RESERVED_SURFACES.iter().map(|s| s.to_string()).collect();
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), TokenId(i as u32)))
            .collect();
        Vocabulary { entries, lookup }
    }

    /// Builds a vocabulary from ordinary surfaces in the given order.
    /// Duplicates and reserved surfaces are rejected.
    pub fn from_surfaces<I, S>(surfaces: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary::new();
        for s in surfaces {
            let s = s.into();
            if vocab.lookup.contains_key(&s) {
                return Err(Error::DuplicateSurface(s));
            }
            vocab.push(s);
        }
        Ok(vocab)
    }

    /// Builds a vocabulary from a token stream, most frequent first,
    /// ties broken lexicographically so the result is deterministic.
    pub fn from_corpus<'a, I>(tokens: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut ranked: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|(s, _)| !RESERVED_SURFACES.contains(s))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let mut vocab = Vocabulary::new();
        for (s, _) in ranked {
            vocab.push(s.to_string());
        }
        vocab
    }

    fn push(&mut self, surface: String) -> TokenId {
        let id = TokenId(self.entries.len() as u32);
        self.lookup.insert(surface.clone(), id);
        self.entries.push(surface);
        id
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, surface: &str) -> Option<TokenId> {
        self.lookup.get(surface).copied()
    }

    /// Looks up a surface, mapping out-of-vocabulary input to `UNK`.
    pub fn id(&self, surface: &str) -> TokenId {
        self.get(surface).unwrap_or(TokenId::UNK)
    }

    pub fn surface(&self, id: TokenId) -> &str {
        &self.entries[id.index()]
    }

    pub fn token(&self, id: TokenId) -> Token {
        Token {
            id,
            surface: self.surface(id).to_string(),
        }
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn encode<S: AsRef<str>>(&self, surfaces: &[S]) -> Vec<TokenId> {
        surfaces.iter().map(|s| self.id(s.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.surface(id).to_string()).collect()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut surfaces = Vec::new();
        for line in reader.lines() {
            surfaces.push(line?);
        }
        Self::from_surfaces(surfaces)
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        for s in &self.entries[RESERVED_COUNT..] {
            writeln!(writer, "{s}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }
}

/// Non-empty source sequence `x` of length `I`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSequence {
    tokens: Vec<TokenId>,
}

impl SourceSequence {
    pub fn new(tokens: Vec<TokenId>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySource);
        }
        Ok(SourceSequence { tokens })
    }

    pub fn from_surfaces<S: AsRef<str>>(vocab: &Vocabulary, surfaces: &[S]) -> Result<Self> {
        Self::new(vocab.encode(surfaces))
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Target sequence `y`; may be empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TargetSequence {
    tokens: Vec<TokenId>,
}

impl TargetSequence {
    pub fn new(tokens: Vec<TokenId>) -> Self {
        TargetSequence { tokens }
    }

    pub fn from_surfaces<S: AsRef<str>>(vocab: &Vocabulary, surfaces: &[S]) -> Self {
        Self::new(vocab.encode(surfaces))
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<TokenId> {
        self.tokens
    }
}

impl From<Vec<TokenId>> for TargetSequence {
    fn from(tokens: Vec<TokenId>) -> Self {
        TargetSequence { tokens }
    }
}
