//! Edit operations: `(tag, span end, replacement)` triples over a source.

use std::fmt;

use crate::tags::{TagId, TagSet};
use crate::vocab::{TokenId, Vocabulary};

/// The replacement slot of an edit operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Replacement {
    /// Copy the source span unchanged (`SELF`).
    Keep,
    /// Drop the source span (`DEL`).
    Delete,
    /// End-of-sequence marker carried by the final op.
    Eos,
    Token(TokenId),
}

impl Replacement {
    pub fn token(self) -> Option<TokenId> {
        match self {
            Replacement::Token(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EditOp {
    pub tag: TagId,
    pub span_end: usize,
    pub replacement: Replacement,
}

impl EditOp {
    pub fn keep(span_end: usize) -> Self {
        EditOp {
            tag: TagId::SELF,
            span_end,
            replacement: Replacement::Keep,
        }
    }

    pub fn eos(source_len: usize) -> Self {
        EditOp {
            tag: TagId::EOS,
            span_end: source_len,
            replacement: Replacement::Eos,
        }
    }

    pub fn replace(tag: TagId, span_end: usize, token: TokenId) -> Self {
        EditOp {
            tag,
            span_end,
            replacement: Replacement::Token(token),
        }
    }

    pub fn delete(tag: TagId, span_end: usize) -> Self {
        EditOp {
            tag,
            span_end,
            replacement: Replacement::Delete,
        }
    }

    pub fn is_self(&self) -> bool {
        self.tag == TagId::SELF
    }

    pub fn is_eos(&self) -> bool {
        self.tag == TagId::EOS
    }

    pub fn display<'a>(&'a self, tags: &'a TagSet, vocab: &'a Vocabulary) -> impl fmt::Display + 'a {
        OpDisplay { op: self, tags, vocab }
    }
}

struct OpDisplay<'a> {
    op: &'a EditOp,
    tags: &'a TagSet,
    vocab: &'a Vocabulary,
}

impl fmt::Display for OpDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let repl = match self.op.replacement {
            Replacement::Keep => "SELF",
            Replacement::Delete => "DEL",
            Replacement::Eos => "EOS",
            Replacement::Token(t) => self.vocab.surface(t),
        };
        let tag = if self.op.tag.index() < self.tags.len() {
            self.tags.surface(self.op.tag)
        } else {
            "?"
        };
        write!(f, "({}, {}, {})", tag, self.op.span_end, repl)
    }
}

/// An ordered list of edit ops over a source of length `source_len`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EditSequence {
    pub ops: Vec<EditOp>,
    pub source_len: usize,
}

impl EditSequence {
    pub fn new(ops: Vec<EditOp>, source_len: usize) -> Self {
        EditSequence { ops, source_len }
    }

    /// The identity edit sequence: copy everything, then stop.
    pub fn identity(source_len: usize) -> Self {
        EditSequence {
            ops: vec![EditOp::keep(source_len), EditOp::eos(source_len)],
            source_len,
        }
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EditOp> {
        self.ops.iter()
    }

    pub fn tags(&self) -> Vec<TagId> {
        self.ops.iter().map(|o| o.tag).collect()
    }

    pub fn spans(&self) -> Vec<usize> {
        self.ops.iter().map(|o| o.span_end).collect()
    }

    pub fn display<'a>(&'a self, tags: &'a TagSet, vocab: &'a Vocabulary) -> String {
        let parts: Vec<String> = self
            .ops
            .iter()
            .map(|o| o.display(tags, vocab).to_string())
            .collect();
        format!("[{}]", parts.join(", "))
    }
}

impl<'a> IntoIterator for &'a EditSequence {
    type Item = &'a EditOp;
    type IntoIter = std::slice::Iter<'a, EditOp>;

    fn into_iter(self) -> Self::IntoIter {
        self.ops.iter()
    }
}
