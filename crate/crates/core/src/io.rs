//! Corpus and edit-file readers and writers.
//!
//! Parallel corpora are UTF-8 TSV: source, target, and an optional third
//! column with one tag per changed region. Edit files hold one JSON object
//! per line: `{"src": [...], "edits": [[tag, span_end, replacement], ...]}`
//! where the replacement is a token surface, `null` for a deletion, `"SELF"`
//! on SELF ops and `"EOS"` on the final op.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::edit::{EditOp, EditSequence, Replacement};
use crate::editops::apply_edits;
use crate::error::{Error, Result};
use crate::tags::{TagId, TagSet};
use crate::vocab::{SourceSequence, Vocabulary};

const SELF_SURFACE: &str = "SELF";
const EOS_SURFACE: &str = "EOS";

/// One TSV line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    /// 1-based line number in the input.
    pub line: usize,
    pub source: String,
    pub target: String,
    pub tags: Option<Vec<String>>,
}

fn parse_error(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses TSV pairs; blank lines are skipped, an input without pairs is an
/// error.
pub fn parse_tsv<R: BufRead>(reader: R, label: &str) -> Result<Vec<ParallelPair>> {
    let mut pairs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&cols.len()) {
            return Err(parse_error(
                label,
                i + 1,
                format!("expected 2 or 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        if cols[0].trim().is_empty() {
            return Err(parse_error(label, i + 1, "empty source column"));
        }
        pairs.push(ParallelPair {
            line: i + 1,
            source: cols[0].to_string(),
            target: cols[1].to_string(),
            tags: cols.get(2).map(|t| t.split_whitespace().map(str::to_string).collect()),
        });
    }
    if pairs.is_empty() {
        return Err(parse_error(label, 0, "no sentence pairs"));
    }
    Ok(pairs)
}

pub fn read_tsv(path: &Path) -> Result<Vec<ParallelPair>> {
    let file = fs::File::open(path)?;
    parse_tsv(BufReader::new(file), &path.display().to_string())
}

/// Lines of a text file, without trailing newlines.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l).to_string()).collect())
}

/// An edit sequence in surface form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditRecord {
    pub src: Vec<String>,
    pub edits: Vec<(String, usize, Option<String>)>,
}

impl EditRecord {
    pub fn from_edits(src: &[String], edits: &EditSequence, tagset: &TagSet, vocab: &Vocabulary) -> Self {
        let edits = edits
            .iter()
            .map(|op| {
                let repl = match op.replacement {
                    Replacement::Keep => Some(SELF_SURFACE.to_string()),
                    Replacement::Eos => Some(EOS_SURFACE.to_string()),
                    Replacement::Delete => None,
                    Replacement::Token(t) => Some(vocab.surface(t).to_string()),
                };
                (tagset.surface(op.tag).to_string(), op.span_end, repl)
            })
            .collect();
        EditRecord {
            src: src.to_vec(),
            edits,
        }
    }

    /// Resolves surfaces to ids. Out-of-vocabulary tokens become `UNK`;
    /// unknown tags are an error. The result is not validated.
    pub fn to_edits(&self, tagset: &TagSet, vocab: &Vocabulary) -> Result<EditSequence> {
        let mut ops = Vec::with_capacity(self.edits.len());
        for (tag, span_end, repl) in &self.edits {
            let tag = tagset.id(tag)?;
            let replacement = match repl.as_deref() {
                None => Replacement::Delete,
                Some(SELF_SURFACE) if tag == TagId::SELF => Replacement::Keep,
                Some(EOS_SURFACE) if tag == TagId::EOS => Replacement::Eos,
                Some(s) => Replacement::Token(vocab.id(s)),
            };
            ops.push(EditOp {
                tag,
                span_end: *span_end,
                replacement,
            });
        }
        Ok(EditSequence::new(ops, self.src.len()))
    }

    /// Applies the record to its own source and returns target surfaces.
    pub fn apply(&self, tagset: &TagSet) -> Result<Vec<String>> {
        let surfaces = self
            .src
            .iter()
            .map(String::as_str)
            .chain(self.edits.iter().filter_map(|(_, _, r)| r.as_deref()));
        let vocab = Vocabulary::from_corpus(surfaces);
        let src = SourceSequence::from_surfaces(&vocab, &self.src)?;
        let edits = self.to_edits(tagset, &vocab)?;
        let target = apply_edits(&src, &edits)?;
        Ok(vocab.decode(target.tokens()))
    }
}

pub fn parse_edits<R: BufRead>(reader: R, label: &str) -> Result<Vec<EditRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EditRecord =
            serde_json::from_str(&line).map_err(|e| parse_error(label, i + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_edits(path: &Path) -> Result<Vec<EditRecord>> {
    let file = fs::File::open(path)?;
    parse_edits(BufReader::new(file), &path.display().to_string())
}

pub fn write_edits<W: Write>(mut writer: W, records: &[EditRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
