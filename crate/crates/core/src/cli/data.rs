//! Loading corpora into model-ready examples.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::Context;

use crate::edit::{EditSequence, Replacement};
use crate::io::{read_edits, read_tsv, EditRecord};
use crate::model::Example;
use crate::tags::TagSet;
use crate::tokenize::{tokenize, TokenizeMode};
use crate::vocab::{SourceSequence, TargetSequence, Vocabulary};

/// A sentence pair in surface form, with its edits when they were given.
#[derive(Debug, Clone)]
pub struct SurfacePair {
    pub line: usize,
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    pub tags: Option<Vec<String>>,
    pub record: Option<EditRecord>,
}

pub fn is_jsonl(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "jsonl")
}

/// Reads a TSV corpus, or an edit file when the name ends in `.jsonl`.
pub fn load_pairs(path: &Path, mode: TokenizeMode, tagset: &TagSet) -> anyhow::Result<Vec<SurfacePair>> {
    if is_jsonl(path) {
        let records = read_edits(path)?;
        if records.is_empty() {
            return Err(crate::Error::EmptyCorpus.into());
        }
        records
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let tgt = r
                    .apply(tagset)
                    .with_context(|| format!("{}: record {}", path.display(), i + 1))?;
                Ok(SurfacePair {
                    line: i + 1,
                    src: r.src.clone(),
                    tgt,
                    tags: None,
                    record: Some(r),
                })
            })
            .collect()
    } else {
        Ok(read_tsv(path)?
            .into_iter()
            .map(|p| SurfacePair {
                line: p.line,
                src: tokenize(&p.source, mode),
                tgt: tokenize(&p.target, mode),
                tags: p.tags,
                record: None,
            })
            .collect())
    }
}

pub fn corpus_vocab(pairs: &[SurfacePair]) -> Vocabulary {
    Vocabulary::from_corpus(pairs.iter().flat_map(|p| p.src.iter().chain(&p.tgt)).map(String::as_str))
}

/// Source, target and edits of one pair, with tokens resolved in `vocab`.
pub fn to_example(pair: &SurfacePair, vocab: &Vocabulary, tagset: &TagSet) -> anyhow::Result<Example> {
    let ctx = || format!("pair at line {}", pair.line);
    let src = SourceSequence::from_surfaces(vocab, &pair.src).with_context(ctx)?;
    let target = TargetSequence::from_surfaces(vocab, &pair.tgt);
    match &pair.record {
        Some(r) => {
            let edits = r.to_edits(tagset, vocab).with_context(ctx)?;
            Ok(Example { src, target, edits })
        }
        None => {
            let tags = match &pair.tags {
                Some(t) => Some(t.iter().map(|s| tagset.id(s)).collect::<crate::Result<Vec<_>>>().with_context(ctx)?),
                None => None,
            };
            Ok(Example::from_pair(src, target, tags.as_deref(), tagset).with_context(ctx)?)
        }
    }
}

/// Applies edits at the surface level so SELF spans copy the original
/// source words, including ones outside the vocabulary.
pub fn apply_surfaces(src: &[String], edits: &EditSequence, vocab: &Vocabulary) -> Vec<String> {
    let mut out = Vec::new();
    let mut prev = 0;
    for op in edits.iter() {
        let end = op.span_end.min(src.len());
        match op.replacement {
            Replacement::Keep if end > prev => out.extend_from_slice(&src[prev..end]),
            Replacement::Token(t) => out.push(vocab.surface(t).to_string()),
            _ => {}
        }
        prev = prev.max(end);
    }
    out
}

/// Stdout when `path` is `None` or `-`, otherwise a buffered file.
pub fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        _ => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}
