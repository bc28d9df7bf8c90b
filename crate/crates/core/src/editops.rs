//! The non-neural edit algebra: apply, validate, align, extract, summarize.

use std::fmt;

use serde::Serialize;

use crate::edit::{EditOp, EditSequence, Replacement};
use crate::error::{Error, Result};
use crate::tags::{TagId, TagSet};
use crate::vocab::{SourceSequence, TargetSequence, TokenId};

/// One clause of the validity contract that an edit sequence breaks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Empty,
    NonMonotonic { prev: usize, span: usize },
    SpanOutOfRange { span: usize, source_len: usize },
    FinalSpan { span: usize, source_len: usize },
    MissingEos,
    EosNotLast,
    SelfMismatch,
    EosMismatch,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "edit sequence is empty"),
            Violation::NonMonotonic { prev, span } => write!(
                f,
                "spans must be non-decreasing (p_n <= p_n+1), got {prev} then {span}"
            ),
            Violation::SpanOutOfRange { span, source_len } => {
                write!(f, "span end {span} exceeds source length {source_len}")
            }
            Violation::FinalSpan { span, source_len } => write!(
                f,
                "final span must end at the source end (p_N = I), got {span} != {source_len}"
            ),
            Violation::MissingEos => write!(f, "final op must be the EOS op"),
            Violation::EosNotLast => write!(f, "EOS op before the end of the sequence"),
            Violation::SelfMismatch => write!(f, "tag SELF requires replacement SELF and vice versa"),
            Violation::EosMismatch => write!(f, "tag EOS requires replacement EOS and vice versa"),
        }
    }
}

/// Every violated clause, each paired with the index of the offending op.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<(usize, Violation)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&(usize, Violation)> {
        self.violations.first()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.into_iter().next() {
            None => Ok(()),
            Some((index, violation)) => Err(Error::InvalidEdits { index, violation }),
        }
    }
}

/// Checks the validity contract: op-level SELF/EOS consistency, spans in
/// range and non-decreasing, final span equal to `source_len`, and the
/// EOS op last (and only last).
pub fn validate(edits: &EditSequence, source_len: usize) -> ValidationReport {
    let mut violations = Vec::new();
    let ops = &edits.ops;
    if ops.is_empty() {
        violations.push((0, Violation::Empty));
        return ValidationReport { violations };
    }
    let last = ops.len() - 1;
    let mut prev = 0usize;
    for (n, op) in ops.iter().enumerate() {
        if op.is_self() != (op.replacement == Replacement::Keep) {
            violations.push((n, Violation::SelfMismatch));
        }
        if op.is_eos() != (op.replacement == Replacement::Eos) {
            violations.push((n, Violation::EosMismatch));
        }
        if op.span_end > source_len {
            violations.push((
                n,
                Violation::SpanOutOfRange {
                    span: op.span_end,
                    source_len,
                },
            ));
        }
        if n > 0 && op.span_end < prev {
            violations.push((
                n,
                Violation::NonMonotonic {
                    prev,
                    span: op.span_end,
                },
            ));
        }
        if op.is_eos() && n != last {
            violations.push((n, Violation::EosNotLast));
        }
        prev = op.span_end;
    }
    let final_op = &ops[last];
    if final_op.span_end != source_len {
        violations.push((
            last,
            Violation::FinalSpan {
                span: final_op.span_end,
                source_len,
            },
        ));
    }
    if !final_op.is_eos() {
        violations.push((last, Violation::MissingEos));
    }
    ValidationReport { violations }
}

/// Applies an edit sequence to a source.
///
/// `SELF` ops copy `x[p_{n-1}..p_n]`, other ops append their replacement
/// token unless it is `DEL`; the trailing EOS op appends nothing.
pub fn apply_edits(src: &SourceSequence, edits: &EditSequence) -> Result<TargetSequence> {
    validate(edits, src.len()).into_result()?;
    Ok(TargetSequence::new(apply_unchecked(src.tokens(), &edits.ops)))
}

/// Algorithm body without validation. Spans are clamped to the source so
/// the function stays total on partial hypotheses.
pub(crate) fn apply_unchecked(src: &[TokenId], ops: &[EditOp]) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(src.len());
    let mut prev = 0usize;
    for op in ops {
        let end = op.span_end.min(src.len());
        match op.replacement {
            Replacement::Keep => {
                if end > prev {
                    out.extend_from_slice(&src[prev..end]);
                }
            }
            Replacement::Token(t) => out.push(t),
            Replacement::Delete | Replacement::Eos => {}
        }
        prev = end.max(prev);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignKind {
    Keep,
    Substitute,
    Delete,
    Insert,
}

/// One token-level alignment step. `source_pos` is the 0-based index of
/// the source token consumed, or for insertions the position before which
/// the target token is inserted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AlignmentOp {
    pub kind: AlignKind,
    pub source_pos: usize,
    pub target_tokens: Vec<TokenId>,
}

impl AlignmentOp {
    pub fn cost(&self) -> usize {
        usize::from(self.kind != AlignKind::Keep)
    }
}

/// Minimum edit distance alignment with unit costs.
///
/// Ties are broken left to right, preferring keep, then substitute, then
/// delete, then insert.
pub fn align(src: &[TokenId], tgt: &[TokenId]) -> Vec<AlignmentOp> {
    let (n, m) = (src.len(), tgt.len());
    let w = m + 1;
    // suffix[i * w + j] = distance between src[i..] and tgt[j..]
    let mut suffix = vec![0usize; (n + 1) * w];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            suffix[i * w + j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag = suffix[(i + 1) * w + j + 1] + usize::from(src[i] != tgt[j]);
                let del = suffix[(i + 1) * w + j] + 1;
                let ins = suffix[i * w + j + 1] + 1;
                diag.min(del).min(ins)
            };
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (0usize, 0usize);
    while i < n || j < m {
        let here = suffix[i * w + j];
        if i < n && j < m && src[i] == tgt[j] && suffix[(i + 1) * w + j + 1] == here {
            ops.push(AlignmentOp {
                kind: AlignKind::Keep,
                source_pos: i,
                target_tokens: vec![tgt[j]],
            });
            i += 1;
            j += 1;
        } else if i < n && j < m && src[i] != tgt[j] && suffix[(i + 1) * w + j + 1] + 1 == here {
            ops.push(AlignmentOp {
                kind: AlignKind::Substitute,
                source_pos: i,
                target_tokens: vec![tgt[j]],
            });
            i += 1;
            j += 1;
        } else if i < n && suffix[(i + 1) * w + j] + 1 == here {
            ops.push(AlignmentOp {
                kind: AlignKind::Delete,
                source_pos: i,
                target_tokens: Vec::new(),
            });
            i += 1;
        } else {
            debug_assert!(j < m && suffix[i * w + j + 1] + 1 == here);
            ops.push(AlignmentOp {
                kind: AlignKind::Insert,
                source_pos: i,
                target_tokens: vec![tgt[j]],
            });
            j += 1;
        }
    }
    ops
}

/// A maximal changed region of an alignment.
#[derive(Debug, Clone, PartialEq, Eq)]
struct ChangedRegion {
    start: usize,
    end: usize,
    emitted: Vec<TokenId>,
}

enum Region {
    Kept { end: usize },
    Changed(ChangedRegion),
}

fn regions(alignment: &[AlignmentOp]) -> Vec<Region> {
    let mut out: Vec<Region> = Vec::new();
    let mut pos = 0usize;
    for op in alignment {
        match op.kind {
            AlignKind::Keep => {
                pos += 1;
                match out.last_mut() {
                    Some(Region::Kept { end }) => *end = pos,
                    _ => out.push(Region::Kept { end: pos }),
                }
            }
            kind => {
                if !matches!(out.last(), Some(Region::Changed(_))) {
                    out.push(Region::Changed(ChangedRegion {
                        start: pos,
                        end: pos,
                        emitted: Vec::new(),
                    }));
                }
                if kind != AlignKind::Insert {
                    pos += 1;
                }
                if let Some(Region::Changed(r)) = out.last_mut() {
                    r.end = pos;
                    r.emitted.extend_from_slice(&op.target_tokens);
                }
            }
        }
    }
    out
}

/// Number of maximal changed regions in the alignment of `src` and `tgt`;
/// this is the number of tags an annotation must provide.
pub fn changed_region_count(src: &SourceSequence, tgt: &TargetSequence) -> usize {
    edit_regions(src, tgt)
        .iter()
        .filter(|r| matches!(r, Region::Changed(_)))
        .count()
}

/// Converts a parallel pair into a span-level edit sequence.
///
/// Runs of kept tokens become one `SELF` op. Each changed region becomes a
/// group whose first op consumes the whole source span and emits the first
/// replacement token; remaining tokens follow as empty-span insertions. A
/// pure deletion is a single `DEL` op. A pure insertion at the very start
/// of the source absorbs the first kept token, so every span end is at
/// least 1. The sequence ends with the EOS op.
///
/// `tags` gives one tag per changed region, in order; without it every
/// region gets the tag set's default change tag (`NON_SELF`).
pub fn extract_edits(
    src: &SourceSequence,
    tgt: &TargetSequence,
    tags: Option<&[TagId]>,
    tagset: &TagSet,
) -> Result<EditSequence> {
    let regions = edit_regions(src, tgt);
    let changed = regions
        .iter()
        .filter(|r| matches!(r, Region::Changed(_)))
        .count();
    if let Some(tags) = tags {
        if tags.len() != changed {
            return Err(Error::AnnotationMismatch {
                changed,
                given: tags.len(),
            });
        }
    }
    let default_tag = match tags {
        Some(_) => TagId::SELF,
        None if changed == 0 => TagId::SELF,
        None => tagset
            .default_change_tag()
            .ok_or_else(|| Error::UnknownTag(crate::tags::NON_SELF_TAG.to_string()))?,
    };

    let mut ops = Vec::with_capacity(regions.len() + tgt.len() + 1);
    let mut group = 0usize;
    for region in regions {
        match region {
            Region::Kept { end } => ops.push(EditOp::keep(end)),
            Region::Changed(r) => {
                let tag = tags.map_or(default_tag, |t| t[group]);
                group += 1;
                if r.emitted.is_empty() {
                    ops.push(EditOp::delete(tag, r.end));
                } else {
                    ops.extend(r.emitted.iter().map(|&t| EditOp::replace(tag, r.end, t)));
                }
            }
        }
    }
    ops.push(EditOp::eos(src.len()));
    let edits = EditSequence::new(ops, src.len());
    debug_assert!(validate(&edits, src.len()).is_valid());
    Ok(edits)
}

/// A pure insertion before the first source token has an empty span at
/// position 0. Extend it over the first kept token (re-emitting it) so every
/// span end is at least 1; if that empties the keep run, the region merges
/// with the following changed region.
fn absorb_leading_insertion(regions: &mut Vec<Region>, src: &[TokenId]) {
    let leading_insert = matches!(
        regions.first(),
        Some(Region::Changed(r)) if r.start == 0 && r.end == 0
    );
    if !leading_insert || !matches!(regions.get(1), Some(Region::Kept { .. })) {
        return;
    }
    if let Region::Changed(r) = &mut regions[0] {
        r.end = 1;
        r.emitted.push(src[0]);
    }
    if !matches!(regions[1], Region::Kept { end: 1 }) {
        return;
    }
    regions.remove(1);
    if regions.len() > 1 {
        if let Region::Changed(next) = regions.remove(1) {
            if let Region::Changed(r) = &mut regions[0] {
                r.end = next.end;
                r.emitted.extend(next.emitted);
            }
        }
    }
}

/// Changed and kept regions of the alignment after leading-insertion
/// normalization.
fn edit_regions(src: &SourceSequence, tgt: &TargetSequence) -> Vec<Region> {
    let mut regions = regions(&align(src.tokens(), tgt.tokens()));
    absorb_leading_insertion(&mut regions, src.tokens());
    regions
}

/// A maximal run of non-SELF, non-EOS ops: the source span it replaces,
/// the tag of its first op, and the tokens it emits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanGroup {
    pub start: usize,
    pub end: usize,
    pub tag: TagId,
    pub tokens: Vec<TokenId>,
}

pub fn span_groups(edits: &EditSequence) -> Vec<SpanGroup> {
    let mut groups: Vec<SpanGroup> = Vec::new();
    let mut prev = 0usize;
    let mut open = false;
    for op in &edits.ops {
        if op.is_self() || op.is_eos() {
            open = false;
        } else {
            if !open {
                groups.push(SpanGroup {
                    start: prev,
                    end: op.span_end,
                    tag: op.tag,
                    tokens: Vec::new(),
                });
                open = true;
            }
            let g = groups.last_mut().expect("open group");
            g.end = op.span_end;
            if let Replacement::Token(t) = op.replacement {
                g.tokens.push(t);
            }
        }
        prev = op.span_end;
    }
    groups
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub avg_source_len: f64,
    pub avg_target_len: f64,
    pub avg_edit_count: f64,
    pub changed_token_fraction: f64,
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentences={} avg_I={:.2} avg_J={:.2} avg_N={:.2} changed={:.1}%",
            self.sentence_count,
            self.avg_source_len,
            self.avg_target_len,
            self.avg_edit_count,
            100.0 * self.changed_token_fraction
        )
    }
}

/// Exact integer tallies behind [`CorpusStats`]; merging is order-independent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    pub sentences: usize,
    pub source_tokens: usize,
    pub target_tokens: usize,
    pub edit_ops: usize,
    pub changed_source_tokens: usize,
}

impl StatsAccumulator {
    pub fn add(&mut self, src: &SourceSequence, tgt: &TargetSequence, tagset: &TagSet) -> Result<()> {
        let edits = extract_edits(src, tgt, None, tagset)?;
        let changed = align(src.tokens(), tgt.tokens())
            .iter()
            .filter(|o| matches!(o.kind, AlignKind::Substitute | AlignKind::Delete))
            .count();
        self.sentences += 1;
        self.source_tokens += src.len();
        self.target_tokens += tgt.len();
        self.edit_ops += edits.len();
        self.changed_source_tokens += changed;
        Ok(())
    }

    pub fn merge(mut self, other: StatsAccumulator) -> Self {
        self.sentences += other.sentences;
        self.source_tokens += other.source_tokens;
        self.target_tokens += other.target_tokens;
        self.edit_ops += other.edit_ops;
        self.changed_source_tokens += other.changed_source_tokens;
        self
    }

    pub fn finish(self) -> Result<CorpusStats> {
        if self.sentences == 0 {
            return Err(Error::EmptyCorpus);
        }
        let n = self.sentences as f64;
        Ok(CorpusStats {
            sentence_count: self.sentences,
            avg_source_len: self.source_tokens as f64 / n,
            avg_target_len: self.target_tokens as f64 / n,
            avg_edit_count: self.edit_ops as f64 / n,
            changed_token_fraction: self.changed_source_tokens as f64 / self.source_tokens as f64,
        })
    }
}

/// Corpus statistics over parallel pairs. Edit counts include the EOS op;
/// the changed-token fraction is substituted plus deleted source tokens
/// over all source tokens.
pub fn corpus_stats<'a, I>(pairs: I) -> Result<CorpusStats>
where
    I: IntoIterator<Item = (&'a SourceSequence, &'a TargetSequence)>,
{
    let tagset = crate::tags::builtin_tagset("trivial")?;
    let mut acc = StatsAccumulator::default();
    for (src, tgt) in pairs {
        acc.add(src, tgt, &tagset)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tags::builtin_tagset;
    use crate::vocab::Vocabulary;
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::from_surfaces(["a", "b", "c", "d", "x", "y"]).unwrap()
    }

    fn src(v: &Vocabulary, s: &str) -> SourceSequence {
        SourceSequence::from_surfaces(v, &s.split_whitespace().collect::<Vec<_>>()).unwrap()
    }

    fn tgt(v: &Vocabulary, s: &str) -> TargetSequence {
        TargetSequence::from_surfaces(v, &s.split_whitespace().collect::<Vec<_>>())
    }

    fn ids(v: &Vocabulary, s: &str) -> Vec<TokenId> {
        v.encode(&s.split_whitespace().collect::<Vec<_>>())
    }

    #[test]
    fn identity_apply() {
        let v = vocab();
        let x = src(&v, "a b c");
        let y = apply_edits(&x, &EditSequence::identity(3)).unwrap();
        assert_eq!(y.tokens(), x.tokens());
    }

    #[test]
    fn delete_all_then_insert() {
        let v = vocab();
        let x = src(&v, "a b");
        let t = TagId(2);
        let edits = EditSequence::new(
            vec![
                EditOp::delete(t, 2),
                EditOp::replace(t, 2, v.id("c")),
                EditOp::replace(t, 2, v.id("d")),
                EditOp::eos(2),
            ],
            2,
        );
        assert_eq!(apply_edits(&x, &edits).unwrap().tokens(), ids(&v, "c d").as_slice());
    }

    #[test]
    fn validate_examples() {
        let ok = EditSequence::new(vec![EditOp::keep(3), EditOp::eos(3)], 3);
        assert!(validate(&ok, 3).is_valid());

        let short = EditSequence::new(vec![EditOp::keep(2), EditOp::eos(2)], 3);
        let report = validate(&short, 3);
        assert_eq!(
            report.violations,
            vec![(1, Violation::FinalSpan { span: 2, source_len: 3 })]
        );

        let v = vocab();
        let t = TagId(2);
        let nonmono = EditSequence::new(
            vec![
                EditOp::replace(t, 2, v.id("x")),
                EditOp::replace(t, 1, v.id("y")),
                EditOp::eos(3),
            ],
            3,
        );
        let report = validate(&nonmono, 3);
        assert_eq!(
            report.violations,
            vec![(1, Violation::NonMonotonic { prev: 2, span: 1 })]
        );
        let err = apply_edits(&src(&v, "a b c"), &nonmono).unwrap_err();
        assert!(matches!(err, Error::InvalidEdits { index: 1, .. }));
    }

    #[test]
    fn validate_reports_every_clause() {
        let bad = EditSequence::new(
            vec![
                EditOp {
                    tag: TagId::SELF,
                    span_end: 2,
                    replacement: Replacement::Delete,
                },
                EditOp::eos(2),
                EditOp::keep(5),
            ],
            3,
        );
        let report = validate(&bad, 3);
        let kinds: Vec<_> = report.violations.iter().map(|(i, v)| (*i, v.clone())).collect();
        assert!(kinds.contains(&(0, Violation::SelfMismatch)));
        assert!(kinds.contains(&(1, Violation::EosNotLast)));
        assert!(kinds.contains(&(2, Violation::SpanOutOfRange { span: 5, source_len: 3 })));
        assert!(kinds.contains(&(2, Violation::MissingEos)));
        assert!(validate(&EditSequence::new(vec![], 1), 1).violations[0].1 == Violation::Empty);
    }

    #[test]
    fn align_examples() {
        let v = vocab();
        let kinds = |a: &[AlignmentOp]| a.iter().map(|o| o.kind).collect::<Vec<_>>();
        let a = align(&ids(&v, "a b c"), &ids(&v, "a b c"));
        assert_eq!(kinds(&a), vec![AlignKind::Keep; 3]);

        let a = align(&ids(&v, "a b c d"), &ids(&v, "a x y d"));
        assert_eq!(
            kinds(&a),
            vec![AlignKind::Keep, AlignKind::Substitute, AlignKind::Substitute, AlignKind::Keep]
        );
        assert_eq!(a[1].target_tokens, vec![v.id("x")]);
        assert_eq!(a[2].target_tokens, vec![v.id("y")]);

        let a = align(&ids(&v, "a c"), &ids(&v, "a b c"));
        assert_eq!(kinds(&a), vec![AlignKind::Keep, AlignKind::Insert, AlignKind::Keep]);
        assert_eq!(a[1].source_pos, 1);
    }

    #[test]
    fn align_empty_target_deletes_everything() {
        let v = vocab();
        let a = align(&ids(&v, "a b"), &[]);
        assert!(a.iter().all(|o| o.kind == AlignKind::Delete && o.target_tokens.is_empty()));
    }

    #[test]
    fn extract_examples() {
        let v = vocab();
        let ts = builtin_tagset("trivial").unwrap();
        let ns = ts.id("NON_SELF").unwrap();

        let e = extract_edits(&src(&v, "a b c d"), &tgt(&v, "a x y d"), None, &ts).unwrap();
        assert_eq!(
            e.ops,
            vec![
                EditOp::keep(1),
                EditOp::replace(ns, 3, v.id("x")),
                EditOp::replace(ns, 3, v.id("y")),
                EditOp::keep(4),
                EditOp::eos(4),
            ]
        );

        let e = extract_edits(&src(&v, "a b c"), &tgt(&v, "a b c"), None, &ts).unwrap();
        assert_eq!(e, EditSequence::identity(3));

        let e = extract_edits(&src(&v, "a b c"), &tgt(&v, "a c"), None, &ts).unwrap();
        assert_eq!(
            e.ops,
            vec![EditOp::keep(1), EditOp::delete(ns, 2), EditOp::keep(3), EditOp::eos(3)]
        );
    }

    #[test]
    fn leading_insertion_absorbs_first_token() {
        let v = vocab();
        let ts = builtin_tagset("trivial").unwrap();
        let ns = ts.id("NON_SELF").unwrap();
        let x = src(&v, "a c");
        let y = tgt(&v, "x a c");
        let e = extract_edits(&x, &y, None, &ts).unwrap();
        assert_eq!(
            e.ops,
            vec![
                EditOp::replace(ns, 1, v.id("x")),
                EditOp::replace(ns, 1, v.id("a")),
                EditOp::keep(2),
                EditOp::eos(2),
            ]
        );
        assert_eq!(apply_edits(&x, &e).unwrap(), y);

        let x = src(&v, "a");
        let y = tgt(&v, "x y a");
        let e = extract_edits(&x, &y, None, &ts).unwrap();
        assert!(e.ops.iter().all(|o| o.span_end >= 1));
        assert_eq!(apply_edits(&x, &e).unwrap(), y);
    }

    #[test]
    fn annotations_assign_tags_per_region() {
        let v = vocab();
        let ts = builtin_tagset("errant").unwrap();
        let spell = ts.id("SPELL").unwrap();
        let det = ts.id("DET").unwrap();
        let x = src(&v, "a b c d");
        let y = tgt(&v, "x b c");
        let e = extract_edits(&x, &y, Some(&[spell, det]), &ts).unwrap();
        let groups = span_groups(&e);
        assert_eq!(groups.len(), 2);
        assert_eq!((groups[0].tag, groups[1].tag), (spell, det));

        let err = extract_edits(&x, &y, Some(&[spell]), &ts).unwrap_err();
        assert!(matches!(err, Error::AnnotationMismatch { changed: 2, given: 1 }));
    }

    #[test]
    fn span_groups_merge_runs() {
        let v = vocab();
        let ts = builtin_tagset("trivial").unwrap();
        let e = extract_edits(&src(&v, "a b c d"), &tgt(&v, "a x y d"), None, &ts).unwrap();
        let g = span_groups(&e);
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].start, g[0].end), (1, 3));
        assert_eq!(g[0].tokens, ids(&v, "x y"));
    }

    #[test]
    fn stats_examples() {
        let v = vocab();
        let (x1, y1) = (src(&v, "a b"), tgt(&v, "a b"));
        let (x2, y2) = (src(&v, "a b"), tgt(&v, "a c"));
        let s = corpus_stats([(&x1, &y1)]).unwrap();
        assert_eq!((s.avg_source_len, s.avg_target_len, s.avg_edit_count), (2.0, 2.0, 2.0));
        assert_eq!(s.changed_token_fraction, 0.0);

        let s = corpus_stats([(&x2, &y2)]).unwrap();
        assert_eq!(s.changed_token_fraction, 0.5);
        // (SELF,1,SELF), (NON_SELF,2,c), (EOS,2,EOS)
        assert_eq!(s.avg_edit_count, 3.0);

        let s = corpus_stats([(&x1, &y1), (&x2, &y2)]).unwrap();
        assert_eq!(s.avg_edit_count, 2.5);
        assert_eq!(s.changed_token_fraction, 0.25);
        assert_eq!(s.sentence_count, 2);

        let none: Vec<(&SourceSequence, &TargetSequence)> = vec![];
        assert!(matches!(corpus_stats(none), Err(Error::EmptyCorpus)));
    }

    /// Enumerates every alignment path and returns the minimum cost.
    fn brute_force_distance(a: &[TokenId], b: &[TokenId]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let diag = brute_force_distance(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        let del = brute_force_distance(&a[1..], b) + 1;
        let ins = brute_force_distance(a, &b[1..]) + 1;
        diag.min(del).min(ins)
    }

    fn seq(max: usize) -> impl Strategy<Value = Vec<TokenId>> {
        proptest::collection::vec((4u32..9).prop_map(TokenId), 1..max)
    }

    proptest! {
        #[test]
        fn align_is_minimal(a in seq(7), b in proptest::collection::vec((4u32..9).prop_map(TokenId), 0..7)) {
            let ops = align(&a, &b);
            let cost: usize = ops.iter().map(AlignmentOp::cost).sum();
            prop_assert_eq!(cost, brute_force_distance(&a, &b));
            for op in &ops {
                match op.kind {
                    AlignKind::Keep => prop_assert_eq!(&op.target_tokens, &vec![a[op.source_pos]]),
                    AlignKind::Delete => prop_assert!(op.target_tokens.is_empty()),
                    _ => prop_assert_eq!(op.target_tokens.len(), 1),
                }
            }
            let produced: Vec<TokenId> = ops.iter().flat_map(|o| o.target_tokens.clone()).collect();
            prop_assert_eq!(produced, b);
        }

        #[test]
        fn extract_round_trips_and_is_compact(a in seq(12), b in proptest::collection::vec((4u32..9).prop_map(TokenId), 0..12)) {
            let ts = builtin_tagset("trivial").unwrap();
            let x = SourceSequence::new(a).unwrap();
            let y = TargetSequence::new(b);
            let e = extract_edits(&x, &y, None, &ts).unwrap();
            prop_assert!(validate(&e, x.len()).is_valid());
            prop_assert_eq!(apply_edits(&x, &e).unwrap(), y.clone());
            let alignment = align(x.tokens(), y.tokens());
            prop_assert!(e.len() <= alignment.len() + 1);
            prop_assert_eq!(span_groups(&e).len(), changed_region_count(&x, &y));
            prop_assert!(e.ops.iter().all(|o| o.span_end >= 1));
        }
    }
}
