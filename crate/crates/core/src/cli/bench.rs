//! Decode-speed comparison between an edit model and a full-sequence model.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Context;
use clap::Args;
use serde::Serialize;

use crate::decoder::{beam_decode, full_sequence_decode, DecodeParams};
use crate::editops::extract_edits;
use crate::model::{Checkpoint, ModelMode};
use crate::tags::TagSet;
use crate::vocab::{SourceSequence, TargetSequence};

use super::data::{load_pairs, output};
use super::{usage, DecodeFlags, TokenizeFlag};

/// Upper edges of the edit-count buckets: `N<=3, 4-6, 7-10, >10`.
pub const DEFAULT_BUCKET_EDGES: [usize; 3] = [3, 6, 10];

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long = "edit-checkpoint")]
    pub edit_checkpoint: PathBuf,
    #[arg(long = "full-checkpoint")]
    pub full_checkpoint: PathBuf,
    /// TSV corpus; targets give the gold edit count used for bucketing.
    pub corpus: PathBuf,
    #[command(flatten)]
    pub flags: DecodeFlags,
    /// Comma-separated upper bucket edges on the gold edit count.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_BUCKET_EDGES)]
    pub buckets: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
}

/// One benchmark sentence in surface form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchInput {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Per-bucket averages. Edit counts `N` exclude the final EOS op, so an
/// unshortcut decode of `N` edits takes exactly `3(N+1)` sub-steps. Sub-step
/// counts follow the best hypothesis' path; `*_evaluations` count every
/// model evaluation made by the search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchBucket {
    pub label: String,
    pub sentences: usize,
    pub avg_source_len: f64,
    pub avg_gold_edits: f64,
    pub avg_target_len: f64,
    pub avg_decoded_edits: f64,
    pub avg_substeps_edit: f64,
    pub avg_substeps_edit_shortcuts: f64,
    pub avg_substeps_full: f64,
    pub avg_evaluations_edit: f64,
    pub avg_evaluations_edit_shortcuts: f64,
    pub avg_evaluations_full: f64,
    pub sents_per_sec_edit: f64,
    pub sents_per_sec_edit_shortcuts: f64,
    pub sents_per_sec_full: f64,
    pub speedup_edit: f64,
    pub speedup_edit_shortcuts: f64,
    /// Sentences whose edit-mode path took more than `3(N+1)` sub-steps
    /// (without shortcuts) or `3(N+1) - #SELF - 2` (with shortcuts), or
    /// whose full-sequence path took other than `J+1`.
    pub step_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub repetitions: usize,
    pub buckets: Vec<BenchBucket>,
    /// All sentences pooled.
    pub total: BenchBucket,
}

impl BenchReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<8} {:>5} {:>6} {:>6} {:>6} {:>8} {:>8} {:>8} {:>9} {:>9} {:>9} {:>7} {:>7}\n",
            "bucket", "sents", "I", "N", "J", "steps_e", "steps_s", "steps_f", "sps_e", "sps_s", "sps_f", "x_e", "x_s"
        );
        for b in self.buckets.iter().chain(std::iter::once(&self.total)) {
            out.push_str(&format!(
                "{:<8} {:>5} {:>6.2} {:>6.2} {:>6.2} {:>8.2} {:>8.2} {:>8.2} {:>9.1} {:>9.1} {:>9.1} {:>7.2} {:>7.2}\n",
                b.label,
                b.sentences,
                b.avg_source_len,
                b.avg_gold_edits,
                b.avg_target_len,
                b.avg_substeps_edit,
                b.avg_substeps_edit_shortcuts,
                b.avg_substeps_full,
                b.sents_per_sec_edit,
                b.sents_per_sec_edit_shortcuts,
                b.sents_per_sec_full,
                b.speedup_edit,
                b.speedup_edit_shortcuts
            ));
        }
        out
    }
}

/// Label of bucket `i` for the given upper edges.
pub fn bucket_label(edges: &[usize], i: usize) -> String {
    match i {
        0 => format!("N<={}", edges[0]),
        i if i == edges.len() => format!(">{}", edges[i - 1]),
        i if edges[i - 1] + 1 == edges[i] => format!("{}", edges[i]),
        i => format!("{}-{}", edges[i - 1] + 1, edges[i]),
    }
}

fn bucket_of(edges: &[usize], n: usize) -> usize {
    edges.iter().position(|&e| n <= e).unwrap_or(edges.len())
}

struct Prepared {
    edit_src: SourceSequence,
    full_src: SourceSequence,
    source_len: usize,
    target_len: usize,
    gold_edits: usize,
}

#[derive(Default)]
struct Tally {
    seconds: f64,
    substeps: usize,
    evaluations: usize,
    decoded_edits: usize,
    violations: usize,
}

fn time_edit(model: &Checkpoint, items: &[&Prepared], params: &DecodeParams, reps: usize) -> anyhow::Result<Tally> {
    let mut t = Tally::default();
    for rep in 0..reps {
        for item in items {
            let start = Instant::now();
            let nbest = beam_decode(&model.model, &item.edit_src, params)?;
            t.seconds += start.elapsed().as_secs_f64();
            if rep == 0 {
                let best = nbest.best();
                let n = best.edits.len() - 1;
                let selfs = best.edits.iter().filter(|op| op.is_self()).count();
                let bound = if params.shortcuts_enabled {
                    (3 * (n + 1)).saturating_sub(selfs + 2)
                } else {
                    3 * (n + 1)
                };
                t.substeps += best.substeps;
                t.evaluations += nbest.evaluations;
                t.decoded_edits += n;
                t.violations += usize::from(best.substeps > bound);
            }
        }
    }
    Ok(t)
}

fn time_full(model: &Checkpoint, items: &[&Prepared], params: &DecodeParams, reps: usize) -> anyhow::Result<Tally> {
    let mut t = Tally::default();
    for rep in 0..reps {
        for item in items {
            let start = Instant::now();
            let nbest = full_sequence_decode(&model.model, &item.full_src, params)?;
            t.seconds += start.elapsed().as_secs_f64();
            if rep == 0 {
                let best = nbest.best();
                t.substeps += best.substeps;
                t.evaluations += nbest.evaluations;
                t.violations += usize::from(best.substeps != best.tokens.len() + 1);
            }
        }
    }
    Ok(t)
}

fn measure(
    label: String,
    items: &[&Prepared],
    edit: &Checkpoint,
    full: &Checkpoint,
    params: &DecodeParams,
    reps: usize,
) -> anyhow::Result<BenchBucket> {
    let plain = DecodeParams {
        shortcuts_enabled: false,
        refinement_passes: 1,
        ..params.clone()
    };
    let short = DecodeParams {
        shortcuts_enabled: true,
        ..plain.clone()
    };
    let e = time_edit(edit, items, &plain, reps)?;
    let s = time_edit(edit, items, &short, reps)?;
    let f = time_full(full, items, &plain, reps)?;
    let n = items.len() as f64;
    let avg = |x: usize| x as f64 / n;
    let sps = |secs: f64| (n * reps as f64) / secs.max(f64::MIN_POSITIVE);
    let (sps_e, sps_s, sps_f) = (sps(e.seconds), sps(s.seconds), sps(f.seconds));
    Ok(BenchBucket {
        label,
        sentences: items.len(),
        avg_source_len: avg(items.iter().map(|p| p.source_len).sum()),
        avg_gold_edits: avg(items.iter().map(|p| p.gold_edits).sum()),
        avg_target_len: avg(items.iter().map(|p| p.target_len).sum()),
        avg_decoded_edits: avg(e.decoded_edits),
        avg_substeps_edit: avg(e.substeps),
        avg_substeps_edit_shortcuts: avg(s.substeps),
        avg_substeps_full: avg(f.substeps),
        avg_evaluations_edit: avg(e.evaluations),
        avg_evaluations_edit_shortcuts: avg(s.evaluations),
        avg_evaluations_full: avg(f.evaluations),
        sents_per_sec_edit: sps_e,
        sents_per_sec_edit_shortcuts: sps_s,
        sents_per_sec_full: sps_f,
        speedup_edit: sps_e / sps_f,
        speedup_edit_shortcuts: sps_s / sps_f,
        step_bound_violations: e.violations + s.violations + f.violations,
    })
}

/// Decodes every bucket with the edit model (with and without shortcuts)
/// and with the full-sequence model. Only decode calls are timed.
/// Empty buckets are skipped with a warning on stderr.
pub fn run_bench(
    edit: &Checkpoint,
    full: &Checkpoint,
    inputs: &[BenchInput],
    params: &DecodeParams,
    edges: &[usize],
    repetitions: usize,
) -> anyhow::Result<BenchReport> {
    if edit.model.mode() != ModelMode::Edit || full.model.mode() != ModelMode::FullSequence {
        return Err(usage("bench needs an edit checkpoint and a full-sequence checkpoint"));
    }
    if edges.is_empty() || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("bucket edges must be non-empty and strictly increasing"));
    }
    if repetitions == 0 {
        return Err(usage("repetitions must be at least 1"));
    }
    if inputs.is_empty() {
        return Err(crate::Error::EmptyCorpus.into());
    }
    params.validate()?;
    let tagset: &TagSet = &edit.tagset;
    let mut prepared = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let edit_src = SourceSequence::from_surfaces(&edit.vocab, &input.source)
            .with_context(|| format!("bench sentence {}", i + 1))?;
        let target = TargetSequence::from_surfaces(&edit.vocab, &input.target);
        let gold = extract_edits(&edit_src, &target, None, tagset)?;
        prepared.push(Prepared {
            full_src: SourceSequence::from_surfaces(&full.vocab, &input.source)?,
            edit_src,
            source_len: input.source.len(),
            target_len: input.target.len(),
            gold_edits: gold.len() - 1,
        });
    }
    let mut buckets = Vec::new();
    for b in 0..=edges.len() {
        let label = bucket_label(edges, b);
        let items: Vec<&Prepared> = prepared.iter().filter(|p| bucket_of(edges, p.gold_edits) == b).collect();
        if items.is_empty() {
            eprintln!("warning: bucket {label} has no sentences; skipped");
            continue;
        }
        buckets.push(measure(label, &items, edit, full, params, repetitions)?);
    }
    let all: Vec<&Prepared> = prepared.iter().collect();
    let total = measure("all".into(), &all, edit, full, params, repetitions)?;
    Ok(BenchReport {
        repetitions,
        buckets,
        total,
    })
}

pub fn run(args: BenchArgs) -> anyhow::Result<()> {
    let params = args.flags.resolve()?;
    let edit = Checkpoint::load(&args.edit_checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", args.edit_checkpoint.display()))?;
    let full = Checkpoint::load(&args.full_checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", args.full_checkpoint.display()))?;
    let pairs = load_pairs(&args.corpus, args.tokenize.tokenize, &edit.tagset)?;
    let inputs: Vec<BenchInput> = pairs
        .into_iter()
        .map(|p| BenchInput {
            source: p.src,
            target: p.tgt,
        })
        .collect();
    let report = run_bench(&edit, &full, &inputs, &params, &args.buckets, args.repetitions)?;
    let mut out = output(None)?;
    write!(out, "{}", report.render())?;
    out.flush()?;
    if let Some(path) = &args.json {
        let mut w = output(Some(path))?;
        serde_json::to_writer_pretty(&mut w, &report)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}
