use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::bail;
use clap::Args;

use crate::edit::EditSequence;
use crate::io::{read_edits, read_lines, EditRecord};
use crate::metrics::{
    corpus_sari, corpus_span_prf, corpus_tagging_prf, exact_match, render_table, sentence_error_rate, Metric,
    MetricReport,
};
use crate::tags::TagSet;
use crate::tokenize::tokenize;
use crate::vocab::Vocabulary;

use super::data::output;
use super::{usage, TokenizeFlag};

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Hypothesis text, one sentence per line.
    #[arg(long)]
    pub hyp: Option<PathBuf>,
    /// Reference text; repeat for multiple references.
    #[arg(long = "ref")]
    pub refs: Vec<PathBuf>,
    /// Source text (needed for SARI).
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Hypothesis edits (JSONL).
    #[arg(long = "hyp-edits")]
    pub hyp_edits: Option<PathBuf>,
    /// Reference edits (JSONL).
    #[arg(long = "gold-edits")]
    pub gold_edits: Option<PathBuf>,
    /// Comma-separated metrics (ser, exact, sari, span, tagging). Default:
    /// every metric the given inputs allow.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Tagging: count a tag as correct when it matches the reference tag
    /// of the maximally overlapping span.
    #[arg(long = "project-spans")]
    pub project_spans: bool,
    #[arg(long, default_value = "trivial")]
    pub tagset: String,
    /// Print JSON lines instead of a table.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn tokenized(path: &Path, args: &ScoreArgs) -> anyhow::Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| tokenize(l, args.tokenize.tokenize))
        .collect())
}

fn resolve_edits(hyp: &[EditRecord], gold: &[EditRecord], tagset: &TagSet) -> anyhow::Result<(Vec<EditSequence>, Vec<EditSequence>)> {
    if hyp.len() != gold.len() {
        bail!(crate::Error::LengthMismatch(hyp.len(), gold.len()));
    }
    let surfaces = hyp
        .iter()
        .chain(gold)
        .flat_map(|r| r.src.iter().map(String::as_str).chain(r.edits.iter().filter_map(|e| e.2.as_deref())));
    let vocab = Vocabulary::from_corpus(surfaces);
    let conv = |rs: &[EditRecord]| -> anyhow::Result<Vec<EditSequence>> {
        rs.iter().map(|r| Ok(r.to_edits(tagset, &vocab)?)).collect()
    };
    Ok((conv(hyp)?, conv(gold)?))
}

pub fn run(args: ScoreArgs) -> anyhow::Result<()> {
    let mut metrics = Vec::new();
    for name in &args.metrics {
        let m: Metric = name.trim().parse().map_err(usage)?;
        if !metrics.contains(&m) {
            metrics.push(m);
        }
    }
    let have_text = args.hyp.is_some() && !args.refs.is_empty();
    let have_edits = args.hyp_edits.is_some() && args.gold_edits.is_some();
    if metrics.is_empty() {
        if have_text {
            metrics.extend([Metric::Ser, Metric::Exact]);
            if args.src.is_some() {
                metrics.push(Metric::Sari);
            }
        }
        if have_edits {
            metrics.extend([Metric::Span, Metric::Tagging]);
        }
        if metrics.is_empty() {
            return Err(usage("nothing to score: give --hyp with --ref, or --hyp-edits with --gold-edits"));
        }
    }
    for m in &metrics {
        let ok = match m {
            Metric::Ser | Metric::Exact => have_text,
            Metric::Sari => have_text && args.src.is_some(),
            Metric::Span | Metric::Tagging => have_edits,
        };
        if !ok {
            return Err(usage(format!("metric `{m}` needs inputs that were not given")));
        }
    }
    if !(args.beta > 0.0 && args.beta.is_finite()) {
        return Err(usage("--beta must be positive"));
    }

    let mut reports = Vec::new();
    let text = if have_text {
        let hyps = tokenized(args.hyp.as_ref().unwrap(), &args)?;
        let refs = args
            .refs
            .iter()
            .map(|p| tokenized(p, &args))
            .collect::<anyhow::Result<Vec<_>>>()?;
        for r in &refs {
            if r.len() != hyps.len() {
                bail!(crate::Error::LengthMismatch(hyps.len(), r.len()));
            }
        }
        Some((hyps, refs))
    } else {
        None
    };
    let edits = if have_edits {
        let tagset = TagSet::resolve(&args.tagset)?;
        let hyp = read_edits(args.hyp_edits.as_ref().unwrap())?;
        let gold = read_edits(args.gold_edits.as_ref().unwrap())?;
        Some(resolve_edits(&hyp, &gold, &tagset)?)
    } else {
        None
    };

    for m in &metrics {
        let report = match m {
            Metric::Ser | Metric::Exact => {
                let (hyps, refs) = text.as_ref().unwrap();
                let v = if *m == Metric::Ser {
                    sentence_error_rate(hyps, &refs[0])?
                } else {
                    exact_match(hyps, &refs[0])?
                };
                MetricReport::scalar(*m, v, hyps.len())
            }
            Metric::Sari => {
                let (hyps, refs) = text.as_ref().unwrap();
                let srcs = tokenized(args.src.as_ref().unwrap(), &args)?;
                let per_sentence: Vec<Vec<Vec<String>>> =
                    (0..hyps.len()).map(|i| refs.iter().map(|r| r[i].clone()).collect()).collect();
                MetricReport::scalar(*m, corpus_sari(&srcs, hyps, &per_sentence)?, hyps.len())
            }
            Metric::Span => {
                let (h, g) = edits.as_ref().unwrap();
                MetricReport::prf(*m, &corpus_span_prf(h, g, args.beta)?)
            }
            Metric::Tagging => {
                let (h, g) = edits.as_ref().unwrap();
                MetricReport::prf(*m, &corpus_tagging_prf(h, g, args.beta, args.project_spans)?)
            }
        };
        reports.push(report);
    }

    let mut out = output(args.output.as_deref())?;
    if args.json {
        for r in &reports {
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
        }
    } else {
        write!(out, "{}", render_table(&reports))?;
    }
    out.flush()?;
    Ok(())
}
