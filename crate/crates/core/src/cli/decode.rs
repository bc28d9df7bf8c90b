use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;
use serde_json::json;

use crate::decoder::{
    beam_decode, constrained_decode, full_sequence_decode, full_sequence_greedy, greedy_decode, iterative_refine,
    DecodeParams, OracleConstraint,
};
use crate::edit::EditSequence;
use crate::io::{read_edits, read_lines, write_edits, EditRecord};
use crate::model::{Checkpoint, ModelMode};
use crate::tokenize::tokenize;
use crate::vocab::SourceSequence;

use super::data::{apply_surfaces, output};
use super::{usage, DecodeFlags, TokenizeFlag};

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Source text, one sentence per line.
    pub src: PathBuf,
    #[command(flatten)]
    pub flags: DecodeFlags,
    /// Step-wise argmax instead of beam search.
    #[arg(long)]
    pub greedy: bool,
    /// Reference edit file for oracle-constrained decoding.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    /// Force the reference tags (needs `--gold`).
    #[arg(long = "oracle-tags")]
    pub oracle_tags: bool,
    /// Force the reference span ends (needs `--gold`).
    #[arg(long = "oracle-spans")]
    pub oracle_spans: bool,
    /// Let the oracle reuse the previously consumed reference label.
    #[arg(long = "allow-repeat")]
    pub allow_repeat: bool,
    /// Fail unless the checkpoint has this mode.
    #[arg(long)]
    pub mode: Option<ModelMode>,
    /// Write the full n-best list as JSONL here.
    #[arg(long)]
    pub nbest: Option<PathBuf>,
    /// Write the predicted edits as JSONL here (edit mode, one pass).
    #[arg(long = "edits-out")]
    pub edits_out: Option<PathBuf>,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

struct Decoded {
    /// (surfaces, score, edits) in rank order.
    nbest: Vec<(Vec<String>, f64, Option<EditSequence>)>,
}

pub fn run(args: DecodeArgs) -> anyhow::Result<()> {
    let params = args.flags.resolve()?;
    let oracle = args.oracle_tags || args.oracle_spans;
    if oracle && args.gold.is_none() {
        return Err(usage("--oracle-tags/--oracle-spans need --gold"));
    }
    if args.gold.is_some() && !oracle {
        return Err(usage("--gold needs --oracle-tags and/or --oracle-spans"));
    }
    if args.allow_repeat && !oracle {
        return Err(usage("--allow-repeat only applies to oracle decoding"));
    }
    let ckpt = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("cannot load checkpoint {}", args.checkpoint.display()))?;
    let mode = ckpt.model.mode();
    if let Some(expected) = args.mode {
        if expected != mode {
            return Err(crate::Error::ModeMismatch {
                expected: expected.as_str(),
                actual: mode.as_str(),
            }
            .into());
        }
    }
    if mode == ModelMode::FullSequence && (oracle || args.edits_out.is_some()) {
        return Err(crate::Error::ModeMismatch {
            expected: ModelMode::Edit.as_str(),
            actual: mode.as_str(),
        }
        .into());
    }
    if oracle && (args.greedy || params.refinement_passes > 1) {
        return Err(usage("oracle decoding runs a single beam pass"));
    }

    let lines = read_lines(&args.src)?;
    let gold = match &args.gold {
        Some(path) => {
            let records = read_edits(path)?;
            if records.len() != lines.len() {
                bail!(crate::Error::LengthMismatch(lines.len(), records.len()));
            }
            Some(records)
        }
        None => None,
    };

    let mut out = output(args.output.as_deref())?;
    let mut nbest_out = args.nbest.as_deref().map(|p| output(Some(p))).transpose()?;
    let mut edit_records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let surfaces = tokenize(line, args.tokenize.tokenize);
        let decoded = if surfaces.is_empty() {
            Decoded { nbest: vec![(Vec::new(), 0.0, None)] }
        } else {
            let constraint = match &gold {
                Some(records) => {
                    let g = records[i].to_edits(&ckpt.tagset, &ckpt.vocab)?;
                    Some(OracleConstraint::from_edits(&g, args.oracle_tags, args.oracle_spans, args.allow_repeat))
                }
                None => None,
            };
            decode_one(&ckpt, &surfaces, &params, args.greedy, constraint.as_ref())
                .with_context(|| format!("{}: line {}", args.src.display(), i + 1))?
        };
        let (best, _, edits) = &decoded.nbest[0];
        writeln!(out, "{}", args.tokenize.tokenize.join(best))?;
        if args.edits_out.is_some() {
            let edits = edits.clone().unwrap_or_else(|| EditSequence::identity(surfaces.len()));
            edit_records.push(EditRecord::from_edits(&surfaces, &edits, &ckpt.tagset, &ckpt.vocab));
        }
        if let Some(w) = nbest_out.as_mut() {
            let list: Vec<_> = decoded
                .nbest
                .iter()
                .map(|(s, score, _)| json!({"text": args.tokenize.tokenize.join(s), "score": score}))
                .collect();
            serde_json::to_writer(&mut *w, &json!({"line": i + 1, "nbest": list}))?;
            writeln!(w)?;
        }
    }
    out.flush()?;
    if let Some(mut w) = nbest_out {
        w.flush()?;
    }
    if let Some(path) = &args.edits_out {
        let mut w = output(Some(path))?;
        write_edits(&mut w, &edit_records)?;
        w.flush()?;
    }
    Ok(())
}

/// Decodes one tokenized sentence and returns the n-best outputs with
/// their scores, best first. Edit models copy SELF spans from the input
/// surfaces, so out-of-vocabulary words survive.
pub fn decode_sentence(
    ckpt: &Checkpoint,
    surfaces: &[String],
    params: &DecodeParams,
    greedy: bool,
) -> anyhow::Result<Vec<(Vec<String>, f64)>> {
    if surfaces.is_empty() {
        return Ok(vec![(Vec::new(), 0.0)]);
    }
    Ok(decode_one(ckpt, surfaces, params, greedy, None)?
        .nbest
        .into_iter()
        .map(|(s, score, _)| (s, score))
        .collect())
}

fn decode_one(
    ckpt: &Checkpoint,
    surfaces: &[String],
    params: &DecodeParams,
    greedy: bool,
    constraint: Option<&OracleConstraint>,
) -> anyhow::Result<Decoded> {
    let model = &ckpt.model;
    let vocab = &ckpt.vocab;
    let src = SourceSequence::from_surfaces(vocab, surfaces)?;
    let nbest = match model.mode() {
        ModelMode::FullSequence => {
            let hyps = if greedy {
                vec![full_sequence_greedy(model, &src, params)?]
            } else {
                full_sequence_decode(model, &src, params)?.hypotheses
            };
            hyps.into_iter()
                .map(|h| (vocab.decode(h.tokens.tokens()), h.score, None))
                .collect()
        }
        ModelMode::Edit => {
            let edit_hyps = if let Some(c) = constraint {
                constrained_decode(model, &src, params, c)?.hypotheses
            } else if greedy {
                vec![greedy_decode(model, &src, params)?]
            } else if params.refinement_passes > 1 {
                return Ok(Decoded {
                    nbest: iterative_refine(model, &src, params)?
                        .into_iter()
                        .map(|h| {
                            let edits = (h.passes.len() == 1).then(|| h.passes[0].clone());
                            let text = match &edits {
                                Some(e) => apply_surfaces(surfaces, e, vocab),
                                None => vocab.decode(h.target.tokens()),
                            };
                            (text, h.score, edits)
                        })
                        .collect(),
                });
            } else {
                beam_decode(model, &src, params)?.hypotheses
            };
            edit_hyps
                .into_iter()
                .map(|h| (apply_surfaces(surfaces, &h.edits, vocab), h.score, Some(h.edits)))
                .collect()
        }
    };
    Ok(Decoded { nbest })
}
