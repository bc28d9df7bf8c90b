use std::io::{self, BufReader, Write};
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Args;

use crate::io::{parse_edits, read_edits, read_lines};
use crate::tags::TagSet;
use crate::tokenize::tokenize;

use super::data::output;
use super::TokenizeFlag;

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// Edit file (JSONL, one record per line); `-` reads stdin.
    #[arg(default_value = "-")]
    pub edits: PathBuf,
    /// Source text file; every record must match its line.
    #[arg(long)]
    pub src: Option<PathBuf>,
    #[arg(long, default_value = "trivial")]
    pub tagset: String,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: ApplyArgs) -> anyhow::Result<()> {
    let tagset = TagSet::resolve(&args.tagset)?;
    let records = if args.edits.as_os_str() == "-" {
        parse_edits(BufReader::new(io::stdin().lock()), "<stdin>")?
    } else {
        read_edits(&args.edits)?
    };
    if let Some(src_path) = &args.src {
        let lines = read_lines(src_path)?;
        if lines.len() != records.len() {
            bail!(crate::Error::LengthMismatch(records.len(), lines.len()));
        }
        for (i, (line, rec)) in lines.iter().zip(&records).enumerate() {
            if tokenize(line, args.tokenize.tokenize) != rec.src {
                bail!("record {} does not match source line {}", i + 1, i + 1);
            }
        }
    }
    let label = args.edits.display().to_string();
    let mut out = output(args.output.as_deref())?;
    for (i, rec) in records.iter().enumerate() {
        let tgt = rec.apply(&tagset).with_context(|| format!("{label}: record {}", i + 1))?;
        writeln!(out, "{}", args.tokenize.tokenize.join(&tgt))?;
    }
    out.flush()?;
    Ok(())
}
