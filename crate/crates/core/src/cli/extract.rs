use std::path::PathBuf;

use clap::Args;

use crate::editops::StatsAccumulator;
use crate::io::{write_edits, EditRecord};
use crate::tags::TagSet;

use super::data::{corpus_vocab, load_pairs, output, to_example};
use super::TokenizeFlag;

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// TSV corpus: source, target, optional space-separated tags per
    /// changed region.
    pub corpus: PathBuf,
    /// Built-in task name or tag set file.
    #[arg(long, default_value = "trivial")]
    pub tagset: String,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
    /// Output file (stdout when omitted).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: ExtractArgs) -> anyhow::Result<()> {
    let tagset = TagSet::resolve(&args.tagset)?;
    let pairs = load_pairs(&args.corpus, args.tokenize.tokenize, &tagset)?;
    let vocab = corpus_vocab(&pairs);
    let mut stats = StatsAccumulator::default();
    let mut records = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let ex = to_example(pair, &vocab, &tagset)?;
        stats.add(&ex.src, &ex.target, &tagset)?;
        records.push(EditRecord::from_edits(&pair.src, &ex.edits, &tagset, &vocab));
    }
    let mut out = output(args.output.as_deref())?;
    write_edits(&mut out, &records)?;
    out.flush()?;
    eprintln!("{}", stats.finish()?);
    Ok(())
}
