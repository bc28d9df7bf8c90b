use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use crate::model::{train, Checkpoint, EditModel, Example, ModelConfig, ModelMode, TrainConfig};
use crate::tags::TagSet;

use super::data::{corpus_vocab, load_pairs, to_example};
use super::{usage, TokenizeFlag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Desk,
    Base,
    Big,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TSV corpus or JSONL edit file.
    pub corpus: PathBuf,
    /// Model type: edit or fullseq.
    #[arg(long, default_value = "edit")]
    pub mode: ModelMode,
    #[arg(long, default_value = "trivial")]
    pub tagset: String,
    /// Size preset the model section of `--config` is layered on.
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    pub preset: Preset,
    /// JSON file with optional "model" and "train" sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[command(flatten)]
    pub tokenize: TokenizeFlag,
    /// Checkpoint path.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Loss curve CSV (default: checkpoint path with `.loss.csv` appended).
    #[arg(long = "loss-csv")]
    pub loss_csv: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    model: Option<Value>,
    #[serde(default)]
    train: Option<TrainConfig>,
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                b.insert(k, v);
            }
        }
        (b, o) => *b = o,
    }
}

pub fn run(args: TrainArgs, seed: u64) -> anyhow::Result<()> {
    let tagset = TagSet::resolve(&args.tagset)?;
    let pairs = load_pairs(&args.corpus, args.tokenize.tokenize, &tagset)?;
    if pairs.is_empty() {
        return Err(crate::Error::EmptyCorpus.into());
    }
    let vocab = corpus_vocab(&pairs);
    let examples = pairs
        .iter()
        .map(|p| to_example(p, &vocab, &tagset))
        .collect::<anyhow::Result<Vec<Example>>>()?;

    let file = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str::<ConfigFile>(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    let preset = match args.preset {
        Preset::Desk => ModelConfig::desk(vocab.len(), tagset.len()),
        Preset::Base => ModelConfig::base(vocab.len(), tagset.len()),
        Preset::Big => ModelConfig::big(vocab.len(), tagset.len()),
    };
    let mut model_json = serde_json::to_value(&preset)?;
    if let Some(m) = file.model {
        merge(&mut model_json, m);
    }
    let mut model_config: ModelConfig =
        serde_json::from_value(model_json).map_err(|e| usage(format!("model config: {e}")))?;
    model_config.vocab_size = vocab.len();
    model_config.tagset_size = tagset.len();
    model_config.mode = args.mode;

    let mut train_config = file.train.unwrap_or_default();
    train_config.seed = seed;
    if let Some(v) = args.steps {
        train_config.steps = v;
    }
    if let Some(v) = args.lr {
        train_config.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        train_config.batch_size = v;
    }

    let mut model = EditModel::new(model_config, seed)?;
    let report = train(&mut model, &examples, &train_config)?;
    let checkpoint = Checkpoint { model, vocab, tagset };
    checkpoint.save(&args.output)?;
    let csv_path = args.loss_csv.unwrap_or_else(|| {
        let mut s = args.output.clone().into_os_string();
        s.push(".loss.csv");
        PathBuf::from(s)
    });
    fs::write(&csv_path, report.to_csv()).with_context(|| format!("cannot write {}", csv_path.display()))?;
    eprintln!(
        "trained {} steps on {} pairs: loss {:.4} -> {:.4}",
        train_config.steps,
        examples.len(),
        report.initial().unwrap_or(f64::NAN),
        report.last().unwrap_or(f64::NAN)
    );
    Ok(())
}
