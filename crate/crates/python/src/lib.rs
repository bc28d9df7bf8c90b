//! Python bindings: edit extraction and application, metrics, and
//! training/decoding of edit and full-sequence models.

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spanedit::cli::decode_sentence;
use spanedit::decoder::DecodeParams;
use spanedit::io::EditRecord;
use spanedit::metrics;
use spanedit::model::{train, Checkpoint, EditModel, Example, ModelConfig, ModelMode, TrainConfig};
use spanedit::{SourceSequence, TagSet, TargetSequence, Vocabulary};

/// `(tag, span_end, replacement)`; replacement is `None` for a deletion.
type PyEdit = (String, usize, Option<String>);

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(format!("{e:#}"))
}

fn tagset(name: &str) -> PyResult<TagSet> {
    TagSet::resolve(name).map_err(value_error)
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

fn record_vocab(records: &[&EditRecord]) -> Vocabulary {
    Vocabulary::from_corpus(
        records
            .iter()
            .flat_map(|r| r.src.iter().map(String::as_str).chain(r.edits.iter().filter_map(|e| e.2.as_deref()))),
    )
}

/// Edit sequence turning `source` into `target`, one tag per changed
/// region when `tags` is given.
#[pyfunction]
#[pyo3(signature = (source, target, tags=None, tagset="trivial"))]
fn extract_edits(source: Vec<String>, target: Vec<String>, tags: Option<Vec<String>>, tagset: &str) -> PyResult<Vec<PyEdit>> {
    let ts = self::tagset(tagset)?;
    let vocab = Vocabulary::from_corpus(source.iter().chain(&target).map(String::as_str));
    let src = SourceSequence::from_surfaces(&vocab, &source).map_err(value_error)?;
    let tgt = TargetSequence::from_surfaces(&vocab, &target);
    let tag_ids = tags
        .map(|t| t.iter().map(|s| ts.id(s)).collect::<Result<Vec<_>, _>>())
        .transpose()
        .map_err(value_error)?;
    let edits = spanedit::extract_edits(&src, &tgt, tag_ids.as_deref(), &ts).map_err(value_error)?;
    Ok(EditRecord::from_edits(&source, &edits, &ts, &vocab).edits)
}

/// Applies an edit sequence and returns the target tokens.
#[pyfunction]
#[pyo3(signature = (source, edits, tagset="trivial"))]
fn apply_edits(source: Vec<String>, edits: Vec<PyEdit>, tagset: &str) -> PyResult<Vec<String>> {
    let record = EditRecord { src: source, edits };
    record.apply(&self::tagset(tagset)?).map_err(value_error)
}

/// Every violated validity clause as `(op index, message)`.
#[pyfunction]
#[pyo3(signature = (source, edits, tagset="trivial"))]
fn validate(source: Vec<String>, edits: Vec<PyEdit>, tagset: &str) -> PyResult<Vec<(usize, String)>> {
    let record = EditRecord { src: source, edits };
    let vocab = record_vocab(&[&record]);
    let seq = record.to_edits(&self::tagset(tagset)?, &vocab).map_err(value_error)?;
    Ok(spanedit::validate(&seq, record.src.len())
        .violations
        .into_iter()
        .map(|(i, v)| (i, v.to_string()))
        .collect())
}

/// Unit-cost edit distance between two token lists.
#[pyfunction]
fn edit_distance(source: Vec<String>, target: Vec<String>) -> usize {
    let vocab = Vocabulary::from_corpus(source.iter().chain(&target).map(String::as_str));
    spanedit::align(&vocab.encode(&source), &vocab.encode(&target))
        .iter()
        .map(|op| op.cost())
        .sum()
}

/// Sentence SARI on a 0-100 scale.
#[pyfunction]
fn sari(source: Vec<String>, hypothesis: Vec<String>, references: Vec<Vec<String>>) -> PyResult<f64> {
    metrics::sari(&source, &hypothesis, &references).map_err(value_error)
}

#[pyfunction]
fn exact_match(hypotheses: Vec<String>, references: Vec<String>) -> PyResult<f64> {
    metrics::exact_match(&hypotheses, &references).map_err(value_error)
}

#[pyfunction]
fn sentence_error_rate(hypotheses: Vec<String>, references: Vec<String>) -> PyResult<f64> {
    metrics::sentence_error_rate(&hypotheses, &references).map_err(value_error)
}

/// Span-level `(precision, recall, f_beta)` of two edit sequences over the
/// same source; tags are ignored.
#[pyfunction]
#[pyo3(signature = (source, hypothesis, gold, beta=0.5, tagset="trivial"))]
fn span_prf(source: Vec<String>, hypothesis: Vec<PyEdit>, gold: Vec<PyEdit>, beta: f64, tagset: &str) -> PyResult<(f64, f64, f64)> {
    let ts = self::tagset(tagset)?;
    let h = EditRecord { src: source.clone(), edits: hypothesis };
    let g = EditRecord { src: source, edits: gold };
    let vocab = record_vocab(&[&h, &g]);
    let hs = h.to_edits(&ts, &vocab).map_err(value_error)?;
    let gs = g.to_edits(&ts, &vocab).map_err(value_error)?;
    let r = metrics::span_prf(&hs, &gs, beta).map_err(value_error)?;
    Ok((r.precision, r.recall, r.f_beta))
}

/// A trained model with its vocabulary and tag set.
#[pyclass(name = "Model", module = "spanedit_py")]
struct PyModel {
    ckpt: Checkpoint,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyModel {
            ckpt: Checkpoint::load(&path).map_err(value_error)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.ckpt.save(&path).map_err(value_error)
    }

    /// Trains on whitespace-tokenized `(source, target)` pairs. Returns the
    /// model and the per-step mean training loss.
    #[staticmethod]
    #[pyo3(signature = (pairs, mode="edit", tagset="trivial", steps=1000, learning_rate=1e-3, batch_size=8, hidden=64, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        pairs: Vec<(String, String)>,
        mode: &str,
        tagset: &str,
        steps: usize,
        learning_rate: f64,
        batch_size: usize,
        hidden: usize,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let mode: ModelMode = mode.parse().map_err(value_error)?;
        let ts = self::tagset(tagset)?;
        let tokenized: Vec<(Vec<String>, Vec<String>)> = pairs.iter().map(|(s, t)| (words(s), words(t))).collect();
        let vocab = Vocabulary::from_corpus(tokenized.iter().flat_map(|(s, t)| s.iter().chain(t)).map(String::as_str));
        let examples = tokenized
            .iter()
            .map(|(s, t)| {
                let src = SourceSequence::from_surfaces(&vocab, s)?;
                Example::from_pair(src, TargetSequence::from_surfaces(&vocab, t), None, &ts)
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_error)?;
        let config = ModelConfig {
            hidden,
            ..ModelConfig::desk(vocab.len(), ts.len()).with_mode(mode)
        };
        let train_config = TrainConfig {
            steps,
            learning_rate,
            batch_size,
            seed,
            ..TrainConfig::default()
        };
        let (model, report) = py
            .detach(|| -> spanedit::Result<_> {
                let mut model = EditModel::new(config, seed)?;
                let report = train(&mut model, &examples, &train_config)?;
                Ok((model, report))
            })
            .map_err(value_error)?;
        let curve = report.curve.iter().map(|l| l.total).collect();
        Ok((
            PyModel {
                ckpt: Checkpoint { model, vocab, tagset: ts },
            },
            curve,
        ))
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.ckpt.model.mode().as_str()
    }

    /// Best output for a whitespace-tokenized sentence.
    #[pyo3(signature = (text, beam_size=4, shortcuts=false, passes=1, identity_penalty=1.0, alpha=0.0, greedy=false))]
    #[allow(clippy::too_many_arguments)]
    fn decode(
        &self,
        py: Python<'_>,
        text: &str,
        beam_size: usize,
        shortcuts: bool,
        passes: usize,
        identity_penalty: f64,
        alpha: f64,
        greedy: bool,
    ) -> PyResult<String> {
        let nbest = self.decode_nbest(py, text, beam_size, shortcuts, passes, identity_penalty, alpha, greedy)?;
        Ok(nbest.into_iter().next().map(|(t, _)| t).unwrap_or_default())
    }

    /// Ranked `(text, score)` outputs.
    #[pyo3(signature = (text, beam_size=4, shortcuts=false, passes=1, identity_penalty=1.0, alpha=0.0, greedy=false))]
    #[allow(clippy::too_many_arguments)]
    fn decode_nbest(
        &self,
        py: Python<'_>,
        text: &str,
        beam_size: usize,
        shortcuts: bool,
        passes: usize,
        identity_penalty: f64,
        alpha: f64,
        greedy: bool,
    ) -> PyResult<Vec<(String, f64)>> {
        let params = DecodeParams {
            beam_size,
            shortcuts_enabled: shortcuts,
            refinement_passes: passes,
            identity_penalty,
            length_norm_alpha: alpha,
            ..DecodeParams::default()
        };
        let surfaces = words(text);
        let out = py
            .detach(|| decode_sentence(&self.ckpt, &surfaces, &params, greedy))
            .map_err(value_error)?;
        Ok(out.into_iter().map(|(s, score)| (s.join(" "), score)).collect())
    }

    fn __repr__(&self) -> String {
        let c = self.ckpt.model.config();
        format!(
            "Model(mode={}, hidden={}, vocab={}, tags={})",
            self.mode(),
            c.hidden,
            self.ckpt.vocab.len(),
            self.ckpt.tagset.len()
        )
    }
}

/// Adds every function and class to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(extract_edits, m)?)?;
    m.add_function(wrap_pyfunction!(apply_edits, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(edit_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sari, m)?)?;
    m.add_function(wrap_pyfunction!(exact_match, m)?)?;
    m.add_function(wrap_pyfunction!(sentence_error_rate, m)?)?;
    m.add_function(wrap_pyfunction!(span_prf, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}

#[pymodule]
fn spanedit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
