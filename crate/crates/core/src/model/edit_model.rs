use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{log_softmax, softmax, Graph, Mat, ParamStore, Var};
use crate::edit::{EditOp, EditSequence, Replacement};
use crate::editops::validate;
use crate::error::{Error, Result};
use crate::tags::TagId;
use crate::vocab::{SourceSequence, TargetSequence, TokenId};

use super::config::{ModelConfig, ModelMode};
use super::network::{Layout, Net};

/// Maps a replacement onto the output vocabulary. `SELF` shares the PAD
/// slot, which is never a real replacement target.
pub fn replacement_class(r: Replacement) -> usize {
    match r {
        Replacement::Keep => TokenId::PAD.index(),
        Replacement::Delete => TokenId::DEL.index(),
        Replacement::Eos => TokenId::EOS.index(),
        Replacement::Token(t) => t.index(),
    }
}

pub fn class_replacement(class: usize) -> Replacement {
    match class {
        0 => Replacement::Keep,
        1 => Replacement::Delete,
        2 => Replacement::Eos,
        c => Replacement::Token(TokenId(c as u32)),
    }
}

/// What decoder A is fed for one step: the previous triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StepFeedback {
    pub prev_tag: TagId,
    pub prev_span_end: usize,
    pub prev_replacement: TokenId,
}

impl StepFeedback {
    /// Step-1 feedback: `SELF`, span end 0 (the learned start vector), `PAD`.
    pub fn start() -> Self {
        StepFeedback {
            prev_tag: TagId::SELF,
            prev_span_end: 0,
            prev_replacement: TokenId::PAD,
        }
    }

    pub fn from_op(op: &EditOp) -> Self {
        StepFeedback {
            prev_tag: op.tag,
            prev_span_end: op.span_end,
            prev_replacement: TokenId(replacement_class(op.replacement) as u32),
        }
    }

    /// Feedback history for predicting every op of `ops`.
    pub fn history(ops: &[EditOp]) -> Vec<StepFeedback> {
        std::iter::once(StepFeedback::start())
            .chain(ops.iter().take(ops.len().saturating_sub(1)).map(StepFeedback::from_op))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub tag_ce: f64,
    pub span_ce: f64,
    pub replacement_ce: f64,
    pub total: f64,
}

/// Per-step log-probabilities of a fixed edit sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLogProbs {
    pub tag: f64,
    pub span: f64,
    pub replacement: f64,
}

/// Encoder output for one source, reused across decoding sub-steps.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSource {
    pub states: Mat,
}

impl EncodedSource {
    pub fn len(&self) -> usize {
        self.states.rows
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows == 0
    }
}

#[derive(Debug, Clone)]
pub struct EditModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl PartialEq for EditModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl EditModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let layout = Layout::build(&config, &mut params, &mut rng);
        Ok(EditModel {
            config,
            params,
            layout,
        })
    }

    /// Rebuilds a model from a config and named parameter values; names and
    /// shapes must match the layout the config implies.
    pub fn from_params(config: ModelConfig, values: Vec<(String, Mat)>) -> Result<Self> {
        let mut model = EditModel::new(config, 0)?;
        if values.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameters, found {}",
                model.params.len(),
                values.len()
            )));
        }
        for (name, value) in values {
            let id = model
                .params
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter `{name}`")))?;
            let slot = model.params.get_mut(id);
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter `{name}` has shape {:?}, expected {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value;
        }
        Ok(model)
    }

    /// Zeroes the output projections so every head starts exactly uniform.
    pub fn with_zeroed_heads(mut self) -> Self {
        for id in self.layout.output_projections() {
            let m = self.params.get_mut(id);
            m.data.iter_mut().for_each(|v| *v = 0.0);
        }
        self
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> ModelMode {
        self.config.mode
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn net(&self) -> Net<'_> {
        Net {
            layout: &self.layout,
            heads: self.config.attention_heads,
            hidden: self.config.hidden,
        }
    }

    fn require(&self, mode: ModelMode) -> Result<()> {
        if self.config.mode != mode {
            return Err(Error::ModeMismatch {
                expected: mode.as_str(),
                actual: self.config.mode.as_str(),
            });
        }
        Ok(())
    }

    fn check_positions(&self, len: usize) -> Result<()> {
        if len > self.config.max_positions {
            return Err(Error::Overlength {
                len,
                max: self.config.max_positions,
            });
        }
        Ok(())
    }

    fn check_tokens(&self, tokens: &[TokenId]) -> Result<Vec<usize>> {
        tokens
            .iter()
            .map(|t| {
                if t.index() < self.config.vocab_size {
                    Ok(t.index())
                } else {
                    Err(Error::Config(format!(
                        "token {t} outside vocabulary of size {}",
                        self.config.vocab_size
                    )))
                }
            })
            .collect()
    }

    fn check_tags(&self, tags: &[TagId]) -> Result<Vec<usize>> {
        tags.iter()
            .map(|t| {
                if t.index() < self.config.tagset_size {
                    Ok(t.index())
                } else {
                    Err(Error::Config(format!(
                        "{t} outside tag set of size {}",
                        self.config.tagset_size
                    )))
                }
            })
            .collect()
    }

    /// One `d`-dimensional state per source token.
    pub fn encode(&self, src: &SourceSequence) -> Result<EncodedSource> {
        self.check_positions(src.len())?;
        let tokens = self.check_tokens(src.tokens())?;
        let mut g = Graph::new(&self.params);
        let enc = self.net().encode(&mut g, &tokens);
        Ok(EncodedSource {
            states: g.value(enc).clone(),
        })
    }

    fn a_graph(&self, g: &mut Graph, enc: Var, source_len: usize, history: &[StepFeedback]) -> Result<Var> {
        self.require(ModelMode::Edit)?;
        if history.is_empty() {
            return Err(Error::Config("feedback history must contain the start step".into()));
        }
        self.check_positions(history.len())?;
        let mut tags = Vec::with_capacity(history.len());
        let mut spans = Vec::with_capacity(history.len());
        let mut repl = Vec::with_capacity(history.len());
        for fb in history {
            if fb.prev_span_end > source_len {
                return Err(Error::SpanOutOfRange {
                    span: fb.prev_span_end,
                    len: source_len,
                });
            }
            tags.push(fb.prev_tag);
            spans.push(fb.prev_span_end);
            repl.push(fb.prev_replacement);
        }
        let tags = self.check_tags(&tags)?;
        let repl = self.check_tokens(&repl)?;
        let net = self.net();
        let input = net.feedback_input(g, enc, &tags, &spans, &repl);
        Ok(net.decoder_a(g, input, enc))
    }

    /// Decoder A outputs for every step of the history, `n × d`.
    pub fn decoder_a_outputs(&self, enc: &EncodedSource, history: &[StepFeedback]) -> Result<Mat> {
        let mut g = Graph::new(&self.params);
        let e = g.input(enc.states.clone());
        let ha = self.a_graph(&mut g, e, enc.len(), history)?;
        Ok(g.value(ha).clone())
    }

    /// The current step's decoder A state `h`.
    pub fn decoder_a_step(&self, enc: &EncodedSource, history: &[StepFeedback]) -> Result<Vec<f64>> {
        let out = self.decoder_a_outputs(enc, history)?;
        Ok(out.row(out.rows - 1).to_vec())
    }

    pub fn tag_log_probs(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.require(ModelMode::Edit)?;
        let mut g = Graph::new(&self.params);
        let hv = g.input(Mat::row_vector(h.to_vec()));
        let z = self.net().tag_logits(&mut g, hv);
        Ok(log_softmax(&g.value(z).data))
    }

    /// Distribution over the tag set.
    pub fn predict_tag(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.tag_log_probs(h)?.into_iter().map(f64::exp).collect())
    }

    pub fn span_log_probs(&self, h: &[f64], tag: TagId, enc: &EncodedSource) -> Result<Vec<f64>> {
        self.require(ModelMode::Edit)?;
        let tags = self.check_tags(&[tag])?;
        let mut g = Graph::new(&self.params);
        let hv = g.input(Mat::row_vector(h.to_vec()));
        let e = g.input(enc.states.clone());
        let z = self.net().span_logits(&mut g, hv, &tags, e);
        Ok(log_softmax(&g.value(z).data))
    }

    /// Pointer distribution over span ends `1..=I` (index `k` is position `k+1`).
    pub fn predict_span(&self, h: &[f64], tag: TagId, enc: &EncodedSource) -> Result<Vec<f64>> {
        Ok(self.span_log_probs(h, tag, enc)?.into_iter().map(f64::exp).collect())
    }

    /// Replacement log-distribution for the last decoder A step, given the
    /// step's tag and span end.
    pub fn replacement_log_probs(
        &self,
        tag: TagId,
        span_end: usize,
        enc: &EncodedSource,
        a_outputs: &Mat,
    ) -> Result<Vec<f64>> {
        self.require(ModelMode::Edit)?;
        if span_end > enc.len() {
            return Err(Error::SpanOutOfRange {
                span: span_end,
                len: enc.len(),
            });
        }
        let tags = self.check_tags(&[tag])?;
        let net = self.net();
        let mut g = Graph::new(&self.params);
        let e = g.input(enc.states.clone());
        let a_all = g.input(a_outputs.clone());
        let last = g.rows(a_all, &[a_outputs.rows - 1]);
        let table = net.span_table(&mut g, e);
        let state = g.rows(table, &[span_end]);
        let b_in = net.decoder_b_input(&mut g, last, &tags, state);
        let hb = net.decoder_b(&mut g, b_in, a_all, e, false);
        let z = net.output_logits(&mut g, hb);
        Ok(log_softmax(&g.value(z).data))
    }

    /// Distribution over the output vocabulary (class 0 is `SELF`).
    pub fn decoder_b_step(
        &self,
        tag: TagId,
        span_end: usize,
        enc: &EncodedSource,
        a_outputs: &Mat,
    ) -> Result<Vec<f64>> {
        Ok(self
            .replacement_log_probs(tag, span_end, enc, a_outputs)?
            .into_iter()
            .map(f64::exp)
            .collect())
    }

    fn check_gold(&self, src: &SourceSequence, gold: &EditSequence) -> Result<()> {
        validate(gold, src.len()).into_result()?;
        if let Some(op) = gold.ops.iter().find(|o| o.span_end == 0) {
            return Err(Error::SpanOutOfRange {
                span: op.span_end,
                len: src.len(),
            });
        }
        self.check_positions(gold.len())
    }

    /// Builds the teacher-forced loss graph; returns the total and the
    /// three per-step-averaged cross-entropy nodes.
    pub(crate) fn edit_loss_graph(
        &self,
        g: &mut Graph,
        src: &SourceSequence,
        gold: &EditSequence,
    ) -> Result<[Var; 4]> {
        self.require(ModelMode::Edit)?;
        self.check_gold(src, gold)?;
        self.check_positions(src.len())?;
        let src_tokens = self.check_tokens(src.tokens())?;
        let ops = &gold.ops;
        let n = ops.len();
        let net = self.net();

        let enc = net.encode(g, &src_tokens);
        let ha = self.a_graph(g, enc, src.len(), &StepFeedback::history(ops))?;

        let tags = self.check_tags(&ops.iter().map(|o| o.tag).collect::<Vec<_>>())?;
        let spans: Vec<usize> = ops.iter().map(|o| o.span_end).collect();
        let classes: Vec<usize> = ops.iter().map(|o| replacement_class(o.replacement)).collect();
        let classes: Vec<usize> = self.check_tokens(
            &classes.iter().map(|&c| TokenId(c as u32)).collect::<Vec<_>>(),
        )?;

        let scale = -1.0 / n as f64;
        let tag_lp = net.tag_logits(g, ha);
        let tag_lp = g.log_softmax(tag_lp);
        let picks: Vec<(usize, usize)> = tags.iter().copied().enumerate().collect();
        let tag_ce = g.pick_sum(tag_lp, &picks);
        let tag_ce = g.scale(tag_ce, scale);

        let span_lp = net.span_logits(g, ha, &tags, enc);
        let span_lp = g.log_softmax(span_lp);
        let picks: Vec<(usize, usize)> = spans.iter().enumerate().map(|(i, &p)| (i, p - 1)).collect();
        let span_ce = g.pick_sum(span_lp, &picks);
        let span_ce = g.scale(span_ce, scale);

        let table = net.span_table(g, enc);
        let states = g.rows(table, &spans);
        let b_in = net.decoder_b_input(g, ha, &tags, states);
        let hb = net.decoder_b(g, b_in, ha, enc, true);
        let repl_lp = net.output_logits(g, hb);
        let repl_lp = g.log_softmax(repl_lp);
        let picks: Vec<(usize, usize)> = classes.iter().copied().enumerate().collect();
        let repl_ce = g.pick_sum(repl_lp, &picks);
        let repl_ce = g.scale(repl_ce, scale);

        let sum = g.add(tag_ce, span_ce);
        let total = g.add(sum, repl_ce);
        Ok([total, tag_ce, span_ce, repl_ce])
    }

    pub(crate) fn full_loss_graph(
        &self,
        g: &mut Graph,
        src: &SourceSequence,
        tgt: &TargetSequence,
    ) -> Result<Var> {
        self.require(ModelMode::FullSequence)?;
        self.check_positions(src.len())?;
        self.check_positions(tgt.len() + 1)?;
        let src_tokens = self.check_tokens(src.tokens())?;
        let mut input = vec![TokenId::PAD];
        input.extend_from_slice(tgt.tokens());
        let input = self.check_tokens(&input)?;
        let mut targets = self.check_tokens(tgt.tokens())?;
        targets.push(TokenId::EOS.index());

        let net = self.net();
        let enc = net.encode(g, &src_tokens);
        let x = net.token_input(g, &input);
        let ha = net.decoder_a(g, x, enc);
        let hb = net.decoder_b(g, ha, ha, enc, true);
        let z = net.output_logits(g, hb);
        let lp = g.log_softmax(z);
        let picks: Vec<(usize, usize)> = targets.iter().copied().enumerate().collect();
        let ce = g.pick_sum(lp, &picks);
        Ok(g.scale(ce, -1.0 / targets.len() as f64))
    }

    /// Sum of the three per-step-averaged cross-entropies under gold feedback.
    pub fn teacher_forced_loss(&self, src: &SourceSequence, gold: &EditSequence) -> Result<LossBreakdown> {
        let mut g = Graph::new(&self.params);
        let [total, t, s, r] = self.edit_loss_graph(&mut g, src, gold)?;
        Ok(LossBreakdown {
            tag_ce: g.value(t).data[0],
            span_ce: g.value(s).data[0],
            replacement_ce: g.value(r).data[0],
            total: g.value(total).data[0],
        })
    }

    /// Per-token cross-entropy of the full-sequence baseline.
    pub fn full_sequence_loss(&self, src: &SourceSequence, tgt: &TargetSequence) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let ce = self.full_loss_graph(&mut g, src, tgt)?;
        Ok(g.value(ce).data[0])
    }

    /// Per-step log-probabilities of `edits` under teacher forcing.
    pub fn score_steps(&self, src: &SourceSequence, edits: &EditSequence) -> Result<Vec<StepLogProbs>> {
        self.require(ModelMode::Edit)?;
        self.check_gold(src, edits)?;
        let enc = self.encode(src)?;
        let ops = &edits.ops;
        let tags = self.check_tags(&ops.iter().map(|o| o.tag).collect::<Vec<_>>())?;
        let spans: Vec<usize> = ops.iter().map(|o| o.span_end).collect();
        let net = self.net();
        let mut g = Graph::new(&self.params);
        let e = g.input(enc.states.clone());
        let ha = self.a_graph(&mut g, e, src.len(), &StepFeedback::history(ops))?;
        let tag_z = net.tag_logits(&mut g, ha);
        let span_z = net.span_logits(&mut g, ha, &tags, e);
        let table = net.span_table(&mut g, e);
        let states = g.rows(table, &spans);
        let b_in = net.decoder_b_input(&mut g, ha, &tags, states);
        let hb = net.decoder_b(&mut g, b_in, ha, e, true);
        let repl_z = net.output_logits(&mut g, hb);
        let (tz, sz, rz) = (g.value(tag_z), g.value(span_z), g.value(repl_z));
        Ok(ops
            .iter()
            .enumerate()
            .map(|(i, op)| StepLogProbs {
                tag: log_softmax(tz.row(i))[op.tag.index()],
                span: log_softmax(sz.row(i))[op.span_end - 1],
                replacement: log_softmax(rz.row(i))[replacement_class(op.replacement)],
            })
            .collect())
    }

    /// Next-token log-distribution of the full-sequence baseline after
    /// `prefix` (the start token is implicit).
    pub fn full_sequence_log_probs(&self, enc: &EncodedSource, prefix: &[TokenId]) -> Result<Vec<f64>> {
        self.require(ModelMode::FullSequence)?;
        self.check_positions(prefix.len() + 1)?;
        let mut input = vec![TokenId::PAD];
        input.extend_from_slice(prefix);
        let input = self.check_tokens(&input)?;
        let net = self.net();
        let mut g = Graph::new(&self.params);
        let e = g.input(enc.states.clone());
        let x = net.token_input(&mut g, &input);
        let ha = net.decoder_a(&mut g, x, e);
        let last = g.rows(ha, &[input.len() - 1]);
        let hb = net.decoder_b(&mut g, last, ha, e, false);
        let z = net.output_logits(&mut g, hb);
        Ok(log_softmax(&g.value(z).data))
    }

    /// Next-token distribution of the full-sequence baseline.
    pub fn full_sequence_step(&self, src: &SourceSequence, prefix: &[TokenId]) -> Result<Vec<f64>> {
        self.require(ModelMode::FullSequence)?;
        let enc = self.encode(src)?;
        Ok(softmax(&self.full_sequence_log_probs(&enc, prefix)?))
    }

    /// Training loss of one example without building gradients.
    pub(crate) fn example_loss(&self, example: &super::Example) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let v = match self.config.mode {
            ModelMode::Edit => self.edit_loss_graph(&mut g, &example.src, &example.edits)?[0],
            ModelMode::FullSequence => self.full_loss_graph(&mut g, &example.src, &example.target)?,
        };
        Ok(g.value(v).data[0])
    }

    /// Loss and per-parameter gradients for one training example.
    pub(crate) fn loss_and_grads(&self, example: &super::Example) -> Result<(LossBreakdown, Vec<Option<Mat>>)> {
        let mut g = Graph::new(&self.params);
        match self.config.mode {
            ModelMode::Edit => {
                let [total, t, s, r] = self.edit_loss_graph(&mut g, &example.src, &example.edits)?;
                let grads = g.backward(total);
                Ok((
                    LossBreakdown {
                        tag_ce: g.value(t).data[0],
                        span_ce: g.value(s).data[0],
                        replacement_ce: g.value(r).data[0],
                        total: g.value(total).data[0],
                    },
                    grads,
                ))
            }
            ModelMode::FullSequence => {
                let ce = self.full_loss_graph(&mut g, &example.src, &example.target)?;
                let grads = g.backward(ce);
                let v = g.value(ce).data[0];
                Ok((
                    LossBreakdown {
                        replacement_ce: v,
                        total: v,
                        ..Default::default()
                    },
                    grads,
                ))
            }
        }
    }
}
