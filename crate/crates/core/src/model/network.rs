//! Parameter layout and forward graph construction.
//!
//! Decoder A runs causal self-attention over the feedback history and
//! cross-attention over the encoder. The tag head and the span pointer sit
//! on top of A. Decoder B takes the predicted tag embedding and the encoder
//! state at the predicted span end, added to A's output through a residual
//! path, and cross-attends to A's outputs (causally). All blocks are
//! pre-norm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::{causal_mask, Graph, Mat, ParamId, ParamStore, Var};

use super::config::{ModelConfig, ModelMode};

#[derive(Debug, Clone)]
pub(crate) struct Norm {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct Attention {
    wq: ParamId,
    wk: ParamId,
    wv: ParamId,
    wo: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct FeedForward {
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct EncoderLayer {
    ln_att: Norm,
    att: Attention,
    ln_ffn: Norm,
    ffn: FeedForward,
}

#[derive(Debug, Clone)]
pub(crate) struct DecoderALayer {
    ln_self: Norm,
    self_att: Attention,
    ln_cross: Norm,
    cross_att: Attention,
    ln_ffn: Norm,
    ffn: FeedForward,
}

#[derive(Debug, Clone)]
pub(crate) struct DecoderBLayer {
    ln_a: Norm,
    att_a: Attention,
    enc: Option<(Norm, Attention)>,
    ln_ffn: Norm,
    ffn: FeedForward,
}

/// Parameters that only exist in edit mode.
#[derive(Debug, Clone)]
pub(crate) struct EditHeads {
    pub feedback_tag_emb: ParamId,
    pub start_span: ParamId,
    pub feedback_w: ParamId,
    pub feedback_b: ParamId,
    pub tag_w: ParamId,
    pub tag_b: ParamId,
    pub pred_tag_emb: ParamId,
    pub span_tag_w: ParamId,
    pub pointer_q: ParamId,
    pub pointer_k: ParamId,
    pub b_in_w: ParamId,
    pub b_in_b: ParamId,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub tok_emb: ParamId,
    pub enc_pos: ParamId,
    pub dec_pos: ParamId,
    encoder: Vec<EncoderLayer>,
    enc_ln: Norm,
    decoder_a: Vec<DecoderALayer>,
    a_ln: Norm,
    decoder_b: Vec<DecoderBLayer>,
    b_ln: Norm,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub edit: Option<EditHeads>,
}

/// Registers parameters in a fixed order. The same config always yields
/// the same names and shapes, which checkpoints rely on.
struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn matrix(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-limit..limit)).collect();
        self.store.add(name, Mat::from_vec(rows, cols, data))
    }

    fn embedding(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        let scale = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols).map(|_| self.rng.gen_range(-scale..scale)).collect();
        self.store.add(name, Mat::from_vec(rows, cols, data))
    }

    fn zeros(&mut self, name: String, rows: usize, cols: usize) -> ParamId {
        self.store.add(name, Mat::zeros(rows, cols))
    }

    fn ones(&mut self, name: String, cols: usize) -> ParamId {
        self.store.add(name, Mat::from_vec(1, cols, vec![1.0; cols]))
    }

    fn norm(&mut self, prefix: &str, d: usize) -> Norm {
        Norm {
            gain: self.ones(format!("{prefix}.gain"), d),
            bias: self.zeros(format!("{prefix}.bias"), 1, d),
        }
    }

    fn attention(&mut self, prefix: &str, d: usize) -> Attention {
        Attention {
            wq: self.matrix(format!("{prefix}.wq"), d, d),
            wk: self.matrix(format!("{prefix}.wk"), d, d),
            wv: self.matrix(format!("{prefix}.wv"), d, d),
            wo: self.matrix(format!("{prefix}.wo"), d, d),
        }
    }

    fn ffn(&mut self, prefix: &str, d: usize, f: usize) -> FeedForward {
        FeedForward {
            w1: self.matrix(format!("{prefix}.w1"), d, f),
            b1: self.zeros(format!("{prefix}.b1"), 1, f),
            w2: self.matrix(format!("{prefix}.w2"), f, d),
            b2: self.zeros(format!("{prefix}.b2"), 1, d),
        }
    }
}

impl Layout {
    pub fn build(config: &ModelConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Layout {
        let d = config.hidden;
        let f = config.ffn_dim;
        let v = config.vocab_size;
        let mut b = Builder { store, rng };

        let tok_emb = b.embedding("embed.tokens".into(), v, d);
        let enc_pos = b.embedding("embed.enc_positions".into(), config.max_positions, d);
        let dec_pos = b.embedding("embed.dec_positions".into(), config.max_positions, d);

        let encoder = (0..config.encoder_layers)
            .map(|i| {
                let p = format!("encoder.{i}");
                EncoderLayer {
                    ln_att: b.norm(&format!("{p}.ln_att"), d),
                    att: b.attention(&format!("{p}.self_att"), d),
                    ln_ffn: b.norm(&format!("{p}.ln_ffn"), d),
                    ffn: b.ffn(&format!("{p}.ffn"), d, f),
                }
            })
            .collect();
        let enc_ln = b.norm("encoder.ln_out", d);

        let decoder_a = (0..config.decoder_a_layers)
            .map(|i| {
                let p = format!("decoder_a.{i}");
                DecoderALayer {
                    ln_self: b.norm(&format!("{p}.ln_self"), d),
                    self_att: b.attention(&format!("{p}.self_att"), d),
                    ln_cross: b.norm(&format!("{p}.ln_cross"), d),
                    cross_att: b.attention(&format!("{p}.cross_att"), d),
                    ln_ffn: b.norm(&format!("{p}.ln_ffn"), d),
                    ffn: b.ffn(&format!("{p}.ffn"), d, f),
                }
            })
            .collect();
        let a_ln = b.norm("decoder_a.ln_out", d);

        let decoder_b = (0..config.decoder_b_layers)
            .map(|i| {
                let p = format!("decoder_b.{i}");
                let ln_a = b.norm(&format!("{p}.ln_a"), d);
                let att_a = b.attention(&format!("{p}.att_a"), d);
                let enc = config.decoder_b_encoder_attention.then(|| {
                    (
                        b.norm(&format!("{p}.ln_enc"), d),
                        b.attention(&format!("{p}.att_enc"), d),
                    )
                });
                DecoderBLayer {
                    ln_a,
                    att_a,
                    enc,
                    ln_ffn: b.norm(&format!("{p}.ln_ffn"), d),
                    ffn: b.ffn(&format!("{p}.ffn"), d, f),
                }
            })
            .collect();
        let b_ln = b.norm("decoder_b.ln_out", d);

        let out_w = b.matrix("head.replacement.w".into(), d, v);
        let out_b = b.zeros("head.replacement.b".into(), 1, v);

        let edit = (config.mode == ModelMode::Edit).then(|| {
            let t = config.tagset_size;
            let e = config.tag_embed_dim;
            EditHeads {
                feedback_tag_emb: b.embedding("feedback.tag_emb".into(), t, e),
                start_span: b.embedding("feedback.start_span".into(), 1, d),
                feedback_w: b.matrix("feedback.proj.w".into(), e + 2 * d, d),
                feedback_b: b.zeros("feedback.proj.b".into(), 1, d),
                tag_w: b.matrix("head.tag.w".into(), d, t),
                tag_b: b.zeros("head.tag.b".into(), 1, t),
                pred_tag_emb: b.embedding("head.pred_tag_emb".into(), t, e),
                span_tag_w: b.matrix("head.span.tag_proj".into(), e, d),
                pointer_q: b.matrix("head.span.q".into(), d, d),
                pointer_k: b.matrix("head.span.k".into(), d, d),
                b_in_w: b.matrix("decoder_b.input.w".into(), e + d, d),
                b_in_b: b.zeros("decoder_b.input.b".into(), 1, d),
            }
        });

        Layout {
            tok_emb,
            enc_pos,
            dec_pos,
            encoder,
            enc_ln,
            decoder_a,
            a_ln,
            decoder_b,
            b_ln,
            out_w,
            out_b,
            edit,
        }
    }

    /// Output projections whose zeroing makes every head exactly uniform.
    pub fn output_projections(&self) -> Vec<ParamId> {
        let mut ids = vec![self.out_w, self.out_b];
        if let Some(e) = &self.edit {
            ids.extend([e.tag_w, e.tag_b, e.pointer_q]);
        }
        ids
    }
}

/// Graph-building helpers shared by training and inference.
pub(crate) struct Net<'l> {
    pub layout: &'l Layout,
    pub heads: usize,
    pub hidden: usize,
}

impl Net<'_> {
    fn norm(&self, g: &mut Graph, x: Var, n: &Norm) -> Var {
        let gain = g.param(n.gain);
        let bias = g.param(n.bias);
        g.layer_norm(x, gain, bias)
    }

    fn attention(&self, g: &mut Graph, p: &Attention, x: Var, mem: Var, mask: Option<&Mat>) -> Var {
        let (wq, wk, wv, wo) = (g.param(p.wq), g.param(p.wk), g.param(p.wv), g.param(p.wo));
        let q = g.matmul(x, wq);
        let k = g.matmul(mem, wk);
        let v = g.matmul(mem, wv);
        let dh = self.hidden / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let s = g.matmul_t(qh, kh);
            let s = g.scale(s, scale);
            let s = match mask {
                Some(m) => g.add_const(s, m),
                None => s,
            };
            let a = g.softmax(s);
            outs.push(g.matmul(a, vh));
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        g.matmul(cat, wo)
    }

    fn ffn(&self, g: &mut Graph, p: &FeedForward, x: Var) -> Var {
        let (w1, b1, w2, b2) = (g.param(p.w1), g.param(p.b1), g.param(p.w2), g.param(p.b2));
        let h = g.matmul(x, w1);
        let h = g.add_row(h, b1);
        let h = g.gelu(h);
        let h = g.matmul(h, w2);
        g.add_row(h, b2)
    }

    /// Encoder states, `I × d`.
    pub fn encode(&self, g: &mut Graph, tokens: &[usize]) -> Var {
        let l = self.layout;
        let emb = g.param(l.tok_emb);
        let pos = g.param(l.enc_pos);
        let x = g.rows(emb, tokens);
        let positions: Vec<usize> = (0..tokens.len()).collect();
        let p = g.rows(pos, &positions);
        let mut x = g.add(x, p);
        for layer in &l.encoder {
            let h = self.norm(g, x, &layer.ln_att);
            let h = self.attention(g, &layer.att, h, h, None);
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.ln_ffn);
            let h = self.ffn(g, &layer.ffn, h);
            x = g.add(x, h);
        }
        self.norm(g, x, &l.enc_ln)
    }

    /// Runs decoder A over `n` input rows (already embedded, without
    /// positions) and returns the normalized outputs, `n × d`.
    pub fn decoder_a(&self, g: &mut Graph, input: Var, enc: Var) -> Var {
        let l = self.layout;
        let n = g.shape(input).0;
        let pos = g.param(l.dec_pos);
        let positions: Vec<usize> = (0..n).collect();
        let p = g.rows(pos, &positions);
        let mut x = g.add(input, p);
        let mask = causal_mask(n, n);
        for layer in &l.decoder_a {
            let h = self.norm(g, x, &layer.ln_self);
            let h = self.attention(g, &layer.self_att, h, h, Some(&mask));
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.ln_cross);
            let h = self.attention(g, &layer.cross_att, h, enc, None);
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.ln_ffn);
            let h = self.ffn(g, &layer.ffn, h);
            x = g.add(x, h);
        }
        self.norm(g, x, &l.a_ln)
    }

    /// Decoder B over `m` query rows against decoder A outputs. When
    /// `causal` is set, query row `i` sees A rows `0..=i` (teacher forcing);
    /// otherwise it sees every A row (single-step inference on the last row).
    pub fn decoder_b(&self, g: &mut Graph, input: Var, a_out: Var, enc: Var, causal: bool) -> Var {
        let l = self.layout;
        let (m, n) = (g.shape(input).0, g.shape(a_out).0);
        let mask = causal.then(|| causal_mask(m, n));
        let mut x = input;
        for layer in &l.decoder_b {
            let h = self.norm(g, x, &layer.ln_a);
            let h = self.attention(g, &layer.att_a, h, a_out, mask.as_deref());
            x = g.add(x, h);
            if let Some((ln, att)) = &layer.enc {
                let h = self.norm(g, x, ln);
                let h = self.attention(g, att, h, enc, None);
                x = g.add(x, h);
            }
            let h = self.norm(g, x, &layer.ln_ffn);
            let h = self.ffn(g, &layer.ffn, h);
            x = g.add(x, h);
        }
        self.norm(g, x, &l.b_ln)
    }

    /// Replacement (or next-token) logits over the vocabulary.
    pub fn output_logits(&self, g: &mut Graph, hb: Var) -> Var {
        let w = g.param(self.layout.out_w);
        let b = g.param(self.layout.out_b);
        let z = g.matmul(hb, w);
        g.add_row(z, b)
    }

    fn heads(&self) -> &EditHeads {
        self.layout.edit.as_ref().expect("edit-mode parameters")
    }

    /// Decoder A input rows for a feedback history: the projection of
    /// `[tag embedding ; span-end encoder state ; replacement embedding]`.
    /// A span end of 0 selects the learned start vector.
    pub fn feedback_input(
        &self,
        g: &mut Graph,
        enc: Var,
        tags: &[usize],
        spans: &[usize],
        replacements: &[usize],
    ) -> Var {
        let h = self.heads();
        let tag_table = g.param(h.feedback_tag_emb);
        let t = g.rows(tag_table, tags);
        let span_table = self.span_table(g, enc);
        let s = g.rows(span_table, spans);
        let tok = g.param(self.layout.tok_emb);
        let r = g.rows(tok, replacements);
        let cat = g.concat_cols(&[t, s, r]);
        let w = g.param(h.feedback_w);
        let b = g.param(h.feedback_b);
        let z = g.matmul(cat, w);
        g.add_row(z, b)
    }

    /// `[start vector ; encoder states]`, so row `p` is the state for span
    /// end `p` and row 0 stands in for the empty prefix.
    pub fn span_table(&self, g: &mut Graph, enc: Var) -> Var {
        let start = g.param(self.heads().start_span);
        g.concat_rows(&[start, enc])
    }

    pub fn tag_logits(&self, g: &mut Graph, ha: Var) -> Var {
        let h = self.heads();
        let w = g.param(h.tag_w);
        let b = g.param(h.tag_b);
        let z = g.matmul(ha, w);
        g.add_row(z, b)
    }

    /// Pointer logits `Q Kᵀ / √d` over source positions, one row per query.
    pub fn span_logits(&self, g: &mut Graph, ha: Var, tags: &[usize], enc: Var) -> Var {
        let h = self.heads();
        let table = g.param(h.pred_tag_emb);
        let te = g.rows(table, tags);
        let proj = g.param(h.span_tag_w);
        let tp = g.matmul(te, proj);
        let qin = g.add(ha, tp);
        let wq = g.param(h.pointer_q);
        let wk = g.param(h.pointer_k);
        let q = g.matmul(qin, wq);
        let k = g.matmul(enc, wk);
        let s = g.matmul_t(q, k);
        g.scale(s, 1.0 / (self.hidden as f64).sqrt())
    }

    /// Decoder B input rows: A output plus the projection of
    /// `[predicted tag embedding ; encoder state at span end]`.
    pub fn decoder_b_input(&self, g: &mut Graph, ha: Var, tags: &[usize], span_states: Var) -> Var {
        let h = self.heads();
        let table = g.param(h.pred_tag_emb);
        let te = g.rows(table, tags);
        let cat = g.concat_cols(&[te, span_states]);
        let w = g.param(h.b_in_w);
        let b = g.param(h.b_in_b);
        let z = g.matmul(cat, w);
        let z = g.add_row(z, b);
        g.add(ha, z)
    }

    /// Token embeddings for a full-sequence decoder input.
    pub fn token_input(&self, g: &mut Graph, tokens: &[usize]) -> Var {
        let tok = g.param(self.layout.tok_emb);
        g.rows(tok, tokens)
    }
}
