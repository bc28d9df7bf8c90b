use super::*;
use crate::editops::{apply_edits, validate};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::model::{train, EditModel, Example, ModelConfig, ModelMode, TrainConfig};
use crate::tags::TagSet;
use crate::tags::TagId;
use crate::vocab::{SourceSequence, TokenId};
use crate::Error;

const VOCAB: usize = 12;

fn untrained(seed: u64, mode: ModelMode) -> EditModel {
    let config = ModelConfig {
        hidden: 8,
        encoder_layers: 1,
        decoder_a_layers: 1,
        decoder_b_layers: 1,
        attention_heads: 2,
        tag_embed_dim: 6,
        ffn_dim: 16,
        max_positions: 64,
        vocab_size: VOCAB,
        tagset_size: 4,
        mode,
        decoder_b_encoder_attention: seed % 2 == 1,
    };
    EditModel::new(config, seed).unwrap()
}

/// Untrained models tend to insert forever, so the fixtures are briefly
/// trained on a small edit task first.
fn model(seed: u64, mode: ModelMode) -> EditModel {
    static CACHE: OnceLock<Mutex<HashMap<(u64, bool), EditModel>>> = OnceLock::new();
    let key = (seed, mode == ModelMode::Edit);
    let cache = CACHE.get_or_init(Default::default);
    if let Some(m) = cache.lock().unwrap().get(&key) {
        return m.clone();
    }
    let tagset = TagSet::new("t", ["A", "B"]).unwrap();
    let corpus: Vec<Example> = sources()
        .into_iter()
        .map(|src| {
            let mut tgt = src.tokens().to_vec();
            tgt[0] = TokenId(4 + (tgt[0].0 + 1) % 8);
            if tgt.len() > 2 {
                tgt.remove(2);
            }
            let tgt = crate::vocab::TargetSequence::new(tgt);
            let tags = vec![TagId(2); crate::editops::changed_region_count(&src, &tgt)];
            Example::from_pair(src, tgt, Some(&tags), &tagset).unwrap()
        })
        .collect();
    let mut m = untrained(seed, mode);
    let config = TrainConfig {
        steps: 60,
        batch_size: 4,
        learning_rate: 1e-2,
        seed,
        ..TrainConfig::default()
    };
    train(&mut m, &corpus, &config).unwrap();
    cache.lock().unwrap().insert(key, m.clone());
    m
}

fn sources() -> Vec<SourceSequence> {
    let mut out = Vec::new();
    let mut x = 17u64;
    for len in 1..=6 {
        for _ in 0..3 {
            let toks = (0..len)
                .map(|_| {
                    x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    TokenId(4 + ((x >> 33) % 8) as u32)
                })
                .collect();
            out.push(SourceSequence::new(toks).unwrap());
        }
    }
    out
}

fn teacher_forced_score(m: &EditModel, src: &SourceSequence, h: &EditHypothesis, p: &DecodeParams) -> f64 {
    let steps = m.score_steps(src, &h.edits).unwrap();
    h.edits
        .iter()
        .zip(steps)
        .map(|(op, s)| {
            let mut v = p.lambda_t * s.tag;
            let eos = op.tag == TagId::EOS;
            if !(eos && p.shortcuts_enabled) {
                v += p.lambda_p * s.span;
                if !(p.shortcuts_enabled && op.tag == TagId::SELF) {
                    v += p.lambda_r * s.replacement;
                }
            }
            v
        })
        .sum()
}

#[test]
fn beam_one_is_greedy() {
    for seed in 0..4 {
        let m = model(seed, ModelMode::Edit);
        for shortcuts in [false, true] {
            let p = DecodeParams {
                shortcuts_enabled: shortcuts,
                ..DecodeParams::greedy()
            };
            for src in sources() {
                let beam = beam_decode(&m, &src, &p).unwrap();
                let greedy = greedy_decode(&m, &src, &p).unwrap();
                assert_eq!(beam.hypotheses.len(), 1);
                assert_eq!(beam.best().edits, greedy.edits);
                assert_eq!(beam.best().raw_score, greedy.raw_score);
                assert_eq!(beam.best().substeps, greedy.substeps);
            }
        }
    }
}

#[test]
fn stored_scores_match_teacher_forcing() {
    for seed in 0..3 {
        let m = model(seed, ModelMode::Edit);
        for (shortcuts, lambdas) in [(false, (1.0, 1.0, 1.0)), (true, (1.0, 1.0, 1.0)), (false, (0.5, 1.25, 0.75))] {
            let p = DecodeParams {
                beam_size: 3,
                lambda_t: lambdas.0,
                lambda_p: lambdas.1,
                lambda_r: lambdas.2,
                shortcuts_enabled: shortcuts,
                ..DecodeParams::default()
            };
            for src in sources() {
                let nbest = beam_decode(&m, &src, &p).unwrap();
                assert!(nbest.hypotheses.len() <= 3);
                for pair in nbest.hypotheses.windows(2) {
                    assert!(pair[0].score >= pair[1].score);
                }
                for h in &nbest.hypotheses {
                    assert!(validate(&h.edits, src.len()).is_valid());
                    assert!(h.raw_score <= 0.0);
                    let expect = teacher_forced_score(&m, &src, h, &p);
                    assert!((h.raw_score - expect).abs() < 1e-9, "{} vs {expect}", h.raw_score);
                }
            }
        }
    }
}

#[test]
fn scaling_lambdas_keeps_the_argmax() {
    let m = model(5, ModelMode::Edit);
    let p = DecodeParams {
        lambda_t: 0.75,
        lambda_p: 1.25,
        lambda_r: 0.5,
        ..DecodeParams::default()
    };
    let doubled = DecodeParams {
        lambda_t: 1.5,
        lambda_p: 2.5,
        lambda_r: 1.0,
        ..p.clone()
    };
    for src in sources() {
        let a = beam_decode(&m, &src, &p).unwrap();
        let b = beam_decode(&m, &src, &doubled).unwrap();
        assert_eq!(a.best().edits, b.best().edits);
        assert_eq!(2.0 * a.best().raw_score, b.best().raw_score);
    }
}

#[test]
fn shortcut_substep_counts() {
    let m = model(2, ModelMode::Edit);
    for src in sources() {
        let plain = greedy_decode(&m, &src, &DecodeParams::greedy()).unwrap();
        assert_eq!(plain.substeps, 3 * plain.edits.len());
        let p = DecodeParams {
            shortcuts_enabled: true,
            ..DecodeParams::greedy()
        };
        let fast = greedy_decode(&m, &src, &p).unwrap();
        let selfs = fast.edits.iter().filter(|o| o.is_self()).count();
        assert_eq!(fast.substeps, 3 * fast.edits.len() - selfs - 2);
    }
}

#[test]
fn single_pass_refinement_is_beam_search() {
    let m = model(3, ModelMode::Edit);
    let p = DecodeParams {
        identity_penalty: 0.5,
        ..DecodeParams::default()
    };
    for src in sources() {
        let beam = beam_decode(&m, &src, &p).unwrap();
        let refined = iterative_refine(&m, &src, &p).unwrap();
        assert_eq!(beam.hypotheses.len(), refined.len());
        for (b, r) in beam.hypotheses.iter().zip(&refined) {
            assert_eq!(r.passes, vec![b.edits.clone()]);
            assert_eq!(r.score, b.score);
        }
    }
}

#[test]
fn zero_identity_penalty_demotes_identity() {
    let m = model(4, ModelMode::Edit);
    let p = DecodeParams {
        refinement_passes: 2,
        identity_penalty: 0.0,
        beam_size: 3,
        ..DecodeParams::default()
    };
    for src in sources() {
        let out = iterative_refine(&m, &src, &p).unwrap();
        let last_pass_input = |h: &RefinedHypothesis| {
            let mut text = src.clone();
            for edits in &h.passes[..h.passes.len() - 1] {
                text = SourceSequence::new(apply_edits(&text, edits).unwrap().into_tokens()).unwrap();
            }
            text
        };
        let top = &out[0];
        if top.target.tokens() == last_pass_input(top).tokens() {
            assert!(out.iter().all(|h| h.score == f64::NEG_INFINITY));
        }
        let mut texts: Vec<_> = out.iter().map(|h| h.target.tokens().to_vec()).collect();
        texts.sort();
        texts.dedup();
        assert_eq!(texts.len(), out.len());
    }
}

#[test]
fn constraints_force_reference_labels() {
    let m = model(6, ModelMode::Edit);
    let src = SourceSequence::new(vec![TokenId(4), TokenId(5), TokenId(6), TokenId(7)]).unwrap();
    let tags = vec![TagId::SELF, TagId(2), TagId(3), TagId::SELF, TagId::EOS];
    let spans = vec![1, 2, 2, 4, 4];
    let both = OracleConstraint {
        tags: Some(tags.clone()),
        spans: Some(spans.clone()),
        allow_repeat: false,
    };
    for shortcuts in [false, true] {
        let p = DecodeParams {
            shortcuts_enabled: shortcuts,
            ..DecodeParams::default()
        };
        let out = constrained_decode(&m, &src, &p, &both).unwrap();
        for h in &out.hypotheses {
            assert_eq!(h.edits.tags(), tags);
            assert_eq!(h.edits.spans(), spans);
            assert!(apply_edits(&src, &h.edits).is_ok());
        }
        let only_tags = OracleConstraint {
            spans: None,
            ..both.clone()
        };
        for h in constrained_decode(&m, &src, &p, &only_tags).unwrap().hypotheses {
            assert_eq!(h.edits.tags(), tags);
        }
        let repeat = OracleConstraint {
            tags: None,
            allow_repeat: true,
            ..both.clone()
        };
        for h in constrained_decode(&m, &src, &p, &repeat).unwrap().hypotheses {
            assert!(h.edits.spans().iter().all(|s| spans.contains(s)));
        }
    }
    let empty = OracleConstraint {
        tags: Some(vec![]),
        spans: None,
        allow_repeat: true,
    };
    assert!(matches!(
        constrained_decode(&m, &src, &DecodeParams::default(), &empty),
        Err(Error::Constraint(_))
    ));
    let dead_end = OracleConstraint {
        tags: Some(vec![TagId(2)]),
        spans: None,
        allow_repeat: false,
    };
    assert!(matches!(
        constrained_decode(&m, &src, &DecodeParams::default(), &dead_end),
        Err(Error::Constraint(_))
    ));
}

#[test]
fn full_sequence_beam_one_is_greedy() {
    let m = model(1, ModelMode::FullSequence);
    for src in sources() {
        let greedy = full_sequence_greedy(&m, &src, &DecodeParams::greedy()).unwrap();
        let beam = full_sequence_decode(&m, &src, &DecodeParams::greedy()).unwrap();
        assert_eq!(beam.best().tokens, greedy.tokens);
        assert_eq!(greedy.substeps, greedy.tokens.len() + 1);
        assert_eq!(beam.evaluations, greedy.substeps);
        let wide = full_sequence_decode(&m, &src, &DecodeParams::default()).unwrap();
        assert!(wide.best().raw_score >= beam.best().raw_score - 1e-12 || wide.hypotheses.len() > 1);
    }
    let edit = untrained(1, ModelMode::Edit);
    let src = &sources()[0];
    assert!(matches!(
        full_sequence_decode(&edit, src, &DecodeParams::default()),
        Err(Error::ModeMismatch { .. })
    ));
    assert!(matches!(beam_decode(&m, src, &DecodeParams::default()), Err(Error::ModeMismatch { .. })));
}

#[test]
fn params_validation_and_json() {
    let p = DecodeParams::default();
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<DecodeParams>(&text).unwrap(), p);
    let partial: DecodeParams = serde_json::from_str(r#"{"beam_size": 12, "lambda_t": 0.5}"#).unwrap();
    assert_eq!(partial.beam_size, 12);
    assert_eq!(partial.lambda_r, 1.0);
    assert!(DecodeParams { beam_size: 0, ..p.clone() }.validate().is_err());
    assert!(DecodeParams { refinement_passes: 0, ..p.clone() }.validate().is_err());
    assert!(DecodeParams { lambda_p: -1.0, ..p.clone() }.validate().is_err());
    let capped = DecodeParams { max_steps: Some(5), ..p.clone() };
    assert!(capped.step_budget(3).is_err());
    assert_eq!(DecodeParams { max_steps: Some(15), ..p }.step_budget(3).unwrap(), 15);
    assert!((length_penalty(1, 1.0) - 1.0).abs() < 1e-15);
    assert!((length_penalty(7, 0.5) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn tuning_returns_a_grid_point() {
    let m = model(0, ModelMode::Edit);
    let dev: Vec<_> = sources()
        .into_iter()
        .take(2)
        .map(|s| {
            let t = crate::vocab::TargetSequence::new(s.tokens().to_vec());
            (s, t)
        })
        .collect();
    let base = DecodeParams::greedy();
    let exact = |h: &[crate::vocab::TargetSequence], r: &[crate::vocab::TargetSequence]| {
        h.iter().zip(r).filter(|(a, b)| a == b).count() as f64
    };
    let choice = tune_lambdas(&m, &dev, &base, exact).unwrap();
    assert!(LAMBDA_GRID.contains(&choice.lambda_t));
    assert!(LAMBDA_GRID.contains(&choice.lambda_p));
    assert!(LAMBDA_GRID.contains(&choice.lambda_r));
    assert!(tune_lambdas(&m, &[], &base, exact).is_err());
}
