use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::{encode, synth_generate, GrammarConfig, LabelScheme};
use crate::error::Error;
use crate::masks::MaskSpec;
use crate::model::{checkpoint, ModelConfig};
use crate::numcore::{Tape, Tensor};

fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-3.0..3.0)).collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

fn tiny_arch() -> ModelConfig {
    let mut c = ModelConfig::toy(0, 0, 0);
    c.d_model = 16;
    c.n_heads = 2;
    c.d_ff = 32;
    c.n_layers = 2;
    c.mask_spec = MaskSpec::new(vec![0, 3]);
    c
}

fn scratch() -> Init {
    Init::Scratch {
        arch: tiny_arch(),
        scheme: LabelScheme::standard(),
        vocab: None,
    }
}

#[test]
fn uniform_logits_give_log_class_counts() {
    let l = joint_loss(&Tensor::zeros(&[3, 4]), &Tensor::zeros(&[3, 5]), &[0, 1, 2], &[4, 0, 3]).unwrap();
    assert!((l - (4f64.ln() + 5f64.ln())).abs() < 1e-12);
}

#[test]
fn confident_correct_logits_approach_zero() {
    let mut last = f64::INFINITY;
    for scale in [1.0, 10.0, 100.0] {
        let p = Tensor::from_rows(&[[scale, 0.0, 0.0], [0.0, 0.0, scale]]).unwrap();
        let d = Tensor::from_rows(&[[0.0, scale], [scale, 0.0]]).unwrap();
        let l = joint_loss(&p, &d, &[0, 2], &[1, 0]).unwrap();
        assert!(l < last);
        last = l;
    }
    assert!(last < 1e-40);
}

#[test]
fn loss_matches_direct_probability_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random(7, 4, &mut rng);
    let d = random(7, 5, &mut rng);
    let pg: Vec<usize> = (0..7).map(|_| rng.random_range(0..4)).collect();
    let dg: Vec<usize> = (0..7).map(|_| rng.random_range(0..5)).collect();
    let oracle = |t: &Tensor, g: &[usize]| {
        g.iter()
            .enumerate()
            .map(|(r, &c)| {
                let z: f64 = t.row(r).iter().map(|x| x.exp()).sum();
                -(t.at(r, c).exp() / z).ln()
            })
            .sum::<f64>()
            / g.len() as f64
    };
    let expect = oracle(&p, &pg) + oracle(&d, &dg);
    assert!((joint_loss(&p, &d, &pg, &dg).unwrap() - expect).abs() < 1e-10);
    assert!(matches!(joint_loss(&p, &d, &pg[..6], &dg), Err(Error::Contract(_))));
}

#[test]
fn schedule_warms_up_then_decays() {
    let w = 400;
    let lr = |s| lr_schedule(s, 32, w).unwrap();
    for s in 1..w {
        assert!(lr(s + 1) > lr(s));
    }
    for s in w..3 * w {
        assert!(lr(s + 1) < lr(s));
    }
    let s = w as f64;
    let up = 32f64.powf(-0.5) * s * s.powf(-1.5);
    let down = 32f64.powf(-0.5) * s.powf(-0.5);
    assert!((up - down).abs() < 1e-15);
    assert!((lr(w) - down).abs() < 1e-15);
    assert!(matches!(lr_schedule(0, 32, w), Err(Error::Contract(_))));
}

#[test]
fn clipping_rescales_only_large_gradients() {
    let mut a = Tensor::vector(vec![3.0, 4.0]);
    let before = a.clone();
    assert_eq!(clip_gradients(&mut [&mut a], 10.0).unwrap(), 5.0);
    assert_eq!(a, before);

    let mut a = Tensor::vector(vec![6.0, 0.0]);
    let mut b = Tensor::vector(vec![0.0, 8.0]);
    assert_eq!(clip_gradients(&mut [&mut a, &mut b], 5.0).unwrap(), 10.0);
    assert_eq!(a.data(), &[3.0, 0.0]);
    assert!(((a.norm_sq() + b.norm_sq()).sqrt() - 5.0).abs() < 1e-9);

    let mut nan = Tensor::vector(vec![f64::NAN]);
    assert!(matches!(clip_gradients(&mut [&mut nan], 1.0), Err(Error::Training(_))));
}

#[test]
fn zero_gradients_leave_parameters_unchanged() {
    let mut arch = tiny_arch();
    arch.vocab_size = 5;
    arch.punct_label_count = 4;
    arch.disf_label_count = 5;
    let mut params = crate::model::init_params(&arch, 1);
    let before = params.clone();
    let mut state = OptimizerState::new(&params);
    let zeros: Vec<Tensor> = params.named().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
    Adam::default().step(&mut params, &mut state, &zeros, 0.1).unwrap();
    assert_eq!(params, before);
    assert_eq!(state.step, 1);
}

#[test]
fn tape_loss_equals_plain_loss() {
    let corpus = synth_generate(1, 5, &GrammarConfig::default()).unwrap();
    let out = train(&corpus, None, &TrainConfig { max_steps: 1, min_freq: 1, ..Default::default() }, scratch()).unwrap();
    let m = out.model;
    let enc = encode(&corpus[0], m.vocab(), m.scheme()).unwrap();
    let (pl, dl) = m.model().logits(&enc.ids).unwrap();
    let plain = joint_loss(&pl, &dl, enc.punct.as_ref().unwrap(), enc.disf.as_ref().unwrap()).unwrap();
    let (taped, _) = batch_gradients(&m, &corpus[..1], None).unwrap();
    assert!((plain - taped).abs() < 1e-12);

    let mut tape = Tape::new();
    let vars = m.model().bind(&mut tape);
    let fv = m.model().forward_on_tape(&mut tape, &vars, &enc.ids, None).unwrap();
    assert!(joint_loss_sum_on_tape(&mut tape, &fv, &[0], &[0, 0]).is_err());
}

#[test]
fn training_reduces_loss() {
    let corpus = synth_generate(11, 500, &GrammarConfig::default()).unwrap();
    let config = TrainConfig {
        max_steps: 200,
        warmup_steps: 50,
        ..Default::default()
    };
    let out = train(&corpus, None, &config, scratch()).unwrap();
    let head: f64 = out.losses[..10].iter().sum::<f64>() / 10.0;
    let tail: f64 = out.losses[190..].iter().sum::<f64>() / 10.0;
    assert!(tail < head, "{head} -> {tail}");
    assert_eq!(out.steps_run, 200);
}

#[test]
fn identical_seeds_give_identical_checkpoints() {
    let corpus = synth_generate(5, 60, &GrammarConfig::default()).unwrap();
    let dev = synth_generate(6, 10, &GrammarConfig::default()).unwrap();
    let config = TrainConfig {
        max_steps: 12,
        warmup_steps: 4,
        eval_every: 5,
        seed: 9,
        ..Default::default()
    };
    let a = train(&corpus, Some(&dev), &config, scratch()).unwrap();
    let b = train(&corpus, Some(&dev), &config, scratch()).unwrap();
    assert_eq!(checkpoint::to_bytes(&a.model), checkpoint::to_bytes(&b.model));
    assert_eq!(a.evals.len(), 3);
    let c = train(&corpus, Some(&dev), &TrainConfig { seed: 10, ..config }, scratch()).unwrap();
    assert_ne!(checkpoint::to_bytes(&a.model), checkpoint::to_bytes(&c.model));
}

#[test]
fn finetune_requires_a_starting_model() {
    let corpus = synth_generate(5, 5, &GrammarConfig::default()).unwrap();
    let config = TrainConfig {
        phase: Phase::Finetune,
        ..Default::default()
    };
    assert!(matches!(train(&corpus, None, &config, scratch()), Err(Error::Config(_))));
    assert!(TrainConfig { warmup_steps: 0, ..Default::default() }.validate().is_err());
    assert!(TrainConfig { clip_norm: 0.0, ..Default::default() }.validate().is_err());
}

#[test]
fn stop_hook_ends_training() {
    let corpus = synth_generate(5, 40, &GrammarConfig::default()).unwrap();
    let config = TrainConfig {
        max_steps: 50,
        eval_every: 5,
        ..Default::default()
    };
    let out = train_until(&corpus, Some(&corpus), &config, scratch(), |_| true).unwrap();
    assert_eq!(out.steps_run, 5);
    assert_eq!(out.first_step_where(|_| true), Some(5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correct_labels_beat_corrupted_ones(seed in any::<u64>(), flip in 0usize..6, to in 1usize..4) {
        // Logits that put most mass on the gold labels.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gold_p: Vec<usize> = (0..6).map(|_| rng.random_range(0..4)).collect();
        let gold_d: Vec<usize> = (0..6).map(|_| rng.random_range(0..5)).collect();
        let onehot = |g: &[usize], k: usize| {
            let rows: Vec<Vec<f64>> = g.iter().map(|&c| (0..k).map(|j| if j == c { 4.0 } else { 0.0 }).collect()).collect();
            Tensor::from_rows(&rows).unwrap()
        };
        let (p, d) = (onehot(&gold_p, 4), onehot(&gold_d, 5));
        let mut bad = gold_p.clone();
        bad[flip] = (bad[flip] + to) % 4;
        let good = joint_loss(&p, &d, &gold_p, &gold_d).unwrap();
        prop_assert!(good < joint_loss(&p, &d, &bad, &gold_d).unwrap());
    }

    #[test]
    fn clipping_preserves_direction(seed in any::<u64>(), clip in 0.01f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = random(3, 4, &mut rng);
        let mut b = random(1, 5, &mut rng);
        let (a0, b0) = (a.clone(), b.clone());
        let before = (a0.norm_sq() + b0.norm_sq()).sqrt();
        clip_gradients(&mut [&mut a, &mut b], clip).unwrap();
        let after = (a.norm_sq() + b.norm_sq()).sqrt();
        prop_assert!(after <= before + 1e-12);
        let dot: f64 = a0.data().iter().zip(a.data()).chain(b0.data().iter().zip(b.data())).map(|(x, y)| x * y).sum();
        prop_assert!((dot / (before * after) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn optimizer_state_tracks_shapes() {
    let mut arch = tiny_arch();
    arch.vocab_size = 4;
    arch.punct_label_count = 4;
    arch.disf_label_count = 5;
    let params = crate::model::init_params(&arch, 0);
    let s = OptimizerState::new(&params);
    for ((_, p), (_, m)) in params.named().into_iter().zip(s.m.named()) {
        assert_eq!(p.shape(), m.shape());
    }
    let _ = Arc::clone(&params.embedding);
}
