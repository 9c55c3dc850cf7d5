use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::joint_loss_sum_on_tape;
use super::optim::{clip_gradients, lr_schedule, Adam, OptimizerState};
use crate::data::{encode, truncation_augment, LabelScheme, TokenSequence, Vocabulary, DEFAULT_MIN_FREQ};
use crate::error::{Error, Result};
use crate::eval::{score, EvalReport};
use crate::model::{CtTransformer, ModelConfig, TrainedModel};
use crate::numcore::Tape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Pretrain,
    Finetune,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Pretrain => "pretrain",
            Phase::Finetune => "finetune",
        })
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Phase::Pretrain),
            "finetune" => Ok(Phase::Finetune),
            other => Err(Error::Config(format!("unknown phase `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub warmup_steps: u64,
    pub max_steps: u64,
    pub clip_norm: f64,
    pub seed: u64,
    pub augment: bool,
    pub augment_prob: f64,
    pub phase: Phase,
    pub init_checkpoint: Option<PathBuf>,
    /// Multiplier on the warm-up schedule.
    pub lr_scale: f64,
    /// Dev evaluation interval in steps.
    pub eval_every: u64,
    /// Stop after this many dev evaluations without improvement.
    pub patience: Option<usize>,
    /// Vocabulary frequency cutoff when training from scratch.
    pub min_freq: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            warmup_steps: 400,
            max_steps: 2000,
            clip_norm: 1.0,
            seed: 0,
            augment: true,
            augment_prob: crate::data::DEFAULT_AUGMENT_PROB,
            phase: Phase::Pretrain,
            init_checkpoint: None,
            lr_scale: 1.0,
            eval_every: 100,
            patience: None,
            min_freq: DEFAULT_MIN_FREQ,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.warmup_steps == 0 {
            return bad("warmup_steps must be at least 1");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return bad("clip_norm must be positive");
        }
        if self.batch_size == 0 || self.max_steps == 0 || self.eval_every == 0 {
            return bad("batch_size, max_steps and eval_every must be positive");
        }
        if !(0.0..=1.0).contains(&self.augment_prob) {
            return bad("augment_prob must lie in [0, 1]");
        }
        if self.lr_scale.is_nan() || self.lr_scale <= 0.0 {
            return bad("lr_scale must be positive");
        }
        Ok(())
    }
}

/// Starting point of a training run.
#[derive(Clone, Debug)]
pub enum Init {
    /// Fresh weights for `arch`; its vocabulary size and label counts are
    /// replaced by those of `vocab` (built from the corpus when absent) and
    /// `scheme`.
    Scratch {
        arch: ModelConfig,
        scheme: LabelScheme,
        vocab: Option<Vocabulary>,
    },
    /// Continue from trained weights, keeping their vocabulary and scheme.
    From(TrainedModel),
}

#[derive(Clone, Debug)]
pub struct DevPoint {
    pub step: u64,
    pub report: EvalReport,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Best dev checkpoint when a dev set was given, otherwise the last one.
    pub model: TrainedModel,
    /// Training loss per step.
    pub losses: Vec<f64>,
    pub evals: Vec<DevPoint>,
    pub best_step: u64,
    pub steps_run: u64,
    pub optimizer: OptimizerState,
}

impl TrainOutcome {
    /// First evaluated step whose dev report satisfies `pred`.
    pub fn first_step_where(&self, pred: impl Fn(&EvalReport) -> bool) -> Option<u64> {
        self.evals.iter().find(|p| pred(&p.report)).map(|p| p.step)
    }
}

pub fn train(corpus: &[TokenSequence], dev: Option<&[TokenSequence]>, config: &TrainConfig, init: Init) -> Result<TrainOutcome> {
    train_until(corpus, dev, config, init, |_| false)
}

/// Like [`train`], but also stops at the first dev evaluation for which
/// `stop` returns true.
pub fn train_until(
    corpus: &[TokenSequence],
    dev: Option<&[TokenSequence]>,
    config: &TrainConfig,
    init: Init,
    stop: impl Fn(&EvalReport) -> bool,
) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    if let Some(i) = corpus.iter().position(|s| !s.is_labeled() || s.is_empty()) {
        return Err(Error::Training(format!("training utterance {i} is empty or unlabeled")));
    }
    let mut trained = match init {
        Init::From(m) => m,
        Init::Scratch { .. } if config.phase == Phase::Finetune => {
            return Err(Error::Config("the finetune phase needs an initial checkpoint".into()));
        }
        Init::Scratch { mut arch, scheme, vocab } => {
            let vocab = vocab.unwrap_or_else(|| Vocabulary::build(corpus, config.min_freq));
            arch.vocab_size = vocab.len();
            arch.punct_label_count = scheme.punct_labels().len();
            arch.disf_label_count = scheme.disf_labels().len();
            let model = CtTransformer::init(arch, config.seed)?;
            TrainedModel::new(model, vocab, scheme)?
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x005e_ed0f_7a11);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let adam = Adam::default();
    let mut opt = OptimizerState::new(trained.model().params());
    let d_model = trained.model().config().d_model;

    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut losses = Vec::with_capacity(config.max_steps as usize);
    let mut evals = Vec::new();
    let mut best: Option<(f64, u64, TrainedModel)> = None;
    let mut since_best = 0;
    let mut steps_run = 0;

    for step in 1..=config.max_steps {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size.min(corpus.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(corpus[order[cursor]].clone());
            cursor += 1;
        }
        if config.augment {
            batch = truncation_augment(&batch, &mut rng, config.augment_prob);
        }

        let dropout: Option<&mut dyn RngCore> = Some(&mut dropout_rng);
        let (loss, mut grads) = batch_gradients(&trained, &batch, dropout)?;
        let mut refs: Vec<_> = grads.iter_mut().collect();
        clip_gradients(&mut refs, config.clip_norm)?;
        let lr = config.lr_scale * lr_schedule(step, d_model, config.warmup_steps)?;
        adam.step(trained.model_mut().params_mut(), &mut opt, &grads, lr)?;
        losses.push(loss);
        steps_run = step;

        let Some(dev) = dev else { continue };
        if step % config.eval_every != 0 && step != config.max_steps {
            continue;
        }
        let report = evaluate(&trained, dev)?;
        let selection = report.selection_score();
        let done = stop(&report);
        evals.push(DevPoint { step, report });
        if best.as_ref().is_none_or(|(s, _, _)| selection > *s) {
            best = Some((selection, step, trained.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if done || config.patience.is_some_and(|p| since_best >= p) {
            break;
        }
    }

    let (model, best_step) = match best {
        Some((_, step, m)) => (m, step),
        None => (trained, steps_run),
    };
    Ok(TrainOutcome {
        model,
        losses,
        evals,
        best_step,
        steps_run,
        optimizer: opt,
    })
}

/// Mean joint loss over the batch and its gradients, in
/// [`crate::model::Weights::values_mut`] order.
pub fn batch_gradients(
    model: &TrainedModel,
    batch: &[TokenSequence],
    mut dropout: Option<&mut dyn RngCore>,
) -> Result<(f64, Vec<crate::numcore::Tensor>)> {
    let net = model.model();
    let mut tape = Tape::new();
    let vars = net.bind(&mut tape);
    let mut total = None;
    let mut tokens = 0;
    for seq in batch {
        let enc = encode(seq, model.vocab(), model.scheme())?;
        let (Some(p), Some(d)) = (&enc.punct, &enc.disf) else {
            return Err(Error::Training("batch contains an unlabeled utterance".into()));
        };
        let rng = dropout.as_mut().map(|r| &mut **r as &mut dyn RngCore);
        let out = net.forward_on_tape(&mut tape, &vars, &enc.ids, rng)?;
        let l = joint_loss_sum_on_tape(&mut tape, &out, p, d)?;
        total = Some(match total {
            None => l,
            Some(t) => tape.add(t, l)?,
        });
        tokens += enc.ids.len();
    }
    let Some(total) = total else {
        return Err(Error::EmptyInput("training batch"));
    };
    let loss = tape.scale(total, 1.0 / tokens as f64);
    let value = tape.value(loss).data()[0];
    let mut g = tape.backward(loss)?;
    let params = net.params().named();
    let grads = vars
        .named()
        .into_iter()
        .zip(params)
        .map(|((_, &v), (_, p))| g.take(v).unwrap_or_else(|| crate::numcore::Tensor::zeros(p.shape())))
        .collect();
    drop(tape);
    Ok((value, grads))
}

/// Tags every dev utterance and scores it against the gold labels.
pub fn evaluate(model: &TrainedModel, dev: &[TokenSequence]) -> Result<EvalReport> {
    let pred = dev
        .iter()
        .map(|s| model.tag_sequence(s))
        .collect::<Result<Vec<_>>>()?;
    score(&pred, dev, model.scheme())
}
