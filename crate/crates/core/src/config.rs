//! Flat `key = value` run configuration shared by every CLI subcommand.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::{GrammarConfig, LabelScheme};
use crate::decoding::{ChunkPolicy, DecodePolicy};
use crate::error::{Error, Result};
use crate::masks::MaskSpec;
use crate::model::ModelConfig;
use crate::training::TrainConfig;

/// Which label inventory a run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeName {
    Standard,
    EnumComma,
}

impl SchemeName {
    pub fn build(self) -> LabelScheme {
        match self {
            SchemeName::Standard => LabelScheme::standard(),
            SchemeName::EnumComma => LabelScheme::with_enum_comma(),
        }
    }
}

impl FromStr for SchemeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(SchemeName::Standard),
            "enum_comma" => Ok(SchemeName::EnumComma),
            other => Err(Error::Config(format!(
                "unknown label scheme `{other}` (expected standard or enum_comma)"
            ))),
        }
    }
}

impl std::fmt::Display for SchemeName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SchemeName::Standard => "standard",
            SchemeName::EnumComma => "enum_comma",
        })
    }
}

/// Every tunable of a run. Vocabulary size and label counts in `model` are
/// filled in from the data at training time.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub grammar: GrammarConfig,
    pub decode: DecodePolicy,
    pub chunk: ChunkPolicy,
    pub scheme: SchemeName,
    /// Utterances produced by `synth`.
    pub utterances: usize,
    /// Timed passes in `bench`.
    pub runs: usize,
    lookahead_set: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::toy(0, 0, 0),
            train: TrainConfig::default(),
            grammar: GrammarConfig::default(),
            decode: DecodePolicy::default().with_max_buffer(DEFAULT_MAX_BUFFER),
            chunk: ChunkPolicy::default(),
            scheme: SchemeName::Standard,
            utterances: 1000,
            runs: 5,
            lookahead_set: false,
        }
    }
}

/// Buffer cap for command-line streaming, well inside the default 512
/// positions so a missed sentence end cannot overflow the model.
pub const DEFAULT_MAX_BUFFER: usize = 256;

pub const KEYS: &[&str] = &[
    "d_model",
    "n_layers",
    "n_heads",
    "d_ff",
    "lookahead",
    "max_positions",
    "dropout",
    "batch_size",
    "warmup_steps",
    "max_steps",
    "clip_norm",
    "seed",
    "augment",
    "augment_prob",
    "phase",
    "init_checkpoint",
    "lr_scale",
    "eval_every",
    "patience",
    "min_freq",
    "filler_prob",
    "repetition_prob",
    "repair_prob",
    "question_prob",
    "compound_prob",
    "frame_rate",
    "lookahead_words",
    "max_buffer",
    "chunk",
    "window",
    "min_words_cut",
    "scheme",
    "utterances",
    "runs",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{value}` is not a valid value for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{value}` is not a valid value for `{key}`"))),
    }
}

/// `none` (or empty) means unset.
fn parse_opt<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl RunConfig {
    /// Applies one setting. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "d_model" => self.model.d_model = parse(key, v)?,
            "n_layers" => self.model.n_layers = parse(key, v)?,
            "n_heads" => self.model.n_heads = parse(key, v)?,
            "d_ff" => self.model.d_ff = parse(key, v)?,
            "lookahead" => {
                self.model.mask_spec = v.parse()?;
                self.model.n_layers = self.model.mask_spec.len();
                self.lookahead_set = true;
            }
            "max_positions" => self.model.max_positions = parse(key, v)?,
            "dropout" => self.model.dropout = parse(key, v)?,
            "batch_size" => self.train.batch_size = parse(key, v)?,
            "warmup_steps" => self.train.warmup_steps = parse(key, v)?,
            "max_steps" => self.train.max_steps = parse(key, v)?,
            "clip_norm" => self.train.clip_norm = parse(key, v)?,
            "seed" => self.train.seed = parse(key, v)?,
            "augment" => self.train.augment = parse_bool(key, v)?,
            "augment_prob" => self.train.augment_prob = parse(key, v)?,
            "phase" => self.train.phase = v.parse()?,
            "init_checkpoint" => self.train.init_checkpoint = parse_opt::<PathBuf>(key, v)?,
            "lr_scale" => self.train.lr_scale = parse(key, v)?,
            "eval_every" => self.train.eval_every = parse(key, v)?,
            "patience" => self.train.patience = parse_opt(key, v)?,
            "min_freq" => self.train.min_freq = parse(key, v)?,
            "filler_prob" => self.grammar.filler_prob = parse(key, v)?,
            "repetition_prob" => self.grammar.repetition_prob = parse(key, v)?,
            "repair_prob" => self.grammar.repair_prob = parse(key, v)?,
            "question_prob" => self.grammar.question_prob = parse(key, v)?,
            "compound_prob" => self.grammar.compound_prob = parse(key, v)?,
            "frame_rate" => self.decode.frame_rate = parse(key, v)?,
            "lookahead_words" => self.decode.lookahead_words = parse(key, v)?,
            "max_buffer" => self.decode.max_buffer = parse_opt(key, v)?,
            "chunk" => self.chunk.chunk = parse(key, v)?,
            "window" => self.chunk.window = parse(key, v)?,
            "min_words_cut" => self.chunk.min_words_cut = parse(key, v)?,
            "scheme" => self.scheme = v.parse()?,
            "utterances" => self.utterances = parse(key, v)?,
            "runs" => self.runs = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` (or `key = value`).
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k, v)
    }

    /// Applies a config file's lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped; a key may appear only once.
    pub fn apply_text(&mut self, text: &str, path: Option<&Path>) -> Result<()> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.map(Path::to_path_buf),
                line: i + 1,
                column: 1,
                message,
            };
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(format!("expected `key = value`, got `{line}`")));
            };
            let k = k.trim();
            if seen.contains(&k) {
                return Err(err(format!("`{k}` is set twice")));
            }
            seen.push(k);
            self.set(k, v).map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, None)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::default();
        c.apply_text(&text, Some(path))?;
        Ok(c)
    }

    /// Fills in dependent settings and checks everything. When the layer
    /// count changed without an explicit `lookahead`, the whole 9-word
    /// budget goes to the last layer.
    pub fn resolve(mut self) -> Result<Self> {
        if !self.lookahead_set && self.model.mask_spec.len() != self.model.n_layers {
            self.model.mask_spec = MaskSpec::last_layer(self.model.n_layers, 9);
        }
        if self.model.mask_spec.len() != self.model.n_layers {
            return Err(Error::Config(format!(
                "lookahead lists {} layers but n_layers is {}",
                self.model.mask_spec.len(),
                self.model.n_layers
            )));
        }
        self.train.validate()?;
        self.grammar.validate()?;
        self.decode.validate()?;
        self.chunk.validate()?;
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(self)
    }

    /// Renders every key in a form [`RunConfig::from_text`] reads back.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let g = &self.grammar;
        let opt = |o: Option<String>| o.unwrap_or_else(|| "none".into());
        let values = [
            m.d_model.to_string(),
            m.n_layers.to_string(),
            m.n_heads.to_string(),
            m.d_ff.to_string(),
            m.mask_spec.to_string(),
            m.max_positions.to_string(),
            m.dropout.to_string(),
            t.batch_size.to_string(),
            t.warmup_steps.to_string(),
            t.max_steps.to_string(),
            t.clip_norm.to_string(),
            t.seed.to_string(),
            t.augment.to_string(),
            t.augment_prob.to_string(),
            t.phase.to_string(),
            opt(t.init_checkpoint.as_ref().map(|p| p.display().to_string())),
            t.lr_scale.to_string(),
            t.eval_every.to_string(),
            opt(t.patience.map(|p| p.to_string())),
            t.min_freq.to_string(),
            g.filler_prob.to_string(),
            g.repetition_prob.to_string(),
            g.repair_prob.to_string(),
            g.question_prob.to_string(),
            g.compound_prob.to_string(),
            self.decode.frame_rate.to_string(),
            self.decode.lookahead_words.to_string(),
            opt(self.decode.max_buffer.map(|b| b.to_string())),
            self.chunk.chunk.to_string(),
            self.chunk.window.to_string(),
            self.chunk.min_words_cut.to_string(),
            self.scheme.to_string(),
            self.utterances.to_string(),
            self.runs.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_and_comments() {
        let c = RunConfig::from_text("# toy\nlookahead = 0,0,9\n\nmax_steps=50\nscheme = enum_comma\nmax_buffer = 64\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(c.model.mask_spec, MaskSpec::new(vec![0, 0, 9]));
        assert_eq!(c.model.n_layers, 3);
        assert_eq!(c.train.max_steps, 50);
        assert_eq!(c.scheme, SchemeName::EnumComma);
        assert_eq!(c.decode.max_buffer, Some(64));
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let e = RunConfig::from_text("learning_rate = 1").unwrap_err();
        assert!(e.to_string().contains("unknown configuration key `learning_rate`"), "{e}");
        assert!(matches!(RunConfig::from_text("seed = 1\nseed = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(RunConfig::from_text("seed: 1").is_err());
        assert!(RunConfig::from_text("augment = maybe").is_err());
    }

    #[test]
    fn overrides_apply_after_the_file() {
        let mut c = RunConfig::from_text("seed = 1\nframe_rate = 2").unwrap();
        c.set_pair("seed=9").unwrap();
        assert_eq!(c.train.seed, 9);
        assert_eq!(c.decode.frame_rate, 2);
    }

    #[test]
    fn layer_count_without_lookahead_moves_the_budget() {
        let c = RunConfig::from_text("n_layers = 2").unwrap().resolve().unwrap();
        assert_eq!(c.model.mask_spec, MaskSpec::new(vec![0, 9]));
        let bad = RunConfig::from_text("lookahead = 0,9\nn_layers = 3").unwrap().resolve();
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn rendered_text_round_trips() {
        let mut c = RunConfig::default();
        c.set("patience", "3").unwrap();
        c.set("init_checkpoint", "/tmp/a.ckpt").unwrap();
        c.set("lookahead", "1,full").unwrap();
        let back = RunConfig::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn invalid_combinations_fail_resolution() {
        for bad in ["warmup_steps = 0", "frame_rate = 0", "filler_prob = 2", "runs = 0", "window = 25"] {
            assert!(RunConfig::from_text(bad).unwrap().resolve().is_err(), "{bad}");
        }
    }
}
