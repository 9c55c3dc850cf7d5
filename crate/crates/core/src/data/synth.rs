//! Template-grammar corpus generator with heuristic disfluency insertion.
//!
//! Fluent utterances come from a small travel-booking grammar whose
//! punctuation is fully determined by the template: statements end in
//! `PERIOD`, questions in `QUESTION`, and a clause joined by a conjunction
//! ends in `COMMA`. Three rules then add disfluencies:
//!
//! * filler: insert `um`, `uh` or `you know` (`B-IM`, `I-IM`);
//! * repetition: duplicate a 1-3 word span, the first copy becomes `B-RM I-RM..`;
//! * repair: as repetition, but the first copy's content word is swapped for
//!   another word of the same category (`to boston um to denver`).

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::corpus::TokenSequence;
use super::labels::{B_IM, B_RM, COMMA, I_IM, I_RM, OUTSIDE, PERIOD, QUESTION};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Category {
    City,
    Day,
    Item,
    Hour,
}

impl Category {
    fn from_slot(slot: &str) -> Option<Self> {
        match slot {
            "{city}" => Some(Self::City),
            "{day}" => Some(Self::Day),
            "{item}" => Some(Self::Item),
            "{hour}" => Some(Self::Hour),
            _ => None,
        }
    }

    fn words(self) -> &'static [&'static str] {
        match self {
            Self::City => &[
                "boston", "denver", "chicago", "seattle", "dallas", "atlanta", "miami", "houston",
                "phoenix", "portland",
            ],
            Self::Day => &[
                "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
            ],
            Self::Item => &["ticket", "hotel", "car", "seat", "room", "table"],
            Self::Hour => &["noon", "midnight", "nine", "ten", "eleven"],
        }
    }
}

const STATEMENTS: &[&str] = &[
    "i want a flight to {city}",
    "i need a {item} in {city}",
    "we are leaving {city} on {day}",
    "my friend lives in {city}",
    "the flight to {city} leaves on {day}",
    "i would like a {item} for {day}",
    "we need to be in {city} by {hour}",
    "the {item} in {city} is too expensive",
];

const QUESTIONS: &[&str] = &[
    "can you book a flight to {city}",
    "what time does the flight to {city} leave",
    "do you have a {item} for {day}",
    "is there a flight from {city} to {city}",
    "how much is a {item} in {city}",
    "where can i find a {item} near {city}",
];

const CONJUNCTIONS: &[&str] = &["and", "but", "so"];

const FILLERS: &[&[&str]] = &[&["um"], &["uh"], &["you", "know"]];

/// Generator knobs. Probabilities are per utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct GrammarConfig {
    pub filler_prob: f64,
    pub repetition_prob: f64,
    pub repair_prob: f64,
    /// Chance that the final clause is a question.
    pub question_prob: f64,
    /// Chance of a leading statement clause joined by a conjunction.
    pub compound_prob: f64,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            filler_prob: 0.15,
            repetition_prob: 0.10,
            repair_prob: 0.05,
            question_prob: 0.4,
            compound_prob: 0.3,
        }
    }
}

impl GrammarConfig {
    /// No disfluency insertion at all.
    pub fn fluent() -> Self {
        Self {
            filler_prob: 0.0,
            repetition_prob: 0.0,
            repair_prob: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("filler_prob", self.filler_prob),
            ("repetition_prob", self.repetition_prob),
            ("repair_prob", self.repair_prob),
            ("question_prob", self.question_prob),
            ("compound_prob", self.compound_prob),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} is not a probability")));
            }
        }
        if self.repetition_prob + self.repair_prob > 1.0 {
            return Err(Error::Config(
                "repetition_prob + repair_prob must not exceed 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertionKind {
    Filler,
    Repetition,
    Repair,
}

/// One inserted span, in final word positions of its utterance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Insertion {
    pub utterance: usize,
    pub kind: InsertionKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub sequences: Vec<TokenSequence>,
    pub log: Vec<Insertion>,
}

pub fn synth_generate(seed: u64, n_utterances: usize, config: &GrammarConfig) -> Result<Vec<TokenSequence>> {
    synth_generate_logged(seed, n_utterances, config).map(|o| o.sequences)
}

/// Like [`synth_generate`] but also returns every inserted span.
pub fn synth_generate_logged(seed: u64, n_utterances: usize, config: &GrammarConfig) -> Result<SynthOutput> {
    if n_utterances == 0 {
        return Err(Error::EmptyInput("synth needs at least one utterance"));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sequences = Vec::with_capacity(n_utterances);
    let mut log = Vec::new();
    for utterance in 0..n_utterances {
        let mut draft = fluent_utterance(&mut rng, config);
        let mut reparandum: Option<(usize, usize)> = None;

        let u: f64 = rng.random();
        if u < config.repetition_prob {
            let start = rng.random_range(0..draft.len());
            let len = rng.random_range(1..=3.min(draft.len() - start));
            draft.insert_reparandum(start, len, None);
            reparandum = Some((start, len));
            log.push(Insertion { utterance, kind: InsertionKind::Repetition, start, len });
        } else if u < config.repetition_prob + config.repair_prob {
            let content: Vec<usize> = (0..draft.len()).filter(|&i| draft.category[i].is_some()).collect();
            if let Some(&pivot) = content.choose(&mut rng) {
                let len = rng.random_range(1..=3.min(pivot + 1));
                let start = pivot + 1 - len;
                let cat = draft.category[pivot].expect("content word");
                let original = draft.words[pivot].clone();
                let siblings: Vec<&str> = cat.words().iter().copied().filter(|w| *w != original).collect();
                let sibling = siblings.choose(&mut rng).expect("categories have several words");
                draft.insert_reparandum(start, len, Some((pivot - start, sibling.to_string())));
                reparandum = Some((start, len));
                log.push(Insertion { utterance, kind: InsertionKind::Repair, start, len });
            }
        }

        if rng.random_bool(config.filler_prob) {
            let filler = *FILLERS.choose(&mut rng).expect("fillers");
            let pos = match reparandum {
                Some((s, l)) if rng.random_bool(0.5) => s + l,
                _ => {
                    // Any slot before an existing word that does not split the reparandum.
                    let allowed: Vec<usize> = (0..draft.len())
                        .filter(|&p| reparandum.is_none_or(|(s, l)| p <= s || p >= s + l))
                        .collect();
                    *allowed.choose(&mut rng).expect("position 0 is always allowed")
                }
            };
            draft.insert_filler(pos, filler);
            if let Some((s, _)) = reparandum {
                if pos <= s {
                    let entry = log.last_mut().expect("reparandum was logged");
                    entry.start += filler.len();
                }
            }
            log.push(Insertion { utterance, kind: InsertionKind::Filler, start: pos, len: filler.len() });
        }
        sequences.push(draft.finish()?);
    }
    Ok(SynthOutput { sequences, log })
}

fn fluent_utterance(rng: &mut ChaCha8Rng, config: &GrammarConfig) -> Draft {
    let mut draft = Draft::default();
    if rng.random_bool(config.compound_prob) {
        let first = STATEMENTS.choose(rng).expect("templates");
        draft.expand(first, rng);
        draft.set_last_punct(COMMA);
        let conj = CONJUNCTIONS.choose(rng).expect("conjunctions");
        draft.push(conj, None);
    }
    let question = rng.random_bool(config.question_prob);
    let template = if question { QUESTIONS } else { STATEMENTS }
        .choose(rng)
        .expect("templates");
    draft.expand(template, rng);
    draft.set_last_punct(if question { QUESTION } else { PERIOD });
    draft
}

#[derive(Default)]
struct Draft {
    words: Vec<String>,
    punct: Vec<&'static str>,
    disf: Vec<&'static str>,
    category: Vec<Option<Category>>,
}

impl Draft {
    fn from_sequence(seq: &TokenSequence) -> Result<Self> {
        let (Some(punct), Some(disf)) = (seq.punct(), seq.disf()) else {
            return Err(Error::contract("disfluency rules need a labeled sequence"));
        };
        let intern = |l: &str| -> Result<&'static str> {
            [OUTSIDE, COMMA, PERIOD, QUESTION, B_RM, I_RM, B_IM, I_IM]
                .into_iter()
                .find(|k| *k == l)
                .ok_or_else(|| Error::contract(format!("label `{l}` not supported by the generator")))
        };
        Ok(Self {
            words: seq.words().to_vec(),
            punct: punct.iter().map(|l| intern(l)).collect::<Result<_>>()?,
            disf: disf.iter().map(|l| intern(l)).collect::<Result<_>>()?,
            category: seq
                .words()
                .iter()
                .map(|w| {
                    [Category::City, Category::Day, Category::Item, Category::Hour]
                        .into_iter()
                        .find(|c| c.words().contains(&w.as_str()))
                })
                .collect(),
        })
    }

    fn len(&self) -> usize {
        self.words.len()
    }

    fn push(&mut self, word: &str, category: Option<Category>) {
        self.words.push(word.to_string());
        self.punct.push(OUTSIDE);
        self.disf.push(OUTSIDE);
        self.category.push(category);
    }

    fn expand(&mut self, template: &str, rng: &mut ChaCha8Rng) {
        for token in template.split_whitespace() {
            match Category::from_slot(token) {
                Some(cat) => {
                    let word = cat.words().choose(rng).expect("lexicon");
                    self.push(word, Some(cat));
                }
                None => self.push(token, None),
            }
        }
    }

    fn set_last_punct(&mut self, label: &'static str) {
        if let Some(last) = self.punct.last_mut() {
            *last = label;
        }
    }

    /// Inserts a copy of `words[start..start+len]` in front of the span,
    /// optionally replacing the word at offset `replace.0` inside the copy.
    fn insert_reparandum(&mut self, start: usize, len: usize, replace: Option<(usize, String)>) {
        let mut copy: Vec<String> = self.words[start..start + len].to_vec();
        if let Some((offset, word)) = replace {
            copy[offset] = word;
        }
        let cats: Vec<Option<Category>> = self.category[start..start + len].to_vec();
        for (k, (word, cat)) in copy.into_iter().zip(cats).enumerate() {
            let at = start + k;
            self.words.insert(at, word);
            self.punct.insert(at, OUTSIDE);
            self.disf.insert(at, if k == 0 { B_RM } else { I_RM });
            self.category.insert(at, cat);
        }
    }

    fn insert_filler(&mut self, pos: usize, filler: &[&str]) {
        for (k, word) in filler.iter().enumerate() {
            let at = pos + k;
            self.words.insert(at, word.to_string());
            self.punct.insert(at, OUTSIDE);
            self.disf.insert(at, if k == 0 { B_IM } else { I_IM });
            self.category.insert(at, None);
        }
    }

    fn finish(self) -> Result<TokenSequence> {
        TokenSequence::labeled(
            self.words,
            self.punct.into_iter().map(String::from).collect(),
            self.disf.into_iter().map(String::from).collect(),
        )
    }
}

/// Applies the repetition rule to a labeled fluent span of `seq`.
pub fn apply_repetition(seq: &TokenSequence, start: usize, len: usize) -> Result<TokenSequence> {
    if len == 0 || len > 3 || start + len > seq.len() {
        return Err(Error::contract(format!(
            "repetition span {start}+{len} invalid for {} words",
            seq.len()
        )));
    }
    let mut draft = Draft::from_sequence(seq)?;
    draft.insert_reparandum(start, len, None);
    draft.finish()
}

/// Applies the filler rule, inserting `filler` before word `pos`.
pub fn apply_filler(seq: &TokenSequence, pos: usize, filler: &[&str]) -> Result<TokenSequence> {
    if pos > seq.len() || filler.is_empty() {
        return Err(Error::contract("invalid filler insertion"));
    }
    let mut draft = Draft::from_sequence(seq)?;
    draft.insert_filler(pos, filler);
    draft.finish()
}
