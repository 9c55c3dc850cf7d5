//! Tokenization, label schemes, corpus files, vocabulary and the synthetic
//! corpus generator.

mod augment;
mod corpus;
pub mod labels;
mod synth;
mod vocab;

pub use augment::{truncation_augment, DEFAULT_AUGMENT_PROB};
pub use corpus::{
    parse_corpus, parse_corpus_str, tokenize, write_corpus, write_corpus_file, TokenSequence,
};
pub use labels::{validate_bio, LabelScheme};
pub use synth::{
    apply_filler, apply_repetition, synth_generate, synth_generate_logged, GrammarConfig,
    Insertion, InsertionKind, SynthOutput,
};
pub use vocab::{decode, encode, Encoded, Vocabulary, DEFAULT_MIN_FREQ, PAD_ID, UNK_ID};
