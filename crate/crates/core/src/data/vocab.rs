use std::collections::HashMap;

use super::corpus::TokenSequence;
use super::labels::LabelScheme;
use crate::error::{Error, Result};

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Default minimum corpus frequency for a word to get its own id.
pub const DEFAULT_MIN_FREQ: usize = 2;

/// Word-to-id map with reserved padding and unknown-word entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Counts words across `seqs` and keeps those seen at least `min_freq`
    /// times, ordered by descending frequency then alphabetically.
    pub fn build<'a>(seqs: impl IntoIterator<Item = &'a TokenSequence>, min_freq: usize) -> Self {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for seq in seqs {
            for w in seq.words() {
                *counts.entry(w.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(w, c)| c >= min_freq.max(1) && w != PAD && w != UNK)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_words(kept.into_iter().map(|(w, _)| w.to_string()))
            .expect("counted words are unique")
    }

    /// Builds a vocabulary from non-reserved words in id order (ids start at 2).
    pub fn from_words(words: impl IntoIterator<Item = String>) -> Result<Self> {
        let mut all = vec![PAD.to_string(), UNK.to_string()];
        all.extend(words);
        let mut index = HashMap::with_capacity(all.len());
        for (i, w) in all.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary entry `{w}`")));
            }
        }
        Ok(Self { words: all, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word) && word != PAD && word != UNK
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    /// Non-reserved words in id order.
    pub fn entries(&self) -> &[String] {
        &self.words[2..]
    }

    pub fn ids(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| self.id(w)).collect()
    }
}

/// Integer view of a [`TokenSequence`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoded {
    pub ids: Vec<usize>,
    pub punct: Option<Vec<usize>>,
    pub disf: Option<Vec<usize>>,
}

pub fn encode(seq: &TokenSequence, vocab: &Vocabulary, scheme: &LabelScheme) -> Result<Encoded> {
    let punct = seq
        .punct()
        .map(|p| p.iter().map(|l| scheme.check_punct(l)).collect::<Result<Vec<_>>>())
        .transpose()?;
    let disf = seq
        .disf()
        .map(|d| d.iter().map(|l| scheme.check_disf(l)).collect::<Result<Vec<_>>>())
        .transpose()?;
    Ok(Encoded {
        ids: vocab.ids(seq.words()),
        punct,
        disf,
    })
}

/// Inverse of [`encode`]; out-of-vocabulary words come back as `<unk>`.
pub fn decode(enc: &Encoded, vocab: &Vocabulary, scheme: &LabelScheme) -> Result<TokenSequence> {
    let words = enc
        .ids
        .iter()
        .map(|&id| {
            vocab
                .word(id)
                .map(str::to_string)
                .ok_or(Error::Vocabulary { id, size: vocab.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    match (&enc.punct, &enc.disf) {
        (Some(p), Some(d)) => TokenSequence::labeled(
            words,
            p.iter().map(|&i| scheme.punct_name(i).to_string()).collect(),
            d.iter().map(|&i| scheme.disf_name(i).to_string()).collect(),
        ),
        _ => Ok(TokenSequence::unlabeled(words)),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::synth::{synth_generate, GrammarConfig};

    fn seq(text: &str) -> TokenSequence {
        TokenSequence::from_text(text)
    }

    #[test]
    fn build_respects_min_freq_and_order() {
        let seqs = [seq("b a a c"), seq("a b d")];
        let v = Vocabulary::build(&seqs, 2);
        assert_eq!(v.entries(), &["a", "b"]);
        assert_eq!(v.id("a"), 2);
        assert_eq!(v.id("c"), UNK_ID);
        assert_eq!(v.word(PAD_ID), Some(PAD));
        assert_eq!(Vocabulary::build(&seqs, 1).len(), 6);
    }

    #[test]
    fn encode_maps_oov_to_unk() {
        let scheme = LabelScheme::standard();
        let v = Vocabulary::from_words(["hello".to_string()]).unwrap();
        let e = encode(&seq("hello"), &v, &scheme).unwrap();
        assert!(!e.ids.contains(&UNK_ID));
        let e = encode(&seq("hello world"), &v, &scheme).unwrap();
        assert_eq!(e.ids, vec![2, UNK_ID]);
    }

    #[test]
    fn encode_rejects_labels_outside_scheme() {
        let s = TokenSequence::labeled(vec!["x".into()], vec!["ENUM_COMMA".into()], vec!["O".into()]).unwrap();
        let v = Vocabulary::from_words([]).unwrap();
        assert!(encode(&s, &v, &LabelScheme::standard()).is_err());
        assert!(encode(&s, &v, &LabelScheme::with_enum_comma()).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn decode_inverts_encode_up_to_unk(seed in any::<u64>(), min_freq in 1usize..20) {
            let scheme = LabelScheme::standard();
            let corpus = synth_generate(seed, 30, &GrammarConfig::default()).unwrap();
            let vocab = Vocabulary::build(&corpus, min_freq);
            for s in &corpus {
                let back = decode(&encode(s, &vocab, &scheme).unwrap(), &vocab, &scheme).unwrap();
                prop_assert_eq!(back.punct(), s.punct());
                prop_assert_eq!(back.disf(), s.disf());
                for (w, orig) in back.words().iter().zip(s.words()) {
                    if vocab.contains(orig) {
                        prop_assert_eq!(w, orig);
                    } else {
                        prop_assert_eq!(w.as_str(), UNK);
                    }
                }
            }
        }
    }
}
