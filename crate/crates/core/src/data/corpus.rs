//! Column corpus format: one token per line as `word<TAB>punct<TAB>disf`
//! (or `word` alone for unlabeled text), blank lines between utterances.

use std::fs;
use std::path::Path;

use super::labels::{validate_bio, LabelScheme};
use crate::error::{Error, Result};

/// One utterance, optionally with gold labels parallel to the words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSequence {
    words: Vec<String>,
    punct: Option<Vec<String>>,
    disf: Option<Vec<String>>,
}

impl TokenSequence {
    pub fn unlabeled(words: Vec<String>) -> Self {
        Self {
            words,
            punct: None,
            disf: None,
        }
    }

    /// Whitespace tokenization with lowercasing.
    pub fn from_text(text: &str) -> Self {
        Self::unlabeled(tokenize(text))
    }

    pub fn labeled(words: Vec<String>, punct: Vec<String>, disf: Vec<String>) -> Result<Self> {
        if punct.len() != words.len() || disf.len() != words.len() {
            return Err(Error::contract(format!(
                "label lists ({} punct, {} disf) must match {} words",
                punct.len(),
                disf.len(),
                words.len()
            )));
        }
        validate_bio(&disf)?;
        Ok(Self {
            words,
            punct: Some(punct),
            disf: Some(disf),
        })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn punct(&self) -> Option<&[String]> {
        self.punct.as_deref()
    }

    pub fn disf(&self) -> Option<&[String]> {
        self.disf.as_deref()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.punct.is_some() && self.disf.is_some()
    }

    pub fn into_parts(self) -> (Vec<String>, Option<Vec<String>>, Option<Vec<String>>) {
        (self.words, self.punct, self.disf)
    }

    /// Drops gold labels, keeping the words.
    pub fn strip_labels(&self) -> Self {
        Self::unlabeled(self.words.clone())
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

pub fn parse_corpus(path: &Path, scheme: &LabelScheme) -> Result<Vec<TokenSequence>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    parse_corpus_str(&text, scheme).map_err(|e| match e {
        Error::Parse {
            path: None,
            line,
            column,
            message,
        } => Error::Parse {
            path: Some(path.to_path_buf()),
            line,
            column,
            message,
        },
        other => other,
    })
}

pub fn parse_corpus_str(text: &str, scheme: &LabelScheme) -> Result<Vec<TokenSequence>> {
    let mut out = Vec::new();
    let mut pending = Pending::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(seq) = pending.finish()? {
                out.push(seq);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |column: usize, message: String| Error::Parse {
            path: None,
            line: line_no,
            column,
            message,
        };
        if fields.len() != 1 && fields.len() != 3 {
            return Err(err(
                fields.len(),
                format!("expected 1 or 3 tab-separated columns, found {}", fields.len()),
            ));
        }
        match pending.columns {
            None => pending.columns = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(err(
                    fields.len(),
                    format!("column count {} differs from {c} earlier in the utterance", fields.len()),
                ));
            }
            Some(_) => {}
        }
        let word = fields[0].trim();
        if word.is_empty() {
            return Err(err(1, "empty word".into()));
        }
        pending.words.push(word.to_lowercase());
        if fields.len() == 3 {
            let (p, d) = (fields[1].trim(), fields[2].trim());
            scheme.check_punct(p).map_err(|e| err(2, e.to_string()))?;
            scheme.check_disf(d).map_err(|e| err(3, e.to_string()))?;
            if let Some(kind) = d.strip_prefix("I-") {
                let ok = pending.disf.last().is_some_and(|prev: &String| {
                    prev.strip_prefix("B-") == Some(kind) || prev.strip_prefix("I-") == Some(kind)
                });
                if !ok {
                    return Err(err(3, format!("`{d}` does not continue a span (BIO violation)")));
                }
            }
            pending.punct.push(p.to_string());
            pending.disf.push(d.to_string());
        }
    }
    if let Some(seq) = pending.finish()? {
        out.push(seq);
    }
    Ok(out)
}

#[derive(Default)]
struct Pending {
    columns: Option<usize>,
    words: Vec<String>,
    punct: Vec<String>,
    disf: Vec<String>,
}

impl Pending {
    fn finish(&mut self) -> Result<Option<TokenSequence>> {
        let Some(columns) = self.columns.take() else {
            return Ok(None);
        };
        let words = std::mem::take(&mut self.words);
        let punct = std::mem::take(&mut self.punct);
        let disf = std::mem::take(&mut self.disf);
        Ok(Some(if columns == 3 {
            TokenSequence::labeled(words, punct, disf)?
        } else {
            TokenSequence::unlabeled(words)
        }))
    }
}

/// Serializes sequences in the column format. Utterances are separated by a
/// single blank line and the output ends with a newline.
pub fn write_corpus(seqs: &[TokenSequence]) -> String {
    let mut out = String::new();
    for (k, seq) in seqs.iter().enumerate() {
        if k > 0 {
            out.push('\n');
        }
        for i in 0..seq.len() {
            out.push_str(&seq.words[i]);
            if let (Some(p), Some(d)) = (&seq.punct, &seq.disf) {
                out.push('\t');
                out.push_str(&p[i]);
                out.push('\t');
                out.push_str(&d[i]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_corpus_file(path: &Path, seqs: &[TokenSequence]) -> Result<()> {
    fs::write(path, write_corpus(seqs)).map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const EXAMPLE: &str = "i\tO\tO\nwant\tO\tO\na\tO\tO\nflight\tO\tO\nto\tO\tB-RM\nboston\tO\tI-RM\num\tO\tB-IM\nto\tO\tO\ndenver\tPERIOD\tO\n";

    #[test]
    fn example_utterance_round_trips_byte_identically() {
        let scheme = LabelScheme::standard();
        let seqs = parse_corpus_str(EXAMPLE, &scheme).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].len(), 9);
        assert_eq!(
            seqs[0].disf().unwrap().join(" "),
            "O O O O B-RM I-RM B-IM O O"
        );
        assert_eq!(write_corpus(&seqs), EXAMPLE);
    }

    #[test]
    fn empty_and_unlabeled_files() {
        let scheme = LabelScheme::standard();
        assert!(parse_corpus_str("", &scheme).unwrap().is_empty());
        assert!(parse_corpus_str("\n\n", &scheme).unwrap().is_empty());
        let seqs = parse_corpus_str("Hello\nthere\n\n\nagain\n", &scheme).unwrap();
        assert_eq!(seqs.len(), 2);
        assert_eq!(seqs[0].words(), &["hello", "there"]);
        assert!(!seqs[0].is_labeled());
    }

    #[test]
    fn errors_carry_locations() {
        let scheme = LabelScheme::standard();
        let bare = "a\tO\tO\nb\tO\tI-RM\n";
        match parse_corpus_str(bare, &scheme).unwrap_err() {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 3)),
            e => panic!("unexpected {e}"),
        }
        match parse_corpus_str("a\tO\tO\nb\n", &scheme).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        match parse_corpus_str("a\tO\n", &scheme).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            e => panic!("unexpected {e}"),
        }
        match parse_corpus_str("a\tSEMICOLON\tO\n", &scheme).unwrap_err() {
            Error::Parse { column, .. } => assert_eq!(column, 2),
            e => panic!("unexpected {e}"),
        }
        assert!(parse_corpus_str("a\tENUM_COMMA\tO\n", &LabelScheme::with_enum_comma()).is_ok());
    }

    #[test]
    fn labeled_constructor_checks_lengths_and_bio() {
        let w = vec!["a".to_string(), "b".to_string()];
        let o = vec!["O".to_string(), "O".to_string()];
        assert!(TokenSequence::labeled(w.clone(), o.clone(), vec!["O".into()]).is_err());
        assert!(TokenSequence::labeled(w.clone(), o.clone(), vec!["O".into(), "I-IM".into()]).is_err());
        assert!(TokenSequence::labeled(w, o.clone(), o).is_ok());
    }

    fn arb_sequence() -> impl Strategy<Value = TokenSequence> {
        let word = "[a-z]{1,8}";
        let punct = prop::sample::select(vec!["O", "COMMA", "PERIOD", "QUESTION"]);
        let disf = prop::sample::select(vec!["O", "B-RM", "I-RM", "B-IM", "I-IM"]);
        prop::collection::vec((word, punct, disf), 1..12).prop_map(|items| {
            let mut words = Vec::new();
            let mut ps = Vec::new();
            let mut ds: Vec<String> = Vec::new();
            for (w, p, d) in items {
                // Repair invalid continuations into span starts.
                let d = match d.strip_prefix("I-") {
                    Some(kind) if !ds.last().is_some_and(|prev| prev.ends_with(kind) && prev != "O") => {
                        format!("B-{kind}")
                    }
                    _ => d.to_string(),
                };
                words.push(w);
                ps.push(p.to_string());
                ds.push(d);
            }
            TokenSequence::labeled(words, ps, ds).unwrap()
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_write(seqs in prop::collection::vec(arb_sequence(), 0..6)) {
            let text = write_corpus(&seqs);
            let back = parse_corpus_str(&text, &LabelScheme::standard()).unwrap();
            prop_assert_eq!(back, seqs);
        }
    }
}
