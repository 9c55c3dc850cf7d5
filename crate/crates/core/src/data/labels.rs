use std::str::FromStr;

use crate::error::{Error, Result};

pub const OUTSIDE: &str = "O";
pub const COMMA: &str = "COMMA";
pub const PERIOD: &str = "PERIOD";
pub const QUESTION: &str = "QUESTION";
pub const ENUM_COMMA: &str = "ENUM_COMMA";

pub const B_RM: &str = "B-RM";
pub const I_RM: &str = "I-RM";
pub const B_IM: &str = "B-IM";
pub const I_IM: &str = "I-IM";

/// Ordered punctuation and disfluency label sets. `O` is index 0 in both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelScheme {
    punct: Vec<String>,
    disf: Vec<String>,
}

impl Default for LabelScheme {
    fn default() -> Self {
        Self::standard()
    }
}

impl LabelScheme {
    /// Comma, period and question mark.
    pub fn standard() -> Self {
        Self::from_labels(
            [OUTSIDE, COMMA, PERIOD, QUESTION].map(String::from).to_vec(),
            default_disf(),
        )
        .expect("built-in scheme is valid")
    }

    /// Standard scheme plus the enumeration comma.
    pub fn with_enum_comma() -> Self {
        Self::from_labels(
            [OUTSIDE, COMMA, PERIOD, QUESTION, ENUM_COMMA]
                .map(String::from)
                .to_vec(),
            default_disf(),
        )
        .expect("built-in scheme is valid")
    }

    pub fn from_labels(punct: Vec<String>, disf: Vec<String>) -> Result<Self> {
        for (kind, set) in [("punctuation", &punct), ("disfluency", &disf)] {
            if set.first().map(String::as_str) != Some(OUTSIDE) {
                return Err(Error::Config(format!("{kind} labels must start with O")));
            }
            for (i, l) in set.iter().enumerate() {
                if set[..i].contains(l) {
                    return Err(Error::Config(format!("duplicate {kind} label `{l}`")));
                }
            }
        }
        for l in &disf {
            if let Some(kind) = l.strip_prefix("I-") {
                if !disf.iter().any(|b| b.strip_prefix("B-") == Some(kind)) {
                    return Err(Error::Config(format!("`{l}` has no matching B- label")));
                }
            }
        }
        Ok(Self { punct, disf })
    }

    pub fn punct_labels(&self) -> &[String] {
        &self.punct
    }

    pub fn disf_labels(&self) -> &[String] {
        &self.disf
    }

    pub fn punct_index(&self, label: &str) -> Option<usize> {
        self.punct.iter().position(|l| l == label)
    }

    pub fn disf_index(&self, label: &str) -> Option<usize> {
        self.disf.iter().position(|l| l == label)
    }

    pub fn punct_name(&self, index: usize) -> &str {
        &self.punct[index]
    }

    pub fn disf_name(&self, index: usize) -> &str {
        &self.disf[index]
    }

    /// Rewrites every disfluency `I-X` that does not continue a span into
    /// `B-X`, making argmax output a valid BIO sequence.
    pub fn repair_disf(&self, ids: &mut [usize]) {
        let mut prev: Option<&str> = None;
        for id in ids.iter_mut() {
            let label = self.disf[*id].as_str();
            if let Some(kind) = label.strip_prefix("I-") {
                let continues = prev.is_some_and(|p| p.len() > 2 && &p[2..] == kind && p != OUTSIDE);
                if !continues {
                    let begin = format!("B-{kind}");
                    *id = self.disf_index(&begin).expect("scheme pairs every I- with a B-");
                }
            }
            prev = Some(self.disf[*id].as_str());
        }
    }

    pub(crate) fn check_punct(&self, label: &str) -> Result<usize> {
        self.punct_index(label).ok_or_else(|| Error::UnknownLabel {
            kind: "punctuation",
            label: label.to_string(),
        })
    }

    pub(crate) fn check_disf(&self, label: &str) -> Result<usize> {
        self.disf_index(label).ok_or_else(|| Error::UnknownLabel {
            kind: "disfluency",
            label: label.to_string(),
        })
    }
}

impl FromStr for LabelScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::standard()),
            "enum-comma" | "enum_comma" => Ok(Self::with_enum_comma()),
            other => Err(Error::Config(format!(
                "unknown label scheme `{other}` (expected `standard` or `enum-comma`)"
            ))),
        }
    }
}

fn default_disf() -> Vec<String> {
    [OUTSIDE, B_RM, I_RM, B_IM, I_IM].map(String::from).to_vec()
}

/// Checks that every `I-X` continues a `B-X` or `I-X`.
pub fn validate_bio<S: AsRef<str>>(labels: &[S]) -> Result<()> {
    let mut prev: Option<&str> = None;
    for (position, label) in labels.iter().enumerate() {
        let label = label.as_ref();
        if let Some(kind) = label.strip_prefix("I-") {
            let continues = prev.is_some_and(|p| {
                p.strip_prefix("B-") == Some(kind) || p.strip_prefix("I-") == Some(kind)
            });
            if !continues {
                return Err(Error::Bio {
                    position,
                    label: label.to_string(),
                });
            }
        }
        prev = Some(label);
    }
    Ok(())
}

pub fn is_reparandum(label: &str) -> bool {
    label == B_RM || label == I_RM
}

pub fn is_interregnum(label: &str) -> bool {
    label == B_IM || label == I_IM
}

pub fn is_end_of_sentence(label: &str) -> bool {
    label == PERIOD || label == QUESTION
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repair_turns_orphan_inside_tags_into_begins() {
        let s = LabelScheme::standard();
        let ids = |ls: &[&str]| ls.iter().map(|l| s.disf_index(l).unwrap()).collect::<Vec<_>>();
        let mut x = ids(&[I_RM, I_RM, "O", I_IM, B_RM, I_IM, I_RM]);
        s.repair_disf(&mut x);
        assert_eq!(x, ids(&[B_RM, I_RM, "O", B_IM, B_RM, B_IM, B_RM]));
        let names: Vec<&str> = x.iter().map(|&i| s.disf_name(i)).collect();
        validate_bio(&names).unwrap();
    }

    #[test]
    fn outside_is_index_zero() {
        for scheme in [LabelScheme::standard(), LabelScheme::with_enum_comma()] {
            assert_eq!(scheme.punct_index(OUTSIDE), Some(0));
            assert_eq!(scheme.disf_index(OUTSIDE), Some(0));
        }
        assert_eq!(LabelScheme::with_enum_comma().punct_labels().len(), 5);
    }

    #[test]
    fn bio_rules() {
        assert!(validate_bio(&["O", "B-RM", "I-RM", "B-IM", "O"]).is_ok());
        assert!(validate_bio(&["B-IM", "I-IM", "I-IM"]).is_ok());
        let err = validate_bio(&["O", "I-RM"]).unwrap_err();
        assert!(matches!(err, Error::Bio { position: 1, .. }));
        assert!(validate_bio(&["B-IM", "I-RM"]).is_err());
        assert!(validate_bio(&["I-IM"]).is_err());
    }

    #[test]
    fn scheme_validation() {
        assert!(LabelScheme::from_labels(vec!["X".into()], vec!["O".into()]).is_err());
        assert!(LabelScheme::from_labels(vec!["O".into()], vec!["O".into(), "I-X".into()]).is_err());
        assert!("standard".parse::<LabelScheme>().is_ok());
        assert!("bogus".parse::<LabelScheme>().is_err());
    }
}
