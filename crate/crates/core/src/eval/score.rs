use std::fmt::Write as _;

use crate::data::labels::{is_interregnum, is_reparandum, OUTSIDE};
use crate::data::{LabelScheme, TokenSequence};
use crate::error::{Error, Result};

/// True positive, false positive and false negative counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    fn record(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassScore {
    pub label: String,
    pub counts: Counts,
}

impl ClassScore {
    pub fn precision(&self) -> f64 {
        self.counts.precision()
    }

    pub fn recall(&self) -> f64 {
        self.counts.recall()
    }

    pub fn f1(&self) -> f64 {
        self.counts.f1()
    }
}

/// Token-level scores for both tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// One entry per non-`O` punctuation label, in scheme order.
    pub punct: Vec<ClassScore>,
    /// Micro-average over `punct` (pooled counts).
    pub punct_overall: Counts,
    pub interregnum: Counts,
    pub reparandum: Counts,
    /// Tokens inside either kind of disfluency span.
    pub either: Counts,
    pub tokens: usize,
}

impl EvalReport {
    pub fn punct_class(&self, label: &str) -> Option<&ClassScore> {
        self.punct.iter().find(|c| c.label == label)
    }

    /// Mean of overall punctuation F1 and either-type disfluency F1.
    pub fn selection_score(&self) -> f64 {
        (self.punct_overall.f1() + self.either.f1()) / 2.0
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>8}{:>8}{:>8}{:>7}{:>7}{:>7}", "class", "P", "R", "F1", "TP", "FP", "FN");
        let mut row = |name: &str, c: &Counts| {
            let _ = writeln!(
                out,
                "{:<14}{:>8.4}{:>8.4}{:>8.4}{:>7}{:>7}{:>7}",
                name,
                c.precision(),
                c.recall(),
                c.f1(),
                c.tp,
                c.fp,
                c.fn_
            );
        };
        for c in &self.punct {
            row(&c.label, &c.counts);
        }
        row("overall", &self.punct_overall);
        row("interregnum", &self.interregnum);
        row("reparandum", &self.reparandum);
        row("either", &self.either);
        out
    }

    /// `key=value` lines, e.g. `punct.PERIOD.f1=0.981`.
    pub fn to_kv(&self) -> String {
        let mut out = format!("tokens={}\n", self.tokens);
        let mut put = |prefix: &str, c: &Counts| {
            for (k, v) in [("precision", c.precision()), ("recall", c.recall()), ("f1", c.f1())] {
                let _ = writeln!(out, "{prefix}.{k}={v}");
            }
            for (k, v) in [("tp", c.tp), ("fp", c.fp), ("fn", c.fn_)] {
                let _ = writeln!(out, "{prefix}.{k}={v}");
            }
        };
        for c in &self.punct {
            put(&format!("punct.{}", c.label), &c.counts);
        }
        put("punct.overall", &self.punct_overall);
        put("disf.interregnum", &self.interregnum);
        put("disf.reparandum", &self.reparandum);
        put("disf.either", &self.either);
        out
    }
}

/// Scores aligned predictions against gold labels.
pub fn score(pred: &[TokenSequence], gold: &[TokenSequence], scheme: &LabelScheme) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Eval(format!(
            "{} predicted utterances vs {} gold utterances",
            pred.len(),
            gold.len()
        )));
    }
    let classes: Vec<&String> = scheme.punct_labels().iter().filter(|l| *l != OUTSIDE).collect();
    let mut per_class = vec![Counts::default(); classes.len()];
    let mut interregnum = Counts::default();
    let mut reparandum = Counts::default();
    let mut either = Counts::default();
    let mut tokens = 0;

    for (u, (p, g)) in pred.iter().zip(gold).enumerate() {
        let (Some(pp), Some(pd), Some(gp), Some(gd)) = (p.punct(), p.disf(), g.punct(), g.disf()) else {
            return Err(Error::Eval(format!("utterance {u} is missing labels")));
        };
        if p.len() != g.len() {
            return Err(Error::Eval(format!(
                "utterance {u}: {} predicted tokens vs {} gold tokens",
                p.len(),
                g.len()
            )));
        }
        for label in pp.iter().chain(gp) {
            scheme.check_punct(label)?;
        }
        for label in pd.iter().chain(gd) {
            scheme.check_disf(label)?;
        }
        tokens += p.len();
        for t in 0..p.len() {
            for (c, name) in classes.iter().enumerate() {
                per_class[c].record(&pp[t] == *name, &gp[t] == *name);
            }
            let (prm, pim) = (is_reparandum(&pd[t]), is_interregnum(&pd[t]));
            let (grm, gim) = (is_reparandum(&gd[t]), is_interregnum(&gd[t]));
            reparandum.record(prm, grm);
            interregnum.record(pim, gim);
            either.record(prm || pim, grm || gim);
        }
    }

    let mut overall = Counts::default();
    for c in &per_class {
        overall.add(*c);
    }
    Ok(EvalReport {
        punct: classes
            .into_iter()
            .zip(per_class)
            .map(|(label, counts)| ClassScore {
                label: label.clone(),
                counts,
            })
            .collect(),
        punct_overall: overall,
        interregnum,
        reparandum,
        either,
        tokens,
    })
}
