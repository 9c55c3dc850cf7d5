use crate::error::{Error, Result};
use crate::model::ForwardVars;
use crate::numcore::{Tape, Tensor, Var};

/// Token-mean cross entropy of each head, summed.
pub fn joint_loss(punct_logits: &Tensor, disf_logits: &Tensor, punct_gold: &[usize], disf_gold: &[usize]) -> Result<f64> {
    Ok(mean_cross_entropy(punct_logits, punct_gold)? + mean_cross_entropy(disf_logits, disf_gold)?)
}

fn mean_cross_entropy(logits: &Tensor, gold: &[usize]) -> Result<f64> {
    let (rows, cols) = logits.dims2()?;
    if rows != gold.len() {
        return Err(Error::contract(format!("{rows} logit rows for {} gold labels", gold.len())));
    }
    if rows == 0 {
        return Err(Error::EmptyInput("loss over zero tokens"));
    }
    let mut total = 0.0;
    for (r, &g) in gold.iter().enumerate() {
        if g >= cols {
            return Err(Error::contract(format!("gold label {g} with {cols} classes")));
        }
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        total += lse - row[g];
    }
    Ok(total / rows as f64)
}

/// Summed cross entropy of both heads for one sequence, recorded on `tape`.
/// Callers divide the batch total by the token count.
pub fn joint_loss_sum_on_tape(tape: &mut Tape, out: &ForwardVars, punct_gold: &[usize], disf_gold: &[usize]) -> Result<Var> {
    if punct_gold.len() != disf_gold.len() {
        return Err(Error::contract(format!(
            "{} punctuation labels vs {} disfluency labels",
            punct_gold.len(),
            disf_gold.len()
        )));
    }
    let p = tape.cross_entropy_sum(out.punct_logits, punct_gold)?;
    let d = tape.cross_entropy_sum(out.disf_logits, disf_gold)?;
    tape.add(p, d)
}
